use clap::Parser;

fn main() {
    let cli = robin::Cli::parse();
    if let Err(e) = robin::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
