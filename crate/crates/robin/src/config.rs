//! Run configuration: a TOML file parsed into raw sections, then validated
//! into core types before anything is solved.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use robin_core::elliptic::{EllipticProblem, OuterBc};
use robin_core::inverse::ReconstructionOptions;
use robin_core::linop::Forward;
use robin_core::parabolic::{ParabolicProblem, Scheme, TimeGrid, TimeTrace};
use robin_core::stability::ProbeMode;
use robin_core::{AnnulusGrid, Boundary, BoundaryTrace, Field, RobinCoefficient};

use crate::csvio::read_columns;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    #[default]
    Elliptic,
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OuterBcName {
    #[default]
    Robin1,
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    #[default]
    Ie,
    Cn,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Ie => Scheme::ImplicitEuler,
            SchemeName::Cn => Scheme::CrankNicolson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Radial,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Harmonic,
    Separated,
    Constant,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DirectionKind {
    #[default]
    Surjectivity,
    Constant,
    Values,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub r1: f64,
    pub r2: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            r1: 1.0,
            r2: 2.0,
            n_r: 129,
            n_theta: 64,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub kind: Kind,
    pub outer_bc: OuterBcName,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub t_final: f64,
    pub n_t: usize,
    pub scheme: SchemeName,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            n_t: 64,
            scheme: SchemeName::Ie,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaSection {
    pub lo: f64,
    pub hi: f64,
    pub constant: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub file: Option<PathBuf>,
}

impl Default for GammaSection {
    fn default() -> Self {
        Self {
            lo: 0.5,
            hi: 3.0,
            constant: None,
            values: None,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub kind: Option<DataKind>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub g: Option<f64>,
    pub h: Option<f64>,
    pub g_file: Option<PathBuf>,
    pub h_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSection {
    pub gamma0: f64,
    pub max_iters: usize,
    pub tol_misfit: f64,
    pub tol_step: f64,
    pub lambda0: f64,
    pub lambda_decrease: f64,
    pub lambda_increase: f64,
    pub noise: f64,
    pub discrepancy_tau: f64,
    pub tikhonov: f64,
    pub check_jacobian: bool,
    pub seed: u64,
    pub data_file: Option<PathBuf>,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        let d = ReconstructionOptions::default();
        Self {
            gamma0: 1.0,
            max_iters: d.max_iters,
            tol_misfit: d.tol_misfit,
            tol_step: d.tol_step,
            lambda0: d.levenberg_lambda0,
            lambda_decrease: d.lambda_decrease,
            lambda_increase: d.lambda_increase,
            noise: 0.0,
            discrepancy_tau: d.discrepancy_tau,
            tikhonov: 0.0,
            check_jacobian: false,
            seed: 0,
            data_file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub b: f64,
    pub n_samples: usize,
    pub mode: ModeName,
    pub seed: u64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            b: 0.1,
            n_samples: 100,
            mode: ModeName::Radial,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySection {
    pub direction: DirectionKind,
    pub value: Option<f64>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleCheckSection {
    pub n_r_levels: Vec<usize>,
    pub n_theta: usize,
    pub parabolic_n_r: usize,
    pub ie_steps: Vec<usize>,
    pub cn_steps: Vec<usize>,
    pub corrupt_c1: f64,
}

impl Default for OracleCheckSection {
    fn default() -> Self {
        Self {
            n_r_levels: vec![33, 65, 129],
            n_theta: 16,
            parabolic_n_r: 129,
            ie_steps: vec![8, 16, 32],
            cn_steps: vec![2, 4, 8],
            corrupt_c1: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub geometry: GeometrySection,
    pub problem: ProblemSection,
    pub time: TimeSection,
    pub gamma: GammaSection,
    pub data: DataSection,
    pub reconstruct: ReconstructSection,
    pub probe: ProbeSection,
    pub sensitivity: SensitivitySection,
    pub oracle_check: OracleCheckSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scheme: Option<SchemeName>,
}

/// Boundary data of the forward problem after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    /// Elliptic data manufactured from `c1 + c2 ln r`.
    Harmonic {
        c1: f64,
        c2: f64,
    },
    /// Parabolic data manufactured from `F(t)(c1 r + c2/r)`, with that
    /// field as initial state.
    Separated {
        c1: f64,
        c2: f64,
    },
    Constant {
        g: f64,
        h: f64,
    },
    /// Node values read from files; stacked time-major when parabolic.
    File {
        g: Vec<f64>,
        h: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    Surjectivity,
    Constant(f64),
    Values(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ReconstructSpec {
    pub gamma0: RobinCoefficient,
    pub options: ReconstructionOptions,
    pub noise: f64,
    pub data: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeSpec {
    pub b: f64,
    pub n_samples: usize,
    pub mode: ProbeMode,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct OracleCheckSpec {
    pub n_r_levels: Vec<usize>,
    pub n_theta: usize,
    pub parabolic_n_r: usize,
    pub ie_steps: Vec<usize>,
    pub cn_steps: Vec<usize>,
    pub corrupt_c1: f64,
}

/// A fully validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: AnnulusGrid,
    pub kind: Kind,
    pub outer_bc: OuterBc,
    pub time: TimeGrid,
    pub scheme: Scheme,
    pub gamma: RobinCoefficient,
    pub data: DataSpec,
    pub reconstruct: ReconstructSpec,
    pub probe: ProbeSpec,
    pub direction: Direction,
    pub oracle_check: OracleCheckSpec,
}

fn field_err(field: &str) -> impl Fn(robin_core::Error) -> CliError + '_ {
    move |e| CliError::invalid(field, e.to_string())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load(path: &Path, overrides: Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
        path: path.to_path_buf(),
        source,
    })?;
    let raw = parse(&text).map_err(|message| CliError::ParseConfig {
        path: path.to_path_buf(),
        message,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    validate(raw, overrides, base)
}

pub fn parse(text: &str) -> std::result::Result<RawConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

fn check_levels(field: &str, v: &[usize], min: usize) -> Result<()> {
    if v.len() < 3 {
        return Err(CliError::invalid(field, "needs at least three levels"));
    }
    if v.iter().any(|&n| n < min) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::invalid(
            field,
            format!("levels must be increasing and at least {min}"),
        ));
    }
    Ok(())
}

pub fn validate(raw: RawConfig, overrides: Overrides, base: &Path) -> Result<RunConfig> {
    let g = &raw.geometry;
    let grid = AnnulusGrid::new(g.r1, g.r2, g.n_r, g.n_theta).map_err(field_err("[geometry]"))?;
    let n = grid.n_theta();

    let kind = raw.problem.kind;
    let outer_bc = match raw.problem.outer_bc {
        OuterBcName::Robin1 => OuterBc::Robin1,
        OuterBcName::Neumann => OuterBc::Neumann,
        OuterBcName::Dirichlet => OuterBc::Dirichlet,
    };
    if kind == Kind::Parabolic && outer_bc != OuterBc::Robin1 {
        return Err(CliError::invalid(
            "[problem].outer_bc",
            "parabolic problems use the Robin outer condition",
        ));
    }

    let time = TimeGrid::new(raw.time.t_final, raw.time.n_t).map_err(field_err("[time]"))?;
    let scheme: Scheme = overrides.scheme.unwrap_or(raw.time.scheme).into();

    let gs = &raw.gamma;
    let given = [
        gs.constant.is_some(),
        gs.values.is_some(),
        gs.file.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if given > 1 {
        return Err(CliError::invalid(
            "[gamma]",
            "give at most one of `constant`, `values`, `file`",
        ));
    }
    let gamma_values = if let Some(v) = &gs.values {
        v.clone()
    } else if let Some(f) = &gs.file {
        let p = resolve(base, f);
        read_columns(&p, &["gamma"])?.remove(0)
    } else {
        vec![gs.constant.unwrap_or(1.5); n]
    };
    if gamma_values.len() != n {
        return Err(CliError::invalid(
            "[gamma]",
            format!("expected {n} values, found {}", gamma_values.len()),
        ));
    }
    let gamma = RobinCoefficient::new(gamma_values, gs.lo, gs.hi).map_err(field_err("[gamma]"))?;

    let d = &raw.data;
    let data_kind = d.kind.unwrap_or(match kind {
        Kind::Elliptic => DataKind::Harmonic,
        Kind::Parabolic => DataKind::Separated,
    });
    let data = match (data_kind, kind) {
        (DataKind::Harmonic, Kind::Elliptic) => DataSpec::Harmonic {
            c1: d.c1.unwrap_or(2.0),
            c2: d.c2.unwrap_or(-1.0),
        },
        (DataKind::Separated, Kind::Parabolic) => DataSpec::Separated {
            c1: d.c1.unwrap_or(1.0),
            c2: d.c2.unwrap_or(1.0),
        },
        (DataKind::Harmonic, Kind::Parabolic) => {
            return Err(CliError::invalid(
                "[data].kind",
                "`harmonic` data is elliptic only",
            ))
        }
        (DataKind::Separated, Kind::Elliptic) => {
            return Err(CliError::invalid(
                "[data].kind",
                "`separated` data is parabolic only",
            ))
        }
        (DataKind::Constant, _) => DataSpec::Constant {
            g: d.g.unwrap_or(1.0),
            h: d.h.unwrap_or(1.0),
        },
        (DataKind::File, _) => {
            let rows = match kind {
                Kind::Elliptic => n,
                Kind::Parabolic => n * (time.n_t() + 1),
            };
            let read = |field: &str, f: &Option<PathBuf>| -> Result<Vec<f64>> {
                let f = f
                    .as_ref()
                    .ok_or_else(|| CliError::invalid(field, "required for `file` data"))?;
                let v = read_columns(&resolve(base, f), &["value"])?.remove(0);
                if v.len() != rows {
                    return Err(CliError::invalid(
                        field,
                        format!("expected {rows} rows, found {}", v.len()),
                    ));
                }
                Ok(v)
            };
            DataSpec::File {
                g: read("[data].g_file", &d.g_file)?,
                h: read("[data].h_file", &d.h_file)?,
            }
        }
    };
    for (field, v) in [
        ("[data].c1", d.c1),
        ("[data].c2", d.c2),
        ("[data].g", d.g),
        ("[data].h", d.h),
    ] {
        if v.is_some_and(|x| !x.is_finite()) {
            return Err(CliError::invalid(field, "must be finite"));
        }
    }

    let rs = &raw.reconstruct;
    let gamma0 = RobinCoefficient::constant(n, rs.gamma0, gs.lo, gs.hi)
        .map_err(field_err("[reconstruct].gamma0"))?;
    if !(rs.noise >= 0.0 && rs.noise.is_finite()) {
        return Err(CliError::invalid(
            "[reconstruct].noise",
            "must be a nonnegative relative level",
        ));
    }
    let options = ReconstructionOptions {
        max_iters: rs.max_iters,
        tol_misfit: rs.tol_misfit,
        tol_step: rs.tol_step,
        levenberg_lambda0: rs.lambda0,
        lambda_decrease: rs.lambda_decrease,
        lambda_increase: rs.lambda_increase,
        noise_level: 0.0,
        discrepancy_tau: rs.discrepancy_tau,
        tikhonov: (rs.tikhonov > 0.0).then(|| (rs.tikhonov, gamma0.clone())),
        check_jacobian: rs.check_jacobian,
        seed: overrides.seed.unwrap_or(rs.seed),
    };
    options.validate().map_err(field_err("[reconstruct]"))?;
    if rs.tikhonov < 0.0 {
        return Err(CliError::invalid(
            "[reconstruct].tikhonov",
            "must be nonnegative",
        ));
    }
    let measured = match &rs.data_file {
        None => None,
        Some(f) => {
            let v = read_columns(&resolve(base, f), &["value"])?.remove(0);
            let rows = match kind {
                Kind::Elliptic => n,
                Kind::Parabolic => n * (time.n_t() + 1),
            };
            if v.len() != rows {
                return Err(CliError::invalid(
                    "[reconstruct].data_file",
                    format!("expected {rows} rows, found {}", v.len()),
                ));
            }
            Some(v)
        }
    };

    let ps = &raw.probe;
    if !(ps.b > 0.0 && ps.b.is_finite()) {
        return Err(CliError::invalid("[probe].b", "must be positive"));
    }
    let probe = ProbeSpec {
        b: ps.b,
        n_samples: ps.n_samples,
        mode: match ps.mode {
            ModeName::Radial => ProbeMode::RadialOnly,
            ModeName::Full => ProbeMode::FullAngle,
        },
        seed: overrides.seed.unwrap_or(ps.seed),
    };

    let ss = &raw.sensitivity;
    let direction = match ss.direction {
        // data and coefficient requirements are checked when the direction is used
        DirectionKind::Surjectivity => Direction::Surjectivity,
        DirectionKind::Constant => Direction::Constant(
            ss.value
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::invalid("[sensitivity].value", "required, finite"))?,
        ),
        DirectionKind::Values => {
            let v = ss
                .values
                .clone()
                .ok_or_else(|| CliError::invalid("[sensitivity].values", "required"))?;
            if v.len() != n {
                return Err(CliError::invalid(
                    "[sensitivity].values",
                    format!("expected {n} values, found {}", v.len()),
                ));
            }
            Direction::Values(v)
        }
    };

    let oc = &raw.oracle_check;
    check_levels("[oracle_check].n_r_levels", &oc.n_r_levels, 3)?;
    check_levels("[oracle_check].ie_steps", &oc.ie_steps, 1)?;
    check_levels("[oracle_check].cn_steps", &oc.cn_steps, 1)?;
    if oc.n_theta < 1 || oc.parabolic_n_r < 3 || !oc.corrupt_c1.is_finite() {
        return Err(CliError::invalid(
            "[oracle_check]",
            "n_theta >= 1, parabolic_n_r >= 3 and a finite corrupt_c1 are required",
        ));
    }

    Ok(RunConfig {
        grid,
        kind,
        outer_bc,
        time,
        scheme,
        gamma,
        data,
        reconstruct: ReconstructSpec {
            gamma0,
            options,
            noise: rs.noise,
            data: measured,
        },
        probe,
        direction,
        oracle_check: OracleCheckSpec {
            n_r_levels: oc.n_r_levels.clone(),
            n_theta: oc.n_theta,
            parabolic_n_r: oc.parabolic_n_r,
            ie_steps: oc.ie_steps.clone(),
            cn_steps: oc.cn_steps.clone(),
            corrupt_c1: oc.corrupt_c1,
        },
    })
}

impl RunConfig {
    /// Forward map evaluated at `gamma`, keeping the data g, h built from
    /// the configured coefficient.
    pub fn forward_at(&self, gamma: &RobinCoefficient) -> robin_core::Result<Forward> {
        self.forward()?.with_gamma(gamma.clone())
    }

    /// Forward problem at the configured coefficient.
    pub fn forward(&self) -> robin_core::Result<Forward> {
        let gamma = &self.gamma;
        let grid = self.grid.clone();
        let n = grid.n_theta();
        Ok(match self.kind {
            Kind::Elliptic => {
                let p = match &self.data {
                    DataSpec::Harmonic { c1, c2 } => EllipticProblem::radial_manufactured(
                        grid,
                        gamma.clone(),
                        *c1,
                        *c2,
                        self.outer_bc,
                    )?,
                    DataSpec::Constant { g, h } => EllipticProblem::new(
                        grid.clone(),
                        gamma.clone(),
                        Field::zeros(&grid),
                        BoundaryTrace::constant(Boundary::Inner, n, *g),
                        BoundaryTrace::constant(Boundary::Outer, n, *h),
                    )?
                    .with_outer_bc(self.outer_bc),
                    DataSpec::File { g, h } => EllipticProblem::new(
                        grid.clone(),
                        gamma.clone(),
                        Field::zeros(&grid),
                        BoundaryTrace::new(Boundary::Inner, g.clone()),
                        BoundaryTrace::new(Boundary::Outer, h.clone()),
                    )?
                    .with_outer_bc(self.outer_bc),
                    DataSpec::Separated { .. } => unreachable!("rejected by validation"),
                };
                Forward::Elliptic(p)
            }
            Kind::Parabolic => {
                let p = match &self.data {
                    DataSpec::Separated { c1, c2 } => ParabolicProblem::separated_manufactured(
                        grid,
                        gamma.clone(),
                        self.time,
                        self.scheme,
                        *c1,
                        *c2,
                    )?,
                    DataSpec::Constant { g, h } => ParabolicProblem::constant_data(
                        grid,
                        gamma.clone(),
                        self.time,
                        self.scheme,
                        *g,
                        *h,
                    )?,
                    DataSpec::File { g, h } => ParabolicProblem::new(
                        grid,
                        gamma.clone(),
                        TimeTrace::from_stacked(Boundary::Inner, n, g),
                        TimeTrace::from_stacked(Boundary::Outer, n, h),
                        self.time,
                        self.scheme,
                    )?,
                    DataSpec::Harmonic { .. } => unreachable!("rejected by validation"),
                };
                Forward::Parabolic(p)
            }
        })
    }
}
