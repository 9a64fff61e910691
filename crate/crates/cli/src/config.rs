use std::path::{Path, PathBuf};

use iwar_core::iwar::ModelParams;
use iwar_core::matcore::{Mat, SymMatrix, Vector};
use iwar_core::mcmc::s_from_rho_v;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Fit,
    Filter,
    Loglik,
    Iwar2Simulate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Fit => "fit",
            Mode::Filter => "filter",
            Mode::Loglik => "loglik",
            Mode::Iwar2Simulate => "iwar2-simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Iwar2Kind {
    Direct,
    #[default]
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HyperModeSpec {
    #[default]
    Diagonal,
    SharedEigen,
    FixedRho,
    Fixed,
}

/// A complete run description. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub seed: u64,
    pub model: ModelSection,
    pub sampler: SamplerSection,
    pub io: IoSection,
}

/// Model specification. `F` is given by `f` or by its diagonal `rho`; `S`
/// by `s` or, with a diagonal `F`, by `v` through `S_ij = V_ij / (1 - ρ_i ρ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub n: f64,
    pub q: Option<usize>,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub f: Option<Vec<Vec<f64>>>,
    pub rho: Option<Vec<f64>>,
    pub s: Option<Vec<Vec<f64>>>,
    pub v: Option<Vec<Vec<f64>>>,
    pub sigma0: Option<Vec<Vec<f64>>>,
    pub h: Option<Vec<Vec<f64>>>,
    pub iwar2: Iwar2Kind,
    /// VAR(r) observation layer.
    pub var: bool,
    pub r: usize,
    /// `r × q` diagonal VAR coefficients for simulation.
    pub a: Option<Vec<Vec<f64>>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            n: 6.0,
            q: None,
            horizon: 400,
            f: None,
            rho: None,
            s: None,
            v: None,
            sigma0: None,
            h: None,
            iwar2: Iwar2Kind::Coupled,
            var: false,
            r: 8,
            a: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub epsilon: f64,
    pub schedule_decay: f64,
    pub schedule_offset: f64,
    pub hyper_mode: HyperModeSpec,
    pub d: f64,
    pub v1: f64,
    pub rho1: Option<Vec<f64>>,
    pub vmat1: Option<Vec<Vec<f64>>>,
    pub c: f64,
    pub rho0: Option<Vec<f64>>,
    pub v0: Option<f64>,
    pub vmat0: Option<Vec<Vec<f64>>>,
    pub adapt: bool,
    /// Leading rows of the input used only to elicit missing centers.
    pub holdout_rows: usize,
    pub elicit_lags: usize,
    pub elicit_grid: usize,
    pub global_move: bool,
    pub innovations_move: bool,
    pub sigma_t_move: bool,
    pub sweeps: usize,
    pub keep_paths: bool,
    /// Prior variance of each VAR coefficient.
    pub var_prior_variance: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            iterations: 5000,
            burn_in: 1000,
            thin: 10,
            chains: 5,
            epsilon: 1e-4,
            schedule_decay: 0.98,
            schedule_offset: 1.0,
            hyper_mode: HyperModeSpec::Diagonal,
            d: 750.0,
            v1: 40.0,
            rho1: None,
            vmat1: None,
            c: 100.0,
            rho0: None,
            v0: None,
            vmat0: None,
            adapt: false,
            holdout_rows: 0,
            elicit_lags: 8,
            elicit_grid: 100,
            global_move: true,
            innovations_move: true,
            sigma_t_move: true,
            sweeps: 1,
            keep_paths: true,
            var_prior_variance: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub input: Option<PathBuf>,
    pub z_input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub write_observations: bool,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection { input: None, z_input: None, output_dir: PathBuf::from("out"), write_observations: true }
    }
}

pub fn matrix(rows: &[Vec<f64>], name: &str) -> CliResult<Mat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(CliError::Config(format!("{name} must be a non-empty rectangular array of rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("{name} has non-finite entries")));
    }
    Ok(Mat::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn sym_matrix(rows: &[Vec<f64>], name: &str) -> CliResult<SymMatrix> {
    SymMatrix::new(matrix(rows, name)?).map_err(|e| CliError::Config(format!("{name}: {e}")))
}

pub fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl ModelSection {
    pub fn f_matrix(&self) -> CliResult<Mat> {
        match (&self.f, &self.rho) {
            (Some(f), None) => matrix(f, "model.f"),
            (None, Some(rho)) => Ok(Mat::from_diagonal(&Vector::from_column_slice(rho))),
            (Some(_), Some(_)) => Err(CliError::Config("give only one of model.f and model.rho".into())),
            (None, None) => Err(CliError::Config("model.f or model.rho is required".into())),
        }
    }

    pub fn s_matrix(&self) -> CliResult<SymMatrix> {
        match (&self.s, &self.v) {
            (Some(s), None) => sym_matrix(s, "model.s"),
            (None, Some(v)) => {
                let f = self.f_matrix()?;
                let q = f.nrows();
                if (0..q).any(|i| (0..q).any(|j| i != j && f[(i, j)] != 0.0)) {
                    return Err(CliError::Config("model.v needs a diagonal F".into()));
                }
                let rho: Vec<f64> = (0..q).map(|i| f[(i, i)]).collect();
                let v = sym_matrix(v, "model.v")?;
                if v.dim() != q {
                    return Err(CliError::Config("model.v must match the dimension of F".into()));
                }
                Ok(s_from_rho_v(&rho, &v))
            }
            (Some(_), Some(_)) => Err(CliError::Config("give only one of model.s and model.v".into())),
            (None, None) => Err(CliError::Config("model.s or model.v is required".into())),
        }
    }

    pub fn params(&self) -> CliResult<ModelParams> {
        let p = ModelParams::new(self.n, self.f_matrix()?, self.s_matrix()?).map_err(CliError::model)?;
        if let Some(q) = self.q {
            if q != p.q() {
                return Err(CliError::Config(format!("model.q = {q} but F is {0} x {0}", p.q())));
            }
        }
        Ok(p)
    }

    pub fn sigma0_matrix(&self) -> CliResult<Option<SymMatrix>> {
        self.sigma0.as_ref().map(|s| sym_matrix(s, "model.sigma0")).transpose()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.exists() {
            return Err(CliError::Config(format!("config file {} does not exist", path.display())));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn check_mode(&self, mode: Mode) -> CliResult<()> {
        match self.mode {
            Some(m) if m != mode => Err(CliError::Config(format!(
                "config is for mode {} but {} was requested",
                m.name(),
                mode.name()
            ))),
            _ => Ok(()),
        }
    }

    pub fn input_path(&self) -> CliResult<&Path> {
        let p = self.io.input.as_deref().ok_or_else(|| CliError::Config("io.input is required".into()))?;
        if !p.exists() {
            return Err(CliError::Config(format!("input file {} does not exist", p.display())));
        }
        Ok(p)
    }
}
