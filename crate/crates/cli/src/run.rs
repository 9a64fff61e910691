use std::path::{Path, PathBuf};

use iwar_core::filter::{forward_filter, loglik_x_given_z, loglik_z_approx, AugmentedObs, DofSchedule};
use iwar_core::iwar::{simulate, ModelParams, VarPath};
use iwar_core::iwar2::{simulate_coupled, simulate_direct, Iwar2CoupledParams, Iwar2DirectParams};
use iwar_core::matcore::{mvn_sample, Mat, SymMatrix, Vector};
use iwar_core::mcmc::{
    elicit, run_chain, s_from_rho_v, ChainData, ChainOutput, HyperConfig, HyperMode, HyperPrior, HyperProposal,
    SamplerConfig,
};
use iwar_core::svmodel::{apply_coeffs, CoeffPrior, VarCoeffs};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

use crate::config::{matrix, rows_of, sym_matrix, HyperModeSpec, Iwar2Kind, Mode, RunConfig};
use crate::data::{read_series, sha256_hex, summarize, write_json, write_path, write_rows, write_series};
use crate::error::{CliError, CliResult};

/// One command-line request.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub mode: Mode,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub report: Option<Value>,
    /// Chains stopped early by a numeric failure.
    pub aborted_chains: usize,
}

pub fn execute(inv: &Invocation) -> CliResult<Outcome> {
    let mut cfg = RunConfig::load(&inv.config)?;
    cfg.check_mode(inv.mode)?;
    if let Some(s) = inv.seed {
        cfg.seed = s;
    }
    if let Some(c) = inv.chains {
        cfg.sampler.chains = c;
    }
    if let Some(o) = &inv.out {
        cfg.io.output_dir = o.clone();
    }
    cfg.mode = Some(inv.mode);
    run(cfg)
}

/// Hash of the configuration with the output location removed.
pub fn config_digest(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.io.output_dir = PathBuf::new();
    sha256_hex(c.to_json().as_bytes())
}

pub fn run(mut cfg: RunConfig) -> CliResult<Outcome> {
    let mode = cfg.mode.ok_or_else(|| CliError::Config("mode is required".into()))?;
    let out = cfg.io.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut outcome = match mode {
        Mode::Simulate => simulate_mode(&cfg, &out)?,
        Mode::Fit => fit_mode(&mut cfg, &out)?,
        Mode::Filter => filter_mode(&cfg, &out)?,
        Mode::Loglik => loglik_mode(&cfg, &out)?,
        Mode::Iwar2Simulate => iwar2_mode(&cfg, &out)?,
    };
    let input_hash = match &cfg.io.input {
        Some(p) if p.exists() => Some(sha256_hex(&std::fs::read(p).map_err(|e| CliError::io(p, e))?)),
        _ => None,
    };
    let manifest = out.join("manifest.json");
    outcome.files.push(manifest.clone());
    let names: Vec<String> =
        outcome.files.iter().filter_map(|f| f.file_name()).map(|f| f.to_string_lossy().into_owned()).collect();
    write_json(
        &manifest,
        &json!({
            "tool": "iwar",
            "version": env!("CARGO_PKG_VERSION"),
            "mode": mode.name(),
            "seed": cfg.seed,
            "config_sha256": config_digest(&cfg),
            "input_sha256": input_hash,
            "outputs": names,
            "config": serde_json::to_value(&cfg).expect("config serializes"),
        }),
    )?;
    Ok(outcome)
}

fn observations(path: &VarPath, rng: &mut ChaCha20Rng) -> CliResult<Vec<Vector>> {
    let zero = Vector::zeros(path.dim());
    (1..=path.horizon())
        .map(|t| Ok(mvn_sample(&zero, &path.get(t).cholesky(0.0).map_err(CliError::numeric)?, rng)))
        .collect()
}

fn var_coeffs(cfg: &RunConfig, q: usize) -> CliResult<VarCoeffs> {
    let r = cfg.model.r;
    match &cfg.model.a {
        Some(a) => {
            let m = matrix(a, "model.a")?;
            if m.shape() != (r, q) {
                return Err(CliError::Config(format!("model.a must be {r} x {q}")));
            }
            VarCoeffs::new(m).map_err(CliError::model)
        }
        None => Ok(VarCoeffs::zeros(r, q)),
    }
}

/// `x` itself, or `ξ` with `r` zero presample rows when the VAR layer is on.
fn observed_series(cfg: &RunConfig, q: usize, xs: Vec<Vector>) -> CliResult<Vec<Vector>> {
    if !cfg.model.var {
        return Ok(xs);
    }
    let coeffs = var_coeffs(cfg, q)?;
    let presample = vec![Vector::zeros(q); cfg.model.r];
    apply_coeffs(&presample, &xs, &coeffs).map_err(CliError::numeric)
}

fn write_observations(
    cfg: &RunConfig,
    out: &Path,
    path: &VarPath,
    rng: &mut ChaCha20Rng,
    files: &mut Vec<PathBuf>,
) -> CliResult<()> {
    if cfg.io.write_observations {
        let xs = observations(path, rng)?;
        let series = observed_series(cfg, path.dim(), xs)?;
        let file = out.join("x.csv");
        write_series(&file, path.dim(), &series)?;
        files.push(file);
    }
    Ok(())
}

fn simulate_mode(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let p = cfg.model.params()?;
    let sigma0 = cfg.model.sigma0_matrix()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let sim = simulate(&p, cfg.model.horizon, sigma0.as_ref(), &mut rng).map_err(CliError::model)?;
    let file = out.join("path.csv");
    write_path(&file, &sim.path)?;
    let mut files = vec![file];
    write_observations(cfg, out, &sim.path, &mut rng, &mut files)?;
    Ok(Outcome { files, report: None, aborted_chains: 0 })
}

fn iwar2_mode(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let f = cfg.model.f_matrix()?;
    let s = cfg.model.s_matrix()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let horizon = cfg.model.horizon;
    let mut files = Vec::new();
    let sigma = match cfg.model.iwar2 {
        Iwar2Kind::Direct => {
            let p = Iwar2DirectParams::new(cfg.model.n, f, s).map_err(CliError::model)?;
            simulate_direct(&p, horizon, &mut rng).map_err(CliError::numeric)?.path
        }
        Iwar2Kind::Coupled => {
            let q = f.nrows();
            let h = match &cfg.model.h {
                Some(h) => matrix(h, "model.h")?,
                None => Mat::zeros(q, q),
            };
            let p = Iwar2CoupledParams::new(cfg.model.n, f, s, h).map_err(CliError::model)?;
            let sim = simulate_coupled(&p, horizon, &mut rng).map_err(CliError::numeric)?;
            let psi = out.join("psi_path.csv");
            write_path(&psi, &sim.psi)?;
            files.push(psi);
            sim.sigma
        }
    };
    let file = out.join("path.csv");
    write_path(&file, &sigma)?;
    files.insert(0, file);
    write_observations(cfg, out, &sigma, &mut rng, &mut files)?;
    Ok(Outcome { files, report: None, aborted_chains: 0 })
}

fn schedule(cfg: &RunConfig) -> CliResult<DofSchedule> {
    DofSchedule::for_model(cfg.model.n, cfg.sampler.schedule_decay, cfg.sampler.schedule_offset)
        .map_err(CliError::model)
}

fn read_input(cfg: &RunConfig, q: usize) -> CliResult<Vec<Vector>> {
    let path = cfg.input_path()?;
    let series = read_series(path)?;
    if series.columns.len() != q {
        return Err(CliError::Data(format!(
            "{}: expected {q} columns, found {}",
            path.display(),
            series.columns.len()
        )));
    }
    Ok(series.rows)
}

/// Latent covariates from `io.z_input`, or drawn as `z_t ~ N(0, S)`.
fn latent(cfg: &RunConfig, p: &ModelParams, len: usize) -> CliResult<Vec<Vector>> {
    match &cfg.io.z_input {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::Config(format!("z input {} does not exist", path.display())));
            }
            let series = read_series(path)?;
            if series.columns.len() != p.q() || series.rows.len() != len {
                return Err(CliError::Data(format!(
                    "{}: expected {len} rows of {} columns",
                    path.display(),
                    p.q()
                )));
            }
            Ok(series.rows)
        }
        None => {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            let zero = Vector::zeros(p.q());
            Ok((0..len).map(|_| mvn_sample(&zero, p.s_chol(), &mut rng)).collect())
        }
    }
}

fn filter_mode(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let p = cfg.model.params()?;
    let xs = read_input(cfg, p.q())?;
    let zs = latent(cfg, &p, xs.len())?;
    let ys = zs
        .into_iter()
        .zip(xs)
        .map(|(z, x)| AugmentedObs::new(z, x))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::numeric)?;
    let cache = forward_filter(&p, &ys, &schedule(cfg)?).map_err(CliError::numeric)?;
    let q = p.q();
    let header: Vec<String> = ["t", "r", "i", "j", "mean"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (k, st) in cache.steps().iter().enumerate() {
        let m = st.sigma_law().mean();
        for i in 0..q {
            for j in i..q {
                rows.push(vec![
                    (k + 1).to_string(),
                    st.r.to_string(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    m[(i, j)].to_string(),
                ]);
            }
        }
    }
    let file = out.join("filter.csv");
    write_rows(&file, &header, rows)?;
    Ok(Outcome { files: vec![file], report: None, aborted_chains: 0 })
}

fn loglik_mode(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let p = cfg.model.params()?;
    let xs = read_input(cfg, p.q())?;
    let zs = latent(cfg, &p, xs.len())?;
    let lx = loglik_x_given_z(&p, &xs, &zs).map_err(CliError::numeric)?;
    let lz = loglik_z_approx(&p, &zs, &schedule(cfg)?).map_err(CliError::numeric)?;
    let report = json!({ "T": xs.len(), "loglik_x_given_z": lx, "loglik_z_approx": lz });
    let file = out.join("loglik.json");
    write_json(&file, &report)?;
    Ok(Outcome { files: vec![file], report: Some(report), aborted_chains: 0 })
}

/// Fills missing prior and proposal centers from the held-out rows, or
/// from the fitted rows when there are none.
fn resolve_centers(cfg: &mut RunConfig, held_out: &[Vector], rows: &[Vector]) -> CliResult<()> {
    let s = &cfg.sampler;
    let q = rows.first().map_or(0, Vector::len);
    if s.rho1.is_none() || s.vmat1.is_none() || s.rho0.is_none() || s.vmat0.is_none() {
        let source = if held_out.is_empty() { rows } else { held_out };
        let el = elicit(source, cfg.model.n, s.elicit_lags, s.elicit_grid, 3)
            .map_err(|e| CliError::Data(format!("cannot elicit hyperparameter centers: {e}")))?;
        let v = rows_of(el.v.as_mat());
        let s = &mut cfg.sampler;
        s.rho1.get_or_insert_with(|| el.rho.clone());
        s.vmat1.get_or_insert_with(|| v.clone());
        s.rho0.get_or_insert_with(|| el.rho.clone());
        s.vmat0.get_or_insert(v);
    }
    cfg.sampler.v0.get_or_insert(q as f64 + 2.0);
    Ok(())
}

fn hyper_config(cfg: &RunConfig) -> CliResult<HyperConfig> {
    let s = &cfg.sampler;
    let missing = || CliError::Config("hyperparameter centers are unresolved".into());
    let rho1 = s.rho1.clone().ok_or_else(missing)?;
    let vmat1 = sym_matrix(s.vmat1.as_ref().ok_or_else(missing)?, "sampler.vmat1")?;
    let mode = match s.hyper_mode {
        HyperModeSpec::Diagonal => HyperMode::Diagonal,
        HyperModeSpec::FixedRho => HyperMode::FixedRho,
        HyperModeSpec::SharedEigen => {
            let center = s_from_rho_v(&rho1, &vmat1);
            HyperMode::SharedEigen { basis: center.into_mat().symmetric_eigen().eigenvectors }
        }
        HyperModeSpec::Fixed => HyperMode::Fixed { f: cfg.model.f_matrix()?, s: cfg.model.s_matrix()? },
    };
    Ok(HyperConfig {
        mode,
        prior: HyperPrior {
            c: s.c,
            rho0: s.rho0.clone().ok_or_else(missing)?,
            v0: s.v0.ok_or_else(missing)?,
            vmat0: sym_matrix(s.vmat0.as_ref().ok_or_else(missing)?, "sampler.vmat0")?,
        },
        proposal: HyperProposal { d: s.d, rho1, v1: s.v1, vmat1 },
        adapt: s.adapt,
    })
}

fn run_chains(data: &ChainData, sampler: &SamplerConfig) -> Vec<iwar_core::Result<ChainOutput>> {
    std::thread::scope(|sc| {
        let handles: Vec<_> = (0..sampler.chains)
            .map(|k| {
                sc.spawn(move || {
                    let mut rng = ChaCha20Rng::seed_from_u64(sampler.seed);
                    rng.set_stream(k as u64);
                    run_chain(data, sampler, &mut rng)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    })
}

fn fit_mode(cfg: &mut RunConfig, out: &Path) -> CliResult<Outcome> {
    let input = cfg.input_path()?.to_path_buf();
    let series = read_series(&input)?;
    let q = series.columns.len();
    if let Some(mq) = cfg.model.q {
        if mq != q {
            return Err(CliError::Data(format!("{}: model.q = {mq} but the file has {q} columns", input.display())));
        }
    }
    let hold = cfg.sampler.holdout_rows;
    let lags = if cfg.model.var { cfg.model.r } else { 0 };
    if series.rows.len() <= hold + lags {
        return Err(CliError::Data(format!(
            "{}: {} rows leave no observations after {hold} held-out and {lags} presample rows",
            input.display(),
            series.rows.len()
        )));
    }
    let (held_out, rows) = series.rows.split_at(hold);
    resolve_centers(cfg, held_out, rows)?;
    let hyper = hyper_config(cfg)?;
    let s = &cfg.sampler;
    let mut sampler = SamplerConfig::new(cfg.model.n, hyper);
    sampler.schedule_decay = s.schedule_decay;
    sampler.schedule_offset = s.schedule_offset;
    sampler.epsilon = s.epsilon;
    sampler.iterations = s.iterations;
    sampler.burn_in = s.burn_in;
    sampler.thin = s.thin;
    sampler.chains = s.chains;
    sampler.seed = cfg.seed;
    sampler.global_move = s.global_move;
    sampler.innovations_move = s.innovations_move;
    sampler.sigma_t_move = s.sigma_t_move;
    sampler.sweeps = s.sweeps;
    sampler.keep_paths = s.keep_paths;
    sampler.validate(q).map_err(CliError::model)?;
    let var_prior = if cfg.model.var {
        Some(CoeffPrior::isotropic(lags, q, s.var_prior_variance).map_err(CliError::model)?)
    } else {
        None
    };
    let data = ChainData { xi: rows.to_vec(), var_prior };
    let outputs = run_chains(&data, &sampler)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::numeric)?;
    let diag_f = matches!(s.hyper_mode, HyperModeSpec::Diagonal | HyperModeSpec::FixedRho);
    let mut files = Vec::new();
    for (k, o) in outputs.iter().enumerate() {
        let file = out.join(format!("draws_chain{k}.csv"));
        write_draws(&file, o, q, diag_f)?;
        files.push(file);
    }
    let file = out.join("path_summary.csv");
    write_path_summary(&file, &outputs)?;
    files.push(file);
    let acceptance = acceptance_report(&outputs);
    let file = out.join("acceptance.json");
    write_json(&file, &acceptance)?;
    files.push(file);
    let report = posterior_report(&outputs, sampler.burn_in, q, diag_f);
    let aborted_chains = outputs.iter().filter(|o| o.abort.is_some()).count();
    Ok(Outcome { files, report: Some(report), aborted_chains })
}

fn upper(q: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..q).flat_map(move |i| (i..q).map(move |j| (i, j)))
}

fn write_draws(file: &Path, o: &ChainOutput, q: usize, diag_f: bool) -> CliResult<()> {
    let mut header = vec!["iteration".to_string()];
    if diag_f {
        header.extend((1..=q).map(|i| format!("rho_{i}")));
    } else {
        header.extend((1..=q).flat_map(|i| (1..=q).map(move |j| format!("f_{i}_{j}"))));
    }
    header.extend(upper(q).map(|(i, j)| format!("s_{}_{}", i + 1, j + 1)));
    let lags = o.draws.first().and_then(|d| d.coeffs.as_ref()).map_or(0, |c| c.lags());
    header.extend((1..=lags).flat_map(|l| (1..=q).map(move |j| format!("a_{l}_{j}"))));
    let rows = o.draws.iter().map(|d| {
        let mut row = vec![d.iteration.to_string()];
        if diag_f {
            row.extend((0..q).map(|i| d.f[(i, i)].to_string()));
        } else {
            row.extend((0..q).flat_map(|i| (0..q).map(move |j| d.f[(i, j)].to_string())));
        }
        row.extend(upper(q).map(|(i, j)| d.s[(i, j)].to_string()));
        if let Some(c) = &d.coeffs {
            row.extend(c.a().transpose().iter().map(|v| v.to_string()));
        }
        row
    });
    write_rows(file, &header, rows)
}

fn write_path_summary(file: &Path, outputs: &[ChainOutput]) -> CliResult<()> {
    let paths: Vec<&VarPath> = outputs.iter().flat_map(|o| o.paths.iter().map(|(_, p)| p)).collect();
    let header: Vec<String> =
        ["t", "i", "j", "mean", "q025", "q975", "corr_mean", "corr_q025", "corr_q975"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    if let Some(first) = paths.first() {
        let q = first.dim();
        for t in 0..=first.horizon() {
            for (i, j) in upper(q) {
                let mut vals: Vec<f64> = paths.iter().map(|p| p.get(t)[(i, j)]).collect();
                let mut corr: Vec<f64> = paths
                    .iter()
                    .map(|p| {
                        let m = p.get(t);
                        m[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt()
                    })
                    .collect();
                let (m, lo, hi) = summarize(&mut vals);
                let (cm, clo, chi) = summarize(&mut corr);
                rows.push(
                    [t as f64, (i + 1) as f64, (j + 1) as f64]
                        .iter()
                        .map(|v| (*v as usize).to_string())
                        .chain([m, lo, hi, cm, clo, chi].iter().map(|v| v.to_string()))
                        .collect(),
                );
            }
        }
    }
    write_rows(file, &header, rows)
}

fn acceptance_report(outputs: &[ChainOutput]) -> Value {
    let tally = |t: iwar_core::mcmc::MoveTally| {
        json!({ "accepted": t.accepted, "rejected": t.rejected, "rate": if t.proposed() == 0 { Value::Null } else { json!(t.rate()) } })
    };
    let chains: Vec<Value> = outputs
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let c = &o.counters;
            json!({
                "chain": k,
                "global": tally(c.global),
                "innovations": tally(c.innovations),
                "sigma_t": tally(c.sigma_t),
                "hyper": tally(c.hyper),
                "hyper_invalid": c.hyper_invalid,
                "abort": o.abort.as_ref().map(|a| json!({ "iteration": a.iteration, "error": a.error.to_string() })),
            })
        })
        .collect();
    json!({ "chains": chains })
}

/// Pooled post-burn-in means and central 95% intervals (the initial state
/// alone when nothing follows burn-in).
fn posterior_report(outputs: &[ChainOutput], burn_in: usize, q: usize, diag_f: bool) -> Value {
    let kept: Vec<_> = outputs.iter().flat_map(|o| o.draws.iter().filter(|d| d.iteration > burn_in)).collect();
    let kept = if kept.is_empty() { outputs.iter().flat_map(|o| o.draws.first()).collect() } else { kept };
    let mut out = serde_json::Map::new();
    let mut put = |name: String, mut vals: Vec<f64>| {
        let (m, lo, hi) = summarize(&mut vals);
        out.insert(name, json!({ "mean": m, "q025": lo, "q975": hi }));
    };
    if diag_f {
        for i in 0..q {
            put(format!("rho_{}", i + 1), kept.iter().map(|d| d.f[(i, i)]).collect());
        }
    }
    for (i, j) in upper(q) {
        put(format!("s_{}_{}", i + 1, j + 1), kept.iter().map(|d| d.s[(i, j)]).collect());
    }
    json!({ "draws": kept.len(), "posterior": out })
}

/// `Σ` as nested rows, for reports.
pub fn sym_rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    rows_of(m.as_mat())
}
