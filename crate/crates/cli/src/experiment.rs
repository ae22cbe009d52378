//! Runs one configured experiment, writes its artifacts and a manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ksstrip_core::energy::{empirical_c0, fit_exponential_decay_log};
use ksstrip_core::transforms::{assemble_cole_hopf, make_initial_perturbation};
use ksstrip_core::waves::{check_wave_identities, fit_tail_rates, left_tail_rate};
use ksstrip_core::{
    build_wave, make_grid, run, Error as CoreError, InitialState, IntegratorConfig, Scheme, System,
    TrajectoryRecord, WaveParams, WaveProfile,
};
use log::info;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{serialize, ConfigErrors, Experiment, ExperimentConfig};

pub const VERSION: &str = concat!("ksstrip ", env!("CARGO_PKG_VERSION"));

/// Environment variable naming the directory artifacts are written below.
pub const OUTPUT_ROOT_VAR: &str = "KSSTRIP_OUTPUT_ROOT";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("{0}")]
    Setup(CoreError),
    #[error("{0}")]
    Blowup(CoreError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Blowup { .. } => RunError::Blowup(e),
            e => RunError::Setup(e),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Blowup(_) => 3,
            _ => 2,
        }
    }
}

/// Outcome of a completed run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: Experiment,
    pub pass: bool,
    /// Human-readable result lines.
    pub lines: Vec<String>,
    pub directory: PathBuf,
}

impl RunReport {
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// Resolves the artifact directory of `cfg` below `root`.
pub fn output_dir(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    root.join(&cfg.output.directory)
}

/// Runs `cfg` and writes everything into its output directory. A manifest
/// is written even when the run fails after the directory exists.
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<RunReport, RunError> {
    let dir = output_dir(cfg, root);
    fs::create_dir_all(&dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut art = Artifacts { dir: dir.clone() };
    let result = match cfg.experiment {
        Experiment::Wave => wave(cfg, &mut art),
        Experiment::Stability0 => stability0(cfg, &mut art),
        Experiment::LinearEps => linear_eps(cfg, &mut art),
        Experiment::Planarity => planarity(cfg, &mut art),
        Experiment::Convergence => convergence(cfg, &mut art),
    };
    let status = match &result {
        Ok((true, _)) => "pass".to_string(),
        Ok(_) => "fail".to_string(),
        Err(e) => format!("error: {e}"),
    };
    let manifest = json!({
        "version": VERSION,
        "experiment": cfg.experiment.name(),
        "config": serialize(cfg),
        "started_unix_s": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "wall_clock_s": clock.elapsed().as_secs_f64(),
        "status": status,
    });
    art.json("manifest.json", &manifest)?;
    result.map(|(pass, lines)| RunReport {
        experiment: cfg.experiment,
        pass,
        lines,
        directory: dir,
    })
}

type Verdict = (bool, Vec<String>);

struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    fn write(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let io = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(io)?);
        body(&mut out).and_then(|_| out.flush()).map_err(io)
    }

    fn json(&self, name: &str, value: &Value) -> Result<(), RunError> {
        let text = serde_json::to_string_pretty(value).expect("json values serialize");
        self.write(name, |w| writeln!(w, "{text}"))
    }

    /// Ledger CSV plus optional snapshots of one trajectory.
    fn trajectory(&self, stem: &str, rec: &TrajectoryRecord, dt: f64, every: usize) -> Result<(), RunError> {
        self.write(&format!("{stem}.csv"), |w| rec.ledger.write_csv(w))?;
        for (k, snap) in rec.snapshots.iter().enumerate() {
            let step = k * every;
            let fields = match snap {
                InitialState::Perturbation(p) => {
                    vec![("phi_z", &p.phi.z), ("phi_y", &p.phi.y), ("psi", &p.psi)]
                }
                InitialState::ColeHopf(c) => vec![("n", &c.n), ("q_z", &c.q.z), ("q_y", &c.q.y)],
            };
            for (name, f) in fields {
                self.write(&format!("{stem}_snap{step:06}_{name}.csv"), |w| f.write_csv(w))?;
            }
            info!("snapshot at t = {}", step as f64 * dt);
        }
        Ok(())
    }
}

fn build(cfg: &ExperimentConfig, eps: f64, lambda: f64) -> Result<WaveProfile, RunError> {
    let params = WaveParams::new(eps, cfg.wave.n_minus, cfg.wave.c_plus)?;
    let grid = make_grid(cfg.grid.l_z, cfg.grid.n_z, lambda, cfg.grid.n_y, params.s())?;
    Ok(build_wave(&params, &grid, cfg.wave.tol)?)
}

fn integrator(cfg: &ExperimentConfig, t_end: f64) -> IntegratorConfig {
    let i = &cfg.integrator;
    IntegratorConfig {
        dt: i.dt,
        t_end,
        scheme: i.scheme,
        cfl_safety: i.cfl_safety,
        record_every: i.record_every,
        snapshot_every: cfg.output.snapshot_every,
        psi_transport: i.psi_transport,
        sponge: i.sponge,
        projection: i.projection,
        ..IntegratorConfig::default()
    }
}

/// Runs one trajectory and writes its ledger; a blowup still leaves the
/// partial ledger on disk.
fn trajectory(
    art: &Artifacts,
    stem: &str,
    system: System,
    init: InitialState,
    w: &WaveProfile,
    icfg: &IntegratorConfig,
) -> Result<TrajectoryRecord, RunError> {
    match run(system, init, w, icfg) {
        Ok(rec) => {
            art.trajectory(stem, &rec, icfg.dt, icfg.snapshot_every)?;
            Ok(rec)
        }
        Err(CoreError::Blowup { t, reason, partial }) => {
            if let Some(rec) = &partial {
                art.trajectory(stem, rec, icfg.dt, icfg.snapshot_every)?;
            }
            Err(RunError::Blowup(CoreError::Blowup { t, reason, partial }))
        }
        Err(e) => Err(e.into()),
    }
}

fn check(lines: &mut Vec<String>, ok: bool, text: String) -> bool {
    lines.push(format!("{} {text}", if ok { "PASS" } else { "FAIL" }));
    ok
}

fn wave(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Verdict, RunError> {
    let eps = cfg.wave.eps[0];
    let w = build(cfg, eps, cfg.grid.lambda[0])?;
    art.write("wave_profile.csv", |o| {
        writeln!(o, "z,N,C,P,ln_V,ln_gap")?;
        for i in 0..w.n.len() {
            writeln!(
                o,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                w.grid.z()[i],
                w.n[i],
                w.c[i],
                w.p[i],
                w.ln_v[i],
                w.ln_gap[i]
            )?;
        }
        Ok(())
    })?;
    let ids = check_wave_identities(&w);
    let s = w.s();
    let mut lines = Vec::new();
    let mut pass = check(&mut lines, w.is_monotone(), "N strictly decreasing, C strictly increasing".into());
    let tails = fit_tail_rates(&w);
    let mu = left_tail_rate(s, eps);
    if let Some(r) = ids.p_over_n {
        pass &= check(&mut lines, r < 1e-12, format!("max |P/N + 1/s| = {r:.3e} (< 1e-12)"));
    }
    if let Some(r) = ids.ode_w.filter(|_| eps > 0.0) {
        pass &= check(&mut lines, r < 1e-4, format!("wave ODE residual = {r:.3e} (< 1e-4)"));
        match &tails {
            Ok(t) => {
                let right = (t.right_rate / -s - 1.0).abs();
                let left = (t.left_rate / mu - 1.0).abs();
                pass &= check(
                    &mut lines,
                    right < 0.02 && left < 0.02,
                    format!(
                        "tail rates {:.5} / {:.5}, expected {:.5} / {:.5}",
                        t.right_rate, t.left_rate, -s, mu
                    ),
                );
            }
            Err(e) => pass &= check(&mut lines, false, format!("tail fit: {e}")),
        }
    }
    let tail_json = tails.as_ref().ok().map(|t| {
        json!({"right_rate": t.right_rate, "right_r2": t.right_r2, "left_rate": t.left_rate, "left_r2": t.left_r2})
    });
    art.json(
        "wave_report.json",
        &json!({
            "eps": eps,
            "s": s,
            "n0": w.n0,
            "w_minus": w.w_minus,
            "left_rate": w.left_rate,
            "right_rate": w.right_rate,
            "expected_left_rate": mu,
            "monotone": w.is_monotone(),
            "residuals": {
                "np_density": ids.np_density,
                "np_flux": ids.np_flux,
                "log_derivative": ids.log_derivative,
                "p_over_n": ids.p_over_n,
                "inverse_n": ids.inverse_n,
                "ode_w": ids.ode_w,
            },
            "tail_fit": tail_json,
            "pass": pass,
        }),
    )?;
    Ok((pass, lines))
}

/// Runs `system` to `t_end` and, when `t_end > 0`, to `2 t_end`.
fn doubled(
    cfg: &ExperimentConfig,
    art: &Artifacts,
    system: System,
    init: InitialState,
    w: &WaveProfile,
) -> Result<(TrajectoryRecord, Option<TrajectoryRecord>), RunError> {
    let t_end = cfg.integrator.t_end;
    let a = trajectory(art, "ledger", system, init.clone(), w, &integrator(cfg, t_end))?;
    if t_end == 0.0 {
        return Ok((a, None));
    }
    let mut long = integrator(cfg, 2.0 * t_end);
    long.snapshot_every = 0;
    let b = trajectory(art, "ledger_doubled", system, init, w, &long)?;
    Ok((a, Some(b)))
}

fn stability0(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Verdict, RunError> {
    let w = build(cfg, 0.0, cfg.grid.lambda[0])?;
    let init = make_initial_perturbation(&w.grid, cfg.init.amplitude, cfg.init.seed, cfg.init.mean_zero_y)?;
    let (a, b) = doubled(cfg, art, System::Nonlinear0, init.into(), &w)?;
    let rows = &a.ledger.rows;
    let (first, end) = (&rows[0], rows.last().expect("ledger has a row"));
    let m0 = a.ledger.m0();
    let ratio = end.m_sup / m0;
    let mass = rows.iter().map(|r| (r.mass - first.mass).abs()).fold(0.0, f64::max);
    let c0 = empirical_c0(&a.ledger)?;
    let mut lines = Vec::new();
    let mut pass = check(&mut lines, ratio <= 10.0, format!("M_sup/M0 = {ratio:.4} (<= 10)"));
    pass &= check(&mut lines, mass < 1e-8, format!("mass drift = {mass:.3e} (< 1e-8)"));
    let mut summary = json!({
        "m0": m0,
        "m_sup_ratio": ratio,
        "mass_drift": mass,
        "empirical_c0": c0,
        "d_phi": end.d_phi,
        "d_psi": end.d_psi,
    });
    if let Some(b) = &b {
        let end2 = b.ledger.last().expect("ledger has a row");
        let (d, d2) = (end.d_phi + end.d_psi, end2.d_phi + end2.d_psi);
        let change = if d > 0.0 { (d2 - d).abs() / d } else { 0.0 };
        let decay = end.h3w_grad_phi / first.h3w_grad_phi;
        pass &= check(
            &mut lines,
            change < 0.05,
            format!("D_phi + D_psi change on doubling t_end = {:.3}% (< 5%)", 100.0 * change),
        );
        pass &= check(&mut lines, decay < 1e-2, format!("grad phi H3_w decay = {decay:.3e} (< 1e-2)"));
        summary["d_change_on_doubling"] = json!(change);
        summary["grad_phi_decay"] = json!(decay);
        summary["empirical_c0_doubled"] = json!(empirical_c0(&b.ledger)?);
    }
    lines.push(format!("empirical C0 = {c0:.6}"));
    summary["pass"] = json!(pass);
    art.json("summary.json", &summary)?;
    Ok((pass, lines))
}

fn linear_eps(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Verdict, RunError> {
    let eps = cfg.wave.eps[0];
    let w = build(cfg, eps, cfg.grid.lambda[0])?;
    let init = make_initial_perturbation(&w.grid, cfg.init.amplitude, cfg.init.seed, cfg.init.mean_zero_y)?
        .with_eps(eps);
    let (a, b) = doubled(cfg, art, System::LinearEps, init.into(), &w)?;
    let c0 = empirical_c0(&a.ledger)?;
    let mut drift = a.max_mean_drift;
    let mut lines = Vec::new();
    let mut summary = json!({"m0": a.ledger.m0(), "empirical_c0": c0});
    let mut pass = true;
    let mut bound_rows = a.ledger.rows.clone();
    let mut c0_max = c0;
    if let Some(b) = &b {
        let c0_long = empirical_c0(&b.ledger)?;
        let change = (c0_long - c0).abs() / c0;
        drift = drift.max(b.max_mean_drift);
        pass &= check(
            &mut lines,
            change < 0.05,
            format!("C0 = {c0:.6} at t_end, {c0_long:.6} at 2 t_end, change {:.3}% (< 5%)", 100.0 * change),
        );
        summary["empirical_c0_doubled"] = json!(c0_long);
        summary["c0_change"] = json!(change);
        bound_rows = b.ledger.rows.clone();
        c0_max = c0_long;
    }
    let m0 = a.ledger.m0();
    let bounded = bound_rows
        .iter()
        .all(|r| r.m_sup + r.d_phi + r.d_psi + r.d_psi4 <= c0_max * m0 * (1.0 + 1e-12));
    pass &= check(&mut lines, bounded, "M_sup + D_phi + D_psi + D_psi4 <= C0 M0 on every row".into());
    pass &= check(&mut lines, drift < 1e-12, format!("y-mean drift = {drift:.3e} (< 1e-12)"));
    summary["mean_drift"] = json!(drift);
    summary["pass"] = json!(pass);
    art.json("summary.json", &summary)?;
    Ok((pass, lines))
}

fn planarity(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Verdict, RunError> {
    let t_end = cfg.integrator.t_end;
    let window = (1.0f64.min(t_end), 10.0f64.min(t_end));
    let mut lines = Vec::new();
    let mut pass = true;
    let mut fits = Vec::new();
    for &eps in &cfg.wave.eps {
        let mut by_lambda = Vec::new();
        for &lambda in &cfg.grid.lambda {
            let w = build(cfg, eps, lambda)?;
            let pert = make_initial_perturbation(&w.grid, cfg.init.amplitude, cfg.init.seed, cfg.init.mean_zero_y)?
                .with_eps(eps);
            let init = assemble_cole_hopf(&pert, &w)?;
            let stem = format!("planarity_eps{eps}_lambda{lambda}");
            let rec = trajectory(art, &format!("{stem}_ledger"), System::Nq, init.into(), &w, &integrator(cfg, t_end))?;
            art.write(&format!("{stem}.csv"), |o| rec.ledger.write_planarity_csv(o))?;
            let t = rec.ledger.times();
            let lq: Vec<f64> = rec.ledger.rows.iter().map(|r| r.ln_q).collect();
            match fit_exponential_decay_log(&t, &lq, window) {
                Ok(f) => {
                    pass &= check(
                        &mut lines,
                        f.rate > 0.0 && f.r_squared > 0.99,
                        format!("eps {eps}, lambda {lambda}: c = {:.6}, r2 = {:.6}", f.rate, f.r_squared),
                    );
                    fits.push((eps, lambda, f.rate, f.r_squared, f.samples));
                    by_lambda.push((lambda, f.rate));
                }
                Err(e) => {
                    pass &= check(&mut lines, false, format!("eps {eps}, lambda {lambda}: {e}"));
                    fits.push((eps, lambda, f64::NAN, f64::NAN, 0));
                }
            }
        }
        // smaller periods must decay faster
        by_lambda.sort_by(|a, b| b.0.total_cmp(&a.0));
        if by_lambda.len() > 1 {
            let ordered = by_lambda.windows(2).all(|p| p[1].1 > p[0].1);
            pass &= check(&mut lines, ordered, format!("eps {eps}: rate increases as lambda decreases"));
        }
    }
    art.write("planarity_fits.csv", |o| {
        writeln!(o, "eps,lambda,c,r2,samples")?;
        for (eps, lambda, c, r2, n) in &fits {
            writeln!(o, "{eps},{lambda},{c:.16e},{r2:.16e},{n}")?;
        }
        Ok(())
    })?;
    Ok((pass, lines))
}

fn convergence(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Verdict, RunError> {
    let eps = cfg.wave.eps[0];
    let w = build(cfg, eps, cfg.grid.lambda[0])?;
    let pert = make_initial_perturbation(&w.grid, cfg.init.amplitude, cfg.init.seed, cfg.init.mean_zero_y)?
        .with_eps(eps);
    let system = if eps == 0.0 { System::Nonlinear0 } else { System::LinearEps };
    let mut finals = Vec::new();
    let mut dts = Vec::new();
    for level in 0..4 {
        let mut icfg = integrator(cfg, cfg.integrator.t_end);
        icfg.dt = cfg.integrator.dt / f64::from(1u32 << level);
        icfg.record_every = usize::MAX;
        icfg.snapshot_every = 0;
        let rec = run(system, pert.clone(), &w, &icfg)?;
        match rec.final_state {
            InitialState::Perturbation(p) => finals.push(p),
            InitialState::ColeHopf(_) => unreachable!("perturbation systems return perturbation states"),
        }
        dts.push(icfg.dt);
    }
    let diffs: Vec<f64> = finals
        .windows(2)
        .map(|p| p[0].combine(1.0, &p[1], -1.0).map(|d| d.max_abs()))
        .collect::<Result<_, _>>()?;
    let orders: Vec<f64> = diffs.windows(2).map(|d| (d[0] / d[1]).log2()).collect();
    art.write("convergence.csv", |o| {
        writeln!(o, "dt,diff_to_next,observed_order")?;
        for (k, dt) in dts.iter().enumerate() {
            let d = diffs.get(k).copied().unwrap_or(f64::NAN);
            let p = orders.get(k).copied().unwrap_or(f64::NAN);
            writeln!(o, "{dt:.16e},{d:.16e},{p:.16e}")?;
        }
        Ok(())
    })?;
    let nominal = match cfg.integrator.scheme {
        Scheme::Imex1 => 1.0,
        Scheme::Sbdf2 => 2.0,
    };
    let mut lines: Vec<String> = dts
        .iter()
        .zip(&diffs)
        .map(|(dt, d)| format!("dt {dt:.4e}: change to next level {d:.3e}"))
        .collect();
    let last = *orders.last().expect("four levels give two orders");
    let pass = check(
        &mut lines,
        last >= nominal - 0.5,
        format!("observed order {last:.3} (nominal {nominal})"),
    );
    Ok((pass, lines))
}
