use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ksstrip-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn ksstrip(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksstrip"))
        .args(args)
        .env("KSSTRIP_OUTPUT_ROOT", root)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn wave_defaults_meet_the_identity() {
    let r = root("wave");
    let out = ksstrip(&r, &["wave"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = json(&r.join("wave/wave_report.json"));
    let residual = report["residuals"]["p_over_n"].as_f64().unwrap();
    assert!(residual < 1e-12);
    let profile = fs::read_to_string(r.join("wave/wave_profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 1025);
    let manifest = json(&r.join("wave/manifest.json"));
    assert_eq!(manifest["status"], "pass");
    assert!(manifest["version"].as_str().unwrap().starts_with("ksstrip "));
    assert!(manifest["wall_clock_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn zero_horizon_gives_one_ledger_row() {
    let r = root("zero");
    let out = ksstrip(&r, &["evolve", "--grid.n_z", "129", "--integrator.t_end", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let ledger = fs::read_to_string(r.join("stability0/ledger.csv")).unwrap();
    let lines: Vec<&str> = ledger.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "t,H3w_phi,H3_psi,H2w_grad_psi,M_inst,M_sup,D_phi,D_psi,D_psi4,Q,mass,C0_running");
}

#[test]
fn config_errors_exit_with_two_and_list_every_problem() {
    let r = root("bad");
    let cfg = r.join("bad.ini");
    fs::write(&cfg, "experiment = wave\n[grid]\nn_y = 7\nwidth = 3\n[wave]\neps = -1\n").unwrap();
    let out = ksstrip(&r, &["wave", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("line 3") && err.contains("even"), "{err}");
    assert!(err.contains("line 4") && err.contains("width"), "{err}");
    assert!(err.contains("line 6") && err.contains("eps"), "{err}");

    let empty = r.join("empty.ini");
    fs::write(&empty, "").unwrap();
    let out = ksstrip(&r, &["linear", "--config", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    for sec in ["[grid]", "[wave]", "[init]", "[integrator]"] {
        assert!(err.contains(sec), "{err}");
    }

    let out = ksstrip(&r, &["evolve", "--grid.bogus", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("bogus"));
}

#[test]
fn blowup_exits_with_three_and_keeps_the_partial_ledger() {
    let r = root("blowup");
    // central transport of psi without diffusion is unstable at this step
    let out = ksstrip(
        &r,
        &[
            "evolve",
            "--grid.n_z",
            "257",
            "--grid.L_z",
            "10",
            "--integrator.psi_transport",
            "central",
            "--integrator.cfl_safety",
            "1",
            "--integrator.dt",
            "0.05",
            "--integrator.t_end",
            "100",
            "--integrator.record_every",
            "20",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", text(&out.stderr));
    let ledger = fs::read_to_string(r.join("stability0/ledger.csv")).unwrap();
    assert!(ledger.lines().count() > 2);
    let manifest = json(&r.join("stability0/manifest.json"));
    assert!(manifest["status"].as_str().unwrap().contains("blowup"));
}

#[test]
fn planarity_rate_grows_when_the_period_halves() {
    let r = root("planarity");
    let out = ksstrip(
        &r,
        &[
            "planarity",
            "--grid.n_z",
            "257",
            "--grid.lambda",
            "0.5, 0.25",
            "--wave.eps",
            "0.1",
            "--integrator.t_end",
            "5",
            "--integrator.record_every",
            "10",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let fits = fs::read_to_string(r.join("planarity/planarity_fits.csv")).unwrap();
    let rates: Vec<f64> = fits
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 2);
    assert!(rates[0] > 0.0 && rates[1] > rates[0], "{rates:?}");
    assert!(r.join("planarity/planarity_eps0.1_lambda0.25.csv").exists());
}

#[test]
fn runs_are_bitwise_deterministic() {
    let r = root("determinism");
    let args = |dir: &'static str| {
        vec![
            "linear",
            "--grid.n_z",
            "129",
            "--wave.eps",
            "0.05",
            "--integrator.t_end",
            "1",
            "--output.directory",
            dir,
        ]
    };
    for dir in ["a", "b"] {
        let out = ksstrip(&r, &args(dir));
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    }
    for file in ["ledger.csv", "ledger_doubled.csv", "summary.json"] {
        let a = fs::read(r.join("a").join(file)).unwrap();
        let b = fs::read(r.join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
}

#[test]
fn config_file_and_overrides_combine() {
    let r = root("combine");
    let cfg = r.join("run.ini");
    fs::write(
        &cfg,
        "# eps > 0 wave on a coarse grid\n[grid]\nn_z = 257\n[wave]\neps = 0.01\n[output]\ndirectory = coarse\n",
    )
    .unwrap();
    let out = ksstrip(&r, &["wave", "--config", cfg.to_str().unwrap(), "--wave.eps=0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = json(&r.join("coarse/wave_report.json"));
    assert_eq!(report["eps"].as_f64(), Some(0.1));
}

#[test]
fn snapshots_are_written_on_request() {
    let r = root("snapshots");
    let out = ksstrip(
        &r,
        &["evolve", "--grid.n_z", "65", "--integrator.t_end", "0.1", "--output.snapshot_every", "5"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    for step in [0, 5, 10] {
        assert!(r.join(format!("stability0/ledger_snap{step:06}_psi.csv")).exists());
    }
}

#[test]
fn help_lists_keys_and_defaults() {
    let out = Command::new(env!("CARGO_BIN_EXE_ksstrip")).args(["evolve", "--help"]).output().unwrap();
    let help = text(&out.stdout);
    assert!(help.contains("grid.n_y = 16"), "{help}");
    assert!(help.contains("integrator.scheme = sbdf2"));
    let out = Command::new(env!("CARGO_BIN_EXE_ksstrip")).arg("nonsense").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
