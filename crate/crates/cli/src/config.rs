//! INI-style experiment configuration: `[section]` headers, `key = value`
//! lines, `#` or `;` comments. Unknown sections and keys are rejected, and
//! every problem found is reported with its line number.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ksstrip_core::{PsiTransport, Scheme};
use log::warn;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Wave,
    Stability0,
    LinearEps,
    Planarity,
    Convergence,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Wave,
        Experiment::Stability0,
        Experiment::LinearEps,
        Experiment::Planarity,
        Experiment::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Wave => "wave",
            Experiment::Stability0 => "stability0",
            Experiment::LinearEps => "linear_eps",
            Experiment::Planarity => "planarity",
            Experiment::Convergence => "convergence",
        }
    }

    fn required_sections(self) -> &'static [&'static str] {
        match self {
            Experiment::Wave => &["grid", "wave"],
            _ => &["grid", "wave", "init", "integrator"],
        }
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub l_z: f64,
    pub n_z: usize,
    /// Several values only for planarity sweeps.
    pub lambda: Vec<f64>,
    pub n_y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveSection {
    /// Several values only for planarity sweeps.
    pub eps: Vec<f64>,
    pub n_minus: f64,
    pub c_plus: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSection {
    pub amplitude: f64,
    pub seed: u64,
    pub mean_zero_y: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub record_every: usize,
    pub cfl_safety: f64,
    pub psi_transport: PsiTransport,
    pub sponge: f64,
    pub projection: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    /// Relative paths are resolved against the output root.
    pub directory: String,
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub grid: GridSection,
    pub wave: WaveSection,
    pub init: InitSection,
    pub integrator: IntegratorSection,
    pub output: OutputSection,
}

/// One diagnostic; `line` is 0 for problems not tied to a line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "{}", self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, issue) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Key table: section, key, default as text, help.
pub const KEYS: &[(&str, &str, &str, &str)] = &[
    ("grid", "L_z", "25", "half-length of the z interval"),
    ("grid", "n_z", "1024", "nodes in z"),
    ("grid", "lambda", "0.5", "strip period; comma list for planarity sweeps"),
    ("grid", "n_y", "16", "nodes in y, even"),
    ("wave", "eps", "0", "chemical diffusion; comma list for planarity sweeps"),
    ("wave", "n_minus", "1", "density behind the front"),
    ("wave", "c_plus", "1", "chemical concentration ahead of the front"),
    ("wave", "tol", "1e-10", "shooting tolerance for eps > 0"),
    ("init", "amplitude", "1e-4", "initial energy M0"),
    ("init", "seed", "7", "seed of the initial perturbation"),
    ("init", "mean_zero_y", "false", "remove y-means (true by default for linear_eps)"),
    ("integrator", "dt", "0.01", "time step"),
    ("integrator", "t_end", "20", "final time"),
    ("integrator", "scheme", "sbdf2", "imex1 or sbdf2"),
    ("integrator", "record_every", "1", "steps between ledger rows"),
    ("integrator", "cfl_safety", "0.5", "CFL safety factor in (0, 1]"),
    ("integrator", "psi_transport", "auto", "auto, upwind or central"),
    ("integrator", "sponge", "0", "peak damping of the boundary sponge, 0 = off"),
    ("integrator", "projection", "false", "project q onto gradients each step"),
    ("output", "directory", "<experiment>", "artifact directory below the output root"),
    ("output", "snapshot_every", "0", "steps between field snapshots, 0 = off"),
];

const SECTIONS: [&str; 5] = ["grid", "wave", "init", "integrator", "output"];

/// Help text listing every key with its default.
pub fn keys_help() -> String {
    let mut out = String::from("Configuration keys (section.key = default):\n");
    for (sec, key, def, help) in KEYS {
        out.push_str(&format!("  {sec}.{key} = {def}  ({help})\n"));
    }
    out
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but untyped configuration.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    experiment: Option<Entry>,
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig, ConfigErrors> {
        let (raw, issues) = Self::parse_lenient(text);
        if issues.is_empty() {
            Ok(raw)
        } else {
            Err(ConfigErrors(issues))
        }
    }

    /// Every section present with no keys set.
    pub fn defaults() -> RawConfig {
        let mut raw = RawConfig::default();
        for sec in SECTIONS {
            raw.sections.insert(sec.to_string(), (0, BTreeMap::new()));
        }
        raw
    }

    /// Keeps whatever parsed cleanly alongside the problems found.
    fn parse_lenient(text: &str) -> (RawConfig, Vec<ConfigIssue>) {
        let mut raw = RawConfig::default();
        let mut issues = Vec::new();
        let mut current: Option<String> = None;
        // keys under an unknown section are not reported again
        let mut skipping = false;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let body = line.split(['#', ';']).next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    issues.push(issue(line_no, format!("malformed section header `{body}`")));
                    continue;
                };
                let name = name.trim().to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    issues.push(issue(
                        line_no,
                        format!("unknown section [{name}] (expected one of {})", SECTIONS.join(", ")),
                    ));
                    current = None;
                    skipping = true;
                    continue;
                }
                skipping = false;
                if raw.sections.contains_key(&name) {
                    issues.push(issue(line_no, format!("duplicate section [{name}]")));
                }
                raw.sections.entry(name.clone()).or_insert((line_no, BTreeMap::new()));
                current = Some(name);
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                issues.push(issue(line_no, format!("expected `key = value`, found `{body}`")));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if skipping {
                continue;
            }
            match &current {
                None if key == "experiment" => {
                    raw.experiment = Some(Entry {
                        value: value.to_string(),
                        line: line_no,
                    })
                }
                None => issues.push(issue(
                    line_no,
                    format!("key `{key}` outside any section (only `experiment` may appear here)"),
                )),
                Some(sec) => {
                    if let Err(e) = raw.insert(sec, key, value, line_no) {
                        issues.push(e);
                    }
                }
            }
        }
        (raw, issues)
    }

    fn insert(&mut self, sec: &str, key: &str, value: &str, line: usize) -> Result<(), ConfigIssue> {
        if !KEYS.iter().any(|(s, k, _, _)| *s == sec && *k == key) {
            return Err(issue(line, format!("unknown key `{key}` in [{sec}]")));
        }
        let (_, map) = self
            .sections
            .entry(sec.to_string())
            .or_insert((line, BTreeMap::new()));
        if let Some(prev) = map.get(key) {
            if prev.line > 0 && line > 0 {
                return Err(issue(line, format!("duplicate key `{key}` (first set on line {})", prev.line)));
            }
        }
        map.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
        Ok(())
    }

    /// Applies a `section.key = value` override, creating the section if
    /// needed. `experiment` is accepted as a bare key.
    pub fn set(&mut self, path: &str, value: &str) -> Result<(), ConfigIssue> {
        if path == "experiment" {
            self.experiment = Some(Entry {
                value: value.to_string(),
                line: 0,
            });
            return Ok(());
        }
        let Some((sec, key)) = path.split_once('.') else {
            return Err(issue(0, format!("override `{path}` must have the form section.key")));
        };
        if !SECTIONS.contains(&sec) {
            return Err(issue(0, format!("override `{path}`: unknown section [{sec}]")));
        }
        self.insert(sec, key, value, 0)
    }

    pub fn experiment_name(&self) -> Option<&str> {
        self.experiment.as_ref().map(|e| e.value.as_str())
    }
}

/// Applies command-line overrides given as `--section.key value` or
/// `--section.key=value`.
pub fn apply_overrides(raw: &mut RawConfig, args: &[String]) -> Result<(), ConfigErrors> {
    let mut issues = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            issues.push(issue(0, format!("unexpected argument `{arg}`; overrides look like --section.key value")));
            continue;
        };
        let (path, value) = match body.split_once('=') {
            Some((p, v)) => (p, v.to_string()),
            None => match it.next() {
                Some(v) => (body, v.clone()),
                None => {
                    issues.push(issue(0, format!("override `{arg}` has no value")));
                    continue;
                }
            },
        };
        if let Err(e) = raw.set(path, &value) {
            issues.push(e);
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(ConfigErrors(issues))
    }
}

/// Config text plus overrides for a run of `experiment`. The text may omit
/// the `experiment` key but must not name a different one; without text
/// every section starts from its defaults.
pub fn load(text: Option<&str>, overrides: &[String], experiment: Experiment) -> Result<ExperimentConfig, ConfigErrors> {
    let (mut raw, mut issues) = match text {
        Some(t) => RawConfig::parse_lenient(t),
        None => (RawConfig::defaults(), Vec::new()),
    };
    if let Some(e) = &raw.experiment {
        if e.value != experiment.name() {
            issues.push(issue(
                e.line,
                format!("config is for `{}` but the subcommand runs `{}`", e.value, experiment.name()),
            ));
        }
    }
    raw.experiment = Some(Entry {
        value: experiment.name().to_string(),
        line: raw.experiment.as_ref().map_or(0, |e| e.line),
    });
    if let Err(e) = apply_overrides(&mut raw, overrides) {
        issues.extend(e.0);
    }
    build_with(&raw, issues)
}

fn issue(line: usize, message: String) -> ConfigIssue {
    ConfigIssue { line, message }
}

/// Typed lookups with defaults, collecting every problem.
struct Reader<'a> {
    raw: &'a RawConfig,
    issues: Vec<ConfigIssue>,
}

impl Reader<'_> {
    fn entry(&self, sec: &str, key: &str) -> (String, usize) {
        if let Some(e) = self.raw.sections.get(sec).and_then(|(_, m)| m.get(key)) {
            return (e.value.clone(), e.line);
        }
        let def = KEYS
            .iter()
            .find(|(s, k, _, _)| *s == sec && *k == key)
            .map(|(_, _, d, _)| *d)
            .expect("key table");
        (def.to_string(), 0)
    }

    fn get<T: FromStr>(&mut self, sec: &str, key: &str, fallback: T) -> (T, usize)
    where
        T::Err: fmt::Display,
    {
        let (text, line) = self.entry(sec, key);
        match text.parse::<T>() {
            Ok(v) => (v, line),
            Err(e) => {
                self.issues.push(issue(line, format!("{sec}.{key} = `{text}`: {e}")));
                (fallback, line)
            }
        }
    }

    fn list(&mut self, sec: &str, key: &str) -> (Vec<f64>, usize) {
        let (text, line) = self.entry(sec, key);
        let mut out = Vec::new();
        for part in text.split(',') {
            match part.trim().parse::<f64>() {
                Ok(v) => out.push(v),
                Err(e) => {
                    self.issues.push(issue(line, format!("{sec}.{key} = `{text}`: {e}")));
                    return (Vec::new(), line);
                }
            }
        }
        (out, line)
    }

    fn check(&mut self, ok: bool, line: usize, message: impl Into<String>) {
        if !ok {
            self.issues.push(issue(line, message.into()));
        }
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "imex1" => Ok(Scheme::Imex1),
        "sbdf2" => Ok(Scheme::Sbdf2),
        _ => Err("expected imex1 or sbdf2".into()),
    }
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Imex1 => "imex1",
        Scheme::Sbdf2 => "sbdf2",
    }
}

fn parse_transport(s: &str) -> Result<PsiTransport, String> {
    match s {
        "auto" => Ok(PsiTransport::Auto),
        "upwind" => Ok(PsiTransport::Upwind),
        "central" => Ok(PsiTransport::Central),
        _ => Err("expected auto, upwind or central".into()),
    }
}

fn transport_name(t: PsiTransport) -> &'static str {
    match t {
        PsiTransport::Auto => "auto",
        PsiTransport::Upwind => "upwind",
        PsiTransport::Central => "central",
    }
}

struct Named<T>(T);

impl FromStr for Named<Scheme> {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_scheme(s).map(Named)
    }
}

impl FromStr for Named<PsiTransport> {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_transport(s).map(Named)
    }
}

/// Types and checks a parsed configuration.
pub fn build_config(raw: &RawConfig) -> Result<ExperimentConfig, ConfigErrors> {
    build_with(raw, Vec::new())
}

fn build_with(raw: &RawConfig, issues: Vec<ConfigIssue>) -> Result<ExperimentConfig, ConfigErrors> {
    let mut r = Reader { raw, issues };
    let experiment = match &raw.experiment {
        None => {
            r.issues.push(issue(0, "missing required key `experiment`".into()));
            None
        }
        Some(e) => match e.value.parse::<Experiment>() {
            Ok(x) => Some(x),
            Err(msg) => {
                r.issues.push(issue(e.line, msg));
                None
            }
        },
    };
    let required: &[&str] = experiment.map_or(&["grid", "wave"], |e| e.required_sections());
    for sec in required {
        if !raw.sections.contains_key(*sec) {
            r.issues.push(issue(0, format!("missing required section [{sec}]")));
        }
    }

    let (l_z, l) = r.get("grid", "L_z", 1.0f64);
    r.check(l_z > 0.0 && l_z.is_finite(), l, format!("grid.L_z must be positive, got {l_z}"));
    let (n_z, l) = r.get("grid", "n_z", 16usize);
    r.check(n_z >= 16, l, format!("grid.n_z must be at least 16, got {n_z}"));
    let (n_y, l) = r.get("grid", "n_y", 16usize);
    r.check(
        n_y >= 4 && n_y % 2 == 0,
        l,
        format!("grid.n_y = {n_y} rejected: the grid needs an even n_y of at least 4"),
    );
    let (lambda, l) = r.list("grid", "lambda");
    for &v in &lambda {
        r.check(v > 0.0 && v <= 2.0, l, format!("grid.lambda must lie in (0, 2], got {v}"));
        if v > 1.0 && v <= 2.0 {
            warn!("lambda = {v} is large; the stability results concern small periods");
        }
    }

    let (eps, l_eps) = r.list("wave", "eps");
    for &v in &eps {
        r.check(v >= 0.0 && v.is_finite(), l_eps, format!("wave.eps must be non-negative, got {v}"));
    }
    let (n_minus, l) = r.get("wave", "n_minus", 1.0f64);
    r.check(n_minus > 0.0 && n_minus.is_finite(), l, format!("wave.n_minus must be positive, got {n_minus}"));
    let (c_plus, l) = r.get("wave", "c_plus", 1.0f64);
    r.check(c_plus > 0.0 && c_plus.is_finite(), l, format!("wave.c_plus must be positive, got {c_plus}"));
    let (tol, l) = r.get("wave", "tol", 1e-10f64);
    r.check(tol > 0.0 && tol <= 1e-4, l, format!("wave.tol must lie in (0, 1e-4], got {tol}"));

    let (amplitude, l) = r.get("init", "amplitude", 1e-4f64);
    r.check(amplitude > 0.0 && amplitude.is_finite(), l, format!("init.amplitude must be positive, got {amplitude}"));
    let (seed, _) = r.get("init", "seed", 0u64);
    let mean_default = experiment == Some(Experiment::LinearEps);
    let (mean_zero_y, l_mean) = r.get("init", "mean_zero_y", false);
    let mean_zero_y = if l_mean == 0 { mean_default } else { mean_zero_y };

    let (dt, l) = r.get("integrator", "dt", 0.01f64);
    r.check(dt > 0.0 && dt.is_finite(), l, format!("integrator.dt must be positive, got {dt}"));
    let (t_end, l) = r.get("integrator", "t_end", 0.0f64);
    r.check(t_end >= 0.0 && t_end.is_finite(), l, format!("integrator.t_end must be non-negative, got {t_end}"));
    if dt > 0.0 && t_end > 0.0 {
        let n = (t_end / dt).round();
        r.check(
            (n * dt - t_end).abs() <= 1e-9 * t_end.max(dt),
            l,
            format!("integrator.t_end = {t_end} is not a multiple of dt = {dt}"),
        );
    }
    if experiment == Some(Experiment::Convergence) {
        r.check(t_end > 0.0, l, "convergence needs integrator.t_end > 0");
    }
    let (Named(scheme), _) = r.get("integrator", "scheme", Named(Scheme::Sbdf2));
    let (record_every, l) = r.get("integrator", "record_every", 1usize);
    r.check(record_every >= 1, l, "integrator.record_every must be at least 1");
    let (cfl_safety, l) = r.get("integrator", "cfl_safety", 0.5f64);
    r.check(
        cfl_safety > 0.0 && cfl_safety <= 1.0,
        l,
        format!("integrator.cfl_safety must lie in (0, 1], got {cfl_safety}"),
    );
    let (Named(psi_transport), _) = r.get("integrator", "psi_transport", Named(PsiTransport::Auto));
    let (sponge, l) = r.get("integrator", "sponge", 0.0f64);
    r.check(sponge >= 0.0 && sponge.is_finite(), l, format!("integrator.sponge must be non-negative, got {sponge}"));
    let (projection, _) = r.get("integrator", "projection", false);

    let (directory, _) = r.entry("output", "directory");
    let directory = if directory == "<experiment>" {
        experiment.map_or_else(String::new, |e| e.name().to_string())
    } else {
        directory
    };
    let (snapshot_every, _) = r.get("output", "snapshot_every", 0usize);

    if let Some(exp) = experiment {
        let sweep = exp == Experiment::Planarity;
        if !sweep && eps.len() > 1 {
            r.issues.push(issue(l_eps, "wave.eps lists are only allowed for planarity".into()));
        }
        if !sweep && lambda.len() > 1 {
            r.issues.push(issue(0, "grid.lambda lists are only allowed for planarity".into()));
        }
        match exp {
            Experiment::Stability0 if eps.iter().any(|&e| e != 0.0) => {
                r.issues.push(issue(l_eps, "stability0 runs the eps = 0 system; set wave.eps = 0".into()))
            }
            Experiment::LinearEps | Experiment::Planarity if eps.iter().any(|&e| e.is_nan() || e <= 0.0) => r
                .issues
                .push(issue(l_eps, format!("{} needs wave.eps > 0", exp.name()))),
            _ => {}
        }
        if exp == Experiment::LinearEps && !mean_zero_y {
            warn!("linear_eps without mean-free data: the y-means are not controlled");
        }
    }

    if !r.issues.is_empty() {
        r.issues.sort_by_key(|i| i.line);
        return Err(ConfigErrors(r.issues));
    }
    Ok(ExperimentConfig {
        experiment: experiment.expect("checked above"),
        grid: GridSection { l_z, n_z, lambda, n_y },
        wave: WaveSection {
            eps,
            n_minus,
            c_plus,
            tol,
        },
        init: InitSection {
            amplitude,
            seed,
            mean_zero_y,
        },
        integrator: IntegratorSection {
            dt,
            t_end,
            scheme,
            record_every,
            cfl_safety,
            psi_transport,
            sponge,
            projection,
        },
        output: OutputSection {
            directory,
            snapshot_every,
        },
    })
}

/// Parses and validates configuration text.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let (raw, issues) = RawConfig::parse_lenient(text);
    build_with(&raw, issues)
}

fn list_text(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Writes every key explicitly; floats use the shortest exact form so the
/// text parses back to the same configuration.
pub fn serialize(cfg: &ExperimentConfig) -> String {
    let g = &cfg.grid;
    let w = &cfg.wave;
    let i = &cfg.init;
    let t = &cfg.integrator;
    let o = &cfg.output;
    format!(
        "experiment = {}\n\n\
         [grid]\nL_z = {:?}\nn_z = {}\nlambda = {}\nn_y = {}\n\n\
         [wave]\neps = {}\nn_minus = {:?}\nc_plus = {:?}\ntol = {:?}\n\n\
         [init]\namplitude = {:?}\nseed = {}\nmean_zero_y = {}\n\n\
         [integrator]\ndt = {:?}\nt_end = {:?}\nscheme = {}\nrecord_every = {}\ncfl_safety = {:?}\n\
         psi_transport = {}\nsponge = {:?}\nprojection = {}\n\n\
         [output]\ndirectory = {}\nsnapshot_every = {}\n",
        cfg.experiment.name(),
        g.l_z,
        g.n_z,
        list_text(&g.lambda),
        g.n_y,
        list_text(&w.eps),
        w.n_minus,
        w.c_plus,
        w.tol,
        i.amplitude,
        i.seed,
        i.mean_zero_y,
        t.dt,
        t.t_end,
        scheme_name(t.scheme),
        t.record_every,
        t.cfl_safety,
        transport_name(t.psi_transport),
        t.sponge,
        t.projection,
        o.directory,
        o.snapshot_every,
    )
}
