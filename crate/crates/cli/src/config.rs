//! Flat `key = value` run configuration.
//!
//! Keys carry a section prefix: `exp.`, `src.`, `opt.` or `budget.`. Bob's
//! source keys end in `_b`; Bob copies Alice for every key left out. Each key
//! may appear once per file; `--set` overrides win over the file.

use std::fmt;
use std::path::{Path, PathBuf};

use snskit::keyrate::solve_mu1_bob;
use snskit::optimizer::{OptimizationProblem, PartyBox, Symmetry};
use snskit::{
    security_budget, BudgetOverrides, ExperimentalParams, Method, PartySource, PhaseSelection,
    SecurityBudget, SourceParams, ZigzagMode,
};

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line { file: String, line: usize },
    Override(usize),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line { file, line } => write!(f, "{file}:{line}"),
            Origin::Override(i) => write!(f, "--set #{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub origin: Option<Origin>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(entry: &Entry, message: impl Into<String>) -> Self {
        Self {
            origin: Some(entry.origin.clone()),
            key: Some(entry.key.clone()),
            message: message.into(),
        }
    }

    fn plain(message: impl Into<String>) -> Self {
        Self {
            origin: None,
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(o) = &self.origin {
            write!(f, "{o}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "{k}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    origin: Origin,
}

const EXP_KEYS: [&str; 13] = [
    "preset",
    "p_d",
    "e_d",
    "eta_d",
    "f",
    "alpha_f",
    "n_pulses",
    "l_a",
    "l_b",
    "distance",
    "offset",
    "m_slices",
    "phase_selection",
];

const OPT_KEYS: [&str; 11] = [
    "symmetry",
    "method",
    "mode",
    "restarts",
    "max_evals",
    "tolerance",
    "seed",
    "distances",
    "start",
    "out",
    "trace",
];

const BUDGET_KEYS: [&str; 12] = [
    "xi_default",
    "xi_e1",
    "xi_mcdiarmid",
    "eps_def",
    "xi_tau",
    "xi_tau_tilde",
    "eps_cor",
    "eps_pa",
    "eps_hat",
    "eps_n1_prime",
    "eps_nk",
    "finite_key",
];

/// Source field name and party (0 Alice, 1 Bob) of `name`, with or without `_b`.
fn source_field(name: &str) -> Option<(usize, usize)> {
    let (base, party) = match name.strip_suffix("_b") {
        Some(b) => (b, 1),
        None => (name, 0),
    };
    PartySource::FIELD_NAMES
        .iter()
        .position(|f| *f == base)
        .map(|i| (party, i))
}

fn is_known(key: &str) -> bool {
    let Some((section, name)) = key.split_once('.') else {
        return false;
    };
    match section {
        "exp" => EXP_KEYS.contains(&name),
        "src" => source_field(name).is_some(),
        "budget" => BUDGET_KEYS.contains(&name),
        "opt" => {
            OPT_KEYS.contains(&name)
                || ["lo.", "hi."].iter().any(|p| {
                    name.strip_prefix(p)
                        .is_some_and(|f| source_field(f).is_some())
                })
        }
        _ => false,
    }
}

/// Whether the optimizer starts from the configured source or its default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Default,
    Source,
}

/// Everything a subcommand needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub exp: ExperimentalParams,
    pub src: SourceParams,
    pub budget: SecurityBudget,
    pub method: Method,
    pub mode: ZigzagMode,
    pub symmetry: Symmetry,
    pub restarts: usize,
    pub max_evals: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub alice_box: PartyBox,
    pub bob_box: PartyBox,
    pub distances: Option<Vec<f64>>,
    pub start: Start,
    pub out: Option<PathBuf>,
    pub trace: bool,
}

impl RunConfig {
    /// Optimization problem at the configured distance.
    pub fn problem(&self) -> OptimizationProblem {
        let mut p = OptimizationProblem::new(self.exp, self.symmetry, self.method);
        p.mode = self.mode;
        p.budget = self.budget;
        p.alice_box = self.alice_box;
        p.bob_box = self.bob_box;
        p.restarts = self.restarts;
        p.max_evals = self.max_evals;
        p.tolerance = self.tolerance;
        p.seed = self.seed;
        p.record_trace = self.trace;
        p.initial = match self.start {
            Start::Default => None,
            Start::Source => Some(self.src),
        };
        p
    }
}

fn parse_lines(text: &str, file: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let origin = Origin::Line {
            file: file.to_string(),
            line: i + 1,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError {
                origin: Some(origin),
                key: None,
                message: format!("expected `key = value`, found `{line}`"),
            });
        };
        let entry = Entry {
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            origin,
        };
        if let Some(first) = out.iter().find(|e| e.key == entry.key) {
            return Err(ConfigError::at(
                &entry,
                format!("duplicate key, first set at {}", first.origin),
            ));
        }
        out.push(entry);
    }
    Ok(out)
}

fn parse_override(i: usize, text: &str) -> Result<Entry, ConfigError> {
    let origin = Origin::Override(i);
    let Some((key, value)) = text.split_once('=') else {
        return Err(ConfigError {
            origin: Some(origin),
            key: None,
            message: format!("expected `key=value`, found `{text}`"),
        });
    };
    Ok(Entry {
        key: key.trim().to_string(),
        value: value.trim().to_string(),
        origin,
    })
}

fn number(e: &Entry) -> Result<f64, ConfigError> {
    match e.value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ConfigError::at(
            e,
            format!("`{}` is not a finite number", e.value),
        )),
    }
}

fn integer<T: std::str::FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value
        .parse::<T>()
        .map_err(|_| ConfigError::at(e, format!("`{}` is not a non-negative integer", e.value)))
}

fn boolean(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => Err(ConfigError::at(e, format!("`{v}` is not a boolean"))),
    }
}

/// Comma-separated list or an inclusive `start:stop:step` range. Empty means
/// no distances.
pub fn parse_distances(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let num = |s: &str| -> Result<f64, String> {
        match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
            _ => Err(format!("`{}` is not a non-negative distance", s.trim())),
        }
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err("range must be `start:stop:step`".into());
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || stop < start {
            return Err("range needs step > 0 and stop >= start".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| start + step * i as f64).collect());
    }
    text.split(',').map(num).collect()
}

/// Builds a [`RunConfig`] from an optional file and `--set` overrides.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, LoadError> {
    let mut entries = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| LoadError::Io(p.to_path_buf(), e))?;
            parse_lines(&text, &p.display().to_string())?
        }
        None => Vec::new(),
    };
    for (i, o) in overrides.iter().enumerate() {
        let entry = parse_override(i + 1, o)?;
        entries.retain(|e| e.key != entry.key);
        entries.push(entry);
    }
    Ok(build(&entries)?)
}

#[derive(Debug)]
pub enum LoadError {
    Io(PathBuf, std::io::Error),
    Config(ConfigError),
}

impl From<ConfigError> for LoadError {
    fn from(e: ConfigError) -> Self {
        LoadError::Config(e)
    }
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            LoadError::Config(e) => e.fmt(f),
        }
    }
}

fn build(entries: &[Entry]) -> Result<RunConfig, ConfigError> {
    if let Some(e) = entries.iter().find(|e| !is_known(&e.key)) {
        return Err(ConfigError::at(e, "unknown key"));
    }
    let get = |key: &str| entries.iter().find(|e| e.key == key);

    let mut exp = match get("exp.preset") {
        None => ExperimentalParams::baseline(0.0),
        Some(e) => match e.value.as_str() {
            "baseline" => ExperimentalParams::baseline(0.0),
            "field_402" => ExperimentalParams::field_402(),
            "field_502" => ExperimentalParams::field_502(),
            v => return Err(ConfigError::at(e, format!("unknown preset `{v}`"))),
        },
    };
    for e in entries.iter().filter(|e| e.key.starts_with("exp.")) {
        match &e.key[4..] {
            "p_d" => exp.p_d = number(e)?,
            "e_d" => exp.e_d = number(e)?,
            "eta_d" => exp.eta_d = number(e)?,
            "f" => exp.f = number(e)?,
            "alpha_f" => exp.alpha_f = number(e)?,
            "n_pulses" => exp.n_pulses = number(e)?,
            "l_a" => exp.l_a = number(e)?,
            "l_b" => exp.l_b = number(e)?,
            "m_slices" => exp.m_slices = integer(e)?,
            "phase_selection" => {
                exp.phase_selection = match e.value.as_str() {
                    "sliced" => PhaseSelection::Sliced,
                    "ideal" => PhaseSelection::Ideal,
                    v => {
                        return Err(ConfigError::at(
                            e,
                            format!("`{v}` is not `sliced` or `ideal`"),
                        ))
                    }
                }
            }
            _ => {}
        }
    }
    let arms_given = get("exp.l_a").or(get("exp.l_b"));
    match (get("exp.distance"), arms_given) {
        (Some(d), Some(arm)) => {
            return Err(ConfigError::at(
                arm,
                format!("conflicts with exp.distance at {}", d.origin),
            ));
        }
        (Some(d), None) => {
            let offset = get("exp.offset").map(number).transpose()?.unwrap_or(0.0);
            exp = exp.with_distance(number(d)?, offset);
        }
        (None, _) => {
            if let Some(o) = get("exp.offset") {
                return Err(ConfigError::at(o, "needs exp.distance"));
            }
        }
    }
    if let Err(err) = exp.validate() {
        return Err(core_error(entries, "exp", err));
    }

    let mut overrides = BudgetOverrides::default();
    let mut finite_key = true;
    for e in entries.iter().filter(|e| e.key.starts_with("budget.")) {
        let slot = match &e.key[7..] {
            "xi_default" => &mut overrides.xi_default,
            "xi_e1" => &mut overrides.xi_e1,
            "xi_mcdiarmid" => &mut overrides.xi_mcdiarmid,
            "eps_def" => &mut overrides.eps_def,
            "xi_tau" => &mut overrides.xi_tau,
            "xi_tau_tilde" => &mut overrides.xi_tau_tilde,
            "eps_cor" => &mut overrides.eps_cor,
            "eps_pa" => &mut overrides.eps_pa,
            "eps_hat" => &mut overrides.eps_hat,
            "eps_n1_prime" => &mut overrides.eps_n1_prime,
            "eps_nk" => &mut overrides.eps_nk,
            _ => {
                finite_key = boolean(e)?;
                continue;
            }
        };
        *slot = Some(number(e)?);
    }
    let mut budget =
        security_budget(&overrides).map_err(|err| core_error(entries, "budget", err))?;
    budget.finite_key = finite_key;

    let mut fields = [PartySource::default().to_array(), [f64::NAN; 7]];
    for e in entries.iter().filter(|e| e.key.starts_with("src.")) {
        let (party, i) = source_field(&e.key[4..]).expect("checked above");
        fields[party][i] = number(e)?;
    }
    let [alice, bob] = &mut fields;
    for (b, a) in bob.iter_mut().zip(alice.iter()) {
        if b.is_nan() {
            *b = *a;
        }
    }
    let mut src = SourceParams {
        alice: PartySource::from_array(fields[0]),
        bob: PartySource::from_array(fields[1]),
    };
    if !exp.is_symmetric() && get("src.mu_1_b").is_none() {
        src.bob.mu_1 = solve_mu1_bob(&src);
    }
    if let Err(err) = src.validate() {
        return Err(core_error(entries, "src", err));
    }

    let mut boxes = [PartyBox::default(), PartyBox::default()];
    for e in entries
        .iter()
        .filter(|e| e.key.starts_with("opt.lo.") || e.key.starts_with("opt.hi."))
    {
        let (party, i) = source_field(&e.key[7..]).expect("checked above");
        let v = number(e)?;
        if !(v > 0.0) {
            return Err(ConfigError::at(e, "bounds must be positive"));
        }
        if e.key.starts_with("opt.lo.") {
            boxes[party].lo[i] = v;
        } else {
            boxes[party].hi[i] = v;
        }
    }

    let mut cfg = RunConfig {
        exp,
        src,
        budget,
        method: Method::A,
        mode: ZigzagMode::Approx,
        symmetry: if exp.is_symmetric() {
            Symmetry::Symmetric
        } else {
            Symmetry::Asymmetric
        },
        restarts: 8,
        max_evals: 5000,
        tolerance: 1e-6,
        seed: 0,
        alice_box: boxes[0],
        bob_box: boxes[1],
        distances: None,
        start: Start::Default,
        out: None,
        trace: false,
    };
    for e in entries.iter().filter(|e| e.key.starts_with("opt.")) {
        match &e.key[4..] {
            "symmetry" => {
                cfg.symmetry = match e.value.as_str() {
                    "symmetric" => Symmetry::Symmetric,
                    "asymmetric" => Symmetry::Asymmetric,
                    v => {
                        return Err(ConfigError::at(
                            e,
                            format!("`{v}` is not `symmetric` or `asymmetric`"),
                        ))
                    }
                }
            }
            "method" => {
                cfg.method = e
                    .value
                    .parse()
                    .map_err(|_| ConfigError::at(e, "expected `A` or `B`"))?
            }
            "mode" => {
                cfg.mode = e
                    .value
                    .parse()
                    .map_err(|_| ConfigError::at(e, "expected `approx` or `exact`"))?
            }
            "restarts" => cfg.restarts = positive(e)?,
            "max_evals" => cfg.max_evals = positive(e)?,
            "tolerance" => {
                cfg.tolerance = number(e)?;
                if !(cfg.tolerance > 0.0) {
                    return Err(ConfigError::at(e, "must be positive"));
                }
            }
            "seed" => cfg.seed = integer(e)?,
            "distances" => {
                cfg.distances = Some(parse_distances(&e.value).map_err(|m| ConfigError::at(e, m))?)
            }
            "start" => {
                cfg.start = match e.value.as_str() {
                    "default" => Start::Default,
                    "src" => Start::Source,
                    v => {
                        return Err(ConfigError::at(
                            e,
                            format!("`{v}` is not `default` or `src`"),
                        ))
                    }
                }
            }
            "out" => cfg.out = Some(PathBuf::from(&e.value)),
            "trace" => cfg.trace = boolean(e)?,
            _ => {}
        }
    }
    if cfg.symmetry == Symmetry::Symmetric && !exp.is_symmetric() {
        let e = get("opt.symmetry").expect("only set explicitly");
        return Err(ConfigError::at(e, "unequal arms need `asymmetric`"));
    }
    Ok(cfg)
}

fn positive(e: &Entry) -> Result<usize, ConfigError> {
    let v: usize = integer(e)?;
    if v == 0 {
        return Err(ConfigError::at(e, "must be at least 1"));
    }
    Ok(v)
}

/// Points a core validation error at the config key that caused it.
fn core_error(entries: &[Entry], section: &str, err: snskit::Error) -> ConfigError {
    let snskit::Error::InvalidArgument { name, reason } = &err else {
        return ConfigError::plain(err.to_string());
    };
    let key = format!("{section}.{name}");
    match entries.iter().find(|e| e.key == key) {
        Some(e) => ConfigError::at(e, reason.clone()),
        None => ConfigError {
            origin: None,
            key: Some(key),
            message: reason.clone(),
        },
    }
}
