//! Flat `section.key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! electronic.eps1 = 0.5
//! electronic.eps2 = 0
//! electronic.j = 0.5
//! bath.kind = shared
//! bath.modes.0.omega = 1
//! bath.modes.0.g = 0.2
//! thermal.beta = 1
//! evolution.t_max = 50
//! task.kind = compare
//! task.kind_b = independent
//! ```
//!
//! Defaults: `thermal.tail_tol = 1e-8`, `evolution.n_steps = 500`,
//! `initial.electronic_state = site1`, `bath.coupling_scale = √2` (only
//! read for independent models), `task.threshold = 1e-6`,
//! `output.directory = .`, `output.basename = dimerbath`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use dimerbath::c64;
use dimerbath::models::{ohmic_drude_modes, ElectronicParams, ModeSpec, ModelKind};
use dimerbath::spaces::{DensityMatrix, SpaceLayout};
use dimerbath::thermal::ThermalSpec;

/// A rejected configuration, pointing at the offending key.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub key: String,
    /// 1-based; `None` for keys that are missing altogether.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Which Hamiltonian a config names.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KindName {
    Shared,
    Independent,
    Transformed,
    Correlated,
    Reduced,
}

impl KindName {
    const ALL: [(&'static str, KindName); 5] = [
        ("shared", KindName::Shared),
        ("independent", KindName::Independent),
        ("transformed", KindName::Transformed),
        ("correlated", KindName::Correlated),
        ("reduced", KindName::Reduced),
    ];

    pub fn as_str(self) -> &'static str {
        Self::ALL.iter().find(|(_, k)| *k == self).map(|(s, _)| *s).unwrap_or("?")
    }

    fn takes_alpha(self) -> bool {
        matches!(self, KindName::Correlated | KindName::Reduced)
    }
}

impl FromStr for KindName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .iter()
            .find(|(name, _)| *name == s)
            .map(|(_, k)| *k)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|(n, _)| *n).collect();
                format!("expected one of {}, got `{s}`", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModeSource {
    Explicit(Vec<ModeSpec>),
    Ohmic {
        lambda: f64,
        gamma: f64,
        m: usize,
        omega_max: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BathConfig {
    pub kind: KindName,
    pub alpha: Option<f64>,
    pub coupling_scale: Option<f64>,
    pub modes: ModeSource,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalConfig {
    pub beta: f64,
    pub tail_tol: f64,
    pub n_max_override: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub t_max: f64,
    pub n_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    Site1,
    Site2,
    Plus,
    Explicit {
        rho11: f64,
        rho22: f64,
        rho12_re: f64,
        rho12_im: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Trajectory {
        /// Also check that center-of-mass factors stay in a product state.
        factorization: bool,
    },
    Compare {
        kind_b: KindName,
        threshold: f64,
    },
    AlphaSweep {
        alphas: Vec<f64>,
        threshold: f64,
    },
    Convergence {
        kind_b: KindName,
        n_max_list: Vec<usize>,
        threshold: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub basename: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub electronic: ElectronicParams,
    pub bath: BathConfig,
    pub thermal: ThermalConfig,
    pub evolution: EvolutionConfig,
    pub initial: InitialState,
    pub task: Task,
    pub output: OutputConfig,
}

pub const DEFAULT_TAIL_TOL: f64 = 1e-8;
pub const DEFAULT_N_STEPS: usize = 500;
pub const DEFAULT_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_BASENAME: &str = "dimerbath";

const FIXED_KEYS: &[&str] = &[
    "electronic.eps1",
    "electronic.eps2",
    "electronic.j",
    "bath.kind",
    "bath.alpha",
    "bath.coupling_scale",
    "bath.ohmic.lambda",
    "bath.ohmic.gamma",
    "bath.ohmic.m",
    "bath.ohmic.omega_max",
    "thermal.beta",
    "thermal.tail_tol",
    "thermal.n_max_override",
    "evolution.t_max",
    "evolution.n_steps",
    "initial.electronic_state",
    "initial.rho11",
    "initial.rho22",
    "initial.rho12_re",
    "initial.rho12_im",
    "task.kind",
    "task.kind_b",
    "task.alphas",
    "task.n_max_list",
    "task.threshold",
    "task.factorization",
    "output.directory",
    "output.basename",
];

/// `bath.modes.<index>.<field>` split into its parts.
fn mode_key(key: &str) -> Option<(usize, &str)> {
    let rest = key.strip_prefix("bath.modes.")?;
    let (index, field) = rest.split_once('.')?;
    let index = index.parse().ok()?;
    matches!(field, "omega" | "g").then_some((index, field))
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    key: content.to_string(),
                    line: Some(line),
                    message: "expected `key = value`".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !FIXED_KEYS.contains(&key) && mode_key(key).is_none() {
                return Err(ConfigError {
                    key: key.to_string(),
                    line: Some(line),
                    message: "unknown key".into(),
                });
            }
            if let Some((_, first)) = map.get(key) {
                return Err(ConfigError {
                    key: key.to_string(),
                    line: Some(line),
                    message: format!("duplicate key, first set on line {first}"),
                });
            }
            map.insert(key.to_string(), (value.to_string(), line));
        }
        Ok(Self { map })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|(_, l)| *l)
    }

    fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            key: key.to_string(),
            line: self.line(key),
            message: message.into(),
        }
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn get<T: FromStr>(&self, key: &str, type_name: &str) -> Result<Option<T>, ConfigError> {
        match self.map.get(key) {
            None => Ok(None),
            Some((v, _)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.error(key, format!("expected {type_name}, got `{v}`"))),
        }
    }

    fn require<T: FromStr>(&self, key: &str, type_name: &str) -> Result<T, ConfigError> {
        self.get(key, type_name)?.ok_or_else(|| self.error(key, "missing required key"))
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get::<f64>(key, "a real number")? {
            Some(v) if v.is_nan() => Err(self.error(key, "NaN is not allowed")),
            other => Ok(other),
        }
    }

    fn require_real(&self, key: &str) -> Result<f64, ConfigError> {
        self.real(key)?.ok_or_else(|| self.error(key, "missing required key"))
    }

    fn list<T: FromStr>(&self, key: &str, type_name: &str) -> Result<Vec<T>, ConfigError> {
        let Some((v, _)) = self.map.get(key) else {
            return Err(self.error(key, "missing required key"));
        };
        v.split(',')
            .map(|item| {
                item.trim()
                    .parse()
                    .map_err(|_| self.error(key, format!("expected a comma-separated list of {type_name}, got `{v}`")))
            })
            .collect()
    }

    /// Rejects a key that the rest of the config makes meaningless.
    fn forbid(&self, key: &str, why: &str) -> Result<(), ConfigError> {
        if self.has(key) {
            Err(self.error(key, why))
        } else {
            Ok(())
        }
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let e = Entries::parse(text)?;

    let mut values = [0.0; 3];
    for (v, key) in values.iter_mut().zip(["electronic.eps1", "electronic.eps2", "electronic.j"]) {
        *v = e.require_real(key)?;
        if !v.is_finite() {
            return Err(e.error(key, "must be finite"));
        }
    }
    let [eps1, eps2, j] = values;
    let electronic = ElectronicParams::new(eps1, eps2, j).expect("finite by construction");

    let kind: KindName = e.require("bath.kind", "a model kind")?;
    let kind_b = match e.get::<String>("task.kind_b", "a model kind")? {
        Some(s) => Some(s.parse::<KindName>().map_err(|m| e.error("task.kind_b", m))?),
        None => None,
    };
    let kinds = [Some(kind), kind_b];
    let alpha = e.real("bath.alpha")?;
    let needs_alpha = kinds.iter().flatten().any(|k| k.takes_alpha());
    match (alpha, needs_alpha) {
        (Some(_), false) => {
            return Err(e.error(
                "bath.alpha",
                format!("alpha is only valid for correlated or reduced kinds, not {}", kind.as_str()),
            ))
        }
        (Some(a), true) if !a.is_finite() => return Err(e.error("bath.alpha", "must be finite")),
        _ => {}
    }
    let coupling_scale = e.real("bath.coupling_scale")?;
    if coupling_scale.is_some() && !kinds.contains(&Some(KindName::Independent)) {
        return Err(e.error("bath.coupling_scale", "only valid for independent models"));
    }
    if let Some(s) = coupling_scale {
        if !s.is_finite() {
            return Err(e.error("bath.coupling_scale", "must be finite"));
        }
    }

    let modes = parse_modes(&e)?;

    let beta = e.require_real("thermal.beta")?;
    if beta <= 0.0 {
        return Err(e.error("thermal.beta", "must be positive or inf"));
    }
    let tail_tol = e.real("thermal.tail_tol")?.unwrap_or(DEFAULT_TAIL_TOL);
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(e.error("thermal.tail_tol", "must lie in (0, 1)"));
    }
    let n_max_override = e.get::<usize>("thermal.n_max_override", "a non-negative integer")?;
    if n_max_override.is_some_and(|n| n < 2) {
        return Err(e.error("thermal.n_max_override", "must be at least 2"));
    }

    let t_max = e.require_real("evolution.t_max")?;
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(e.error("evolution.t_max", "must be positive and finite"));
    }
    let n_steps = e.get::<usize>("evolution.n_steps", "a non-negative integer")?.unwrap_or(DEFAULT_N_STEPS);
    if n_steps == 0 {
        return Err(e.error("evolution.n_steps", "must be at least 1"));
    }

    let initial = parse_initial(&e)?;
    let task = parse_task(&e, kind_b)?;

    let output = OutputConfig {
        directory: e.get::<String>("output.directory", "a path")?.unwrap_or_else(|| ".".into()).into(),
        basename: e.get::<String>("output.basename", "a file stem")?.unwrap_or_else(|| DEFAULT_BASENAME.into()),
    };
    if output.basename.is_empty() || output.basename.contains(['/', '\\']) {
        return Err(e.error("output.basename", "must be a non-empty file stem"));
    }

    Ok(RunConfig {
        electronic,
        bath: BathConfig {
            kind,
            alpha,
            coupling_scale,
            modes,
        },
        thermal: ThermalConfig {
            beta,
            tail_tol,
            n_max_override,
        },
        evolution: EvolutionConfig { t_max, n_steps },
        initial,
        task,
        output,
    })
}

fn parse_modes(e: &Entries) -> Result<ModeSource, ConfigError> {
    let mut fields: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for key in e.map.keys() {
        if let Some((index, field)) = mode_key(key) {
            let v = e.require_real(key)?;
            let slot = fields.entry(index).or_default();
            if field == "omega" {
                slot.0 = Some(v);
            } else {
                slot.1 = Some(v);
            }
        }
    }
    let ohmic_keys = ["bath.ohmic.lambda", "bath.ohmic.gamma", "bath.ohmic.m", "bath.ohmic.omega_max"];
    let ohmic = ohmic_keys.iter().any(|k| e.has(k));
    if ohmic && !fields.is_empty() {
        return Err(e.error("bath.modes", "give either explicit modes or an ohmic block, not both"));
    }
    if ohmic {
        let lambda = e.require_real("bath.ohmic.lambda")?;
        let gamma = e.require_real("bath.ohmic.gamma")?;
        let m = e.require::<usize>("bath.ohmic.m", "a positive integer")?;
        let omega_max = e.require_real("bath.ohmic.omega_max")?;
        for (key, ok) in [
            ("bath.ohmic.lambda", lambda.is_finite() && lambda >= 0.0),
            ("bath.ohmic.gamma", gamma.is_finite() && gamma > 0.0),
            ("bath.ohmic.m", m >= 1),
            ("bath.ohmic.omega_max", omega_max.is_finite() && omega_max > 0.0),
        ] {
            if !ok {
                return Err(e.error(key, "out of range"));
            }
        }
        return Ok(ModeSource::Ohmic {
            lambda,
            gamma,
            m,
            omega_max,
        });
    }
    if fields.is_empty() {
        return Err(e.error("bath.modes", "no modes given and no bath.ohmic block"));
    }
    let mut modes = Vec::with_capacity(fields.len());
    for (expected, (index, (omega, g))) in fields.into_iter().enumerate() {
        let prefix = format!("bath.modes.{index}");
        if index != expected {
            return Err(e.error(&format!("{prefix}.omega"), format!("mode indices must be 0, 1, 2, ...; missing {expected}")));
        }
        let omega_key = format!("{prefix}.omega");
        let g_key = format!("{prefix}.g");
        let omega = omega.ok_or_else(|| e.error(&omega_key, "missing required key"))?;
        let g = g.ok_or_else(|| e.error(&g_key, "missing required key"))?;
        let mode = ModeSpec::new(omega, g).map_err(|err| {
            let key = if omega.is_finite() && omega > 0.0 { &g_key } else { &omega_key };
            e.error(key, err.to_string())
        })?;
        modes.push(mode);
    }
    Ok(ModeSource::Explicit(modes))
}

fn parse_initial(e: &Entries) -> Result<InitialState, ConfigError> {
    let name = e
        .get::<String>("initial.electronic_state", "a state name")?
        .unwrap_or_else(|| "site1".into());
    let explicit_keys = ["initial.rho11", "initial.rho22", "initial.rho12_re", "initial.rho12_im"];
    let state = match name.as_str() {
        "site1" => InitialState::Site1,
        "site2" => InitialState::Site2,
        "plus" => InitialState::Plus,
        "explicit" => {
            let rho11 = e.require_real("initial.rho11")?;
            let rho22 = e.require_real("initial.rho22")?;
            let rho12_re = e.real("initial.rho12_re")?.unwrap_or(0.0);
            let rho12_im = e.real("initial.rho12_im")?.unwrap_or(0.0);
            let state = InitialState::Explicit {
                rho11,
                rho22,
                rho12_re,
                rho12_im,
            };
            electronic_state(&state).map_err(|m| e.error("initial.rho11", m))?;
            return Ok(state);
        }
        other => {
            return Err(e.error(
                "initial.electronic_state",
                format!("expected site1, site2, plus or explicit, got `{other}`"),
            ))
        }
    };
    for key in explicit_keys {
        e.forbid(key, "only valid with initial.electronic_state = explicit")?;
    }
    Ok(state)
}

fn parse_task(e: &Entries, kind_b: Option<KindName>) -> Result<Task, ConfigError> {
    let kind: String = e.require("task.kind", "a task name")?;
    let threshold = e.real("task.threshold")?.unwrap_or(DEFAULT_THRESHOLD);
    if !(threshold > 0.0) {
        return Err(e.error("task.threshold", "must be positive"));
    }
    let only = |key: &str, tasks: &str| e.forbid(key, &format!("only valid for task.kind = {tasks}"));
    let need_kind_b = || kind_b.ok_or_else(|| e.error("task.kind_b", "missing required key"));
    let task = match kind.as_str() {
        "trajectory" => {
            only("task.kind_b", "compare or convergence")?;
            only("task.threshold", "compare, alpha_sweep or convergence")?;
            let factorization = e.get("task.factorization", "true or false")?.unwrap_or(false);
            if factorization && e.require::<KindName>("bath.kind", "a model kind")? != KindName::Transformed {
                return Err(e.error("task.factorization", "needs bath.kind = transformed"));
            }
            Task::Trajectory { factorization }
        }
        "compare" => Task::Compare {
            kind_b: need_kind_b()?,
            threshold,
        },
        "alpha_sweep" => {
            only("task.kind_b", "compare or convergence")?;
            if !e.require::<KindName>("bath.kind", "a model kind")?.takes_alpha() {
                return Err(e.error("bath.kind", "alpha_sweep needs a correlated or reduced kind"));
            }
            let alphas: Vec<f64> = e.list("task.alphas", "real numbers")?;
            if alphas.iter().any(|a| !a.is_finite()) {
                return Err(e.error("task.alphas", "values must be finite"));
            }
            if alphas.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(e.error("task.alphas", "values must be strictly ascending"));
            }
            Task::AlphaSweep { alphas, threshold }
        }
        "convergence" => {
            let n_max_list: Vec<usize> = e.list("task.n_max_list", "integers")?;
            if n_max_list.iter().any(|&n| n < 2) || n_max_list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(e.error("task.n_max_list", "values must be at least 2 and strictly ascending"));
            }
            Task::Convergence {
                kind_b: need_kind_b()?,
                n_max_list,
                threshold,
            }
        }
        other => {
            return Err(e.error(
                "task.kind",
                format!("expected trajectory, compare, alpha_sweep or convergence, got `{other}`"),
            ))
        }
    };
    if !matches!(task, Task::AlphaSweep { .. }) {
        only("task.alphas", "alpha_sweep")?;
    }
    if !matches!(task, Task::Convergence { .. }) {
        only("task.n_max_list", "convergence")?;
    }
    if !matches!(task, Task::Trajectory { .. }) {
        only("task.factorization", "trajectory")?;
    }
    if matches!(task, Task::AlphaSweep { .. }) && e.has("bath.alpha") {
        return Err(e.error("bath.alpha", "the sweep takes its values from task.alphas"));
    }
    if !matches!(task, Task::AlphaSweep { .. }) {
        let kinds = [Some(e.require::<KindName>("bath.kind", "a model kind")?), kind_b];
        if kinds.iter().flatten().any(|k| k.takes_alpha()) && !e.has("bath.alpha") {
            return Err(e.error("bath.alpha", "missing required key for correlated or reduced kinds"));
        }
    }
    Ok(task)
}

/// The 2×2 initial electronic state.
pub fn electronic_state(state: &InitialState) -> Result<DensityMatrix, String> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let layout = SpaceLayout::electronic();
    let result = match *state {
        InitialState::Site1 => DensityMatrix::diagonal(layout, &[1.0, 0.0]),
        InitialState::Site2 => DensityMatrix::diagonal(layout, &[0.0, 1.0]),
        InitialState::Plus => DensityMatrix::pure(layout, &[c64::new(h, 0.0), c64::new(h, 0.0)]),
        InitialState::Explicit {
            rho11,
            rho22,
            rho12_re,
            rho12_im,
        } => {
            let c = c64::new(rho12_re, rho12_im);
            let m = [[c64::new(rho11, 0.0), c], [c.conj(), c64::new(rho22, 0.0)]];
            DensityMatrix::new(layout, dimerbath::CMat::from_fn(2, 2, |i, j| m[i][j]))
        }
    };
    result.map_err(|err| err.to_string())
}

impl RunConfig {
    /// The mode list, discretizing the ohmic block when one is given.
    pub fn modes(&self) -> dimerbath::Result<Vec<ModeSpec>> {
        match &self.bath.modes {
            ModeSource::Explicit(m) => Ok(m.clone()),
            ModeSource::Ohmic {
                lambda,
                gamma,
                m,
                omega_max,
            } => ohmic_drude_modes(*lambda, *gamma, *m, *omega_max),
        }
    }

    pub fn model_kind(&self, name: KindName) -> ModelKind {
        self.model_kind_at(name, self.bath.alpha.unwrap_or(0.0))
    }

    pub fn model_kind_at(&self, name: KindName, alpha: f64) -> ModelKind {
        match name {
            KindName::Shared => ModelKind::SharedAntiCorrelated,
            KindName::Independent => match self.bath.coupling_scale {
                Some(coupling_scale) => ModelKind::IndependentLocal { coupling_scale },
                None => ModelKind::independent(),
            },
            KindName::Transformed => ModelKind::Transformed,
            KindName::Correlated => ModelKind::CorrelatedAlpha { alpha },
            KindName::Reduced => ModelKind::ReducedEffective { alpha },
        }
    }

    pub fn thermal_spec(&self) -> dimerbath::Result<ThermalSpec> {
        let spec = ThermalSpec::new(self.thermal.beta, self.thermal.tail_tol)?;
        match self.thermal.n_max_override {
            Some(n) => spec.with_n_max_override(n),
            None => Ok(spec),
        }
    }

    /// Canonical text form; [`parse_config`] reads it back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("electronic.eps1", self.electronic.eps1.to_string());
        put("electronic.eps2", self.electronic.eps2.to_string());
        put("electronic.j", self.electronic.j.to_string());
        put("bath.kind", self.bath.kind.as_str().into());
        if let Some(a) = self.bath.alpha {
            put("bath.alpha", a.to_string());
        }
        if let Some(c) = self.bath.coupling_scale {
            put("bath.coupling_scale", c.to_string());
        }
        match &self.bath.modes {
            ModeSource::Explicit(modes) => {
                for (k, m) in modes.iter().enumerate() {
                    put(&format!("bath.modes.{k}.omega"), m.omega.to_string());
                    put(&format!("bath.modes.{k}.g"), m.g.to_string());
                }
            }
            ModeSource::Ohmic {
                lambda,
                gamma,
                m,
                omega_max,
            } => {
                put("bath.ohmic.lambda", lambda.to_string());
                put("bath.ohmic.gamma", gamma.to_string());
                put("bath.ohmic.m", m.to_string());
                put("bath.ohmic.omega_max", omega_max.to_string());
            }
        }
        put("thermal.beta", self.thermal.beta.to_string());
        put("thermal.tail_tol", self.thermal.tail_tol.to_string());
        if let Some(n) = self.thermal.n_max_override {
            put("thermal.n_max_override", n.to_string());
        }
        put("evolution.t_max", self.evolution.t_max.to_string());
        put("evolution.n_steps", self.evolution.n_steps.to_string());
        match self.initial {
            InitialState::Site1 => put("initial.electronic_state", "site1".into()),
            InitialState::Site2 => put("initial.electronic_state", "site2".into()),
            InitialState::Plus => put("initial.electronic_state", "plus".into()),
            InitialState::Explicit {
                rho11,
                rho22,
                rho12_re,
                rho12_im,
            } => {
                put("initial.electronic_state", "explicit".into());
                put("initial.rho11", rho11.to_string());
                put("initial.rho22", rho22.to_string());
                put("initial.rho12_re", rho12_re.to_string());
                put("initial.rho12_im", rho12_im.to_string());
            }
        }
        let join = |v: &[String]| v.join(", ");
        match &self.task {
            Task::Trajectory { factorization } => {
                put("task.kind", "trajectory".into());
                put("task.factorization", factorization.to_string());
            }
            Task::Compare { kind_b, threshold } => {
                put("task.kind", "compare".into());
                put("task.kind_b", kind_b.as_str().into());
                put("task.threshold", threshold.to_string());
            }
            Task::AlphaSweep { alphas, threshold } => {
                put("task.kind", "alpha_sweep".into());
                put("task.alphas", join(&alphas.iter().map(f64::to_string).collect::<Vec<_>>()));
                put("task.threshold", threshold.to_string());
            }
            Task::Convergence {
                kind_b,
                n_max_list,
                threshold,
            } => {
                put("task.kind", "convergence".into());
                put("task.kind_b", kind_b.as_str().into());
                put("task.n_max_list", join(&n_max_list.iter().map(usize::to_string).collect::<Vec<_>>()));
                put("task.threshold", threshold.to_string());
            }
        }
        put("output.directory", self.output.directory.display().to_string());
        put("output.basename", self.output.basename.clone());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
electronic.eps1 = 0.5
electronic.eps2 = 0
electronic.j = 0.5
bath.kind = shared
bath.modes.0.omega = 1
bath.modes.0.g = 0.2
thermal.beta = 1
evolution.t_max = 50
task.kind = trajectory
";

    fn with(extra: &str) -> String {
        format!("{MINIMAL}{extra}\n")
    }

    fn replace(from: &str, to: &str) -> String {
        MINIMAL.replace(from, to)
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.thermal.tail_tol, 1e-8);
        assert_eq!(c.evolution.n_steps, 500);
        assert_eq!(c.initial, InitialState::Site1);
        assert_eq!(c.output.basename, "dimerbath");
        assert_eq!(c.task, Task::Trajectory { factorization: false });
        assert_eq!(c.model_kind(c.bath.kind), ModelKind::SharedAntiCorrelated);
    }

    #[test]
    fn round_trip() {
        let texts = [
            MINIMAL.to_string(),
            replace("bath.kind = shared", "bath.kind = correlated\nbath.alpha = -0.5")
                .replace("task.kind = trajectory", "task.kind = compare\ntask.kind_b = reduced"),
            replace("bath.modes.0.omega = 1\nbath.modes.0.g = 0.2", "bath.ohmic.lambda = 0.1\nbath.ohmic.gamma = 0.5\nbath.ohmic.m = 4\nbath.ohmic.omega_max = 3")
                .replace("thermal.beta = 1", "thermal.beta = inf\nthermal.n_max_override = 6"),
            with("initial.electronic_state = explicit\ninitial.rho11 = 0.3\ninitial.rho22 = 0.7\ninitial.rho12_im = 0.1"),
            replace("task.kind = trajectory", "task.kind = convergence\ntask.kind_b = independent\ntask.n_max_list = 4, 6, 8\nbath.coupling_scale = 1.4142135623730951"),
            replace("bath.kind = shared", "bath.kind = reduced")
                .replace("task.kind = trajectory", "task.kind = alpha_sweep\ntask.alphas = -0.5, 0, 0.5, 1\ntask.threshold = 1e-7"),
        ];
        for text in texts {
            let c = parse_config(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
            let again = parse_config(&c.to_text()).unwrap();
            assert_eq!(c, again);
            assert_eq!(c.to_text(), again.to_text());
        }
    }

    fn err(text: &str) -> ConfigError {
        parse_config(text).unwrap_err()
    }

    #[test]
    fn missing_modes_name_the_key() {
        let e = err(&replace("bath.modes.0.omega = 1\nbath.modes.0.g = 0.2\n", ""));
        assert_eq!(e.key, "bath.modes");
    }

    #[test]
    fn alpha_only_for_correlated_kinds() {
        let e = err(&with("bath.alpha = 0.5"));
        assert_eq!(e.key, "bath.alpha");
        assert_eq!(e.line, Some(10));
        assert!(e.message.contains("correlated or reduced"));

        let e = err(&replace("bath.kind = shared", "bath.kind = reduced"));
        assert_eq!((e.key.as_str(), e.line), ("bath.alpha", None));
    }

    #[test]
    fn unknown_and_mistyped_keys_report_line() {
        let e = err(&with("thermal.temperature = 3"));
        assert_eq!((e.key.as_str(), e.line), ("thermal.temperature", Some(10)));
        assert_eq!(e.message, "unknown key");

        let e = err(&replace("evolution.t_max = 50", "evolution.t_max = fifty"));
        assert_eq!((e.key.as_str(), e.line), ("evolution.t_max", Some(8)));
        assert!(e.message.contains("real number"));

        let e = err(&with("evolution.n_steps = 2.5"));
        assert_eq!(e.key, "evolution.n_steps");

        let e = err(&with("electronic.j = 1"));
        assert!(e.message.starts_with("duplicate key"));

        let e = err(&with("just some words"));
        assert_eq!(e.line, Some(10));
        assert!(err(&with("bath.modes.x.omega = 1")).message == "unknown key");
    }

    #[test]
    fn constraint_violations() {
        for (from, to, key) in [
            ("thermal.beta = 1", "thermal.beta = -1", "thermal.beta"),
            ("thermal.beta = 1", "thermal.beta = nan", "thermal.beta"),
            ("evolution.t_max = 50", "evolution.t_max = 0", "evolution.t_max"),
            ("bath.modes.0.omega = 1", "bath.modes.0.omega = 0", "bath.modes.0.omega"),
            ("bath.modes.0.omega = 1", "bath.modes.1.omega = 1", "bath.modes.0.omega"),
            ("bath.kind = shared", "bath.kind = weird", "bath.kind"),
            ("task.kind = trajectory", "task.kind = compare", "task.kind_b"),
        ] {
            let e = err(&replace(from, to));
            assert_eq!(e.key, key, "{to}: {e}");
        }
        let unordered = replace("task.kind = trajectory", "task.kind = alpha_sweep\ntask.alphas = 0.5, 0")
            .replace("bath.kind = shared", "bath.kind = correlated");
        assert_eq!(err(&unordered).key, "task.alphas");
        assert_eq!(err(&with("thermal.tail_tol = 1")).key, "thermal.tail_tol");
        assert_eq!(err(&with("thermal.n_max_override = 1")).key, "thermal.n_max_override");
        assert_eq!(err(&with("bath.coupling_scale = 2")).key, "bath.coupling_scale");
        assert_eq!(err(&with("initial.rho11 = 1")).key, "initial.rho11");
        assert_eq!(err(&with("task.threshold = 1e-6")).key, "task.threshold");
        assert_eq!(
            err(&with("initial.electronic_state = explicit\ninitial.rho11 = 0.5\ninitial.rho22 = 0.6")).key,
            "initial.rho11"
        );
        assert_eq!(
            err(&with("bath.ohmic.lambda = 0.1\nbath.ohmic.gamma = 1\nbath.ohmic.m = 2\nbath.ohmic.omega_max = 2")).key,
            "bath.modes"
        );
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!("# header\n\n{}", MINIMAL.replace("electronic.j = 0.5", "electronic.j = 0.5  # hopping"));
        assert_eq!(parse_config(&text).unwrap().electronic.j, 0.5);
    }
}
