//! Run configuration: a TOML file of `key = value` pairs under dotted
//! sections, plus `--set key=value` overrides. Every key is checked against
//! [`SCHEMA`]; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use toml::{Table, Value};

use vtol_core::experiments::scenario_by_name;
use vtol_core::{
    CompensatorState, ControllerKind, FblGains, MonteCarloConfig, PlantParams, PlantState,
    SetPoint, SimConfig, SontagParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Float,
    Count,
    Text,
    /// Two floats.
    Pair,
    /// Four floats.
    Quad,
    /// One or more floats.
    List,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Float => "a number",
            Kind::Count => "a non-negative integer",
            Kind::Text => "a string",
            Kind::Pair => "an array of 2 numbers",
            Kind::Quad => "an array of 4 numbers",
            Kind::List => "a non-empty array of numbers",
        })
    }
}

/// `(key, kind, description)` for every accepted key.
pub const SCHEMA: &[(&str, Kind, &str)] = &[
    ("controller", Kind::Text, "\"invopt\" or \"fbl\""),
    ("scenario", Kind::Text, "base scenario: \"canonical\" or \"hover\""),
    ("plant.epsilon", Kind::Float, "coupling factor ε ≥ 0"),
    ("plant.gravity", Kind::Float, "gravity g > 0"),
    ("control.c0", Kind::Float, "Sontag gain c0 > 0"),
    ("control.kx", Kind::Float, "CLF gain on the x channel"),
    ("control.ky", Kind::Float, "CLF gain on the y channel"),
    ("control.k0", Kind::Quad, "FBL per-channel gains, Hurwitz"),
    ("control.setpoint", Kind::Pair, "[x_ref, y_ref]"),
    ("sim.dt", Kind::Float, "sample/control step"),
    ("sim.t_final", Kind::Float, "horizon"),
    ("sim.decimation", Kind::Count, "keep every n-th step"),
    ("sim.substeps", Kind::Count, "RK4 substeps per dt"),
    ("sim.delta", Kind::Pair, "input-gain perturbation [δ_f, δ_τ]"),
    ("init.x", Kind::Float, "initial x"),
    ("init.y", Kind::Float, "initial y"),
    ("init.theta", Kind::Float, "initial θ"),
    ("init.xdot", Kind::Float, "initial ẋ"),
    ("init.ydot", Kind::Float, "initial ẏ"),
    ("init.thetadot", Kind::Float, "initial θ̇"),
    ("init.fhat", Kind::Float, "initial f̂ (default: hover, = gravity)"),
    ("init.fhatdot", Kind::Float, "initial f̂ rate"),
    ("montecarlo.n_runs", Kind::Count, "number of runs"),
    ("montecarlo.delta_lo", Kind::Float, "lower bound of δ draws"),
    ("montecarlo.delta_hi", Kind::Float, "upper bound of δ draws"),
    ("montecarlo.seed", Kind::Count, "master seed (overridden by --seed)"),
    ("clf.n", Kind::Count, "grid points per axis"),
    ("clf.k_min", Kind::Float, "smallest gain of the log grid"),
    ("clf.k_max", Kind::Float, "largest gain of the log grid"),
    ("clf.gains", Kind::List, "explicit gains per axis (replaces the grid)"),
    ("zero_dynamics.theta0", Kind::Float, "initial θ"),
    ("zero_dynamics.thetadot0", Kind::Float, "initial θ̇"),
    ("zero_dynamics.duration", Kind::Float, "horizon"),
    ("zero_dynamics.dt", Kind::Float, "RK4 step"),
];

pub fn kind_of(key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(k, _, _)| *k == key).map(|&(_, kind, _)| kind)
}

/// Flattened `dotted.key → value` pairs, schema-checked.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig(pub BTreeMap<String, Value>);

fn flatten(table: &Table, prefix: &str, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(t, &key, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn check_value(key: &str, v: &Value) -> Result<()> {
    let kind = kind_of(key).ok_or_else(|| anyhow!("unknown config key `{key}`"))?;
    let numbers = |v: &Value| match v {
        Value::Array(a) => a.iter().all(|x| matches!(x, Value::Float(_) | Value::Integer(_))).then_some(a.len()),
        _ => None,
    };
    let ok = match kind {
        Kind::Float => matches!(v, Value::Float(_) | Value::Integer(_)),
        Kind::Count => matches!(v, Value::Integer(i) if *i >= 0),
        Kind::Text => matches!(v, Value::String(_)),
        Kind::Pair => numbers(v) == Some(2),
        Kind::Quad => numbers(v) == Some(4),
        Kind::List => numbers(v).is_some_and(|n| n > 0),
    };
    if !ok {
        bail!("config key `{key}` must be {kind}, got `{v}`");
    }
    Ok(())
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = toml::from_str(text).context("malformed config")?;
        let mut map = BTreeMap::new();
        flatten(&table, "", &mut map);
        for (k, v) in &map {
            check_value(k, v)?;
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Applies one `key=value` override. The value is read as a TOML value;
    /// anything that does not parse is taken as a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
        let key = key.trim();
        let value = value.trim();
        let parsed = toml::from_str::<Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(value.to_string()));
        check_value(key, &parsed)?;
        self.0.insert(key.to_string(), parsed);
        Ok(())
    }

    fn float(&self, key: &str) -> Option<f64> {
        match self.0.get(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn floats(&self, key: &str) -> Option<Vec<f64>> {
        match self.0.get(key)? {
            Value::Array(a) => Some(
                a.iter()
                    .map(|x| match x {
                        Value::Float(f) => *f,
                        Value::Integer(i) => *i as f64,
                        _ => f64::NAN,
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    fn count(&self, key: &str) -> Option<u64> {
        match self.0.get(key)? {
            Value::Integer(i) => Some(*i as u64),
            _ => None,
        }
    }

    fn text(&self, key: &str) -> Option<&str> {
        match self.0.get(key)? {
            Value::String(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClfGrid {
    pub n: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub gains: Option<Vec<f64>>,
}

impl Default for ClfGrid {
    fn default() -> Self {
        Self {
            n: 25,
            k_min: 0.2,
            k_max: 1e6,
            gains: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroDynamics {
    pub theta0: f64,
    pub thetadot0: f64,
    pub duration: f64,
    pub dt: f64,
}

impl Default for ZeroDynamics {
    fn default() -> Self {
        Self {
            theta0: 1e-3,
            thetadot0: 0.0,
            duration: 6.0,
            dt: 1e-3,
        }
    }
}

/// The fully resolved configuration every subcommand reads from.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub scenario: String,
    pub sim: SimConfig,
    pub montecarlo: MonteCarloConfig,
    pub clf: ClfGrid,
    pub zero_dynamics: ZeroDynamics,
}

/// Core validation names → config keys, so diagnostics point at the file.
fn config_key(core_name: &str) -> &str {
    match core_name {
        "epsilon" => "plant.epsilon",
        "gravity" => "plant.gravity",
        "c0" => "control.c0",
        "kx" => "control.kx",
        "ky" => "control.ky",
        "k0" => "control.k0",
        "dt" => "sim.dt",
        "t_final" => "sim.t_final",
        "decimation" => "sim.decimation",
        "substeps" => "sim.substeps",
        "delta_f" | "delta_tau" => "sim.delta",
        "initial state" => "init",
        "n_runs" => "montecarlo.n_runs",
        "delta range" => "montecarlo.delta_lo/montecarlo.delta_hi",
        "n" => "clf.n",
        "gain range" => "clf.k_min/clf.k_max",
        other => other,
    }
}

/// Rewrites a core validation error so it names the config key.
pub fn keyed(err: vtol_core::Error) -> anyhow::Error {
    match err {
        vtol_core::Error::Domain { name, reason } => {
            anyhow!("invalid config key `{}`: {reason}", config_key(name))
        }
        other => anyhow::Error::new(other),
    }
}

fn require_positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        bail!("invalid config key `{key}`: must be finite and > 0, got {v}")
    }
}

impl Settings {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let scenario = raw.text("scenario").unwrap_or("canonical").to_string();
        let base = scenario_by_name(&scenario).map_err(keyed)?;
        let mut sim = base.config.clone();
        if let Some(c) = raw.text("controller") {
            sim.controller = c.parse().map_err(keyed)?;
        }

        let epsilon = raw.float("plant.epsilon").unwrap_or(sim.plant.epsilon);
        let gravity = raw.float("plant.gravity").unwrap_or(sim.plant.gravity);
        sim.plant = PlantParams::new(epsilon, gravity).map_err(keyed)?;

        if let Some(c0) = raw.float("control.c0") {
            sim.sontag = SontagParams::new(c0).map_err(keyed)?;
        }
        if let Some(v) = raw.float("control.kx") {
            sim.kx = require_positive("control.kx", v)?;
        }
        if let Some(v) = raw.float("control.ky") {
            sim.ky = require_positive("control.ky", v)?;
        }
        if let Some(k) = raw.floats("control.k0") {
            sim.fbl = FblGains::new([k[0], k[1], k[2], k[3]]).map_err(keyed)?;
        }
        if let Some(r) = raw.floats("control.setpoint") {
            sim.setpoint = SetPoint {
                x_ref: r[0],
                y_ref: r[1],
            };
        }

        if let Some(v) = raw.float("sim.dt") {
            sim.dt = require_positive("sim.dt", v)?;
        }
        if let Some(v) = raw.float("sim.t_final") {
            sim.t_final = require_positive("sim.t_final", v)?;
        }
        if let Some(v) = raw.count("sim.decimation") {
            sim.decimation = v as usize;
        }
        if let Some(v) = raw.count("sim.substeps") {
            sim.substeps = v as usize;
        }
        if let Some(d) = raw.floats("sim.delta") {
            sim.delta = (
                require_positive("sim.delta", d[0])?,
                require_positive("sim.delta", d[1])?,
            );
        }

        let s0 = sim.initial_plant;
        sim.initial_plant = PlantState {
            x: raw.float("init.x").unwrap_or(s0.x),
            y: raw.float("init.y").unwrap_or(s0.y),
            theta: raw.float("init.theta").unwrap_or(s0.theta),
            xdot: raw.float("init.xdot").unwrap_or(s0.xdot),
            ydot: raw.float("init.ydot").unwrap_or(s0.ydot),
            thetadot: raw.float("init.thetadot").unwrap_or(s0.thetadot),
        };
        sim.initial_compensator = CompensatorState {
            fhat: raw
                .float("init.fhat")
                .unwrap_or(CompensatorState::hover(&sim.plant).fhat),
            fhatdot: raw
                .float("init.fhatdot")
                .unwrap_or(sim.initial_compensator.fhatdot),
        };
        sim.validate().map_err(keyed)?;

        let mut montecarlo = MonteCarloConfig::default();
        if let Some(n) = raw.count("montecarlo.n_runs") {
            montecarlo.n_runs = n as usize;
        }
        if let Some(v) = raw.float("montecarlo.delta_lo") {
            montecarlo.delta_lo = v;
        }
        if let Some(v) = raw.float("montecarlo.delta_hi") {
            montecarlo.delta_hi = v;
        }
        if let Some(v) = raw.count("montecarlo.seed") {
            montecarlo.seed = v;
        }
        montecarlo.validate().map_err(keyed)?;

        let mut clf = ClfGrid::default();
        if let Some(n) = raw.count("clf.n") {
            clf.n = n as usize;
        }
        if let Some(v) = raw.float("clf.k_min") {
            clf.k_min = require_positive("clf.k_min", v)?;
        }
        if let Some(v) = raw.float("clf.k_max") {
            clf.k_max = require_positive("clf.k_max", v)?;
        }
        if let Some(g) = raw.floats("clf.gains") {
            for &v in &g {
                require_positive("clf.gains", v)?;
            }
            clf.gains = Some(g);
        }
        if clf.gains.is_none() && (clf.n < 2 || clf.k_min > clf.k_max) {
            bail!(
                "invalid config key `clf.n`/`clf.k_min`/`clf.k_max`: need n >= 2 and k_min <= k_max"
            );
        }

        let mut zd = ZeroDynamics::default();
        if let Some(v) = raw.float("zero_dynamics.theta0") {
            zd.theta0 = v;
        }
        if let Some(v) = raw.float("zero_dynamics.thetadot0") {
            zd.thetadot0 = v;
        }
        if let Some(v) = raw.float("zero_dynamics.duration") {
            zd.duration = require_positive("zero_dynamics.duration", v)?;
        }
        if let Some(v) = raw.float("zero_dynamics.dt") {
            zd.dt = require_positive("zero_dynamics.dt", v)?;
        }
        if !(zd.theta0.is_finite() && zd.thetadot0.is_finite()) {
            bail!("invalid config key `zero_dynamics.theta0`: initial state must be finite");
        }

        Ok(Self {
            scenario,
            sim,
            montecarlo,
            clf,
            zero_dynamics: zd,
        })
    }

    /// Every key with its effective value, as a sectioned TOML document.
    /// Parsing it back yields the same settings.
    pub fn to_toml(&self) -> String {
        fn section(pairs: Vec<(&str, Value)>) -> Value {
            Value::Table(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
        }
        fn arr(v: &[f64]) -> Value {
            Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
        }
        let s = &self.sim;
        let p = &s.initial_plant;
        let c = &s.initial_compensator;
        let int = |n: u64| Value::Integer(n as i64);
        let mut clf = vec![
            ("n", int(self.clf.n as u64)),
            ("k_min", Value::Float(self.clf.k_min)),
            ("k_max", Value::Float(self.clf.k_max)),
        ];
        if let Some(g) = &self.clf.gains {
            clf.push(("gains", arr(g)));
        }
        let mut root = Table::new();
        root.insert("controller".into(), Value::String(s.controller.as_str().into()));
        root.insert("scenario".into(), Value::String(self.scenario.clone()));
        root.insert(
            "plant".into(),
            section(vec![
                ("epsilon", Value::Float(s.plant.epsilon)),
                ("gravity", Value::Float(s.plant.gravity)),
            ]),
        );
        root.insert(
            "control".into(),
            section(vec![
                ("c0", Value::Float(s.sontag.c0)),
                ("kx", Value::Float(s.kx)),
                ("ky", Value::Float(s.ky)),
                ("k0", arr(&s.fbl.k0)),
                ("setpoint", arr(&[s.setpoint.x_ref, s.setpoint.y_ref])),
            ]),
        );
        root.insert(
            "sim".into(),
            section(vec![
                ("dt", Value::Float(s.dt)),
                ("t_final", Value::Float(s.t_final)),
                ("decimation", int(s.decimation as u64)),
                ("substeps", int(s.substeps as u64)),
                ("delta", arr(&[s.delta.0, s.delta.1])),
            ]),
        );
        root.insert(
            "init".into(),
            section(vec![
                ("x", Value::Float(p.x)),
                ("y", Value::Float(p.y)),
                ("theta", Value::Float(p.theta)),
                ("xdot", Value::Float(p.xdot)),
                ("ydot", Value::Float(p.ydot)),
                ("thetadot", Value::Float(p.thetadot)),
                ("fhat", Value::Float(c.fhat)),
                ("fhatdot", Value::Float(c.fhatdot)),
            ]),
        );
        root.insert(
            "montecarlo".into(),
            section(vec![
                ("n_runs", int(self.montecarlo.n_runs as u64)),
                ("delta_lo", Value::Float(self.montecarlo.delta_lo)),
                ("delta_hi", Value::Float(self.montecarlo.delta_hi)),
                ("seed", int(self.montecarlo.seed)),
            ]),
        );
        root.insert("clf".into(), section(clf));
        root.insert(
            "zero_dynamics".into(),
            section(vec![
                ("theta0", Value::Float(self.zero_dynamics.theta0)),
                ("thetadot0", Value::Float(self.zero_dynamics.thetadot0)),
                ("duration", Value::Float(self.zero_dynamics.duration)),
                ("dt", Value::Float(self.zero_dynamics.dt)),
            ]),
        );
        toml::to_string(&root).expect("config tables always serialize")
    }

    pub fn with_controller(&self, kind: ControllerKind) -> SimConfig {
        SimConfig {
            controller: kind,
            ..self.sim.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_canonical_scenario() {
        let s = Settings::from_raw(&RawConfig::default()).unwrap();
        assert_eq!(s.sim, vtol_core::experiments::canonical_scenario().config);
        assert_eq!(s.montecarlo, MonteCarloConfig::default());
    }

    #[test]
    fn sections_flatten_to_dotted_keys() {
        let raw = RawConfig::parse("controller = \"fbl\"\n[sim]\ndt = 2e-3\ndelta = [1, 0.5]\n").unwrap();
        assert!(raw.0.contains_key("sim.dt"));
        let s = Settings::from_raw(&raw).unwrap();
        assert_eq!(s.sim.controller, ControllerKind::Fbl);
        assert_eq!(s.sim.dt, 2e-3);
        assert_eq!(s.sim.delta, (1.0, 0.5));
    }

    #[test]
    fn unknown_and_mistyped_keys_are_rejected() {
        let e = RawConfig::parse("[sim]\nstep = 1e-3\n").unwrap_err();
        assert!(e.to_string().contains("sim.step"), "{e}");
        let e = RawConfig::parse("[sim]\ndecimation = 2.5\n").unwrap_err();
        assert!(e.to_string().contains("sim.decimation"), "{e}");
        let e = RawConfig::parse("[control]\nsetpoint = [1, 2, 3]\n").unwrap_err();
        assert!(e.to_string().contains("control.setpoint"), "{e}");
    }

    #[test]
    fn domain_errors_name_the_key() {
        for (text, key) in [
            ("[sim]\ndt = 0\n", "sim.dt"),
            ("[sim]\nsubsteps = 0\n", "sim.substeps"),
            ("[plant]\ngravity = -1\n", "plant.gravity"),
            ("[control]\nk0 = [1, 1, 1, 5]\n", "control.k0"),
            ("[montecarlo]\nn_runs = 0\n", "montecarlo.n_runs"),
            ("controller = \"pid\"\n", "controller"),
        ] {
            let err = Settings::from_raw(&RawConfig::parse(text).unwrap()).unwrap_err();
            assert!(err.to_string().contains(key), "{text:?}: {err}");
        }
    }

    #[test]
    fn overrides_take_toml_or_bare_strings() {
        let mut raw = RawConfig::parse("[sim]\ndt = 1e-3\n").unwrap();
        raw.set("sim.dt=5e-4").unwrap();
        raw.set("controller=fbl").unwrap();
        raw.set("sim.delta = [2, 3]").unwrap();
        let s = Settings::from_raw(&raw).unwrap();
        assert_eq!(s.sim.dt, 5e-4);
        assert_eq!(s.sim.controller, ControllerKind::Fbl);
        assert_eq!(s.sim.delta, (2.0, 3.0));
        assert!(raw.set("sim.dt").is_err());
        assert!(raw.set("nope=1").is_err());
    }

    #[test]
    fn hover_thrust_follows_gravity() {
        let raw = RawConfig::parse("[plant]\ngravity = 3.5\n").unwrap();
        let s = Settings::from_raw(&raw).unwrap();
        assert_eq!(s.sim.initial_compensator.fhat, 3.5);
    }

    #[test]
    fn effective_config_round_trips() {
        let mut raw = RawConfig::parse(
            "scenario = \"hover\"\n[init]\ntheta = 0.1\n[clf]\ngains = [1, 10]\n",
        )
        .unwrap();
        raw.set("control.setpoint=[0.1, -0.2]").unwrap();
        raw.set("sim.t_final=0.7").unwrap();
        let s = Settings::from_raw(&raw).unwrap();
        let again = Settings::from_raw(&RawConfig::parse(&s.to_toml()).unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn schema_keys_are_unique() {
        let mut keys: Vec<_> = SCHEMA.iter().map(|s| s.0).collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), SCHEMA.len());
    }
}
