//! Flat `key=value` run configuration.
//!
//! Layers apply in order: preset, file, `--set` overrides; later layers win.
//! `#` starts a comment, blank lines are ignored, and keys may not repeat
//! within one file.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::error::ParamError;
use crate::fracops::{Coefficient, ProblemSpec};
use crate::quenchlab::{RunConfig, SnapshotPolicy};
use crate::stepping::{SolverRoute, StabilityMode, StepControls};

/// Keys accepted in config files and overrides, in emission order.
pub const KEYS: &[&str] = &[
    "sigma",
    "theta",
    "kappa",
    "a",
    "b",
    "L",
    "tau0",
    "t_max",
    "quench_delta",
    "steady_eps",
    "stability_mode",
    "snapshot_policy",
    "d_plus",
    "d_minus",
    "courant_cap",
    "fixed_step",
    "solver",
    "max_steps",
];

const REQUIRED: &[&str] = &["sigma", "theta", "a", "b"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Preset(String),
    File { path: String, line: usize },
    Override(usize),
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Preset(name) => write!(f, "preset `{name}`"),
            Origin::File { path, line } => write!(f, "{path}:{line}"),
            Origin::Override(i) => write!(f, "override #{i}"),
            Origin::Default => f.write_str("default"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { key: String, origin: Origin },
    #[error("{origin}: expected `key=value`, found `{text}`")]
    Syntax { text: String, origin: Origin },
    #[error("{origin}: key `{key}` is given more than once")]
    Duplicate { key: String, origin: Origin },
    #[error("{origin}: invalid value `{value}` for `{key}` ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
        origin: Origin,
    },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("{origin}: invalid `{key}`: {source}")]
    Invalid {
        key: String,
        origin: Origin,
        source: ParamError,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("`{0}` is not a constant and cannot be written as a flat config")]
    NotSerializable(&'static str),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ConfigError {
    /// The offending key, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key, .. }
            | ConfigError::Duplicate { key, .. }
            | ConfigError::BadValue { key, .. }
            | ConfigError::Missing { key }
            | ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub entries: &'static [(&'static str, &'static str)],
}

/// Experiment presets: `L = 100`, `τ0 = 2e-4` unless stated.
pub const PRESETS: &[Preset] = &[
    Preset {
        name: "critical-length",
        summary: "classical critical length search (sigma=2, theta=1, b=0)",
        entries: &[("sigma", "2"), ("theta", "1"), ("a", "1.5"), ("b", "0")],
    },
    Preset {
        name: "pi-interval",
        summary: "quenching on (0, pi), sigma=2, theta=1",
        entries: &[
            ("sigma", "2"),
            ("theta", "1"),
            ("a", "3.141592653589793"),
            ("b", "0"),
        ],
    },
    Preset {
        name: "two-interval",
        summary: "quenching on (0, 2), sigma=2, theta=1",
        entries: &[("sigma", "2"), ("theta", "1"), ("a", "2"), ("b", "0")],
    },
    Preset {
        name: "long-interval",
        summary: "large-interval quench time, a=8, b=-0.4",
        entries: &[("sigma", "2"), ("theta", "1"), ("a", "8"), ("b", "-0.4")],
    },
    Preset {
        name: "fractional",
        summary: "fractional quenching, sigma=1.8, a=2, b=-0.4",
        entries: &[("sigma", "1.8"), ("theta", "1"), ("a", "2"), ("b", "-0.4")],
    },
    Preset {
        name: "location",
        summary: "quench location with convection, sigma=2, a=pi, b=0.5",
        entries: &[
            ("sigma", "2"),
            ("theta", "1"),
            ("a", "3.141592653589793"),
            ("b", "0.5"),
            ("snapshot_policy", "last:40"),
        ],
    },
    Preset {
        name: "order",
        summary: "Milne order study, sigma=1.8, a=2, b=-0.4, fixed tau=1e-4",
        entries: &[
            ("sigma", "1.8"),
            ("theta", "1"),
            ("a", "2"),
            ("b", "-0.4"),
            ("tau0", "1e-4"),
            ("fixed_step", "true"),
        ],
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Unresolved key/value layers; the last entry for a key wins.
#[derive(Debug, Clone, Default)]
pub struct ConfigLayers {
    entries: Vec<(String, String, Origin)>,
}

fn check_key(key: &str, origin: &Origin) -> Result<(), ConfigError> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(ConfigError::UnknownKey {
            key: key.to_string(),
            origin: origin.clone(),
        })
    }
}

fn split_pair(text: &str, origin: &Origin) -> Result<(String, String), ConfigError> {
    let Some((k, v)) = text.split_once('=') else {
        return Err(ConfigError::Syntax {
            text: text.to_string(),
            origin: origin.clone(),
        });
    };
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(ConfigError::Syntax {
            text: text.to_string(),
            origin: origin.clone(),
        });
    }
    check_key(k, origin)?;
    Ok((k.to_string(), v.to_string()))
}

impl ConfigLayers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn preset(&mut self, name: &str) -> Result<&mut Self, ConfigError> {
        let p = preset(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
        for (k, v) in p.entries {
            self.entries
                .push((k.to_string(), v.to_string(), Origin::Preset(name.to_string())));
        }
        Ok(self)
    }

    pub fn text(&mut self, text: &str, label: &str) -> Result<&mut Self, ConfigError> {
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = Origin::File {
                path: label.to_string(),
                line: i + 1,
            };
            let (k, v) = split_pair(line, &origin)?;
            if seen.contains(&k) {
                return Err(ConfigError::Duplicate { key: k, origin });
            }
            seen.push(k.clone());
            self.entries.push((k, v, origin));
        }
        Ok(self)
    }

    pub fn file(&mut self, path: &Path) -> Result<&mut Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.text(&text, &path.display().to_string())
    }

    pub fn overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<&mut Self, ConfigError> {
        for (i, o) in overrides.iter().enumerate() {
            let origin = Origin::Override(i + 1);
            let (k, v) = split_pair(o.as_ref(), &origin)?;
            self.entries.push((k, v, origin));
        }
        Ok(self)
    }

    fn lookup(&self, key: &str) -> Option<(&str, &Origin)> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, o)| (v.as_str(), o))
    }

    /// Resolves the layers into a validated [`RunConfig`].
    pub fn build(&self) -> Result<RunConfig, ConfigError> {
        for key in REQUIRED {
            if self.lookup(key).is_none() {
                return Err(ConfigError::Missing {
                    key: key.to_string(),
                });
            }
        }
        let num = |key: &str| -> Result<Option<f64>, ConfigError> {
            self.lookup(key).map(|(v, o)| parse_f64(key, v, o)).transpose()
        };
        let req = |key: &str| -> Result<f64, ConfigError> { Ok(num(key)?.expect("required key")) };

        let mut spec = ProblemSpec::kawarada(req("sigma")?, req("theta")?, req("a")?, req("b")?);
        if let Some(k) = num("kappa")? {
            spec.kappa = k;
        }
        if let Some(d) = num("d_plus")? {
            spec.d_plus = Coefficient::Constant(d);
        }
        if let Some(d) = num("d_minus")? {
            spec.d_minus = Coefficient::Constant(d);
        }

        let mut config = RunConfig::new(spec);
        if let Some((v, o)) = self.lookup("L") {
            config.intervals = parse_usize("L", v, o)?;
        }
        if let Some(t) = num("tau0")? {
            config.controls.tau0 = t;
        }
        if let Some(t) = num("t_max")? {
            config.t_max = t;
        }
        if let Some(d) = num("quench_delta")? {
            config.quench_delta = d;
        }
        if let Some(e) = num("steady_eps")? {
            config.steady_eps = e;
        }
        if let Some((v, o)) = self.lookup("stability_mode") {
            config.controls.stability_mode = match v {
                "enforce" => StabilityMode::Enforce,
                "warn" => StabilityMode::Warn,
                _ => return Err(bad("stability_mode", v, "expected enforce or warn", o)),
            };
        }
        if let Some((v, o)) = self.lookup("snapshot_policy") {
            config.snapshot_policy = parse_policy(v, o)?;
        }
        if let Some((v, o)) = self.lookup("courant_cap") {
            config.controls.courant_cap = match v {
                "none" => None,
                _ => Some(parse_f64("courant_cap", v, o)?),
            };
        }
        if let Some((v, o)) = self.lookup("fixed_step") {
            config.controls.adaptive = !parse_bool("fixed_step", v, o)?;
        }
        if let Some((v, o)) = self.lookup("solver") {
            config.solver = match v {
                "hessenberg" => SolverRoute::Hessenberg,
                "lu" => SolverRoute::DenseLu,
                _ => return Err(bad("solver", v, "expected hessenberg or lu", o)),
            };
        }
        if let Some((v, o)) = self.lookup("max_steps") {
            config.max_steps = match v {
                "none" => None,
                _ => Some(parse_usize("max_steps", v, o)?),
            };
        }

        config.validate().map_err(|source| {
            let key = param_key(&source);
            let origin = self.lookup(key).map(|(_, o)| o.clone()).unwrap_or(Origin::Default);
            ConfigError::Invalid {
                key: key.to_string(),
                origin,
                source,
            }
        })?;
        Ok(config)
    }
}

/// Config key responsible for a validation failure.
fn param_key(e: &ParamError) -> &'static str {
    match e {
        ParamError::SigmaOutOfRange(_) => "sigma",
        ParamError::NotPositive { name, .. } | ParamError::NotFinite { name, .. } => name,
        ParamError::Diffusivity { name, .. } => name,
        ParamError::TooFewIntervals(_) | ParamError::TooFewWeights { .. } => "L",
        ParamError::QuenchDelta { .. } => "quench_delta",
        ParamError::InitialProfile { .. } => "kappa",
        ParamError::WeightOrderMismatch { .. } => "sigma",
        ParamError::GridMismatch { .. } => "a",
    }
}

fn bad(key: &str, value: &str, reason: impl Into<String>, origin: &Origin) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
        origin: origin.clone(),
    }
}

fn parse_f64(key: &str, value: &str, origin: &Origin) -> Result<f64, ConfigError> {
    // Accept the typographic minus sign as well.
    value
        .replace('\u{2212}', "-")
        .parse::<f64>()
        .map_err(|e| bad(key, value, e.to_string(), origin))
}

fn parse_usize(key: &str, value: &str, origin: &Origin) -> Result<usize, ConfigError> {
    value
        .parse::<usize>()
        .map_err(|e| bad(key, value, e.to_string(), origin))
}

fn parse_bool(key: &str, value: &str, origin: &Origin) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false", origin)),
    }
}

fn parse_policy(value: &str, origin: &Origin) -> Result<SnapshotPolicy, ConfigError> {
    match value {
        "none" => Ok(SnapshotPolicy::None),
        "every" => Ok(SnapshotPolicy::EveryStep),
        _ => match value.strip_prefix("last:") {
            Some(k) => k
                .parse::<usize>()
                .map(SnapshotPolicy::LastSteps)
                .map_err(|e| bad("snapshot_policy", value, e.to_string(), origin)),
            None => Err(bad(
                "snapshot_policy",
                value,
                "expected none, every or last:K",
                origin,
            )),
        },
    }
}

/// Reads a config file and applies `key=value` overrides on top.
pub fn parse_config<S: AsRef<str>>(path: &Path, overrides: &[S]) -> Result<RunConfig, ConfigError> {
    ConfigLayers::new().file(path)?.overrides(overrides)?.build()
}

pub fn parse_config_str<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<RunConfig, ConfigError> {
    ConfigLayers::new().text(text, "<config>")?.overrides(overrides)?.build()
}

/// Writes every key of `config`; `parse_config_str` of the result reproduces it.
pub fn emit_config(config: &RunConfig) -> Result<String, ConfigError> {
    let spec = &config.spec;
    let d_plus = spec.d_plus.as_constant().ok_or(ConfigError::NotSerializable("d_plus"))?;
    let d_minus = spec.d_minus.as_constant().ok_or(ConfigError::NotSerializable("d_minus"))?;
    if spec.psi != Default::default() {
        return Err(ConfigError::NotSerializable("psi"));
    }
    if spec.source != Default::default() {
        return Err(ConfigError::NotSerializable("source"));
    }

    let c: &StepControls = &config.controls;
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    put("sigma", spec.sigma.to_string());
    put("theta", spec.theta.to_string());
    put("kappa", spec.kappa.to_string());
    put("a", spec.a.to_string());
    put("b", spec.b.to_string());
    put("L", config.intervals.to_string());
    put("tau0", c.tau0.to_string());
    put("t_max", config.t_max.to_string());
    put("quench_delta", config.quench_delta.to_string());
    put("steady_eps", config.steady_eps.to_string());
    put(
        "stability_mode",
        match c.stability_mode {
            StabilityMode::Enforce => "enforce",
            StabilityMode::Warn => "warn",
        }
        .into(),
    );
    put(
        "snapshot_policy",
        match config.snapshot_policy {
            SnapshotPolicy::None => "none".into(),
            SnapshotPolicy::EveryStep => "every".into(),
            SnapshotPolicy::LastSteps(k) => format!("last:{k}"),
        },
    );
    put("d_plus", d_plus.to_string());
    put("d_minus", d_minus.to_string());
    put(
        "courant_cap",
        c.courant_cap.map_or_else(|| "none".into(), |v| v.to_string()),
    );
    put("fixed_step", (!c.adaptive).to_string());
    put(
        "solver",
        match config.solver {
            SolverRoute::Hessenberg => "hessenberg",
            SolverRoute::DenseLu => "lu",
        }
        .into(),
    );
    put(
        "max_steps",
        config.max_steps.map_or_else(|| "none".into(), |v| v.to_string()),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NO: [&str; 0] = [];

    #[test]
    fn empty_file_is_missing_sigma() {
        let err = parse_config_str("", &NO).unwrap_err();
        assert!(matches!(err, ConfigError::Missing { ref key } if key == "sigma"));
    }

    #[test]
    fn pi_interval_example() {
        let c = parse_config_str("sigma=2\ntheta=1\na=3.14159265\nb=0", &NO).unwrap();
        assert_eq!(c.spec.sigma, 2.0);
        assert_eq!(c.spec.theta, 1.0);
        assert_eq!(c.spec.a, 3.14159265);
        assert_eq!(c.spec.b, 0.0);
        assert_eq!(c.intervals, 100);
        assert_eq!(c.controls.tau0, 2e-4);
        assert_eq!(c.spec.kappa, 1.0);
    }

    #[test]
    fn override_wins() {
        let text = "sigma=2\ntheta=1\na=3\nb=0.5\n";
        let c = parse_config_str(text, &["b=\u{2212}0.5"]).unwrap();
        assert_eq!(c.spec.b, -0.5);
    }

    #[test]
    fn errors_name_key_and_line() {
        let err = parse_config_str("sigma=2\n# note\nthetaa=1\n", &NO).unwrap_err();
        assert_eq!(err.key(), Some("thetaa"));
        assert!(err.to_string().contains(":3"), "{err}");

        let err = parse_config_str("sigma=2\ntheta=one\na=1\nb=0", &NO).unwrap_err();
        assert_eq!(err.key(), Some("theta"));
        assert!(err.to_string().contains(":2"), "{err}");

        let err = parse_config_str("sigma=2.5\ntheta=1\na=1\nb=0", &NO).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref key, .. } if key == "sigma"));
        assert!(err.to_string().contains(":1"), "{err}");

        let err = parse_config_str("sigma=2\ntheta=1\na=1\nb=0\nquench_delta=2", &NO).unwrap_err();
        assert_eq!(err.key(), Some("quench_delta"));

        let err = parse_config_str("sigma 2", &NO).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { .. }));

        let err = parse_config_str("sigma=2\nsigma=1.5", &NO).unwrap_err();
        assert!(matches!(err, ConfigError::Duplicate { .. }));
    }

    #[test]
    fn every_key_parses() {
        let text = "\
sigma=1.8
theta=2
kappa=1.5
a=2
b=-0.4
L=64
tau0=1e-4
t_max=3
quench_delta=0.02
steady_eps=1e-9
stability_mode=enforce
snapshot_policy=last:7
d_plus=0.3
d_minus=0.7
courant_cap=0.5
fixed_step=true
solver=lu
max_steps=100
";
        let c = parse_config_str(text, &NO).unwrap();
        assert_eq!(c.intervals, 64);
        assert_eq!(c.snapshot_policy, SnapshotPolicy::LastSteps(7));
        assert_eq!(c.controls.stability_mode, StabilityMode::Enforce);
        assert_eq!(c.controls.courant_cap, Some(0.5));
        assert!(!c.controls.adaptive);
        assert_eq!(c.solver, SolverRoute::DenseLu);
        assert_eq!(c.max_steps, Some(100));
        assert_eq!(c.spec.d_minus, Coefficient::Constant(0.7));
        assert_eq!(parse_config_str(&emit_config(&c).unwrap(), &NO).unwrap(), c);
    }

    #[test]
    fn presets_resolve() {
        for p in PRESETS {
            let c = ConfigLayers::new().preset(p.name).unwrap().build().unwrap();
            assert_eq!(c.intervals, 100, "{}", p.name);
            assert_eq!(c.spec.kappa, 1.0);
        }
        let order = ConfigLayers::new().preset("order").unwrap().build().unwrap();
        assert_eq!(order.controls.tau0, 1e-4);
        assert!(!order.controls.adaptive);
        let pi = ConfigLayers::new().preset("pi-interval").unwrap().build().unwrap();
        assert_eq!(pi.spec.a, std::f64::consts::PI);
        assert_eq!(pi.controls.tau0, 2e-4);
        assert!(ConfigLayers::new().preset("nope").is_err());
    }
}
