//! Experiment configuration: JSON file, command-line overrides, validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use groupoid_averaging::trace::StopRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Kind {
    FiniteIterate,
    FiniteIdentities,
    CircleIterate,
    CircleProfile,
    BoundsCheck,
    GroupBundle,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::FiniteIterate => "finite_iterate",
            Kind::FiniteIdentities => "finite_identities",
            Kind::CircleIterate => "circle_iterate",
            Kind::CircleProfile => "circle_profile",
            Kind::BoundsCheck => "bounds_check",
            Kind::GroupBundle => "group_bundle",
        };
        f.write_str(s)
    }
}

/// Input files. Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub groupoid: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
    pub psrep: Option<PathBuf>,
    pub haar: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

/// The config file as written. Every field may also come from a flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol_c: Option<f64>,
    pub max_iter: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub perturb: Option<f64>,
    #[serde(default)]
    pub inputs: Inputs,
}

/// Flag values that replace config fields when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol_c: Option<f64>,
    pub max_iter: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub perturb: Option<f64>,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! bail {
    ($($arg:tt)*) => {
        return Err(ConfigError(format!($($arg)*)))
    };
}

pub const DEFAULT_N: usize = 64;
pub const DEFAULT_K: usize = 2;
/// Amplitude of the multiplicative bump applied by `circle_iterate` when no
/// `perturb` is given.
pub const DEFAULT_CIRCLE_PERTURB: f64 = 0.01;

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub kind: Kind,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub stop: StopRule,
    pub n: usize,
    pub k: usize,
    pub perturb: Option<f64>,
    pub inputs: Inputs,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.inputs = config.inputs.resolved(base);
        if let Some(out) = &config.out {
            config.out = Some(resolve(base, out));
        }
        Ok(config)
    }

    pub fn apply(mut self, o: Overrides) -> Self {
        self.kind = o.kind.or(self.kind);
        self.seed = o.seed.or(self.seed);
        self.out = o.out.or(self.out);
        self.tol_c = o.tol_c.or(self.tol_c);
        self.max_iter = o.max_iter.or(self.max_iter);
        self.n = o.n.or(self.n);
        self.k = o.k.or(self.k);
        self.perturb = o.perturb.or(self.perturb);
        self.inputs.trace = o.trace.or(self.inputs.trace);
        self
    }

    pub fn validate(self) -> Result<Experiment, ConfigError> {
        let Some(kind) = self.kind else {
            bail!("no experiment kind given");
        };
        let defaults = StopRule::default();
        let stop = StopRule {
            tol_c: self.tol_c.unwrap_or(defaults.tol_c),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
        };
        if !(stop.tol_c.is_finite() && stop.tol_c > 0.0) {
            bail!("tol_c must be positive, got {}", stop.tol_c);
        }
        if stop.max_iter == 0 {
            bail!("max_iter must be at least 1");
        }
        let n = self.n.unwrap_or(DEFAULT_N);
        let k = self.k.unwrap_or(DEFAULT_K);
        if n < 4 {
            bail!("N must be at least 4, got {n}");
        }
        if k == 0 {
            bail!("k must be at least 1");
        }
        if let Some(p) = self.perturb {
            if !(p.is_finite() && p >= 0.0) {
                bail!("perturb must be a non-negative number, got {p}");
            }
        }
        let inputs = self.inputs;
        check_inputs(kind, &inputs)?;
        let randomized = match kind {
            Kind::FiniteIterate | Kind::FiniteIdentities => {
                inputs.psrep.is_none() || self.perturb.is_some_and(|p| p > 0.0)
            }
            _ => false,
        };
        if randomized && self.seed.is_none() {
            bail!("{kind} draws random numbers here; pass --seed");
        }
        Ok(Experiment {
            kind,
            seed: self.seed,
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
            stop,
            n,
            k,
            perturb: self.perturb,
            inputs,
        })
    }
}

impl Inputs {
    fn resolved(self, base: &Path) -> Self {
        let r = |p: Option<PathBuf>| p.map(|p| resolve(base, &p));
        Self {
            groupoid: r(self.groupoid),
            bundle: r(self.bundle),
            psrep: r(self.psrep),
            haar: r(self.haar),
            grid: r(self.grid),
            profile: r(self.profile),
            trace: r(self.trace),
        }
    }

    fn named(&self) -> [(&'static str, &Option<PathBuf>); 7] {
        [
            ("groupoid", &self.groupoid),
            ("bundle", &self.bundle),
            ("psrep", &self.psrep),
            ("haar", &self.haar),
            ("grid", &self.grid),
            ("profile", &self.profile),
            ("trace", &self.trace),
        ]
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn check_inputs(kind: Kind, inputs: &Inputs) -> Result<(), ConfigError> {
    let allowed: &[&str] = match kind {
        Kind::FiniteIterate | Kind::FiniteIdentities => &["groupoid", "bundle", "psrep", "haar"],
        Kind::CircleIterate | Kind::GroupBundle => &["grid"],
        Kind::CircleProfile => &["profile"],
        Kind::BoundsCheck => &["trace"],
    };
    for (name, path) in inputs.named() {
        let Some(path) = path else { continue };
        if !allowed.contains(&name) {
            bail!("input `{name}` is not used by {kind}");
        }
        if !path.is_file() {
            bail!("input `{name}` does not exist: {}", path.display());
        }
    }
    if matches!(kind, Kind::FiniteIterate | Kind::FiniteIdentities) {
        let given = [&inputs.groupoid, &inputs.bundle, &inputs.psrep]
            .iter()
            .filter(|p| p.is_some())
            .count();
        if given != 0 && given != 3 {
            bail!("groupoid, bundle and psrep inputs must be given together");
        }
        if inputs.haar.is_some() && given == 0 {
            bail!("a haar input needs groupoid, bundle and psrep inputs");
        }
    }
    if kind == Kind::BoundsCheck && inputs.trace.is_none() {
        bail!("bounds_check needs a trace input");
    }
    Ok(())
}
