use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::exponent::ExponentSpec;
use crate::grid::Shape;
use crate::linearize::Density;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Norm,
    Rigidity,
    Korn,
    Poincare,
    Mixed,
    Extend,
    Lusin,
    Gamma,
    Whitney,
    Maximal,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Subcommand::Norm,
        Subcommand::Rigidity,
        Subcommand::Korn,
        Subcommand::Poincare,
        Subcommand::Mixed,
        Subcommand::Extend,
        Subcommand::Lusin,
        Subcommand::Gamma,
        Subcommand::Whitney,
        Subcommand::Maximal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Norm => "norm",
            Subcommand::Rigidity => "rigidity",
            Subcommand::Korn => "korn",
            Subcommand::Poincare => "poincare",
            Subcommand::Mixed => "mixed",
            Subcommand::Extend => "extend",
            Subcommand::Lusin => "lusin",
            Subcommand::Gamma => "gamma",
            Subcommand::Whitney => "whitney",
            Subcommand::Maximal => "maximal",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand `{s}`")))
    }
}

/// Sweep lists; every list must be nonempty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Grid resolutions (nodes per axis); `h` follows from the domain.
    pub resolutions: Vec<usize>,
    pub eps: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Stream indices forked from `rng_seed`.
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Size of the random part of generated fields.
    pub amplitude: f64,
    /// `q = q_scale · p` for two-exponent scenarios.
    pub q_scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryData {
    Zero,
    /// `h(x) = S x` with a fixed skew `S`.
    Skew,
    /// `h(x) = 0.1 (x₂, x₁) + bump`.
    Generic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub density: Density,
    pub boundary: BoundaryData,
    /// Height of the Gaussian bump added to generic data.
    pub bump: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendConfig {
    /// Tangential coordinates `x₀′` of the ball center on the graph.
    pub anchor: Vec<f64>,
    pub outer_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub subcommand: Subcommand,
    pub domain: Shape,
    pub exponent: ExponentSpec,
    pub sweep: SweepConfig,
    pub field: FieldConfig,
    pub energy: EnergyConfig,
    pub extend: ExtendConfig,
    pub rng_seed: u64,
}

/// Default configuration of a subcommand as a JSON tree.
pub fn default_config(sub: Subcommand) -> Value {
    let (domain, exponent, resolutions) = match sub {
        Subcommand::Gamma => (
            json!({"kind": "lshape"}),
            json!({"kind": "linear-ramp", "from": 1.3, "to": 2.0, "axis": 0}),
            json!([33]),
        ),
        Subcommand::Extend => (
            json!({"kind": "graph-halfspace", "slope": 0.3, "intercept": 0.0, "lo": [-1.0, -1.0], "hi": [1.0, 1.0]}),
            json!({"kind": "linear-ramp", "from": 1.4, "to": 1.8, "axis": 0}),
            json!([65, 129]),
        ),
        Subcommand::Whitney => (
            json!({"kind": "lshape"}),
            json!({"kind": "constant", "value": 2.0}),
            json!([33, 65]),
        ),
        _ => (
            json!({"kind": "rectangle", "lo": [0.0, 0.0], "hi": [1.0, 1.0]}),
            json!({"kind": "linear-ramp", "from": 1.4, "to": 2.0, "axis": 0}),
            json!([33]),
        ),
    };
    json!({
        "subcommand": sub.as_str(),
        "domain": domain,
        "exponent": exponent,
        "sweep": {
            "resolutions": resolutions,
            "eps": [1e-1, 1e-2, 1e-3],
            "lambda": [2.0, 4.0, 8.0],
            "mu": [1.0, 2.0, 4.0],
            "seeds": [0, 1, 2, 3, 4]
        },
        "field": {"amplitude": 1.0, "q_scale": 1.25},
        "energy": {"density": "g-dist", "boundary": "generic", "bump": 0.05},
        "extend": {"anchor": [0.0], "outer_radius": 0.95},
        "rng_seed": 20240601u64
    })
}

/// Recursively overlays `patch` onto `base`; objects merge, everything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() && k != "domain" && k != "exponent" => {
                        merge(slot, v)
                    }
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Applies one `dotted.key=value` override. The value is parsed as JSON
/// when possible and taken as a string otherwise.
pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    if key.is_empty() {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let last = k + 1 == parts.len();
        slot = match slot {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("`{part}` in `{key}` is not an array index")))?;
                let len = items.len();
                let item = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range ({len}) in `{key}`")))?;
                if last {
                    *item = value;
                    return Ok(());
                }
                item
            }
            _ => return Err(Error::Config(format!("`{key}` descends into a scalar"))),
        };
    }
    unreachable!("loop returns on the last segment")
}

/// Defaults, then the config file, then each override, then validation.
pub fn resolve_config(sub: Subcommand, file: Option<&str>, overrides: &[String]) -> Result<(ScenarioConfig, Value)> {
    let mut tree = default_config(sub);
    if let Some(text) = file {
        let patch: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        if !patch.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        if let Some(named) = patch.get("subcommand") {
            if named.as_str() != Some(sub.as_str()) {
                return Err(Error::Config(format!(
                    "config names subcommand {named} but `{sub}` was requested"
                )));
            }
        }
        merge(&mut tree, patch);
    }
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    let config: ScenarioConfig =
        serde_json::from_value(tree.clone()).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    if config.subcommand != sub {
        return Err(Error::Config("the subcommand cannot be overridden".into()));
    }
    config.validate()?;
    Ok((config, tree))
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        let lists = [
            ("resolutions", s.resolutions.is_empty()),
            ("eps", s.eps.is_empty()),
            ("lambda", s.lambda.is_empty()),
            ("mu", s.mu.is_empty()),
            ("seeds", s.seeds.is_empty()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, empty)| *empty) {
            return Err(Error::Config(format!("sweep list `{name}` is empty")));
        }
        if s.resolutions.iter().any(|&r| r < 5) {
            return Err(Error::Config("resolutions must be at least 5".into()));
        }
        let positive = |name: &str, v: &[f64]| {
            if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                Err(Error::Config(format!("sweep `{name}` must contain positive finite numbers")))
            } else {
                Ok(())
            }
        };
        positive("eps", &s.eps)?;
        positive("lambda", &s.lambda)?;
        if s.mu.iter().any(|m| !(*m >= 1.0 && *m <= 4.0)) {
            return Err(Error::Config("sweep `mu` must lie in [1, 4]".into()));
        }
        if !(self.field.amplitude >= 0.0) || !self.field.amplitude.is_finite() {
            return Err(Error::Config("field.amplitude must be a finite nonnegative number".into()));
        }
        if !(self.field.q_scale >= 1.0) || !self.field.q_scale.is_finite() {
            return Err(Error::Config("field.q_scale must be at least 1".into()));
        }
        if !self.energy.bump.is_finite() {
            return Err(Error::Config("energy.bump must be finite".into()));
        }
        if self.subcommand == Subcommand::Gamma {
            if s.resolutions.len() != 1 {
                return Err(Error::Config("gamma runs on a single resolution".into()));
            }
            if s.eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("gamma needs a strictly decreasing eps list".into()));
            }
        }
        if self.subcommand == Subcommand::Extend && !(self.extend.outer_radius > 0.0) {
            return Err(Error::Config("extend.outer_radius must be positive".into()));
        }
        Ok(())
    }
}
