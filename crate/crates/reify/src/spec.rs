//! Declarative experiment specs: TOML files, CLI overrides, and the
//! condition grid they expand to.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::experiments::{ParamDef, EXPERIMENTS};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Capacity,
    Parity,
    Majority,
    Reber,
    Symmetry,
    Adversarial,
    ScoreCheck,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::Capacity,
        ExperimentId::Parity,
        ExperimentId::Majority,
        ExperimentId::Reber,
        ExperimentId::Symmetry,
        ExperimentId::Adversarial,
        ExperimentId::ScoreCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Capacity => "capacity",
            ExperimentId::Parity => "parity",
            ExperimentId::Majority => "majority",
            ExperimentId::Reber => "reber",
            ExperimentId::Symmetry => "symmetry",
            ExperimentId::Adversarial => "adversarial",
            ExperimentId::ScoreCheck => "score_check",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == s || e.name().replace('_', "-") == s)
            .ok_or_else(|| Error::Spec(format!("unknown experiment '{s}' (try `reify list`)")))
    }
}

/// What a spec file or command line asks for. Parameters not mentioned take
/// the experiment's defaults; a parameter with several values is a grid axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: ExperimentId,
    pub replications: Option<usize>,
    pub base_seed: Option<u64>,
    pub out: Option<String>,
    pub params: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    experiment: ExperimentId,
    replications: Option<usize>,
    base_seed: Option<u64>,
    out: Option<String>,
    #[serde(default)]
    params: toml::Table,
}

fn scalar_text(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(Error::Spec(format!("parameter '{key}': unsupported value {other}"))),
    }
}

impl ExperimentSpec {
    pub fn new(experiment: ExperimentId) -> Self {
        Self {
            experiment,
            replications: None,
            base_seed: None,
            out: None,
            params: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        let mut params = BTreeMap::new();
        for (key, value) in &file.params {
            let values = match value {
                toml::Value::Array(items) => items.iter().map(|v| scalar_text(key, v)).collect::<Result<Vec<_>>>()?,
                v => vec![scalar_text(key, v)?],
            };
            params.insert(key.clone(), values);
        }
        Ok(Self {
            experiment: file.experiment,
            replications: file.replications,
            base_seed: file.base_seed,
            out: file.out,
            params,
        })
    }

    pub fn to_toml(&self) -> String {
        let mut out = format!("experiment = \"{}\"\n", self.experiment);
        if let Some(r) = self.replications {
            out += &format!("replications = {r}\n");
        }
        if let Some(s) = self.base_seed {
            out += &format!("base_seed = {s}\n");
        }
        if let Some(o) = &self.out {
            out += &format!("out = {}\n", toml::Value::String(o.clone()));
        }
        if !self.params.is_empty() {
            out += "\n[params]\n";
            for (k, vs) in &self.params {
                let items: Vec<String> = vs.iter().map(|v| toml::Value::String(v.clone()).to_string()).collect();
                if items.len() == 1 {
                    out += &format!("{k} = {}\n", items[0]);
                } else {
                    out += &format!("{k} = [{}]\n", items.join(", "));
                }
            }
        }
        out
    }

    /// Applies `key=value` (or `key=a,b,c` for an axis).
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Spec(format!("expected key=value, got '{assignment}'")))?;
        let key = key.trim();
        let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
        if key.is_empty() || values.iter().any(String::is_empty) {
            return Err(Error::Spec(format!("malformed assignment '{assignment}'")));
        }
        self.params.insert(key.to_string(), values);
        Ok(())
    }

    /// Fills in defaults, checks keys, and expands the grid.
    pub fn resolve(&self) -> Result<ResolvedSpec> {
        let exp = &EXPERIMENTS[self.experiment];
        for key in self.params.keys() {
            if !exp.params.iter().any(|p| p.key == key) {
                let known: Vec<&str> = exp.params.iter().map(|p| p.key).collect();
                return Err(Error::Spec(format!(
                    "{}: unknown parameter '{key}' (known: {})",
                    self.experiment,
                    known.join(", ")
                )));
            }
        }
        let mut values = BTreeMap::new();
        let mut defaulted = BTreeMap::new();
        let mut axes = Vec::new();
        for ParamDef { key, default, .. } in exp.params {
            let v = match self.params.get(*key) {
                Some(v) => v.clone(),
                None => {
                    let v: Vec<String> = default.split(',').map(str::to_string).collect();
                    defaulted.insert(key.to_string(), v.clone());
                    v
                }
            };
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = v.iter().find(|x| !seen.insert(x.as_str())) {
                return Err(Error::Spec(format!("parameter '{key}' repeats value '{dup}'")));
            }
            if v.len() > 1 {
                axes.push(key.to_string());
            }
            values.insert(key.to_string(), v);
        }
        let replications = self.replications.unwrap_or(exp.default_replications);
        if replications < 2 {
            return Err(Error::Spec("at least 2 replications are needed for standard errors".into()));
        }
        let resolved = ResolvedSpec {
            experiment: self.experiment,
            replications,
            base_seed: self.base_seed.unwrap_or(0),
            values,
            defaulted,
            axes,
        };
        for cond in resolved.conditions() {
            (exp.check)(&cond).map_err(|e| Error::Spec(format!("condition {}: {e}", cond.label())))?;
        }
        Ok(resolved)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedSpec {
    pub experiment: ExperimentId,
    pub replications: usize,
    pub base_seed: u64,
    /// Every parameter with its value list.
    pub values: BTreeMap<String, Vec<String>>,
    /// The subset that came from defaults.
    pub defaulted: BTreeMap<String, Vec<String>>,
    /// Parameters with more than one value, in declaration order.
    pub axes: Vec<String>,
}

impl ResolvedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replications as u64).map(|r| self.base_seed + r).collect()
    }

    /// Cartesian product of the axes; the first axis varies slowest.
    pub fn conditions(&self) -> Vec<Condition> {
        let mut out = vec![Vec::<(String, String)>::new()];
        for axis in &self.axes {
            let mut next = Vec::new();
            for prefix in &out {
                for v in &self.values[axis] {
                    let mut p = prefix.clone();
                    p.push((axis.clone(), v.clone()));
                    next.push(p);
                }
            }
            out = next;
        }
        out.into_iter()
            .map(|point| {
                let mut values: BTreeMap<String, String> =
                    self.values.iter().map(|(k, v)| (k.clone(), v[0].clone())).collect();
                for (k, v) in &point {
                    values.insert(k.clone(), v.clone());
                }
                Condition { values, point }
            })
            .collect()
    }
}

/// One grid point with every parameter bound to a single value.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub values: BTreeMap<String, String>,
    /// The axis bindings, in axis order.
    pub point: Vec<(String, String)>,
}

impl Condition {
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Self {
            values: pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            point: Vec::new(),
        }
    }

    /// `k=v;k=v` over the axes, or `all` when there are none.
    pub fn label(&self) -> String {
        if self.point.is_empty() {
            "all".to_string()
        } else {
            self.point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
        }
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Spec(format!("missing parameter '{key}'")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.str(key)?;
        raw.parse()
            .map_err(|_| Error::Spec(format!("parameter '{key}': cannot parse '{raw}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parse(key)?;
        if !v.is_finite() {
            return Err(Error::Spec(format!("parameter '{key}' must be finite")));
        }
        Ok(v)
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parse(key)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.parse(key)
    }
}

/// Splits a condition label back into its pairs.
pub fn label_pairs(label: &str) -> Vec<(String, String)> {
    if label == "all" {
        return Vec::new();
    }
    label
        .split(';')
        .filter_map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let text = r#"
experiment = "parity"
replications = 3
base_seed = 7

[params]
model = ["rnn", "sdrnn"]
epochs = 10
sigma = 0.5
"#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.params["model"], vec!["rnn", "sdrnn"]);
        assert_eq!(spec.params["epochs"], vec!["10"]);
        assert_eq!(ExperimentSpec::from_toml(&spec.to_toml()).unwrap(), spec);
    }

    #[test]
    fn grid_follows_declaration_order_first_axis_slowest() {
        let mut spec = ExperimentSpec::new(ExperimentId::Majority);
        spec.set("l=11,17").unwrap();
        spec.set("model=rnn,sdrnn").unwrap();
        let r = spec.resolve().unwrap();
        let labels: Vec<String> = r.conditions().iter().map(Condition::label).collect();
        assert_eq!(
            labels,
            ["l=11;model=rnn", "l=11;model=sdrnn", "l=17;model=rnn", "l=17;model=sdrnn"]
        );
        assert!(r.defaulted.contains_key("lr"));
        assert!(!r.defaulted.contains_key("l"));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut spec = ExperimentSpec::new(ExperimentId::Parity);
        spec.set("colour=blue").unwrap();
        assert!(spec.resolve().is_err());
        let mut spec = ExperimentSpec::new(ExperimentId::Parity);
        spec.set("lr=fast").unwrap();
        assert!(spec.resolve().is_err());
        let mut spec = ExperimentSpec::new(ExperimentId::Parity);
        spec.replications = Some(1);
        assert!(spec.resolve().is_err());
        assert!(spec.set("novalue").is_err());
    }

    #[test]
    fn label_pairs_inverts_label() {
        let c = Condition {
            values: BTreeMap::new(),
            point: vec![("a".into(), "1".into()), ("model".into(), "rnn".into())],
        };
        assert_eq!(label_pairs(&c.label()), c.point);
        assert!(label_pairs("all").is_empty());
    }

    #[test]
    fn experiment_names_parse() {
        for e in ExperimentId::ALL {
            assert_eq!(e.name().parse::<ExperimentId>().unwrap(), e);
        }
        assert_eq!("score-check".parse::<ExperimentId>().unwrap(), ExperimentId::ScoreCheck);
        assert!("nope".parse::<ExperimentId>().is_err());
    }
}
