//! JSON scenario and jump-site files.
//!
//! A scenario lists outcomes with weights, the base partitions, an optional
//! enlargement and named processes (per outcome, one value or vector per
//! time). Numbers may be JSON numbers or strings such as `"3/10"`; in exact
//! mode both are read exactly, so `0.1` means `1/10`.

use std::collections::BTreeMap;

use serde_json::{Map, Value};
use thiserror::Error as ThisError;

use crate::jumpkernel::{AccessibleSite, InaccessibleSite, JumpSite, SiteChild};
use crate::scalar::Scalar;
use crate::space::{build_initial_enlargement, build_progressive_enlargement, Filtration, Partition, Process, RandomTime, SampleSpace};

#[derive(Debug, ThisError)]
pub enum ScenarioError {
    /// The text is not JSON.
    #[error("parse error: {0}")]
    Parse(String),
    /// The JSON does not describe a valid scenario.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid<T>(path: &str, message: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid { path: path.to_string(), message: message.into() })
}

/// Arithmetic settings a file may request; read before the backend is chosen.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub mode: Option<String>,
    pub tolerance: Option<f64>,
}

fn parse_json(text: &str) -> Result<Value, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
}

/// Reads only `mode` and `tolerance`.
pub fn peek_settings(text: &str) -> Result<Settings, ScenarioError> {
    let v = parse_json(text)?;
    let obj = as_object(&v, "$")?;
    let mode = match obj.get("mode") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s == "exact" || s == "float" => Some(s.clone()),
        Some(_) => return invalid("$.mode", "expected \"exact\" or \"float\""),
    };
    let tolerance = match obj.get("tolerance") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => match n.as_f64() {
            Some(t) if t > 0.0 => Some(t),
            _ => return invalid("$.tolerance", "expected a positive number"),
        },
        Some(_) => return invalid("$.tolerance", "expected a positive number"),
    };
    Ok(Settings { mode, tolerance })
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ScenarioError> {
    v.as_object().map_or_else(|| invalid(path, "expected an object"), Ok)
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, ScenarioError> {
    v.as_array().map_or_else(|| invalid(path, "expected an array"), Ok)
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, ScenarioError> {
    v.as_str().map_or_else(|| invalid(path, "expected a string"), Ok)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, ScenarioError> {
    obj.get(key).map_or_else(|| invalid(&format!("{path}.{key}"), "missing field"), Ok)
}

fn number<S: Scalar>(v: &Value, path: &str) -> Result<S, ScenarioError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return invalid(path, "expected a number or a \"p/q\" string"),
    };
    S::parse_value(&text).map_err(|e| ScenarioError::Invalid { path: path.to_string(), message: e.to_string() })
}

/// A number or an array of numbers.
fn vector<S: Scalar>(v: &Value, path: &str) -> Result<Vec<S>, ScenarioError> {
    match v {
        Value::Array(xs) => xs.iter().enumerate().map(|(i, x)| number(x, &format!("{path}[{i}]"))).collect(),
        _ => Ok(vec![number(v, path)?]),
    }
}

fn label_index(labels: &BTreeMap<String, usize>, v: &Value, path: &str) -> Result<usize, ScenarioError> {
    let l = as_str(v, path)?;
    labels.get(l).copied().map_or_else(|| invalid(path, format!("unknown outcome '{l}'")), Ok)
}

fn partitions(v: &Value, labels: &BTreeMap<String, usize>, path: &str) -> Result<Filtration, ScenarioError> {
    let n = labels.len();
    let mut parts = Vec::new();
    for (t, pv) in as_array(v, path)?.iter().enumerate() {
        let ppath = format!("{path}[{t}]");
        let mut atoms = Vec::new();
        for (a, av) in as_array(pv, &ppath)?.iter().enumerate() {
            let apath = format!("{ppath}[{a}]");
            let atom = as_array(av, &apath)?
                .iter()
                .enumerate()
                .map(|(i, x)| label_index(labels, x, &format!("{apath}[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            atoms.push(atom);
        }
        let p = Partition::new(n, atoms).or_else(|e| invalid(&ppath, e.to_string()))?;
        parts.push(p);
    }
    Filtration::new(parts).or_else(|e| invalid(path, e.to_string()))
}

/// `label -> value` map covering every outcome, returned in outcome order.
fn per_outcome<'a>(v: &'a Value, labels: &[String], path: &str) -> Result<Vec<&'a Value>, ScenarioError> {
    let obj = as_object(v, path)?;
    if let Some(extra) = obj.keys().find(|k| !labels.contains(k)) {
        return invalid(&format!("{path}.{extra}"), "unknown outcome");
    }
    labels.iter().map(|l| field(obj, l, path)).collect()
}

fn process<S: Scalar>(v: &Value, labels: &[String], horizon: usize, path: &str) -> Result<Process<S>, ScenarioError> {
    let rows = per_outcome(v, labels, path)?;
    let mut values: Vec<Vec<Vec<S>>> = Vec::with_capacity(labels.len());
    let mut dim = None;
    for (l, row) in labels.iter().zip(rows) {
        let rpath = format!("{path}.{l}");
        let arr = as_array(row, &rpath)?;
        if arr.len() != horizon + 1 {
            return invalid(&rpath, format!("expected {} values (t = 0..{horizon}), got {}", horizon + 1, arr.len()));
        }
        let mut series = Vec::with_capacity(arr.len());
        for (t, x) in arr.iter().enumerate() {
            let vpath = format!("{rpath}[{t}]");
            let vec = vector(x, &vpath)?;
            match dim {
                None => dim = Some(vec.len()),
                Some(d) if d != vec.len() => return invalid(&vpath, format!("expected dimension {d}, got {}", vec.len())),
                _ => {}
            }
            series.push(vec);
        }
        values.push(series);
    }
    let dim = dim.unwrap_or(1);
    Ok(Process::from_fn(labels.len(), horizon, dim, |o, t| values[o][t].clone()))
}

/// A fully parsed scenario.
#[derive(Debug, Clone)]
pub struct Scenario<S> {
    pub name: String,
    pub space: SampleSpace<S>,
    pub base: Filtration,
    pub expanded: Filtration,
    pub price: Process<S>,
    /// Explicit driver; synthesized from `base` when absent.
    pub driver: Option<Process<S>>,
    /// Explicit gauge carrier `N`; the driver when absent.
    pub gauge: Option<Process<S>>,
    /// A claimed solution `D` of the structure condition in `F`, checked but not used.
    pub claimed_d: Option<Process<S>>,
    pub settings: Settings,
}

impl<S: Scalar> Scenario<S> {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let settings = peek_settings(text)?;
        let root = parse_json(text)?;
        let obj = as_object(&root, "$")?;
        const KNOWN: [&str; 12] = [
            "name", "outcomes", "weights", "filtration", "enlargement", "processes", "price", "driver", "gauge", "claimed_d",
            "mode", "tolerance",
        ];
        if let Some(k) = obj.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return invalid(&format!("$.{k}"), "unknown field");
        }
        let name = match obj.get("name") {
            Some(v) => as_str(v, "$.name")?.to_string(),
            None => "scenario".to_string(),
        };
        let labels: Vec<String> = as_array(field(obj, "outcomes", "$")?, "$.outcomes")?
            .iter()
            .enumerate()
            .map(|(i, v)| as_str(v, &format!("$.outcomes[{i}]")).map(str::to_string))
            .collect::<Result<_, _>>()?;
        let index: BTreeMap<String, usize> = labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        if index.len() != labels.len() {
            return invalid("$.outcomes", "labels must be unique");
        }
        let wv = field(obj, "weights", "$")?;
        let weights: Vec<S> = match wv {
            Value::Object(_) => per_outcome(wv, &labels, "$.weights")?
                .into_iter()
                .zip(&labels)
                .map(|(v, l)| number(v, &format!("$.weights.{l}")))
                .collect::<Result<_, _>>()?,
            _ => as_array(wv, "$.weights")?
                .iter()
                .enumerate()
                .map(|(i, v)| number(v, &format!("$.weights[{i}]")))
                .collect::<Result<_, _>>()?,
        };
        let space = SampleSpace::new(labels.clone(), weights).or_else(|e| invalid("$.weights", e.to_string()))?;
        let base = partitions(field(obj, "filtration", "$")?, &index, "$.filtration")?;
        let horizon = base.horizon();
        let expanded = match obj.get("enlargement") {
            None | Some(Value::Null) => base.clone(),
            Some(e) => enlargement(e, &base, &labels, &index)?,
        };
        let procs = as_object(field(obj, "processes", "$")?, "$.processes")?;
        let lookup = |key: &str| -> Result<Option<Process<S>>, ScenarioError> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => {
                    let pname = as_str(v, &format!("$.{key}"))?;
                    let pv = procs
                        .get(pname)
                        .map_or_else(|| invalid(&format!("$.{key}"), format!("no process named '{pname}'")), Ok)?;
                    process(pv, &labels, horizon, &format!("$.processes.{pname}")).map(Some)
                }
            }
        };
        let price = lookup("price")?.map_or_else(|| invalid("$.price", "missing field"), Ok)?;
        Ok(Scenario {
            name,
            space,
            base,
            expanded,
            price,
            driver: lookup("driver")?,
            gauge: lookup("gauge")?,
            claimed_d: lookup("claimed_d")?,
            settings,
        })
    }
}

fn enlargement(v: &Value, base: &Filtration, labels: &[String], index: &BTreeMap<String, usize>) -> Result<Filtration, ScenarioError> {
    let path = "$.enlargement";
    let obj = as_object(v, path)?;
    let kind = as_str(field(obj, "kind", path)?, &format!("{path}.kind"))?;
    let g = match kind {
        "none" => base.clone(),
        "explicit" => {
            let g = partitions(field(obj, "partitions", path)?, index, &format!("{path}.partitions"))?;
            if g.horizon() != base.horizon() {
                return invalid(&format!("{path}.partitions"), "horizon differs from the base filtration");
            }
            g
        }
        "initial" => {
            let vpath = format!("{path}.variable");
            let keys = per_outcome(field(obj, "variable", path)?, labels, &vpath)?
                .into_iter()
                .map(|x| match x {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    Value::Bool(b) => Ok(b.to_string()),
                    _ => invalid(&vpath, "values must be strings, numbers or booleans"),
                })
                .collect::<Result<Vec<_>, _>>()?;
            build_initial_enlargement(base, &keys)
        }
        "progressive" => {
            let tpath = format!("{path}.time");
            let times = per_outcome(field(obj, "time", path)?, labels, &tpath)?
                .into_iter()
                .zip(labels)
                .map(|(x, l)| match x {
                    Value::Null => Ok(None),
                    Value::Number(n) => match n.as_u64() {
                        Some(t) if t as usize <= base.horizon() => Ok(Some(t as usize)),
                        _ => invalid(&format!("{tpath}.{l}"), "expected a grid time or null"),
                    },
                    _ => invalid(&format!("{tpath}.{l}"), "expected a grid time or null"),
                })
                .collect::<Result<Vec<_>, _>>()?;
            build_progressive_enlargement(base, &RandomTime::new(times))
        }
        other => return invalid(&format!("{path}.kind"), format!("unknown kind '{other}'")),
    };
    if !(0..=base.horizon()).all(|t| g.at(t).refines(base.at(t))) {
        return invalid(path, "the expanded filtration must refine the base filtration at every time");
    }
    Ok(g)
}

/// Parses a site file: `{"kind": "accessible" | "inaccessible", "children": [{"p", "w", "nu", "delta"}]}`.
///
/// The probability key may be `p`, `q` or `prob`.
pub fn parse_site<S: Scalar>(text: &str) -> Result<JumpSite<S>, ScenarioError> {
    let root = parse_json(text)?;
    let obj = as_object(&root, "$")?;
    let kind = as_str(field(obj, "kind", "$")?, "$.kind")?;
    let mut children = Vec::new();
    for (k, cv) in as_array(field(obj, "children", "$")?, "$.children")?.iter().enumerate() {
        let path = format!("$.children[{k}]");
        let c = as_object(cv, &path)?;
        let pv = ["p", "q", "prob"]
            .iter()
            .find_map(|key| c.get(*key))
            .map_or_else(|| invalid(&format!("{path}.p"), "missing probability"), Ok)?;
        children.push(SiteChild {
            prob: number(pv, &format!("{path}.p"))?,
            w: vector(field(c, "w", &path)?, &format!("{path}.w"))?,
            nu: number(field(c, "nu", &path)?, &format!("{path}.nu"))?,
            delta: number(field(c, "delta", &path)?, &format!("{path}.delta"))?,
        });
    }
    let d = match obj.get("d") {
        Some(v) => v.as_u64().map_or_else(|| invalid("$.d", "expected a non-negative integer"), |d| Ok(d as usize))?,
        None => children.first().map_or(0, |c| c.w.len()),
    };
    let site = match kind {
        "accessible" => AccessibleSite::new(d, children).map(JumpSite::Accessible),
        "inaccessible" => InaccessibleSite::new(d, children).map(JumpSite::Inaccessible),
        other => return invalid("$.kind", format!("expected accessible or inaccessible, got '{other}'")),
    };
    site.or_else(|e| invalid("$.children", e.to_string()))
}

/// Reads the arithmetic mode a site file may request.
pub fn peek_site_settings(text: &str) -> Result<Settings, ScenarioError> {
    peek_settings(text)
}
