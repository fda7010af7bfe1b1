//! Structured report construction. Reports are JSON with sorted keys;
//! exact rationals render as "p/q" strings unless floats are requested.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde_json::{json, Map, Value};
use twostage_mw_core::cumulants::{CumulantSet, PaperAggregates, Weighting};
use twostage_mw_core::moments::{moment_key, MomentSet};
use twostage_mw_core::oracle::MomentEstimates;
use twostage_mw_core::SampleDesign;

pub const SCHEMA_VERSION: u64 = 1;

pub fn rational_value(r: &BigRational, as_float: bool) -> Value {
    if as_float {
        json!(r.to_f64().expect("value fits in f64"))
    } else {
        Value::String(r.to_string())
    }
}

pub fn base_report(command: &str, with_timestamp: bool) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("schema".into(), json!(SCHEMA_VERSION));
    map.insert("command".into(), json!(command));
    if with_timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        map.insert("timestamp_unix".into(), json!(secs));
    }
    map
}

pub fn design_value(d: &SampleDesign) -> Value {
    json!({"m": d.m, "n": d.n, "M": d.total_m, "N": d.total_n})
}

pub fn exact_moments_value(m: &MomentSet<BigRational>, as_float: bool) -> Value {
    let mut map = Map::new();
    for ((a, b), v) in m.iter() {
        map.insert(moment_key(a, b), rational_value(v, as_float));
    }
    Value::Object(map)
}

pub fn float_moments_value(m: &MomentSet<f64>) -> Value {
    let mut map = Map::new();
    for ((a, b), v) in m.iter() {
        map.insert(moment_key(a, b), json!(v));
    }
    Value::Object(map)
}

pub fn cumulant_key(r: u8, s: u8) -> String {
    format!("kappa_{r}_{s}")
}

pub fn exact_cumulants_value(c: &CumulantSet<BigRational>, as_float: bool) -> Value {
    let mut map = Map::new();
    for ((r, s), v) in c.iter() {
        map.insert(cumulant_key(r, s), rational_value(v, as_float));
    }
    Value::Object(map)
}

pub fn float_cumulants_value(c: &CumulantSet<f64>) -> Value {
    let mut map = Map::new();
    for ((r, s), v) in c.iter() {
        map.insert(cumulant_key(r, s), json!(v));
    }
    Value::Object(map)
}

pub fn exact_aggregates_value(a: &PaperAggregates<BigRational>, as_float: bool) -> Value {
    json!({
        "weighting": weighting_name(a.weighting),
        "k1": rational_value(&a.k1, as_float),
        "k2": rational_value(&a.k2, as_float),
        "k3": rational_value(&a.k3, as_float),
        "k4": rational_value(&a.k4, as_float),
    })
}

pub fn float_aggregates_value(a: &PaperAggregates<f64>) -> Value {
    json!({
        "weighting": weighting_name(a.weighting),
        "k1": a.k1, "k2": a.k2, "k3": a.k3, "k4": a.k4,
    })
}

pub fn weighting_name(w: Weighting) -> &'static str {
    match w {
        Weighting::Paper => "paper",
        Weighting::Binomial => "binomial",
    }
}

pub fn estimates_value(e: &MomentEstimates) -> Value {
    json!({
        "moments": float_moments_value(&e.values),
        "standard_errors": float_moments_value(&e.standard_errors),
        "replications": e.replications,
        "seed": e.seed,
    })
}

pub fn render(map: Map<String, Value>) -> String {
    let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("report serializes");
    s.push('\n');
    s
}
