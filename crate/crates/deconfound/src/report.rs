//! Canonical JSON reports.
//!
//! Objects are key-sorted and every real number is written with 17
//! significant digits next to a rounded `display` string. Values that are not
//! finite numbers become `{"value": null, "tag": ..., "reason": ...}`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use deconfound_core::effects::{Entry, PValues, StratifiedEntry};
use deconfound_core::simulate::{MetricSummary, Stats};
use deconfound_core::{
    EffectReport, Estimate, FluctuationSummary, JointTable, ProjectionResult, Provenance, Schema,
    Settings,
};
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

/// Everything one run produced. Only `source` and `table` are mandatory.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportDocument {
    pub source: String,
    pub table: JointTable,
    pub projection: Option<(ProjectionResult, Settings)>,
    pub empirical: Option<EffectReport>,
    pub hypothetical: Option<EffectReport>,
    pub fluctuation: Option<FluctuationSummary>,
}

impl ReportDocument {
    pub fn new(source: impl Into<String>, table: JointTable) -> Self {
        Self {
            source: source.into(),
            table,
            projection: None,
            empirical: None,
            hypothetical: None,
            fluctuation: None,
        }
    }

    pub fn to_json(&self) -> Value {
        let schema = self.table.schema();
        let mut root = Map::new();
        root.insert("input".into(), input_digest(&self.source, &self.table));
        if let Some((result, settings)) = &self.projection {
            root.insert("projection".into(), projection(result, settings));
        }
        let mut effects = Map::new();
        if let Some(r) = &self.empirical {
            effects.insert("empirical".into(), effect_report(schema, r));
        }
        if let Some(r) = &self.hypothetical {
            effects.insert("hypothetical".into(), effect_report(schema, r));
        }
        if !effects.is_empty() {
            root.insert("effects".into(), Value::Object(effects));
        }
        if let Some(f) = &self.fluctuation {
            root.insert("fluctuation".into(), fluctuation(f));
        }
        Value::Object(root)
    }

    /// Pretty-printed document with a trailing newline.
    pub fn render(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&self.to_json()).expect("json values always serialize");
        s.push('\n');
        s
    }
}

pub fn write_report<W: Write>(doc: &ReportDocument, mut w: W) -> Result<()> {
    w.write_all(doc.render().as_bytes())
        .map_err(|source| Error::Io {
            path: "<report>".into(),
            source,
        })
}

pub fn save_report(doc: &ReportDocument, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::create(path).map_err(io)?;
    file.write_all(doc.render().as_bytes()).map_err(io)
}

/// 17 significant digits: enough to recover the exact f64.
pub fn full_precision(v: f64) -> Value {
    debug_assert!(v.is_finite());
    let text = format!("{v:.16e}");
    Value::Number(
        text.parse::<Number>()
            .expect("formatted float is valid json"),
    )
}

/// Four significant digits, scientific outside [1e-4, 1e6).
pub fn display(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e6).contains(&a) {
        let decimals = (3 - a.log10().floor() as i32).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.3e}")
    }
}

fn tagged(tag: &str, reason: &str) -> Value {
    let mut m = Map::new();
    m.insert("value".into(), Value::Null);
    m.insert("tag".into(), tag.into());
    m.insert("reason".into(), reason.into());
    Value::Object(m)
}

pub fn real(v: f64) -> Value {
    if v.is_nan() {
        return tagged("undefined", "not a number");
    }
    if v.is_infinite() {
        return tagged("infinite", if v > 0.0 { "+inf" } else { "-inf" });
    }
    let mut m = Map::new();
    m.insert("value".into(), full_precision(v));
    m.insert("display".into(), display(v).into());
    Value::Object(m)
}

fn percent(v: f64) -> Value {
    let mut out = real(v);
    if let (Value::Object(m), true) = (&mut out, v.is_finite()) {
        m.insert("display".into(), format!("{}%", display(100.0 * v)).into());
    }
    out
}

pub fn estimate(e: Estimate) -> Value {
    match e {
        Estimate::Value(v) => real(v),
        Estimate::Undefined(u) => tagged("undefined", u.reason()),
    }
}

fn entries(schema: &Schema, key: &str, list: &[Entry], fmt: fn(Estimate) -> Value) -> Value {
    Value::Array(
        list.iter()
            .map(|e| {
                let mut m = Map::new();
                m.insert(key.into(), schema.describe(&e.key).into());
                m.insert("value".into(), fmt(e.value));
                Value::Object(m)
            })
            .collect(),
    )
}

fn stratified(schema: &Schema, list: &[StratifiedEntry], fmt: fn(Estimate) -> Value) -> Value {
    Value::Array(
        list.iter()
            .map(|e| {
                let mut m = Map::new();
                m.insert("group".into(), schema.describe(&e.group).into());
                m.insert("profile".into(), schema.describe(&e.profile).into());
                m.insert("value".into(), fmt(e.value));
                Value::Object(m)
            })
            .collect(),
    )
}

fn estimate_percent(e: Estimate) -> Value {
    match e {
        Estimate::Value(v) => percent(v),
        other => estimate(other),
    }
}

fn input_digest(source: &str, t: &JointTable) -> Value {
    let schema = t.schema();
    let support = t.support();
    let mut vars = Vec::new();
    let mut support_map = Map::new();
    for (i, v) in schema.variables().iter().enumerate() {
        let mut m = Map::new();
        m.insert("name".into(), v.name().into());
        m.insert("role".into(), v.role().as_str().into());
        m.insert(
            "levels".into(),
            v.levels().iter().map(|l| Value::from(l.as_str())).collect(),
        );
        vars.push(Value::Object(m));
        support_map.insert(
            v.name().into(),
            support
                .levels(i)
                .iter()
                .map(|&l| Value::from(v.level(l)))
                .collect(),
        );
    }
    let mut m = Map::new();
    m.insert("source".into(), source.into());
    m.insert("n".into(), real(t.total()));
    m.insert("cells".into(), schema.n_cells().into());
    m.insert(
        "observed_cells".into(),
        t.weights().iter().filter(|w| **w > 0.0).count().into(),
    );
    m.insert("schema".into(), Value::Array(vars));
    m.insert("support".into(), Value::Object(support_map));
    Value::Object(m)
}

fn projection(r: &ProjectionResult, settings: &Settings) -> Value {
    let schema = r.q.schema();
    let mut m = Map::new();
    m.insert("kind".into(), r.kind.as_str().into());
    m.insert("converged".into(), r.converged.into());
    m.insert("iterations".into(), r.iterations.into());
    m.insert("tolerance".into(), real(settings.tolerance));
    m.insert("max_iterations".into(), settings.max_iterations.into());
    m.insert("divergence".into(), real(r.divergence));
    m.insert(
        "residuals".into(),
        r.constraint_labels
            .iter()
            .zip(&r.residuals)
            .map(|(label, res)| {
                let mut c = Map::new();
                c.insert("constraint".into(), label.as_str().into());
                c.insert("max_abs_deviation".into(), real(*res));
                Value::Object(c)
            })
            .collect(),
    );
    m.insert(
        "q".into(),
        r.q.weights()
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let mut c = Map::new();
                c.insert("cell".into(), schema.describe_cell(i).into());
                c.insert("probability".into(), real(*w));
                Value::Object(c)
            })
            .collect(),
    );
    Value::Object(m)
}

fn effect_report(schema: &Schema, r: &EffectReport) -> Value {
    let mut m = Map::new();
    m.insert(
        "provenance".into(),
        match r.provenance {
            Provenance::Empirical => "empirical",
            Provenance::Hypothetical => "hypothetical",
        }
        .into(),
    );
    m.insert("event".into(), r.event.label(schema).into());
    m.insert("reference".into(), schema.describe(&r.reference).into());
    m.insert("odds".into(), entries(schema, "group", &r.odds, estimate));
    m.insert(
        "intervention_or".into(),
        entries(schema, "group", &r.intervention_or, estimate),
    );
    m.insert(
        "relative_risk".into(),
        entries(schema, "group", &r.relative_risk, estimate),
    );
    m.insert(
        "arr".into(),
        entries(schema, "group", &r.arr, estimate_percent),
    );
    m.insert(
        "stratified_or".into(),
        stratified(schema, &r.stratified_or, estimate),
    );
    m.insert(
        "stratified_arr".into(),
        stratified(schema, &r.stratified_arr, estimate_percent),
    );
    m.insert(
        "mantel_haenszel_or".into(),
        entries(schema, "group", &r.mantel_haenszel_or, estimate),
    );
    m.insert(
        "heterogeneity".into(),
        stratified(schema, &r.heterogeneity, estimate),
    );
    m.insert("p_values".into(), p_values(&r.p_values));
    Value::Object(m)
}

fn p_values(p: &PValues) -> Value {
    let mut m = Map::new();
    match p {
        PValues::Computed(tests) => {
            m.insert("status".into(), "computed".into());
            let mut t = Map::new();
            for (name, v) in tests {
                t.insert(name.clone(), real(*v));
            }
            m.insert("tests".into(), Value::Object(t));
        }
        PValues::Refused(reason) => {
            m.insert("status".into(), "refused".into());
            m.insert("reason".into(), (*reason).into());
        }
        PValues::Unavailable(reason) => {
            m.insert("status".into(), "unavailable".into());
            m.insert("reason".into(), (*reason).into());
        }
    }
    Value::Object(m)
}

fn stats(s: &Stats) -> Value {
    let mut m = Map::new();
    m.insert("count".into(), s.count.into());
    for (k, v) in [
        ("min", s.min),
        ("q1", s.q1),
        ("median", s.median),
        ("q3", s.q3),
        ("max", s.max),
        ("mean", s.mean),
        ("sd", s.sd),
        ("standard_error", s.standard_error()),
        ("lower_fence", s.lower_fence),
        ("upper_fence", s.upper_fence),
    ] {
        m.insert(k.into(), real(v));
    }
    Value::Object(m)
}

fn metric(s: &MetricSummary) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), s.name.as_str().into());
    m.insert("undefined".into(), s.undefined.into());
    m.insert("stats".into(), s.stats.as_ref().map_or(Value::Null, stats));
    Value::Object(m)
}

fn fluctuation(f: &FluctuationSummary) -> Value {
    let mut m = Map::new();
    m.insert("n_subjects".into(), f.n_subjects.into());
    m.insert("n_replicates".into(), f.n_replicates.into());
    m.insert("seed".into(), f.seed.into());
    m.insert("metrics".into(), f.metrics.iter().map(metric).collect());
    Value::Object(m)
}

/// Looks up `value` of the entry whose group describes as `group` in a
/// rendered effect list.
pub fn lookup_entry<'a>(list: &'a Value, group: &str) -> Option<&'a Value> {
    list.as_array()?
        .iter()
        .find(|e| e.get("group").and_then(Value::as_str) == Some(group))
        .and_then(|e| e.get("value"))
}

/// Reads back the full-precision number of a rendered real.
pub fn value_of(v: &Value) -> Option<f64> {
    v.get("value")?.as_f64()
}
