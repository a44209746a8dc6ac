//! Effect sizes and heterogeneity metrics on study tables.
//!
//! Every quantity is a ratio of slice masses, so the functions accept count
//! tables and distributions alike and are invariant to rescaling the table.
//! Ratios that divide by zero come back as [`Estimate::Undefined`] instead of
//! NaN or infinity.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::projection::StudyLayout;
use crate::stats::{chi_square_independence, fisher_exact_2x2};
use crate::table::{is_whole, Assignment, JointTable, Schema, TableKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Estimate {
    Value(f64),
    Undefined(Undefined),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Undefined {
    /// The conditioning slice has no mass.
    EmptyCondition,
    /// Every subject in the slice had the event, so the odds are infinite.
    CertainEvent,
    /// The ratio's denominator is zero.
    ZeroDenominator,
}

impl Undefined {
    pub fn reason(self) -> &'static str {
        match self {
            Undefined::EmptyCondition => "conditioning slice has zero mass",
            Undefined::CertainEvent => "event probability is one, odds are infinite",
            Undefined::ZeroDenominator => "denominator is zero",
        }
    }
}

impl Estimate {
    pub fn value(self) -> Option<f64> {
        match self {
            Estimate::Value(v) => Some(v),
            Estimate::Undefined(_) => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Estimate::Value(_))
    }

    pub fn ratio(self, denominator: Estimate) -> Estimate {
        match (self, denominator) {
            (Estimate::Undefined(u), _) | (_, Estimate::Undefined(u)) => Estimate::Undefined(u),
            (Estimate::Value(_), Estimate::Value(0.0)) => {
                Estimate::Undefined(Undefined::ZeroDenominator)
            }
            (Estimate::Value(n), Estimate::Value(d)) => Estimate::Value(n / d),
        }
    }
}

/// An outcome level designated as the event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub var: usize,
    pub level: usize,
}

impl Event {
    /// Resolves a level label of the outcome variable.
    pub fn parse(schema: &Schema, label: &str) -> Result<Self> {
        let var = schema.outcome()?;
        Ok(Self {
            var,
            level: schema.level_index(var, label)?,
        })
    }

    /// The other outcome level, when the outcome is binary.
    pub fn complement(self, schema: &Schema) -> Option<Event> {
        (schema.variable(self.var).len() == 2).then_some(Event {
            var: self.var,
            level: 1 - self.level,
        })
    }

    pub fn label(self, schema: &Schema) -> String {
        schema.variable(self.var).level(self.level).into()
    }
}

/// Event and non-event mass of a slice.
fn split_mass(t: &JointTable, event: Event, given: &Assignment) -> (f64, f64) {
    let schema = t.schema();
    let mut levels = alloc::vec![0usize; schema.len()];
    let (mut hit, mut miss) = (0.0, 0.0);
    for (i, w) in t.weights().iter().enumerate() {
        schema.decode_into(i, &mut levels);
        if given.matches(&levels) {
            if levels[event.var] == event.level {
                hit += w;
            } else {
                miss += w;
            }
        }
    }
    (hit, miss)
}

/// `P(event | given)`, or `None` when the slice is empty.
pub fn conditional_probability(t: &JointTable, event: Event, given: &Assignment) -> Option<f64> {
    let (hit, miss) = split_mass(t, event, given);
    let mass = hit + miss;
    (mass > 0.0).then(|| hit / mass)
}

/// `p / (1 - p)` with `p = P(event | given)`; the non-event side aggregates
/// every other outcome level.
pub fn odds(t: &JointTable, event: Event, given: &Assignment) -> Estimate {
    let (hit, miss) = split_mass(t, event, given);
    if hit + miss <= 0.0 {
        Estimate::Undefined(Undefined::EmptyCondition)
    } else if miss <= 0.0 {
        Estimate::Undefined(Undefined::CertainEvent)
    } else {
        Estimate::Value(hit / miss)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: Assignment,
    pub value: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StratifiedEntry {
    pub group: Assignment,
    pub profile: Assignment,
    pub value: Estimate,
}

fn check_group(layout: &StudyLayout, schema: &Schema, group: &Assignment) -> Result<()> {
    if group.vars() != layout.x {
        return Err(Error::InvalidSchema(format!(
            "group `{}` must fix every independent variable and nothing else",
            schema.describe(group)
        )));
    }
    Ok(())
}

fn check_profile(layout: &StudyLayout, schema: &Schema, profile: &Assignment) -> Result<()> {
    if profile.vars() != layout.s {
        return Err(Error::InvalidSchema(format!(
            "profile `{}` must fix every confounder and nothing else",
            schema.describe(profile)
        )));
    }
    Ok(())
}

/// Groups (independent-variable profiles) with positive mass, in index order.
pub fn observed_groups(t: &JointTable) -> Result<Vec<Assignment>> {
    let layout = StudyLayout::of(t)?;
    observed_profiles(t, &layout.x)
}

/// Confounder profiles with positive mass, in index order.
pub fn observed_confounder_profiles(t: &JointTable) -> Result<Vec<Assignment>> {
    let layout = StudyLayout::of(t)?;
    observed_profiles(t, &layout.s)
}

fn observed_profiles(t: &JointTable, vars: &crate::table::VarSet) -> Result<Vec<Assignment>> {
    let m = t.marginal(vars)?;
    Ok(t.schema()
        .profiles(vars)
        .into_iter()
        .zip(m.weights())
        .filter(|(_, w)| **w > 0.0)
        .map(|(a, _)| a)
        .collect())
}

/// Odds ratio of every observed group against `reference`; the reference
/// maps to exactly 1.
pub fn intervention_or(t: &JointTable, event: Event, reference: &Assignment) -> Result<Vec<Entry>> {
    let layout = StudyLayout::of(t)?;
    check_group(&layout, t.schema(), reference)?;
    let reference_odds = match odds(t, event, reference) {
        Estimate::Value(v) if v > 0.0 => v,
        _ => {
            return Err(Error::UndefinedReferenceOdds(
                t.schema().describe(reference),
            ));
        }
    };
    Ok(observed_groups(t)?
        .into_iter()
        .map(|group| {
            let value = if &group == reference {
                Estimate::Value(1.0)
            } else {
                odds(t, event, &group).ratio(Estimate::Value(reference_odds))
            };
            Entry { key: group, value }
        })
        .collect())
}

/// Odds ratio of `group` against `reference` within confounder profile `profile`.
pub fn stratified_or(
    t: &JointTable,
    event: Event,
    group: &Assignment,
    reference: &Assignment,
    profile: &Assignment,
) -> Estimate {
    odds(t, event, &group.merged(profile)).ratio(odds(t, event, &reference.merged(profile)))
}

/// Absolute risk reduction `P(bad | reference, s) - P(bad | group, s)`; the
/// marginal version leaves `profile` out.
pub fn arr(
    t: &JointTable,
    bad: Event,
    group: &Assignment,
    reference: &Assignment,
    profile: Option<&Assignment>,
) -> Result<f64> {
    let slice = |g: &Assignment| match profile {
        Some(s) => g.merged(s),
        None => g.clone(),
    };
    let risk = |g: &Assignment| {
        let s = slice(g);
        conditional_probability(t, bad, &s)
            .ok_or_else(|| Error::UndefinedConditional(t.schema().describe(&s)))
    };
    Ok(risk(reference)? - risk(group)?)
}

/// `P(event | group) / P(event | reference)`.
pub fn relative_risk(
    t: &JointTable,
    event: Event,
    group: &Assignment,
    reference: &Assignment,
) -> Estimate {
    let p = |g| match conditional_probability(t, event, g) {
        Some(p) => Estimate::Value(p),
        None => Estimate::Undefined(Undefined::EmptyCondition),
    };
    p(group).ratio(p(reference))
}

/// Event by exposure counts within one stratum: `a`, `b` are event and
/// non-event among the exposed, `c`, `d` among the unexposed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StratumTable2x2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl StratumTable2x2 {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if [a, b, c, d].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidWeights(format!(
                "2x2 entries must be nonnegative, got [{a}, {b}, {c}, {d}]"
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn n(&self) -> f64 {
        self.a + self.b + self.c + self.d
    }

    pub fn odds_ratio(&self) -> Estimate {
        Estimate::Value(self.a * self.d).ratio(Estimate::Value(self.b * self.c))
    }
}

/// `group` vs `reference` collapsed over every confounder.
pub fn collapsed_2x2(
    t: &JointTable,
    event: Event,
    group: &Assignment,
    reference: &Assignment,
) -> StratumTable2x2 {
    stratum_2x2(t, event, group, reference, &Assignment::empty())
}

fn stratum_2x2(
    t: &JointTable,
    event: Event,
    group: &Assignment,
    reference: &Assignment,
    profile: &Assignment,
) -> StratumTable2x2 {
    let (a, b) = split_mass(t, event, &group.merged(profile));
    let (c, d) = split_mass(t, event, &reference.merged(profile));
    StratumTable2x2 { a, b, c, d }
}

/// One 2x2 table per observed confounder profile.
pub fn strata_2x2(
    t: &JointTable,
    event: Event,
    group: &Assignment,
    reference: &Assignment,
) -> Result<Vec<StratumTable2x2>> {
    Ok(observed_confounder_profiles(t)?
        .iter()
        .map(|s| stratum_2x2(t, event, group, reference, s))
        .collect())
}

/// Pooled odds ratio `sum(a d / n) / sum(b c / n)` over strata.
pub fn mantel_haenszel_or(strata: &[StratumTable2x2]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for s in strata {
        let n = s.n();
        if n > 0.0 {
            num += s.a * s.d / n;
            den += s.b * s.c / n;
        }
    }
    if den <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// `f_{S|X}(s | group) / f_{S|X}(s | reference)` for every observed profile
/// `s`; identically one under structural parity.
pub fn heterogeneity_ratio(
    t: &JointTable,
    group: &Assignment,
    reference: &Assignment,
) -> Result<Vec<Entry>> {
    let layout = StudyLayout::of(t)?;
    check_group(&layout, t.schema(), group)?;
    check_group(&layout, t.schema(), reference)?;
    let mg = t.mass(group);
    let mr = t.mass(reference);
    for (g, m) in [(group, mg), (reference, mr)] {
        if m <= 0.0 {
            return Err(Error::UndefinedConditional(t.schema().describe(g)));
        }
    }
    Ok(observed_confounder_profiles(t)?
        .into_iter()
        .map(|s| {
            let num = Estimate::Value(t.mass(&group.merged(&s)) / mg);
            let den = Estimate::Value(t.mass(&reference.merged(&s)) / mr);
            Entry {
                value: num.ratio(den),
                key: s,
            }
        })
        .collect())
}

/// `f_{S|X}(s | group) / f_{S|X}(s0 | group)`: how unevenly two confounder
/// profiles are represented inside one group.
pub fn profile_ratio(
    t: &JointTable,
    group: &Assignment,
    profile: &Assignment,
    baseline: &Assignment,
) -> Result<Estimate> {
    let layout = StudyLayout::of(t)?;
    check_group(&layout, t.schema(), group)?;
    check_profile(&layout, t.schema(), profile)?;
    check_profile(&layout, t.schema(), baseline)?;
    if t.mass(group) <= 0.0 {
        return Err(Error::UndefinedConditional(t.schema().describe(group)));
    }
    Ok(Estimate::Value(t.mass(&group.merged(profile)))
        .ratio(Estimate::Value(t.mass(&group.merged(baseline)))))
}

/// Where the table came from; decides whether p-values may be quoted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Empirical,
    /// A projected, hypothetical table. Significance tests are refused: the
    /// table is an expectation, not an observed study.
    Hypothetical,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PValues {
    Computed(Vec<(String, f64)>),
    Refused(&'static str),
    Unavailable(&'static str),
}

pub const HYPOTHETICAL_P_VALUE_REFUSAL: &str =
    "p-values are not quoted for a hypothetical table: it removes confounding only in expectation";

#[derive(Clone, Debug, PartialEq)]
pub struct EffectReport {
    pub provenance: Provenance,
    pub event: Event,
    pub reference: Assignment,
    pub odds: Vec<Entry>,
    pub intervention_or: Vec<Entry>,
    pub relative_risk: Vec<Entry>,
    /// Marginal ARR per group against the reference, bad outcome = non-event.
    /// Empty for non-binary outcomes.
    pub arr: Vec<Entry>,
    pub stratified_or: Vec<StratifiedEntry>,
    pub stratified_arr: Vec<StratifiedEntry>,
    /// Pooled over confounder profiles, per non-reference group.
    pub mantel_haenszel_or: Vec<Entry>,
    pub heterogeneity: Vec<StratifiedEntry>,
    pub p_values: PValues,
}

impl EffectReport {
    pub fn compute(
        t: &JointTable,
        event: Event,
        reference: &Assignment,
        provenance: Provenance,
    ) -> Result<Self> {
        let schema = t.schema();
        let groups = observed_groups(t)?;
        let profiles = observed_confounder_profiles(t)?;
        let intervention = intervention_or(t, event, reference)?;
        let others: Vec<&Assignment> = groups.iter().filter(|g| *g != reference).collect();
        let bad = event.complement(schema);

        let odds_entries = groups
            .iter()
            .map(|g| Entry {
                key: g.clone(),
                value: odds(t, event, g),
            })
            .collect();
        let rr = groups
            .iter()
            .map(|g| Entry {
                key: g.clone(),
                value: relative_risk(t, event, g, reference),
            })
            .collect();
        let arr_estimate = |g: &Assignment, s: Option<&Assignment>| match bad {
            Some(bad) => match arr(t, bad, g, reference, s) {
                Ok(v) => Estimate::Value(v),
                Err(_) => Estimate::Undefined(Undefined::EmptyCondition),
            },
            None => Estimate::Undefined(Undefined::EmptyCondition),
        };
        let arr_entries = if bad.is_some() {
            others
                .iter()
                .map(|g| Entry {
                    key: (*g).clone(),
                    value: arr_estimate(g, None),
                })
                .collect()
        } else {
            Vec::new()
        };

        let mut stratified = Vec::new();
        let mut stratified_arr = Vec::new();
        for g in &others {
            for s in &profiles {
                stratified.push(StratifiedEntry {
                    group: (*g).clone(),
                    profile: s.clone(),
                    value: stratified_or(t, event, g, reference, s),
                });
                if bad.is_some() {
                    stratified_arr.push(StratifiedEntry {
                        group: (*g).clone(),
                        profile: s.clone(),
                        value: arr_estimate(g, Some(s)),
                    });
                }
            }
        }

        let mut mh = Vec::new();
        let mut heterogeneity = Vec::new();
        for g in &others {
            let strata = strata_2x2(t, event, g, reference)?;
            mh.push(Entry {
                key: (*g).clone(),
                value: match mantel_haenszel_or(&strata) {
                    Ok(v) => Estimate::Value(v),
                    Err(_) => Estimate::Undefined(Undefined::ZeroDenominator),
                },
            });
            for e in heterogeneity_ratio(t, g, reference)? {
                heterogeneity.push(StratifiedEntry {
                    group: (*g).clone(),
                    profile: e.key,
                    value: e.value,
                });
            }
        }

        let p_values = match provenance {
            Provenance::Hypothetical => PValues::Refused(HYPOTHETICAL_P_VALUE_REFUSAL),
            Provenance::Empirical => empirical_p_values(t, event, reference, &others)?,
        };

        Ok(Self {
            provenance,
            event,
            reference: reference.clone(),
            odds: odds_entries,
            intervention_or: intervention,
            relative_risk: rr,
            arr: arr_entries,
            stratified_or: stratified,
            stratified_arr,
            mantel_haenszel_or: mh,
            heterogeneity,
            p_values,
        })
    }
}

fn empirical_p_values(
    t: &JointTable,
    event: Event,
    reference: &Assignment,
    others: &[&Assignment],
) -> Result<PValues> {
    if t.kind() != TableKind::Counts || !t.weights().iter().all(|w| is_whole(*w)) {
        return Ok(PValues::Unavailable(
            "significance tests need an integer count table",
        ));
    }
    let schema = t.schema();
    let layout = StudyLayout::of(t)?;
    let mut out = Vec::new();
    for g in others {
        let table = collapsed_2x2(t, event, g, reference);
        let p = fisher_exact_2x2(&table)?;
        out.push((
            format!(
                "fisher exact: {} vs {}",
                schema.describe(g),
                schema.describe(reference)
            ),
            p,
        ));
    }
    for (name, rows, cols) in [
        ("chi-square: confounders x groups", &layout.s, &layout.x),
        ("chi-square: confounders x outcome", &layout.s, &layout.y),
    ] {
        if let Ok(test) = chi_square_independence(t, rows, cols) {
            out.push((name.into(), test.p_value));
        }
    }
    Ok(PValues::Computed(out))
}
