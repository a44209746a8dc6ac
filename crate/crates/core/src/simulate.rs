//! Replicate studies drawn from a fitted distribution.
//!
//! Studies are multinomial draws made by the conditional-binomial method over
//! cells in index order. Randomness comes from ChaCha8: replicate `r` of a run
//! seeded with `seed` reads stream `r` of the generator keyed by `seed`, so
//! results do not depend on how replicates are scheduled.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::effects::{observed_confounder_profiles, observed_groups, Event};
use crate::error::{Error, Result};
use crate::projection::StudyLayout;
use crate::table::{Assignment, JointTable, Schema, TableKind};

/// Generator for replicate `replicate` of a run keyed by `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Draws one study of `n` subjects; equal to replicate 0 of a run keyed by `seed`.
pub fn sample_study(q: &JointTable, n: u64, seed: u64) -> Result<JointTable> {
    let sampler = Sampler::new(q)?;
    if n == 0 {
        return Err(Error::InvalidConfig("study size must be at least 1".into()));
    }
    let mut counts = vec![0u64; q.weights().len()];
    sampler.draw(n, &mut replicate_rng(seed, 0), &mut counts);
    JointTable::from_weights(
        q.schema().clone(),
        counts.iter().map(|&c| c as f64).collect(),
        TableKind::Counts,
    )
}

struct Sampler<'a> {
    probs: &'a [f64],
    /// Mass of cells `i..` so the last positive cell is drawn with probability one.
    tail: Vec<f64>,
}

impl<'a> Sampler<'a> {
    fn new(q: &'a JointTable) -> Result<Self> {
        if !q.is_distribution() {
            return Err(Error::NotADistribution);
        }
        let probs = q.weights();
        let mut tail = vec![0.0; probs.len() + 1];
        for i in (0..probs.len()).rev() {
            tail[i] = tail[i + 1] + probs[i];
        }
        Ok(Self { probs, tail })
    }

    fn draw<R: Rng + ?Sized>(&self, n: u64, rng: &mut R, counts: &mut [u64]) {
        let mut remaining = n;
        for (i, slot) in counts.iter_mut().enumerate() {
            *slot = 0;
            let w = self.probs[i];
            if remaining == 0 || w <= 0.0 {
                continue;
            }
            let p = w / self.tail[i];
            let k = if p >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, p)
                    .expect("probability in [0, 1)")
                    .sample(rng)
            };
            *slot = k;
            remaining -= k;
        }
    }
}

/// A statistic evaluated on every replicate study.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    /// `P(target | given)` in the replicate; `given` may be empty for a joint
    /// frequency.
    Conditional {
        name: String,
        target: Assignment,
        given: Assignment,
    },
    /// Odds ratio of the event between `group` and `reference`.
    InterventionOr {
        name: String,
        event: Event,
        group: Assignment,
        reference: Assignment,
    },
}

impl Metric {
    pub fn name(&self) -> &str {
        match self {
            Metric::Conditional { name, .. } | Metric::InterventionOr { name, .. } => name,
        }
    }

    /// `q_{S|X}(s | x)` for every observed group and confounder profile.
    pub fn parity_suite(q: &JointTable) -> Result<Vec<Metric>> {
        let schema = q.schema();
        let mut out = Vec::new();
        for x in observed_groups(q)? {
            for s in observed_confounder_profiles(q)? {
                out.push(Metric::Conditional {
                    name: format!("parity: {} | {}", schema.describe(&s), schema.describe(&x)),
                    target: s,
                    given: x.clone(),
                });
            }
        }
        Ok(out)
    }

    /// Joint outcome-confounder frequencies `q_{Y,S}(y, s)`.
    pub fn realism_suite(q: &JointTable) -> Result<Vec<Metric>> {
        let schema = q.schema();
        let layout = StudyLayout::of(q)?;
        let y = layout.y.as_slice()[0];
        let mut out = Vec::new();
        for level in 0..schema.variable(y).len() {
            for s in observed_confounder_profiles(q)? {
                let target = s.merged(&Assignment::new(vec![(y, level)]));
                out.push(Metric::Conditional {
                    name: format!("realism: {}", schema.describe(&target)),
                    target,
                    given: Assignment::empty(),
                });
            }
        }
        Ok(out)
    }

    /// Intervention odds ratio of every other observed group against `reference`.
    pub fn intervention_suite(
        q: &JointTable,
        event: Event,
        reference: &Assignment,
    ) -> Result<Vec<Metric>> {
        let schema = q.schema();
        Ok(observed_groups(q)?
            .into_iter()
            .filter(|g| g != reference)
            .map(|g| Metric::InterventionOr {
                name: format!(
                    "intervention OR: {} vs {}",
                    schema.describe(&g),
                    schema.describe(reference)
                ),
                event,
                group: g,
                reference: reference.clone(),
            })
            .collect())
    }
}

/// Ratio-of-sums form of a metric over cell index lists.
enum Compiled {
    Ratio {
        num: Vec<usize>,
        den: Option<Vec<usize>>,
    },
    OddsRatio {
        hit: Vec<usize>,
        miss: Vec<usize>,
        ref_hit: Vec<usize>,
        ref_miss: Vec<usize>,
    },
}

fn cells_matching(schema: &Schema, slice: &Assignment) -> Vec<usize> {
    let mut levels = vec![0usize; schema.len()];
    (0..schema.n_cells())
        .filter(|&i| {
            schema.decode_into(i, &mut levels);
            slice.matches(&levels)
        })
        .collect()
}

impl Compiled {
    fn new(schema: &Schema, metric: &Metric) -> Self {
        match metric {
            Metric::Conditional { target, given, .. } => Compiled::Ratio {
                num: cells_matching(schema, &target.merged(given)),
                den: (!given.is_empty()).then(|| cells_matching(schema, given)),
            },
            Metric::InterventionOr {
                event,
                group,
                reference,
                ..
            } => {
                let split = |g: &Assignment| {
                    let cells = cells_matching(schema, g);
                    let mut levels = vec![0usize; schema.len()];
                    cells.into_iter().partition(|&i| {
                        schema.decode_into(i, &mut levels);
                        levels[event.var] == event.level
                    })
                };
                let (hit, miss) = split(group);
                let (ref_hit, ref_miss) = split(reference);
                Compiled::OddsRatio {
                    hit,
                    miss,
                    ref_hit,
                    ref_miss,
                }
            }
        }
    }

    fn eval(&self, counts: &[u64], n: u64) -> Option<f64> {
        let sum = |cells: &[usize]| cells.iter().map(|&i| counts[i]).sum::<u64>() as f64;
        match self {
            Compiled::Ratio { num, den } => {
                let d = den.as_ref().map_or(n as f64, |c| sum(c));
                (d > 0.0).then(|| sum(num) / d)
            }
            Compiled::OddsRatio {
                hit,
                miss,
                ref_hit,
                ref_miss,
            } => {
                let (a, b, c, d) = (sum(hit), sum(miss), sum(ref_hit), sum(ref_miss));
                (b > 0.0 && c > 0.0 && d > 0.0).then(|| (a / b) / (c / d))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateConfig {
    pub n_subjects: u64,
    pub n_replicates: usize,
    pub seed: u64,
    pub metrics: Vec<Metric>,
}

impl ReplicateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::InvalidConfig("n_subjects must be at least 1".into()));
        }
        if self.n_replicates == 0 {
            return Err(Error::InvalidConfig(
                "n_replicates must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Box-plot statistics over the defined replicate values of one metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub sd: f64,
    /// `q1 - 1.5 IQR`.
    pub lower_fence: f64,
    /// `q3 + 1.5 IQR`.
    pub upper_fence: f64,
}

impl Stats {
    /// Quantiles interpolate linearly between order statistics.
    pub fn from_values(values: &mut [f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_unstable_by(f64::total_cmp);
        let n = values.len();
        let quantile = |p: f64| {
            let h = (n - 1) as f64 * p;
            let lo = h as usize;
            let hi = (lo + 1).min(n - 1);
            values[lo] + (h - lo as f64) * (values[hi] - values[lo])
        };
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
        } else {
            0.0
        };
        let (q1, median, q3) = (quantile(0.25), quantile(0.5), quantile(0.75));
        let iqr = q3 - q1;
        Some(Self {
            count: n,
            min: values[0],
            q1,
            median,
            q3,
            max: values[n - 1],
            mean,
            sd,
            lower_fence: q1 - 1.5 * iqr,
            upper_fence: q3 + 1.5 * iqr,
        })
    }

    /// Monte-Carlo standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        self.sd / libm::sqrt(self.count as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSummary {
    pub name: String,
    /// `None` when every replicate was undefined.
    pub stats: Option<Stats>,
    pub undefined: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationSummary {
    pub n_subjects: u64,
    pub n_replicates: usize,
    pub seed: u64,
    pub metrics: Vec<MetricSummary>,
}

impl FluctuationSummary {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

pub fn replicate_metrics(q: &JointTable, cfg: &ReplicateConfig) -> Result<FluctuationSummary> {
    cfg.validate()?;
    let sampler = Sampler::new(q)?;
    let compiled: Vec<Compiled> = cfg
        .metrics
        .iter()
        .map(|m| Compiled::new(q.schema(), m))
        .collect();
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.n_replicates); compiled.len()];
    let mut undefined = vec![0usize; compiled.len()];
    let mut counts = vec![0u64; q.weights().len()];
    for r in 0..cfg.n_replicates {
        sampler.draw(
            cfg.n_subjects,
            &mut replicate_rng(cfg.seed, r as u64),
            &mut counts,
        );
        for (k, metric) in compiled.iter().enumerate() {
            match metric.eval(&counts, cfg.n_subjects) {
                Some(v) => values[k].push(v),
                None => undefined[k] += 1,
            }
        }
    }
    let metrics = cfg
        .metrics
        .iter()
        .zip(values.iter_mut())
        .zip(undefined)
        .map(|((m, vals), undefined)| MetricSummary {
            name: m.name().into(),
            stats: Stats::from_values(vals),
            undefined,
        })
        .collect();
    Ok(FluctuationSummary {
        n_subjects: cfg.n_subjects,
        n_replicates: cfg.n_replicates,
        seed: cfg.seed,
        metrics,
    })
}

/// Per-cell agreement of the mean replicate frequency with `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectationCheck {
    pub mean_frequency: Vec<f64>,
    /// `(mean frequency - q) / sqrt(q (1 - q) / (n R))`; zero on cells where
    /// `q` is zero or one, which the sampler reproduces exactly.
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
    /// Share of cells with positive probability and `|z| < 3`.
    pub fraction_within_3: f64,
}

pub fn expectation_check(q: &JointTable, cfg: &ReplicateConfig) -> Result<ExpectationCheck> {
    cfg.validate()?;
    let sampler = Sampler::new(q)?;
    let cells = q.weights().len();
    let mut totals = vec![0u64; cells];
    let mut counts = vec![0u64; cells];
    for r in 0..cfg.n_replicates {
        sampler.draw(
            cfg.n_subjects,
            &mut replicate_rng(cfg.seed, r as u64),
            &mut counts,
        );
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
    }
    let draws = cfg.n_subjects as f64 * cfg.n_replicates as f64;
    let mean_frequency: Vec<f64> = totals.iter().map(|&t| t as f64 / draws).collect();
    let mut z_scores = Vec::with_capacity(cells);
    let (mut within, mut positive) = (0usize, 0usize);
    for (&p, &m) in q.weights().iter().zip(&mean_frequency) {
        let se = libm::sqrt(p * (1.0 - p) / draws);
        let z = if se > 0.0 { (m - p) / se } else { 0.0 };
        if p > 0.0 {
            positive += 1;
            if z.abs() < 3.0 {
                within += 1;
            }
        }
        z_scores.push(z);
    }
    let max_abs_z = z_scores.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    Ok(ExpectationCheck {
        mean_frequency,
        z_scores,
        max_abs_z,
        fraction_within_3: if positive > 0 {
            within as f64 / positive as f64
        } else {
            1.0
        },
    })
}
