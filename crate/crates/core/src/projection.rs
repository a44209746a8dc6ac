//! I-projections onto sets of marginal constraints via iterative
//! proportional fitting.
//!
//! Each IPF cycle visits the constraints in order and rescales the working
//! table so that the visited marginal matches its target exactly. Started from
//! `f`, the fixed point is the distribution closest to `f` in I-divergence
//! among all distributions matching every target.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::table::{Conditional, JointTable, Role, Schema, TableKind, VarSet};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

/// Cycles over which the residual must shrink by at least
/// [`STAGNATION_MIN_DECREASE`] (relative) before the set is declared infeasible.
const STAGNATION_WINDOW: usize = 50;
const STAGNATION_MIN_DECREASE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalConstraint {
    vars: VarSet,
    target: JointTable,
    label: String,
}

impl MarginalConstraint {
    /// `target` must be a distribution over the sub-schema spanned by `vars`.
    pub fn new(vars: VarSet, target: JointTable) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::EmptySubset);
        }
        if !target.is_distribution() {
            return Err(Error::NotADistribution);
        }
        if target.schema().len() != vars.len() {
            return Err(Error::SchemaMismatch);
        }
        let names: Vec<&str> = target
            .schema()
            .variables()
            .iter()
            .map(|v| v.name())
            .collect();
        let label = format!("marginal({})", names.join(", "));
        Ok(Self {
            vars,
            target,
            label,
        })
    }

    /// The marginal of `f` over `vars`, normalized: the constraint `f` itself
    /// already satisfies.
    pub fn observed(f: &JointTable, vars: &VarSet) -> Result<Self> {
        Self::new(vars.clone(), f.marginal(vars)?.normalize()?)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn target(&self) -> &JointTable {
        &self.target
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionSpec {
    constraints: Vec<MarginalConstraint>,
    tolerance: f64,
    max_iterations: usize,
}

impl ProjectionSpec {
    pub fn new(constraints: Vec<MarginalConstraint>) -> Self {
        Self {
            constraints,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_settings(mut self, settings: Settings) -> Result<Self> {
        settings.validate()?;
        self.tolerance = settings.tolerance;
        self.max_iterations = settings.max_iterations;
        Ok(self)
    }

    pub fn constraints(&self) -> &[MarginalConstraint] {
        &self.constraints
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }
}

/// Stopping rule shared by every projection preset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settings {
    /// Largest allowed absolute deviation of any constrained marginal cell.
    pub tolerance: f64,
    /// Upper bound on full IPF cycles.
    pub max_iterations: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidSpec(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProjectionKind {
    /// Structural parity plus confounder realism.
    Pr,
    /// Structural parity plus the outcome prevalence.
    ParityOnly,
    /// Maximum-entropy table matching all three pairwise marginals.
    Logit,
    /// Caller-supplied constraint list.
    Custom,
}

impl ProjectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionKind::Pr => "pr",
            ProjectionKind::ParityOnly => "parity-only",
            ProjectionKind::Logit => "logit",
            ProjectionKind::Custom => "custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    pub kind: ProjectionKind,
    /// The fitted distribution.
    pub q: JointTable,
    /// Full IPF cycles performed (0 when the start already satisfied every constraint).
    pub iterations: usize,
    /// Max absolute marginal deviation per constraint, in constraint order.
    pub residuals: Vec<f64>,
    /// Constraint labels, parallel to `residuals`.
    pub constraint_labels: Vec<String>,
    /// I-divergence of `q` from the empirical table, in nats. Infinite when
    /// `q` puts mass where the empirical table has none (possible for logit).
    pub divergence: f64,
    pub converged: bool,
}

impl ProjectionResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// `D(p || f) = sum p ln(p / f)` in nats, with `0 ln(0 / .) = 0`.
pub fn kl_divergence(p: &JointTable, f: &JointTable) -> Result<f64> {
    if p.schema() != f.schema() {
        return Err(Error::SchemaMismatch);
    }
    if !p.is_distribution() || !f.is_distribution() {
        return Err(Error::NotADistribution);
    }
    let mut sum = 0.0;
    for (i, (&pc, &fc)) in p.weights().iter().zip(f.weights()).enumerate() {
        if pc == 0.0 {
            continue;
        }
        if fc == 0.0 {
            return Err(Error::SupportViolation(p.schema().describe_cell(i)));
        }
        sum += pc * libm::log(pc / fc);
    }
    // Rounding can push an exact zero slightly negative.
    Ok(sum.max(0.0))
}

/// I-projection of `f` onto the constraint set in `spec`.
pub fn ipf_fit(f: &JointTable, spec: &ProjectionSpec) -> Result<ProjectionResult> {
    if !f.is_distribution() {
        return Err(Error::NotADistribution);
    }
    let fitted = fit_from(f, spec)?;
    let divergence = kl_divergence(&fitted.q, f)?;
    Ok(fitted.into_result(ProjectionKind::Custom, divergence))
}

pub fn pr_projection(f: &JointTable) -> Result<ProjectionResult> {
    pr_projection_with(f, Settings::default())
}

pub fn pr_projection_with(f: &JointTable, settings: Settings) -> Result<ProjectionResult> {
    let layout = StudyLayout::of(f)?;
    layout.check_profiles_observed(f)?;
    let spec = ProjectionSpec::new(pr_constraints(f)?).with_settings(settings)?;
    let mut result = ipf_fit(f, &spec)?;
    result.kind = ProjectionKind::Pr;
    Ok(result)
}

pub fn parity_only_projection(f: &JointTable) -> Result<ProjectionResult> {
    parity_only_projection_with(f, Settings::default())
}

pub fn parity_only_projection_with(f: &JointTable, settings: Settings) -> Result<ProjectionResult> {
    let layout = StudyLayout::of(f)?;
    layout.check_profiles_observed(f)?;
    let constraints = vec![
        parity_constraint(f, &layout)?,
        MarginalConstraint::observed(f, &layout.y)?.with_label("outcome prevalence"),
    ];
    let spec = ProjectionSpec::new(constraints).with_settings(settings)?;
    let mut result = ipf_fit(f, &spec)?;
    result.kind = ProjectionKind::ParityOnly;
    Ok(result)
}

pub fn logit_projection(f: &JointTable) -> Result<ProjectionResult> {
    logit_projection_with(f, Settings::default())
}

/// I-projection of the uniform distribution onto the three observed pairwise
/// marginals (X,S), (Y,X), (Y,S). The reported divergence is still measured
/// from `f`.
pub fn logit_projection_with(f: &JointTable, settings: Settings) -> Result<ProjectionResult> {
    if !f.is_distribution() {
        return Err(Error::NotADistribution);
    }
    let layout = StudyLayout::of(f)?;
    let constraints = vec![
        MarginalConstraint::observed(f, &layout.x.union(&layout.s))?
            .with_label("observed structure (X, S)"),
        MarginalConstraint::observed(f, &layout.y.union(&layout.x))?
            .with_label("observed intervention (Y, X)"),
        MarginalConstraint::observed(f, &layout.y.union(&layout.s))?
            .with_label("confounder realism (Y, S)"),
    ];
    let spec = ProjectionSpec::new(constraints).with_settings(settings)?;
    let n = f.schema().n_cells();
    let uniform = JointTable::from_weights(
        f.schema().clone(),
        vec![1.0 / n as f64; n],
        TableKind::Distribution,
    )?;
    let fitted = fit_from(&uniform, &spec)?;
    let divergence = match kl_divergence(&fitted.q, f) {
        Ok(d) => d,
        Err(Error::SupportViolation(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(fitted.into_result(ProjectionKind::Logit, divergence))
}

/// Structural parity `(X,S) = f_X * f_S` followed by confounder realism
/// `(Y,S) = f_{Y,S}`.
pub fn pr_constraints(f: &JointTable) -> Result<Vec<MarginalConstraint>> {
    let layout = StudyLayout::of(f)?;
    Ok(vec![
        parity_constraint(f, &layout)?,
        MarginalConstraint::observed(f, &layout.y.union(&layout.s))?
            .with_label("confounder realism (Y, S)"),
    ])
}

/// The hypothetical outcome rates per group, `q_{Y|X}`. For a PR or
/// parity-only result the group masses equal the empirical ones.
pub fn hypothetical_conditional(result: &ProjectionResult) -> Result<Conditional> {
    let layout = StudyLayout::of(&result.q)?;
    result.q.conditional(&layout.y, &layout.x)
}

/// Variable sets of a study table by role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StudyLayout {
    pub y: VarSet,
    pub x: VarSet,
    pub s: VarSet,
}

impl StudyLayout {
    pub fn of(t: &JointTable) -> Result<Self> {
        Self::of_schema(t.schema())
    }

    pub fn of_schema(schema: &Schema) -> Result<Self> {
        let y = VarSet::new(vec![schema.outcome()?]);
        let x = schema.role_vars(Role::Independent);
        let s = schema.role_vars(Role::Confounder);
        if x.is_empty() {
            return Err(Error::MissingRole("independent"));
        }
        if s.is_empty() {
            return Err(Error::MissingRole("confounder"));
        }
        Ok(Self { y, x, s })
    }

    /// Every observed confounder profile must be observed in every observed
    /// group, otherwise no table on the observed support can reach parity.
    pub fn check_profiles_observed(&self, f: &JointTable) -> Result<()> {
        let schema = f.schema();
        let fx = f.marginal(&self.x)?;
        let fs = f.marginal(&self.s)?;
        let xs_vars = self.x.union(&self.s);
        let fxs = f.marginal(&xs_vars)?;
        let groups = schema.profiles(&self.x);
        let profiles = schema.profiles(&self.s);
        for (gi, group) in groups.iter().enumerate() {
            if fx.weights()[gi] <= 0.0 {
                continue;
            }
            for (si, profile) in profiles.iter().enumerate() {
                if fs.weights()[si] <= 0.0 {
                    continue;
                }
                let cell = group.merged(profile);
                let levels: Vec<usize> = cell.pairs().iter().map(|(_, l)| *l).collect();
                if fxs.weights()[fxs.schema().cell_index(&levels)] <= 0.0 {
                    return Err(Error::UnobservedProfile {
                        group: schema.describe(group),
                        profile: schema.describe(profile),
                    });
                }
            }
        }
        Ok(())
    }
}

fn parity_constraint(f: &JointTable, layout: &StudyLayout) -> Result<MarginalConstraint> {
    let fx = f.marginal(&layout.x)?.normalize()?;
    let fs = f.marginal(&layout.s)?.normalize()?;
    let xs_vars = layout.x.union(&layout.s);
    let xs_schema = f.schema().subschema(&xs_vars)?;
    let rank = |set: &VarSet| {
        VarSet::new(
            set.as_slice()
                .iter()
                .map(|v| xs_vars.rank(*v).unwrap())
                .collect(),
        )
    };
    let to_x = xs_schema.projection_map(&rank(&layout.x));
    let to_s = xs_schema.projection_map(&rank(&layout.s));
    let weights = to_x
        .iter()
        .zip(&to_s)
        .map(|(&xi, &si)| fx.weights()[xi] * fs.weights()[si])
        .collect();
    let target = JointTable::from_weights(xs_schema, weights, TableKind::Distribution)?;
    Ok(MarginalConstraint::new(xs_vars, target)?.with_label("structural parity (X, S)"))
}

struct Fitted {
    q: JointTable,
    iterations: usize,
    residuals: Vec<f64>,
    labels: Vec<String>,
    converged: bool,
}

impl Fitted {
    fn into_result(self, kind: ProjectionKind, divergence: f64) -> ProjectionResult {
        ProjectionResult {
            kind,
            q: self.q,
            iterations: self.iterations,
            residuals: self.residuals,
            constraint_labels: self.labels,
            divergence,
            converged: self.converged,
        }
    }
}

struct Compiled {
    map: Vec<usize>,
    target: Vec<f64>,
    marginal: Vec<f64>,
}

impl Compiled {
    fn accumulate(&mut self, q: &[f64]) {
        self.marginal.iter_mut().for_each(|m| *m = 0.0);
        for (w, &m) in q.iter().zip(&self.map) {
            self.marginal[m] += w;
        }
    }

    fn residual(&mut self, q: &[f64]) -> f64 {
        self.accumulate(q);
        self.marginal
            .iter()
            .zip(&self.target)
            .map(|(m, t)| (m - t).abs())
            .fold(0.0, f64::max)
    }

    fn rescale(&mut self, q: &mut [f64]) {
        self.accumulate(q);
        // factor 1 on empty slices keeps zero cells at zero
        for (m, t) in self.marginal.iter_mut().zip(&self.target) {
            *m = if *m > 0.0 { t / *m } else { 1.0 };
        }
        for (w, &m) in q.iter_mut().zip(&self.map) {
            *w *= self.marginal[m];
        }
    }
}

fn fit_from(start: &JointTable, spec: &ProjectionSpec) -> Result<Fitted> {
    let schema = start.schema();
    let mut compiled = Vec::with_capacity(spec.constraints.len());
    for (index, c) in spec.constraints.iter().enumerate() {
        let expected = schema
            .subschema(&c.vars)
            .map_err(|_| Error::InvalidConstraint {
                index,
                reason: "variables not in schema".into(),
            })?;
        if c.target.schema() != &expected {
            return Err(Error::InvalidConstraint {
                index,
                reason: format!("target table is not over {}", c.label),
            });
        }
        let mut comp = Compiled {
            map: schema.projection_map(&c.vars),
            target: c.target.weights().to_vec(),
            marginal: vec![0.0; expected.n_cells()],
        };
        comp.accumulate(start.weights());
        if let Some(cell) = comp
            .target
            .iter()
            .zip(&comp.marginal)
            .position(|(t, m)| *t > 0.0 && *m <= 0.0)
        {
            return Err(Error::Infeasible {
                constraint: index,
                description: format!(
                    "{}: target mass at {} where the table has none",
                    c.label,
                    expected.describe_cell(cell)
                ),
                residual: comp.target[cell],
            });
        }
        compiled.push(comp);
    }
    let labels: Vec<String> = spec.constraints.iter().map(|c| c.label.clone()).collect();

    let mut q = start.weights().to_vec();
    let measure = |compiled: &mut [Compiled], q: &[f64]| -> Vec<f64> {
        compiled.iter_mut().map(|c| c.residual(q)).collect()
    };
    let mut residuals = measure(&mut compiled, &q);
    let worst = |r: &[f64]| r.iter().copied().fold(0.0, f64::max);
    let mut history = vec![worst(&residuals)];
    let mut iterations = 0;
    let mut converged = history[0] <= spec.tolerance;

    while !converged && iterations < spec.max_iterations {
        for c in compiled.iter_mut() {
            c.rescale(&mut q);
        }
        iterations += 1;
        residuals = measure(&mut compiled, &q);
        let current = worst(&residuals);
        history.push(current);
        converged = current <= spec.tolerance;
        if !converged && iterations >= STAGNATION_WINDOW {
            let before = history[iterations - STAGNATION_WINDOW];
            if before > 0.0 && (before - current) / before < STAGNATION_MIN_DECREASE {
                let constraint = residuals
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::MIN),
                        |best, (i, r)| if *r > best.1 { (i, *r) } else { best },
                    )
                    .0;
                return Err(Error::Infeasible {
                    constraint,
                    description: labels[constraint].clone(),
                    residual: current,
                });
            }
        }
    }

    // IPF rescaling preserves the total only up to rounding
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|w| *w /= total);
    let q = JointTable::from_weights(schema.clone(), q, TableKind::Distribution)?;
    Ok(Fitted {
        q,
        iterations,
        residuals,
        labels,
        converged,
    })
}
