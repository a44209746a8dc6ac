//! Dense multi-way contingency tables over named categorical variables.
//!
//! Cells are laid out row-major over the schema's variable order, so the last
//! variable varies fastest. Marginals and conditionals produce tables over a
//! sub-schema whose variables keep the parent order.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub(crate) fn is_whole(x: f64) -> bool {
    libm::trunc(x) == x
}

/// Relative tolerance for a distribution's weights summing to one.
const DISTRIBUTION_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Outcome,
    Independent,
    Confounder,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Outcome => "outcome",
            Role::Independent => "independent",
            Role::Confounder => "confounder",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    name: String,
    role: Role,
    levels: Vec<String>,
}

impl Variable {
    pub fn new<N, L, I>(name: N, role: Role, levels: I) -> Result<Self>
    where
        N: Into<String>,
        L: Into<String>,
        I: IntoIterator<Item = L>,
    {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidSchema("variable name is empty".into()));
        }
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        if levels.is_empty() {
            return Err(Error::InvalidSchema(format!(
                "variable `{name}` has no levels"
            )));
        }
        for (i, level) in levels.iter().enumerate() {
            if levels[..i].contains(level) {
                return Err(Error::InvalidSchema(format!(
                    "level `{level}` repeated in variable `{name}`"
                )));
            }
        }
        Ok(Self { name, role, levels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> &str {
        &self.levels[index]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == label)
    }
}

/// Sorted set of variable positions within a schema.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct VarSet(Vec<usize>);

impl VarSet {
    pub fn new(mut vars: Vec<usize>) -> Self {
        vars.sort_unstable();
        vars.dedup();
        Self(vars)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, var: usize) -> bool {
        self.0.binary_search(&var).is_ok()
    }

    pub fn union(&self, other: &VarSet) -> VarSet {
        let mut vars = self.0.clone();
        vars.extend_from_slice(&other.0);
        VarSet::new(vars)
    }

    pub fn is_disjoint(&self, other: &VarSet) -> bool {
        self.0.iter().all(|v| !other.contains(*v))
    }

    pub fn is_subset(&self, other: &VarSet) -> bool {
        self.0.iter().all(|v| other.contains(*v))
    }

    /// Position of `var` inside this set.
    pub fn rank(&self, var: usize) -> Option<usize> {
        self.0.binary_search(&var).ok()
    }
}

/// A partial cell: a level fixed for each of a subset of variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Assignment(Vec<(usize, usize)>);

impl Assignment {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Pairs of (variable position, level index). Later duplicates of a
    /// variable replace earlier ones.
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        let mut out: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
        for (var, level) in pairs {
            match out.iter_mut().find(|(v, _)| *v == var) {
                Some(slot) => slot.1 = level,
                None => out.push((var, level)),
            }
        }
        out.sort_unstable();
        Self(out)
    }

    /// Builds the assignment for one cell of the sub-table over `vars`.
    pub fn from_levels(vars: &VarSet, levels: &[usize]) -> Self {
        Self(
            vars.as_slice()
                .iter()
                .copied()
                .zip(levels.iter().copied())
                .collect(),
        )
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn vars(&self) -> VarSet {
        VarSet(self.0.iter().map(|(v, _)| *v).collect())
    }

    pub fn level_of(&self, var: usize) -> Option<usize> {
        self.0.iter().find(|(v, _)| *v == var).map(|(_, l)| *l)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Union of two assignments; `other` wins on shared variables.
    pub fn merged(&self, other: &Assignment) -> Assignment {
        let mut pairs = self.0.clone();
        pairs.extend_from_slice(&other.0);
        Assignment::new(pairs)
    }

    /// Whether a full cell (levels for every schema variable) lies in this slice.
    pub fn matches(&self, cell_levels: &[usize]) -> bool {
        self.0.iter().all(|&(v, l)| cell_levels[v] == l)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    variables: Vec<Variable>,
    strides: Vec<usize>,
    n_cells: usize,
}

impl Schema {
    /// A study schema: exactly one outcome, at least one independent and at
    /// least one confounder variable.
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let schema = Self::general(variables)?;
        let count = |role| schema.variables.iter().filter(|v| v.role == role).count();
        if count(Role::Outcome) != 1 {
            return Err(Error::InvalidSchema(format!(
                "expected exactly one outcome variable, found {}",
                count(Role::Outcome)
            )));
        }
        if count(Role::Independent) == 0 {
            return Err(Error::MissingRole("independent"));
        }
        if count(Role::Confounder) == 0 {
            return Err(Error::MissingRole("confounder"));
        }
        Ok(schema)
    }

    /// Any non-empty list of uniquely named variables, regardless of roles.
    /// Marginal tables live on schemas of this kind.
    pub fn general(variables: Vec<Variable>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::InvalidSchema("schema has no variables".into()));
        }
        for (i, var) in variables.iter().enumerate() {
            if variables[..i].iter().any(|v| v.name == var.name) {
                return Err(Error::InvalidSchema(format!(
                    "variable `{}` declared twice",
                    var.name
                )));
            }
        }
        let mut strides = vec![0; variables.len()];
        let mut n_cells = 1usize;
        for (i, var) in variables.iter().enumerate().rev() {
            strides[i] = n_cells;
            n_cells = n_cells
                .checked_mul(var.len())
                .ok_or_else(|| Error::InvalidSchema("cell count overflows".into()))?;
        }
        Ok(Self {
            variables,
            strides,
            n_cells,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, index: usize) -> &Variable {
        &self.variables[index]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn level_index(&self, var: usize, label: &str) -> Result<usize> {
        let variable = &self.variables[var];
        variable
            .level_index(label)
            .ok_or_else(|| Error::UnknownLevel {
                variable: variable.name.clone(),
                level: label.to_string(),
            })
    }

    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<VarSet> {
        names
            .iter()
            .map(|n| self.position(n.as_ref()))
            .collect::<Result<Vec<_>>>()
            .map(VarSet::new)
    }

    pub fn role_vars(&self, role: Role) -> VarSet {
        VarSet::new(
            self.variables
                .iter()
                .enumerate()
                .filter(|(_, v)| v.role == role)
                .map(|(i, _)| i)
                .collect(),
        )
    }

    pub fn all_vars(&self) -> VarSet {
        VarSet::new((0..self.variables.len()).collect())
    }

    /// Position of the single outcome variable.
    pub fn outcome(&self) -> Result<usize> {
        let outcome = self.role_vars(Role::Outcome);
        match outcome.as_slice() {
            [y] => Ok(*y),
            [] => Err(Error::MissingRole("outcome")),
            _ => Err(Error::InvalidSchema(
                "more than one outcome variable".into(),
            )),
        }
    }

    pub fn cell_index(&self, levels: &[usize]) -> usize {
        levels.iter().zip(&self.strides).map(|(l, s)| l * s).sum()
    }

    pub fn decode_into(&self, mut index: usize, levels: &mut [usize]) {
        for (slot, stride) in levels.iter_mut().zip(&self.strides) {
            *slot = index / stride;
            index %= stride;
        }
    }

    pub fn cell_levels(&self, index: usize) -> Vec<usize> {
        let mut levels = vec![0; self.variables.len()];
        self.decode_into(index, &mut levels);
        levels
    }

    /// Resolves a tuple of labels (one per variable, schema order) to a cell index.
    pub fn cell_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<usize> {
        if labels.len() != self.variables.len() {
            return Err(Error::CellArity {
                expected: self.variables.len(),
                got: labels.len(),
            });
        }
        let mut index = 0;
        for (var, label) in labels.iter().enumerate() {
            index += self.level_index(var, label.as_ref())? * self.strides[var];
        }
        Ok(index)
    }

    pub fn describe_cell(&self, index: usize) -> String {
        let levels = self.cell_levels(index);
        let pairs: Vec<String> = levels
            .iter()
            .enumerate()
            .map(|(v, l)| {
                format!(
                    "{}={}",
                    self.variables[v].name, self.variables[v].levels[*l]
                )
            })
            .collect();
        format!("({})", pairs.join(", "))
    }

    pub fn subschema(&self, vars: &VarSet) -> Result<Schema> {
        if vars.is_empty() {
            return Err(Error::EmptySubset);
        }
        let picked = vars
            .as_slice()
            .iter()
            .map(|&v| {
                self.variables
                    .get(v)
                    .cloned()
                    .ok_or_else(|| Error::UnknownVariable(format!("#{v}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Schema::general(picked)
    }

    /// For every full cell, the index of the cell of the sub-table over `vars`
    /// that contains it.
    pub fn projection_map(&self, vars: &VarSet) -> Vec<usize> {
        let mut sub_strides = vec![0usize; self.variables.len()];
        let mut stride = 1;
        for &v in vars.as_slice().iter().rev() {
            sub_strides[v] = stride;
            stride *= self.variables[v].len();
        }
        let mut levels = vec![0usize; self.variables.len()];
        let mut map = Vec::with_capacity(self.n_cells);
        let mut sub = 0usize;
        for _ in 0..self.n_cells {
            map.push(sub);
            // odometer step, keeping the sub index in sync
            for v in (0..levels.len()).rev() {
                levels[v] += 1;
                sub += sub_strides[v];
                if levels[v] < self.variables[v].len() {
                    break;
                }
                sub -= sub_strides[v] * levels[v];
                levels[v] = 0;
            }
        }
        map
    }

    pub fn assign<A: AsRef<str>, B: AsRef<str>>(&self, pairs: &[(A, B)]) -> Result<Assignment> {
        let resolved = pairs
            .iter()
            .map(|(name, label)| {
                let var = self.position(name.as_ref())?;
                Ok((var, self.level_index(var, label.as_ref())?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Assignment::new(resolved))
    }

    /// Parses `var=level[,var=level...]`.
    pub fn parse_assignment(&self, text: &str) -> Result<Assignment> {
        let mut pairs = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, label) = part.split_once('=').ok_or_else(|| {
                Error::InvalidSchema(format!("expected `variable=level`, got `{part}`"))
            })?;
            pairs.push((name.trim(), label.trim()));
        }
        self.assign(&pairs)
    }

    pub fn describe(&self, assignment: &Assignment) -> String {
        let parts: Vec<String> = assignment
            .pairs()
            .iter()
            .map(|&(v, l)| format!("{}={}", self.variables[v].name, self.variables[v].levels[l]))
            .collect();
        parts.join(", ")
    }

    /// Every cell of the sub-table over `vars`, as assignments in index order.
    pub fn profiles(&self, vars: &VarSet) -> Vec<Assignment> {
        let sizes: Vec<usize> = vars
            .as_slice()
            .iter()
            .map(|&v| self.variables[v].len())
            .collect();
        let total: usize = sizes.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut levels = vec![0usize; sizes.len()];
        for _ in 0..total {
            out.push(Assignment::from_levels(vars, &levels));
            for k in (0..levels.len()).rev() {
                levels[k] += 1;
                if levels[k] < sizes[k] {
                    break;
                }
                levels[k] = 0;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Counts,
    Distribution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    schema: Schema,
    weights: Vec<f64>,
    total: f64,
    kind: TableKind,
}

impl JointTable {
    /// Count table from a list of labelled cells; unlisted cells are zero.
    pub fn build<C, S, I>(schema: Schema, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (C, f64)>,
        C: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut weights = vec![0.0; schema.n_cells()];
        let mut seen = vec![false; schema.n_cells()];
        for (labels, count) in cells {
            let index = schema.cell_of(labels.as_ref())?;
            if !(count.is_finite() && count >= 0.0 && is_whole(count)) {
                return Err(Error::InvalidCount {
                    cell: schema.describe_cell(index),
                    count,
                });
            }
            if core::mem::replace(&mut seen[index], true) {
                return Err(Error::DuplicateCell(schema.describe_cell(index)));
            }
            weights[index] = count;
        }
        Self::from_weights(schema, weights, TableKind::Counts)
    }

    pub fn from_weights(schema: Schema, weights: Vec<f64>, kind: TableKind) -> Result<Self> {
        if weights.len() != schema.n_cells() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} cells",
                weights.len(),
                schema.n_cells()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidWeights(format!(
                "weight {} at {} is negative or not finite",
                weights[i],
                schema.describe_cell(i)
            )));
        }
        let total: f64 = weights.iter().sum();
        if kind == TableKind::Distribution && (total - 1.0).abs() > DISTRIBUTION_SUM_TOL {
            return Err(Error::InvalidWeights(format!(
                "distribution sums to {total}"
            )));
        }
        Ok(Self {
            schema,
            weights,
            total,
            kind,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn weight(&self, levels: &[usize]) -> f64 {
        self.weights[self.schema.cell_index(levels)]
    }

    pub fn is_distribution(&self) -> bool {
        self.kind == TableKind::Distribution
    }

    pub fn normalize(&self) -> Result<JointTable> {
        if self.kind == TableKind::Distribution {
            return Ok(self.clone());
        }
        if self.total <= 0.0 {
            return Err(Error::ZeroTotal);
        }
        let weights = self.weights.iter().map(|w| w / self.total).collect();
        Ok(JointTable {
            schema: self.schema.clone(),
            weights,
            total: 1.0,
            kind: TableKind::Distribution,
        })
    }

    /// Expected count table `n * p` of a distribution (fractional entries allowed).
    pub fn scaled_to(&self, n: f64) -> JointTable {
        let factor = if self.total > 0.0 {
            n / self.total
        } else {
            0.0
        };
        let weights: Vec<f64> = self.weights.iter().map(|w| w * factor).collect();
        JointTable {
            schema: self.schema.clone(),
            total: weights.iter().sum(),
            weights,
            kind: TableKind::Counts,
        }
    }

    pub fn marginal(&self, vars: &VarSet) -> Result<JointTable> {
        if let Some(&v) = vars.as_slice().iter().find(|&&v| v >= self.schema.len()) {
            return Err(Error::UnknownVariable(format!("#{v}")));
        }
        let sub = self.schema.subschema(vars)?;
        let map = self.schema.projection_map(vars);
        let mut weights = vec![0.0; sub.n_cells()];
        for (w, &m) in self.weights.iter().zip(&map) {
            weights[m] += w;
        }
        Ok(JointTable {
            schema: sub,
            weights,
            total: self.total,
            kind: self.kind,
        })
    }

    /// Summed weight of every cell in the slice.
    pub fn mass(&self, slice: &Assignment) -> f64 {
        if slice.is_empty() {
            return self.total;
        }
        let mut levels = vec![0usize; self.schema.len()];
        let mut sum = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            self.schema.decode_into(i, &mut levels);
            if slice.matches(&levels) {
                sum += w;
            }
        }
        sum
    }

    pub fn conditional(&self, target: &VarSet, given: &VarSet) -> Result<Conditional> {
        if target.is_empty() || given.is_empty() {
            return Err(Error::EmptySubset);
        }
        if !target.is_disjoint(given) {
            return Err(Error::OverlappingSubsets);
        }
        let target_schema = self.schema.subschema(target)?;
        let given_schema = self.schema.subschema(given)?;
        let target_map = self.schema.projection_map(target);
        let given_map = self.schema.projection_map(given);
        let n_target = target_schema.n_cells();
        let mut joint = vec![0.0; given_schema.n_cells() * n_target];
        let mut given_mass = vec![0.0; given_schema.n_cells()];
        for (i, w) in self.weights.iter().enumerate() {
            joint[given_map[i] * n_target + target_map[i]] += w;
            given_mass[given_map[i]] += w;
        }
        for (g, &mass) in given_mass.iter().enumerate() {
            if mass > 0.0 {
                for p in &mut joint[g * n_target..(g + 1) * n_target] {
                    *p /= mass;
                }
            }
        }
        Ok(Conditional {
            target: target_schema,
            given: given_schema,
            probs: joint,
            given_mass,
        })
    }

    pub fn support(&self) -> Support {
        let domains = (0..self.schema.len())
            .map(|v| {
                let m = self
                    .marginal(&VarSet::new(vec![v]))
                    .expect("single variable marginal");
                m.weights
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(l, _)| l)
                    .collect()
            })
            .collect();
        Support { domains }
    }
}

/// One distribution over the target variables per cell of the conditioning
/// variables. Cells with zero conditioning mass are undefined.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditional {
    target: Schema,
    given: Schema,
    probs: Vec<f64>,
    given_mass: Vec<f64>,
}

impl Conditional {
    pub fn target_schema(&self) -> &Schema {
        &self.target
    }

    pub fn given_schema(&self) -> &Schema {
        &self.given
    }

    pub fn is_defined(&self, given_cell: usize) -> bool {
        self.given_mass[given_cell] > 0.0
    }

    pub fn given_mass(&self, given_cell: usize) -> f64 {
        self.given_mass[given_cell]
    }

    pub fn distribution(&self, given_cell: usize) -> Option<&[f64]> {
        let n = self.target.n_cells();
        self.is_defined(given_cell)
            .then(|| &self.probs[given_cell * n..(given_cell + 1) * n])
    }

    pub fn get(&self, given_cell: usize, target_cell: usize) -> Option<f64> {
        self.distribution(given_cell).map(|d| d[target_cell])
    }

    /// Lookup by labels, target and given each in sub-schema order.
    pub fn get_labels<S: AsRef<str>>(&self, target: &[S], given: &[S]) -> Result<Option<f64>> {
        let t = self.target.cell_of(target)?;
        let g = self.given.cell_of(given)?;
        Ok(self.get(g, t))
    }
}

/// Observed domain of every variable: the levels with positive one-way mass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Support {
    domains: Vec<Vec<usize>>,
}

impl Support {
    pub fn levels(&self, var: usize) -> &[usize] {
        &self.domains[var]
    }

    pub fn contains(&self, var: usize, level: usize) -> bool {
        self.domains[var].contains(&level)
    }

    pub fn is_full(&self, schema: &Schema) -> bool {
        self.domains
            .iter()
            .zip(schema.variables())
            .all(|(d, v)| d.len() == v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.domains.iter().all(Vec::is_empty)
    }
}
