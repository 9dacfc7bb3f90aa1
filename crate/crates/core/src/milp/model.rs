use std::collections::BTreeMap;

use crate::Sense;

use super::MilpError;

/// Handle to a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
    /// `lower <= expr <= upper` in a single row.
    Range,
}

/// A linear row `lower <= Σ coeff·var <= upper`; one side may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(Var, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl Constraint {
    pub fn relation(&self) -> Relation {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (false, _) => Relation::Le,
            (_, false) => Relation::Ge,
            _ if self.lower == self.upper => Relation::Eq,
            _ => Relation::Range,
        }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, c)| c * values[v.0]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: Sense,
    pub coeffs: Vec<(Var, f64)>,
}

/// Linear model over continuous and binary variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Objective,
}

impl Default for MilpModel {
    fn default() -> Self {
        Self::new()
    }
}

fn canonical(coeffs: impl IntoIterator<Item = (Var, f64)>) -> Vec<(Var, f64)> {
    let mut acc: BTreeMap<Var, f64> = BTreeMap::new();
    for (v, c) in coeffs {
        *acc.entry(v).or_insert(0.0) += c;
    }
    acc.into_iter().filter(|&(_, c)| c != 0.0).collect()
}

impl MilpModel {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: Objective {
                sense: Sense::Max,
                coeffs: Vec::new(),
            },
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> Var {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        self.vars.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        Var(self.vars.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Var {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Var {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (Var, f64)>,
        relation: Relation,
        rhs: f64,
    ) {
        let (lower, upper) = match relation {
            Relation::Le => (f64::NEG_INFINITY, rhs),
            Relation::Ge => (rhs, f64::INFINITY),
            Relation::Eq | Relation::Range => (rhs, rhs),
        };
        self.push_row(name.into(), canonical(coeffs), lower, upper);
    }

    /// `lower <= expr <= upper` as one row.
    pub fn add_range(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (Var, f64)>,
        lower: f64,
        upper: f64,
    ) {
        self.push_row(name.into(), canonical(coeffs), lower, upper);
    }

    fn push_row(&mut self, name: String, coeffs: Vec<(Var, f64)>, lower: f64, upper: f64) {
        self.constraints.push(Constraint {
            name,
            coeffs,
            lower,
            upper,
        });
    }

    pub fn set_objective(&mut self, sense: Sense, coeffs: impl IntoIterator<Item = (Var, f64)>) {
        self.objective = Objective {
            sense,
            coeffs: canonical(coeffs),
        };
    }

    /// Tightens the bounds of an existing variable.
    pub fn set_bounds(&mut self, var: Var, lower: f64, upper: f64) {
        let v = &mut self.vars[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, v: Var) -> &Variable {
        &self.vars[v.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.objective.coeffs.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Largest violation of any bound or row by `values` (0 when feasible).
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| {
            let a = c.activity(values);
            (c.lower - a).max(a - c.upper).max(0.0)
        });
        bounds.chain(rows).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.vars.len();
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(MilpError::InvalidModel(format!(
                    "variable {} has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(MilpError::InvalidModel(format!("binary {} outside [0, 1]", v.name)));
            }
        }
        let refs = self
            .constraints
            .iter()
            .flat_map(|c| c.coeffs.iter())
            .chain(self.objective.coeffs.iter());
        for &(v, c) in refs {
            if v.0 >= n {
                return Err(MilpError::InvalidModel(format!("undeclared variable #{}", v.0)));
            }
            if !c.is_finite() {
                return Err(MilpError::InvalidModel(format!("non-finite coefficient on #{}", v.0)));
            }
        }
        for c in &self.constraints {
            if c.lower.is_nan() || c.upper.is_nan() || c.lower > c.upper {
                return Err(MilpError::InvalidModel(format!("row {} has empty range", c.name)));
            }
        }
        Ok(())
    }
}
