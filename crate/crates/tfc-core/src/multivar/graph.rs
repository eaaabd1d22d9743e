//! Assignment of component constraints to dependent variables.
//!
//! Every component constraint is split into one edge per pair of the
//! variables it couples. Each orientation of all edges is a candidate graph;
//! an edge `a -> b` means the expression of `a` refers to `b`, so `b` must be
//! built first. Orientations whose adjacency matrix is nilpotent are acyclic
//! and give a valid construction order.

use super::{MvConstraint, MvKappa, MvTerm};
use crate::constraint::EvalSpec;
use crate::expr::Expr;

/// One acyclic orientation of the component constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentGraph {
    pub variables: Vec<String>,
    /// `adjacency[a][b]` counts edges `a -> b`.
    pub adjacency: Vec<Vec<u32>>,
    /// Index into `variables` of the variable each constraint is embedded in.
    pub assignment: Vec<usize>,
    /// Variables in the order their expressions must be built.
    pub construction_order: Vec<String>,
}

impl ComponentGraph {
    pub fn assigned_variable(&self, constraint: usize) -> &str {
        &self.variables[self.assignment[constraint]]
    }
}

/// Whether some power of the matrix vanishes, checked by repeated
/// multiplication up to the matrix size.
pub fn is_nilpotent(adjacency: &[Vec<u32>]) -> bool {
    let n = adjacency.len();
    let mut power: Vec<Vec<u64>> = adjacency.iter().map(|r| r.iter().map(|&v| v as u64).collect()).collect();
    for _ in 1..n.max(1) {
        if power.iter().all(|r| r.iter().all(|&v| v == 0)) {
            return true;
        }
        let mut next = vec![vec![0u64; n]; n];
        for i in 0..n {
            for k in 0..n {
                if power[i][k] == 0 {
                    continue;
                }
                for j in 0..n {
                    // only zero versus non-zero matters
                    next[i][j] = next[i][j].saturating_add(power[i][k].saturating_mul(adjacency[k][j] as u64).min(1));
                }
            }
        }
        power = next;
    }
    power.iter().all(|r| r.iter().all(|&v| v == 0))
}

/// Every acyclic way of embedding the component constraints, each given by
/// the names of the variables it couples.
///
/// The search is exhaustive over `2^pairs` orientations, so it is meant for
/// the handful of constraints a problem usually carries.
pub fn enumerate_component_graphs<S: AsRef<str>>(constraints: &[Vec<S>]) -> Vec<ComponentGraph> {
    let mut variables: Vec<String> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for c in constraints {
        let mut m = Vec::new();
        for name in c {
            let name = name.as_ref();
            let i = match variables.iter().position(|v| v == name) {
                Some(i) => i,
                None => {
                    variables.push(name.to_string());
                    variables.len() - 1
                }
            };
            if !m.contains(&i) {
                m.push(i);
            }
        }
        members.push(m);
    }
    // (constraint, a, b) with a < b in member order
    let mut pairs = Vec::new();
    for (c, m) in members.iter().enumerate() {
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                pairs.push((c, m[i], m[j]));
            }
        }
    }
    assert!(pairs.len() < 32, "too many variable pairs to enumerate orientations");
    let n = variables.len();
    let mut graphs = Vec::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let mut adjacency = vec![vec![0u32; n]; n];
        // outgoing[c][v]: edges of constraint c leaving v
        let mut outgoing = vec![vec![0usize; n]; constraints.len()];
        for (p, &(c, a, b)) in pairs.iter().enumerate() {
            let (from, to) = if mask >> p & 1 == 0 { (a, b) } else { (b, a) };
            adjacency[from][to] += 1;
            outgoing[c][from] += 1;
        }
        if !is_nilpotent(&adjacency) {
            continue;
        }
        // in an acyclic orientation every constraint has a unique source
        let assignment: Vec<usize> = members
            .iter()
            .enumerate()
            .map(|(c, m)| *m.iter().find(|&&v| outgoing[c][v] + 1 == m.len()).unwrap_or(&m[0]))
            .collect();
        let construction_order = leaves_first(&adjacency).into_iter().map(|i| variables[i].clone()).collect();
        graphs.push(ComponentGraph { variables: variables.clone(), adjacency, assignment, construction_order });
    }
    graphs
}

fn leaves_first(adjacency: &[Vec<u32>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while let Some(v) = (0..n).find(|&v| !placed[v] && (0..n).all(|w| placed[w] || adjacency[v][w] == 0)) {
        placed[v] = true;
        order.push(v);
    }
    order
}

/// A constraint of a multi-variable system: `sum over parts of terms[var] = rhs`
/// on dimension `dim`. One part is an ordinary constraint, several a component one.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConstraint {
    pub dim: usize,
    pub parts: Vec<(String, Vec<MvTerm>)>,
    pub rhs: Expr,
}

impl SystemConstraint {
    pub fn is_component(&self) -> bool {
        self.parts.len() > 1
    }

    pub fn variables(&self) -> Vec<&str> {
        self.parts.iter().map(|(v, _)| v.as_str()).collect()
    }

    /// The constraint as embedded in the expression of `var`.
    pub fn embed_in(&self, var: &str) -> Option<MvConstraint> {
        let (_, terms) = self.parts.iter().find(|(v, _)| v == var)?;
        let others: Vec<(String, Vec<MvTerm>)> = self.parts.iter().filter(|(v, _)| v != var).cloned().collect();
        let kappa = if others.is_empty() {
            MvKappa::Expr(self.rhs.clone())
        } else {
            MvKappa::Component { rhs: self.rhs.clone(), others }
        };
        Some(MvConstraint { dim: self.dim, terms: terms.clone(), kappa })
    }

    /// Where the constraint acts along its own dimension.
    fn location(&self, var: &str) -> Vec<Location> {
        let mut locs: Vec<Location> = self
            .parts
            .iter()
            .filter(|(v, _)| v == var)
            .flat_map(|(_, terms)| terms.iter())
            .map(|t| match t.spec {
                EvalSpec::Point { at, .. } => Location::Point(at),
                EvalSpec::Integral { lower, upper, .. } => Location::Interval(lower, upper),
            })
            .collect();
        locs.sort_by(|a, b| a.key().partial_cmp(&b.key()).unwrap_or(std::cmp::Ordering::Equal));
        locs.dedup();
        locs
    }
}

/// A point or interval along one independent variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location {
    Point(f64),
    Interval(f64, f64),
}

impl Location {
    fn key(&self) -> (f64, f64) {
        match *self {
            Location::Point(p) => (p, p),
            Location::Interval(a, b) => (a, b),
        }
    }
}

/// A component constraint that crosses another constraint of its assigned
/// variable where some coupled variable is left unconstrained.
#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionConflict {
    pub component: usize,
    pub assigned: String,
    /// Dimension and location of the crossing constraint of `assigned`.
    pub dim: usize,
    pub location: Vec<Location>,
    /// Coupled variable with no constraint at that location.
    pub missing: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionReport {
    pub accepted: bool,
    pub conflicts: Vec<IntersectionConflict>,
}

/// Checks a graph against the crossings of component constraints with the
/// other constraints of the variable they are embedded in.
///
/// `constraints` holds every constraint of the system; the component ones,
/// in order, correspond to the constraints the graph was enumerated from.
/// A placement is rejected when the assigned variable has another constraint
/// on a different dimension (which necessarily crosses the component line)
/// and some other variable of the component has no constraint at the same
/// location of that dimension.
pub fn check_intersection_validity(graph: &ComponentGraph, constraints: &[SystemConstraint]) -> IntersectionReport {
    let components: Vec<&SystemConstraint> = constraints.iter().filter(|c| c.is_component()).collect();
    // who each constraint is embedded in
    let owner = |c: &SystemConstraint| -> Option<String> {
        if c.is_component() {
            let k = components.iter().position(|o| std::ptr::eq(*o, c))?;
            Some(graph.assigned_variable(k).to_string())
        } else {
            Some(c.parts[0].0.clone())
        }
    };
    let has_constraint_at = |var: &str, dim: usize, loc: &[Location]| {
        constraints
            .iter()
            .any(|c| c.dim == dim && c.variables().contains(&var) && c.location(var) == loc)
    };
    let mut conflicts = Vec::new();
    for (k, comp) in components.iter().enumerate() {
        if k >= graph.assignment.len() {
            break;
        }
        let assigned = graph.assigned_variable(k);
        for other in constraints {
            if std::ptr::eq(other, *comp) || other.dim == comp.dim {
                continue;
            }
            if owner(other).as_deref() != Some(assigned) {
                continue;
            }
            let loc = other.location(assigned);
            for var in comp.variables() {
                if var != assigned && !has_constraint_at(var, other.dim, &loc) {
                    conflicts.push(IntersectionConflict {
                        component: k,
                        assigned: assigned.to_string(),
                        dim: other.dim,
                        location: loc.clone(),
                        missing: var.to_string(),
                    });
                }
            }
        }
    }
    IntersectionReport { accepted: conflicts.is_empty(), conflicts }
}
