//! p-median: open `p` of `m` facilities to minimize the sum over customers of
//! the cheapest open facility.
//!
//! Solvers: exhaustive enumeration for small `m`, swap-based local search,
//! GRASP with path-relinking, and Lagrangian relaxation of the assignment
//! constraints for lower bounds.

mod exact;
mod grasp;
mod interchange;
mod lagrangian;

use std::borrow::Cow;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use exact::{solve_exact, ExactBudget};
pub use grasp::{greedy_construct, path_relink, solve_grasp, GraspParams};
pub use interchange::{local_search_interchange, swap_local_optimum_audit, Neighborhood};
pub use lagrangian::{dual_value, lagrangian_bounds, BoundPoint, LagrangianParams};

/// Cost matrix `d` (customers x facilities, row-major) and the number of
/// facilities to open.
#[derive(Debug, Clone, PartialEq)]
pub struct PMedianInstance<'a> {
    n: usize,
    m: usize,
    p: usize,
    d: Cow<'a, [f64]>,
}

impl<'a> PMedianInstance<'a> {
    pub fn new(n: usize, m: usize, p: usize, d: impl Into<Cow<'a, [f64]>>) -> Result<Self> {
        let d = d.into();
        if d.len() != n * m {
            return Err(invalid(format!(
                "cost matrix has {} entries, expected {n} x {m}",
                d.len()
            )));
        }
        if p == 0 || p > m {
            return Err(invalid(format!("p = {p} must be between 1 and m = {m}")));
        }
        if let Some(bad) = d.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!("cost {bad} is not finite and nonnegative")));
        }
        Ok(PMedianInstance { n, m, p, d })
    }

    pub fn from_rows(rows: &[Vec<f64>], p: usize) -> Result<PMedianInstance<'static>> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(invalid("ragged cost matrix"));
        }
        PMedianInstance::new(rows.len(), m, p, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.m..(i + 1) * self.m]
    }

    /// `sum_i min_{j in S} d_ij`.
    pub fn cost(&self, suite: &Suite) -> f64 {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                suite.0.iter().map(|&j| row[j]).fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    /// Same instance with a different `p`.
    pub fn with_p(&self, p: usize) -> Result<PMedianInstance<'_>> {
        PMedianInstance::new(self.n, self.m, p, &self.d[..])
    }

    pub(crate) fn check_suite(&self, suite: &Suite) {
        assert_eq!(suite.0.len(), self.p, "suite size differs from p");
        assert!(suite.0.iter().all(|&j| j < self.m), "facility index out of range");
    }
}

/// Open facilities, sorted ascending and distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Suite(pub Vec<usize>);

impl Suite {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Suite(members)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Number of facilities in exactly one of the two suites.
    pub fn symmetric_difference(&self, other: &Suite) -> usize {
        let common = self.0.iter().filter(|j| other.contains(**j)).count();
        self.0.len() + other.0.len() - 2 * common
    }
}

/// `facility[i]` is the open facility customer `i` is assigned to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub facility: Vec<usize>,
}

/// Cheapest open facility per customer, lowest index on ties.
pub fn extract_assignment(inst: &PMedianInstance<'_>, suite: &Suite) -> Assignment {
    let facility = (0..inst.n())
        .map(|i| {
            let row = inst.row(i);
            let mut best = suite.0[0];
            for &j in &suite.0[1..] {
                if row[j] < row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    Assignment { facility }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub suite: Suite,
    pub cost: f64,
    pub lower_bound: Option<f64>,
    /// `(cost - lower_bound) / cost`.
    pub gap: Option<f64>,
    pub elapsed: Duration,
    /// Bound evolution, filled by the Lagrangian solver.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<BoundPoint>,
}

impl SolveResult {
    pub(crate) fn plain(inst: &PMedianInstance<'_>, suite: Suite, elapsed: Duration) -> Self {
        let cost = inst.cost(&suite);
        SolveResult {
            suite,
            cost,
            lower_bound: None,
            gap: None,
            elapsed,
            history: Vec::new(),
        }
    }
}

/// `None` when the objective reaches the penalty, meaning no suite of this
/// size ships every packable shipment and keeps every locked box.
pub fn check_feasible(result: &SolveResult, gamma: f64) -> Option<Suite> {
    (result.cost < gamma).then(|| result.suite.clone())
}

/// Chooses a solver and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Exact(ExactBudget),
    /// Greedy construction followed by swap local search.
    Exchange,
    Grasp(GraspParams),
    Lagrangian(LagrangianParams),
}

pub fn solve(inst: &PMedianInstance<'_>, method: &Method) -> Result<SolveResult> {
    match method {
        Method::Exact(b) => solve_exact(inst, b),
        Method::Exchange => {
            let start = std::time::Instant::now();
            let s = greedy_construct(
                inst,
                0.0,
                &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
            );
            let mut r = local_search_interchange(inst, &s, Neighborhood::BestImprovement);
            r.elapsed = start.elapsed();
            Ok(r)
        }
        Method::Grasp(p) => Ok(solve_grasp(inst, p)),
        Method::Lagrangian(p) => Ok(lagrangian_bounds(inst, p)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small() -> PMedianInstance<'static> {
        PMedianInstance::from_rows(&[vec![1., 9.], vec![9., 1.], vec![2., 5.]], 1).unwrap()
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let inst = PMedianInstance::from_rows(&[vec![8., 8., 100.]], 2).unwrap();
        let a = extract_assignment(&inst, &Suite::new(vec![1, 0]));
        assert_eq!(a.facility, vec![0]);
    }

    #[test]
    fn feasibility_gate() {
        let inst = small();
        let r = SolveResult::plain(&inst, Suite::new(vec![0]), Duration::ZERO);
        assert_eq!(r.cost, 12.0);
        assert_eq!(check_feasible(&r, 12.0), None);
        assert_eq!(check_feasible(&r, 12.5), Some(Suite(vec![0])));
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(PMedianInstance::from_rows(&[vec![1., 2.]], 3).is_err());
        assert!(PMedianInstance::from_rows(&[vec![1., -2.]], 1).is_err());
        assert!(PMedianInstance::from_rows(&[vec![1., 2.], vec![1.]], 1).is_err());
    }
}
