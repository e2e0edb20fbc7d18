use serde::{Deserialize, Serialize};

use super::{FitProblem, SolverConfig};
use crate::model::Carton;

/// Index bookkeeping for the fitting model: identical cartons regrouped to
/// consecutive positions, the ordered pairs `V` that get an x-ordering
/// constraint, and the anchor carton kept in the first orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    /// `order[m]` is the original index of the carton at model position `m`.
    pub order: Vec<usize>,
    /// Model positions `m` such that cartons `m` and `m + 1` are identical.
    pub identical: Vec<usize>,
    /// Model position of the first-orthant anchor.
    pub anchor: usize,
    pub ho_count: usize,
    pub br_count: usize,
}

/// Variable and constraint counts of the fitting model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCounts {
    pub continuous: usize,
    pub binary: usize,
    pub equalities: usize,
    pub inequalities: usize,
}

/// Identity used for symmetry breaking. Free cartons compare sorted dims;
/// height-oriented cartons compare sorted footprint and height. Cartons with
/// different bottom-resting flags are never interchangeable.
pub fn identical_key_eq(a: &Carton, ho_a: bool, br_a: bool, b: &Carton, ho_b: bool, br_b: bool, eps: f64) -> bool {
    if ho_a != ho_b || br_a != br_b {
        return false;
    }
    let (da, db) = if ho_a {
        (a.dims.sorted_footprint(), b.dims.sorted_footprint())
    } else {
        (a.dims.sorted(), b.dims.sorted())
    };
    (da.a - db.a).abs() <= eps && (da.b - db.b).abs() <= eps && (da.c - db.c).abs() <= eps
}

impl FitModel {
    pub fn build(problem: &FitProblem) -> FitModel {
        let n = problem.n();
        let eps = problem.tolerance();
        let same = |i: usize, k: usize| {
            identical_key_eq(
                &problem.cartons[i],
                problem.is_ho(i),
                problem.is_br(i),
                &problem.cartons[k],
                problem.is_ho(k),
                problem.is_br(k),
                eps,
            )
        };

        // Stable regrouping: groups appear in order of their first member.
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            match groups.iter_mut().find(|g| same(g[0], i)) {
                Some(g) => g.push(i),
                None => groups.push(vec![i]),
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut identical = Vec::new();
        for g in &groups {
            let start = order.len();
            order.extend_from_slice(g);
            identical.extend(start..order.len() - 1);
        }

        // Smallest volume, lowest position. Identical cartons share a volume,
        // so this is the first member of its group.
        let mut anchor = 0;
        for m in 1..n {
            if problem.cartons[order[m]].dims.volume() < problem.cartons[order[anchor]].dims.volume() {
                anchor = m;
            }
        }

        FitModel {
            order,
            identical,
            anchor,
            ho_count: (0..n).filter(|&i| problem.is_ho(i)).count(),
            br_count: (0..n).filter(|&i| problem.is_br(i)).count(),
        }
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Counts for the model with the given symmetry families switched on.
    /// Height-oriented cartons add one equality each (`h_Z = 1`);
    /// bottom-resting cartons add one equality each (`z = 0`) and remove the
    /// anchor's vertical bound.
    pub fn counts(&self, cfg: &SolverConfig) -> ModelCounts {
        let n = self.n();
        let pairs = n * n.saturating_sub(1) / 2;
        let mut inequalities = 7 * pairs + 6 * n;
        if cfg.use_identical_symmetry {
            inequalities += self.identical.len();
        }
        if cfg.use_orthant_symmetry {
            inequalities += if self.br_count > 0 { 2 } else { 3 };
        }
        ModelCounts {
            continuous: 3 * n,
            binary: 6 * pairs + 9 * n,
            equalities: 5 * n + self.ho_count + self.br_count,
            inequalities,
        }
    }
}
