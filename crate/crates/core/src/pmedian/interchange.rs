use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{PMedianInstance, SolveResult, Suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// Take the first improving swap in scan order.
    FirstImprovement,
    /// Take the most improving swap of the whole neighborhood.
    #[default]
    BestImprovement,
}

/// Per-customer nearest and second-nearest open facility.
pub(crate) struct Nearest {
    pub d1: Vec<f64>,
    pub c1: Vec<usize>,
    pub d2: Vec<f64>,
}

impl Nearest {
    pub(crate) fn new(inst: &PMedianInstance<'_>, suite: &Suite) -> Self {
        let n = inst.n();
        let mut d1 = vec![f64::INFINITY; n];
        let mut c1 = vec![usize::MAX; n];
        let mut d2 = vec![f64::INFINITY; n];
        for i in 0..n {
            let row = inst.row(i);
            for &j in suite.members() {
                let v = row[j];
                if v < d1[i] {
                    d2[i] = d1[i];
                    d1[i] = v;
                    c1[i] = j;
                } else if v < d2[i] {
                    d2[i] = v;
                }
            }
        }
        Nearest { d1, c1, d2 }
    }

    fn cost(&self) -> f64 {
        self.d1.iter().sum()
    }
}

/// Cost change of every swap bringing in `b`, indexed by the position of the
/// outgoing facility in `suite`. O(n + p).
pub(super) fn swap_deltas(inst: &PMedianInstance<'_>, suite: &Suite, near: &Nearest, b: usize, out: &mut [f64]) {
    let mut gain = 0.0;
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..inst.n() {
        let dib = inst.d(i, b);
        let g = (dib - near.d1[i]).min(0.0);
        gain += g;
        // Customers served by the outgoing facility move to `b` or their
        // second choice instead of merely considering `b`.
        let k = suite.members().binary_search(&near.c1[i]).expect("served by the suite");
        out[k] += dib.min(near.d2[i]) - near.d1[i] - g;
    }
    out.iter_mut().for_each(|v| *v += gain);
}

fn threshold(cost: f64) -> f64 {
    1e-9 * cost.abs().max(1.0)
}

/// Swap local search from `start` until no exchange of one open facility for
/// one closed facility lowers the cost.
pub fn local_search_interchange(inst: &PMedianInstance<'_>, start: &Suite, neighborhood: Neighborhood) -> SolveResult {
    let t0 = Instant::now();
    inst.check_suite(start);
    let mut suite = start.clone();
    let mut near = Nearest::new(inst, &suite);
    let mut deltas = vec![0.0; inst.p()];
    loop {
        let tol = threshold(near.cost());
        let mut best: Option<(f64, usize, usize)> = None;
        'scan: for b in 0..inst.m() {
            if suite.contains(b) {
                continue;
            }
            swap_deltas(inst, &suite, &near, b, &mut deltas);
            for (k, &dv) in deltas.iter().enumerate() {
                if dv < -tol && best.is_none_or(|(bd, _, _)| dv < bd) {
                    best = Some((dv, k, b));
                    if neighborhood == Neighborhood::FirstImprovement {
                        break 'scan;
                    }
                }
            }
        }
        let Some((_, k, b)) = best else { break };
        let mut members = suite.0.clone();
        members[k] = b;
        suite = Suite::new(members);
        near = Nearest::new(inst, &suite);
    }
    SolveResult::plain(inst, suite, t0.elapsed())
}

/// Brute-force check that no single swap improves `suite` beyond the
/// relative tolerance used by the local search.
pub fn swap_local_optimum_audit(inst: &PMedianInstance<'_>, suite: &Suite) -> bool {
    let base = inst.cost(suite);
    let tol = threshold(base);
    for k in 0..suite.len() {
        for b in (0..inst.m()).filter(|b| !suite.contains(*b)) {
            let mut members = suite.0.clone();
            members[k] = b;
            if inst.cost(&Suite::new(members)) < base - tol {
                return false;
            }
        }
    }
    true
}
