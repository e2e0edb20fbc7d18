use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{PMedianInstance, SolveResult, Suite};
use crate::error::{Error, Result};

/// Limits for exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactBudget {
    pub max_facilities: usize,
    pub max_subsets: u64,
}

impl Default for ExactBudget {
    fn default() -> Self {
        ExactBudget {
            max_facilities: 25,
            max_subsets: 20_000_000,
        }
    }
}

fn binomial(m: usize, p: usize) -> u64 {
    let p = p.min(m - p);
    let mut c: u128 = 1;
    for k in 0..p {
        c = c * (m - k) as u128 / (k + 1) as u128;
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

/// Optimal suite by enumerating every `p`-subset in lexicographic order. The
/// first subset reaching the minimum wins.
pub fn solve_exact(inst: &PMedianInstance<'_>, budget: &ExactBudget) -> Result<SolveResult> {
    let start = Instant::now();
    let (n, m, p) = (inst.n(), inst.m(), inst.p());
    let subsets = binomial(m, p);
    if m > budget.max_facilities || subsets > budget.max_subsets {
        return Err(Error::BudgetExceeded(format!(
            "{subsets} subsets of {m} facilities exceed the enumeration budget; use a heuristic method"
        )));
    }

    // Depth-first over increasing index tuples, carrying each customer's
    // cheapest cost among the chosen facilities.
    let mut mins: Vec<Vec<f64>> = vec![vec![f64::INFINITY; n]; p + 1];
    let mut chosen = vec![0usize; p];
    let mut best_cost = f64::INFINITY;
    let mut best = Vec::new();
    let mut depth = 0usize;
    let mut next = 0usize;
    loop {
        if depth == p {
            let c: f64 = mins[p].iter().sum();
            if c < best_cost {
                best_cost = c;
                best = chosen.clone();
            }
            depth -= 1;
            next = chosen[depth] + 1;
            continue;
        }
        // Leave room for the remaining picks.
        if next + (p - depth) > m {
            if depth == 0 {
                break;
            }
            depth -= 1;
            next = chosen[depth] + 1;
            continue;
        }
        chosen[depth] = next;
        let (head, tail) = mins.split_at_mut(depth + 1);
        for (i, v) in tail[0].iter_mut().enumerate() {
            *v = head[depth][i].min(inst.d(i, next));
        }
        depth += 1;
        next += 1;
    }

    let mut r = SolveResult::plain(inst, Suite::new(best), start.elapsed());
    r.lower_bound = Some(r.cost);
    r.gap = Some(0.0);
    Ok(r)
}
