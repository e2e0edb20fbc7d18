use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{greedy_construct, local_search_interchange, Neighborhood, PMedianInstance, SolveResult, Suite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LagrangianParams {
    pub max_iterations: usize,
    /// Initial step scale.
    pub theta: f64,
    /// Halve the step scale after this many iterations without a better bound.
    pub patience: usize,
    /// Stop once `(UB - LB) / UB` drops to this.
    pub target_gap: f64,
    pub time_limit_secs: Option<f64>,
}

impl Default for LagrangianParams {
    fn default() -> Self {
        LagrangianParams {
            max_iterations: 1000,
            theta: 2.0,
            patience: 30,
            target_gap: 1e-4,
            time_limit_secs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub iteration: usize,
    pub lower: f64,
    pub upper: f64,
}

const CHUNK: usize = 256;

/// `rho_j = sum_i min(0, d_ij - lambda_i)`. Rows are summed in fixed chunks
/// so the result does not depend on the thread count.
fn reduced_costs(inst: &PMedianInstance<'_>, lambda: &[f64]) -> Vec<f64> {
    let m = inst.m();
    let partials: Vec<Vec<f64>> = (0..inst.n())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|rows| {
            let mut acc = vec![0.0; m];
            for &i in rows {
                let l = lambda[i];
                for (a, &v) in acc.iter_mut().zip(inst.row(i)) {
                    if v < l {
                        *a += v - l;
                    }
                }
            }
            acc
        })
        .collect();
    let mut rho = vec![0.0; m];
    for part in partials {
        for (r, v) in rho.iter_mut().zip(part) {
            *r += v;
        }
    }
    rho
}

/// The `p` facilities with the smallest reduced cost, lowest index on ties.
fn open_set(rho: &[f64], p: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rho.len()).collect();
    idx.sort_by(|&a, &b| rho[a].total_cmp(&rho[b]).then(a.cmp(&b)));
    idx.truncate(p);
    idx.sort_unstable();
    idx
}

/// Lagrangian dual with the assignment constraints relaxed: a valid lower
/// bound on the optimum for any multipliers.
pub fn dual_value(inst: &PMedianInstance<'_>, lambda: &[f64]) -> f64 {
    assert_eq!(lambda.len(), inst.n());
    let rho = reduced_costs(inst, lambda);
    let open = open_set(&rho, inst.p());
    open.iter().map(|&j| rho[j]).sum::<f64>() + lambda.iter().sum::<f64>()
}

/// Subgradient optimization of the Lagrangian dual. Each iteration's open set
/// doubles as a primal suite, polished by local search when it beats the
/// incumbent. Reports the best suite, the best bound and their gap.
pub fn lagrangian_bounds(inst: &PMedianInstance<'_>, params: &LagrangianParams) -> SolveResult {
    let start = Instant::now();
    let deadline = params
        .time_limit_secs
        .map(|s| start + Duration::from_secs_f64(s.max(0.0)));
    let n = inst.n();
    let p = inst.p();

    // Warm start from the greedy suite so the step size has a sane target.
    let greedy = greedy_construct(
        inst,
        0.0,
        &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
    );
    let polished = local_search_interchange(inst, &greedy, Neighborhood::BestImprovement);
    let mut ub = polished.cost;
    let mut best_suite = polished.suite;
    let mut tried = std::collections::HashSet::new();

    let mut lambda: Vec<f64> = (0..n)
        .map(|i| inst.row(i).iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut lb = f64::NEG_INFINITY;
    let mut theta = params.theta;
    let mut stale = 0usize;
    let mut history = Vec::new();

    for it in 0..params.max_iterations {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        let rho = reduced_costs(inst, &lambda);
        let open = open_set(&rho, p);
        let dual = open.iter().map(|&j| rho[j]).sum::<f64>() + lambda.iter().sum::<f64>();
        if lb == f64::NEG_INFINITY || dual > lb + 1e-12 * lb.abs().max(1.0) {
            lb = dual;
            stale = 0;
        } else {
            stale += 1;
            if stale >= params.patience {
                theta /= 2.0;
                stale = 0;
            }
        }

        let suite = Suite(open.clone());
        let c = inst.cost(&suite);
        if c < ub && tried.insert(suite.clone()) {
            let r = local_search_interchange(inst, &suite, Neighborhood::BestImprovement);
            if r.cost < ub {
                ub = r.cost;
                best_suite = r.suite;
            }
        }
        history.push(BoundPoint {
            iteration: it,
            lower: lb.min(ub),
            upper: ub,
        });

        let gap = if ub > 0.0 { (ub - lb) / ub } else { 0.0 };
        if gap <= params.target_gap || theta < 1e-8 {
            break;
        }
        let g: Vec<f64> = (0..n)
            .map(|i| {
                let row = inst.row(i);
                1.0 - open.iter().filter(|&&j| row[j] < lambda[i]).count() as f64
            })
            .collect();
        let norm2: f64 = g.iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            // The relaxed solution is feasible, so the bound is tight.
            break;
        }
        let t = theta * (ub - dual).max(0.0) / norm2;
        if t == 0.0 {
            break;
        }
        for (l, gi) in lambda.iter_mut().zip(&g) {
            *l += t * gi;
        }
    }

    let lower = lb.min(ub);
    let mut r = SolveResult::plain(inst, best_suite, start.elapsed());
    r.lower_bound = Some(lower);
    r.gap = Some(if ub > 0.0 { (ub - lower) / ub } else { 0.0 });
    r.history = history;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmedian::{solve_exact, ExactBudget};
    use crate::synth::uniform_costs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dual_at_zero_is_zero() {
        let inst = PMedianInstance::from_rows(&[vec![1., 9.], vec![9., 1.], vec![2., 5.]], 1).unwrap();
        assert_eq!(dual_value(&inst, &[0.0; 3]), 0.0);
    }

    #[test]
    fn bound_brackets_optimum() {
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = uniform_costs(&mut rng, 40, 12, 1, 100);
            let inst = PMedianInstance::from_rows(&rows, 3).unwrap();
            let opt = solve_exact(&inst, &ExactBudget::default()).unwrap().cost;
            let r = lagrangian_bounds(&inst, &LagrangianParams::default());
            let lb = r.lower_bound.unwrap();
            assert!(lb <= opt + 1e-9 * opt, "seed {seed}: {lb} > {opt}");
            assert!(lb > 0.8 * opt, "seed {seed}: weak bound {lb} for {opt}");
            assert!(r.cost >= opt - 1e-9);
            assert!(r.gap.unwrap() >= 0.0);
        }
    }

    #[test]
    fn history_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows = uniform_costs(&mut rng, 60, 20, 1, 50);
        let inst = PMedianInstance::from_rows(&rows, 4).unwrap();
        let r = lagrangian_bounds(&inst, &LagrangianParams::default());
        assert!(!r.history.is_empty());
        assert!(r.history.iter().all(|b| b.lower.is_finite()));
        for w in r.history.windows(2) {
            assert!(w[1].lower >= w[0].lower && w[1].upper <= w[0].upper);
        }
    }

    #[test]
    fn reduced_costs_independent_of_chunking() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = uniform_costs(&mut rng, 700, 5, 0, 9);
        let inst = PMedianInstance::from_rows(&rows, 2).unwrap();
        let lambda: Vec<f64> = (0..700).map(|i| (i % 7) as f64).collect();
        let rho = reduced_costs(&inst, &lambda);
        for j in 0..5 {
            let direct: f64 = (0..700).map(|i| (inst.d(i, j) - lambda[i]).min(0.0)).sum();
            assert!((rho[j] - direct).abs() < 1e-9);
        }
    }
}
