use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interchange::{swap_deltas, Nearest};
use super::{local_search_interchange, Neighborhood, PMedianInstance, SolveResult, Suite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspParams {
    pub iterations: usize,
    /// Restricted candidate list width: 0 is pure greedy, 1 is uniform.
    pub alpha: f64,
    pub elite_size: usize,
    pub seed: u64,
    pub neighborhood: Neighborhood,
    pub relink: bool,
}

impl Default for GraspParams {
    fn default() -> Self {
        GraspParams {
            iterations: 32,
            alpha: 0.3,
            elite_size: 10,
            seed: 0,
            neighborhood: Neighborhood::BestImprovement,
            relink: true,
        }
    }
}

/// Adds one facility at a time, drawing from those whose resulting cost is
/// within `alpha` of the cheapest. With `alpha == 0` the lowest-index
/// cheapest facility is taken and `rng` is never touched.
pub fn greedy_construct<R: Rng>(inst: &PMedianInstance<'_>, alpha: f64, rng: &mut R) -> Suite {
    let (n, m) = (inst.n(), inst.m());
    let mut d1 = vec![f64::INFINITY; n];
    let mut open = vec![false; m];
    let mut chosen = Vec::with_capacity(inst.p());
    let mut costs = vec![0.0; m];
    for _ in 0..inst.p() {
        costs.iter_mut().for_each(|c| *c = 0.0);
        for (i, best) in d1.iter().enumerate() {
            for (c, &v) in costs.iter_mut().zip(inst.row(i)) {
                *c += v.min(*best);
            }
        }
        let closed = || (0..m).filter(|&j| !open[j]);
        let lo = closed().map(|j| costs[j]).fold(f64::INFINITY, f64::min);
        let j = if alpha <= 0.0 {
            closed().find(|&j| costs[j] <= lo).expect("a closed facility remains")
        } else {
            let hi = closed().map(|j| costs[j]).fold(f64::NEG_INFINITY, f64::max);
            let cut = lo + alpha.min(1.0) * (hi - lo);
            let rcl: Vec<usize> = closed().filter(|&j| costs[j] <= cut).collect();
            rcl[rng.gen_range(0..rcl.len())]
        };
        open[j] = true;
        chosen.push(j);
        for (i, best) in d1.iter_mut().enumerate() {
            *best = best.min(inst.d(i, j));
        }
    }
    Suite::new(chosen)
}

/// Walks from `source` toward `guide` by the cheapest swap at each step and
/// returns the best intermediate suite after a local-search polish. The walk
/// includes `guide` itself but not `source`.
pub fn path_relink(inst: &PMedianInstance<'_>, source: &Suite, guide: &Suite) -> Suite {
    if source == guide {
        return source.clone();
    }
    let mut current = source.clone();
    let mut best: Option<(f64, Suite)> = None;
    let mut deltas = vec![0.0; inst.p()];
    loop {
        let incoming: Vec<usize> = guide.0.iter().copied().filter(|j| !current.contains(*j)).collect();
        if incoming.is_empty() {
            break;
        }
        let near = Nearest::new(inst, &current);
        let mut step: Option<(f64, usize, usize)> = None;
        for &b in &incoming {
            swap_deltas(inst, &current, &near, b, &mut deltas);
            for (k, &dv) in deltas.iter().enumerate() {
                if guide.contains(current.0[k]) {
                    continue;
                }
                if step.is_none_or(|(sd, _, _)| dv < sd) {
                    step = Some((dv, k, b));
                }
            }
        }
        let (_, k, b) = step.expect("suites of equal size");
        let mut members = current.0.clone();
        members[k] = b;
        current = Suite::new(members);
        let c = inst.cost(&current);
        if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
            best = Some((c, current.clone()));
        }
    }
    let (_, s) = best.expect("at least one step");
    local_search_interchange(inst, &s, Neighborhood::BestImprovement).suite
}

struct Elite {
    cap: usize,
    pool: Vec<(f64, Suite)>,
}

impl Elite {
    fn offer(&mut self, cost: f64, suite: Suite) {
        if self.cap == 0 || self.pool.iter().any(|(_, s)| *s == suite) {
            return;
        }
        if self.pool.len() < self.cap {
            self.pool.push((cost, suite));
            return;
        }
        let worst = (0..self.pool.len())
            .max_by(|&a, &b| self.pool[a].0.total_cmp(&self.pool[b].0))
            .expect("full pool");
        if cost < self.pool[worst].0 {
            self.pool[worst] = (cost, suite);
        }
    }

    fn best(&self) -> Option<&(f64, Suite)> {
        self.pool
            .iter()
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
    }
}

/// GRASP: randomized greedy construction plus swap local search, with
/// path-relinking against an elite pool. Deterministic for a given seed
/// regardless of thread count.
pub fn solve_grasp(inst: &PMedianInstance<'_>, params: &GraspParams) -> SolveResult {
    let start = Instant::now();
    let iterations = params.iterations.max(1);
    let locals: Vec<SolveResult> = (0..iterations)
        .into_par_iter()
        .map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(it as u64);
            let s = greedy_construct(inst, params.alpha, &mut rng);
            local_search_interchange(inst, &s, params.neighborhood)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(u64::MAX);
    let mut elite = Elite {
        cap: params.elite_size.max(1),
        pool: Vec::new(),
    };
    let mut overall: Option<(f64, Suite)> = None;
    let mut keep = |cost: f64, s: &Suite| {
        if overall.as_ref().is_none_or(|(c, b)| cost < *c || (cost == *c && s < b)) {
            overall = Some((cost, s.clone()));
        }
    };
    for r in locals {
        keep(r.cost, &r.suite);
        if params.relink && !elite.pool.is_empty() {
            let g = elite.pool[rng.gen_range(0..elite.pool.len())].1.clone();
            let s = path_relink(inst, &r.suite, &g);
            let c = inst.cost(&s);
            keep(c, &s);
            elite.offer(c, s);
        }
        elite.offer(r.cost, r.suite);
    }
    if params.relink {
        let members: Vec<Suite> = elite.pool.iter().map(|(_, s)| s.clone()).collect();
        let relinked: Vec<Suite> = (0..members.len())
            .flat_map(|a| (a + 1..members.len()).map(move |b| (a, b)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(a, b)| path_relink(inst, &members[a], &members[b]))
            .collect();
        for s in relinked {
            keep(inst.cost(&s), &s);
        }
    }
    if let Some((c, s)) = elite.best() {
        keep(*c, s);
    }
    let (_, suite) = overall.expect("at least one iteration");
    SolveResult::plain(inst, suite, start.elapsed())
}
