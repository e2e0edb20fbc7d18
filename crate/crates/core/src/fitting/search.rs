//! Branch-and-bound over the fitting model.
//!
//! Decisions are the model's binaries: one orientation per carton and, for
//! every pair, which of the six relative positions separates them (left,
//! right, behind, in front, below, above). Once those are fixed the remaining
//! constraints on the lbb coordinates are difference constraints plus bounds,
//! so propagating lower and upper bounds to a fixpoint decides them exactly and
//! the lower bounds form a packing.
//!
//! Cartons are introduced largest first. After a carton's orientation is fixed
//! its pairs with the already-oriented cartons are resolved: a pair whose
//! separation is already implied by the bounds needs no branch, a pair with no
//! consistent relation prunes the node, and among the rest the pair with the
//! fewest options is branched first.

use std::time::Instant;

use super::formulation::FitModel;
use super::{fits_single, FitProblem, FitStats, FitVerdict, Orientation, Placement, SolverConfig};

const UNSET: u8 = u8::MAX;
const IMPLIED: u8 = u8::MAX - 1;
/// How often (in nodes) the clock is read.
const CLOCK_STRIDE: u64 = 512;

/// Decides whether the cartons fit, within `cfg.time_limit`.
///
/// # Panics
///
/// If the problem has no cartons.
pub fn solve_fit(problem: &FitProblem, cfg: &SolverConfig) -> FitVerdict {
    assert!(problem.n() >= 1, "solve_fit needs at least one carton");
    let start = Instant::now();
    let done = |nodes: u64| FitStats {
        nodes,
        elapsed: start.elapsed(),
    };

    let eps = problem.tolerance();
    for (i, c) in problem.cartons.iter().enumerate() {
        if !fits_single(c, &problem.box_dims, problem.is_ho(i)) {
            return FitVerdict::no_fit(done(0));
        }
    }
    let total: f64 = problem.cartons.iter().map(|c| c.dims.volume()).sum();
    if total > problem.box_dims.volume() * (1.0 + 1e-12) + eps {
        return FitVerdict::no_fit(done(0));
    }

    if cfg.use_greedy {
        if let Some(witness) = super::greedy::greedy_pack(problem) {
            return FitVerdict::fit(witness, done(0));
        }
    }

    let model = FitModel::build(problem);
    let mut search = Search::new(problem, &model, cfg, start);
    if !search.aggregate_bounds_ok(&search.root()) || !search.dff_ok(&search.root()) {
        return FitVerdict::no_fit(done(0));
    }
    let root = search.root();
    let result = search.expand(root);
    let stats = done(search.nodes);
    match result {
        Step::Found(node, lo) => {
            let mut witness: Vec<Placement> = (0..model.n())
                .map(|m| Placement {
                    carton: model.order[m],
                    orientation: search.orients[m][node.orient[m] as usize].0,
                    lbb: lo[m],
                })
                .collect();
            witness.sort_by_key(|p| p.carton);
            FitVerdict::fit(witness, stats)
        }
        Step::Exhausted => FitVerdict::no_fit(stats),
        Step::Aborted => FitVerdict {
            outcome: super::FitOutcome::TimedOut,
            witness: None,
            stats,
        },
    }
}

enum Step {
    Found(Node, Vec<[f64; 3]>),
    Exhausted,
    Aborted,
}

#[derive(Clone)]
struct Node {
    /// Index into `Search::orients[m]`, or `UNSET`.
    orient: Vec<u8>,
    /// Row-major `n x n`; only `i < k` entries are used. Relation codes are
    /// `2 * axis + dir`, `dir = 0` meaning carton `i` comes first.
    rel: Vec<u8>,
    oriented: usize,
}

struct Bounds {
    lo: Vec<[f64; 3]>,
    hi: Vec<[f64; 3]>,
}

struct Search<'a> {
    n: usize,
    w: [f64; 3],
    eps: f64,
    /// Allowed orientations per model position, with their extents.
    orients: Vec<Vec<(Orientation, [f64; 3])>>,
    br: Vec<bool>,
    /// Model positions `m` with `x_m <= x_{m+1}`.
    ordered: Vec<usize>,
    anchor: Option<usize>,
    anchor_vertical: bool,
    /// Order in which cartons are introduced.
    seq: Vec<usize>,
    /// Dual feasible functions per axis for the volume bound.
    dffs: [Vec<Dff>; 3],
    nodes: u64,
    start: Instant,
    cfg: &'a SolverConfig,
}

impl<'a> Search<'a> {
    fn new(problem: &FitProblem, model: &FitModel, cfg: &'a SolverConfig, start: Instant) -> Self {
        let n = model.n();
        let w = problem.box_array();
        let eps = problem.tolerance();
        let orients: Vec<Vec<(Orientation, [f64; 3])>> = model
            .order
            .iter()
            .map(|&i| {
                problem
                    .orientations(i)
                    .into_iter()
                    .map(|o| (o, o.extents(&problem.cartons[i].dims)))
                    .filter(|(_, e)| (0..3).all(|a| e[a] <= w[a] + eps))
                    .collect()
            })
            .collect();
        let br: Vec<bool> = model.order.iter().map(|&i| problem.is_br(i)).collect();
        let volume = |m: usize| problem.cartons[model.order[m]].dims.volume();
        let mut seq: Vec<usize> = (0..n).collect();
        seq.sort_by(|&a, &b| volume(b).total_cmp(&volume(a)).then(a.cmp(&b)));
        let dffs = [0, 1, 2].map(|a| {
            let ext: Vec<f64> = orients.iter().flatten().map(|(_, e)| e[a]).collect();
            axis_dffs(w[a], &ext)
        });
        Search {
            dffs,
            n,
            w,
            eps,
            orients,
            ordered: if cfg.use_identical_symmetry {
                model.identical.clone()
            } else {
                Vec::new()
            },
            anchor: cfg.use_orthant_symmetry.then_some(model.anchor),
            anchor_vertical: !br.iter().any(|&b| b),
            br,
            seq,
            nodes: 0,
            start,
            cfg,
        }
    }

    fn root(&self) -> Node {
        Node {
            orient: vec![UNSET; self.n],
            rel: vec![UNSET; self.n * self.n],
            oriented: 0,
        }
    }

    fn ext(&self, node: &Node, m: usize) -> Option<[f64; 3]> {
        let o = node.orient[m];
        (o != UNSET).then(|| self.orients[m][o as usize].1)
    }

    /// Cartons that cannot share a slab with each other along the two other
    /// axes must line up along this one.
    fn aggregate_bounds_ok(&self, node: &Node) -> bool {
        for axis in 0..3 {
            let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut sum = 0.0;
            for m in 0..self.n {
                let wide = |e: &[f64; 3]| 2.0 * e[b] > self.w[b] + self.eps && 2.0 * e[c] > self.w[c] + self.eps;
                let contribution = match self.ext(node, m) {
                    Some(e) => wide(&e).then_some(e[axis]),
                    None => {
                        let mut min_len: Option<f64> = None;
                        for (_, e) in &self.orients[m] {
                            if !wide(e) {
                                min_len = None;
                                break;
                            }
                            min_len = Some(min_len.map_or(e[axis], |v: f64| v.min(e[axis])));
                        }
                        min_len
                    }
                };
                sum += contribution.unwrap_or(0.0);
            }
            if sum > self.w[axis] + self.eps {
                return false;
            }
        }
        true
    }

    /// Bounds on the lbb coordinates of oriented cartons, or `None` if the
    /// fixed decisions are inconsistent.
    fn propagate(&self, node: &Node) -> Option<Bounds> {
        let n = self.n;
        let mut lo = vec![[0.0f64; 3]; n];
        let mut hi = vec![[0.0f64; 3]; n];
        let ext: Vec<Option<[f64; 3]>> = (0..n).map(|m| self.ext(node, m)).collect();
        for m in 0..n {
            if let Some(e) = ext[m] {
                for a in 0..3 {
                    hi[m][a] = self.w[a] - e[a];
                }
                if self.br[m] {
                    hi[m][2] = 0.0;
                }
                if self.anchor == Some(m) {
                    hi[m][0] = hi[m][0].min(self.w[0] / 2.0);
                    hi[m][1] = hi[m][1].min(self.w[1] / 2.0);
                    if self.anchor_vertical {
                        hi[m][2] = hi[m][2].min(self.w[2] / 2.0);
                    }
                }
            }
        }

        // (axis, before, after, gap): x_after >= x_before + gap
        let mut edges: Vec<(usize, usize, usize, f64)> = Vec::new();
        for i in 0..n {
            for k in i + 1..n {
                let r = node.rel[i * n + k];
                if r == UNSET || r == IMPLIED {
                    continue;
                }
                let axis = (r / 2) as usize;
                let (b, a) = if r.is_multiple_of(2) { (i, k) } else { (k, i) };
                edges.push((axis, b, a, ext[b].expect("related cartons are oriented")[axis]));
            }
        }
        for &m in &self.ordered {
            if ext[m].is_some() && ext[m + 1].is_some() {
                edges.push((0, m, m + 1, 0.0));
            }
        }

        let mut passes = 0;
        loop {
            let mut changed = false;
            for &(axis, b, a, gap) in &edges {
                if lo[b][axis] + gap > lo[a][axis] + self.eps * 0.5 {
                    lo[a][axis] = lo[b][axis] + gap;
                    changed = true;
                }
                if hi[a][axis] - gap < hi[b][axis] - self.eps * 0.5 {
                    hi[b][axis] = hi[a][axis] - gap;
                    changed = true;
                }
            }
            for m in 0..n {
                if ext[m].is_some() && (0..3).any(|a| lo[m][a] > hi[m][a] + self.eps) {
                    return None;
                }
            }
            if !changed {
                break;
            }
            passes += 1;
            if passes > n + 1 {
                // Only a cycle of strictly positive gaps keeps growing.
                return None;
            }
        }
        Some(Bounds { lo, hi })
    }

    fn out_of_time(&mut self) -> bool {
        self.nodes.is_multiple_of(CLOCK_STRIDE) && self.start.elapsed() >= self.cfg.time_limit
    }

    fn expand(&mut self, mut node: Node) -> Step {
        self.nodes += 1;
        if self.out_of_time() {
            return Step::Aborted;
        }
        let Some(bounds) = self.propagate(&node) else {
            return Step::Exhausted;
        };
        if !self.aggregate_bounds_ok(&node) {
            return Step::Exhausted;
        }

        // Resolve pending pairs among oriented cartons.
        let n = self.n;
        let mut best: Option<(usize, usize, Vec<(u8, f64)>)> = None;
        for i in 0..n {
            let Some(ei) = self.ext(&node, i) else { continue };
            for k in i + 1..n {
                if node.rel[i * n + k] != UNSET {
                    continue;
                }
                let Some(ek) = self.ext(&node, k) else { continue };
                let mut options: Vec<(u8, f64)> = Vec::with_capacity(6);
                let mut implied = false;
                for r in 0u8..6 {
                    let axis = (r / 2) as usize;
                    let (b, eb, a) = if r % 2 == 0 { (i, ei, k) } else { (k, ek, i) };
                    if bounds.hi[b][axis] + eb[axis] <= bounds.lo[a][axis] + self.eps {
                        implied = true;
                        break;
                    }
                    let slack = bounds.hi[a][axis] - (bounds.lo[b][axis] + eb[axis]);
                    if slack >= -self.eps {
                        options.push((r, slack));
                    }
                }
                if implied {
                    node.rel[i * n + k] = IMPLIED;
                    continue;
                }
                if options.is_empty() {
                    return Step::Exhausted;
                }
                if best.as_ref().is_none_or(|b| options.len() < b.2.len()) {
                    best = Some((i, k, options));
                }
            }
        }

        if let Some((i, k, mut options)) = best {
            // Leftmost positions already separating the pair come first, then
            // the roomiest relation.
            let holds = |r: u8| {
                let axis = (r / 2) as usize;
                let (b, a) = if r.is_multiple_of(2) { (i, k) } else { (k, i) };
                let eb = self.ext(&node, b).expect("oriented");
                bounds.lo[b][axis] + eb[axis] <= bounds.lo[a][axis] + self.eps
            };
            options.sort_by(|x, y| holds(y.0).cmp(&holds(x.0)).then(y.1.total_cmp(&x.1)));
            if node.oriented == n && self.pending_clear(&node, &bounds) {
                return Step::Found(node, bounds.lo);
            }
            for (r, _) in options {
                let mut child = node.clone();
                child.rel[i * n + k] = r;
                match self.expand(child) {
                    Step::Exhausted => continue,
                    other => return other,
                }
            }
            return Step::Exhausted;
        }

        if node.oriented == n {
            return Step::Found(node, bounds.lo);
        }

        let m = self.seq[node.oriented];
        for o in 0..self.orients[m].len() {
            let mut child = node.clone();
            child.orient[m] = o as u8;
            child.oriented += 1;
            match self.expand(child) {
                Step::Exhausted => continue,
                other => return other,
            }
        }
        Step::Exhausted
    }

    /// With every carton oriented, the least positions are a packing as soon
    /// as the still undecided pairs happen not to overlap there.
    fn pending_clear(&self, node: &Node, bounds: &Bounds) -> bool {
        let n = self.n;
        for i in 0..n {
            let ei = self.ext(node, i).expect("oriented");
            for k in i + 1..n {
                if node.rel[i * n + k] != UNSET {
                    continue;
                }
                let ek = self.ext(node, k).expect("oriented");
                let (li, lk) = (bounds.lo[i], bounds.lo[k]);
                let apart = (0..3).any(|a| li[a] + ei[a] <= lk[a] + self.eps || lk[a] + ek[a] <= li[a] + self.eps);
                if !apart {
                    return false;
                }
            }
        }
        true
    }

    /// Volume bound after mapping every axis through a dual feasible
    /// function: the transformed volumes must still fit the box. Cartons not
    /// yet oriented take their smallest transformed volume.
    fn dff_ok(&self, node: &Node) -> bool {
        let cap: f64 = self.w.iter().product();
        let slack = cap * 1e-9 + self.eps;
        for fa in &self.dffs[0] {
            for fb in &self.dffs[1] {
                for fc in &self.dffs[2] {
                    let mut sum = 0.0;
                    for m in 0..self.n {
                        let vol = |e: &[f64; 3]| fa.apply(e[0]) * fb.apply(e[1]) * fc.apply(e[2]);
                        sum += match self.ext(node, m) {
                            Some(e) => vol(&e),
                            None => self.orients[m]
                                .iter()
                                .map(|(_, e)| vol(e))
                                .fold(f64::INFINITY, f64::min),
                        };
                        if sum > cap + slack {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Dual feasible function on `[0, w]`: any extents that fit side by side
/// along an axis still fit after the mapping.
#[derive(Debug, Clone, Copy)]
enum Dff {
    Identity,
    /// Rounds down to multiples of `w / (k + 1)` unless already one.
    Step {
        k: f64,
        w: f64,
    },
    /// Extents above `w - t` become `w`; below `t` become zero.
    Threshold {
        t: f64,
        w: f64,
    },
}

impl Dff {
    fn apply(&self, x: f64) -> f64 {
        match *self {
            Dff::Identity => x,
            Dff::Step { k, w } => {
                let q = (k + 1.0) * x / w;
                if (q - q.round()).abs() <= 1e-9 {
                    x
                } else {
                    q.floor() * w / (k + 1.0)
                }
            }
            Dff::Threshold { t, w } => {
                let tol = w * 1e-12;
                if x > w - t + tol {
                    w
                } else if x < t - tol {
                    0.0
                } else {
                    x
                }
            }
        }
    }
}

/// Identity, three step functions and up to three thresholds taken from the
/// smallest extents that occur along the axis.
fn axis_dffs(w: f64, extents: &[f64]) -> Vec<Dff> {
    let mut out = vec![Dff::Identity];
    for k in 1..=3 {
        out.push(Dff::Step { k: k as f64, w });
    }
    let mut ts: Vec<f64> = extents.iter().copied().filter(|&e| e <= w / 2.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() <= w * 1e-12);
    // Larger thresholds zero out more small cartons and promote more big ones.
    for &t in ts.iter().rev().take(3) {
        out.push(Dff::Threshold { t, w });
    }
    out
}
