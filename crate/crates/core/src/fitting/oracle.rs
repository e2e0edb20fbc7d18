//! Reference fitting check and witness validator.
//!
//! The oracle shares nothing with the branch-and-bound beyond the problem
//! type. It enumerates every orientation of every carton and every canonical
//! ("normal") position, where a coordinate along an axis is zero or a sum of
//! extents of other cartons along that axis. Any packing can be pushed
//! left/back/down until each coordinate is such a sum, so the search is exact.
//! Cost grows quickly with `n`; intended for five cartons or fewer.

use std::time::Instant;

use super::{FitProblem, FitStats, FitVerdict, Orientation, Placement};

#[derive(Clone, Copy)]
struct Cand {
    orientation: Orientation,
    lo: [f64; 3],
    hi: [f64; 3],
}

fn overlaps(a: &Cand, b: &Cand, eps: f64) -> bool {
    (0..3).all(|k| a.lo[k] < b.hi[k] - eps && b.lo[k] < a.hi[k] - eps)
}

fn dedup_sorted(v: &mut Vec<f64>, eps: f64) {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= eps);
}

pub fn oracle_fit(problem: &FitProblem) -> FitVerdict {
    let start = Instant::now();
    let n = problem.n();
    let eps = problem.tolerance();
    let w = problem.box_array();

    let orients: Vec<Vec<Orientation>> = (0..n).map(|i| problem.orientations(i)).collect();
    let extents_on = |k: usize, axis: usize| -> Vec<f64> {
        let mut v: Vec<f64> = orients[k]
            .iter()
            .map(|o| o.extents(&problem.cartons[k].dims)[axis])
            .collect();
        dedup_sorted(&mut v, eps);
        v
    };

    let mut cands: Vec<Vec<Cand>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut coords: [Vec<f64>; 3] = [vec![0.0], vec![0.0], vec![0.0]];
        for (axis, set) in coords.iter_mut().enumerate() {
            if axis == 2 && problem.is_br(i) {
                continue;
            }
            for k in (0..n).filter(|&k| k != i) {
                let ext = extents_on(k, axis);
                let mut grown = set.clone();
                for &s in set.iter() {
                    for &e in &ext {
                        if s + e <= w[axis] + eps {
                            grown.push(s + e);
                        }
                    }
                }
                dedup_sorted(&mut grown, eps);
                *set = grown;
            }
        }
        let mut list = Vec::new();
        for &o in &orients[i] {
            let e = o.extents(&problem.cartons[i].dims);
            for &x in &coords[0] {
                if x + e[0] > w[0] + eps {
                    continue;
                }
                for &y in &coords[1] {
                    if y + e[1] > w[1] + eps {
                        continue;
                    }
                    for &z in &coords[2] {
                        if z + e[2] > w[2] + eps {
                            continue;
                        }
                        list.push(Cand {
                            orientation: o,
                            lo: [x, y, z],
                            hi: [x + e[0], y + e[1], z + e[2]],
                        });
                    }
                }
            }
        }
        cands.push(list);
    }

    // Largest cartons first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        problem.cartons[b]
            .dims
            .volume()
            .total_cmp(&problem.cartons[a].dims.volume())
    });

    let mut placed: Vec<(usize, Cand)> = Vec::with_capacity(n);
    let mut nodes = 0u64;
    let found = dfs(&order, &cands, &mut placed, &mut nodes, eps);
    let stats = FitStats {
        nodes,
        elapsed: start.elapsed(),
    };
    if found {
        let mut witness: Vec<Placement> = placed
            .iter()
            .map(|(i, c)| Placement {
                carton: *i,
                orientation: c.orientation,
                lbb: c.lo,
            })
            .collect();
        witness.sort_by_key(|p| p.carton);
        FitVerdict::fit(witness, stats)
    } else {
        FitVerdict::no_fit(stats)
    }
}

fn dfs(order: &[usize], cands: &[Vec<Cand>], placed: &mut Vec<(usize, Cand)>, nodes: &mut u64, eps: f64) -> bool {
    let t = placed.len();
    if t == order.len() {
        return true;
    }
    let i = order[t];
    for c in &cands[i] {
        if placed.iter().any(|(_, p)| overlaps(c, p, eps)) {
            continue;
        }
        *nodes += 1;
        placed.push((i, *c));
        // Every carton still to come needs at least one free spot.
        let viable = order[t + 1..].iter().all(|&k| {
            cands[k]
                .iter()
                .any(|q| placed.iter().all(|(_, p)| !overlaps(q, p, eps)))
        });
        if viable && dfs(order, cands, placed, nodes, eps) {
            return true;
        }
        placed.pop();
    }
    false
}

/// Re-checks a witness against every active constraint: orientation matches
/// the carton's rules, containment, pairwise nonoverlap, and floor contact for
/// bottom-resting cartons.
pub fn validate_witness(problem: &FitProblem, witness: &[Placement]) -> Result<(), String> {
    let n = problem.n();
    let eps = problem.tolerance();
    let w = problem.box_array();
    if witness.len() != n {
        return Err(format!("witness has {} placements for {n} cartons", witness.len()));
    }
    let mut seen = vec![false; n];
    let mut boxes = Vec::with_capacity(n);
    for p in witness {
        if p.carton >= n || seen[p.carton] {
            return Err(format!("carton index {} missing or repeated", p.carton));
        }
        seen[p.carton] = true;
        let mut dims = p.orientation.dim_on_axis;
        dims.sort_unstable();
        if dims != [0, 1, 2] {
            return Err(format!("carton {}: orientation is not a permutation", p.carton));
        }
        if problem.is_ho(p.carton) && !p.orientation.keeps_height_vertical() {
            return Err(format!("carton {}: height-oriented carton tipped over", p.carton));
        }
        let e = p.orientation.extents(&problem.cartons[p.carton].dims);
        for a in 0..3 {
            if p.lbb[a] < -eps || p.lbb[a] + e[a] > w[a] + eps {
                return Err(format!("carton {} sticks out along axis {a}", p.carton));
            }
        }
        if problem.is_br(p.carton) && p.lbb[2] > eps {
            return Err(format!("carton {}: bottom-resting carton is lifted", p.carton));
        }
        boxes.push((
            p.carton,
            Cand {
                orientation: p.orientation,
                lo: p.lbb,
                hi: [p.lbb[0] + e[0], p.lbb[1] + e[1], p.lbb[2] + e[2]],
            },
        ));
    }
    for (x, (i, a)) in boxes.iter().enumerate() {
        for (k, b) in &boxes[x + 1..] {
            if overlaps(a, b, eps) {
                return Err(format!("cartons {i} and {k} overlap"));
            }
        }
    }
    Ok(())
}
