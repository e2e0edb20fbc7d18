//! Extreme-point first-fit packing, run before the exact search.
//!
//! Cartons are placed one at a time at the lowest free corner point where an
//! allowed orientation fits, and each placement adds the three points at its
//! far corners. A handful of carton orders and point orders are tried. Any
//! packing found is a valid witness; failure proves nothing.

use super::{FitProblem, Orientation, Placement};

#[derive(Clone, Copy)]
struct Placed {
    lo: [f64; 3],
    hi: [f64; 3],
}

/// Axis priority when choosing among corner points: lowest along `.0` first,
/// then `.1`, then `.2`.
const POINT_ORDERS: [[usize; 3]; 3] = [[2, 1, 0], [2, 0, 1], [0, 1, 2]];

pub(crate) fn greedy_pack(problem: &FitProblem) -> Option<Vec<Placement>> {
    let n = problem.n();
    let dims: Vec<[f64; 3]> = problem.cartons.iter().map(|c| c.dims.sorted().to_array()).collect();
    let key_orders: [fn(&[f64; 3]) -> f64; 3] = [|d| d[0] * d[1] * d[2], |d| d[0], |d| d[0] * d[1]];
    for key in key_orders {
        let mut order: Vec<usize> = (0..n).collect();
        // Bottom-resting cartons first so they claim the floor.
        order.sort_by(|&a, &b| {
            problem
                .is_br(b)
                .cmp(&problem.is_br(a))
                .then(key(&dims[b]).total_cmp(&key(&dims[a])))
                .then(a.cmp(&b))
        });
        for axes in POINT_ORDERS {
            if let Some(w) = first_fit(problem, &order, axes) {
                return Some(w);
            }
        }
    }
    None
}

fn first_fit(problem: &FitProblem, order: &[usize], axes: [usize; 3]) -> Option<Vec<Placement>> {
    let w = problem.box_array();
    let eps = problem.tolerance();
    let mut points: Vec<[f64; 3]> = vec![[0.0; 3]];
    let mut placed: Vec<Placed> = Vec::with_capacity(order.len());
    let mut witness = Vec::with_capacity(order.len());
    for &i in order {
        let orients: Vec<(Orientation, [f64; 3])> = problem
            .orientations(i)
            .into_iter()
            .map(|o| (o, o.extents(&problem.cartons[i].dims)))
            .collect();
        points.sort_by(|p, q| {
            p[axes[0]]
                .total_cmp(&q[axes[0]])
                .then(p[axes[1]].total_cmp(&q[axes[1]]))
                .then(p[axes[2]].total_cmp(&q[axes[2]]))
        });
        let mut chosen = None;
        'points: for (pi, p) in points.iter().enumerate() {
            if problem.is_br(i) && p[2] > eps {
                continue;
            }
            for (o, e) in &orients {
                let hi = [p[0] + e[0], p[1] + e[1], p[2] + e[2]];
                if (0..3).any(|a| hi[a] > w[a] + eps) {
                    continue;
                }
                let clash = placed
                    .iter()
                    .any(|q| (0..3).all(|a| p[a] < q.hi[a] - eps && q.lo[a] < hi[a] - eps));
                if !clash {
                    chosen = Some((pi, *o, *p, hi));
                    break 'points;
                }
            }
        }
        let (pi, o, lo, hi) = chosen?;
        points.swap_remove(pi);
        placed.push(Placed { lo, hi });
        witness.push(Placement {
            carton: i,
            orientation: o,
            lbb: lo,
        });
        for a in 0..3 {
            let mut q = lo;
            q[a] = hi[a];
            if q[a] < w[a] - eps {
                points.push(q);
            }
        }
    }
    witness.sort_by_key(|p| p.carton);
    Some(witness)
}
