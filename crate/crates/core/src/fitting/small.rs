use std::time::Instant;

use super::{FitProblem, FitStats, FitVerdict, Orientation, Placement};

/// Exact test for two or three cartons.
///
/// Two disjoint axis-aligned cuboids are separated along at least one axis, so
/// every packing picks, for each pair, an axis and an order along it. For a
/// fixed choice the tightest coordinates are longest-path sums of the
/// predecessors' extents (canonical positions), and the packing exists iff
/// those fit in the box. Enumerating orientations and separations is
/// therefore complete; with at most three cartons it stays small.
///
/// # Panics
///
/// If the problem has more than three cartons.
pub fn fits_exact_small(problem: &FitProblem) -> FitVerdict {
    let n = problem.n();
    assert!(n <= 3, "fits_exact_small handles at most three cartons, got {n}");
    let start = Instant::now();
    let eps = problem.tolerance();
    let w = problem.box_array();
    let mut nodes = 0u64;

    let orients: Vec<Vec<Orientation>> = (0..n)
        .map(|i| {
            problem
                .orientations(i)
                .into_iter()
                .filter(|o| {
                    let e = o.extents(&problem.cartons[i].dims);
                    (0..3).all(|a| e[a] <= w[a] + eps)
                })
                .collect()
        })
        .collect();
    let stats = |nodes| FitStats {
        nodes,
        elapsed: start.elapsed(),
    };
    if n == 0 {
        return FitVerdict::fit(Vec::new(), stats(0));
    }
    if orients.iter().any(Vec::is_empty) {
        return FitVerdict::no_fit(stats(0));
    }

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |k| (i, k))).collect();
    let br: Vec<bool> = (0..n).map(|i| problem.is_br(i)).collect();

    let mut pick = vec![0usize; n];
    loop {
        let ext: Vec<[f64; 3]> = (0..n)
            .map(|i| orients[i][pick[i]].extents(&problem.cartons[i].dims))
            .collect();

        // Separations that can possibly work for each pair on their own.
        let rel_options: Vec<Vec<u8>> = pairs
            .iter()
            .map(|&(i, k)| {
                (0u8..6)
                    .filter(|&r| {
                        let a = (r / 2) as usize;
                        ext[i][a] + ext[k][a] <= w[a] + eps
                    })
                    .collect()
            })
            .collect();

        if rel_options.iter().all(|o| !o.is_empty()) {
            let mut rel = vec![0usize; pairs.len()];
            loop {
                nodes += 1;
                if let Some(lbb) = tightest_positions(&pairs, &rel_options, &rel, &ext, &w, &br, eps) {
                    let witness = (0..n)
                        .map(|i| Placement {
                            carton: i,
                            orientation: orients[i][pick[i]],
                            lbb: lbb[i],
                        })
                        .collect();
                    return FitVerdict::fit(witness, stats(nodes));
                }
                if !advance(&mut rel, |p| rel_options[p].len()) {
                    break;
                }
            }
        }
        if !advance(&mut pick, |i| orients[i].len()) {
            break;
        }
    }
    FitVerdict::no_fit(stats(nodes))
}

/// Odometer increment. Returns false after the last combination.
fn advance(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for (p, d) in digits.iter_mut().enumerate() {
        *d += 1;
        if *d < radix(p) {
            return true;
        }
        *d = 0;
    }
    false
}

/// Minimal lbb coordinates under the chosen separations, or `None` if they
/// overflow the box, form a cycle, or lift a bottom-resting carton.
fn tightest_positions(
    pairs: &[(usize, usize)],
    rel_options: &[Vec<u8>],
    rel: &[usize],
    ext: &[[f64; 3]],
    w: &[f64; 3],
    br: &[bool],
    eps: f64,
) -> Option<Vec<[f64; 3]>> {
    let n = ext.len();
    let mut lo = vec![[0.0f64; 3]; n];
    for axis in 0..3 {
        let mut changed = true;
        let mut passes = 0;
        while changed {
            changed = false;
            passes += 1;
            if passes > n + 1 {
                return None;
            }
            for (p, &(i, k)) in pairs.iter().enumerate() {
                let r = rel_options[p][rel[p]];
                if (r / 2) as usize != axis {
                    continue;
                }
                let (before, after) = if r.is_multiple_of(2) { (i, k) } else { (k, i) };
                let need = lo[before][axis] + ext[before][axis];
                if need > lo[after][axis] {
                    lo[after][axis] = need;
                    changed = true;
                }
            }
        }
        for i in 0..n {
            if lo[i][axis] + ext[i][axis] > w[axis] + eps {
                return None;
            }
        }
    }
    if (0..n).any(|i| br[i] && lo[i][2] > eps) {
        return None;
    }
    Some(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{oracle_fit, validate_witness, FitOutcome};
    use crate::model::{Carton, Dims3};

    fn c(a: f64, b: f64, h: f64) -> Carton {
        Carton::new(Dims3::new(a, b, h).unwrap())
    }

    fn bx(a: f64, b: f64, h: f64) -> Dims3 {
        Dims3::new(a, b, h).unwrap()
    }

    #[test]
    fn two_cubes() {
        let p = FitProblem::new(vec![c(2., 2., 2.); 2], bx(4., 2., 2.));
        let v = fits_exact_small(&p);
        assert_eq!(v.outcome, FitOutcome::Fit);
        validate_witness(&p, v.witness.as_ref().unwrap()).unwrap();

        let p = FitProblem::new(vec![c(2., 2., 2.); 2], bx(3., 3., 3.));
        assert_eq!(fits_exact_small(&p).outcome, FitOutcome::NoFit);
    }

    #[test]
    fn three_bricks_need_no_stack() {
        let p = FitProblem::new(vec![c(2., 1., 1.); 3], bx(2., 2., 2.));
        let v = fits_exact_small(&p);
        assert_eq!(v.outcome, FitOutcome::Fit);
        validate_witness(&p, v.witness.as_ref().unwrap()).unwrap();
        assert_eq!(oracle_fit(&p).outcome, FitOutcome::Fit);
    }

    #[test]
    fn bottom_resting_pair_cannot_stack() {
        let p = FitProblem::new(vec![c(1., 1., 2.).br(); 2], bx(1., 1., 4.));
        assert_eq!(fits_exact_small(&p).outcome, FitOutcome::NoFit);
        let p = FitProblem::new(vec![c(1., 1., 2.).br(), c(1., 1., 2.)], bx(1., 1., 4.));
        assert_eq!(fits_exact_small(&p).outcome, FitOutcome::Fit);
    }

    #[test]
    fn ho_column_blocks_lying_carton() {
        // The free carton can stand up next to the column.
        let p = FitProblem::new(vec![c(1., 1., 3.).ho(), c(3., 1., 1.)], bx(3., 1., 3.));
        assert_eq!(fits_exact_small(&p).outcome, FitOutcome::Fit);
        assert_eq!(oracle_fit(&p).outcome, FitOutcome::Fit);
        // If it must lie flat, the column blocks the whole length.
        let p = FitProblem::new(vec![c(1., 1., 3.).ho(), c(3., 1., 1.).ho()], bx(3., 1., 3.));
        assert_eq!(fits_exact_small(&p).outcome, FitOutcome::NoFit);
        assert_eq!(oracle_fit(&p).outcome, FitOutcome::NoFit);
    }
}
