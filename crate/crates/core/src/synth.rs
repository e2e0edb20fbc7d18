//! Seeded generators for test corpora and desk-scale datasets.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::fitting::{FitProblem, PackingRules};
use crate::model::{CandidateBox, Carton, Dims3, Shipment};

/// Integral box grid `40 >= x >= 5`, `20 >= y >= 4`, `16 >= z >= 1` with
/// `x >= y >= z`. With `step == 1` this is the full 5,284-box candidate set.
pub fn candidate_grid(step: u32) -> Vec<CandidateBox> {
    candidate_grid_from(step, [5, 4, 1])
}

/// Like [`candidate_grid`] but walking each axis from `start` in `step`
/// increments. `candidate_grid_from(2, [6, 4, 2])` gives 714 boxes and still
/// reaches the largest box (40,20,16).
pub fn candidate_grid_from(step: u32, start: [u32; 3]) -> Vec<CandidateBox> {
    let step = step.max(1) as usize;
    let mut out = Vec::new();
    let mut id = 1u64;
    for x in (start[0]..=40).step_by(step) {
        for y in (start[1]..=20.min(x)).step_by(step) {
            for z in (start[2]..=16.min(y)).step_by(step) {
                let inner = Dims3::new_unchecked(x as f64, y as f64, z as f64);
                out.push(CandidateBox {
                    id,
                    inner,
                    volume: inner.volume(),
                });
                id += 1;
            }
        }
    }
    out
}

/// Catalog of items with integral sorted dims, no two alike. Sizes skew small
/// the way retail items do: lengths up to 30, widths up to 18, heights up to 14.
pub fn random_items<R: Rng>(rng: &mut R, count: usize) -> Vec<(u64, Dims3)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    let mut guard = 0;
    while out.len() < count && guard < count * 1000 {
        guard += 1;
        let skew = |rng: &mut R, hi: u32| -> u32 {
            let u: f64 = rng.gen();
            1 + ((hi as f64) * u * u) as u32 % hi
        };
        let mut d = [skew(rng, 30), skew(rng, 18), skew(rng, 14)];
        d.sort_unstable_by(|a, b| b.cmp(a));
        if seen.insert(d) {
            let dims = Dims3::new_unchecked(d[0] as f64, d[1] as f64, d[2] as f64);
            out.push((out.len() as u64 + 1, dims));
        }
    }
    out
}

/// Shipments of 1 to `max_cartons` cartons drawn from `items`: distinct
/// items, each with a quantity of at least one, never exceeding the total.
pub fn random_shipments<R: Rng>(
    rng: &mut R,
    items: &[(u64, Dims3)],
    count: usize,
    max_cartons: usize,
) -> Vec<Shipment> {
    assert!(!items.is_empty() && max_cartons >= 1);
    (0..count)
        .map(|s| {
            let total = rng.gen_range(1..=max_cartons);
            let unique = rng.gen_range(1..=total.min(items.len()));
            let picked: Vec<&(u64, Dims3)> = items.choose_multiple(rng, unique).collect();
            // Spread the extra units over the picked items.
            let mut qty = vec![1usize; unique];
            for _ in unique..total {
                qty[rng.gen_range(0..unique)] += 1;
            }
            let cartons = picked
                .iter()
                .zip(&qty)
                .flat_map(|(&&(id, dims), &q)| {
                    std::iter::repeat_n(
                        Carton {
                            item_id: Some(id),
                            ..Carton::new(dims)
                        },
                        q,
                    )
                })
                .collect();
            Shipment {
                id: s as u64 + 1,
                cartons,
                foldables: Vec::new(),
            }
        })
        .collect()
}

/// One instance of the fitting cross-check corpus: 2 to 5 cartons with dims
/// in 1..=6, box dims in 1..=10, about a quarter of instances with
/// height-oriented cartons and about 15% with bottom-resting ones.
/// Roughly a third of instances repeat one carton.
pub fn random_fit_problem<R: Rng>(rng: &mut R) -> FitProblem {
    let n = rng.gen_range(2..=5);
    let dim = |rng: &mut R, hi: u32| rng.gen_range(1..=hi) as f64;
    let mut cartons: Vec<Carton> = (0..n)
        .map(|_| Carton::new(Dims3::new_unchecked(dim(rng, 6), dim(rng, 6), dim(rng, 6))))
        .collect();
    if rng.gen_bool(0.35) {
        let src = rng.gen_range(0..n);
        let dst = (src + 1 + rng.gen_range(0..n - 1)) % n;
        cartons[dst] = cartons[src];
    }
    if rng.gen_bool(0.25) {
        let first = rng.gen_range(0..n);
        for (i, c) in cartons.iter_mut().enumerate() {
            c.height_oriented = i == first || rng.gen_bool(0.4);
        }
    }
    if rng.gen_bool(0.15) {
        let first = rng.gen_range(0..n);
        for (i, c) in cartons.iter_mut().enumerate() {
            c.bottom_resting = i == first || rng.gen_bool(0.4);
        }
    }
    let bx = Dims3::new_unchecked(dim(rng, 10), dim(rng, 10), dim(rng, 10));
    FitProblem::new(cartons, bx).with_rules(PackingRules::default())
}

/// Dense `n x m` matrix of integral costs drawn uniformly from `lo..=hi`.
pub fn uniform_costs<R: Rng>(rng: &mut R, n: usize, m: usize, lo: u32, hi: u32) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..m).map(|_| rng.gen_range(lo..=hi) as f64).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_sizes() {
        assert_eq!(candidate_grid(1).len(), 5284);
        let coarse = candidate_grid_from(2, [6, 4, 2]);
        assert_eq!(coarse.len(), 714);
        assert!(coarse.iter().any(|b| b.inner.to_array() == [40., 20., 16.]));
    }

    #[test]
    fn shipments_respect_carton_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let items = random_items(&mut rng, 200);
        assert_eq!(items.len(), 200);
        let sorted: BTreeSet<[u64; 3]> = items.iter().map(|(_, d)| d.to_array().map(|v| v as u64)).collect();
        assert_eq!(sorted.len(), 200);
        for s in random_shipments(&mut rng, &items, 500, 8) {
            assert!((1..=8).contains(&s.cartons.len()));
            s.validate().unwrap();
        }
    }
}
