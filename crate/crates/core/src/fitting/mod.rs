//! Orthogonal packing feasibility: can a set of cartons fit in one box?
//!
//! Checks are tiered from cheap to exact:
//!
//! * [`fits_single`] and [`fits_stacking`] are closed-form tests,
//! * [`fits_exact_small`] enumerates orientations and pairwise separations for
//!   two or three cartons,
//! * [`solve_fit`] runs a branch-and-bound over the fitting model's binaries
//!   (carton orientations and pairwise relative positions) with interval
//!   propagation on the lbb coordinates,
//! * [`oracle::oracle_fit`] is an independent exhaustive search used to check
//!   the others.

mod formulation;
mod greedy;
pub mod oracle;
mod search;
mod small;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{Carton, Dims3, REL_TOLERANCE};

pub use formulation::{identical_key_eq, FitModel, ModelCounts};
pub use oracle::{oracle_fit, validate_witness};
pub use search::solve_fit;
pub use small::fits_exact_small;

/// Which special packing constraints are honored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackingRules {
    pub enforce_ho: bool,
    pub enforce_br: bool,
}

impl Default for PackingRules {
    fn default() -> Self {
        PackingRules {
            enforce_ho: true,
            enforce_br: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub cartons: Vec<Carton>,
    /// Inner (x, y, z) of the box, unsorted; z is vertical.
    pub box_dims: Dims3,
    pub rules: PackingRules,
}

impl FitProblem {
    pub fn new(cartons: Vec<Carton>, box_dims: Dims3) -> Self {
        FitProblem {
            cartons,
            box_dims,
            rules: PackingRules::default(),
        }
    }

    pub fn with_rules(mut self, rules: PackingRules) -> Self {
        self.rules = rules;
        self
    }

    pub fn n(&self) -> usize {
        self.cartons.len()
    }

    pub fn tolerance(&self) -> f64 {
        REL_TOLERANCE * self.box_dims.max().max(1.0)
    }

    pub(crate) fn is_ho(&self, i: usize) -> bool {
        self.rules.enforce_ho && self.cartons[i].height_oriented
    }

    pub(crate) fn is_br(&self, i: usize) -> bool {
        self.rules.enforce_br && self.cartons[i].bottom_resting
    }

    pub(crate) fn box_array(&self) -> [f64; 3] {
        self.box_dims.to_array()
    }

    /// Distinct orientations allowed for carton `i`.
    pub(crate) fn orientations(&self, i: usize) -> Vec<Orientation> {
        Orientation::allowed(&self.cartons[i], self.is_ho(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub time_limit: Duration,
    pub use_identical_symmetry: bool,
    pub use_orthant_symmetry: bool,
    /// Try a quick first-fit packing before the exact search.
    #[serde(default = "yes")]
    pub use_greedy: bool,
}

fn yes() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: Duration::from_secs(5),
            use_identical_symmetry: true,
            use_orthant_symmetry: true,
            use_greedy: true,
        }
    }
}

impl SolverConfig {
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = limit;
        self
    }

    pub fn with_greedy(mut self, on: bool) -> Self {
        self.use_greedy = on;
        self
    }

    pub fn with_symmetry(mut self, identical: bool, orthant: bool) -> Self {
        self.use_identical_symmetry = identical;
        self.use_orthant_symmetry = orthant;
        self
    }
}

/// A carton orientation: `dim_on_axis[a]` is the carton dimension (0 = length,
/// 1 = width, 2 = height) lying parallel to box axis `a` (0 = X, 1 = Y, 2 = Z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Orientation {
    pub dim_on_axis: [u8; 3],
}

const PERMUTATIONS: [[u8; 3]; 6] = [[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 0, 1], [1, 2, 0], [2, 1, 0]];

impl Orientation {
    pub const IDENTITY: Orientation = Orientation { dim_on_axis: [0, 1, 2] };

    pub fn all() -> impl Iterator<Item = Orientation> {
        PERMUTATIONS.iter().map(|&p| Orientation { dim_on_axis: p })
    }

    /// Extents along X, Y, Z.
    pub fn extents(&self, dims: &Dims3) -> [f64; 3] {
        let d = dims.to_array();
        [
            d[self.dim_on_axis[0] as usize],
            d[self.dim_on_axis[1] as usize],
            d[self.dim_on_axis[2] as usize],
        ]
    }

    pub fn keeps_height_vertical(&self) -> bool {
        self.dim_on_axis[2] == 2
    }

    /// The nine orientation binaries as `[dim][axis]`: rows are length, width,
    /// height; columns are X, Y, Z.
    pub fn binaries(&self) -> [[u8; 3]; 3] {
        let mut b = [[0u8; 3]; 3];
        for (axis, &dim) in self.dim_on_axis.iter().enumerate() {
            b[dim as usize][axis] = 1;
        }
        b
    }

    /// Orientations with pairwise distinct extent triples. A height-oriented
    /// carton keeps its height on Z, leaving two rotations.
    pub fn allowed(carton: &Carton, ho: bool) -> Vec<Orientation> {
        let mut out: Vec<Orientation> = Vec::with_capacity(6);
        let mut seen: Vec<[f64; 3]> = Vec::with_capacity(6);
        for o in Orientation::all() {
            if ho && !o.keeps_height_vertical() {
                continue;
            }
            let e = o.extents(&carton.dims);
            if !seen.contains(&e) {
                seen.push(e);
                out.push(o);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Index of the carton in the problem as given.
    pub carton: usize,
    pub orientation: Orientation,
    /// Left-back-bottom corner.
    pub lbb: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitOutcome {
    Fit,
    NoFit,
    TimedOut,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub nodes: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitVerdict {
    pub outcome: FitOutcome,
    pub witness: Option<Vec<Placement>>,
    pub stats: FitStats,
}

impl FitVerdict {
    pub(crate) fn fit(witness: Vec<Placement>, stats: FitStats) -> Self {
        FitVerdict {
            outcome: FitOutcome::Fit,
            witness: Some(witness),
            stats,
        }
    }

    pub(crate) fn no_fit(stats: FitStats) -> Self {
        FitVerdict {
            outcome: FitOutcome::NoFit,
            witness: None,
            stats,
        }
    }

    pub fn is_fit(&self) -> bool {
        self.outcome == FitOutcome::Fit
    }
}

/// Single-carton test. Free cartons compare sorted dims; height-oriented
/// cartons must keep their height under `z` and fit the footprint.
pub fn fits_single(carton: &Carton, box_dims: &Dims3, ho: bool) -> bool {
    let eps = REL_TOLERANCE * box_dims.max().max(1.0);
    if ho {
        carton.dims.c <= box_dims.c + eps && carton.dims.sorted_footprint().le_all(&box_dims.sorted_footprint(), eps)
    } else {
        carton.dims.sorted().le_all(&box_dims.sorted(), eps)
    }
}

/// Box dims in the frame used by the scan: footprint-sorted when the shipment
/// has height-oriented cartons, fully sorted otherwise.
pub fn scan_box_dims(box_dims: &Dims3, has_ho: bool) -> Dims3 {
    if has_ho {
        box_dims.sorted_footprint()
    } else {
        box_dims.sorted()
    }
}

fn scan_carton_dims(carton: &Carton, rules: PackingRules) -> Dims3 {
    if rules.enforce_ho && carton.height_oriented {
        carton.dims.sorted_footprint()
    } else {
        carton.dims.sorted()
    }
}

/// Every carton must fit the box on its own, upright if height-oriented.
/// Necessary for any packing.
pub fn fits_extents(cartons: &[Carton], box_dims: &Dims3, rules: PackingRules) -> bool {
    cartons
        .iter()
        .all(|c| fits_single(c, box_dims, rules.enforce_ho && c.height_oriented))
}

/// Stack all cartons along one axis of the box. When more than one carton is
/// bottom-resting the vertical stack is ruled out. Includes a per-carton
/// extent check, so `true` is a proof of fit.
///
/// Without height-oriented or bottom-resting cartons everything is compared in
/// the fully sorted frame. Otherwise the box keeps `z` vertical (footprint
/// sorted) and every carton lies in its scan frame with its third extent
/// vertical, so floor contact and upright cartons are respected.
pub fn fits_stacking(cartons: &[Carton], box_dims: &Dims3, rules: PackingRules) -> bool {
    if cartons.is_empty() {
        return true;
    }
    let has_ho = rules.enforce_ho && cartons.iter().any(|c| c.height_oriented);
    let br = if rules.enforce_br {
        cartons.iter().filter(|c| c.bottom_resting).count()
    } else {
        0
    };
    let b = scan_box_dims(box_dims, has_ho || br > 0);
    let eps = REL_TOLERANCE * box_dims.max().max(1.0);
    let (mut sa, mut sb, mut sc) = (0.0, 0.0, 0.0);
    for c in cartons {
        let d = scan_carton_dims(c, rules);
        if !d.le_all(&b, eps) {
            return false;
        }
        sa += d.a;
        sb += d.b;
        sc += d.c;
    }
    sa <= b.a + eps || sb <= b.b + eps || (br <= 1 && sc <= b.c + eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(a: f64, b: f64, c: f64) -> Dims3 {
        Dims3::new(a, b, c).unwrap()
    }

    #[test]
    fn extents_let_free_cartons_stand_up_beside_upright_ones() {
        // The free carton only fits with its 5 side along z.
        let cartons = [Carton::new(d(2., 1., 5.)), Carton::new(d(2., 1., 5.)).ho()];
        assert!(fits_extents(&cartons, &d(3., 1., 10.), PackingRules::default()));
        assert!(!fits_extents(&cartons, &d(10., 3., 1.), PackingRules::default()));
    }

    #[test]
    fn single_examples() {
        let c = Carton::new(d(3., 7., 2.));
        assert!(fits_single(&c, &d(8., 3., 7.), false));
        let tall = Carton::new(d(1., 1., 3.)).ho();
        assert!(!fits_single(&tall, &d(3., 3., 1.), true));
        assert!(fits_single(&tall, &d(3., 3., 1.), false));
        assert!(fits_single(&Carton::new(d(5., 4., 1.)), &d(5., 4., 1.), false));
    }

    #[test]
    fn ho_single_matches_rotation_enumeration() {
        // Exhaustive check of the two height-preserving rotations against the formula.
        let tall = Carton::new(d(1., 1., 3.)).ho();
        for bx in [d(3., 3., 1.), d(1., 1., 3.), d(2., 1., 3.), d(1., 3., 1.)] {
            let brute = Orientation::allowed(&tall, true).iter().any(|o| {
                let e = o.extents(&tall.dims);
                e[0] <= bx.a && e[1] <= bx.b && e[2] <= bx.c
            });
            assert_eq!(brute, fits_single(&tall, &bx, true), "box {bx:?}");
        }
    }

    #[test]
    fn stacking_examples() {
        let rules = PackingRules::default();
        let two = vec![Carton::new(d(4., 2., 2.)); 2];
        assert!(fits_stacking(&two, &d(4., 4., 2.), rules));

        let br = vec![Carton::new(d(2., 1., 1.)).br(); 2];
        assert!(fits_stacking(&br, &d(2., 2., 1.), rules));

        let br_tall = vec![Carton::new(d(1., 1., 2.)).br(); 2];
        assert!(!fits_stacking(&br_tall, &d(1., 1., 4.), rules));
        let free = PackingRules {
            enforce_br: false,
            ..rules
        };
        assert!(fits_stacking(&br_tall, &d(1., 1., 4.), free));
    }

    #[test]
    fn orientation_binaries_are_a_permutation_matrix() {
        for o in Orientation::all() {
            let b = o.binaries();
            for k in 0..3 {
                assert_eq!(b[k].iter().sum::<u8>(), 1);
                assert_eq!((0..3).map(|r| b[r][k]).sum::<u8>(), 1);
            }
        }
        let cube = Carton::new(d(2., 2., 2.));
        assert_eq!(Orientation::allowed(&cube, false).len(), 1);
        let brick = Carton::new(d(3., 2., 1.));
        assert_eq!(Orientation::allowed(&brick, false).len(), 6);
        assert_eq!(Orientation::allowed(&brick, true).len(), 2);
    }
}
