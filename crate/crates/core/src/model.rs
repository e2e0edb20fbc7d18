//! Domain types for shipments, cartons and candidate boxes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative tolerance applied to length comparisons. The absolute tolerance
/// for a problem is this factor times the largest box dimension involved.
pub const REL_TOLERANCE: f64 = 1e-9;

/// Three positive lengths. Which component means what depends on context:
/// for cartons `c` is the height (the vertical extent when height-oriented),
/// for boxes `(a, b, c)` are the inner length, width and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims3 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Dims3 {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let d = Dims3 { a, b, c };
        if !d.is_valid() {
            return Err(invalid(format!(
                "dimensions must be finite and positive, got ({a}, {b}, {c})"
            )));
        }
        Ok(d)
    }

    /// Builds without validation. Callers must guarantee positivity.
    pub const fn new_unchecked(a: f64, b: f64, c: f64) -> Self {
        Dims3 { a, b, c }
    }

    pub fn is_valid(&self) -> bool {
        [self.a, self.b, self.c].iter().all(|v| v.is_finite() && *v > 0.0)
    }

    pub fn volume(&self) -> f64 {
        self.a * self.b * self.c
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Dims3 {
            a: v[0],
            b: v[1],
            c: v[2],
        }
    }

    pub fn max(&self) -> f64 {
        self.a.max(self.b).max(self.c)
    }

    pub fn sorted(self) -> Self {
        sort3(self)
    }

    /// Length and width sorted nonincreasing, height kept in place.
    pub fn sorted_footprint(self) -> Self {
        let (a, b) = sort2(self.a, self.b);
        Dims3 { a, b, c: self.c }
    }

    /// Componentwise `self <= other` up to `eps`.
    pub fn le_all(&self, other: &Dims3, eps: f64) -> bool {
        self.a <= other.a + eps && self.b <= other.b + eps && self.c <= other.c + eps
    }
}

/// Nonincreasing permutation of `d`.
pub fn sort3(d: Dims3) -> Dims3 {
    let mut v = d.to_array();
    v.sort_by(|x, y| y.total_cmp(x));
    Dims3::from_array(v)
}

pub(crate) fn sort2(x: f64, y: f64) -> (f64, f64) {
    if x >= y {
        (x, y)
    } else {
        (y, x)
    }
}

/// Index of the first value `>= w` in a nondecreasing slice, or `values.len()`
/// when every value is smaller. Zero-based; add one for the 1-based
/// convention where "none" is `N + 1`.
pub fn search_sorted_first(values: &[f64], w: f64) -> usize {
    values.partition_point(|v| *v < w)
}

/// A rigid item packed as an axis-aligned cuboid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Carton {
    pub dims: Dims3,
    /// The `c` component must stay vertical.
    #[serde(default)]
    pub height_oriented: bool,
    /// Must sit on the box floor.
    #[serde(default)]
    pub bottom_resting: bool,
    #[serde(default)]
    pub item_id: Option<u64>,
}

impl Carton {
    pub fn new(dims: Dims3) -> Self {
        Carton {
            dims,
            height_oriented: false,
            bottom_resting: false,
            item_id: None,
        }
    }

    pub fn ho(mut self) -> Self {
        self.height_oriented = true;
        self
    }

    pub fn br(mut self) -> Self {
        self.bottom_resting = true;
        self
    }

    /// Sorted dims used by the scan and stacking checks: fully sorted for free
    /// cartons, footprint-only for height-oriented ones.
    pub fn scan_dims(&self) -> Dims3 {
        if self.height_oriented {
            self.dims.sorted_footprint()
        } else {
            self.dims.sorted()
        }
    }
}

/// A deformable item. Only its volume matters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldableItem {
    pub dims: Dims3,
    #[serde(default)]
    pub item_id: Option<u64>,
}

impl FoldableItem {
    pub fn new(dims: Dims3) -> Self {
        FoldableItem { dims, item_id: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shipment {
    pub id: u64,
    pub cartons: Vec<Carton>,
    pub foldables: Vec<FoldableItem>,
}

impl Shipment {
    pub fn new(id: u64, cartons: Vec<Carton>, foldables: Vec<FoldableItem>) -> Result<Self> {
        let s = Shipment { id, cartons, foldables };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cartons.is_empty() && self.foldables.is_empty() {
            return Err(invalid(format!("shipment {} has no items", self.id)));
        }
        let all_dims = self
            .cartons
            .iter()
            .map(|c| c.dims)
            .chain(self.foldables.iter().map(|f| f.dims));
        for d in all_dims {
            if !d.is_valid() {
                return Err(invalid(format!(
                    "shipment {} has a nonpositive item dimension",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn liquid_volume(&self) -> f64 {
        liquid_volume(self)
    }

    pub fn ho_count(&self) -> usize {
        self.cartons.iter().filter(|c| c.height_oriented).count()
    }

    pub fn br_count(&self) -> usize {
        self.cartons.iter().filter(|c| c.bottom_resting).count()
    }
}

/// Sum of all item outer volumes, cartons and foldables alike.
pub fn liquid_volume(s: &Shipment) -> f64 {
    let rigid: f64 = s.cartons.iter().map(|c| c.dims.volume()).sum();
    let soft: f64 = s.foldables.iter().map(|f| f.dims.volume()).sum();
    rigid + soft
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateBox {
    pub id: u64,
    pub inner: Dims3,
    pub volume: f64,
}

impl CandidateBox {
    pub fn new(id: u64, inner: Dims3) -> Result<Self> {
        if !inner.is_valid() {
            return Err(invalid(format!("box {id} has a nonpositive dimension")));
        }
        Ok(CandidateBox {
            id,
            inner,
            volume: inner.volume(),
        })
    }
}

/// Candidate boxes sorted by nondecreasing inner volume, plus the indices of
/// the boxes that must appear in every suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    boxes: Vec<CandidateBox>,
    locked: Vec<usize>,
}

impl BoxSet {
    /// Stable-sorts by volume and rejects duplicate ids.
    pub fn new(mut boxes: Vec<CandidateBox>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(boxes.len());
        for b in &boxes {
            if !seen.insert(b.id) {
                return Err(invalid(format!("duplicate box id {}", b.id)));
            }
            if !b.inner.is_valid() {
                return Err(invalid(format!("box {} has a nonpositive dimension", b.id)));
            }
        }
        boxes.sort_by(|x, y| x.volume.total_cmp(&y.volume));
        Ok(BoxSet {
            boxes,
            locked: Vec::new(),
        })
    }

    pub fn boxes(&self) -> &[CandidateBox] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn get(&self, j: usize) -> &CandidateBox {
        &self.boxes[j]
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.boxes.iter().map(|b| b.volume).collect()
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.boxes.iter().position(|b| b.id == id)
    }

    pub fn locked(&self) -> &[usize] {
        &self.locked
    }

    /// Locks boxes by id, keeping the given order.
    pub fn set_locked_ids(&mut self, ids: &[u64]) -> Result<()> {
        let mut locked = Vec::with_capacity(ids.len());
        for &id in ids {
            let j = self
                .index_of(id)
                .ok_or_else(|| invalid(format!("locked box id {id} is not a candidate")))?;
            if locked.contains(&j) {
                return Err(invalid(format!("box id {id} locked twice")));
            }
            locked.push(j);
        }
        self.locked = locked;
        Ok(())
    }

    pub fn locked_ids(&self) -> Vec<u64> {
        self.locked.iter().map(|&j| self.boxes[j].id).collect()
    }

    /// Absolute comparison tolerance derived from the largest box dimension.
    pub fn tolerance(&self) -> f64 {
        let m = self.boxes.iter().map(|b| b.inner.max()).fold(0.0_f64, f64::max);
        REL_TOLERANCE * m.max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(a: f64, b: f64, c: f64) -> Dims3 {
        Dims3::new(a, b, c).unwrap()
    }

    #[test]
    fn sort3_examples() {
        assert_eq!(sort3(d(3., 7., 2.)), d(7., 3., 2.));
        assert_eq!(sort3(d(5., 5., 5.)), d(5., 5., 5.));
        assert_eq!(sort3(d(1., 2., 3.)), d(3., 2., 1.));
    }

    #[test]
    fn liquid_volume_examples() {
        let s = Shipment::new(
            1,
            vec![Carton::new(d(2., 3., 4.))],
            vec![FoldableItem {
                dims: d(1., 1., 1.),
                item_id: None,
            }],
        )
        .unwrap();
        assert_eq!(liquid_volume(&s), 25.0);

        let s = Shipment::new(
            2,
            vec![],
            vec![FoldableItem {
                dims: d(2., 2., 2.),
                item_id: None,
            }],
        )
        .unwrap();
        assert_eq!(liquid_volume(&s), 8.0);

        let s = Shipment::new(3, vec![Carton::new(d(1., 1., 1.)); 3], vec![]).unwrap();
        assert_eq!(liquid_volume(&s), 3.0);
    }

    #[test]
    fn search_sorted_first_examples() {
        let v = [1.0, 2.0, 4.0, 8.0];
        // zero-based; the 1-based answers are 3, 5 (= N + 1) and 1
        assert_eq!(search_sorted_first(&v, 3.0) + 1, 3);
        assert_eq!(search_sorted_first(&v, 9.0) + 1, 5);
        assert_eq!(search_sorted_first(&v, 1.0) + 1, 1);
    }

    #[test]
    fn rejects_bad_dims_and_empty_shipments() {
        assert!(Dims3::new(0.0, 1.0, 1.0).is_err());
        assert!(Dims3::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(Shipment::new(1, vec![], vec![]).is_err());
    }

    #[test]
    fn box_set_sorts_by_volume_and_locks() {
        let boxes = vec![
            CandidateBox::new(1, d(3., 3., 3.)).unwrap(),
            CandidateBox::new(2, d(2., 2., 1.)).unwrap(),
            CandidateBox::new(3, d(2., 2., 2.)).unwrap(),
        ];
        let mut set = BoxSet::new(boxes).unwrap();
        let ids: Vec<u64> = set.boxes().iter().map(|b| b.id).collect();
        assert_eq!(ids, vec![2, 3, 1]);
        set.set_locked_ids(&[1]).unwrap();
        assert_eq!(set.locked(), &[2]);
        assert!(set.set_locked_ids(&[99]).is_err());
    }

    #[test]
    fn duplicate_box_ids_rejected() {
        let boxes = vec![
            CandidateBox::new(1, d(3., 3., 3.)).unwrap(),
            CandidateBox::new(1, d(2., 2., 1.)).unwrap(),
        ];
        assert!(BoxSet::new(boxes).is_err());
    }

    #[test]
    fn paper_grid_has_5284_boxes() {
        let mut count = 0;
        for x in 5..=40 {
            for y in 4..=20 {
                for z in 1..=16 {
                    if x >= y && y >= z {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 5284);
        assert_eq!(crate::synth::candidate_grid(1).len(), 5284);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dims() -> impl Strategy<Value = Dims3> {
            (0.1f64..50.0, 0.1f64..50.0, 0.1f64..50.0).prop_map(|(a, b, c)| d(a, b, c))
        }

        proptest! {
            #[test]
            fn sort3_idempotent_permutation(x in dims()) {
                let s = sort3(x);
                prop_assert_eq!(sort3(s), s);
                prop_assert!(s.a >= s.b && s.b >= s.c);
                let mut orig = x.to_array();
                orig.sort_by(|p, q| q.total_cmp(p));
                prop_assert_eq!(orig, s.to_array());
            }

            #[test]
            fn liquid_volume_rotation_invariant(items in proptest::collection::vec(dims(), 1..6), rot in 0usize..6) {
                let permute = |d: Dims3| {
                    let v = d.to_array();
                    let p = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]][rot];
                    Dims3::from_array([v[p[0]], v[p[1]], v[p[2]]])
                };
                let a = Shipment::new(1, items.iter().map(|&d| Carton::new(d)).collect(), vec![]).unwrap();
                let b = Shipment::new(1, items.iter().map(|&d| Carton::new(permute(d))).collect(), vec![]).unwrap();
                let (va, vb) = (liquid_volume(&a), liquid_volume(&b));
                prop_assert!((va - vb).abs() <= 1e-9 * va.max(1.0));
            }
        }
    }
}
