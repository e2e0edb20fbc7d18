//! Which shipments fit which candidate boxes.
//!
//! Boxes are scanned per shipment in volume order. Whenever a shipment fits a
//! box it also fits every box that box nests into, so those bits are set at
//! once and their solves skipped. Shipments run in parallel.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::fitting::{
    fits_exact_small, fits_extents, fits_single, fits_stacking, solve_fit, FitOutcome, FitProblem, PackingRules,
    SolverConfig,
};
use crate::model::{search_sorted_first, BoxSet, Carton, Dims3, Shipment};

/// For every box `j`, the boxes (of equal or larger volume, `j` first) that
/// it nests into under free rotation and under the two height-preserving
/// rotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestSets {
    pub free: Vec<Vec<usize>>,
    pub ho: Vec<Vec<usize>>,
}

pub fn compute_nest_sets(boxes: &BoxSet) -> NestSets {
    let eps = boxes.tolerance();
    let all = boxes.boxes();
    let (free, ho) = (0..all.len())
        .into_par_iter()
        .map(|j| {
            let dj = all[j].inner;
            let (sj, fj) = (dj.sorted(), dj.sorted_footprint());
            let mut free = vec![j];
            let mut ho = vec![j];
            for (k, bk) in all.iter().enumerate().skip(j + 1) {
                if sj.le_all(&bk.inner.sorted(), eps) {
                    free.push(k);
                    if fj.le_all(&bk.inner.sorted_footprint(), eps) {
                        ho.push(k);
                    }
                }
            }
            (free, ho)
        })
        .unzip();
    NestSets { free, ho }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitConfig {
    pub solver: SolverConfig,
    pub rules: PackingRules,
    /// Before a search on four or more cartons, require every pair and every
    /// triple of them to fit on its own.
    pub prescreen: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            solver: SolverConfig::default(),
            rules: PackingRules::default(),
            prescreen: true,
        }
    }
}

/// The check that decided a shipment/box pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Volume,
    Extents,
    FoldablesOnly,
    Single,
    Stacking,
    Small,
    Prescreen,
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCheck {
    pub outcome: FitOutcome,
    pub tier: Tier,
}

/// Tiered fit test of one shipment in one box: liquid volume, per-carton
/// extents, then the single, stacking, small exact, prescreen and search
/// tiers. Foldables only contribute volume.
pub fn check_shipment(shipment: &Shipment, box_dims: &Dims3, cfg: &FitConfig) -> PairCheck {
    let done = |outcome, tier| PairCheck { outcome, tier };
    let eps = crate::model::REL_TOLERANCE * box_dims.max().max(1.0);
    if shipment.liquid_volume() > box_dims.volume() * (1.0 + 1e-12) + eps {
        return done(FitOutcome::NoFit, Tier::Volume);
    }
    let cartons = &shipment.cartons;
    if cartons.is_empty() {
        return done(FitOutcome::Fit, Tier::FoldablesOnly);
    }
    if !fits_extents(cartons, box_dims, cfg.rules) {
        return done(FitOutcome::NoFit, Tier::Extents);
    }
    check_cartons(cartons, box_dims, cfg)
}

fn check_cartons(cartons: &[Carton], box_dims: &Dims3, cfg: &FitConfig) -> PairCheck {
    let done = |outcome, tier| PairCheck { outcome, tier };
    let yes = |b: bool| if b { FitOutcome::Fit } else { FitOutcome::NoFit };
    if cartons.len() == 1 {
        let c = &cartons[0];
        let ho = cfg.rules.enforce_ho && c.height_oriented;
        return done(yes(fits_single(c, box_dims, ho)), Tier::Single);
    }
    if fits_stacking(cartons, box_dims, cfg.rules) {
        return done(FitOutcome::Fit, Tier::Stacking);
    }
    let problem = FitProblem::new(cartons.to_vec(), *box_dims).with_rules(cfg.rules);
    if cartons.len() <= 3 {
        return done(fits_exact_small(&problem).outcome, Tier::Small);
    }
    if cfg.prescreen && !subsets_fit(cartons, box_dims, cfg.rules) {
        return done(FitOutcome::NoFit, Tier::Prescreen);
    }
    done(solve_fit(&problem, &cfg.solver).outcome, Tier::Search)
}

/// Every pair and triple of cartons fits by itself. Identical sub-multisets
/// are checked once.
fn subsets_fit(cartons: &[Carton], box_dims: &Dims3, rules: PackingRules) -> bool {
    let n = cartons.len();
    let mut seen: Vec<Vec<usize>> = Vec::new();
    let key = |idx: &[usize]| -> Vec<usize> {
        // Index of the first carton equal to each member, sorted.
        let mut k: Vec<usize> = idx
            .iter()
            .map(|&i| (0..=i).find(|&f| cartons[f] == cartons[i]).unwrap_or(i))
            .collect();
        k.sort_unstable();
        k
    };
    let mut fits = |idx: &[usize]| -> bool {
        let k = key(idx);
        if seen.contains(&k) {
            return true;
        }
        let sub: Vec<Carton> = idx.iter().map(|&i| cartons[i]).collect();
        let ok = fits_stacking(&sub, box_dims, rules)
            || fits_exact_small(&FitProblem::new(sub, *box_dims).with_rules(rules)).is_fit();
        if ok {
            seen.push(k);
        }
        ok
    };
    for i in 0..n {
        for k in i + 1..n {
            if !fits(&[i, k]) {
                return false;
            }
        }
    }
    for i in 0..n {
        for k in i + 1..n {
            for l in k + 1..n {
                if !fits(&[i, k, l]) {
                    return false;
                }
            }
        }
    }
    true
}

/// Sparse boolean shipments x boxes matrix, one sorted list of box indices
/// per shipment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitMatrix {
    pub rows: Vec<Vec<usize>>,
    pub n_boxes: usize,
}

impl FitMatrix {
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&j).is_ok()
    }

    pub fn set_bits(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Shipments with at least one fitting box, and their box lists.
    pub fn packable(&self) -> PackableSet {
        let mut w = Vec::new();
        let mut sets = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            if !row.is_empty() {
                w.push(i);
                sets.push(row.clone());
            }
        }
        PackableSet { w, sets }
    }
}

/// `w[r]` is the shipment index of packable shipment `r`; `sets[r]` is the
/// nonempty sorted list of boxes it fits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackableSet {
    pub w: Vec<usize>,
    pub sets: Vec<Vec<usize>>,
}

impl PackableSet {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// How many shipment/box pairs each tier decided, and how searches ended.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitCounts {
    pub by_tier: BTreeMap<Tier, u64>,
    pub reused: u64,
    pub nested: u64,
    pub searches_fit: u64,
    pub searches_no_fit: u64,
    pub searches_timed_out: u64,
}

impl FitCounts {
    fn merge(&mut self, other: &FitCounts) {
        for (t, c) in &other.by_tier {
            *self.by_tier.entry(*t).or_default() += c;
        }
        self.reused += other.reused;
        self.nested += other.nested;
        self.searches_fit += other.searches_fit;
        self.searches_no_fit += other.searches_no_fit;
        self.searches_timed_out += other.searches_timed_out;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub matrix: FitMatrix,
    pub packable: PackableSet,
    /// `(shipment_id, box_id)` of every search that hit the time limit. Those
    /// pairs are treated as not fitting.
    pub timeouts: Vec<(u64, u64)>,
    pub counts: FitCounts,
}

/// Columns already computed for an earlier box set over the same shipments,
/// looked up by box dims.
#[derive(Debug, Clone)]
pub struct KnownColumns<'a> {
    rules: PackingRules,
    by_dims: HashMap<[u64; 3], usize>,
    matrix: &'a FitMatrix,
}

fn dims_key(d: &Dims3) -> [u64; 3] {
    d.to_array().map(f64::to_bits)
}

impl<'a> KnownColumns<'a> {
    pub fn new(boxes: &BoxSet, matrix: &'a FitMatrix, rules: PackingRules) -> Self {
        let by_dims = boxes
            .boxes()
            .iter()
            .enumerate()
            .map(|(j, b)| (dims_key(&b.inner), j))
            .collect();
        KnownColumns { rules, by_dims, matrix }
    }
}

/// Builds the fit matrix. Timed-out searches count as no fit and are listed
/// in the report.
pub fn compute_fit_matrix(shipments: &[Shipment], boxes: &BoxSet, nests: &NestSets, cfg: &FitConfig) -> FitReport {
    compute_fit_matrix_with(shipments, boxes, nests, cfg, None)
}

/// As [`compute_fit_matrix`], copying bits for boxes whose dims appear in
/// `known` instead of solving them again. `known` must come from the same
/// shipment list and the same packing rules; otherwise it is ignored.
pub fn compute_fit_matrix_with(
    shipments: &[Shipment],
    boxes: &BoxSet,
    nests: &NestSets,
    cfg: &FitConfig,
    known: Option<&KnownColumns<'_>>,
) -> FitReport {
    let known = known.filter(|k| k.rules == cfg.rules && k.matrix.rows.len() == shipments.len());
    let reuse: Vec<Option<usize>> = boxes
        .boxes()
        .iter()
        .map(|b| known.and_then(|k| k.by_dims.get(&dims_key(&b.inner)).copied()))
        .collect();
    let volumes = boxes.volumes();
    let eps = boxes.tolerance();

    let results: Vec<(Vec<usize>, Vec<(u64, u64)>, FitCounts)> = shipments
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut counts = FitCounts::default();
            let mut timeouts = Vec::new();
            let mut bits = vec![false; boxes.len()];
            let j0 = search_sorted_first(&volumes, s.liquid_volume() - eps);
            if s.cartons.is_empty() {
                bits[j0..].iter_mut().for_each(|b| *b = true);
            } else {
                let upright = (cfg.rules.enforce_ho && s.ho_count() > 0) || (cfg.rules.enforce_br && s.br_count() > 0);
                let closure = if upright { &nests.ho } else { &nests.free };
                for j in j0..boxes.len() {
                    if bits[j] {
                        continue;
                    }
                    let fit = match (reuse[j], known) {
                        (Some(old), Some(k)) => {
                            counts.reused += 1;
                            k.matrix.get(i, old)
                        }
                        _ => {
                            let b = boxes.get(j);
                            let check = check_cartons_gated(s, &b.inner, cfg);
                            *counts.by_tier.entry(check.tier).or_default() += 1;
                            if check.tier == Tier::Search {
                                match check.outcome {
                                    FitOutcome::Fit => counts.searches_fit += 1,
                                    FitOutcome::NoFit => counts.searches_no_fit += 1,
                                    FitOutcome::TimedOut => {
                                        counts.searches_timed_out += 1;
                                        log::warn!("fit search timed out: shipment {} box {}", s.id, b.id);
                                        timeouts.push((s.id, b.id));
                                    }
                                }
                            }
                            check.outcome == FitOutcome::Fit
                        }
                    };
                    if fit {
                        for &k in &closure[j] {
                            if !bits[k] {
                                bits[k] = true;
                                counts.nested += u64::from(k != j);
                            }
                        }
                    }
                }
            }
            let row = bits.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| j).collect();
            (row, timeouts, counts)
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut timeouts = Vec::new();
    let mut counts = FitCounts::default();
    for (row, t, c) in results {
        rows.push(row);
        timeouts.extend(t);
        counts.merge(&c);
    }
    let matrix = FitMatrix {
        rows,
        n_boxes: boxes.len(),
    };
    let packable = matrix.packable();
    log::info!(
        "fit matrix: {} shipments, {} boxes, {} bits, {} packable, {} timeouts",
        shipments.len(),
        boxes.len(),
        matrix.set_bits(),
        packable.len(),
        timeouts.len()
    );
    FitReport {
        matrix,
        packable,
        timeouts,
        counts,
    }
}

/// The scan has already ensured the liquid volume fits; only the carton
/// tiers remain, behind the extents check.
fn check_cartons_gated(s: &Shipment, box_dims: &Dims3, cfg: &FitConfig) -> PairCheck {
    if !fits_extents(&s.cartons, box_dims, cfg.rules) {
        return PairCheck {
            outcome: FitOutcome::NoFit,
            tier: Tier::Extents,
        };
    }
    check_cartons(&s.cartons, box_dims, cfg)
}

/// Run summary written next to an exported fit matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub shipments: usize,
    pub boxes: usize,
    pub set_bits: usize,
    pub packable: usize,
    pub config: FitConfig,
    pub config_hash: String,
    pub counts: FitCounts,
    pub timeouts: Vec<(u64, u64)>,
}

/// SHA-256 over the fitting configuration and the box and shipment ids, so an
/// exported matrix can be matched to the inputs that produced it.
pub fn config_hash(cfg: &FitConfig, boxes: &BoxSet, shipments: &[Shipment]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    for b in boxes.boxes() {
        h.update(b.id.to_le_bytes());
        for v in b.inner.to_array() {
            h.update(v.to_le_bytes());
        }
    }
    for s in shipments {
        h.update(s.id.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl FitManifest {
    pub fn new(report: &FitReport, cfg: &FitConfig, boxes: &BoxSet, shipments: &[Shipment]) -> Self {
        FitManifest {
            shipments: shipments.len(),
            boxes: boxes.len(),
            set_bits: report.matrix.set_bits(),
            packable: report.packable.len(),
            config: *cfg,
            config_hash: config_hash(cfg, boxes, shipments),
            counts: report.counts.clone(),
            timeouts: report.timeouts.clone(),
        }
    }
}

/// One `shipment_id,box_id` row per set bit.
pub fn write_fit_csv<W: Write>(out: W, matrix: &FitMatrix, shipments: &[Shipment], boxes: &BoxSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shipment_id", "box_id"])?;
    for (i, row) in matrix.rows.iter().enumerate() {
        for &j in row {
            w.write_record([shipments[i].id.to_string(), boxes.get(j).id.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_fit_csv`] back into a matrix over the given
/// shipments and boxes. Unknown ids are an error.
pub fn read_fit_csv<R: Read>(input: R, shipments: &[Shipment], boxes: &BoxSet) -> Result<FitMatrix> {
    let ship_index: HashMap<u64, usize> = shipments.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
    let box_index: HashMap<u64, usize> = boxes.boxes().iter().enumerate().map(|(j, b)| (b.id, j)).collect();
    let mut rows = vec![Vec::new(); shipments.len()];
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |k: usize| -> Result<u64> {
            rec.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| invalid(format!("fit matrix line {line}: bad field {k}")))
        };
        let (sid, bid) = (field(0)?, field(1)?);
        let i = *ship_index
            .get(&sid)
            .ok_or_else(|| invalid(format!("fit matrix line {line}: unknown shipment {sid}")))?;
        let j = *box_index
            .get(&bid)
            .ok_or_else(|| invalid(format!("fit matrix line {line}: unknown box {bid}")))?;
        rows[i].push(j);
    }
    for row in &mut rows {
        row.sort_unstable();
        row.dedup();
    }
    Ok(FitMatrix {
        rows,
        n_boxes: boxes.len(),
    })
}

/// Writes `<stem>.csv` and `<stem>.manifest.json`.
pub fn save_fit(
    dir_stem: &Path,
    report: &FitReport,
    cfg: &FitConfig,
    boxes: &BoxSet,
    shipments: &[Shipment],
) -> Result<()> {
    let csv_path = dir_stem.with_extension("csv");
    write_fit_csv(std::fs::File::create(&csv_path)?, &report.matrix, shipments, boxes)?;
    let manifest = FitManifest::new(report, cfg, boxes, shipments);
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir_stem.with_extension("manifest.json"), json)?;
    Ok(())
}
