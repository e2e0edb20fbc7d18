use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{invalid, Result};
use crate::fitmatrix::{check_shipment, FitConfig};
use crate::fitting::FitOutcome;
use crate::model::{BoxSet, Shipment};

/// What every packing of shipments into a fixed suite needs.
#[derive(Debug, Clone, Copy)]
pub struct PackContext<'a> {
    pub boxes: &'a BoxSet,
    pub model: &'a CostModel,
    pub fit: &'a FitConfig,
}

/// Cheapest suite box the shipment fits, with its cost. Ties go to the
/// smaller box. Timed-out searches count as not fitting.
pub fn fit_one(ctx: &PackContext<'_>, shipment: &Shipment, suite: &[usize]) -> Result<Option<(usize, f64)>> {
    let mut best: Option<(usize, f64)> = None;
    let mut order = suite.to_vec();
    order.sort_unstable();
    for j in order {
        if check_shipment(shipment, &ctx.boxes.get(j).inner, ctx.fit).outcome != FitOutcome::Fit {
            continue;
        }
        let c = ctx.model.cost(shipment, ctx.boxes, j)?;
        if best.is_none_or(|(_, bc)| c < bc) {
            best = Some((j, c));
        }
    }
    Ok(best)
}

/// [`fit_one`] for every shipment, in parallel.
pub fn pack_into_suite(
    ctx: &PackContext<'_>,
    shipments: &[Shipment],
    suite: &[usize],
) -> Result<Vec<Option<(usize, f64)>>> {
    if suite.iter().any(|&j| j >= ctx.boxes.len()) {
        return Err(invalid("suite refers to a box outside the candidate set"));
    }
    shipments.par_iter().map(|s| fit_one(ctx, s, suite)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub id: u64,
    pub shipments: usize,
    pub pct_shipments: f64,
    pub pct_cost: f64,
    /// Share of the outer volume of all boxes used; needs outer volumes.
    pub pct_outer_volume: Option<f64>,
    pub pct_void: Option<f64>,
}

/// Metrics of one shipment set packed into a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingMetrics {
    pub rows: Vec<ValidationRow>,
    pub shipments: usize,
    pub covered: usize,
    pub uncovered: usize,
    pub total_cost: f64,
    pub total_inner_volume: f64,
    pub pct_void: Option<f64>,
}

fn pct(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        100.0 * part / whole
    } else {
        0.0
    }
}

fn measure(
    ctx: &PackContext<'_>,
    suite: &[usize],
    shipments: &[Shipment],
    outer: Option<&HashMap<u64, f64>>,
) -> Result<PackingMetrics> {
    let mut suite = suite.to_vec();
    suite.sort_unstable();
    suite.dedup();
    let packing = pack_into_suite(ctx, shipments, &suite)?;
    let k = suite.len();
    let (mut count, mut cost, mut inner, mut liquid, mut outer_v) =
        (vec![0usize; k], vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for (s, slot) in shipments.iter().zip(&packing) {
        let Some((j, c)) = *slot else { continue };
        let r = suite.binary_search(&j).expect("packed into the suite");
        let b = ctx.boxes.get(j);
        count[r] += 1;
        cost[r] += c;
        inner[r] += b.volume;
        liquid[r] += s.liquid_volume();
        if let Some(t) = outer {
            outer_v[r] += *t
                .get(&b.id)
                .ok_or_else(|| invalid(format!("outer volume table has no entry for box {}", b.id)))?;
        }
    }
    let covered: usize = count.iter().sum();
    let total_cost: f64 = cost.iter().sum();
    let total_outer: f64 = outer_v.iter().sum();
    let total_inner: f64 = inner.iter().sum();
    let total_liquid: f64 = liquid.iter().sum();
    let rows = (0..k)
        .map(|r| ValidationRow {
            id: ctx.boxes.get(suite[r]).id,
            shipments: count[r],
            pct_shipments: pct(count[r] as f64, covered as f64),
            pct_cost: pct(cost[r], total_cost),
            pct_outer_volume: outer.map(|_| pct(outer_v[r], total_outer)),
            pct_void: (inner[r] > 0.0).then(|| pct(inner[r] - liquid[r], inner[r])),
        })
        .collect();
    Ok(PackingMetrics {
        rows,
        shipments: shipments.len(),
        covered,
        uncovered: shipments.len() - covered,
        total_cost,
        total_inner_volume: total_inner,
        pct_void: (total_inner > 0.0).then(|| pct(total_inner - total_liquid, total_inner)),
    })
}

/// A metric whose values on the two sets differ by more than the threshold,
/// relative to the larger of the two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    /// `None` for suite-level metrics.
    pub box_id: Option<u64>,
    pub metric: String,
    pub a: f64,
    pub b: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub a: PackingMetrics,
    pub b: PackingMetrics,
    pub threshold: f64,
    /// Largest relative difference over all compared metrics.
    pub max_relative: f64,
    pub divergences: Vec<Divergence>,
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Packs two shipment sets into the same suite and compares their per-box
/// metrics. Shipments fitting no suite box are counted as uncovered.
pub fn validate(
    ctx: &PackContext<'_>,
    suite: &[usize],
    a: &[Shipment],
    b: &[Shipment],
    outer: Option<&HashMap<u64, f64>>,
    threshold: f64,
) -> Result<ValidationReport> {
    if suite.is_empty() {
        return Err(invalid("cannot validate an empty suite"));
    }
    let ma = measure(ctx, suite, a, outer)?;
    let mb = measure(ctx, suite, b, outer)?;
    let mut pairs: Vec<(Option<u64>, &str, f64, f64)> = Vec::new();
    for (ra, rb) in ma.rows.iter().zip(&mb.rows) {
        let id = Some(ra.id);
        pairs.push((id, "pct_shipments", ra.pct_shipments, rb.pct_shipments));
        pairs.push((id, "pct_cost", ra.pct_cost, rb.pct_cost));
        if let (Some(x), Some(y)) = (ra.pct_outer_volume, rb.pct_outer_volume) {
            pairs.push((id, "pct_outer_volume", x, y));
        }
        if let (Some(x), Some(y)) = (ra.pct_void, rb.pct_void) {
            pairs.push((id, "pct_void", x, y));
        }
    }
    if let (Some(x), Some(y)) = (ma.pct_void, mb.pct_void) {
        pairs.push((None, "pct_void", x, y));
    }
    let ua = pct(ma.uncovered as f64, ma.shipments as f64);
    let ub = pct(mb.uncovered as f64, mb.shipments as f64);
    pairs.push((None, "pct_uncovered", ua, ub));

    let mut max_relative: f64 = 0.0;
    let mut divergences = Vec::new();
    for (box_id, metric, x, y) in pairs {
        let r = relative(x, y);
        max_relative = max_relative.max(r);
        if r > threshold {
            divergences.push(Divergence {
                box_id,
                metric: metric.to_string(),
                a: x,
                b: y,
                relative: r,
            });
        }
    }
    Ok(ValidationReport {
        a: ma,
        b: mb,
        threshold,
        max_relative,
        divergences,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    /// `None` when the suite leaves a comparable shipment without a box.
    pub total_cost: Option<f64>,
    /// Comparable shipments this suite cannot ship.
    pub missing: usize,
    /// `(cost of this suite - cost of the reference) / cost of this suite`.
    pub reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Shipments that fit no compared suite; left out of every total.
    pub excluded: usize,
}

/// Total cost of each suite over the shipments at least one of them can
/// ship. The first suite is the reference.
pub fn compare_suites(
    ctx: &PackContext<'_>,
    suites: &[(String, Vec<usize>)],
    shipments: &[Shipment],
) -> Result<Comparison> {
    let packings = suites
        .iter()
        .map(|(_, s)| pack_into_suite(ctx, shipments, s))
        .collect::<Result<Vec<_>>>()?;
    let comparable: Vec<usize> = (0..shipments.len())
        .filter(|&i| packings.iter().any(|p| p[i].is_some()))
        .collect();
    let totals: Vec<(Option<f64>, usize)> = packings
        .iter()
        .map(|p| {
            let missing = comparable.iter().filter(|&&i| p[i].is_none()).count();
            let total: f64 = comparable.iter().filter_map(|&i| p[i].map(|x| x.1)).sum();
            ((missing == 0).then_some(total), missing)
        })
        .collect();
    let reference = totals.first().and_then(|t| t.0);
    let rows = suites
        .iter()
        .zip(&totals)
        .map(|((name, _), &(total, missing))| ComparisonRow {
            name: name.clone(),
            total_cost: total,
            missing,
            reduction: match (total, reference) {
                (Some(c), Some(r)) if c > 0.0 => Some((c - r) / c),
                (Some(_), Some(_)) => Some(0.0),
                _ => None,
            },
        })
        .collect();
    Ok(Comparison {
        rows,
        excluded: shipments.len() - comparable.len(),
    })
}
