//! End-to-end suite recommendation and the tools around it: validation on
//! other shipment sets, comparison of suites and fine-tuning candidates.

mod finetune;
mod pack;
mod report;

use std::time::{Duration, Instant};

use log::info;

use crate::cost::{build_cost_matrix, CostMatrix, CostModel};
use crate::error::{invalid, Result};
use crate::fitmatrix::{
    compute_fit_matrix, compute_fit_matrix_with, compute_nest_sets, FitConfig, FitMatrix, FitReport, KnownColumns,
};
use crate::model::{BoxSet, Shipment};
use crate::pmedian::{check_feasible, extract_assignment, solve, Method, PMedianInstance, SolveResult};

pub use finetune::{finetune_candidates, DEFAULT_DELTAS};
pub use pack::{
    compare_suites, fit_one, pack_into_suite, validate, Comparison, ComparisonRow, Divergence, PackContext,
    PackingMetrics, ValidationReport, ValidationRow,
};
pub use report::{ReportRow, SuiteReport};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub p: usize,
    pub locked_ids: Vec<u64>,
    pub cost: CostModel,
    pub fit: FitConfig,
    pub method: Method,
    /// Overrides the GRASP seed when set.
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn new(p: usize) -> Self {
        RunConfig {
            p,
            locked_ids: Vec::new(),
            cost: CostModel::InnerVolume,
            fit: FitConfig::default(),
            method: Method::Grasp(Default::default()),
            seed: None,
        }
    }

    fn method(&self) -> Method {
        match (&self.method, self.seed) {
            (Method::Grasp(g), Some(seed)) => Method::Grasp(crate::pmedian::GraspParams { seed, ..g.clone() }),
            (m, _) => m.clone(),
        }
    }
}

/// Outcome of one recommendation run.
#[derive(Debug, Clone)]
pub struct Recommendation {
    /// Suite box indices, ascending (so by volume); `None` when no suite of
    /// size `p` ships every packable shipment and keeps every locked box.
    pub suite: Option<Vec<usize>>,
    pub solve: SolveResult,
    pub gamma: f64,
    /// `(shipment index, box index)` for every packable shipment.
    pub assignment: Vec<(usize, usize)>,
    pub report: SuiteReport,
    pub packable: usize,
    pub fit_elapsed: Duration,
}

/// Checks `0 <= k < p < J` and resolves the locked ids to box indices.
pub fn check_run(cfg: &RunConfig, boxes: &BoxSet) -> Result<Vec<usize>> {
    let j = boxes.len();
    if cfg.p == 0 || cfg.p >= j {
        return Err(invalid(format!(
            "p = {} must satisfy 0 < p < {j} (number of boxes)",
            cfg.p
        )));
    }
    if cfg.locked_ids.len() >= cfg.p {
        return Err(invalid(format!(
            "{} locked boxes leave no free slot in a suite of {}",
            cfg.locked_ids.len(),
            cfg.p
        )));
    }
    let mut b = boxes.clone();
    b.set_locked_ids(&cfg.locked_ids)?;
    Ok(b.locked().to_vec())
}

pub fn compute_fit(shipments: &[Shipment], boxes: &BoxSet, cfg: &FitConfig) -> FitReport {
    let nests = compute_nest_sets(boxes);
    compute_fit_matrix(shipments, boxes, &nests, cfg)
}

/// Fit matrix for a new box set, copying the columns of boxes whose dims were
/// already solved in `prior` (same shipments, same packing rules).
pub fn refit(
    shipments: &[Shipment],
    boxes: &BoxSet,
    cfg: &FitConfig,
    prior: Option<(&BoxSet, &FitMatrix)>,
) -> FitReport {
    let nests = compute_nest_sets(boxes);
    let known = prior.map(|(b, m)| KnownColumns::new(b, m, cfg.rules));
    compute_fit_matrix_with(shipments, boxes, &nests, cfg, known.as_ref())
}

/// Fits every shipment, then picks the suite.
pub fn recommend(cfg: &RunConfig, shipments: &[Shipment], boxes: &BoxSet) -> Result<Recommendation> {
    check_run(cfg, boxes)?;
    let t = Instant::now();
    let fit = compute_fit(shipments, boxes, &cfg.fit);
    let fit_elapsed = t.elapsed();
    info!(
        "fit matrix: {} set bits, {} packable of {} shipments, {} timeouts, {:.1?}",
        fit.matrix.set_bits(),
        fit.packable.len(),
        shipments.len(),
        fit.timeouts.len(),
        fit_elapsed
    );
    let mut r = recommend_with_fit(cfg, shipments, boxes, &fit.matrix)?;
    r.fit_elapsed = fit_elapsed;
    Ok(r)
}

/// Picks the suite from an existing fit matrix.
pub fn recommend_with_fit(
    cfg: &RunConfig,
    shipments: &[Shipment],
    boxes: &BoxSet,
    fit: &FitMatrix,
) -> Result<Recommendation> {
    let locked = check_run(cfg, boxes)?;
    if fit.rows.len() != shipments.len() || fit.n_boxes != boxes.len() {
        return Err(invalid("fit matrix does not match the shipments and boxes"));
    }
    let packable = fit.packable();
    let cm = build_cost_matrix(&packable, shipments, boxes, &locked, &cfg.cost)?;
    let solve_result = solve_cost_matrix(&cm, cfg.p, &cfg.method())?;
    info!(
        "p-median objective {} (penalty {}), {:.1?}",
        solve_result.cost, cm.gamma, solve_result.elapsed
    );

    let suite = check_feasible(&solve_result, cm.gamma).map(|s| s.0);
    let assignment: Vec<(usize, usize)> = match &suite {
        Some(_) => {
            let inst = PMedianInstance::new(cm.n_rows(), cm.n_boxes, cfg.p, &cm.d[..])?;
            let a = extract_assignment(&inst, &solve_result.suite);
            packable.w.iter().zip(&a.facility).map(|(&i, &j)| (i, j)).collect()
        }
        None => Vec::new(),
    };
    let report = match &suite {
        Some(s) => SuiteReport::build(
            boxes,
            s,
            shipments,
            &assignment,
            Some(solve_result.cost),
            solve_result.lower_bound,
            solve_result.gap,
        ),
        None => SuiteReport::empty(packable.len()),
    };
    Ok(Recommendation {
        suite,
        solve: solve_result,
        gamma: cm.gamma,
        assignment,
        report,
        packable: packable.len(),
        fit_elapsed: Duration::ZERO,
    })
}

/// Runs the chosen p-median solver on a penalized cost matrix.
pub fn solve_cost_matrix(cm: &CostMatrix, p: usize, method: &Method) -> Result<SolveResult> {
    let inst = PMedianInstance::new(cm.n_rows(), cm.n_boxes, p, &cm.d[..])?;
    solve(&inst, method)
}
