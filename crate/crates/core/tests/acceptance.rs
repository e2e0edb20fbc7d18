//! Acceptance gate. Runs every criterion, prints one line each and exits
//! nonzero if any fails. Criterion 8 needs the public retail dataset and only
//! runs when `BOXSUITE_DATASET_DIR` points at a directory holding
//! `boxes.csv`, `items.csv` and `shipments.csv`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use boxsuite::fitmatrix::FitMatrix;
use boxsuite::fitting::{
    fits_extents, fits_single, fits_stacking, oracle_fit, solve_fit, FitOutcome, FitProblem, SolverConfig,
};
use boxsuite::io::{load_boxes, load_items, load_shipments};
use boxsuite::model::{BoxSet, CandidateBox, Carton, Dims3, Shipment};
use boxsuite::pipeline::{compute_fit, recommend_with_fit, RunConfig};
use boxsuite::pmedian::{
    dual_value, lagrangian_bounds, local_search_interchange, solve_exact, solve_grasp, swap_local_optimum_audit,
    ExactBudget, GraspParams, LagrangianParams, Method, Neighborhood, PMedianInstance, Suite,
};
use boxsuite::synth::{candidate_grid_from, random_fit_problem, random_items, random_shipments, uniform_costs};

const CORPUS_SEED: u64 = 2024;
const CORPUS_SIZE: usize = 1000;
const CORPUS_BUDGET: Duration = Duration::from_secs(120);
const CORPUS_TIME_LIMIT: Duration = Duration::from_secs(10);
const SYMMETRY_SAMPLE: usize = 300;
const SYMMETRY_MIN_DUPLICATES: usize = 100;
const PMEDIAN_INSTANCES: u64 = 50;
const GRASP_MIN_OPTIMAL: usize = 45;
const PMEDIAN_BUDGET: Duration = Duration::from_secs(60);
const COST_TOL: f64 = 1e-9;
const SMALL_PIPELINES: u64 = 100;
const DESK_BUDGET: Duration = Duration::from_secs(600);
const PCT_TOL: f64 = 0.01;

struct Line {
    id: &'static str,
    pass: Option<bool>,
    detail: String,
}

fn rel_le(a: f64, b: f64) -> bool {
    a <= b + COST_TOL * b.abs().max(1.0)
}

fn corpus() -> Vec<FitProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    (0..CORPUS_SIZE).map(|_| random_fit_problem(&mut rng)).collect()
}

fn has_duplicate(p: &FitProblem) -> bool {
    let c = &p.cartons;
    (0..c.len()).any(|i| (i + 1..c.len()).any(|k| c[i] == c[k]))
}

fn criterion_1(problems: &[FitProblem]) -> Line {
    let cfg = SolverConfig::default().with_time_limit(CORPUS_TIME_LIMIT);
    let start = Instant::now();
    let (mut mismatches, mut timeouts, mut ho, mut br) = (0, 0, 0, 0);
    for p in problems {
        let v = solve_fit(p, &cfg);
        if v.outcome == FitOutcome::TimedOut {
            timeouts += 1;
        } else if v.is_fit() != oracle_fit(p).is_fit() {
            mismatches += 1;
        }
        ho += p.cartons.iter().any(|c| c.height_oriented) as usize;
        br += p.cartons.iter().any(|c| c.bottom_resting) as usize;
    }
    let elapsed = start.elapsed();
    Line {
        id: "1 fitting oracle equivalence",
        pass: Some(mismatches == 0 && timeouts == 0 && elapsed < CORPUS_BUDGET),
        detail: format!(
            "{} instances ({ho} with HO, {br} with BR): {mismatches} mismatches, {timeouts} timeouts, {elapsed:.2?}",
            problems.len()
        ),
    }
}

fn median(mut v: Vec<u64>) -> u64 {
    v.sort_unstable();
    if v.is_empty() {
        0
    } else {
        v[v.len() / 2]
    }
}

fn criterion_2(problems: &[FitProblem]) -> Line {
    let dups: Vec<&FitProblem> = problems
        .iter()
        .filter(|p| has_duplicate(p))
        .take(SYMMETRY_SAMPLE / 2)
        .collect();
    let others = problems
        .iter()
        .filter(|p| !has_duplicate(p))
        .take(SYMMETRY_SAMPLE - dups.len());
    let sample: Vec<(&FitProblem, bool)> = dups
        .iter()
        .map(|p| (*p, true))
        .chain(others.map(|p| (p, false)))
        .collect();
    let base = SolverConfig::default()
        .with_time_limit(CORPUS_TIME_LIMIT)
        .with_greedy(false);
    let combos = [(true, true), (true, false), (false, true), (false, false)];
    let (mut disagreements, mut timeouts) = (0, 0);
    let (mut on_nodes, mut off_nodes) = (Vec::new(), Vec::new());
    for &(p, dup) in &sample {
        let verdicts: Vec<_> = combos
            .iter()
            .map(|&(i, o)| solve_fit(p, &base.with_symmetry(i, o)))
            .collect();
        timeouts += verdicts.iter().filter(|v| v.outcome == FitOutcome::TimedOut).count();
        if verdicts.iter().any(|v| v.outcome != verdicts[0].outcome) {
            disagreements += 1;
        }
        // Instances settled before branching say nothing about pruning.
        if dup && verdicts[3].stats.nodes > 0 {
            on_nodes.push(verdicts[0].stats.nodes);
            off_nodes.push(verdicts[3].stats.nodes);
        }
    }
    let searched = on_nodes.len();
    let (m_on, m_off) = (median(on_nodes), median(off_nodes));
    Line {
        id: "2 symmetry-breaking soundness",
        pass: Some(dups.len() >= SYMMETRY_MIN_DUPLICATES && disagreements == 0 && timeouts == 0 && searched > 0 && m_on <= m_off),
        detail: format!(
            "{} instances ({} with duplicates): {disagreements} verdict disagreements, {timeouts} timeouts, median nodes on/off {m_on}/{m_off} over {searched} searched duplicate instances",
            sample.len(),
            dups.len()
        ),
    }
}

fn criterion_3(problems: &[FitProblem]) -> Line {
    let cfg = SolverConfig::default().with_time_limit(CORPUS_TIME_LIMIT);
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED + 1);
    let singles: Vec<FitProblem> = (0..CORPUS_SIZE / 2)
        .map(|_| {
            let d = |rng: &mut ChaCha8Rng, hi: u32| rng.gen_range(1..=hi) as f64;
            let mut c = Carton::new(Dims3::new(d(&mut rng, 6), d(&mut rng, 6), d(&mut rng, 6)).unwrap());
            c.height_oriented = rng.gen_bool(0.3);
            c.bottom_resting = rng.gen_bool(0.2);
            let b = Dims3::new(d(&mut rng, 10), d(&mut rng, 10), d(&mut rng, 10)).unwrap();
            FitProblem::new(vec![c], b)
        })
        .collect();
    let (mut checked, mut violations) = (0, 0);
    for p in problems.iter().chain(&singles) {
        let exact = oracle_fit(p).is_fit();
        let search = solve_fit(p, &cfg).outcome;
        let mut claim = |expect_fit: bool| {
            checked += 1;
            let want = if expect_fit { FitOutcome::Fit } else { FitOutcome::NoFit };
            if search != want || exact != expect_fit {
                violations += 1;
            }
        };
        let vol: f64 = p.cartons.iter().map(|c| c.dims.volume()).sum();
        if vol > p.box_dims.volume() || !fits_extents(&p.cartons, &p.box_dims, p.rules) {
            claim(false);
        } else if p.n() == 1 {
            claim(fits_single(&p.cartons[0], &p.box_dims, p.cartons[0].height_oriented));
        } else if fits_stacking(&p.cartons, &p.box_dims, p.rules) {
            claim(true);
        }
    }
    Line {
        id: "3 fast-path soundness",
        pass: Some(violations == 0 && checked > 0),
        detail: format!("{checked} fast-path decisions checked against search and oracle: {violations} violations"),
    }
}

fn pmedian_instances() -> Vec<PMedianInstance<'static>> {
    (0..PMEDIAN_INSTANCES)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + k);
            let rows = uniform_costs(&mut rng, 60, 15, 1, 100);
            PMedianInstance::from_rows(&rows, 2 + (k as usize % 3)).unwrap()
        })
        .collect()
}

fn criterion_4_5(instances: &[PMedianInstance<'_>]) -> (Line, Line) {
    let start = Instant::now();
    let grasp_params = GraspParams {
        iterations: 32,
        elite_size: 10,
        ..GraspParams::default()
    };
    let (mut optimal, mut below, mut audit_fail) = (0, 0, 0);
    let (mut sandwich, mut negative_gap) = (0, 0);
    let mut worst_gap: f64 = 0.0;
    let mut d0_exact = true;
    for (k, inst) in instances.iter().enumerate() {
        let opt = solve_exact(inst, &ExactBudget::default()).unwrap().cost;
        let g = solve_grasp(inst, &grasp_params);
        if (g.cost - opt).abs() <= COST_TOL * opt {
            optimal += 1;
        }
        if g.cost < opt - COST_TOL * opt {
            below += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let mut members: Vec<usize> = (0..inst.m()).collect();
        rand::seq::SliceRandom::shuffle(&mut members[..], &mut rng);
        members.truncate(inst.p());
        for nb in [Neighborhood::FirstImprovement, Neighborhood::BestImprovement] {
            let r = local_search_interchange(inst, &Suite::new(members.clone()), nb);
            if !swap_local_optimum_audit(inst, &r.suite) {
                audit_fail += 1;
            }
        }
        let l = lagrangian_bounds(inst, &LagrangianParams::default());
        let lb = l.lower_bound.unwrap();
        if lb.is_finite() && rel_le(lb, opt) && rel_le(opt, g.cost) {
            sandwich += 1;
        }
        let gap = l.gap.unwrap();
        if gap.is_nan() || gap < 0.0 {
            negative_gap += 1;
        }
        worst_gap = worst_gap.max(gap);
        d0_exact &= dual_value(inst, &vec![0.0; inst.n()]) == 0.0;
    }
    let elapsed = start.elapsed();
    let n = instances.len();
    (
        Line {
            id: "4 p-median exact vs heuristics",
            pass: Some(optimal >= GRASP_MIN_OPTIMAL && below == 0 && audit_fail == 0 && elapsed < PMEDIAN_BUDGET),
            detail: format!(
                "GRASP optimal on {optimal}/{n}, below optimum {below}, swap audits failed {audit_fail}, {elapsed:.2?} (includes bounds)"
            ),
        },
        Line {
            id: "5 Lagrangian sandwich",
            pass: Some(sandwich == n && negative_gap == 0 && d0_exact),
            detail: format!(
                "LB <= exact <= GRASP on {sandwich}/{n}, negative gaps {negative_gap}, worst gap {:.3}%, D(0) = 0: {d0_exact}",
                100.0 * worst_gap
            ),
        },
    )
}

/// Shape families that do not nest: long thin, flat and cubic. Mixing them
/// makes a covering suite depend on which boxes are chosen.
fn shape(rng: &mut ChaCha8Rng, scale: u32) -> Dims3 {
    let mut r = |lo: u32, hi: u32| rng.gen_range(lo..=hi) as f64;
    match r(0, 2) as u32 {
        0 => Dims3::new(r(scale, scale + 2), r(1, 2), r(1, 2)),
        1 => Dims3::new(r(scale - 1, scale + 1), r(scale - 1, scale + 1), r(1, 2)),
        _ => Dims3::new(r(2, scale - 1), r(2, scale - 1), r(2, scale - 1)),
    }
    .unwrap()
}

fn random_pipeline(rng: &mut ChaCha8Rng) -> (Vec<Shipment>, BoxSet, usize, Vec<u64>) {
    let n_boxes = rng.gen_range(4..=12);
    let boxes: Vec<CandidateBox> = (0..n_boxes)
        .map(|j| CandidateBox::new(j as u64 + 1, shape(rng, 6).sorted()).unwrap())
        .collect();
    let boxes = BoxSet::new(boxes).unwrap();
    let shipments: Vec<Shipment> = (0..rng.gen_range(1..=20))
        .map(|i| {
            let cartons = (0..rng.gen_range(1..=2))
                .map(|_| {
                    let mut c = Carton::new(shape(rng, 5));
                    c.height_oriented = rng.gen_bool(0.1);
                    c
                })
                .collect();
            Shipment::new(i as u64 + 1, cartons, vec![]).unwrap()
        })
        .collect();
    let p = rng.gen_range(2..=4.min(n_boxes - 1));
    let k = rng.gen_range(0..p);
    let mut ids: Vec<u64> = (1..=n_boxes as u64).collect();
    rand::seq::SliceRandom::shuffle(&mut ids[..], rng);
    ids.truncate(k);
    (shipments, boxes, p, ids)
}

/// Cheapest `p`-subset containing `locked` that gives every packable
/// shipment a box, by enumeration. Costs are inner volumes.
fn brute_force(fit: &FitMatrix, boxes: &BoxSet, p: usize, locked: &[usize]) -> Option<f64> {
    let m = boxes.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != p || locked.iter().any(|&j| mask & (1 << j) == 0) {
            continue;
        }
        let mut total = 0.0;
        let mut covered = true;
        for row in fit.rows.iter().filter(|r| !r.is_empty()) {
            match row
                .iter()
                .filter(|&&j| mask & (1 << j) != 0)
                .map(|&j| boxes.get(j).volume)
                .reduce(f64::min)
            {
                Some(c) => total += c,
                None => {
                    covered = false;
                    break;
                }
            }
        }
        if covered && best.is_none_or(|b| total < b) {
            best = Some(total);
        }
    }
    best
}

fn criterion_6() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut ok, mut empties, mut locked_runs) = (0, 0, 0);
    let mut failures = Vec::new();
    for t in 0..SMALL_PIPELINES {
        let (shipments, boxes, p, lock_ids) = random_pipeline(&mut rng);
        let mut cfg = RunConfig::new(p);
        cfg.locked_ids = lock_ids.clone();
        cfg.method = Method::Exact(ExactBudget::default());
        let fit = compute_fit(&shipments, &boxes, &cfg.fit);
        let rec = recommend_with_fit(&cfg, &shipments, &boxes, &fit.matrix).unwrap();
        let locked: Vec<usize> = lock_ids.iter().map(|&id| boxes.index_of(id).unwrap()).collect();
        let truth = brute_force(&fit.matrix, &boxes, p, &locked);
        locked_runs += (!locked.is_empty()) as usize;
        let good = match (&rec.suite, truth) {
            (None, None) => {
                empties += 1;
                true
            }
            (Some(s), Some(opt)) => {
                let covers = rec.assignment.len() == fit.packable.len()
                    && rec
                        .assignment
                        .iter()
                        .all(|&(i, j)| s.contains(&j) && fit.matrix.get(i, j));
                locked.iter().all(|j| s.contains(j))
                    && covers
                    && rec.solve.cost < rec.gamma
                    && (rec.solve.cost - opt).abs() <= COST_TOL * opt.max(1.0)
            }
            _ => false,
        };
        if good {
            ok += 1;
        } else {
            failures.push(t);
        }
    }
    Line {
        id: "6 locked-box and feasibility behavior",
        pass: Some(failures.is_empty()),
        detail: format!(
            "{ok}/{SMALL_PIPELINES} match enumeration ({empties} infeasible, {locked_runs} with locks), failing runs {failures:?}"
        ),
    }
}

fn criterion_7() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let items = random_items(&mut rng, 400);
    let shipments = random_shipments(&mut rng, &items, 300, 8);
    let boxes = BoxSet::new(candidate_grid_from(2, [6, 4, 2])).unwrap();
    let cfg = RunConfig::new(5);
    let fit = compute_fit(&shipments, &boxes, &cfg.fit);
    let free = recommend_with_fit(&cfg, &shipments, &boxes, &fit.matrix).unwrap();
    let lock_id = boxes
        .boxes()
        .iter()
        .find(|b| b.inner.to_array() == [12., 8., 6.])
        .map(|b| b.id)
        .unwrap();
    let mut locked_cfg = cfg.clone();
    locked_cfg.locked_ids = vec![lock_id];
    let locked = recommend_with_fit(&locked_cfg, &shipments, &boxes, &fit.matrix).unwrap();
    let elapsed = start.elapsed();

    let pct_ok = |r: &boxsuite::pipeline::SuiteReport| {
        let s: f64 = r.rows.iter().map(|x| x.pct_shipments).sum();
        (s - 100.0).abs() <= PCT_TOL
    };
    let void_ok = |r: &boxsuite::pipeline::SuiteReport| r.pct_void.is_some_and(|v| v > 0.0 && v < 100.0);
    let lock_idx = boxes.index_of(lock_id).unwrap();
    let contains_lock = locked.suite.as_ref().is_some_and(|s| s.contains(&lock_idx));
    let pass = free.suite.is_some()
        && elapsed < DESK_BUDGET
        && pct_ok(&free.report)
        && pct_ok(&locked.report)
        && void_ok(&free.report)
        && void_ok(&locked.report)
        && contains_lock;
    let ids = |r: &boxsuite::pipeline::Recommendation| -> Vec<u64> {
        r.suite.iter().flatten().map(|&j| boxes.get(j).id).collect()
    };
    Line {
        id: "7 desk-scale pipeline",
        pass: Some(pass),
        detail: format!(
            "{} shipments x {} boxes, {} packable, {} timeouts; free suite {:?} volume {} void {:.2}%; locked {lock_id} suite {:?} volume {}; {elapsed:.1?}",
            shipments.len(),
            boxes.len(),
            free.packable,
            fit.timeouts.len(),
            ids(&free),
            free.report.total_inner_volume_shipped,
            free.report.pct_void.unwrap_or(f64::NAN),
            ids(&locked),
            locked.report.total_inner_volume_shipped,
        ),
    }
}

fn criterion_8() -> Line {
    let id = "8 public dataset replication";
    let Some(dir) = std::env::var_os("BOXSUITE_DATASET_DIR") else {
        return Line {
            id,
            pass: None,
            detail: "not run: set BOXSUITE_DATASET_DIR to the directory holding boxes.csv, items.csv and shipments.csv"
                .into(),
        };
    };
    let dir = std::path::PathBuf::from(dir);
    let run = || -> boxsuite::Result<String> {
        let boxes = load_boxes(dir.join("boxes.csv"))?;
        let items = load_items(dir.join("items.csv"))?;
        let shipments = load_shipments(dir.join("shipments.csv"), Some(&items))?;
        let mut cfg = RunConfig::new(10);
        let fit = compute_fit(&shipments, &boxes, &cfg.fit);
        let packable = fit.packable.len();
        let mut out = Vec::new();
        let mut ok = packable.abs_diff(14_888) <= 25;
        let targets: [(&[u64], f64, usize, usize); 3] = [
            (&[], 26_917_098.0, 32, 10),
            (&[958], 27_224_072.0, 32, 10),
            (&[958, 1918], 27_370_900.0, 64, 20),
        ];
        for (locks, target, it, elite) in targets {
            cfg.locked_ids = locks.to_vec();
            cfg.method = Method::Grasp(GraspParams {
                iterations: it,
                elite_size: elite,
                ..GraspParams::default()
            });
            let rec = recommend_with_fit(&cfg, &shipments, &boxes, &fit.matrix)?;
            let vol = rec.report.total_inner_volume_shipped;
            ok &= (vol - target).abs() <= 0.02 * target;
            cfg.method = Method::Lagrangian(LagrangianParams::default());
            let gap = recommend_with_fit(&cfg, &shipments, &boxes, &fit.matrix)?
                .solve
                .gap
                .unwrap_or(f64::NAN);
            ok &= gap <= 0.025;
            out.push(format!(
                "locks {locks:?}: volume {vol} (target {target}), gap {:.3}%",
                100.0 * gap
            ));
        }
        Ok(format!("{}|packable {packable}, {}", ok, out.join("; ")))
    };
    match run() {
        Ok(s) => {
            let (ok, detail) = s.split_once('|').unwrap();
            Line {
                id,
                pass: Some(ok == "true"),
                detail: detail.to_string(),
            }
        }
        Err(e) => Line {
            id,
            pass: Some(false),
            detail: format!("error: {e}"),
        },
    }
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--list`; answer those quickly.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let problems = corpus();
    let mut lines = vec![criterion_1(&problems), criterion_2(&problems), criterion_3(&problems)];
    let instances = pmedian_instances();
    let (l4, l5) = criterion_4_5(&instances);
    lines.extend([l4, l5, criterion_6(), criterion_7(), criterion_8()]);

    let mut failed = false;
    for l in &lines {
        let tag = match l.pass {
            Some(true) => "PASS",
            Some(false) => {
                failed = true;
                "FAIL"
            }
            None => "SKIP",
        };
        println!("[{tag}] criterion {}: {}", l.id, l.detail);
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
