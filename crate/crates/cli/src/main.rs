use std::collections::HashMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use boxsuite::cost::{load_box_table, load_cost_table, CostModel};
use boxsuite::fitmatrix::{read_fit_csv, save_fit, FitConfig};
use boxsuite::io::{load_boxes, load_items, load_shipments, save_boxes};
use boxsuite::pipeline::{
    compare_suites, finetune_candidates, fit_one, recommend_with_fit, refit, validate, PackContext, RunConfig,
    DEFAULT_DELTAS,
};
use boxsuite::pmedian::{ExactBudget, GraspParams, LagrangianParams, Method};
use boxsuite::{BoxSet, Shipment};

#[derive(Parser, Debug)]
#[command(
    name = "boxsuite",
    version,
    about = "Recommend a cost-optimal suite of shipping boxes"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "BOXSUITE_THREADS")]
    threads: Option<usize>,

    /// JSON file with `fit` and `method` sections overriding the defaults.
    /// Command-line flags win over the file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Decide which boxes each shipment fits and write the fit matrix.
    Fit(FitArgs),
    /// Pick a suite of p boxes from a fit matrix.
    Recommend(RecommendArgs),
    /// Pack two shipment sets into a suite and compare their metrics.
    Validate(ValidateArgs),
    /// Total cost of several suites relative to the first one.
    Compare(CompareArgs),
    /// Write a candidate set of small variations around a suite.
    Finetune(FinetuneArgs),
    /// Cheapest suite box for one shipment.
    Fitone(FitoneArgs),
}

#[derive(Args, Debug)]
struct Data {
    /// Boxes CSV: box_id,dim1,dim2,dim3.
    #[arg(long)]
    boxes: PathBuf,
    /// Items CSV, needed when shipment rows omit dimensions.
    #[arg(long)]
    items: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct FitFlags {
    /// Per-search time limit; a search that runs out counts as no fit.
    #[arg(long)]
    time_limit_ms: Option<u64>,
    /// Drop the identical-carton ordering constraints.
    #[arg(long)]
    no_sym_identical: bool,
    /// Drop the first-orthant constraint.
    #[arg(long)]
    no_sym_orthant: bool,
    /// Ignore height-oriented flags.
    #[arg(long)]
    ignore_ho: bool,
    /// Ignore bottom-resting flags.
    #[arg(long)]
    ignore_br: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: Data,
    /// Shipments CSV: shipment_id,item_id,quantity[,dim1,dim2,dim3][,ho,br,foldable]
    #[arg(long)]
    shipments: PathBuf,
    /// Output CSV; a `.manifest.json` is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    fit: FitFlags,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Exact,
    Exchange,
    Grasp,
    Lagrangian,
}

#[derive(Args, Debug)]
struct CostFlags {
    /// `inner-volume`, `outer:FILE` (box_id,outer_volume),
    /// `weight:FILE:DENSITY` (box_id,weight) or `table:FILE`
    /// (shipment_id,box_id,cost).
    #[arg(long, default_value = "inner-volume")]
    cost: String,
}

#[derive(Args, Debug)]
struct RecommendArgs {
    #[command(flatten)]
    data: Data,
    /// Shipments CSV: shipment_id,item_id,quantity[,dim1,dim2,dim3][,ho,br,foldable]
    #[arg(long)]
    shipments: PathBuf,
    /// Fit matrix from `fit`. Computed on the spot when absent.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Number of boxes in the suite, locked ones included
    #[arg(short = 'p', long = "p")]
    p: usize,
    /// Box ids every suite must contain, comma separated.
    #[arg(long, value_delimiter = ',')]
    lock: Vec<u64>,
    #[command(flatten)]
    cost: CostFlags,
    #[arg(long, value_enum, default_value = "grasp")]
    method: MethodArg,
    /// GRASP iterations.
    #[arg(long)]
    graspit: Option<usize>,
    /// GRASP elite pool size.
    #[arg(long)]
    elite: Option<usize>,
    /// GRASP random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the report files.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    fitflags: FitFlags,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    data: Data,
    /// Suite box ids, comma separated, or a suite CSV written by `recommend`.
    #[arg(long)]
    suite: String,
    #[arg(long)]
    shipments_a: PathBuf,
    #[arg(long)]
    shipments_b: PathBuf,
    #[command(flatten)]
    cost: CostFlags,
    /// Outer volume per box (box_id,outer_volume) for the outer-volume share.
    #[arg(long)]
    outer: Option<PathBuf>,
    /// Relative difference above which a metric is flagged.
    #[arg(long, default_value_t = 0.10)]
    threshold: f64,
    /// JSON report path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    fitflags: FitFlags,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    data: Data,
    /// Shipments CSV: shipment_id,item_id,quantity[,dim1,dim2,dim3][,ho,br,foldable]
    #[arg(long)]
    shipments: PathBuf,
    /// `NAME=ids` or `NAME=suite.csv`, repeated; the first is the reference.
    #[arg(long = "suite", required = true)]
    suites: Vec<String>,
    #[command(flatten)]
    cost: CostFlags,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    fitflags: FitFlags,
}

#[derive(Args, Debug)]
struct FinetuneArgs {
    #[command(flatten)]
    data: Data,
    #[arg(long)]
    suite: String,
    #[arg(long, value_delimiter = ',')]
    lock: Vec<u64>,
    /// Per-dimension offsets, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    deltas: Option<Vec<f64>>,
    /// Boxes CSV for the new candidate set.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitoneArgs {
    #[command(flatten)]
    data: Data,
    #[arg(long)]
    suite: String,
    /// Shipments CSV: shipment_id,item_id,quantity[,dim1,dim2,dim3][,ho,br,foldable]
    #[arg(long)]
    shipments: PathBuf,
    /// Id of the shipment to place.
    #[arg(long)]
    shipment: u64,
    #[command(flatten)]
    cost: CostFlags,
    #[command(flatten)]
    fitflags: FitFlags,
}

#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    fit: Option<FitConfig>,
    method: Option<Method>,
}

fn read_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn fit_config(base: Option<FitConfig>, f: &FitFlags) -> FitConfig {
    let mut cfg = base.unwrap_or_default();
    if let Some(ms) = f.time_limit_ms {
        cfg.solver.time_limit = Duration::from_millis(ms);
    }
    cfg.solver.use_identical_symmetry &= !f.no_sym_identical;
    cfg.solver.use_orthant_symmetry &= !f.no_sym_orthant;
    cfg.rules.enforce_ho &= !f.ignore_ho;
    cfg.rules.enforce_br &= !f.ignore_br;
    cfg
}

fn read_boxes(data: &Data) -> Result<BoxSet> {
    load_boxes(&data.boxes).with_context(|| format!("reading boxes {}", data.boxes.display()))
}

fn read_shipments(data: &Data, path: &Path) -> Result<Vec<Shipment>> {
    let items = match &data.items {
        Some(p) => Some(load_items(p).with_context(|| format!("reading items {}", p.display()))?),
        None => None,
    };
    load_shipments(path, items.as_ref()).with_context(|| format!("reading shipments {}", path.display()))
}

fn cost_model(spec: &str) -> Result<CostModel> {
    let parts: Vec<&str> = spec.splitn(3, ':').collect();
    Ok(match parts.as_slice() {
        ["inner-volume"] => CostModel::InnerVolume,
        ["outer", f] => CostModel::OuterVolume {
            table: load_box_table(f).with_context(|| format!("reading {f}"))?,
        },
        ["weight", f, density] => CostModel::MaterialWeight {
            box_weight: load_box_table(f).with_context(|| format!("reading {f}"))?,
            dunnage_density: density
                .parse()
                .map_err(|_| anyhow!("bad dunnage density {density:?}"))?,
        },
        ["table", f] => CostModel::ExternalTable {
            table: load_cost_table(f).with_context(|| format!("reading {f}"))?,
        },
        _ => bail!("unknown cost model {spec:?}"),
    })
}

/// Box ids, comma separated, or a CSV whose `ID` (or first) column holds them.
fn parse_suite(spec: &str, boxes: &BoxSet) -> Result<Vec<usize>> {
    let ids: Vec<u64> = if Path::new(spec).is_file() {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(spec)?;
        let col = r
            .headers()?
            .iter()
            .position(|h| h.eq_ignore_ascii_case("id"))
            .unwrap_or(0);
        r.records()
            .map(|rec| {
                let rec = rec?;
                let v = rec.get(col).unwrap_or_default();
                v.parse().map_err(|_| anyhow!("bad box id {v:?} in {spec}"))
            })
            .collect::<Result<_>>()?
    } else {
        spec.split(',')
            .map(|v| v.trim().parse().map_err(|_| anyhow!("bad box id {v:?}")))
            .collect::<Result<_>>()?
    };
    if ids.is_empty() {
        bail!("empty suite");
    }
    ids.iter()
        .map(|&id| {
            boxes
                .index_of(id)
                .ok_or_else(|| anyhow!("suite box {id} is not in the boxes file"))
        })
        .collect()
}

fn write(path: &Path, content: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn cmd_fit(a: &FitArgs, file: &FileConfig) -> Result<()> {
    let boxes = read_boxes(&a.data)?;
    let shipments = read_shipments(&a.data, &a.shipments)?;
    let cfg = fit_config(file.fit, &a.fit);
    let report = refit(&shipments, &boxes, &cfg, None);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_fit(&a.out.with_extension(""), &report, &cfg, &boxes, &shipments)?;
    println!(
        "{} shipments x {} boxes: {} fitting pairs, {} packable shipments, {} timeouts",
        shipments.len(),
        boxes.len(),
        report.matrix.set_bits(),
        report.packable.len(),
        report.timeouts.len()
    );
    Ok(())
}

fn cmd_recommend(a: &RecommendArgs, file: &FileConfig) -> Result<()> {
    let boxes = read_boxes(&a.data)?;
    let shipments = read_shipments(&a.data, &a.shipments)?;
    let fit_cfg = fit_config(file.fit, &a.fitflags);
    let method = match a.method {
        MethodArg::Exact => match &file.method {
            Some(m @ Method::Exact(_)) => m.clone(),
            _ => Method::Exact(ExactBudget::default()),
        },
        MethodArg::Exchange => Method::Exchange,
        MethodArg::Grasp => {
            let mut g = match &file.method {
                Some(Method::Grasp(g)) => g.clone(),
                _ => GraspParams::default(),
            };
            g.iterations = a.graspit.unwrap_or(g.iterations);
            g.elite_size = a.elite.unwrap_or(g.elite_size);
            Method::Grasp(g)
        }
        MethodArg::Lagrangian => match &file.method {
            Some(m @ Method::Lagrangian(_)) => m.clone(),
            _ => Method::Lagrangian(LagrangianParams::default()),
        },
    };
    let run = RunConfig {
        p: a.p,
        locked_ids: a.lock.clone(),
        cost: cost_model(&a.cost.cost)?,
        fit: fit_cfg,
        method,
        seed: a.seed,
    };
    boxsuite::pipeline::check_run(&run, &boxes)?;
    let matrix = match &a.fit {
        Some(path) => {
            let f = fs::File::open(path).with_context(|| format!("reading fit matrix {}", path.display()))?;
            read_fit_csv(f, &shipments, &boxes)?
        }
        None => refit(&shipments, &boxes, &fit_cfg, None).matrix,
    };
    let rec = recommend_with_fit(&run, &shipments, &boxes, &matrix)?;
    info!("solved in {:.2?}", rec.solve.elapsed);

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let table = rec.report.to_table();
    print!("{table}");
    write(&a.out.join("suite.txt"), &table)?;
    let mut csv_buf = Vec::new();
    rec.report.write_csv(&mut csv_buf)?;
    write(&a.out.join("suite.csv"), csv_buf)?;
    let mut assign = String::from("shipment_id,box_id\n");
    for &(i, j) in &rec.assignment {
        assign.push_str(&format!("{},{}\n", shipments[i].id, boxes.get(j).id));
    }
    write(&a.out.join("assignment.csv"), assign)?;
    let summary = json!({
        "feasible": rec.suite.is_some(),
        "suite": rec.suite.as_ref().map(|s| s.iter().map(|&j| boxes.get(j).id).collect::<Vec<_>>()),
        "locked": a.lock,
        "objective": rec.solve.cost,
        "penalty": rec.gamma,
        "lower_bound": rec.solve.lower_bound,
        "gap": rec.solve.gap,
        "packable": rec.packable,
        "solve_seconds": rec.solve.elapsed.as_secs_f64(),
        "report": rec.report,
        "bound_history": rec.solve.history,
    });
    write(&a.out.join("report.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn cmd_validate(a: &ValidateArgs, file: &FileConfig) -> Result<()> {
    let boxes = read_boxes(&a.data)?;
    let suite = parse_suite(&a.suite, &boxes)?;
    let sa = read_shipments(&a.data, &a.shipments_a)?;
    let sb = read_shipments(&a.data, &a.shipments_b)?;
    let model = cost_model(&a.cost.cost)?;
    let fit = fit_config(file.fit, &a.fitflags);
    let outer: Option<HashMap<u64, f64>> = match &a.outer {
        Some(p) => Some(load_box_table(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let ctx = PackContext {
        boxes: &boxes,
        model: &model,
        fit: &fit,
    };
    let r = validate(&ctx, &suite, &sa, &sb, outer.as_ref(), a.threshold)?;
    println!(
        "{:>8}  {:>12}  {:>12}  {:>10}  {:>10}",
        "ID", "% ships A", "% ships B", "% void A", "% void B"
    );
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".into(), |v| format!("{v:.2}"));
    for (ra, rb) in r.a.rows.iter().zip(&r.b.rows) {
        println!(
            "{:>8}  {:>12.2}  {:>12.2}  {:>10}  {:>10}",
            ra.id,
            ra.pct_shipments,
            rb.pct_shipments,
            fmt(ra.pct_void),
            fmt(rb.pct_void)
        );
    }
    println!(
        "uncovered: {} of {} (A), {} of {} (B)",
        r.a.uncovered, r.a.shipments, r.b.uncovered, r.b.shipments
    );
    println!("largest relative difference: {:.4}", r.max_relative);
    if !r.divergences.is_empty() {
        log::warn!(
            "{} metrics differ by more than {:.0}%; consider re-running on a larger shipment set",
            r.divergences.len(),
            100.0 * a.threshold
        );
    }
    write(&a.out, serde_json::to_string_pretty(&r)?)
}

fn cmd_compare(a: &CompareArgs, file: &FileConfig) -> Result<()> {
    let boxes = read_boxes(&a.data)?;
    let shipments = read_shipments(&a.data, &a.shipments)?;
    let model = cost_model(&a.cost.cost)?;
    let fit = fit_config(file.fit, &a.fitflags);
    let suites = a
        .suites
        .iter()
        .map(|s| {
            let (name, spec) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("expected NAME=ids, got {s:?}"))?;
            Ok((name.to_string(), parse_suite(spec, &boxes)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let ctx = PackContext {
        boxes: &boxes,
        model: &model,
        fit: &fit,
    };
    let c = compare_suites(&ctx, &suites, &shipments)?;
    let mut out = String::from("suite,total_cost,missing,reduction\n");
    for r in &c.rows {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.name,
            opt(r.total_cost),
            r.missing,
            opt(r.reduction)
        ));
        match (r.total_cost, r.reduction) {
            (Some(t), Some(red)) => println!("{:<16} {:>16} {:>8.2}%", r.name, t, 100.0 * red),
            (Some(t), None) => println!("{:<16} {:>16}", r.name, t),
            _ => println!("{:<16} infeasible ({} shipments without a box)", r.name, r.missing),
        }
    }
    println!("excluded (fit no suite): {}", c.excluded);
    write(&a.out, out)
}

fn cmd_finetune(a: &FinetuneArgs) -> Result<()> {
    let boxes = read_boxes(&a.data)?;
    let suite = parse_suite(&a.suite, &boxes)?;
    let locked = a
        .lock
        .iter()
        .map(|&id| {
            boxes
                .index_of(id)
                .ok_or_else(|| anyhow!("locked box {id} is not in the boxes file"))
        })
        .collect::<Result<Vec<_>>>()?;
    let deltas = a.deltas.clone().unwrap_or_else(|| DEFAULT_DELTAS.to_vec());
    let out = finetune_candidates(&boxes, &suite, &locked, &deltas)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_boxes(&a.out, &out)?;
    println!("{} candidate boxes written to {}", out.len(), a.out.display());
    Ok(())
}

fn cmd_fitone(a: &FitoneArgs, file: &FileConfig) -> Result<()> {
    let boxes = read_boxes(&a.data)?;
    let suite = parse_suite(&a.suite, &boxes)?;
    let shipments = read_shipments(&a.data, &a.shipments)?;
    let s = shipments
        .iter()
        .find(|s| s.id == a.shipment)
        .ok_or_else(|| anyhow!("shipment {} not found", a.shipment))?;
    let model = cost_model(&a.cost.cost)?;
    let fit = fit_config(file.fit, &a.fitflags);
    let ctx = PackContext {
        boxes: &boxes,
        model: &model,
        fit: &fit,
    };
    match fit_one(&ctx, s, &suite)? {
        Some((j, c)) => {
            let b = boxes.get(j);
            let [x, y, z] = b.inner.to_array();
            println!("{} ({x},{y},{z}) cost {c}", b.id);
        }
        None => println!("no suite box fits shipment {}", s.id),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let file = read_config(cli.config.as_deref())?;
    match &cli.cmd {
        Cmd::Fit(a) => cmd_fit(a, &file),
        Cmd::Recommend(a) => cmd_recommend(a, &file),
        Cmd::Validate(a) => cmd_validate(a, &file),
        Cmd::Compare(a) => cmd_compare(a, &file),
        Cmd::Finetune(a) => cmd_finetune(a),
        Cmd::Fitone(a) => cmd_fitone(a, &file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| run(&cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}
