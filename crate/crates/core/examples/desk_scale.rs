//! Synthetic end-to-end run: fit 300 random shipments against a 714-box grid
//! and recommend a five-box suite.
//!
//! `cargo run --release -p boxsuite-core --example desk_scale [shipments]`

use std::time::Instant;

use boxsuite::model::BoxSet;
use boxsuite::pipeline::{compute_fit, recommend_with_fit, RunConfig};
use boxsuite::synth::{candidate_grid_from, random_items, random_shipments};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let items = random_items(&mut rng, 400);
    let shipments = random_shipments(&mut rng, &items, n, 8);
    let boxes = BoxSet::new(candidate_grid_from(2, [6, 4, 2])).unwrap();

    let cfg = RunConfig::new(5);
    let t = Instant::now();
    let fit = compute_fit(&shipments, &boxes, &cfg.fit);
    println!(
        "fit {:.1?}: {} of {} shipments packable, {} timeouts",
        t.elapsed(),
        fit.packable.len(),
        shipments.len(),
        fit.timeouts.len()
    );
    let rec = recommend_with_fit(&cfg, &shipments, &boxes, &fit.matrix).unwrap();
    print!("{}", rec.report.to_table());
}
