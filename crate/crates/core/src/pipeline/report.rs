use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{BoxSet, Shipment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub rank: usize,
    pub id: u64,
    pub inner: [f64; 3],
    pub inner_volume: f64,
    pub shipments: usize,
    pub pct_shipments: f64,
    /// Empty share of the inner volume shipped in this box; `None` when the
    /// box ships nothing.
    pub pct_void: Option<f64>,
}

/// Per-box summary of a suite, ordered by inner volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<ReportRow>,
    pub packable: usize,
    pub total_inner_volume_shipped: f64,
    pub total_liquid_volume_shipped: f64,
    pub pct_void: Option<f64>,
    pub objective: Option<f64>,
    pub lower_bound: Option<f64>,
    pub gap: Option<f64>,
}

fn void_pct(inner: f64, liquid: f64) -> Option<f64> {
    (inner > 0.0).then(|| 100.0 * (inner - liquid) / inner)
}

impl SuiteReport {
    /// `assignment` holds `(shipment index, box index)` pairs; `suite` holds
    /// box indices.
    pub fn build(
        boxes: &BoxSet,
        suite: &[usize],
        shipments: &[Shipment],
        assignment: &[(usize, usize)],
        objective: Option<f64>,
        lower_bound: Option<f64>,
        gap: Option<f64>,
    ) -> Self {
        let mut suite = suite.to_vec();
        suite.sort_unstable();
        let mut count = vec![0usize; suite.len()];
        let mut inner = vec![0.0; suite.len()];
        let mut liquid = vec![0.0; suite.len()];
        for &(i, j) in assignment {
            let k = suite.binary_search(&j).expect("assigned box is in the suite");
            count[k] += 1;
            inner[k] += boxes.get(j).volume;
            liquid[k] += shipments[i].liquid_volume();
        }
        let n = assignment.len();
        let rows = suite
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let b = boxes.get(j);
                ReportRow {
                    rank: k + 1,
                    id: b.id,
                    inner: b.inner.to_array(),
                    inner_volume: b.volume,
                    shipments: count[k],
                    pct_shipments: if n > 0 { 100.0 * count[k] as f64 / n as f64 } else { 0.0 },
                    pct_void: void_pct(inner[k], liquid[k]),
                }
            })
            .collect();
        let total_inner: f64 = inner.iter().sum();
        let total_liquid: f64 = liquid.iter().sum();
        SuiteReport {
            rows,
            packable: n,
            total_inner_volume_shipped: total_inner,
            total_liquid_volume_shipped: total_liquid,
            pct_void: void_pct(total_inner, total_liquid),
            objective,
            lower_bound,
            gap,
        }
    }

    /// Report for a run with no feasible suite.
    pub fn empty(packable: usize) -> Self {
        SuiteReport {
            rows: Vec::new(),
            packable,
            total_inner_volume_shipped: 0.0,
            total_liquid_volume_shipped: 0.0,
            pct_void: None,
            objective: None,
            lower_bound: None,
            gap: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if self.is_empty() {
            s.push_str("There is no feasible solution\n");
            return s;
        }
        let _ = writeln!(
            s,
            "{:>3}  {:>8}  {:>18}  {:>12}  {:>14}  {:>10}",
            "#", "ID", "Inner Dimensions", "Inner Volume", "% Shipments", "% Void"
        );
        for r in &self.rows {
            let dims = format!("({},{},{})", r.inner[0], r.inner[1], r.inner[2]);
            let void = r.pct_void.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                s,
                "{:>3}  {:>8}  {:>18}  {:>12}  {:>14.2}  {:>10}",
                r.rank, r.id, dims, r.inner_volume, r.pct_shipments, void
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "packable shipments:          {}", self.packable);
        let _ = writeln!(s, "total inner volume shipped:  {}", self.total_inner_volume_shipped);
        if let Some(v) = self.pct_void {
            let _ = writeln!(s, "suite liquid void:           {v:.2}%");
        }
        if let Some(v) = self.objective {
            let _ = writeln!(s, "objective:                   {v}");
        }
        if let Some(v) = self.lower_bound {
            let _ = writeln!(s, "lower bound:                 {v}");
        }
        if let Some(v) = self.gap {
            let _ = writeln!(s, "optimality gap:              {:.3}%", 100.0 * v);
        }
        s
    }

    /// One row per box, in the table's column order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "#",
            "ID",
            "Inner Dimensions",
            "Inner Volume",
            "% of Packable Shipments Shipped",
            "% Liquid Void Volume Shipped",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.rank.to_string(),
                r.id.to_string(),
                format!("({},{},{})", r.inner[0], r.inner[1], r.inner[2]),
                r.inner_volume.to_string(),
                format!("{:.4}", r.pct_shipments),
                r.pct_void.map_or_else(String::new, |v| format!("{v:.4}")),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
