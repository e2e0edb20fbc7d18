//! Cost matrix over packable shipments and candidate boxes.
//!
//! Pairs that do not fit get the penalty `gamma`, which exceeds the cost of
//! any suite covering every packable shipment. Each locked box adds one fake
//! shipment row that ships for free in that box and at `gamma` anywhere else,
//! so any suite missing a locked box costs at least `gamma`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fitmatrix::PackableSet;
use crate::model::{BoxSet, Shipment};

/// How `C_ij` is computed for a shipment that fits a box.
#[derive(Debug, Clone, PartialEq)]
pub enum CostModel {
    /// Inner volume of the box.
    InnerVolume,
    /// Outer volume per box id.
    OuterVolume { table: HashMap<u64, f64> },
    /// Corrugate and tape weight per box id, plus dunnage filling the void:
    /// `box_weight + dunnage_density * (inner volume - liquid volume)`.
    MaterialWeight {
        box_weight: HashMap<u64, f64>,
        dunnage_density: f64,
    },
    /// Explicit cost per `(shipment_id, box_id)`.
    ExternalTable { table: HashMap<(u64, u64), f64> },
}

impl CostModel {
    /// Short name recorded in manifests.
    pub fn id(&self) -> &'static str {
        match self {
            CostModel::InnerVolume => "inner_volume",
            CostModel::OuterVolume { .. } => "outer_volume",
            CostModel::MaterialWeight { .. } => "material_weight",
            CostModel::ExternalTable { .. } => "external_table",
        }
    }

    pub fn cost(&self, shipment: &Shipment, boxes: &BoxSet, j: usize) -> Result<f64> {
        let b = boxes.get(j);
        let per_box = |t: &HashMap<u64, f64>, what: &str| {
            t.get(&b.id)
                .copied()
                .ok_or_else(|| invalid(format!("{what} table has no entry for box {}", b.id)))
        };
        let c = match self {
            CostModel::InnerVolume => b.volume,
            CostModel::OuterVolume { table } => per_box(table, "outer volume")?,
            CostModel::MaterialWeight {
                box_weight,
                dunnage_density,
            } => per_box(box_weight, "box weight")? + dunnage_density * (b.volume - shipment.liquid_volume()).max(0.0),
            CostModel::ExternalTable { table } => table.get(&(shipment.id, b.id)).copied().ok_or_else(|| {
                invalid(format!(
                    "cost table has no entry for shipment {} in box {}",
                    shipment.id, b.id
                ))
            })?,
        };
        if !c.is_finite() || c < 0.0 {
            return Err(invalid(format!(
                "cost model {} gave {c} for shipment {} in box {}",
                self.id(),
                shipment.id,
                b.id
            )));
        }
        Ok(c)
    }
}

/// Dense `(packable + locked) x boxes` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub d: Vec<f64>,
    /// Packable (real) rows; fake rows follow.
    pub n_real: usize,
    pub n_boxes: usize,
    pub gamma: f64,
    /// Locked box indices, one fake row each, in row order.
    pub locked: Vec<usize>,
}

impl CostMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_real + self.locked.len()
    }

    pub fn fake_rows(&self) -> usize {
        self.locked.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n_boxes..(i + 1) * self.n_boxes]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n_boxes + j]
    }
}

/// Builds the penalized matrix. `locked` are box indices; `k < p` is checked
/// by the caller, which knows `p`.
pub fn build_cost_matrix(
    packable: &PackableSet,
    shipments: &[Shipment],
    boxes: &BoxSet,
    locked: &[usize],
    model: &CostModel,
) -> Result<CostMatrix> {
    let m = boxes.len();
    for (t, &j) in locked.iter().enumerate() {
        if j >= m {
            return Err(invalid(format!("locked box index {j} out of range")));
        }
        if locked[..t].contains(&j) {
            return Err(invalid(format!("box {} locked twice", boxes.get(j).id)));
        }
    }

    let fitting: Vec<Vec<(usize, f64)>> = packable
        .w
        .par_iter()
        .zip(&packable.sets)
        .map(|(&i, set)| {
            set.iter()
                .map(|&j| Ok((j, model.cost(&shipments[i], boxes, j)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let gamma = fitting
        .iter()
        .map(|row| row.iter().map(|e| e.1).fold(0.0, f64::max))
        .sum::<f64>()
        + 1.0;

    let n_real = fitting.len();
    let mut d = vec![gamma; (n_real + locked.len()) * m];
    for (r, row) in fitting.iter().enumerate() {
        for &(j, c) in row {
            d[r * m + j] = c;
        }
    }
    for (t, &j) in locked.iter().enumerate() {
        d[(n_real + t) * m + j] = 0.0;
    }
    Ok(CostMatrix {
        d,
        n_real,
        n_boxes: m,
        gamma,
        locked: locked.to_vec(),
    })
}

/// Run summary written next to an exported cost matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostManifest {
    pub gamma: f64,
    pub rows: usize,
    pub real_rows: usize,
    pub boxes: usize,
    pub locked_box_ids: Vec<u64>,
    pub model: String,
}

/// Sub-`gamma` entries as `row,box_id,cost`; everything else is `gamma`.
/// Rows are matrix rows, so fake rows come after the packable ones.
pub fn write_cost_csv<W: Write>(out: W, cm: &CostMatrix, boxes: &BoxSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "box_id", "cost"])?;
    for i in 0..cm.n_rows() {
        for (j, &c) in cm.row(i).iter().enumerate() {
            if c < cm.gamma {
                w.write_record([i.to_string(), boxes.get(j).id.to_string(), c.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_cost_csv`] given the manifest.
pub fn read_cost_csv<R: Read>(input: R, manifest: &CostManifest, boxes: &BoxSet) -> Result<CostMatrix> {
    if manifest.boxes != boxes.len() {
        return Err(invalid("cost manifest box count does not match the box file"));
    }
    let locked = manifest
        .locked_box_ids
        .iter()
        .map(|&id| {
            boxes
                .index_of(id)
                .ok_or_else(|| invalid(format!("locked box {id} not in box file")))
        })
        .collect::<Result<Vec<_>>>()?;
    let index: HashMap<u64, usize> = boxes.boxes().iter().enumerate().map(|(j, b)| (b.id, j)).collect();
    let m = boxes.len();
    let mut d = vec![manifest.gamma; manifest.rows * m];
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    for rec in r.records() {
        let rec = rec?;
        let bad = || invalid(format!("cost matrix: bad row {:?}", rec.iter().collect::<Vec<_>>()));
        let i: usize = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let id: u64 = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let c: f64 = rec.get(2).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let j = *index.get(&id).ok_or_else(bad)?;
        if i >= manifest.rows || !c.is_finite() || c < 0.0 {
            return Err(bad());
        }
        d[i * m + j] = c;
    }
    Ok(CostMatrix {
        d,
        n_real: manifest.real_rows,
        n_boxes: m,
        gamma: manifest.gamma,
        locked,
    })
}

/// Writes `<stem>.csv` and `<stem>.manifest.json`.
pub fn save_cost(stem: &Path, cm: &CostMatrix, boxes: &BoxSet, model: &CostModel) -> Result<()> {
    write_cost_csv(std::fs::File::create(stem.with_extension("csv"))?, cm, boxes)?;
    let manifest = CostManifest {
        gamma: cm.gamma,
        rows: cm.n_rows(),
        real_rows: cm.n_real,
        boxes: cm.n_boxes,
        locked_box_ids: cm.locked.iter().map(|&j| boxes.get(j).id).collect(),
        model: model.id().to_string(),
    };
    std::fs::write(
        stem.with_extension("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Reads `box_id,value` rows, e.g. outer volumes or box weights.
pub fn load_box_table(path: impl AsRef<Path>) -> Result<HashMap<u64, f64>> {
    let rows = read_numeric_rows(path.as_ref(), 2)?;
    Ok(rows.into_iter().map(|r| (r[0] as u64, r[1])).collect())
}

/// Reads `shipment_id,box_id,cost` rows.
pub fn load_cost_table(path: impl AsRef<Path>) -> Result<HashMap<(u64, u64), f64>> {
    let rows = read_numeric_rows(path.as_ref(), 3)?;
    Ok(rows.into_iter().map(|r| ((r[0] as u64, r[1] as u64), r[2])).collect())
}

/// Numeric CSV with an optional header row.
fn read_numeric_rows(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals: Option<Vec<f64>> = rec.iter().take(width).map(|v| v.parse().ok()).collect();
        match vals {
            Some(v) if v.len() == width => out.push(v),
            _ if k == 0 => continue,
            _ => {
                return Err(crate::Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("expected {width} numeric fields"),
                })
            }
        }
    }
    Ok(out)
}
