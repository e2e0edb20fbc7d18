use std::collections::{HashMap, HashSet};

use crate::error::{invalid, Result};
use crate::model::{BoxSet, CandidateBox, Dims3};

pub const DEFAULT_DELTAS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

fn key(d: &Dims3) -> [u64; 3] {
    d.sorted().to_array().map(f64::to_bits)
}

/// New candidate set around a suite: the locked boxes as they are, plus every
/// per-dimension variation of each unlocked suite box by the given offsets.
/// Variants with a nonpositive side are dropped and equal sorted dims kept
/// once. A variant matching a box of `boxes` keeps that box's id; others get
/// fresh ids above the largest existing one. The result has the same boxes
/// locked.
pub fn finetune_candidates(boxes: &BoxSet, suite: &[usize], locked: &[usize], deltas: &[f64]) -> Result<BoxSet> {
    if suite.is_empty() {
        return Err(invalid("cannot fine-tune an empty suite"));
    }
    if deltas.is_empty() || deltas.iter().any(|d| !d.is_finite()) {
        return Err(invalid("fine-tuning offsets must be finite and nonempty"));
    }
    if suite.iter().chain(locked).any(|&j| j >= boxes.len()) {
        return Err(invalid("suite refers to a box outside the candidate set"));
    }
    let mut existing: HashMap<[u64; 3], u64> = HashMap::new();
    for b in boxes.boxes() {
        existing.entry(key(&b.inner)).or_insert(b.id);
    }
    let mut next_id = boxes.boxes().iter().map(|b| b.id).max().unwrap_or(0) + 1;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut used_ids = HashSet::new();
    for &j in locked {
        let b = *boxes.get(j);
        if seen.insert(key(&b.inner)) {
            used_ids.insert(b.id);
            out.push(b);
        }
    }
    for &j in suite.iter().filter(|j| !locked.contains(j)) {
        let [a, b, c] = boxes.get(j).inner.to_array();
        for &da in deltas {
            for &db in deltas {
                for &dc in deltas {
                    let Ok(dims) = Dims3::new(a + da, b + db, c + dc) else {
                        continue;
                    };
                    if !seen.insert(key(&dims)) {
                        continue;
                    }
                    let id = match existing.get(&key(&dims)) {
                        Some(&id) if !used_ids.contains(&id) => id,
                        _ => {
                            next_id += 1;
                            next_id - 1
                        }
                    };
                    used_ids.insert(id);
                    out.push(CandidateBox::new(id, dims)?);
                }
            }
        }
    }
    let mut set = BoxSet::new(out)?;
    let locked_ids: Vec<u64> = locked.iter().map(|&j| boxes.get(j).id).collect();
    set.set_locked_ids(&locked_ids)?;
    Ok(set)
}
