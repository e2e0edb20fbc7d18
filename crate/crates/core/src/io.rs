//! CSV ingestion and export for boxes, items and shipments.
//!
//! Layouts (header row optional, columns positional when absent):
//!
//! * boxes: `box_id,dim1,dim2,dim3`
//! * items: `item_id,dim1,dim2,dim3`
//! * shipments: `shipment_id,item_id,quantity,dim1,dim2,dim3`
//!
//! Shipment rows may carry three extra 0/1 columns `ho,br,foldable`. They are
//! an extension of the published layout and default to 0. When a shipment row
//! has only the first three columns, the dimensions are looked up in the items
//! file.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::model::{BoxSet, CandidateBox, Carton, Dims3, FoldableItem, Shipment};

#[derive(Debug, Clone, Copy)]
pub struct BoxCsvOptions {
    /// Re-sort each box's dims nonincreasing on load, so the height is the
    /// smallest inner dimension. Turn off to keep the file's orientation.
    pub sort_dims: bool,
}

impl Default for BoxCsvOptions {
    fn default() -> Self {
        BoxCsvOptions { sort_dims: true }
    }
}

struct Table {
    path: PathBuf,
    /// Lowercased header names, if the file had a header row.
    header: Option<Vec<String>>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let file = File::open(path)?;
        Table::from_reader(file, path)
    }

    fn from_reader<R: Read>(rdr: R, path: &Path) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(rdr);
        let mut header = None;
        let mut rows = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map(|p| p.line()).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(k as u64 + 1);
            let fields: Vec<String> = rec.iter().map(str::to_owned).collect();
            if fields.iter().all(|f| f.is_empty()) {
                continue;
            }
            if k == 0 && fields[0].parse::<f64>().is_err() {
                header = Some(fields.iter().map(|f| f.to_ascii_lowercase()).collect());
                continue;
            }
            rows.push((line, fields));
        }
        Ok(Table {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    fn column(&self, name: &str, default_pos: usize) -> Option<usize> {
        match &self.header {
            Some(h) => h.iter().position(|c| c == name),
            None => Some(default_pos),
        }
    }

    fn err(&self, line: u64, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn field<'a>(&self, line: u64, row: &'a [String], col: Option<usize>, name: &str) -> Result<&'a str> {
        col.and_then(|c| row.get(c))
            .map(String::as_str)
            .ok_or_else(|| self.err(line, format!("missing column `{name}`")))
    }

    fn int(&self, line: u64, row: &[String], col: Option<usize>, name: &str) -> Result<u64> {
        let raw = self.field(line, row, col, name)?;
        raw.parse::<u64>()
            .map_err(|_| self.err(line, format!("`{name}` is not a nonnegative integer: {raw:?}")))
    }

    fn real(&self, line: u64, row: &[String], col: Option<usize>, name: &str) -> Result<f64> {
        let raw = self.field(line, row, col, name)?;
        raw.parse::<f64>()
            .map_err(|_| self.err(line, format!("`{name}` is not a number: {raw:?}")))
    }

    fn flag(&self, line: u64, row: &[String], col: Option<usize>, name: &str) -> Result<bool> {
        match col.and_then(|c| row.get(c)) {
            None => Ok(false),
            Some(s) if s.is_empty() || s == "0" => Ok(false),
            Some(s) if s == "1" => Ok(true),
            Some(s) => Err(self.err(line, format!("`{name}` must be 0 or 1, got {s:?}"))),
        }
    }

    fn dims(&self, line: u64, row: &[String], first: usize) -> Result<Dims3> {
        let mut v = [0.0; 3];
        for (k, slot) in v.iter_mut().enumerate() {
            let name = format!("dim{}", k + 1);
            *slot = self.real(line, row, self.column(&name, first + k), &name)?;
        }
        Dims3::new(v[0], v[1], v[2]).map_err(|e| self.err(line, e.to_string()))
    }
}

pub fn load_boxes(path: impl AsRef<Path>) -> Result<BoxSet> {
    load_boxes_with(path, BoxCsvOptions::default())
}

pub fn load_boxes_with(path: impl AsRef<Path>, opts: BoxCsvOptions) -> Result<BoxSet> {
    let table = Table::read(path.as_ref())?;
    parse_boxes(&table, opts)
}

pub fn parse_boxes_str(text: &str, opts: BoxCsvOptions) -> Result<BoxSet> {
    let table = Table::from_reader(text.as_bytes(), Path::new("<boxes>"))?;
    parse_boxes(&table, opts)
}

fn parse_boxes(table: &Table, opts: BoxCsvOptions) -> Result<BoxSet> {
    let id_col = table.column("box_id", 0);
    let mut boxes = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let id = table.int(*line, row, id_col, "box_id")?;
        let mut dims = table.dims(*line, row, 1)?;
        if opts.sort_dims {
            dims = dims.sorted();
        }
        boxes.push(CandidateBox::new(id, dims)?);
    }
    BoxSet::new(boxes)
}

pub fn load_items(path: impl AsRef<Path>) -> Result<HashMap<u64, Dims3>> {
    let table = Table::read(path.as_ref())?;
    let id_col = table.column("item_id", 0);
    let mut items = HashMap::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let id = table.int(*line, row, id_col, "item_id")?;
        let dims = table.dims(*line, row, 1)?;
        if items.insert(id, dims).is_some() {
            return Err(invalid(format!("duplicate item id {id}")));
        }
    }
    Ok(items)
}

/// Loads shipments, expanding quantities into one carton per physical unit.
/// Output is ordered by shipment id.
pub fn load_shipments(path: impl AsRef<Path>, items: Option<&HashMap<u64, Dims3>>) -> Result<Vec<Shipment>> {
    let table = Table::read(path.as_ref())?;
    parse_shipments(&table, items)
}

pub fn parse_shipments_str(text: &str, items: Option<&HashMap<u64, Dims3>>) -> Result<Vec<Shipment>> {
    let table = Table::from_reader(text.as_bytes(), Path::new("<shipments>"))?;
    parse_shipments(&table, items)
}

fn parse_shipments(table: &Table, items: Option<&HashMap<u64, Dims3>>) -> Result<Vec<Shipment>> {
    let sid_col = table.column("shipment_id", 0);
    let iid_col = table.column("item_id", 1);
    let qty_col = table.column("quantity", 2);
    let ho_col = table.column("ho", 6);
    let br_col = table.column("br", 7);
    let fold_col = table.column("foldable", 8);
    let has_dims = |row: &[String]| match &table.header {
        Some(h) => h.iter().any(|c| c == "dim1"),
        None => row.len() >= 6,
    };

    let mut grouped: BTreeMap<u64, Shipment> = BTreeMap::new();
    for (line, row) in &table.rows {
        let line = *line;
        let sid = table.int(line, row, sid_col, "shipment_id")?;
        let iid = table.int(line, row, iid_col, "item_id")?;
        let qty = table.int(line, row, qty_col, "quantity")?;
        if qty == 0 {
            return Err(table.err(line, "quantity must be positive"));
        }
        let dims = if has_dims(row) {
            table.dims(line, row, 3)?
        } else {
            let lookup = items.ok_or_else(|| table.err(line, "row has no dimensions and no items file was given"))?;
            *lookup
                .get(&iid)
                .ok_or_else(|| table.err(line, format!("unknown item id {iid}")))?
        };
        let ho = table.flag(line, row, ho_col, "ho")?;
        let br = table.flag(line, row, br_col, "br")?;
        let foldable = table.flag(line, row, fold_col, "foldable")?;
        if foldable && (ho || br) {
            return Err(table.err(line, "foldable items cannot be height-oriented or bottom-resting"));
        }
        let entry = grouped.entry(sid).or_insert_with(|| Shipment {
            id: sid,
            cartons: Vec::new(),
            foldables: Vec::new(),
        });
        for _ in 0..qty {
            if foldable {
                entry.foldables.push(FoldableItem {
                    dims,
                    item_id: Some(iid),
                });
            } else {
                entry.cartons.push(Carton {
                    dims,
                    height_oriented: ho,
                    bottom_resting: br,
                    item_id: Some(iid),
                });
            }
        }
    }
    let shipments: Vec<Shipment> = grouped.into_values().collect();
    for s in &shipments {
        s.validate()?;
    }
    Ok(shipments)
}

fn fmt_len(v: f64) -> String {
    format!("{v}")
}

pub fn write_boxes<W: Write>(out: W, boxes: &BoxSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["box_id", "dim1", "dim2", "dim3"])?;
    for b in boxes.boxes() {
        w.write_record([
            b.id.to_string(),
            fmt_len(b.inner.a),
            fmt_len(b.inner.b),
            fmt_len(b.inner.c),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_boxes(path: impl AsRef<Path>, boxes: &BoxSet) -> Result<()> {
    write_boxes(File::create(path)?, boxes)
}

/// Writes shipments back in the row layout, folding runs of identical units
/// into a quantity. Extension columns are only emitted when some item needs
/// them.
pub fn write_shipments<W: Write>(out: W, shipments: &[Shipment]) -> Result<()> {
    let extended = shipments
        .iter()
        .any(|s| !s.foldables.is_empty() || s.cartons.iter().any(|c| c.height_oriented || c.bottom_resting));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["shipment_id", "item_id", "quantity", "dim1", "dim2", "dim3"];
    if extended {
        header.extend(["ho", "br", "foldable"]);
    }
    w.write_record(&header)?;

    type Unit = (Option<u64>, Dims3, bool, bool, bool);
    for s in shipments {
        let units: Vec<Unit> = s
            .cartons
            .iter()
            .map(|c| (c.item_id, c.dims, c.height_oriented, c.bottom_resting, false))
            .chain(s.foldables.iter().map(|f| (f.item_id, f.dims, false, false, true)))
            .collect();
        let mut k = 0;
        while k < units.len() {
            let mut run = 1;
            while k + run < units.len() && units[k + run] == units[k] {
                run += 1;
            }
            let (iid, d, ho, br, fold) = units[k];
            let mut rec = vec![
                s.id.to_string(),
                iid.unwrap_or(0).to_string(),
                run.to_string(),
                fmt_len(d.a),
                fmt_len(d.b),
                fmt_len(d.c),
            ];
            if extended {
                for f in [ho, br, fold] {
                    rec.push(u8::from(f).to_string());
                }
            }
            w.write_record(&rec)?;
            k += run;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_shipments(path: impl AsRef<Path>, shipments: &[Shipment]) -> Result<()> {
    write_shipments(File::create(path)?, shipments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_row_from_published_table() {
        let set = parse_boxes_str("958,12,7,6\n5284,40,20,16\n", BoxCsvOptions::default()).unwrap();
        let b = set.get(0);
        assert_eq!(b.id, 958);
        assert_eq!(b.inner, Dims3::new(12., 7., 6.).unwrap());
        assert_eq!(b.volume, 504.0);
        assert_eq!(set.get(1).volume, 12800.0);
    }

    #[test]
    fn header_is_optional_and_dims_are_resorted() {
        let set = parse_boxes_str("box_id,dim1,dim2,dim3\n1,2,9,3\n", BoxCsvOptions::default()).unwrap();
        assert_eq!(set.get(0).inner, Dims3::new(9., 3., 2.).unwrap());
        let kept = parse_boxes_str("1,2,9,3\n", BoxCsvOptions { sort_dims: false }).unwrap();
        assert_eq!(kept.get(0).inner, Dims3::new(2., 9., 3.).unwrap());
    }

    #[test]
    fn quantities_expand_and_rows_group() {
        let text = "shipment_id,item_id,quantity,dim1,dim2,dim3\n7,1,2,3,2,1\n7,2,1,4,4,4\n8,1,1,3,2,1\n";
        let s = parse_shipments_str(text, None).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].id, 7);
        assert_eq!(s[0].cartons.len(), 3);
        assert_eq!(s[1].cartons.len(), 1);
    }

    #[test]
    fn flags_and_item_lookup() {
        let mut items = HashMap::new();
        items.insert(5, Dims3::new(3., 2., 1.).unwrap());
        let s = parse_shipments_str("1,5,2\n", Some(&items)).unwrap();
        assert_eq!(s[0].cartons.len(), 2);

        let text = "shipment_id,item_id,quantity,dim1,dim2,dim3,ho,br,foldable\n1,1,1,3,2,1,1,0,0\n1,2,1,2,2,2,0,0,1\n";
        let s = parse_shipments_str(text, None).unwrap();
        assert!(s[0].cartons[0].height_oriented);
        assert_eq!(s[0].foldables.len(), 1);

        let bad = "shipment_id,item_id,quantity,dim1,dim2,dim3,ho,br,foldable\n1,1,1,3,2,1,1,0,1\n";
        assert!(parse_shipments_str(bad, None).is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_boxes_str("1,2,3,4\n2,2,x,4\n", BoxCsvOptions::default()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_boxes_str("1,2,0,4\n", BoxCsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_boxes_str("1,2,3,4\n1,5,5,5\n", BoxCsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn shipments_round_trip() {
        let text = "shipment_id,item_id,quantity,dim1,dim2,dim3,ho,br,foldable\n\
                    1,1,2,3,2,1,0,0,0\n1,4,1,5,5,1,1,1,0\n2,9,3,1.5,1,1,0,0,1\n";
        let a = parse_shipments_str(text, None).unwrap();
        let mut buf = Vec::new();
        write_shipments(&mut buf, &a).unwrap();
        let b = parse_shipments_str(std::str::from_utf8(&buf).unwrap(), None).unwrap();
        assert_eq!(a, b);
    }
}
