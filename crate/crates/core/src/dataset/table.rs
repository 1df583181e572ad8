use std::collections::HashSet;
use std::path::Path;

use ndarray::Array2;

use super::ClassLabel;
use crate::io_util::fmt_f64;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub cell_id: u32,
    pub sample_id: String,
    /// Pixel coordinates `(x, y)` = (column, row).
    pub centroid: (f64, f64),
    pub label: ClassLabel,
    pub features: Vec<f64>,
}

/// Per-cell feature rows sharing one column schema.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<CellRecord>,
}

const FIXED_COLUMNS: [&str; 5] = ["cell_id", "sample_id", "cx", "cy", "label"];

impl CellTable {
    pub fn new(feature_names: Vec<String>) -> Self {
        Self { feature_names, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn push(&mut self, row: CellRecord) -> Result<()> {
        if row.features.len() != self.feature_names.len() {
            return Err(Error::DimensionMismatch {
                context: format!("features of cell {}/{}", row.sample_id, row.cell_id),
                expected: self.feature_names.len(),
                found: row.features.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Checks uniform row length and unique `(sample_id, cell_id)` keys.
    pub fn check(&self) -> Result<()> {
        let mut keys = HashSet::new();
        for r in &self.rows {
            if r.features.len() != self.feature_names.len() {
                return Err(Error::DimensionMismatch {
                    context: format!("features of cell {}/{}", r.sample_id, r.cell_id),
                    expected: self.feature_names.len(),
                    found: r.features.len(),
                });
            }
            if !keys.insert((r.sample_id.as_str(), r.cell_id)) {
                return Err(Error::invalid(format!("duplicate cell {}/{}", r.sample_id, r.cell_id)));
            }
        }
        Ok(())
    }

    /// Sorts rows by `(sample_id, cell_id)`, the canonical node order.
    pub fn sort_canonical(&mut self) {
        self.rows.sort_by(|a, b| a.sample_id.cmp(&b.sample_id).then(a.cell_id.cmp(&b.cell_id)));
    }

    /// Pools tables with identical schemas, sorted canonically.
    pub fn concat<'a>(tables: impl IntoIterator<Item = &'a CellTable>) -> Result<CellTable> {
        let mut iter = tables.into_iter();
        let Some(first) = iter.next() else {
            return Ok(CellTable::default());
        };
        let mut out = first.clone();
        for t in iter {
            if t.feature_names != out.feature_names {
                return Err(Error::DimensionMismatch {
                    context: "feature schema across samples".into(),
                    expected: out.feature_names.len(),
                    found: t.feature_names.len(),
                });
            }
            out.rows.extend(t.rows.iter().cloned());
        }
        out.sort_canonical();
        out.check()?;
        Ok(out)
    }

    pub fn matrix(&self) -> Array2<f64> {
        let p = self.n_features();
        let mut m = Array2::zeros((self.rows.len(), p));
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in r.features.iter().enumerate() {
                m[[i, j]] = *v;
            }
        }
        m
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn centroids(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| r.centroid).collect()
    }

    pub fn sample_ids(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.sample_id.as_str()).collect()
    }

    /// Returns a copy whose feature columns are replaced by `m` (row-aligned).
    pub fn with_features(&self, names: Vec<String>, m: &Array2<f64>) -> Result<CellTable> {
        if m.nrows() != self.rows.len() || m.ncols() != names.len() {
            return Err(Error::DimensionMismatch {
                context: "replacement feature matrix".into(),
                expected: self.rows.len(),
                found: m.nrows(),
            });
        }
        let rows =
            self.rows.iter().zip(m.rows()).map(|(r, f)| CellRecord { features: f.to_vec(), ..r.clone() }).collect();
        Ok(CellTable { feature_names: names, rows })
    }

    /// CSV with header `cell_id,sample_id,cx,cy,label,<features>`; floats carry
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let header: Vec<&str> =
            FIXED_COLUMNS.iter().copied().chain(self.feature_names.iter().map(String::as_str)).collect();
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.cell_id.to_string(),
                r.sample_id.clone(),
                fmt_f64(r.centroid.0),
                fmt_f64(r.centroid.1),
                r.label.as_i8().to_string(),
            ];
            rec.extend(r.features.iter().map(|&v| fmt_f64(v)));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<CellTable> {
        let bad = |message: String| Error::Malformed { sample_id: None, path: path.to_path_buf(), message };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.len() < FIXED_COLUMNS.len() || header.iter().take(5).ne(FIXED_COLUMNS.iter().copied()) {
            return Err(bad(format!("header must start with {}", FIXED_COLUMNS.join(","))));
        }
        let names: Vec<String> = header.iter().skip(5).map(str::to_string).collect();
        let mut table = CellTable::new(names);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let line = i + 2;
            let num = |j: usize| -> Result<f64> {
                rec[j].parse::<f64>().map_err(|_| bad(format!("line {line}: column {} is not a number", &header[j])))
            };
            let cell_id = rec[0].parse::<u32>().map_err(|_| bad(format!("line {line}: bad cell_id")))?;
            let label = rec[4]
                .parse::<i8>()
                .ok()
                .and_then(ClassLabel::from_i8)
                .ok_or_else(|| bad(format!("line {line}: bad label")))?;
            let features = (5..rec.len()).map(num).collect::<Result<Vec<_>>>()?;
            table.push(CellRecord {
                cell_id,
                sample_id: rec[1].to_string(),
                centroid: (num(2)?, num(3)?),
                label,
                features,
            })?;
        }
        table.check()?;
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(sample: &str, id: u32, f: Vec<f64>) -> CellRecord {
        CellRecord {
            cell_id: id,
            sample_id: sample.into(),
            centroid: (id as f64 * 0.5, 1.0 / 3.0),
            label: ClassLabel::Tumor,
            features: f,
        }
    }

    #[test]
    fn push_checks_length_and_check_finds_duplicates() {
        let mut t = CellTable::new(vec!["a".into()]);
        assert!(t.push(record("s", 1, vec![1.0, 2.0])).is_err());
        t.push(record("s", 1, vec![1.0])).unwrap();
        t.push(record("s", 1, vec![2.0])).unwrap();
        assert!(t.check().is_err());
    }

    #[test]
    fn concat_sorts_and_checks_schema() {
        let mut a = CellTable::new(vec!["x".into()]);
        a.push(record("s2", 1, vec![1.0])).unwrap();
        let mut b = CellTable::new(vec!["x".into()]);
        b.push(record("s1", 5, vec![2.0])).unwrap();
        b.push(record("s1", 3, vec![3.0])).unwrap();
        let c = CellTable::concat([&a, &b]).unwrap();
        let keys: Vec<_> = c.rows.iter().map(|r| (r.sample_id.as_str(), r.cell_id)).collect();
        assert_eq!(keys, vec![("s1", 3), ("s1", 5), ("s2", 1)]);
        let d = CellTable::new(vec!["y".into()]);
        assert!(CellTable::concat([&a, &d]).is_err());
    }

    #[test]
    fn csv_header_layout() {
        let mut t = CellTable::new(vec!["CD3".into()]);
        t.push(record("s", 2, vec![15.0])).unwrap();
        let csv = t.to_csv();
        let first = csv.lines().next().unwrap();
        assert_eq!(first, "cell_id,sample_id,cx,cy,label,CD3");
        assert!(csv.lines().nth(1).unwrap().starts_with("2,s,1.0000000000000000e0,3.3333333333333331e-1,1,"));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 0..6)) {
            let names: Vec<String> = (0..vals.len()).map(|i| format!("f{i}")).collect();
            let mut t = CellTable::new(names);
            t.push(record("a,b", 9, vals.clone())).unwrap();
            let back = CellTable::from_csv(&t.to_csv(), Path::new("t.csv")).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
