//! Train-only preprocessing: missingness drop, center/scale, KNN imputation
//! and dummy coding.
//!
//! [`PreprocessModel::fit`] sees only the training partition. Everything
//! [`PreprocessModel::transform`] needs (means, SDs, the standardized KNN
//! reference rows, modes, dummy map) is frozen at fit time, so test rows are
//! transformed with training statistics only.
//!
//! Transform order: standardize numerics, KNN-impute missing numerics in the
//! standardized space, mode-impute missing nominals, expand nominals into
//! indicator columns (first sorted level is the dropped reference).
//!
//! Output columns follow schema order over retained columns: a numeric
//! column yields one feature named after it; a nominal column with levels
//! `l0 < l1 < ...` yields features `name=l1`, `name=l2`, and so on.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::Matrix;
use crate::tabular::{Cell, ColumnKind, ColumnSpec, Schema, TabularDataset};

/// Columns with a missing fraction strictly above this are dropped.
pub const MAX_MISSING_FRACTION: f64 = 0.90;
pub const DEFAULT_NEIGHBORS: usize = 5;
const ARTIFACT_HEADER: &str = "nestprog-preprocess v1";

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("neighbor count must be at least 1")]
    ZeroNeighbors,
    #[error("every predictor was dropped during fit")]
    AllDropped,
    #[error("dataset schema does not match the fitted schema: {0}")]
    SchemaMismatch(String),
    #[error("malformed preprocess artifact at line {line}: {message}")]
    Artifact { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq)]
struct NumericStat {
    column: usize,
    mean: f64,
    sd: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct NominalStat {
    column: usize,
    n_levels: usize,
    mode: u32,
}

/// Names of the transformed feature columns and the schema variable each came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMap {
    pub names: Vec<String>,
    pub parents: Vec<String>,
}

impl FeatureMap {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Distinct parent variables in first-appearance order, each with its feature indices.
    pub fn groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, p) in self.parents.iter().enumerate() {
            match out.iter_mut().find(|(name, _)| name == p) {
                Some((_, idx)) => idx.push(i),
                None => out.push((p.clone(), vec![i])),
            }
        }
        out
    }
}

/// Numeric design matrix produced by [`PreprocessModel::transform`].
#[derive(Clone, Debug)]
pub struct Design {
    pub x: Matrix,
    pub y: Vec<bool>,
    pub features: FeatureMap,
    /// Cells that fell back to the train mean because no reference row observed the column.
    pub fallback_imputations: usize,
}

/// Standardized training rows with an observed mask, used as the KNN reference.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnReference {
    width: usize,
    values: Vec<Option<f64>>,
}

impl KnnReference {
    pub fn new(width: usize, values: Vec<Option<f64>>) -> Self {
        assert!(width > 0 && values.len().is_multiple_of(width), "reference shape");
        KnnReference { width, values }
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[Option<f64>] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    /// Up to `k` nearest reference rows that observe column `j`, nearest first.
    /// Rows sharing no observed feature with the target are skipped; equal
    /// distances keep the lower row index first.
    pub fn neighbors(&self, target: &[Option<f64>], j: usize, k: usize) -> Vec<usize> {
        let mut cands: Vec<(f64, usize)> = (0..self.rows())
            .filter(|&r| self.row(r)[j].is_some())
            .filter_map(|r| masked_distance(target, self.row(r)).map(|d| (d, r)))
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.truncate(k);
        cands.into_iter().map(|(_, r)| r).collect()
    }

    /// Mean of column `j` over the `k` nearest rows observing it, or `None` if no row does.
    pub fn impute(&self, target: &[Option<f64>], j: usize, k: usize) -> Option<f64> {
        let nb = self.neighbors(target, j, k);
        if nb.is_empty() {
            return None;
        }
        let sum: f64 = nb.iter().map(|&r| self.row(r)[j].expect("filtered on observed")).sum();
        Some(sum / nb.len() as f64)
    }

    /// Most frequent level among the `k` nearest rows that observe `levels`;
    /// ties go to the smallest level index.
    pub fn impute_level(&self, target: &[Option<f64>], levels: &[Option<u32>], k: usize) -> Option<u32> {
        assert_eq!(levels.len(), self.rows());
        let mut cands: Vec<(f64, usize)> = (0..self.rows())
            .filter(|&r| levels[r].is_some())
            .filter_map(|r| masked_distance(target, self.row(r)).map(|d| (d, r)))
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.truncate(k);
        let mut counts: Vec<(u32, usize)> = Vec::new();
        for (_, r) in cands {
            let l = levels[r].expect("filtered on observed");
            match counts.iter_mut().find(|(lv, _)| *lv == l) {
                Some((_, c)) => *c += 1,
                None => counts.push((l, 1)),
            }
        }
        counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(l, _)| l)
    }
}

/// `sqrt(p / p_common * Σ (a_i - b_i)²)` over features observed in both rows,
/// or `None` when they share none.
pub fn masked_distance(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let mut common = 0usize;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            common += 1;
            sum += (x - y) * (x - y);
        }
    }
    (common > 0).then(|| (a.len() as f64 / common as f64 * sum).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessModel {
    k: usize,
    fitted_columns: Vec<ColumnSpec>,
    numeric: Vec<NumericStat>,
    nominal: Vec<NominalStat>,
    reference: KnnReference,
    features: FeatureMap,
}

impl PreprocessModel {
    pub fn fit(train: &TabularDataset, k: usize) -> Result<Self, PreprocessError> {
        let n = train.n_rows();
        if n < 2 {
            return Err(PreprocessError::TooFewRows(n));
        }
        if k == 0 {
            return Err(PreprocessError::ZeroNeighbors);
        }
        let schema = train.schema();
        let mut numeric = Vec::new();
        let mut nominal = Vec::new();
        for (c, col) in schema.columns().iter().enumerate() {
            let observed: Vec<Cell> = (0..n).map(|r| train.cell(r, c)).filter(|x| !x.is_missing()).collect();
            let missing_fraction = (n - observed.len()) as f64 / n as f64;
            if missing_fraction > MAX_MISSING_FRACTION {
                log::info!("dropping `{}`: {:.3} missing on train", col.name, missing_fraction);
                continue;
            }
            match &col.kind {
                ColumnKind::Numeric => {
                    let vals: Vec<f64> = observed
                        .iter()
                        .map(|x| match x {
                            Cell::Value(v) => *v,
                            _ => unreachable!("numeric column holds values"),
                        })
                        .collect();
                    if vals.len() < 2 {
                        log::info!("dropping `{}`: fewer than 2 observed values", col.name);
                        continue;
                    }
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64;
                    let sd = var.sqrt();
                    if !(sd > 0.0) || !sd.is_finite() {
                        log::info!("dropping `{}`: zero variance on train", col.name);
                        continue;
                    }
                    numeric.push(NumericStat { column: c, mean, sd });
                }
                ColumnKind::Nominal(levels) => {
                    let mut counts = vec![0usize; levels.len()];
                    for x in &observed {
                        if let Cell::Level(l) = x {
                            counts[*l as usize] += 1;
                        }
                    }
                    // First maximal count: ties go to the lexicographically smallest level.
                    let mode = counts
                        .iter()
                        .enumerate()
                        .fold((0usize, 0usize), |best, (i, &c)| if c > best.1 { (i, c) } else { best })
                        .0;
                    nominal.push(NominalStat { column: c, n_levels: levels.len(), mode: mode as u32 });
                }
            }
        }
        if numeric.is_empty() && nominal.is_empty() {
            return Err(PreprocessError::AllDropped);
        }

        let width = numeric.len().max(1);
        let mut values = Vec::with_capacity(n * width);
        for r in 0..n {
            if numeric.is_empty() {
                values.push(None);
            }
            for s in &numeric {
                values.push(match train.cell(r, s.column) {
                    Cell::Value(v) => Some((v - s.mean) / s.sd),
                    _ => None,
                });
            }
        }
        let fitted_columns = schema.columns().to_vec();
        let features = feature_map(&fitted_columns, &numeric, &nominal);
        Ok(PreprocessModel { k, fitted_columns, numeric, nominal, reference: KnnReference::new(width, values), features })
    }

    pub fn neighbors_k(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn reference(&self) -> &KnnReference {
        &self.reference
    }

    /// Names of retained schema columns, in schema order.
    pub fn retained(&self) -> Vec<&str> {
        let mut cols: Vec<usize> =
            self.numeric.iter().map(|s| s.column).chain(self.nominal.iter().map(|s| s.column)).collect();
        cols.sort_unstable();
        cols.into_iter().map(|c| self.fitted_columns[c].name.as_str()).collect()
    }

    /// Train mean and sample SD of a retained numeric column.
    pub fn numeric_stats(&self, name: &str) -> Option<(f64, f64)> {
        self.numeric
            .iter()
            .find(|s| self.fitted_columns[s.column].name == name)
            .map(|s| (s.mean, s.sd))
    }

    fn check_schema(&self, schema: &Schema) -> Result<(), PreprocessError> {
        if schema.columns() != self.fitted_columns.as_slice() {
            let names: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
            return Err(PreprocessError::SchemaMismatch(format!("got columns {names:?}")));
        }
        Ok(())
    }

    /// Standardized numeric vector of one dataset row, `None` where missing.
    fn standardized_row(&self, row: &[Cell]) -> Vec<Option<f64>> {
        if self.numeric.is_empty() {
            return vec![None];
        }
        self.numeric
            .iter()
            .map(|s| match row[s.column] {
                Cell::Value(v) => Some((v - s.mean) / s.sd),
                _ => None,
            })
            .collect()
    }

    pub fn transform(&self, ds: &TabularDataset) -> Result<Design, PreprocessError> {
        self.check_schema(ds.schema())?;
        let width = self.features.len();
        let mut x = Matrix::zeros(ds.n_rows(), width);
        let mut fallbacks = 0;
        for r in 0..ds.n_rows() {
            let cells = ds.row(r);
            let std = self.standardized_row(cells);
            let mut numeric_out = Vec::with_capacity(self.numeric.len());
            for (j, v) in std.iter().enumerate().take(self.numeric.len()) {
                numeric_out.push(match v {
                    Some(v) => *v,
                    None => match self.reference.impute(&std, j, self.k) {
                        Some(v) => v,
                        None => {
                            fallbacks += 1;
                            log::warn!(
                                "no reference row observes `{}`; imputing train mean",
                                self.fitted_columns[self.numeric[j].column].name
                            );
                            0.0
                        }
                    },
                });
            }
            let out = x.row_mut(r);
            let mut pos = 0;
            let (mut ni, mut ci) = (0, 0);
            for c in 0..self.fitted_columns.len() {
                if ni < self.numeric.len() && self.numeric[ni].column == c {
                    out[pos] = numeric_out[ni];
                    pos += 1;
                    ni += 1;
                } else if ci < self.nominal.len() && self.nominal[ci].column == c {
                    let stat = &self.nominal[ci];
                    let level = match cells[c] {
                        Cell::Level(l) => l,
                        _ => stat.mode,
                    };
                    for l in 1..stat.n_levels {
                        out[pos] = if level as usize == l { 1.0 } else { 0.0 };
                        pos += 1;
                    }
                    ci += 1;
                }
            }
            debug_assert_eq!(pos, width);
        }
        Ok(Design { x, y: ds.outcome().to_vec(), features: self.features.clone(), fallback_imputations: fallbacks })
    }

    /// Versioned plain-text artifact; [`PreprocessModel::from_text`] restores
    /// a model whose transform is bit-identical.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let schema_text: String = self
            .fitted_columns
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Numeric => format!("{},numeric\n", c.name),
                ColumnKind::Nominal(levels) => format!("{},nominal,{}\n", c.name, levels.join("|")),
            })
            .collect();
        writeln!(out, "{ARTIFACT_HEADER}").unwrap();
        writeln!(out, "k {}", self.k).unwrap();
        writeln!(out, "columns {}", self.fitted_columns.len()).unwrap();
        out.push_str(&schema_text);
        for s in &self.numeric {
            writeln!(out, "numeric {} {:?} {:?}", s.column, s.mean, s.sd).unwrap();
        }
        for s in &self.nominal {
            writeln!(out, "nominal {} {}", s.column, s.mode).unwrap();
        }
        writeln!(out, "reference {} {}", self.reference.rows(), self.reference.width()).unwrap();
        for r in 0..self.reference.rows() {
            let line: Vec<String> = self
                .reference
                .row(r)
                .iter()
                .map(|v| v.map_or_else(|| "NA".to_string(), |v| format!("{v:?}")))
                .collect();
            writeln!(out, "{}", line.join(",")).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PreprocessError> {
        let mut lines = text.lines().enumerate().peekable();
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| PreprocessError::Artifact { line: 0, message: format!("missing {what}") })
        };
        let bad = |line: usize, message: &str| PreprocessError::Artifact { line: line + 1, message: message.to_string() };

        let (ln, header) = next("header")?;
        if header != ARTIFACT_HEADER {
            return Err(bad(ln, "unsupported artifact version"));
        }
        let (ln, k_line) = next("k")?;
        let k: usize = k_line.strip_prefix("k ").and_then(|v| v.parse().ok()).ok_or_else(|| bad(ln, "bad k"))?;
        let (ln, cols_line) = next("columns")?;
        let n_cols: usize =
            cols_line.strip_prefix("columns ").and_then(|v| v.parse().ok()).ok_or_else(|| bad(ln, "bad columns"))?;
        let mut schema_text = String::new();
        for _ in 0..n_cols {
            let (_, l) = next("column line")?;
            schema_text.push_str(l);
            schema_text.push('\n');
        }
        let schema = Schema::parse(&schema_text).map_err(|e| bad(ln, &e.to_string()))?;
        let fitted_columns = schema.columns().to_vec();

        let mut numeric = Vec::new();
        let mut nominal = Vec::new();
        let (ref_rows, ref_width, ref_ln) = loop {
            let (ln, l) = next("reference")?;
            let parts: Vec<&str> = l.split(' ').collect();
            match parts.as_slice() {
                ["numeric", c, m, s] => {
                    let column: usize = c.parse().map_err(|_| bad(ln, "bad column index"))?;
                    let mean: f64 = m.parse().map_err(|_| bad(ln, "bad mean"))?;
                    let sd: f64 = s.parse().map_err(|_| bad(ln, "bad sd"))?;
                    numeric.push(NumericStat { column, mean, sd });
                }
                ["nominal", c, m] => {
                    let column: usize = c.parse().map_err(|_| bad(ln, "bad column index"))?;
                    let mode: u32 = m.parse().map_err(|_| bad(ln, "bad mode"))?;
                    let n_levels = fitted_columns
                        .get(column)
                        .and_then(|c| c.kind.levels())
                        .map(<[String]>::len)
                        .ok_or_else(|| bad(ln, "nominal stat on a non-nominal column"))?;
                    nominal.push(NominalStat { column, n_levels, mode });
                }
                ["reference", r, w] => {
                    let r: usize = r.parse().map_err(|_| bad(ln, "bad reference rows"))?;
                    let w: usize = w.parse().map_err(|_| bad(ln, "bad reference width"))?;
                    break (r, w, ln);
                }
                _ => return Err(bad(ln, "unexpected line")),
            }
        };
        if ref_width != numeric.len().max(1) {
            return Err(bad(ref_ln, "reference width does not match numeric columns"));
        }
        let mut values = Vec::with_capacity(ref_rows * ref_width);
        for _ in 0..ref_rows {
            let (ln, l) = next("reference row")?;
            let row: Vec<Option<f64>> = l
                .split(',')
                .map(|v| if v == "NA" { Ok(None) } else { v.parse::<f64>().map(Some) })
                .collect::<Result<_, _>>()
                .map_err(|_| bad(ln, "bad reference value"))?;
            if row.len() != ref_width {
                return Err(bad(ln, "reference row width"));
            }
            values.extend(row);
        }
        let features = feature_map(&fitted_columns, &numeric, &nominal);
        Ok(PreprocessModel { k, fitted_columns, numeric, nominal, reference: KnnReference::new(ref_width, values), features })
    }

    pub fn schema_columns(&self) -> &[ColumnSpec] {
        &self.fitted_columns
    }
}

fn feature_map(columns: &[ColumnSpec], numeric: &[NumericStat], nominal: &[NominalStat]) -> FeatureMap {
    let mut names = Vec::new();
    let mut parents = Vec::new();
    for (c, col) in columns.iter().enumerate() {
        if numeric.iter().any(|s| s.column == c) {
            names.push(col.name.clone());
            parents.push(col.name.clone());
        } else if nominal.iter().any(|s| s.column == c) {
            let levels = col.kind.levels().expect("nominal stat implies levels");
            for l in &levels[1..] {
                names.push(format!("{}={}", col.name, l));
                parents.push(col.name.clone());
            }
        }
    }
    FeatureMap { names, parents }
}

/// Convenience: fit on `train`, transform both parts.
pub fn fit_transform(
    train: &TabularDataset,
    test: &TabularDataset,
    k: usize,
) -> Result<(Arc<PreprocessModel>, Design, Design), PreprocessError> {
    let model = PreprocessModel::fit(train, k)?;
    let tr = model.transform(train)?;
    let te = model.transform(test)?;
    Ok((Arc::new(model), tr, te))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::read_csv;
    use proptest::prelude::*;

    fn schema(extra: &str) -> Arc<Schema> {
        Arc::new(Schema::parse(&format!("a,numeric\nb,numeric\n{extra}outcome=y\npositive=1\n")).unwrap())
    }

    fn ds(schema: &Arc<Schema>, header: &str, rows: &[String]) -> TabularDataset {
        read_csv(format!("{header}\n{}", rows.join("\n")).as_bytes(), schema).unwrap()
    }

    #[test]
    fn drops_columns_strictly_above_ninety_percent_missing() {
        let s = schema("c,numeric\nd,numeric\n");
        // c: 91 of 100 missing; d: exactly 90 of 100 missing.
        let rows: Vec<String> = (0..100)
            .map(|i| {
                let c = if i < 91 { "NA".to_string() } else { i.to_string() };
                let d = if i < 90 { "NA".to_string() } else { (i * 2).to_string() };
                format!("{i},{},{c},{d},{}", i % 7, i % 2)
            })
            .collect();
        let data = ds(&s, "a,b,c,d,y", &rows);
        assert_eq!(data.column_missing_fraction("c").unwrap(), 0.91);
        let m = PreprocessModel::fit(&data, 5).unwrap();
        assert_eq!(m.retained(), vec!["a", "b", "d"]);
    }

    #[test]
    fn sample_sd_and_test_standardization() {
        let s = schema("");
        let train = ds(&s, "a,b,y", &["1,0,0".into(), "2,5,1".into(), "3,1,0".into()]);
        let m = PreprocessModel::fit(&train, 5).unwrap();
        assert_eq!(m.numeric_stats("a"), Some((2.0, 1.0)));
        let test = ds(&s, "a,b,y", &["4,2,1".into()]);
        let d = m.transform(&test).unwrap();
        assert_eq!(d.x.get(0, 0), 2.0);
    }

    #[test]
    fn zero_variance_dropped_and_all_dropped_error() {
        let s = schema("");
        let train = ds(&s, "a,b,y", &["1,7,0".into(), "2,7,1".into()]);
        assert_eq!(PreprocessModel::fit(&train, 1).unwrap().retained(), vec!["a"]);
        let flat = ds(&s, "a,b,y", &["1,7,0".into(), "1,7,1".into()]);
        assert!(matches!(PreprocessModel::fit(&flat, 1), Err(PreprocessError::AllDropped)));
        let one = ds(&s, "a,b,y", &["1,7,0".into()]);
        assert!(matches!(PreprocessModel::fit(&one, 1), Err(PreprocessError::TooFewRows(1))));
    }

    #[test]
    fn dummy_coding_drops_first_level() {
        let s = schema("m,nominal,Married|Divorced|Widowed\n");
        let train = ds(
            &s,
            "a,b,m,y",
            &["1,2,Married,0".into(), "2,1,Divorced,1".into(), "3,4,Widowed,0".into(), "4,3,NA,1".into()],
        );
        let m = PreprocessModel::fit(&train, 2).unwrap();
        assert_eq!(m.features().names, vec!["a", "b", "m=Married", "m=Widowed"]);
        let d = m.transform(&train).unwrap();
        assert_eq!(&d.x.row(0)[2..], &[1.0, 0.0]);
        assert_eq!(&d.x.row(1)[2..], &[0.0, 0.0]);
        // Missing nominal takes the train mode; all counts tie so the smallest level wins.
        assert_eq!(&d.x.row(3)[2..], &[0.0, 0.0]);
        assert_eq!(m.features().groups().len(), 3);
    }

    #[test]
    fn self_transform_is_centered_and_complete() {
        let s = schema("");
        let rows: Vec<String> = (0..40)
            .map(|i| {
                let b = if i % 5 == 0 { "NA".to_string() } else { ((i * 7) % 11).to_string() };
                format!("{},{b},{}", (i as f64 * 0.37).sin(), i % 2)
            })
            .collect();
        let train = ds(&s, "a,b,y", &rows);
        let m = PreprocessModel::fit(&train, 5).unwrap();
        let d = m.transform(&train).unwrap();
        let mean_a: f64 = d.x.column(0).iter().sum::<f64>() / 40.0;
        assert!(mean_a.abs() < 1e-12);
        assert!(d.x.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn knn_examples() {
        let r = KnnReference::new(2, vec![Some(0.0), Some(1.0), Some(1.0), Some(3.0), Some(2.0), Some(5.0)]);
        let target = [Some(0.5), None];
        assert_eq!(r.neighbors(&target, 1, 2), vec![0, 1]);
        assert_eq!(r.impute(&target, 1, 2), Some(2.0));
        // zero distance, K = 1
        let t2 = [Some(2.0), None];
        assert_eq!(r.impute(&t2, 1, 1), Some(5.0));
        // equidistant: each reference differs from the target by 1 on feature 0
        let eq = KnnReference::new(
            2,
            (0..5).flat_map(|i| [Some(if i % 2 == 0 { 1.0 } else { -1.0 }), Some(i as f64)]).collect(),
        );
        assert_eq!(eq.impute(&[Some(0.0), None], 1, 5), Some(2.0));
        // nobody observes the column
        let none = KnnReference::new(2, vec![Some(0.0), None, Some(1.0), None]);
        assert_eq!(none.impute(&[Some(0.0), None], 1, 3), None);
    }

    #[test]
    fn knn_nominal_mode_ties_to_smallest_level() {
        let r = KnnReference::new(1, vec![Some(0.0), Some(0.1), Some(0.2), Some(5.0)]);
        let levels = [Some(2), Some(1), None, Some(1)];
        assert_eq!(r.impute_level(&[Some(0.0)], &levels, 2), Some(1));
        let tied = [Some(2), Some(0), None, None];
        assert_eq!(r.impute_level(&[Some(0.0)], &tied, 2), Some(0));
    }

    #[test]
    fn unobserved_column_falls_back_to_mean() {
        let s = schema("");
        // a and b are never observed together, so no reference shares a feature with any target.
        let train = ds(&s, "a,b,y", &["NA,1,0".into(), "NA,3,1".into(), "1,NA,0".into(), "2,NA,1".into(), "3,NA,1".into()]);
        let m = PreprocessModel::fit(&train, 3).unwrap();
        let d = m.transform(&train).unwrap();
        assert_eq!(d.fallback_imputations, 5);
        assert_eq!(d.x.get(2, 1), 0.0);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let s = schema("");
        let train = ds(&s, "a,b,y", &["1,0,0".into(), "2,5,1".into()]);
        let m = PreprocessModel::fit(&train, 1).unwrap();
        let other = Arc::new(Schema::parse("a,numeric\nz,numeric\noutcome=y\npositive=1\n").unwrap());
        let od = read_csv("a,z,y\n1,2,0\n".as_bytes(), &other).unwrap();
        assert!(matches!(m.transform(&od), Err(PreprocessError::SchemaMismatch(_))));
    }

    fn random_dataset(seed: u64, n: usize) -> TabularDataset {
        use rand::Rng;
        let s = schema("g,nominal,x|y|z\n");
        let mut rng = crate::seed::Seed(seed).rng();
        let rows: Vec<String> = (0..n)
            .map(|_| {
                let mut f = |p: f64| {
                    if rng.random::<f64>() < p { "NA".to_string() } else { format!("{}", rng.random::<f64>() * 10.0) }
                };
                let a = f(0.2);
                let b = f(0.3);
                let g = ["x", "y", "z", "NA"][rng.random_range(0..4)];
                format!("{a},{b},{g},{}", rng.random_range(0..2))
            })
            .collect();
        ds(&s, "a,b,g,y", &rows)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn artifact_round_trip_is_bit_exact(seed in any::<u64>()) {
            let data = random_dataset(seed, 30);
            if let Ok(m) = PreprocessModel::fit(&data, 3) {
                let text = m.to_text();
                let back = PreprocessModel::from_text(&text).unwrap();
                prop_assert_eq!(&back, &m);
                prop_assert_eq!(back.to_text(), text);
                let a = m.transform(&data).unwrap();
                let b = back.transform(&data).unwrap();
                prop_assert_eq!(a.x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                                b.x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            }
        }

        #[test]
        fn imputed_values_within_observed_range(seed in any::<u64>()) {
            let data = random_dataset(seed, 30);
            if let Ok(m) = PreprocessModel::fit(&data, 3) {
                let d = m.transform(&data).unwrap();
                let r = m.reference();
                for j in 0..r.width() {
                    let obs: Vec<f64> = (0..r.rows()).filter_map(|i| r.row(i)[j]).collect();
                    let (lo, hi) = obs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
                    for i in 0..d.x.rows() {
                        let v = d.x.get(i, j);
                        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                    }
                }
                prop_assert_eq!(d.x.cols(), m.features().len());
            }
        }

        #[test]
        fn masked_distance_symmetric(a in prop::collection::vec(prop::option::of(-5.0f64..5.0), 4),
                                     b in prop::collection::vec(prop::option::of(-5.0f64..5.0), 4)) {
            prop_assert_eq!(masked_distance(&a, &b), masked_distance(&b, &a));
        }

        #[test]
        fn fit_ignores_test_rows(seed in any::<u64>(), bump in -100.0f64..100.0) {
            let data = random_dataset(seed, 24);
            let test_idx = [0usize, 5, 11];
            let (test, train) = data.split_rows(&test_idx).unwrap();
            let mut perturbed = data.clone();
            for &r in &test_idx {
                perturbed.set_cell(r, 0, Cell::Value(bump)).unwrap();
                perturbed.set_cell(r, 1, Cell::Missing).unwrap();
            }
            let (_, train2) = perturbed.split_rows(&test_idx).unwrap();
            prop_assert_eq!(&train, &train2);
            prop_assert_ne!(test.n_rows(), 0);
            let a = PreprocessModel::fit(&train, 5).map(|m| m.to_text()).ok();
            let b = PreprocessModel::fit(&train2, 5).map(|m| m.to_text()).ok();
            prop_assert_eq!(a, b);
        }
    }
}
