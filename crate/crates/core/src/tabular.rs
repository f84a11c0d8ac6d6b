//! Typed tabular data with explicit missing cells.
//!
//! A [`Schema`] declares every predictor column up front, including the
//! ordered level list of nominal columns. Loading a CSV validates each cell
//! against it; values outside a declared level list are load errors, so the
//! level set can never drift between folds.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` declared in schema but absent from file")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{value}` as a number in column `{column}`")]
    Unparsable {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: value `{value}` is not a declared level of column `{column}`")]
    UnknownLevel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: outcome cell is missing")]
    MissingOutcome { row: usize },
    #[error("row {row}: outcome `{value}` is neither the positive nor the negative label")]
    BadOutcome { row: usize, value: String },
    #[error("row {row}: subject id is missing")]
    MissingId { row: usize },
    #[error("row index {index} out of range for {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("split would leave an empty part")]
    EmptyPart,
    #[error("dataset has no rows")]
    Empty,
    #[error("{0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, TabularError>;

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnKind {
    Numeric,
    /// Sorted, deduplicated, non-empty level list.
    Nominal(Vec<String>),
}

impl ColumnKind {
    pub fn nominal<I, S>(levels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = levels.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(TabularError::Schema("nominal column needs at least one level".into()));
        }
        Ok(ColumnKind::Nominal(set.into_iter().collect()))
    }

    pub fn levels(&self) -> Option<&[String]> {
        match self {
            ColumnKind::Numeric => None,
            ColumnKind::Nominal(levels) => Some(levels),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeSpec {
    pub name: String,
    pub positive: String,
    /// When declared, outcome cells must be one of the two labels.
    pub negative: Option<String>,
}

impl OutcomeSpec {
    pub fn negative_label(&self) -> &str {
        self.negative.as_deref().unwrap_or("0")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    columns: Vec<ColumnSpec>,
    index: HashMap<String, usize>,
    pub outcome: Option<OutcomeSpec>,
    pub id: Option<String>,
    pub na: String,
}

impl Schema {
    pub fn new(
        columns: Vec<ColumnSpec>,
        outcome: Option<OutcomeSpec>,
        id: Option<String>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(columns.len());
        for (i, c) in columns.iter().enumerate() {
            if index.insert(c.name.clone(), i).is_some() {
                return Err(TabularError::Schema(format!("duplicate column `{}`", c.name)));
            }
            if let ColumnKind::Nominal(levels) = &c.kind {
                if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(TabularError::Schema(format!(
                        "levels of `{}` must be non-empty and strictly sorted",
                        c.name
                    )));
                }
            }
        }
        if let Some(o) = &outcome {
            if index.contains_key(&o.name) {
                return Err(TabularError::Schema(format!(
                    "outcome `{}` is also listed as a predictor",
                    o.name
                )));
            }
        }
        if let Some(id) = &id {
            if index.contains_key(id) || outcome.as_ref().is_some_and(|o| &o.name == id) {
                return Err(TabularError::Schema(format!("id column `{id}` clashes with another column")));
            }
        }
        Ok(Schema { columns, index, outcome, id, na: "NA".to_string() })
    }

    pub fn with_na(mut self, token: impl Into<String>) -> Self {
        self.na = token.into();
        self
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Same schema with a different outcome declaration.
    pub fn with_outcome(&self, outcome: Option<OutcomeSpec>) -> Result<Self> {
        let mut s = Schema::new(self.columns.clone(), outcome, self.id.clone())?;
        s.na = self.na.clone();
        Ok(s)
    }

    /// Same schema with one more predictor appended.
    pub fn with_column(&self, column: ColumnSpec) -> Result<Self> {
        let mut cols = self.columns.clone();
        cols.push(column);
        let mut s = Schema::new(cols, self.outcome.clone(), self.id.clone())?;
        s.na = self.na.clone();
        Ok(s)
    }

    /// Parses the plain-text schema format: one `name,kind[,level|level|...]`
    /// line per predictor plus `outcome=`, `positive=`, `negative=`, `id=`
    /// and `na=` directives. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        let mut outcome = None;
        let mut positive = None;
        let mut negative = None;
        let mut id = None;
        let mut na = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = directive(line) {
                let value = value.trim().to_string();
                match key {
                    "outcome" => outcome = Some(value),
                    "positive" => positive = Some(value),
                    "negative" => negative = Some(value),
                    "id" => id = Some(value),
                    "na" => na = Some(value),
                    other => {
                        return Err(TabularError::Schema(format!(
                            "line {}: unknown directive `{other}`",
                            lineno + 1
                        )))
                    }
                }
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let name = parts.next().unwrap_or_default().trim().to_string();
            let kind = parts.next().map(str::trim).unwrap_or_default();
            let kind = match kind {
                "numeric" => ColumnKind::Numeric,
                "nominal" => {
                    let levels = parts.next().ok_or_else(|| {
                        TabularError::Schema(format!("line {}: nominal column needs levels", lineno + 1))
                    })?;
                    ColumnKind::nominal(levels.split('|').map(|l| l.trim().to_string()))?
                }
                other => {
                    return Err(TabularError::Schema(format!(
                        "line {}: unknown column kind `{other}`",
                        lineno + 1
                    )))
                }
            };
            if name.is_empty() {
                return Err(TabularError::Schema(format!("line {}: empty column name", lineno + 1)));
            }
            columns.push(ColumnSpec { name, kind });
        }
        let outcome = match (outcome, positive) {
            (Some(name), Some(positive)) => Some(OutcomeSpec { name, positive, negative }),
            (Some(name), None) => Some(OutcomeSpec { name, positive: "1".into(), negative }),
            (None, Some(_)) => {
                return Err(TabularError::Schema("`positive=` given without `outcome=`".into()))
            }
            (None, None) => None,
        };
        let mut schema = Schema::new(columns, outcome, id)?;
        if let Some(na) = na {
            schema.na = na;
        }
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Schema::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            match &c.kind {
                ColumnKind::Numeric => out.push_str(&format!("{},numeric\n", c.name)),
                ColumnKind::Nominal(levels) => {
                    out.push_str(&format!("{},nominal,{}\n", c.name, levels.join("|")))
                }
            }
        }
        if let Some(o) = &self.outcome {
            out.push_str(&format!("outcome={}\npositive={}\n", o.name, o.positive));
            if let Some(n) = &o.negative {
                out.push_str(&format!("negative={n}\n"));
            }
        }
        if let Some(id) = &self.id {
            out.push_str(&format!("id={id}\n"));
        }
        out.push_str(&format!("na={}\n", self.na));
        out
    }
}

fn directive(line: &str) -> Option<(&str, &str)> {
    let eq = line.find('=')?;
    if line[..eq].contains(',') {
        return None;
    }
    Some((line[..eq].trim(), &line[eq + 1..]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Value(f64),
    /// Index into the column's level list.
    Level(u32),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// Predictor cells and subject ids, without an outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorTable {
    schema: Arc<Schema>,
    cells: Vec<Cell>,
    ids: Vec<String>,
}

impl PredictorTable {
    pub fn new(schema: Arc<Schema>, cells: Vec<Cell>, ids: Vec<String>) -> Result<Self> {
        let p = schema.len();
        if ids.is_empty() {
            return Err(TabularError::Empty);
        }
        if cells.len() != p * ids.len() {
            return Err(TabularError::Schema(format!(
                "expected {} cells for {} rows, got {}",
                p * ids.len(),
                ids.len(),
                cells.len()
            )));
        }
        for (i, cell) in cells.iter().enumerate() {
            let col = &schema.columns()[i % p.max(1)];
            match (cell, &col.kind) {
                (Cell::Level(l), ColumnKind::Nominal(levels)) if (*l as usize) < levels.len() => {}
                (Cell::Value(v), ColumnKind::Numeric) if v.is_finite() => {}
                (Cell::Missing, _) => {}
                _ => {
                    return Err(TabularError::Schema(format!(
                        "cell {:?} invalid for column `{}`",
                        cell, col.name
                    )))
                }
            }
        }
        Ok(PredictorTable { schema, cells, ids })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> &[Cell] {
        let p = self.n_cols();
        &self.cells[row * p..(row + 1) * p]
    }

    fn select(&self, rows: &[usize]) -> PredictorTable {
        let mut cells = Vec::with_capacity(rows.len() * self.n_cols());
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            cells.extend_from_slice(self.row(r));
            ids.push(self.ids[r].clone());
        }
        PredictorTable { schema: self.schema.clone(), cells, ids }
    }
}

/// Predictor table plus a binary outcome (`true` = positive class).
#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    table: PredictorTable,
    outcome: Vec<bool>,
}

impl TabularDataset {
    pub fn new(table: PredictorTable, outcome: Vec<bool>) -> Result<Self> {
        if table.schema.outcome.is_none() {
            return Err(TabularError::Schema("dataset schema declares no outcome".into()));
        }
        if outcome.len() != table.n_rows() {
            return Err(TabularError::Schema(format!(
                "{} outcome values for {} rows",
                outcome.len(),
                table.n_rows()
            )));
        }
        Ok(TabularDataset { table, outcome })
    }

    pub fn table(&self) -> &PredictorTable {
        &self.table
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.table.schema
    }

    pub fn n_rows(&self) -> usize {
        self.table.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.table.n_cols()
    }

    pub fn ids(&self) -> &[String] {
        self.table.ids()
    }

    pub fn outcome(&self) -> &[bool] {
        &self.outcome
    }

    pub fn positives(&self) -> usize {
        self.outcome.iter().filter(|&&y| y).count()
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.table.cell(row, col)
    }

    pub fn row(&self, row: usize) -> &[Cell] {
        self.table.row(row)
    }

    /// Replaces the outcome vector, e.g. with a permutation of itself.
    pub fn with_outcome(&self, outcome: Vec<bool>) -> Result<Self> {
        TabularDataset::new(self.table.clone(), outcome)
    }

    /// Rows at `rows`, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(TabularError::EmptyPart);
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows()) {
            return Err(TabularError::IndexOutOfRange { index: bad, rows: self.n_rows() });
        }
        Ok(TabularDataset {
            table: self.table.select(rows),
            outcome: rows.iter().map(|&r| self.outcome[r]).collect(),
        })
    }

    /// Splits into (rows in `indices`, complement), both in dataset order.
    pub fn split_rows(&self, indices: &[usize]) -> Result<(Self, Self)> {
        let n = self.n_rows();
        let mut chosen = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(TabularError::IndexOutOfRange { index: i, rows: n });
            }
            chosen[i] = true;
        }
        let (inside, outside): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| chosen[i]);
        if inside.is_empty() || outside.is_empty() {
            return Err(TabularError::EmptyPart);
        }
        Ok((self.subset(&inside)?, self.subset(&outside)?))
    }

    pub fn column_missing_fraction(&self, column: &str) -> Result<f64> {
        column_missing_fraction(&self.table, column)
    }

    /// Overwrites one cell; used by leakage tests and generators.
    pub fn set_cell(&mut self, row: usize, col: usize, cell: Cell) -> Result<()> {
        let p = self.n_cols();
        let kind = &self.table.schema.columns()[col].kind;
        let ok = match (&cell, kind) {
            (Cell::Missing, _) => true,
            (Cell::Value(v), ColumnKind::Numeric) => v.is_finite(),
            (Cell::Level(l), ColumnKind::Nominal(levels)) => (*l as usize) < levels.len(),
            _ => false,
        };
        if !ok {
            return Err(TabularError::Schema(format!("cell {cell:?} invalid for column {col}")));
        }
        self.table.cells[row * p + col] = cell;
        Ok(())
    }
}

pub fn column_missing_fraction(table: &PredictorTable, column: &str) -> Result<f64> {
    let col = table
        .schema
        .position(column)
        .ok_or_else(|| TabularError::UnknownColumn(column.to_string()))?;
    let missing = (0..table.n_rows()).filter(|&r| table.cell(r, col).is_missing()).count();
    Ok(missing as f64 / table.n_rows() as f64)
}

enum Slot {
    Predictor(usize),
    Outcome,
    Id,
}

fn parse_records<R: Read>(
    reader: R,
    schema: &Arc<Schema>,
    want_outcome: bool,
) -> Result<(PredictorTable, Vec<bool>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut slots = Vec::with_capacity(headers.len());
    let mut seen = vec![false; schema.len()];
    let mut has_outcome = false;
    let mut has_id = false;
    for h in headers.iter() {
        let h = h.trim();
        if let Some(p) = schema.position(h) {
            if seen[p] {
                return Err(TabularError::Schema(format!("column `{h}` appears twice in header")));
            }
            seen[p] = true;
            slots.push(Slot::Predictor(p));
        } else if schema.outcome.as_ref().is_some_and(|o| o.name == h) {
            has_outcome = true;
            slots.push(Slot::Outcome);
        } else if schema.id.as_deref() == Some(h) {
            has_id = true;
            slots.push(Slot::Id);
        } else {
            return Err(TabularError::UnknownColumn(h.to_string()));
        }
    }
    if let Some(p) = seen.iter().position(|s| !s) {
        return Err(TabularError::MissingColumn(schema.columns()[p].name.clone()));
    }
    if want_outcome && !has_outcome {
        let name = schema.outcome.as_ref().map(|o| o.name.clone()).unwrap_or_default();
        return Err(TabularError::MissingColumn(name));
    }
    if let (Some(id), false) = (&schema.id, has_id) {
        return Err(TabularError::MissingColumn(id.clone()));
    }

    let p = schema.len();
    let mut cells = Vec::new();
    let mut ids = Vec::new();
    let mut outcome = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let base = cells.len();
        cells.resize(base + p, Cell::Missing);
        let mut id = None;
        for (slot, raw) in slots.iter().zip(record.iter()) {
            let value = raw.trim();
            let missing = value.is_empty() || value == schema.na;
            match slot {
                Slot::Predictor(c) => {
                    if missing {
                        continue;
                    }
                    let col = &schema.columns()[*c];
                    cells[base + c] = match &col.kind {
                        ColumnKind::Numeric => match value.parse::<f64>() {
                            Ok(v) if v.is_finite() => Cell::Value(v),
                            _ => {
                                return Err(TabularError::Unparsable {
                                    row,
                                    column: col.name.clone(),
                                    value: value.to_string(),
                                })
                            }
                        },
                        ColumnKind::Nominal(levels) => {
                            match levels.binary_search_by(|l| l.as_str().cmp(value)) {
                                Ok(i) => Cell::Level(i as u32),
                                Err(_) => {
                                    return Err(TabularError::UnknownLevel {
                                        row,
                                        column: col.name.clone(),
                                        value: value.to_string(),
                                    })
                                }
                            }
                        }
                    };
                }
                Slot::Outcome => {
                    if !want_outcome {
                        continue;
                    }
                    let spec = schema.outcome.as_ref().expect("outcome slot implies spec");
                    if missing {
                        return Err(TabularError::MissingOutcome { row });
                    }
                    if value == spec.positive {
                        outcome.push(true);
                    } else if spec.negative.as_deref().is_none_or(|n| n == value) {
                        outcome.push(false);
                    } else {
                        return Err(TabularError::BadOutcome { row, value: value.to_string() });
                    }
                }
                Slot::Id => {
                    if missing {
                        return Err(TabularError::MissingId { row });
                    }
                    id = Some(value.to_string());
                }
            }
        }
        ids.push(id.unwrap_or_else(|| format!("row{}", row + 1)));
    }
    let table = PredictorTable::new(schema.clone(), cells, ids)?;
    Ok((table, outcome))
}

/// Loads a CSV whose header matches the schema's predictors, outcome and id
/// column as a set. Rows keep file order.
pub fn load_csv(path: impl AsRef<Path>, schema: &Arc<Schema>) -> Result<TabularDataset> {
    read_csv(fs::File::open(path)?, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Arc<Schema>) -> Result<TabularDataset> {
    if schema.outcome.is_none() {
        return Err(TabularError::Schema("schema declares no outcome column".into()));
    }
    let (table, outcome) = parse_records(reader, schema, true)?;
    TabularDataset::new(table, outcome)
}

/// Loads predictors only; an outcome column, if present and declared, is ignored.
pub fn load_predictors(path: impl AsRef<Path>, schema: &Arc<Schema>) -> Result<PredictorTable> {
    Ok(parse_records(fs::File::open(path)?, schema, false)?.0)
}

pub fn write_csv<W: Write>(ds: &TabularDataset, writer: W) -> Result<()> {
    write_table(ds.table(), Some(ds.outcome()), writer)
}

pub fn write_table<W: Write>(table: &PredictorTable, outcome: Option<&[bool]>, writer: W) -> Result<()> {
    let schema = table.schema();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = Vec::new();
    if let Some(id) = &schema.id {
        header.push(id);
    }
    header.extend(schema.columns().iter().map(|c| c.name.as_str()));
    let spec = schema.outcome.as_ref().filter(|_| outcome.is_some());
    if let Some(o) = spec {
        header.push(&o.name);
    }
    w.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for r in 0..table.n_rows() {
        record.clear();
        if schema.id.is_some() {
            record.push(table.ids()[r].clone());
        }
        for (c, col) in schema.columns().iter().enumerate() {
            record.push(match (table.cell(r, c), &col.kind) {
                (Cell::Missing, _) => schema.na.clone(),
                (Cell::Value(v), _) => format!("{v}"),
                (Cell::Level(l), ColumnKind::Nominal(levels)) => levels[l as usize].clone(),
                (Cell::Level(l), ColumnKind::Numeric) => l.to_string(),
            });
        }
        if let (Some(o), Some(y)) = (spec, outcome) {
            record.push(if y[r] { o.positive.clone() } else { o.negative_label().to_string() });
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema() -> Arc<Schema> {
        Arc::new(
            Schema::parse(
                "age,numeric\nsex,nominal,M|F\nscore,numeric\noutcome=dx\npositive=AD\nnegative=CN\nid=subject\n",
            )
            .unwrap(),
        )
    }

    const CSV: &str = "subject,age,sex,score,dx\ns1,70,M,NA,AD\ns2,71.5,F,3,CN\ns3,,M,4,CN\n";

    #[test]
    fn nominal_levels_sorted_and_indexed() {
        let ds = read_csv(CSV.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.schema().columns()[1].kind.levels().unwrap(), ["F", "M"]);
        let sex: Vec<_> = (0..3).map(|r| ds.cell(r, 1)).collect();
        assert_eq!(sex, vec![Cell::Level(1), Cell::Level(0), Cell::Level(1)]);
        assert_eq!(ds.outcome(), &[true, false, false]);
        assert_eq!(ds.cell(0, 2), Cell::Missing);
        assert_eq!(ds.cell(2, 0), Cell::Missing);
    }

    #[test]
    fn all_na_column_is_all_missing() {
        let text = "subject,age,sex,score,dx\ns1,70,M,NA,AD\ns2,71,F,NA,CN\n";
        let ds = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.column_missing_fraction("score").unwrap(), 1.0);
        assert_eq!(ds.column_missing_fraction("sex").unwrap(), 0.0);
        assert!(ds.column_missing_fraction("nope").is_err());
    }

    #[test]
    fn load_errors() {
        let s = schema();
        let unknown = "subject,age,sex,score,dx,extra\ns1,1,M,1,AD,0\n";
        assert!(matches!(read_csv(unknown.as_bytes(), &s), Err(TabularError::UnknownColumn(_))));
        let bad_num = "subject,age,sex,score,dx\ns1,old,M,1,AD\n";
        assert!(matches!(read_csv(bad_num.as_bytes(), &s), Err(TabularError::Unparsable { .. })));
        let bad_level = "subject,age,sex,score,dx\ns1,1,X,1,AD\n";
        assert!(matches!(read_csv(bad_level.as_bytes(), &s), Err(TabularError::UnknownLevel { .. })));
        let no_outcome = "subject,age,sex,score,dx\ns1,1,M,1,NA\n";
        assert!(matches!(read_csv(no_outcome.as_bytes(), &s), Err(TabularError::MissingOutcome { .. })));
        let missing_col = "subject,age,sex,dx\ns1,1,M,AD\n";
        assert!(matches!(read_csv(missing_col.as_bytes(), &s), Err(TabularError::MissingColumn(_))));
    }

    #[test]
    fn schema_rejects_outcome_as_predictor() {
        let err = Schema::parse("dx,numeric\noutcome=dx\npositive=1\n");
        assert!(err.is_err());
        assert!(Schema::parse("a,numeric\na,numeric\n").is_err());
        assert!(Schema::parse("a,categorical\n").is_err());
    }

    #[test]
    fn schema_text_round_trip() {
        let s = schema();
        assert_eq!(Schema::parse(&s.to_text()).unwrap(), *s);
    }

    #[test]
    fn split_rows_cases() {
        let s = schema();
        let mut text = String::from("subject,age,sex,score,dx\n");
        for i in 0..10 {
            text.push_str(&format!("s{i},{i},M,1,CN\n"));
        }
        let ds = read_csv(text.as_bytes(), &s).unwrap();
        let (a, b) = ds.split_rows(&[0, 1, 2]).unwrap();
        assert_eq!((a.n_rows(), b.n_rows()), (3, 7));
        let (a, b) = ds.split_rows(&[9]).unwrap();
        assert_eq!((a.n_rows(), b.n_rows()), (1, 9));
        assert_eq!(a.ids(), &["s9"]);
        let all: Vec<usize> = (0..10).collect();
        assert!(matches!(ds.split_rows(&all), Err(TabularError::EmptyPart)));
        assert!(matches!(ds.split_rows(&[10]), Err(TabularError::IndexOutOfRange { .. })));
    }

    fn cell_strategy() -> impl Strategy<Value = (Option<f64>, Option<bool>, bool)> {
        (
            prop::option::of(-1e6f64..1e6),
            prop::option::of(any::<bool>()),
            any::<bool>(),
        )
    }

    proptest! {
        #[test]
        fn csv_round_trip_and_split_partition(rows in prop::collection::vec(cell_strategy(), 2..40), pick in any::<u64>()) {
            let s = schema();
            let mut text = String::from("subject,age,sex,score,dx\n");
            for (i, (age, sex, y)) in rows.iter().enumerate() {
                let age = age.map(|v| v.to_string()).unwrap_or("NA".into());
                let sex = match sex { Some(true) => "M", Some(false) => "F", None => "NA" };
                text.push_str(&format!("s{i},{age},{sex},{},{}\n", i % 3, if *y { "AD" } else { "CN" }));
            }
            let ds = read_csv(text.as_bytes(), &s).unwrap();
            let mut out = Vec::new();
            write_csv(&ds, &mut out).unwrap();
            prop_assert_eq!(String::from_utf8(out.clone()).unwrap(), text.clone());
            let again = read_csv(out.as_slice(), &s).unwrap();
            prop_assert_eq!(&again, &ds);

            let n = ds.n_rows();
            let idx: Vec<usize> = (0..n).filter(|i| (pick >> (i % 64)) & 1 == 1).collect();
            if !idx.is_empty() && idx.len() < n {
                let (a, b) = ds.split_rows(&idx).unwrap();
                prop_assert_eq!(a.n_rows() + b.n_rows(), n);
                let mut ids: Vec<String> = a.ids().iter().chain(b.ids()).cloned().collect();
                ids.sort();
                let mut orig = ds.ids().to_vec();
                orig.sort();
                prop_assert_eq!(ids, orig);
            }
        }

        #[test]
        fn loading_is_order_stable(perm_seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let s = schema();
            let lines: Vec<String> = (0..12).map(|i| format!("s{i},{},F,{},CN\n", i * 2, i)).collect();
            let mut order: Vec<usize> = (0..12).collect();
            order.shuffle(&mut crate::seed::Seed(perm_seed).rng());
            let base = read_csv(format!("subject,age,sex,score,dx\n{}", lines.concat()).as_bytes(), &s).unwrap();
            let shuffled: String = order.iter().map(|&i| lines[i].as_str()).collect();
            let perm = read_csv(format!("subject,age,sex,score,dx\n{shuffled}").as_bytes(), &s).unwrap();
            prop_assert_eq!(perm, base.subset(&order).unwrap());
        }
    }
}
