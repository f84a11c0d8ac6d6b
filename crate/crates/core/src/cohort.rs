//! Baseline cohorts and binary deterioration outcomes.
//!
//! Subjects are grouped by baseline diagnosis. Cognitively normal subjects
//! are positive when their final visit is MCI or AD; MCI subjects are
//! positive only when their final visit is AD. Baseline-AD subjects are
//! excluded.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::tabular::{Cell, ColumnKind, ColumnSpec, OutcomeSpec, PredictorTable, TabularDataset, TabularError};

/// Name of the months-to-last-visit predictor attached to each cohort.
pub const LAST_VISIT: &str = "last_visit";
pub const OUTCOME: &str = "outcome";

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("expected baseline {expected}, record `{subject}` has {actual}")]
    WrongBaseline {
        subject: String,
        expected: Diagnosis,
        actual: Diagnosis,
    },
    #[error("subject `{0}` appears more than once")]
    DuplicateSubject(String),
    #[error("subject `{0}` has no predictor row")]
    Unmatched(String),
    #[error("record line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Diagnosis {
    Cn,
    Mci,
    Ad,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; 3] = [Diagnosis::Cn, Diagnosis::Mci, Diagnosis::Ad];
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Diagnosis::Cn => "CN",
            Diagnosis::Mci => "MCI",
            Diagnosis::Ad => "AD",
        })
    }
}

impl FromStr for Diagnosis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CN" => Ok(Diagnosis::Cn),
            "MCI" => Ok(Diagnosis::Mci),
            "AD" => Ok(Diagnosis::Ad),
            other => Err(format!("unknown diagnosis `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiagnosisRecord {
    pub subject_id: String,
    pub baseline: Diagnosis,
    pub final_dx: Diagnosis,
    pub months_to_last_visit: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cohort {
    /// Cognitively normal at baseline.
    CnBaseline,
    /// Mild cognitive impairment at baseline.
    MciBaseline,
}

impl Cohort {
    pub fn outcome_spec(self) -> OutcomeSpec {
        let (positive, negative) = match self {
            Cohort::CnBaseline => ("MCI/AD", "CN"),
            Cohort::MciBaseline => ("AD", "CN/MCI"),
        };
        OutcomeSpec {
            name: OUTCOME.to_string(),
            positive: positive.to_string(),
            negative: Some(negative.to_string()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Cohort::CnBaseline => "CN_b",
            Cohort::MciBaseline => "MCI_b",
        }
    }
}

impl FromStr for Cohort {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cn_b" | "cn" => Ok(Cohort::CnBaseline),
            "mci_b" | "mci" => Ok(Cohort::MciBaseline),
            other => Err(format!("unknown cohort `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CohortLabel {
    pub cohort: Cohort,
    pub positive: bool,
}

pub fn collapse_cn(rec: &DiagnosisRecord) -> Result<CohortLabel, CohortError> {
    if rec.baseline != Diagnosis::Cn {
        return Err(CohortError::WrongBaseline {
            subject: rec.subject_id.clone(),
            expected: Diagnosis::Cn,
            actual: rec.baseline,
        });
    }
    Ok(CohortLabel {
        cohort: Cohort::CnBaseline,
        positive: matches!(rec.final_dx, Diagnosis::Mci | Diagnosis::Ad),
    })
}

pub fn collapse_mci(rec: &DiagnosisRecord) -> Result<CohortLabel, CohortError> {
    if rec.baseline != Diagnosis::Mci {
        return Err(CohortError::WrongBaseline {
            subject: rec.subject_id.clone(),
            expected: Diagnosis::Mci,
            actual: rec.baseline,
        });
    }
    Ok(CohortLabel {
        cohort: Cohort::MciBaseline,
        positive: rec.final_dx == Diagnosis::Ad,
    })
}

#[derive(Clone, Debug)]
pub struct Cohorts {
    pub cn: TabularDataset,
    pub mci: TabularDataset,
    /// Subject ids excluded because their baseline diagnosis was AD.
    pub dropped: Vec<String>,
}

impl Cohorts {
    pub fn get(&self, cohort: Cohort) -> &TabularDataset {
        match cohort {
            Cohort::CnBaseline => &self.cn,
            Cohort::MciBaseline => &self.mci,
        }
    }
}

/// Joins diagnosis records to predictor rows by subject id and splits them
/// into the two baseline cohorts. Rows follow record order; predictor rows
/// without a record are ignored.
pub fn build_cohorts(records: &[DiagnosisRecord], predictors: &PredictorTable) -> Result<Cohorts, CohortError> {
    let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(predictors.n_rows());
    for (r, id) in predictors.ids().iter().enumerate() {
        if by_id.insert(id.as_str(), r).is_some() {
            return Err(CohortError::DuplicateSubject(id.clone()));
        }
    }
    let mut seen = HashMap::with_capacity(records.len());
    for rec in records {
        if seen.insert(rec.subject_id.as_str(), ()).is_some() {
            return Err(CohortError::DuplicateSubject(rec.subject_id.clone()));
        }
        if !by_id.contains_key(rec.subject_id.as_str()) {
            return Err(CohortError::Unmatched(rec.subject_id.clone()));
        }
    }

    let base = predictors
        .schema()
        .with_column(ColumnSpec { name: LAST_VISIT.to_string(), kind: ColumnKind::Numeric })?;
    let build = |cohort: Cohort, collapse: fn(&DiagnosisRecord) -> Result<CohortLabel, CohortError>| {
        let schema = Arc::new(base.with_outcome(Some(cohort.outcome_spec()))?);
        let mut cells = Vec::new();
        let mut ids = Vec::new();
        let mut outcome = Vec::new();
        for rec in records.iter() {
            let baseline_matches = match cohort {
                Cohort::CnBaseline => rec.baseline == Diagnosis::Cn,
                Cohort::MciBaseline => rec.baseline == Diagnosis::Mci,
            };
            if !baseline_matches {
                continue;
            }
            let label = collapse(rec)?;
            let row = by_id[rec.subject_id.as_str()];
            cells.extend_from_slice(predictors.row(row));
            cells.push(Cell::Value(f64::from(rec.months_to_last_visit)));
            ids.push(rec.subject_id.clone());
            outcome.push(label.positive);
        }
        let table = PredictorTable::new(schema, cells, ids)?;
        Ok::<_, CohortError>(TabularDataset::new(table, outcome)?)
    };
    let cn = build(Cohort::CnBaseline, collapse_cn)?;
    let mci = build(Cohort::MciBaseline, collapse_mci)?;
    let dropped = records
        .iter()
        .filter(|r| r.baseline == Diagnosis::Ad)
        .map(|r| r.subject_id.clone())
        .collect();
    Ok(Cohorts { cn, mci, dropped })
}

const RECORD_HEADER: [&str; 4] = ["subject_id", "baseline_dx", "final_dx", "months_to_last_visit"];

pub fn read_records<R: Read>(reader: R) -> Result<Vec<DiagnosisRecord>, CohortError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CohortError::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let idx = [col(RECORD_HEADER[0])?, col(RECORD_HEADER[1])?, col(RECORD_HEADER[2])?, col(RECORD_HEADER[3])?];
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let parse_dx = |k: usize| field(k).parse::<Diagnosis>().map_err(|message| CohortError::Parse { line, message });
        let months = field(3).parse::<u32>().map_err(|_| CohortError::Parse {
            line,
            message: format!("months must be a nonnegative integer, got `{}`", field(3)),
        })?;
        out.push(DiagnosisRecord {
            subject_id: field(0).to_string(),
            baseline: parse_dx(1)?,
            final_dx: parse_dx(2)?,
            months_to_last_visit: months,
        });
    }
    Ok(out)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<DiagnosisRecord>, CohortError> {
    read_records(std::fs::File::open(path)?)
}

pub fn write_records<W: Write>(records: &[DiagnosisRecord], writer: W) -> Result<(), CohortError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.subject_id.clone(),
            r.baseline.to_string(),
            r.final_dx.to_string(),
            r.months_to_last_visit.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
