//! Seeded synthetic cohorts with known ground truth.
//!
//! Labels carry exactly `round(n·π)` positives in shuffled order.
//! Informative numerics are unit-variance normals with class means 0 and
//! `δ`; noise numerics ignore the label; nominal levels are drawn from
//! per-class probabilities. Missingness is applied afterwards, completely at
//! random, as an exact count of `round(n·rate)` cells per column.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::cohort::{Diagnosis, DiagnosisRecord};
use crate::seed::{Seed, Stream};
use crate::tabular::{Cell, ColumnKind, ColumnSpec, OutcomeSpec, PredictorTable, Schema, TabularDataset, TabularError};

pub const ID_COLUMN: &str = "id";
pub const OUTCOME_COLUMN: &str = "outcome";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NominalSpec {
    pub name: String,
    /// Strictly sorted level names.
    pub levels: Vec<String>,
    pub negative_probs: Vec<f64>,
    pub positive_probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub positive_fraction: f64,
    pub informative: usize,
    pub noise: usize,
    pub effect: f64,
    pub nominals: Vec<NominalSpec>,
    /// MCAR rate applied to every predictor column.
    pub missing_rate: f64,
    /// Per-column rates that replace `missing_rate`.
    pub column_missing: Vec<(String, f64)>,
    pub seed: Seed,
}

impl SynthSpec {
    /// 43 predictors: 3 informative, 38 noise, 2 nominal; 5% MCAR with one
    /// noise column 93% missing to exercise the sparse-column drop.
    pub fn adni_like(n: usize, positive_fraction: f64, effect: f64, seed: Seed) -> SynthSpec {
        SynthSpec {
            n,
            positive_fraction,
            informative: 3,
            noise: 38,
            effect,
            nominals: vec![
                NominalSpec {
                    name: "apoe4".into(),
                    levels: vec!["0".into(), "1".into(), "2".into()],
                    negative_probs: vec![0.70, 0.25, 0.05],
                    positive_probs: vec![0.45, 0.40, 0.15],
                },
                NominalSpec {
                    name: "sex".into(),
                    levels: vec!["F".into(), "M".into()],
                    negative_probs: vec![0.5, 0.5],
                    positive_probs: vec![0.5, 0.5],
                },
            ],
            missing_rate: 0.05,
            column_missing: vec![("noise38".into(), 0.93)],
            seed,
        }
    }

    pub fn informative_names(&self) -> Vec<String> {
        (1..=self.informative).map(|i| format!("inf{i}")).collect()
    }

    pub fn noise_names(&self) -> Vec<String> {
        (1..=self.noise).map(|i| format!("noise{i}")).collect()
    }

    pub fn n_predictors(&self) -> usize {
        self.informative + self.noise + self.nominals.len()
    }

    pub fn positives(&self) -> usize {
        (self.n as f64 * self.positive_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Spec(m.to_string()));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return bad("positive fraction must lie in (0, 1)");
        }
        if !(self.effect >= 0.0) || !self.effect.is_finite() {
            return bad("effect size must be finite and >= 0");
        }
        if self.n_predictors() == 0 {
            return bad("at least one predictor is required");
        }
        let rates = std::iter::once(self.missing_rate).chain(self.column_missing.iter().map(|(_, r)| *r));
        for r in rates {
            if !(0.0..=0.95).contains(&r) {
                return bad("missingness rates must lie in [0, 0.95]");
            }
        }
        for nom in &self.nominals {
            let k = nom.levels.len();
            if k == 0 || nom.negative_probs.len() != k || nom.positive_probs.len() != k {
                return Err(SynthError::Spec(format!("nominal `{}` needs one probability per level", nom.name)));
            }
            if nom.levels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SynthError::Spec(format!("levels of `{}` must be strictly sorted", nom.name)));
            }
            for probs in [&nom.negative_probs, &nom.positive_probs] {
                if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(SynthError::Spec(format!("probabilities of `{}` must be >= 0 and sum to 1", nom.name)));
                }
            }
        }
        let names = self.column_names();
        if let Some((c, _)) = self.column_missing.iter().find(|(c, _)| !names.contains(c)) {
            return Err(SynthError::Spec(format!("missingness override for unknown column `{c}`")));
        }
        Ok(())
    }

    fn column_names(&self) -> Vec<String> {
        let mut v = self.informative_names();
        v.extend(self.noise_names());
        v.extend(self.nominals.iter().map(|n| n.name.clone()));
        v
    }

    fn predictor_schema(&self) -> Result<Vec<ColumnSpec>, SynthError> {
        let mut cols: Vec<ColumnSpec> = self
            .informative_names()
            .into_iter()
            .chain(self.noise_names())
            .map(|name| ColumnSpec { name, kind: ColumnKind::Numeric })
            .collect();
        for nom in &self.nominals {
            cols.push(ColumnSpec { name: nom.name.clone(), kind: ColumnKind::nominal(nom.levels.clone())? });
        }
        Ok(cols)
    }

    /// Schema with outcome `outcome` (positive `1`, negative `0`) and id column `id`.
    pub fn schema(&self) -> Result<Schema, SynthError> {
        let outcome = OutcomeSpec { name: OUTCOME_COLUMN.into(), positive: "1".into(), negative: Some("0".into()) };
        Ok(Schema::new(self.predictor_schema()?, Some(outcome), Some(ID_COLUMN.into()))?)
    }

    fn rate_for(&self, column: &str) -> f64 {
        self.column_missing.iter().find(|(c, _)| c == column).map_or(self.missing_rate, |(_, r)| *r)
    }
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// AUC of one informative feature: `Φ(δ/√2)`.
pub fn analytic_auc(effect: f64) -> f64 {
    phi(effect / std::f64::consts::SQRT_2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthTruth {
    pub informative: Vec<String>,
    pub informative_nominals: Vec<String>,
    pub effect: f64,
    pub analytic_auc: f64,
    pub positives: usize,
    pub negatives: usize,
    pub seed: Seed,
}

impl SynthTruth {
    pub fn to_text(&self) -> String {
        let mut s = String::from("nestprog-synth-truth v1\n");
        let _ = writeln!(s, "seed {}", self.seed.0);
        let _ = writeln!(s, "positives {}", self.positives);
        let _ = writeln!(s, "negatives {}", self.negatives);
        let _ = writeln!(s, "effect {:?}", self.effect);
        let _ = writeln!(s, "analytic_auc {:?}", self.analytic_auc);
        let _ = writeln!(s, "informative {}", self.informative.join(","));
        let _ = writeln!(s, "informative_nominal {}", self.informative_nominals.join(","));
        s
    }
}

fn labels(n: usize, positives: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut y: Vec<bool> = (0..n).map(|i| i < positives).collect();
    y.shuffle(rng);
    y
}

fn draw_cells(spec: &SynthSpec, y: &[bool], rng: &mut ChaCha8Rng) -> Result<Vec<Cell>, SynthError> {
    let p = spec.n_predictors();
    let mut cells = Vec::with_capacity(spec.n * p);
    let samplers: Vec<(WeightedIndex<f64>, WeightedIndex<f64>)> = spec
        .nominals
        .iter()
        .map(|nom| {
            let neg = WeightedIndex::new(&nom.negative_probs).map_err(|e| SynthError::Spec(e.to_string()))?;
            let pos = WeightedIndex::new(&nom.positive_probs).map_err(|e| SynthError::Spec(e.to_string()))?;
            Ok((neg, pos))
        })
        .collect::<Result<_, SynthError>>()?;
    for &label in y {
        for _ in 0..spec.informative {
            let z: f64 = rng.sample(StandardNormal);
            cells.push(Cell::Value(z + if label { spec.effect } else { 0.0 }));
        }
        for _ in 0..spec.noise {
            cells.push(Cell::Value(rng.sample(StandardNormal)));
        }
        for (neg, pos) in &samplers {
            let level = if label { pos.sample(rng) } else { neg.sample(rng) };
            cells.push(Cell::Level(level as u32));
        }
    }
    let names = spec.column_names();
    for (j, name) in names.iter().enumerate() {
        let k = (spec.n as f64 * spec.rate_for(name)).round() as usize;
        for row in index::sample(rng, spec.n, k.min(spec.n)) {
            cells[row * p + j] = Cell::Missing;
        }
    }
    Ok(cells)
}

fn truth(spec: &SynthSpec, positives: usize) -> SynthTruth {
    SynthTruth {
        informative: spec.informative_names(),
        informative_nominals: spec
            .nominals
            .iter()
            .filter(|n| n.negative_probs != n.positive_probs)
            .map(|n| n.name.clone())
            .collect(),
        effect: spec.effect,
        analytic_auc: analytic_auc(spec.effect),
        positives,
        negatives: spec.n - positives,
        seed: spec.seed,
    }
}

pub fn generate(spec: &SynthSpec) -> Result<(TabularDataset, SynthTruth), SynthError> {
    spec.validate()?;
    let mut rng = spec.seed.child(Stream::Synth, 0).rng();
    let positives = spec.positives();
    let y = labels(spec.n, positives, &mut rng);
    let cells = draw_cells(spec, &y, &mut rng)?;
    let ids = (1..=spec.n).map(|i| format!("S{i:05}")).collect();
    let table = PredictorTable::new(Arc::new(spec.schema()?), cells, ids)?;
    Ok((TabularDataset::new(table, y)?, truth(spec, positives)))
}

/// Predictor table plus diagnosis records for a two-cohort study.
#[derive(Clone, Debug)]
pub struct SynthStudy {
    pub predictors: PredictorTable,
    pub records: Vec<DiagnosisRecord>,
    pub truth: SynthTruth,
}

/// CN-baseline subjects deteriorate to MCI or AD exactly when the
/// corresponding synthetic label is positive; MCI-baseline subjects
/// progress to AD when positive. Both specs must share one column layout.
pub fn generate_study(cn: &SynthSpec, mci: &SynthSpec) -> Result<SynthStudy, SynthError> {
    cn.validate()?;
    mci.validate()?;
    if cn.predictor_schema()? != mci.predictor_schema()? {
        return Err(SynthError::Spec("cohort specs must share the same predictor layout".into()));
    }
    let schema = Arc::new(Schema::new(cn.predictor_schema()?, None, Some(ID_COLUMN.into()))?);
    let mut cells = Vec::new();
    let mut ids = Vec::new();
    let mut records = Vec::new();
    for (tag, spec, baseline) in [("CN", cn, Diagnosis::Cn), ("MCI", mci, Diagnosis::Mci)] {
        let mut rng = spec.seed.child(Stream::Synth, 0).rng();
        let y = labels(spec.n, spec.positives(), &mut rng);
        cells.extend(draw_cells(spec, &y, &mut rng)?);
        for (i, &label) in y.iter().enumerate() {
            let id = format!("{tag}{:05}", i + 1);
            let final_dx = match (baseline, label) {
                (Diagnosis::Cn, true) => {
                    if rng.random_bool(0.7) { Diagnosis::Mci } else { Diagnosis::Ad }
                }
                (Diagnosis::Mci, true) => Diagnosis::Ad,
                (Diagnosis::Mci, false) => {
                    if rng.random_bool(0.1) { Diagnosis::Cn } else { Diagnosis::Mci }
                }
                _ => Diagnosis::Cn,
            };
            records.push(DiagnosisRecord {
                subject_id: id.clone(),
                baseline,
                final_dx,
                months_to_last_visit: rng.random_range(6..=120),
            });
            ids.push(id);
        }
    }
    let predictors = PredictorTable::new(schema, cells, ids)?;
    Ok(SynthStudy { predictors, records, truth: truth(cn, cn.positives()) })
}
