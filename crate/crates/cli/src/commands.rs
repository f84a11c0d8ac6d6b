use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use nestprog::cohort::{build_cohorts, load_records, write_records, Cohort};
use nestprog::importance::{en_coefficient_importance, permutation_importance, rf_impurity_importance, ImportanceReport};
use nestprog::metrics::{summarize, RocCurve};
use nestprog::models::{Algorithm, HyperParams, Learner};
use nestprog::nestedcv::{
    read_oof, run_nested_cv, with_workers, write_metrics, write_oof, write_repeat_summary, NestedCvOptions,
    NestedCvResult, RepeatSummary,
};
use nestprog::preprocess::PreprocessModel;
use nestprog::seed::{Seed, Stream};
use nestprog::synth::{generate, generate_study, SynthSpec};
use nestprog::tabular::{load_csv, load_predictors, write_csv, write_table, Schema, TabularDataset};
use nestprog::tuning::{named_preset, preset_grid, Grid};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{CohortChoice, GridChoice, RunConfig};
use crate::error::Result;

pub const MANIFEST: &str = "run_manifest";

/// Files rendered in memory, written only once everything succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: &str, render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    fn add_text(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    /// Writes each file to a hidden temporary and renames it into place.
    fn commit(self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, dir.join(name))?;
            info!("wrote {}", dir.join(name).display());
        }
        Ok(())
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let digest = Sha256::digest(fs::read(path)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn load_schema(path: &Path) -> Result<Arc<Schema>> {
    Ok(Arc::new(Schema::load(path)?))
}

pub fn load_dataset(cfg: &RunConfig) -> Result<TabularDataset> {
    let schema = load_schema(&cfg.schema)?;
    match cfg.cohort {
        CohortChoice::Prebuilt => Ok(load_csv(&cfg.data, &schema)?),
        CohortChoice::Build(cohort) => {
            let predictors = load_predictors(&cfg.data, &schema)?;
            let records = load_records(cfg.records.as_ref().expect("checked at resolve"))?;
            let cohorts = build_cohorts(&records, &predictors)?;
            Ok(cohorts.get(cohort).clone())
        }
    }
}

pub fn candidates(cfg: &RunConfig, p: usize) -> Result<Vec<HyperParams>> {
    let grid = match &cfg.grid {
        GridChoice::Full { expand_gbm } => preset_grid(cfg.algorithm, p, *expand_gbm)?,
        GridChoice::Named(name) => Grid::fixed(&named_preset(name, cfg.algorithm, p)?),
        GridChoice::Custom(axes) => Grid::new(cfg.algorithm, axes.clone())?,
    };
    info!("grid {grid} ({} combinations)", grid.len());
    Ok(grid.candidates())
}

/// Most frequent fold winner; ties go to the earlier candidate.
fn consensus(result: &NestedCvResult<HyperParams>, n_candidates: usize) -> usize {
    let mut votes = vec![0usize; n_candidates];
    result.folds.iter().for_each(|f| votes[f.best_index] += 1);
    let top = *votes.iter().max().unwrap_or(&0);
    votes.iter().position(|&v| v == top).unwrap_or(0)
}

fn importance(cfg: &RunConfig, ds: &TabularDataset, params: &HyperParams) -> Result<ImportanceReport> {
    let seed = Seed(cfg.seed);
    match cfg.algorithm {
        Algorithm::Rf | Algorithm::En => {
            let prep = PreprocessModel::fit(ds, cfg.neighbors)?;
            let design = prep.transform(ds)?;
            let model = params.fit(&design.x, &design.y, seed.child(Stream::Model, 0))?;
            if cfg.algorithm == Algorithm::Rf {
                Ok(rf_impurity_importance(&model, &design.features)?)
            } else {
                Ok(en_coefficient_importance(&model, &design.features)?)
            }
        }
        _ => Ok(permutation_importance(ds, params, cfg.neighbors, seed, cfg.permutation_repeats)?),
    }
}

fn manifest(
    cfg: &RunConfig,
    ds: &TabularDataset,
    candidates: &[HyperParams],
    first: &NestedCvResult<HyperParams>,
    chosen: &HyperParams,
) -> Result<String> {
    let mut s = String::from("# nestprog run manifest; rerun with `nestprog run --config <this file>`\n");
    s.push_str(&format!("# version {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&cfg.to_text());
    s.push_str(&format!("# sha256 data {}\n", sha256_file(&cfg.data)?));
    s.push_str(&format!("# sha256 schema {}\n", sha256_file(&cfg.schema)?));
    if let Some(r) = &cfg.records {
        s.push_str(&format!("# sha256 records {}\n", sha256_file(r)?));
    }
    s.push_str(&format!("# dataset rows {} positives {} columns {}\n", ds.n_rows(), ds.positives(), ds.n_cols()));
    s.push_str(&format!("# candidates {}\n", candidates.len()));
    let run_seed = if cfg.repeats == 1 { Seed(cfg.seed) } else { Seed(cfg.seed).child(Stream::Repeat, 0) };
    s.push_str(&format!("# reported run seed {run_seed} fold plan seed {}\n", first.plan.seed()));
    for f in &first.folds {
        s.push_str(&format!("# fold {} best [{}] inner_auc {:?}\n", f.fold + 1, f.best, f.inner_auc));
    }
    s.push_str(&format!("# importance params [{chosen}]\n"));
    Ok(s)
}

pub fn execute(cfg: &RunConfig) -> Result<()> {
    cfg.check_paths()?;
    cfg.log();
    let ds = load_dataset(cfg)?;
    info!("dataset: {} rows, {} positive, {} predictors", ds.n_rows(), ds.positives(), ds.n_cols());
    let cands = candidates(cfg, ds.n_cols())?;
    if cands.len() > 1000 {
        warn!("{} candidates per inner fold; expect a long run", cands.len());
    }
    let opts = NestedCvOptions { neighbors: cfg.neighbors, keep_preprocess: false };
    let master = Seed(cfg.seed);
    let (results, report) = with_workers(cfg.workers, || -> Result<_> {
        let results: Vec<NestedCvResult<HyperParams>> = if cfg.repeats == 1 {
            vec![run_nested_cv(&ds, &cands, &opts, master)?]
        } else {
            (0..cfg.repeats)
                .into_par_iter()
                .map(|i| run_nested_cv(&ds, &cands, &opts, master.child(Stream::Repeat, i as u64)))
                .collect::<std::result::Result<_, _>>()?
        };
        let chosen = cands[consensus(&results[0], cands.len())].clone();
        let report = importance(cfg, &ds, &chosen)?;
        Ok((results, (chosen, report)))
    })??;
    let (chosen, report) = report;
    let first = &results[0];
    let name = cfg.algorithm.display_name().to_string();
    info!("AUC {:.4} over {} outer folds", first.metrics.auc, first.folds.len());

    let mut out = Outputs::default();
    out.add("metrics.csv", |w| write_metrics(&[(name.clone(), first.metrics)], w))?;
    out.add("oof_probabilities.csv", |w| write_oof(&first.oof, w))?;
    out.add("roc_points.csv", |w| first.roc.write_csv(w))?;
    out.add("importance.csv", |w| report.write_csv(w))?;
    if cfg.repeats >= 2 {
        let summary = RepeatSummary::from_repeats(master, results.iter().map(|r| r.metrics).collect());
        info!("mean AUC {:.4} (SD {:.4}) over {} repeats", summary.mean[0], summary.sd[0], cfg.repeats);
        out.add("repeat_summary.csv", |w| write_repeat_summary(&name, &summary, w))?;
    }
    out.add_text(MANIFEST, manifest(cfg, &ds, &cands, first, &chosen)?);
    out.commit(&cfg.out)
}

pub struct SynthArgs {
    pub out: PathBuf,
    pub n: usize,
    pub positive_fraction: f64,
    pub effect: f64,
    pub seed: u64,
    /// When set, writes predictors plus diagnosis records for a CN/MCI study
    /// with this many MCI-baseline subjects.
    pub study_mci: Option<(usize, f64)>,
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let seed = Seed(args.seed);
    let mut out = Outputs::default();
    match args.study_mci {
        None => {
            let spec = SynthSpec::adni_like(args.n, args.positive_fraction, args.effect, seed);
            let (ds, truth) = generate(&spec)?;
            out.add_text("schema.txt", ds.schema().to_text());
            out.add("data.csv", |w| write_csv(&ds, w).map_err(std::io::Error::other))?;
            out.add_text("truth.txt", truth.to_text());
        }
        Some((mci_n, mci_fraction)) => {
            let cn = SynthSpec::adni_like(args.n, args.positive_fraction, args.effect, seed.child(Stream::Synth, 1));
            let mci = SynthSpec::adni_like(mci_n, mci_fraction, args.effect, seed.child(Stream::Synth, 2));
            let study = generate_study(&cn, &mci)?;
            out.add_text("schema.txt", study.predictors.schema().to_text());
            out.add("predictors.csv", |w| write_table(&study.predictors, None, w).map_err(std::io::Error::other))?;
            out.add("records.csv", |w| write_records(&study.records, w).map_err(std::io::Error::other))?;
            out.add_text("truth.txt", study.truth.to_text());
        }
    }
    out.commit(&args.out)
}

pub fn cohort(predictors: &Path, schema: &Path, records: &Path, dir: &Path) -> Result<()> {
    let schema = load_schema(schema)?;
    let table = load_predictors(predictors, &schema)?;
    let cohorts = build_cohorts(&load_records(records)?, &table)?;
    if !cohorts.dropped.is_empty() {
        info!("{} AD-baseline subjects excluded", cohorts.dropped.len());
    }
    let mut out = Outputs::default();
    for c in [Cohort::CnBaseline, Cohort::MciBaseline] {
        let ds = cohorts.get(c);
        let stem = c.name().to_ascii_lowercase();
        info!("{}: {} rows, {} positive", c.name(), ds.n_rows(), ds.positives());
        out.add(&format!("{stem}.csv"), |w| write_csv(ds, w).map_err(std::io::Error::other))?;
        out.add_text(&format!("{stem}_schema.txt"), ds.schema().to_text());
    }
    out.commit(dir)
}

/// Re-renders `metrics.csv` and `roc_points.csv` from stored OOF predictions.
pub fn report(oof_path: &Path, name: &str, dir: &Path) -> Result<()> {
    let oof = read_oof(fs::File::open(oof_path)?)?;
    let metrics = summarize(&oof.probability, &oof.label)?;
    let roc = RocCurve::from_scores(&oof.probability, &oof.label)?;
    let mut out = Outputs::default();
    out.add("metrics.csv", |w| write_metrics(&[(name.to_string(), metrics)], w))?;
    out.add("roc_points.csv", |w| roc.write_csv(w))?;
    out.commit(dir)
}

/// Model name recorded in a run directory's manifest, if any.
pub fn manifest_model_name(dir: &Path) -> Option<String> {
    let text = fs::read_to_string(dir.join(MANIFEST)).ok()?;
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "algorithm")
        .and_then(|(_, v)| v.trim().parse::<Algorithm>().ok())
        .map(|a| a.display_name().to_string())
}
