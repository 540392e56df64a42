//! Experiment execution, persistence and resumption.

use std::fs;
use std::path::{Path, PathBuf};

use bandloc_core::band_model::BlockModel;
use bandloc_core::estimators::bernstein::{bernstein_mgf_check, BernsteinReport, BoundedVariable, VariablesSpec};
use bandloc_core::estimators::{
    cell_seed, orthogonal_invariance_check, pair_terms_from_ledger, run_trial, summarize, wegner_experiment, CellSpec,
    InvarianceReport, TrialOptions, TrialRecord, WegnerParams, WegnerReport,
};
use bandloc_core::linalg::basis;
use bandloc_core::radial::ConditionParams;
use bandloc_core::rng::SeedSpec;
use bandloc_core::schur::vector_action_log_norm;
use bandloc_core::split::{dichotomy_classify, split_chain, DichotomyParams};
use bandloc_core::stats::{mean, variance, Rate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::manifest::{sha256_bytes, sha256_file, write_atomic, ChunkEntry, FileEntry, RunManifest, MANIFEST_FILE};
use crate::rows::{read_rows, write_rows, TrialRow};
use crate::verify::{exponent_split, recurrence, split_identity, SuiteReport};

pub const SUMMARY_FILE: &str = "summary.json";
pub const TRIALS_FILE: &str = "trials.csv";
const CHUNK_DIR: &str = "chunks";

/// JSON summary written for every experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary<R> {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub config_hash: String,
    /// the configuration with output directory, worker count, resume flag and chunk size cleared
    pub config: ExperimentConfig,
    pub result: R,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// stop (as if killed) after writing this many chunks
    pub stop_after_chunks: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Complete,
    Stopped { chunks_written: usize },
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub output_dir: PathBuf,
    pub summary_path: PathBuf,
    pub manifest_path: PathBuf,
}

pub fn run(config: &ExperimentConfig, opts: RunOptions) -> Result<RunOutcome> {
    config.validate()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(HarnessError::io(&dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot build a pool of {} workers: {e}", config.workers)))?;
    let outcome = RunOutcome {
        status: RunStatus::Complete,
        summary_path: dir.join(SUMMARY_FILE),
        manifest_path: dir.join(MANIFEST_FILE),
        output_dir: dir,
    };
    if config.experiment.is_trial_sweep() {
        let status = pool.install(|| run_sweep(config, &outcome, opts))?;
        return Ok(RunOutcome { status, ..outcome });
    }
    let summary = pool.install(|| run_single(config))?;
    let mut manifest = RunManifest::new(config, config.trials as u64);
    write_atomic(&outcome.summary_path, summary.as_bytes())?;
    manifest.files = vec![FileEntry { file: SUMMARY_FILE.into(), sha256: sha256_bytes(summary.as_bytes()) }];
    manifest.complete = true;
    manifest.save(&outcome.manifest_path)?;
    Ok(outcome)
}

fn envelope<R: Serialize>(config: &ExperimentConfig, result: R) -> Result<String> {
    let s = Summary { schema_version: crate::SCHEMA_VERSION, experiment: config.experiment, config_hash: config.hash(), config: config.canonical(), result };
    Ok(serde_json::to_string_pretty(&s)? + "\n")
}

pub fn sweep_cells(config: &ExperimentConfig) -> Vec<CellSpec> {
    let options = TrialOptions { f_choice: config.f_choice, log_r_thin: config.log_r_thin, wegner_k: config.wegner_k, cond_cap: config.cond_cap };
    let mut cells = Vec::new();
    for &w in &config.w {
        for &n in &config.n {
            cells.push(CellSpec { w, n, e: config.e, trials: config.trials, master_seed: config.seed, options });
        }
    }
    cells
}

fn chunk_path(index: usize) -> String {
    format!("{CHUNK_DIR}/chunk-{index:06}.csv")
}

/// Loads the manifest of an interrupted run, dropping chunks whose files are missing or damaged.
fn resume_manifest(config: &ExperimentConfig, dir: &Path, total: u64) -> Result<Option<RunManifest>> {
    let path = dir.join(MANIFEST_FILE);
    if !config.resume || !path.exists() {
        return Ok(None);
    }
    let mut m = RunManifest::load(&path)?;
    if m.config_hash != config.hash() || m.total_trials != total {
        return Err(HarnessError::Config(format!("{} belongs to a different configuration", path.display())));
    }
    m.chunks.retain(|c| sha256_file(&dir.join(&c.file)).is_ok_and(|h| h == c.sha256));
    m.complete = false;
    Ok(Some(m))
}

fn run_sweep(config: &ExperimentConfig, out: &RunOutcome, opts: RunOptions) -> Result<RunStatus> {
    let dir = &out.output_dir;
    let cells = sweep_cells(config);
    let per_cell = config.trials as u64;
    let total = per_cell * cells.len() as u64;
    let mut manifest = match resume_manifest(config, dir, total)? {
        Some(m) => m,
        None => {
            let chunks = dir.join(CHUNK_DIR);
            if chunks.exists() {
                fs::remove_dir_all(&chunks).map_err(HarnessError::io(&chunks))?;
            }
            RunManifest::new(config, total)
        }
    };
    fs::create_dir_all(dir.join(CHUNK_DIR)).map_err(HarnessError::io(dir.join(CHUNK_DIR)))?;
    // chunk boundaries are fixed when the run is created
    let chunk_size = manifest.config.chunk_size as u64;
    let n_chunks = total.div_ceil(chunk_size) as usize;
    let mut written = 0;
    for k in 0..n_chunks {
        if manifest.chunk(k).is_some() {
            continue;
        }
        if opts.stop_after_chunks == Some(written) {
            manifest.save(&out.manifest_path)?;
            return Ok(RunStatus::Stopped { chunks_written: written });
        }
        let (first, end) = (k as u64 * chunk_size, ((k as u64 + 1) * chunk_size).min(total));
        let rows: Vec<TrialRow> = (first..end)
            .into_par_iter()
            .map(|g| run_trial(&cells[(g / per_cell) as usize], g % per_cell).map(|r| TrialRow::from_record(g, &r)))
            .collect::<Result<_, _>>()?;
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows)?;
        let file = chunk_path(k);
        write_atomic(&dir.join(&file), &buf)?;
        manifest.record_chunk(ChunkEntry { index: k, first, end, file, sha256: sha256_bytes(&buf) });
        manifest.save(&out.manifest_path)?;
        written += 1;
    }

    let mut rows = Vec::with_capacity(total as usize);
    for c in &manifest.chunks {
        let path = dir.join(&c.file);
        let bytes = fs::read(&path).map_err(HarnessError::io(&path))?;
        if sha256_bytes(&bytes) != c.sha256 {
            return Err(HarnessError::Corrupt { path, reason: "checksum mismatch".into() });
        }
        rows.extend(read_rows(bytes.as_slice())?);
    }
    rows.sort_by_key(|r| r.index);
    if rows.iter().enumerate().any(|(i, r)| r.index != i as u64) || rows.len() as u64 != total {
        return Err(HarnessError::Corrupt { path: dir.join(CHUNK_DIR), reason: "trial indices are not contiguous".into() });
    }
    let mut trials_csv = Vec::new();
    write_rows(&mut trials_csv, &rows)?;
    write_atomic(&dir.join(TRIALS_FILE), &trials_csv)?;

    let mut records: Vec<Vec<TrialRecord>> = vec![Vec::with_capacity(config.trials); cells.len()];
    for r in &rows {
        records[(r.index / per_cell) as usize].push(r.to_record());
    }
    let summary = envelope(config, summarize(&cells, &records))?;
    write_atomic(&out.summary_path, summary.as_bytes())?;
    manifest.files = vec![
        FileEntry { file: TRIALS_FILE.into(), sha256: sha256_bytes(&trials_csv) },
        FileEntry { file: SUMMARY_FILE.into(), sha256: sha256_bytes(summary.as_bytes()) },
    ];
    manifest.complete = true;
    manifest.save(&out.manifest_path)?;
    Ok(RunStatus::Complete)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WegnerCell {
    pub n: usize,
    pub report: WegnerReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialCell {
    pub w: usize,
    pub n: usize,
    pub records: usize,
    /// records whose conditional density could not be analysed
    pub failures: usize,
    pub case_i: Rate,
    pub dichotomy_holds: Rate,
    pub condition_iii: Rate,
    pub support_ok: Rate,
    pub mean_w_var_log_r: Option<f64>,
    pub min_w_var_log_r: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBernstein {
    pub w: usize,
    pub n: usize,
    /// clip level `3σ̂` applied after re-centering
    pub clip: f64,
    pub report: BernsteinReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinResult {
    pub rademacher: BernsteinReport,
    pub empirical: Vec<EmpiricalBernstein>,
}

fn run_single(config: &ExperimentConfig) -> Result<String> {
    match config.experiment {
        Experiment::Wegner => {
            let cells = config
                .n
                .iter()
                .map(|&n| {
                    let p = WegnerParams {
                        w_list: config.w.clone(),
                        n,
                        trials: config.trials,
                        t_list: config.t_list.clone(),
                        k_list: config.k_list.clone(),
                        e: config.e,
                        seed: config.seed,
                    };
                    Ok(WegnerCell { n, report: wegner_experiment(&p)? })
                })
                .collect::<Result<Vec<_>>>()?;
            envelope(config, cells)
        }
        Experiment::Invariance => {
            let reports: Vec<InvarianceReport> =
                config.w.iter().map(|&w| orthogonal_invariance_check(w, config.trials, config.seed)).collect::<Result<_, _>>()?;
            envelope(config, reports)
        }
        Experiment::SplitVerify => {
            let seeds = config.trials as u64;
            let mut suites: Vec<SuiteReport> = Vec::new();
            for &n in &config.n {
                suites.push(recurrence(&config.w, n, seeds, config.seed, None)?);
            }
            for &w in &config.w {
                suites.push(split_identity(w, seeds, config.seed)?);
                suites.push(exponent_split(w, seeds, config.seed)?);
            }
            envelope(config, suites)
        }
        Experiment::Radial => envelope(config, radial_cells(config)?),
        Experiment::Bernstein => envelope(config, bernstein(config)?),
        Experiment::Variance | Experiment::Decay => unreachable!("trial sweeps are chunked"),
    }
}

fn radial_cells(config: &ExperimentConfig) -> Result<Vec<RadialCell>> {
    let cp = ConditionParams { support_a: config.support_a, dichotomy_a: config.dichotomy_a, cfrak: config.cfrak, ..ConditionParams::default() };
    let dp = DichotomyParams { a: config.dichotomy_a, cfrak: config.cfrak, ..DichotomyParams::default() };
    let mut out = Vec::new();
    for &w in &config.w {
        for &n in &config.n {
            let cs = cell_seed(config.seed, w, n, config.e);
            // per record: (case I, dichotomy holds, condition III, support ok, W·Var[log r]) or None on failure
            type Row = Option<(bool, bool, bool, bool, f64)>;
            let per_trial: Vec<Vec<Row>> = (0..config.trials as u64)
                .into_par_iter()
                .map(|i| -> Result<Vec<Row>> {
                    let m = BlockModel::<f64>::sample(w, n, config.e, SeedSpec::new(cs, i, 0))?;
                    let Ok((_, recs)) = split_chain(&m, &basis(w, 0)) else {
                        return Ok(vec![None]);
                    };
                    let k = config.radial_sites.min(recs.len());
                    Ok((0..k)
                        .map(|j| {
                            let d = dichotomy_classify(&recs[j], recs.get(j + 1), dp);
                            let report = recs[j].conditional_radial_density().and_then(|rd| rd.report(&cp)).ok()?;
                            Some((
                                matches!(d.case, bandloc_core::split::Dichotomy::CaseI),
                                d.holds(),
                                report.conditions.condition_iii,
                                report.conditions.support_ok,
                                report.w_var_log_r,
                            ))
                        })
                        .collect())
                })
                .collect::<Result<_>>()?;
            let rows: Vec<&Row> = per_trial.iter().flatten().collect();
            let ok: Vec<&(bool, bool, bool, bool, f64)> = rows.iter().filter_map(|r| r.as_ref()).collect();
            let total = ok.len() as u64;
            let count = |f: &dyn Fn(&(bool, bool, bool, bool, f64)) -> bool| ok.iter().filter(|r| f(r)).count() as u64;
            let wv: Vec<f64> = ok.iter().map(|r| r.4).collect();
            out.push(RadialCell {
                w,
                n,
                records: rows.len(),
                failures: rows.len() - ok.len(),
                case_i: Rate::new(count(&|r| r.0), total),
                dichotomy_holds: Rate::new(count(&|r| r.1), total),
                condition_iii: Rate::new(count(&|r| r.2), total),
                support_ok: Rate::new(count(&|r| r.3), total),
                mean_w_var_log_r: (!wv.is_empty()).then(|| mean(&wv)),
                min_w_var_log_r: wv.iter().copied().reduce(f64::min),
            });
        }
    }
    Ok(out)
}

fn bernstein(config: &ExperimentConfig) -> Result<BernsteinResult> {
    let spec = VariablesSpec::copies(BoundedVariable::Rademacher, config.bernstein_copies, config.bernstein_c, config.trials);
    let rademacher = bernstein_mgf_check(&spec, &config.t_list, config.seed)?;
    let mut empirical = Vec::new();
    for &w in &config.w {
        for &n in config.n.iter().filter(|&&n| n >= 3) {
            let cs = cell_seed(config.seed, w, n, config.e);
            let samples = config.trials.min(2000) as u64;
            let first_pair: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|i| -> Result<Option<f64>> {
                    let m = BlockModel::<f64>::sample(w, n, config.e, SeedSpec::new(cs, i, 0))?;
                    Ok(vector_action_log_norm(&m, &basis(w, 0)).ok().and_then(|l| pair_terms_from_ledger(&l).first().copied()))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            if first_pair.len() < 2 {
                continue;
            }
            let clip = 3.0 * variance(&first_pair).sqrt();
            let var = BoundedVariable::empirical(&first_pair, clip)?;
            let t_max = config.bernstein_c / var.h();
            let spec = VariablesSpec { variables: vec![var], c: config.bernstein_c, mc_samples: 0 };
            let report = bernstein_mgf_check(&spec, &[0.0, 0.5 * t_max, t_max], config.seed)?;
            empirical.push(EmpiricalBernstein { w, n, clip, report });
        }
    }
    Ok(BernsteinResult { rademacher, empirical })
}

/// Re-runs the configuration stored in a manifest into `output_dir` and compares checksums.
pub fn replay(manifest_path: &Path, output_dir: &Path) -> Result<Vec<(String, bool)>> {
    let original = RunManifest::load(manifest_path)?;
    if original.config_hash != original.config.hash() {
        return Err(HarnessError::Corrupt { path: manifest_path.into(), reason: "config hash does not match the stored configuration".into() });
    }
    let config = ExperimentConfig { output_dir: output_dir.to_path_buf(), resume: false, ..original.config.clone() };
    run(&config, RunOptions::default())?;
    let fresh = RunManifest::load(&output_dir.join(MANIFEST_FILE))?;
    Ok(original
        .files
        .iter()
        .map(|f| (f.file.clone(), fresh.file(&f.file).is_some_and(|g| g.sha256 == f.sha256)))
        .collect())
}
