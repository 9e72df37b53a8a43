//! Orchestration of the full cascade: enumerate, filter, group/orbit-sum,
//! count, reconstruct, estimate, guess, report. Every stage reads the files
//! of earlier stages, writes its own outputs atomically into its own
//! directory and marks itself complete, so a killed run resumes to a
//! byte-identical state.

use crate::asymptotics::{estimate_growth, recognize_constant, EstimateOptions};
use crate::countkernel::{count_layers_with_limit, ModSeries, Target};
use crate::exactify::{crt_reconstruct, select_primes, ExactSeries};
use crate::guess::{double_prime_consistent, guess_ode, guess_recurrence};
use crate::reduce::{hadamard_decompose, projectible};
use crate::stepset::{
    canonical_records_in_mask_range, FilterStatus, ModelRecord, StepSet, MASK_LIMIT,
};
use crate::walkgroup::{explore_group, identify_group, orbit_sum_zero, GroupStatus};
use num_bigint::{BigInt, BigUint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("stage {stage} requires {requirement}")]
    MissingStage {
        stage: &'static str,
        requirement: String,
    },
    #[error("corrupt database: {0}")]
    Corrupt(String),
    #[error("kernel: {0}")]
    Kernel(#[from] crate::countkernel::KernelError),
    #[error("reconstruction: {0}")]
    Crt(#[from] crate::exactify::CrtError),
}

/// Counts of model classes indexed by step-set size.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SizePolynomial {
    pub coefficients: Vec<u64>,
}

impl SizePolynomial {
    pub fn from_sizes<I: IntoIterator<Item = u32>>(sizes: I) -> Self {
        let mut coefficients = vec![0u64; 27];
        for s in sizes {
            coefficients[s as usize] += 1;
        }
        SizePolynomial { coefficients }
    }

    pub fn coefficient(&self, size: u32) -> u64 {
        self.coefficients.get(size as usize).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.coefficients.iter().sum()
    }
}

impl fmt::Display for SizePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coefficients.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*u")?,
                _ => write!(f, "{c}*u^{k}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Run parameters; everything that affects outputs is recorded here and
/// persisted with the database.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub min_size: u32,
    pub max_size: u32,
    pub group_cap: u32,
    pub eval_points: usize,
    pub seed: u64,
    pub n_terms: u32,
    pub richardson_order: u32,
    pub digits: u32,
    pub guess_order: usize,
    pub guess_degree: usize,
    pub threads: usize,
    pub memory_limit: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            min_size: 1,
            max_size: 26,
            group_cap: 400,
            eval_points: 3,
            seed: 1,
            n_terms: 96,
            richardson_order: 6,
            digits: 30,
            guess_order: 4,
            guess_degree: 4,
            threads: 1,
            memory_limit: crate::countkernel::DEFAULT_MEMORY_LIMIT,
        }
    }
}

pub const STAGES: [&str; 7] = [
    "enumerate",
    "filter",
    "group",
    "count",
    "reconstruct",
    "asympt",
    "guess",
];

/// Handle on a database directory.
pub struct ClassificationDb {
    root: PathBuf,
    pub config: RunConfig,
}

/// Per-model group-stage output, one JSON object per line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupRecord {
    pub model: String,
    pub hadamard: bool,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub relators: Vec<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit_sum_zero: Option<bool>,
    pub seed: u64,
}

impl ClassificationDb {
    pub fn create(root: &Path, config: RunConfig) -> Result<Self, PipelineError> {
        fs::create_dir_all(root)?;
        let cfg_path = root.join("config.toml");
        if cfg_path.exists() {
            let existing: RunConfig = toml::from_str(&fs::read_to_string(&cfg_path)?)
                .map_err(|e| PipelineError::Corrupt(e.to_string()))?;
            if existing != config {
                return Err(PipelineError::Corrupt(
                    "existing database was created with a different configuration".into(),
                ));
            }
        } else {
            atomic_write(
                &cfg_path,
                toml::to_string_pretty(&config).unwrap().as_bytes(),
            )?;
        }
        Ok(ClassificationDb {
            root: root.to_path_buf(),
            config,
        })
    }

    pub fn open(root: &Path) -> Result<Self, PipelineError> {
        let cfg = fs::read_to_string(root.join("config.toml"))?;
        let config: RunConfig =
            toml::from_str(&cfg).map_err(|e| PipelineError::Corrupt(e.to_string()))?;
        Ok(ClassificationDb {
            root: root.to_path_buf(),
            config,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    pub fn stage_done(&self, stage: &str) -> bool {
        self.stage_dir(stage).join("DONE").exists()
    }

    fn begin_stage(&self, stage: &str) -> Result<PathBuf, PipelineError> {
        let dir = self.stage_dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn finish_stage(&self, stage: &str) -> Result<(), PipelineError> {
        atomic_write(&self.stage_dir(stage).join("DONE"), b"ok\n")
    }

    pub fn read_models(&self, stage: &str) -> Result<Vec<ModelRecord>, PipelineError> {
        let path = self.stage_dir(stage).join("models.txt");
        if !self.stage_done(stage) {
            return Err(PipelineError::MissingStage {
                stage: "current",
                requirement: format!("completed `{stage}` stage"),
            });
        }
        let f = fs::File::open(path)?;
        BufReader::new(f)
            .lines()
            .map(|l| {
                ModelRecord::from_line(&l?).map_err(|e| PipelineError::Corrupt(e.to_string()))
            })
            .collect()
    }

    fn write_models(&self, stage: &str, records: &[ModelRecord]) -> Result<(), PipelineError> {
        let mut buf = Vec::new();
        for r in records {
            buf.extend_from_slice(r.to_line().as_bytes());
            buf.push(b'\n');
        }
        atomic_write(&self.stage_dir(stage).join("models.txt"), &buf)
    }

    pub fn read_group_records(&self) -> Result<Vec<GroupRecord>, PipelineError> {
        let f = fs::File::open(self.stage_dir("group").join("groups.jsonl"))?;
        BufReader::new(f)
            .lines()
            .map(|l| {
                serde_json::from_str(&l?).map_err(|e| PipelineError::Corrupt(e.to_string()))
            })
            .collect()
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Stage 1: enumerate canonical classes in the configured size range.
pub fn run_enumerate(db: &ClassificationDb) -> Result<(), PipelineError> {
    if db.stage_done("enumerate") {
        return Ok(());
    }
    db.begin_stage("enumerate")?;
    let range = db.config.min_size..=db.config.max_size;
    // disjoint mask shards, processed in parallel, concatenated in order
    let shards: Vec<(u32, u32)> = (0..64u32)
        .map(|i| {
            let w = MASK_LIMIT / 64;
            (i * w, if i == 63 { MASK_LIMIT } else { (i + 1) * w })
        })
        .collect();
    let records: Vec<ModelRecord> = shards
        .into_par_iter()
        .flat_map_iter(|(lo, hi)| canonical_records_in_mask_range(lo, hi, Some(range.clone())))
        .collect();
    db.write_models("enumerate", &records)?;
    db.finish_stage("enumerate")
}

/// Stage 2+3: mark projectible models, then Hadamard-decomposable ones.
/// Certificates for both go to JSON-lines files beside the model list.
pub fn run_filter(db: &ClassificationDb) -> Result<(), PipelineError> {
    if db.stage_done("filter") {
        return Ok(());
    }
    let mut records = db.read_models("enumerate")?;
    db.begin_stage("filter")?;
    let outcomes: Vec<(Option<String>, Option<String>, FilterStatus)> = records
        .par_iter()
        .map(|rec| {
            if let Some(cert) = projectible(&rec.id) {
                let line = format!(
                    "{{\"model\":\"{}\",\"certificate\":{}}}",
                    rec.id.hex(),
                    serde_json::to_string(&cert).unwrap()
                );
                return (Some(line), None, FilterStatus::Projectible);
            }
            if let Some(d) = hadamard_decompose(&rec.id) {
                let line = format!(
                    "{{\"model\":\"{}\",\"decomposition\":{}}}",
                    rec.id.hex(),
                    serde_json::to_string(&d).unwrap()
                );
                return (None, Some(line), FilterStatus::Hadamard);
            }
            (None, None, FilterStatus::Unprocessed)
        })
        .collect();
    let mut certs = Vec::new();
    let mut hads = Vec::new();
    for (rec, (cert, had, status)) in records.iter_mut().zip(outcomes) {
        if status != FilterStatus::Unprocessed {
            rec.advance(status);
        }
        if let Some(c) = cert {
            certs.push(c);
        }
        if let Some(h) = had {
            hads.push(h);
        }
    }
    atomic_write(
        &db.stage_dir("filter").join("certificates.jsonl"),
        (certs.join("\n") + "\n").as_bytes(),
    )?;
    atomic_write(
        &db.stage_dir("filter").join("hadamard.jsonl"),
        (hads.join("\n") + "\n").as_bytes(),
    )?;
    db.write_models("filter", &records)?;
    db.finish_stage("filter")
}

/// Stage 4+5: group exploration and orbit sums, on the filter survivors and
/// also on the Hadamard models (flagged), which the statistics table needs.
pub fn run_group(db: &ClassificationDb) -> Result<(), PipelineError> {
    if db.stage_done("group") {
        return Ok(());
    }
    let mut records = db.read_models("filter")?;
    db.begin_stage("group")?;
    let cap = db.config.group_cap;
    let k = db.config.eval_points;
    let base_seed = db.config.seed;
    let outcomes: Vec<Option<(GroupRecord, FilterStatus)>> = records
        .par_iter()
        .map(|rec| {
            let hadamard = rec.status == FilterStatus::Hadamard;
            if !(hadamard || rec.status == FilterStatus::Unprocessed) {
                return None;
            }
            let seed = base_seed ^ (rec.id.mask() as u64);
            let out = match explore_group(&rec.id, cap, k, seed) {
                Ok(g) => {
                    if g.status == GroupStatus::Finite {
                        let name = identify_group(&rec.id, &g)
                            .map(|n| n.to_string())
                            .unwrap_or_else(|e| format!("error: {e}"));
                        let (os_zero, status) = match orbit_sum_zero(&rec.id, &g, seed) {
                            Ok(v) => {
                                let s = if v.is_zero {
                                    FilterStatus::FiniteGroupZeroOs
                                } else {
                                    FilterStatus::FiniteGroupNonzeroOs
                                };
                                (Some(v.is_zero), s)
                            }
                            Err(_) => (None, FilterStatus::GroupLarge),
                        };
                        (
                            GroupRecord {
                                model: rec.id.hex(),
                                hadamard,
                                status: "finite".into(),
                                order: g.order,
                                name: Some(name),
                                relators: g.relators.clone(),
                                orbit_sum_zero: os_zero,
                                seed,
                            },
                            status,
                        )
                    } else {
                        (
                            GroupRecord {
                                model: rec.id.hex(),
                                hadamard,
                                status: "presumed_infinite".into(),
                                order: None,
                                name: None,
                                relators: g.relators.clone(),
                                orbit_sum_zero: None,
                                seed,
                            },
                            FilterStatus::GroupLarge,
                        )
                    }
                }
                Err(e) => (
                    GroupRecord {
                        model: rec.id.hex(),
                        hadamard,
                        status: format!("error: {e}"),
                        order: None,
                        name: None,
                        relators: Vec::new(),
                        orbit_sum_zero: None,
                        seed,
                    },
                    FilterStatus::GroupLarge,
                ),
            };
            Some(out)
        })
        .collect();
    let mut lines = Vec::new();
    for (rec, out) in records.iter_mut().zip(outcomes) {
        if let Some((grec, status)) = out {
            // Hadamard models keep their filter status; survivors advance.
            if rec.status == FilterStatus::Unprocessed {
                rec.advance(status);
            }
            lines.push(serde_json::to_string(&grec).unwrap());
        }
    }
    atomic_write(
        &db.stage_dir("group").join("groups.jsonl"),
        (lines.join("\n") + "\n").as_bytes(),
    )?;
    db.write_models("group", &records)?;
    db.finish_stage("group")
}

fn survivors(records: &[ModelRecord]) -> Vec<StepSet> {
    records
        .iter()
        .filter(|r| r.status == FilterStatus::FiniteGroupZeroOs)
        .map(|r| r.id)
        .collect()
}

fn series_path(dir: &Path, model: &StepSet, target: Target, prime: u16) -> PathBuf {
    dir.join(format!("{}_{}_p{}.ow3s", model.hex(), target.token(), prime))
}

/// Stage 6: modular counting for every five-filter survivor, both targets,
/// over the prime plan for the configured horizon.
pub fn run_count(db: &ClassificationDb) -> Result<(), PipelineError> {
    if db.stage_done("count") {
        return Ok(());
    }
    let records = db.read_models("group")?;
    let dir = db.begin_stage("count")?;
    let n = db.config.n_terms;
    let mem_each = db.config.memory_limit / db.config.threads.max(1) as u64;
    let mut jobs: Vec<(StepSet, Target, u16)> = Vec::new();
    for model in survivors(&records) {
        let plan = select_primes(model.len(), n).map_err(PipelineError::Crt)?;
        for target in [Target::Excursions, Target::AllEndpoints] {
            for &p in &plan.primes {
                jobs.push((model, target, p));
            }
        }
    }
    let results: Result<Vec<_>, PipelineError> = jobs
        .into_par_iter()
        .map(|(model, target, p)| {
            let series = count_layers_with_limit(&model, n, p, target, 1, mem_each)?;
            let mut buf = Vec::new();
            series.write_to(&mut buf)?;
            atomic_write(&series_path(&dir, &model, target, p), &buf)?;
            Ok(())
        })
        .collect();
    results?;
    db.finish_stage("count")
}

/// Stage 7: CRT reconstruction of the exact sequences.
pub fn run_reconstruct(db: &ClassificationDb) -> Result<(), PipelineError> {
    if db.stage_done("reconstruct") {
        return Ok(());
    }
    let records = db.read_models("group")?;
    let count_dir = db.stage_dir("count");
    if !db.stage_done("count") {
        return Err(PipelineError::MissingStage {
            stage: "reconstruct",
            requirement: "completed `count` stage".into(),
        });
    }
    let dir = db.begin_stage("reconstruct")?;
    for model in survivors(&records) {
        let plan = select_primes(model.len(), db.config.n_terms).map_err(PipelineError::Crt)?;
        for target in [Target::Excursions, Target::AllEndpoints] {
            let mut images = Vec::new();
            for &p in &plan.primes {
                let f = fs::File::open(series_path(&count_dir, &model, target, p))?;
                images.push(ModSeries::read_from(&mut BufReader::new(f))?);
            }
            let bound = BigUint::from(model.len()).pow(db.config.n_terms);
            let exact = crt_reconstruct(&images, Some(&bound))?;
            let mut buf = Vec::new();
            exact
                .write_to(&mut buf, &plan.primes)
                .map_err(PipelineError::Crt)?;
            atomic_write(
                &dir.join(format!("{}_{}.txt", model.hex(), target.token())),
                &buf,
            )?;
        }
    }
    db.finish_stage("reconstruct")
}

/// One row of the estimates table.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateRow {
    pub model: String,
    pub target: String,
    pub m: Option<u32>,
    pub phi_estimate: String,
    pub phi_minpoly: String,
    pub alpha_estimate: String,
    pub accuracy: String,
    pub window: String,
    pub flags: String,
}

impl EstimateRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.model,
            self.target,
            self.m.map(|m| m.to_string()).unwrap_or_default(),
            self.phi_estimate,
            self.phi_minpoly,
            self.alpha_estimate,
            self.accuracy,
            self.window,
            self.flags
        )
    }
}

/// Stage 8: growth estimates and algebraic recognition for each exact
/// series. A model whose series cannot be estimated gets a row with the
/// refusal in the flags column rather than aborting the stage.
pub fn run_asympt(db: &ClassificationDb) -> Result<(), PipelineError> {
    if db.stage_done("asympt") {
        return Ok(());
    }
    let records = db.read_models("group")?;
    if !db.stage_done("reconstruct") {
        return Err(PipelineError::MissingStage {
            stage: "asympt",
            requirement: "completed `reconstruct` stage".into(),
        });
    }
    let rec_dir = db.stage_dir("reconstruct");
    let dir = db.begin_stage("asympt")?;
    let opts = EstimateOptions {
        order: db.config.richardson_order,
        digits: db.config.digits,
        ..Default::default()
    };
    let mut rows = vec![
        "model,target,m,phi_estimate,phi_minpoly,alpha_estimate,accuracy,window,flags".to_string(),
    ];
    for model in survivors(&records) {
        for target in [Target::Excursions, Target::AllEndpoints] {
            let path = rec_dir.join(format!("{}_{}.txt", model.hex(), target.token()));
            let f = fs::File::open(&path)?;
            let exact = ExactSeries::read_from(&mut BufReader::new(f))?;
            let row = match estimate_growth(&exact, &opts) {
                Ok(est) => {
                    let phi = est.phi_rational();
                    let acc = est.accuracy_rational();
                    let usable = accuracy_digits(&acc).clamp(15, db.config.digits);
                    let minpoly = recognize_constant(
                        &phi,
                        usable,
                        4,
                        &BigInt::from(1_000_000u64),
                    )
                    .map(|c| c.polynomial_string())
                    .unwrap_or_default();
                    EstimateRow {
                        model: model.hex(),
                        target: target.token().into(),
                        m: Some(est.period),
                        phi_estimate: est.phi_decimal.clone(),
                        phi_minpoly: minpoly,
                        alpha_estimate: est.alpha_decimal.clone(),
                        accuracy: est.accuracy_decimal.clone(),
                        window: format!(
                            "{}..{} order {}",
                            est.windows.1, est.windows.0, est.windows.2
                        ),
                        flags: est.flags.join(";"),
                    }
                }
                Err(e) => EstimateRow {
                    model: model.hex(),
                    target: target.token().into(),
                    m: None,
                    phi_estimate: String::new(),
                    phi_minpoly: String::new(),
                    alpha_estimate: String::new(),
                    accuracy: String::new(),
                    window: String::new(),
                    flags: format!("refused: {e}"),
                },
            };
            rows.push(row.csv());
        }
    }
    atomic_write(
        &dir.join("estimates.csv"),
        (rows.join("\n") + "\n").as_bytes(),
    )?;
    db.finish_stage("asympt")
}

fn accuracy_digits(acc: &num_rational::BigRational) -> u32 {
    use num_traits::Zero;
    if acc.is_zero() {
        return 60;
    }
    let mut digits = 0u32;
    let mut v = acc.clone();
    let one = num_rational::BigRational::from(BigInt::from(1));
    let ten = num_rational::BigRational::from(BigInt::from(10));
    while v < one && digits < 60 {
        v *= &ten;
        digits += 1;
    }
    digits.saturating_sub(1)
}

/// Stage 9: recurrence and differential-equation guessing on the modular
/// series, with the double-prime consistency flag.
pub fn run_guess(db: &ClassificationDb) -> Result<(), PipelineError> {
    if db.stage_done("guess") {
        return Ok(());
    }
    let records = db.read_models("group")?;
    if !db.stage_done("count") {
        return Err(PipelineError::MissingStage {
            stage: "guess",
            requirement: "completed `count` stage".into(),
        });
    }
    let count_dir = db.stage_dir("count");
    let dir = db.begin_stage("guess")?;
    let mut lines = Vec::new();
    for model in survivors(&records) {
        let plan = select_primes(model.len(), db.config.n_terms).map_err(PipelineError::Crt)?;
        let primes: Vec<u16> = plan.primes.iter().take(2).copied().collect();
        for target in [Target::Excursions, Target::AllEndpoints] {
            let mut found_rec = Vec::new();
            for &p in &primes {
                let f = fs::File::open(series_path(&count_dir, &model, target, p))?;
                let series = ModSeries::read_from(&mut BufReader::new(f))?;
                match guess_recurrence(&series, db.config.guess_order, db.config.guess_degree) {
                    Ok(rep) => {
                        let ode = guess_ode(&series, db.config.guess_order, db.config.guess_degree)
                            .ok()
                            .and_then(|r| r.found);
                        if let Some(c) = &rep.found {
                            found_rec.push(c.clone());
                        }
                        let js = serde_json::json!({
                            "model": model.hex(),
                            "target": target.token(),
                            "prime": p,
                            "budget": {"r": rep.budget.r, "d": rep.budget.d, "N": rep.budget.n},
                            "found": rep.found.is_some(),
                            "recurrence": rep.found,
                            "ode_found": ode.is_some(),
                            "ode": ode,
                        });
                        lines.push(js.to_string());
                    }
                    Err(e) => {
                        lines.push(
                            serde_json::json!({
                                "model": model.hex(),
                                "target": target.token(),
                                "prime": p,
                                "error": e.to_string(),
                            })
                            .to_string(),
                        );
                    }
                }
            }
            if found_rec.len() == 2 && double_prime_consistent(&found_rec[0], &found_rec[1]) {
                lines.push(
                    serde_json::json!({
                        "model": model.hex(),
                        "target": target.token(),
                        "double_prime": true,
                    })
                    .to_string(),
                );
            }
        }
    }
    atomic_write(
        &dir.join("reports.jsonl"),
        (lines.join("\n") + "\n").as_bytes(),
    )?;
    db.finish_stage("guess")
}

/// Run every stage in order.
pub fn run_pipeline(root: &Path, config: RunConfig) -> Result<Report, PipelineError> {
    let db = ClassificationDb::create(root, config)?;
    run_enumerate(&db)?;
    run_filter(&db)?;
    run_group(&db)?;
    run_count(&db)?;
    run_reconstruct(&db)?;
    run_asympt(&db)?;
    run_guess(&db)?;
    report(&db)
}

/// Statistics table row: counts per group name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GroupTableRow {
    pub hadamard: u64,
    pub nonzero_orbit_sum: u64,
    pub zero_orbit_sum: u64,
}

/// Summary emitted by the final stage: the per-filter class polynomials,
/// the group statistics table, and the location of the estimates.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub filter1: SizePolynomial,
    pub filter2: SizePolynomial,
    pub filter3: SizePolynomial,
    pub filter4: SizePolynomial,
    pub filter5: SizePolynomial,
    pub group_table: BTreeMap<String, GroupTableRow>,
    pub hadamard_small_group_total: u64,
    pub survivor_count: u64,
    pub estimates_csv: Option<String>,
}

/// Build the report from the recorded stage outputs; every count is
/// computed from stored records, never hand-assembled.
pub fn report(db: &ClassificationDb) -> Result<Report, PipelineError> {
    let records = db.read_models(if db.stage_done("group") {
        "group"
    } else if db.stage_done("filter") {
        "filter"
    } else {
        "enumerate"
    })?;
    let filter1 = SizePolynomial::from_sizes(records.iter().map(|r| r.size));
    let past_projection = |r: &&ModelRecord| {
        !matches!(
            r.status,
            FilterStatus::Projectible | FilterStatus::EliminatedUnusedDuplicate
        )
    };
    let filter2 =
        SizePolynomial::from_sizes(records.iter().filter(past_projection).map(|r| r.size));
    let filter3 = SizePolynomial::from_sizes(
        records
            .iter()
            .filter(past_projection)
            .filter(|r| r.status != FilterStatus::Hadamard)
            .map(|r| r.size),
    );
    let filter4 = SizePolynomial::from_sizes(
        records
            .iter()
            .filter(|r| {
                matches!(
                    r.status,
                    FilterStatus::FiniteGroupZeroOs | FilterStatus::FiniteGroupNonzeroOs
                )
            })
            .map(|r| r.size),
    );
    let filter5 = SizePolynomial::from_sizes(
        records
            .iter()
            .filter(|r| r.status == FilterStatus::FiniteGroupZeroOs)
            .map(|r| r.size),
    );

    let mut group_table: BTreeMap<String, GroupTableRow> = BTreeMap::new();
    let mut hadamard_small_group_total = 0u64;
    if db.stage_done("group") {
        for g in db.read_group_records()? {
            if g.status != "finite" {
                continue;
            }
            let name = g.name.clone().unwrap_or_else(|| "?".into());
            let row = group_table.entry(name).or_default();
            if g.hadamard {
                row.hadamard += 1;
                hadamard_small_group_total += 1;
            } else {
                match g.orbit_sum_zero {
                    Some(true) => row.zero_orbit_sum += 1,
                    Some(false) => row.nonzero_orbit_sum += 1,
                    None => {}
                }
            }
        }
    }
    let estimates_csv = db
        .stage_done("asympt")
        .then(|| db.stage_dir("asympt").join("estimates.csv"))
        .filter(|p| p.exists())
        .map(|p| p.display().to_string());

    Ok(Report {
        survivor_count: filter5.total(),
        filter1,
        filter2,
        filter3,
        filter4,
        filter5,
        group_table,
        hadamard_small_group_total,
        estimates_csv,
    })
}

impl Report {
    /// Human-readable tables.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("classes:            {}\n", self.filter1));
        out.push_str(&format!("inherently 3d:      {}\n", self.filter2));
        out.push_str(&format!("non-hadamard:       {}\n", self.filter3));
        out.push_str(&format!("finite small group: {}\n", self.filter4));
        out.push_str(&format!("zero orbit sum:     {}\n", self.filter5));
        out.push_str(&format!(
            "five-filter survivors: {}\n\n",
            self.survivor_count
        ));
        out.push_str("group      | hadamard | nonzero o.s. | zero o.s.\n");
        for (name, row) in &self.group_table {
            out.push_str(&format!(
                "{:<10} | {:>8} | {:>12} | {:>9}\n",
                name, row.hadamard, row.nonzero_orbit_sum, row.zero_orbit_sum
            ));
        }
        out.push_str(&format!(
            "hadamard models with small group: {}\n",
            self.hadamard_small_group_total
        ));
        if let Some(csv) = &self.estimates_csv {
            out.push_str(&format!("estimates: {csv}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_polynomial_formats() {
        let p = SizePolynomial::from_sizes([3, 3, 4, 26]);
        assert_eq!(p.coefficient(3), 2);
        assert_eq!(p.to_string(), "2*u^3 + 1*u^4 + 1*u^26");
        assert_eq!(p.total(), 4);
    }

    #[test]
    fn config_roundtrips_through_toml() {
        let cfg = RunConfig {
            max_size: 6,
            ..Default::default()
        };
        let s = toml::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }
}
