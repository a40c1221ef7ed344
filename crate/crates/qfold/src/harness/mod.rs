//! Run orchestration: loading benchmark targets, driving one reconstruction
//! (agent or classical optimizer), scoring results against natives, and
//! assembling the benchmark tables. All of it is deterministic for a fixed
//! seed; wall-clock times are reported separately so logs and CSVs stay
//! byte-reproducible.

pub mod config;
pub mod manifest;

pub use config::{CliOverrides, Method, RunSettings, Scenario, ALL_METHODS};
pub use manifest::{ContactSource, Manifest, TargetSpec};

use crate::baselines::{optimize, BaselineError, Completion};
use crate::dqn::{greedy_rollout, train_self_play, DqnError};
use crate::environment::{DimerEnvironment, EnvError};
use crate::geometry::Pose;
use crate::metrics::{
    csv_row, evaluate_complex, Dimer, MetricsError, MetricsOptions, QualityReport,
};
use crate::pdb::{read_structures, write_complex, ParseOptions, PdbError, Structure};
use crate::restraints::{
    contact_prf, extract_true_contacts, read_contact_file, write_contact_file, ContactSet,
    DistanceKind, EnergyOptions, PreparedEnergy, RestraintError,
};
use crate::seeding::derive_seed;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

const ROLLOUT_SALT: u64 = 0x9001;
/// Roughly how many trace lines a restart contributes to a run log.
const TRACE_LINES_PER_RESTART: usize = 100;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    NoContacts(String),
    #[error("{0}")]
    NonFinite(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 1 config, 2 parse, 3 empty contacts, 4 non-finite
    /// energy. I/O failures use the general code 1.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 1,
            HarnessError::Parse(_) => 2,
            HarnessError::NoContacts(_) => 3,
            HarnessError::NonFinite(_) => 4,
        }
    }
}

impl From<PdbError> for HarnessError {
    fn from(e: PdbError) -> Self {
        HarnessError::Parse(e.to_string())
    }
}

impl From<RestraintError> for HarnessError {
    fn from(e: RestraintError) -> Self {
        match e {
            RestraintError::EmptyContactSet | RestraintError::NoNativeContacts => {
                HarnessError::NoContacts(e.to_string())
            }
            other => HarnessError::Parse(other.to_string()),
        }
    }
}

impl From<MetricsError> for HarnessError {
    fn from(e: MetricsError) -> Self {
        HarnessError::Parse(e.to_string())
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Restraint(r) => r.into(),
            EnvError::NonFiniteEnergy => HarnessError::NonFinite(e.to_string()),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

impl From<DqnError> for HarnessError {
    fn from(e: DqnError) -> Self {
        match e {
            DqnError::NonFiniteLoss { .. } => HarnessError::NonFinite(e.to_string()),
            DqnError::Env(env) => env.into(),
            DqnError::Io(io) => HarnessError::Io(io),
            DqnError::BadCheckpoint(_) => HarnessError::Parse(e.to_string()),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

impl From<BaselineError> for HarnessError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Restraint(r) => r.into(),
            BaselineError::NonFiniteEnergy { .. } => HarnessError::NonFinite(e.to_string()),
            BaselineError::BadConfig(_) => HarnessError::Config(e.to_string()),
        }
    }
}

/// A target with all inputs resolved: structures in memory, restraints
/// validated, and the contact set graded against the native truth when a
/// native complex is available.
#[derive(Debug, Clone)]
pub struct LoadedTarget {
    pub name: String,
    pub scenario: Scenario,
    pub receptor: Structure,
    pub ligand: Structure,
    pub contacts: ContactSet,
    pub native: Option<Dimer>,
    /// Precision, recall, F1 of `contacts` vs native true contacts.
    pub contact_quality: Option<(f64, f64, f64)>,
}

fn pick_chain(path: &Path, chains: &[Structure], id: char) -> Result<Structure, HarnessError> {
    chains.iter().find(|c| c.chain_id == id).cloned().ok_or_else(|| {
        let have: Vec<char> = chains.iter().map(|c| c.chain_id).collect();
        HarnessError::Parse(format!("{} has chains {have:?}, not {id:?}", path.display()))
    })
}

fn read_chains(path: &Path) -> Result<Vec<Structure>, HarnessError> {
    read_structures(path, None, ParseOptions::default())
        .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))
}

/// Read one complex file as a receptor/ligand dimer.
pub fn read_dimer(
    path: &Path,
    receptor_chain: char,
    ligand_chain: char,
) -> Result<Dimer, HarnessError> {
    let chains = read_chains(path)?;
    Ok(Dimer::new(
        pick_chain(path, &chains, receptor_chain)?,
        pick_chain(path, &chains, ligand_chain)?,
    ))
}

pub fn load_target(spec: &TargetSpec, threshold: f64) -> Result<LoadedTarget, HarnessError> {
    let native = spec
        .native
        .as_deref()
        .map(|p| read_dimer(p, spec.receptor_chain, spec.ligand_chain))
        .transpose()?;

    let monomer = |own: &Option<PathBuf>, chain: char, side: &str| -> Result<Structure, HarnessError> {
        match own {
            Some(path) => Ok(pick_chain(path, &read_chains(path)?, chain)?),
            None => match &native {
                Some(n) => Ok(if side == "receptor" { n.receptor.clone() } else { n.ligand.clone() }),
                None => Err(HarnessError::Config(format!(
                    "target {:?} has neither a {side} file nor a native complex",
                    spec.name
                ))),
            },
        }
    };
    let receptor = monomer(&spec.receptor, spec.receptor_chain, "receptor")?;
    let ligand = monomer(&spec.ligand, spec.ligand_chain, "ligand")?;

    let contacts = match &spec.contacts {
        ContactSource::ExtractTrue => {
            let n = native.as_ref().expect("validated at manifest parse");
            let raw = extract_true_contacts(&n.receptor, &n.ligand, threshold)?;
            // Re-key to the input chains, which may differ from the native
            // ones in the realistic scenario.
            ContactSet::new(raw.restraints().to_vec(), ligand.len(), receptor.len())?
        }
        ContactSource::File(path) => {
            let file = fs::File::open(path)
                .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
            read_contact_file(file, ligand.len(), receptor.len())
                .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?
        }
    };
    if contacts.is_empty() {
        return Err(HarnessError::NoContacts(format!(
            "target {:?} has no inter-chain contacts at {threshold} angstrom; \
             contact-free targets are conventionally excluded from docking benchmarks",
            spec.name
        )));
    }

    let contact_quality = match &native {
        Some(n) => {
            let truth = extract_true_contacts(&n.receptor, &n.ligand, threshold)?;
            Some(contact_prf(&contacts, &truth)?)
        }
        None => None,
    };

    Ok(LoadedTarget {
        name: spec.name.clone(),
        scenario: spec.scenario,
        receptor,
        ligand,
        contacts,
        native,
        contact_quality,
    })
}

#[derive(Debug)]
pub struct ReconstructOutcome {
    pub method: Method,
    pub seed: u64,
    pub pose: Pose,
    /// Energy of the result under the shared heavy-atom contact definition.
    pub final_energy: f64,
    /// Energy under the method's own objective (differs for GD, which
    /// descends on widened CB wells).
    pub objective_energy: f64,
    pub steps: usize,
    /// Deterministic run log: effective settings, per-episode or per-restart
    /// records, and the result line.
    pub log: String,
}

fn log_header(
    target: &LoadedTarget,
    settings: &RunSettings,
    method: Method,
    seed: u64,
) -> String {
    let mut log = String::new();
    let _ = writeln!(log, "qfold-run v1");
    let _ = writeln!(log, "target {}", target.name);
    let _ = writeln!(log, "scenario {}", target.scenario.token());
    let _ = writeln!(log, "method {}", method.label());
    let _ = writeln!(log, "seed {seed}");
    let _ = writeln!(log, "contacts {}", target.contacts.len());
    for line in settings.echo_lines() {
        let _ = writeln!(log, "setting {line}");
    }
    log
}

/// Run one reconstruction of a loaded target with the given method and seed.
pub fn reconstruct(
    target: &LoadedTarget,
    settings: &RunSettings,
    method: Method,
    seed: u64,
) -> Result<ReconstructOutcome, HarnessError> {
    let mut log = log_header(target, settings, method, seed);

    let (pose, objective_energy, steps) = match method {
        Method::Drl => {
            let mut env = DimerEnvironment::new(
                target.receptor.clone(),
                target.ligand.clone(),
                &target.contacts,
                target.native.clone(),
                settings.env,
            )?;
            let train_config = settings.train_for(seed);
            let outcome = train_self_play(&mut env, &train_config)?;
            for episode in &outcome.episodes {
                let _ = writeln!(log, "episode {}", episode.to_line());
            }
            let rollout_cap = if settings.rollout_steps > 0 {
                settings.rollout_steps
            } else {
                settings.env.max_steps
            };
            let rollout = greedy_rollout(
                &outcome.network,
                &mut env,
                rollout_cap,
                derive_seed(seed, ROLLOUT_SALT),
            )?;
            let _ = writeln!(
                log,
                "rollout best {} final {} steps {}",
                rollout.best_energy, rollout.final_energy, rollout.steps
            );
            let steps = outcome.steps_taken + rollout.steps;
            // Best pose seen anywhere: across training and the greedy rollout.
            let (pose, energy) = if outcome.best_energy <= rollout.best_energy {
                (outcome.best_pose, outcome.best_energy)
            } else {
                (rollout.best_pose, rollout.best_energy)
            };
            let pose = pose.ok_or_else(|| {
                HarnessError::Config("environment produced no pose".into())
            })?;
            (pose, energy, steps)
        }
        Method::Gd | Method::Mc | Method::Sa => {
            let optimizer_config = settings.optimizer_for(method)?;
            let contacts = settings.contacts_for(method, &target.contacts);
            let outcome =
                optimize(&optimizer_config, &target.receptor, &target.ligand, &contacts, seed)?;
            let mut steps = 0;
            for restart in &outcome.restarts {
                steps += restart.iterations;
                let completion = match restart.completion {
                    Completion::GradientConverged => "gradient-converged",
                    Completion::IterationCap => "iteration-cap",
                    Completion::Stalled => "stalled",
                };
                let gradient = match restart.gradient_norm {
                    Some(g) => g.to_string(),
                    None => "-".into(),
                };
                let _ = writeln!(
                    log,
                    "restart {} initial {} best {} final {} iterations {} completion {} gradient_norm {}",
                    restart.restart,
                    restart.initial_energy,
                    restart.energy,
                    restart.final_energy,
                    restart.iterations,
                    completion,
                    gradient,
                );
                let stride = (restart.trace.len() / TRACE_LINES_PER_RESTART).max(1);
                for point in restart.trace.iter().step_by(stride) {
                    let _ = writeln!(
                        log,
                        "trace {} {} {} {}",
                        restart.restart, point.iteration, point.energy, point.accepted
                    );
                }
            }
            let best = outcome.best();
            let _ = writeln!(log, "best_restart {}", best.restart);
            (best.pose, best.energy, steps)
        }
    };

    // Score the final pose under the shared definition regardless of what the
    // method itself descended on.
    let shared = PreparedEnergy::new(
        &target.receptor,
        &target.ligand,
        &target.contacts,
        EnergyOptions { kind: DistanceKind::MinHeavy, prob_weight: false },
    )?;
    let final_energy = shared.energy(&pose);
    if !final_energy.is_finite() {
        return Err(HarnessError::NonFinite(format!(
            "final pose of {} {} seed {seed} has non-finite energy",
            target.name,
            method.label()
        )));
    }
    let _ = writeln!(
        log,
        "result objective_energy {objective_energy} shared_energy {final_energy} steps {steps}"
    );

    Ok(ReconstructOutcome { method, seed, pose, final_energy, objective_energy, steps, log })
}

/// Score a model complex against its native with default options.
pub fn evaluate_model(model: &Dimer, native: &Dimer) -> Result<QualityReport, HarnessError> {
    Ok(evaluate_complex(model, native, &MetricsOptions::default())?)
}

/// Extract true contacts from a complex file and write them out. Returns the
/// number of contacts.
pub fn extract_contacts_file(
    pdb: &Path,
    receptor_chain: char,
    ligand_chain: char,
    threshold: f64,
    out: &Path,
) -> Result<usize, HarnessError> {
    let dimer = read_dimer(pdb, receptor_chain, ligand_chain)?;
    let contacts = extract_true_contacts(&dimer.receptor, &dimer.ligand, threshold)?;
    if contacts.is_empty() {
        return Err(HarnessError::NoContacts(format!(
            "no inter-chain contacts at {threshold} angstrom between chains \
             {receptor_chain:?} and {ligand_chain:?}; contact-free targets are \
             conventionally excluded from docking benchmarks"
        )));
    }
    let mut file = fs::File::create(out)?;
    write_contact_file(&mut file, &contacts)?;
    Ok(contacts.len())
}

/// One benchmark job key: a (target, method, seed) cell.
#[derive(Debug, Clone)]
struct Job {
    target_index: usize,
    method: Method,
    seed: u64,
}

#[derive(Debug, Clone)]
pub struct JobSuccess {
    pub report: QualityReport,
    pub final_energy: f64,
    pub objective_energy: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct JobResult {
    pub target: String,
    pub scenario: Scenario,
    pub method: Method,
    pub seed: u64,
    pub outcome: Result<JobSuccess, String>,
    pub wall_ms: u128,
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub method: Method,
    pub runs: usize,
    pub failures: usize,
    pub means: QualityReport,
    pub mean_final_energy: f64,
    /// Metrics on which this method beats every other (ties shared).
    pub best_on: Vec<&'static str>,
}

#[derive(Debug)]
pub struct BenchmarkReport {
    pub jobs: Vec<JobResult>,
    pub summary: Vec<SummaryRow>,
    pub out_dir: PathBuf,
}

pub const PER_TARGET_HEADER: &str =
    "target,scenario,method,tm_score,rmsd,fnat,i_rmsd,l_rmsd,seed,final_energy,steps";
pub const SUMMARY_HEADER: &str =
    "method,runs,failures,tm_score,rmsd,fnat,i_rmsd,l_rmsd,final_energy,best_on";

#[derive(Serialize)]
struct WallTimeEntry {
    target: String,
    method: &'static str,
    seed: u64,
    ms: u128,
}

#[derive(Serialize)]
struct WallTimes {
    total_ms: u128,
    jobs: Vec<WallTimeEntry>,
}

fn method_order(m: Method) -> usize {
    ALL_METHODS.iter().position(|x| *x == m).unwrap_or(usize::MAX)
}

/// Run every (target, method, seed) cell of a manifest and write the report
/// files into `out_dir`: per_target.csv, summary.csv, plot data, run.log,
/// failures.log, models/ and logs/ per job, and wall_times.json (the one
/// output that is not byte-reproducible).
pub fn run_benchmark(
    manifest: &Manifest,
    settings: &RunSettings,
    method_filter: Option<Method>,
    out_dir: &Path,
) -> Result<BenchmarkReport, HarnessError> {
    fs::create_dir_all(out_dir.join("models"))?;
    fs::create_dir_all(out_dir.join("logs"))?;
    let batch_start = std::time::Instant::now();

    // Load each target once; a broken target fails its rows, not the batch.
    let loaded: Vec<Result<LoadedTarget, String>> = manifest
        .targets
        .iter()
        .map(|spec| load_target(spec, settings.contact_threshold).map_err(|e| e.to_string()))
        .collect();

    let mut jobs: Vec<Job> = Vec::new();
    for (target_index, spec) in manifest.targets.iter().enumerate() {
        for &method in &spec.methods {
            if method_filter.is_some_and(|f| f != method) {
                continue;
            }
            for &seed in &spec.seeds {
                jobs.push(Job { target_index, method, seed });
            }
        }
    }
    jobs.sort_by(|a, b| {
        let ka = (&manifest.targets[a.target_index].name, method_order(a.method), a.seed);
        let kb = (&manifest.targets[b.target_index].name, method_order(b.method), b.seed);
        ka.cmp(&kb)
    });
    if jobs.is_empty() {
        return Err(HarnessError::Config(
            "manifest yields no jobs (method filter too narrow?)".into(),
        ));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config::resolve_threads(settings.threads))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;

    let results: Vec<JobResult> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let spec = &manifest.targets[job.target_index];
                let start = std::time::Instant::now();
                let outcome = run_job(&loaded[job.target_index], spec, settings, job, out_dir);
                JobResult {
                    target: spec.name.clone(),
                    scenario: spec.scenario,
                    method: job.method,
                    seed: job.seed,
                    outcome,
                    wall_ms: start.elapsed().as_millis(),
                }
            })
            .collect()
    });

    let summary = summarize(&results);
    write_outputs(&results, &summary, &loaded, manifest, settings, out_dir, batch_start)?;
    Ok(BenchmarkReport { jobs: results, summary, out_dir: out_dir.to_path_buf() })
}

fn run_job(
    loaded: &Result<LoadedTarget, String>,
    spec: &TargetSpec,
    settings: &RunSettings,
    job: &Job,
    out_dir: &Path,
) -> Result<JobSuccess, String> {
    let target = loaded.as_ref().map_err(|e| e.clone())?;
    let run = reconstruct(target, settings, job.method, job.seed).map_err(|e| e.to_string())?;

    let stem = format!("{}_{}_{}", spec.name, job.method.label(), job.seed);
    let model_path = out_dir.join("models").join(format!("{stem}.pdb"));
    let mut model_file = fs::File::create(&model_path).map_err(|e| e.to_string())?;
    write_complex(&mut model_file, &target.receptor, &target.ligand, &run.pose, None)
        .map_err(|e| e.to_string())?;
    fs::write(out_dir.join("logs").join(format!("{stem}.log")), &run.log)
        .map_err(|e| e.to_string())?;

    let native = target
        .native
        .as_ref()
        .ok_or_else(|| "no native complex to score against".to_string())?;
    let model = Dimer::new(target.receptor.clone(), {
        let mut posed = target.ligand.clone();
        for residue in &mut posed.residues {
            for atom in &mut residue.atoms {
                atom.coord = run.pose.apply(atom.coord);
            }
        }
        posed
    });
    let report = evaluate_model(&model, native).map_err(|e| e.to_string())?;

    Ok(JobSuccess {
        report,
        final_energy: run.final_energy,
        objective_energy: run.objective_energy,
        steps: run.steps,
    })
}

fn summarize(results: &[JobResult]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    for &method in &ALL_METHODS {
        let of_method: Vec<&JobResult> = results.iter().filter(|r| r.method == method).collect();
        if of_method.is_empty() {
            continue;
        }
        let ok: Vec<&JobSuccess> =
            of_method.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let n = ok.len() as f64;
        let mean = |f: &dyn Fn(&JobSuccess) -> f64| -> f64 {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|s| f(s)).sum::<f64>() / n
            }
        };
        rows.push(SummaryRow {
            method,
            runs: of_method.len(),
            failures: of_method.len() - ok.len(),
            means: QualityReport {
                tm_score: mean(&|s| s.report.tm_score),
                rmsd: mean(&|s| s.report.rmsd),
                fnat: mean(&|s| s.report.fnat),
                i_rmsd: mean(&|s| s.report.i_rmsd),
                l_rmsd: mean(&|s| s.report.l_rmsd),
            },
            mean_final_energy: mean(&|s| s.final_energy),
            best_on: Vec::new(),
        });
    }

    // Higher is better for tm_score and fnat, lower for the RMSD family.
    let metrics: [(&'static str, fn(&SummaryRow) -> f64, bool); 5] = [
        ("tm_score", |r| r.means.tm_score, true),
        ("rmsd", |r| r.means.rmsd, false),
        ("fnat", |r| r.means.fnat, true),
        ("i_rmsd", |r| r.means.i_rmsd, false),
        ("l_rmsd", |r| r.means.l_rmsd, false),
    ];
    for (name, value, higher_better) in metrics {
        let candidates: Vec<f64> =
            rows.iter().map(value).filter(|v| v.is_finite()).collect();
        let Some(best) = candidates.into_iter().reduce(|a, b| {
            if higher_better {
                a.max(b)
            } else {
                a.min(b)
            }
        }) else {
            continue;
        };
        for row in rows.iter_mut() {
            if value(row) == best {
                row.best_on.push(name);
            }
        }
    }
    rows
}

fn write_outputs(
    results: &[JobResult],
    summary: &[SummaryRow],
    loaded: &[Result<LoadedTarget, String>],
    manifest: &Manifest,
    settings: &RunSettings,
    out_dir: &Path,
    batch_start: std::time::Instant,
) -> Result<(), HarnessError> {
    let mut per_target = String::from(PER_TARGET_HEADER);
    per_target.push('\n');
    for r in results {
        if let Ok(s) = &r.outcome {
            let row = csv_row(&r.target, r.scenario.token(), r.method.label(), &s.report);
            let _ = writeln!(per_target, "{row},{},{},{}", r.seed, s.final_energy, s.steps);
        }
    }
    fs::write(out_dir.join("per_target.csv"), &per_target)?;

    let mut summary_csv = String::from(SUMMARY_HEADER);
    summary_csv.push('\n');
    for row in summary {
        let best_on = if row.best_on.is_empty() { "-".to_string() } else { row.best_on.join(";") };
        let m = &row.means;
        let _ = writeln!(
            summary_csv,
            "{},{},{},{},{},{},{},{},{},{}",
            row.method.label(),
            row.runs,
            row.failures,
            m.tm_score,
            m.rmsd,
            m.fnat,
            m.i_rmsd,
            m.l_rmsd,
            row.mean_final_energy,
            best_on
        );
    }
    fs::write(out_dir.join("summary.csv"), &summary_csv)?;

    // Plot data: reconstruction quality against the accuracy of the contact
    // set each target was given.
    let axes: [(&str, usize); 3] = [("precision", 0), ("recall", 1), ("f1", 2)];
    for (axis, idx) in axes {
        let mut csv = format!("target,method,seed,{axis},tm_score,fnat\n");
        for r in results {
            let Ok(s) = &r.outcome else { continue };
            let quality = manifest
                .targets
                .iter()
                .position(|t| t.name == r.target)
                .and_then(|i| loaded[i].as_ref().ok())
                .and_then(|t| t.contact_quality);
            let Some(q) = quality else { continue };
            let value = [q.0, q.1, q.2][idx];
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                r.target,
                r.method.label(),
                r.seed,
                value,
                s.report.tm_score,
                s.report.fnat
            );
        }
        fs::write(out_dir.join(format!("tm_vs_{axis}.csv")), &csv)?;
    }

    let mut failures = String::new();
    for r in results {
        if let Err(e) = &r.outcome {
            let _ = writeln!(failures, "{} {} {} {e}", r.target, r.method.label(), r.seed);
        }
    }
    fs::write(out_dir.join("failures.log"), &failures)?;

    let mut run_log = String::from("qfold-run v1\n");
    for line in settings.echo_lines() {
        let _ = writeln!(run_log, "setting {line}");
    }
    let _ = writeln!(run_log, "jobs {}", results.len());
    for r in results {
        match &r.outcome {
            Ok(s) => {
                let _ = writeln!(
                    run_log,
                    "job {} {} {} ok energy {} steps {}",
                    r.target,
                    r.method.label(),
                    r.seed,
                    s.final_energy,
                    s.steps
                );
            }
            Err(e) => {
                let _ = writeln!(
                    run_log,
                    "job {} {} {} failed {e}",
                    r.target,
                    r.method.label(),
                    r.seed
                );
            }
        }
    }
    fs::write(out_dir.join("run.log"), &run_log)?;

    let wall = WallTimes {
        total_ms: batch_start.elapsed().as_millis(),
        jobs: results
            .iter()
            .map(|r| WallTimeEntry {
                target: r.target.clone(),
                method: r.method.label(),
                seed: r.seed,
                ms: r.wall_ms,
            })
            .collect(),
    };
    let mut wall_file = fs::File::create(out_dir.join("wall_times.json"))?;
    serde_json::to_writer_pretty(&mut wall_file, &wall)
        .map_err(|e| HarnessError::Io(std::io::Error::other(e)))?;
    wall_file.write_all(b"\n")?;
    Ok(())
}

/// Render the CSVs of a benchmark directory as aligned text tables.
pub fn render_report(dir: &Path) -> Result<String, HarnessError> {
    let read = |name: &str| -> Result<String, HarnessError> {
        fs::read_to_string(dir.join(name))
            .map_err(|e| HarnessError::Parse(format!("{}/{name}: {e}", dir.display())))
    };
    let summary = read("summary.csv")?;
    let per_target = read("per_target.csv")?;

    let mut out = String::new();
    let _ = writeln!(out, "Benchmark report: {}", dir.display());
    let _ = writeln!(out);
    let _ = writeln!(out, "Method averages");
    out.push_str(&align_csv(&summary));
    let _ = writeln!(out);
    let _ = writeln!(out, "Per-target results");
    out.push_str(&align_csv(&per_target));
    Ok(out)
}

fn align_csv(csv: &str) -> String {
    let rows: Vec<Vec<String>> = csv
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| line.split(',').map(format_cell).collect())
        .collect();
    if rows.is_empty() {
        return "(empty)\n".into();
    }
    let columns = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; columns];
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            let _ = write!(line, "{cell:<width$}", width = widths[i]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Shorten long floats for table display; everything else passes through.
fn format_cell(cell: &str) -> String {
    match cell.parse::<f64>() {
        Ok(v) if cell.contains('.') => format!("{v:.4}"),
        _ => cell.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::InitialSampler;
    use crate::geometry::Vec3;
    use crate::harness::manifest::read_manifest;
    use crate::metrics::CSV_HEADER;
    use crate::pdb::{Atom, Residue};
    use std::io::Write;

    fn residue(ordinal: usize, name: &str, ca: Vec3) -> Residue {
        let offsets = [
            ("N", Vec3::new(-0.9, 0.7, 0.2)),
            ("CA", Vec3::ZERO),
            ("C", Vec3::new(1.0, 0.6, -0.3)),
            ("O", Vec3::new(1.3, 1.6, -0.8)),
            ("CB", Vec3::new(0.3, -1.1, 0.9)),
        ];
        Residue {
            ordinal,
            name: name.into(),
            atoms: offsets
                .iter()
                .filter(|(n, _)| !(name == "GLY" && *n == "CB"))
                .map(|(n, off)| Atom {
                    name: (*n).into(),
                    element: if *n == "N" { "N" } else if *n == "O" { "O" } else { "C" }.into(),
                    coord: ca + *off,
                })
                .collect(),
        }
    }

    fn strand(chain_id: char, start: Vec3, step: Vec3, n: usize) -> Structure {
        Structure {
            chain_id,
            residues: (0..n)
                .map(|i| residue(i + 1, "ALA", start + step * (i as f64)))
                .collect(),
        }
    }

    /// A dimer in contact: two 4-residue strands 4.5 A apart in z.
    fn tiny_complex() -> Dimer {
        let receptor = strand('A', Vec3::ZERO, Vec3::new(3.8, 0.4, 0.0), 4);
        let ligand = strand('B', Vec3::new(0.5, -0.3, 4.5), Vec3::new(3.8, -0.4, 0.0), 4);
        Dimer::new(receptor, ligand)
    }

    fn write_native(dir: &Path, name: &str) -> PathBuf {
        let dimer = tiny_complex();
        let path = dir.join(name);
        let mut file = fs::File::create(&path).unwrap();
        write_complex(
            &mut file,
            &dimer.receptor,
            &dimer.ligand,
            &Pose::identity(Vec3::ZERO),
            None,
        )
        .unwrap();
        path
    }

    fn fast_settings() -> RunSettings {
        let mut settings = RunSettings::default();
        settings.optimizer.max_iterations = 400;
        settings.optimizer.restarts = 2;
        settings.env.max_steps = 40;
        settings.train.total_steps = 60;
        settings.train.batch_size = 8;
        settings.train.hidden_size = 16;
        settings.env.obs_size = 8;
        settings
    }

    #[test]
    fn load_target_extracts_contacts_and_grades_them() {
        let dir = tempfile::tempdir().unwrap();
        let native = write_native(dir.path(), "native.pdb");
        let spec = TargetSpec {
            name: "tiny".into(),
            scenario: Scenario::Optimal,
            receptor: None,
            ligand: None,
            receptor_chain: 'A',
            ligand_chain: 'B',
            native: Some(native),
            contacts: ContactSource::ExtractTrue,
            methods: vec![Method::Gd],
            seeds: vec![0],
        };
        let target = load_target(&spec, 6.0).unwrap();
        assert!(target.contacts.len() >= 4, "{}", target.contacts.len());
        assert_eq!(target.contact_quality, Some((1.0, 1.0, 1.0)));
        assert_eq!(target.receptor.len(), 4);
        assert_eq!(target.ligand.len(), 4);
    }

    #[test]
    fn gd_reconstruct_reaches_zero_energy_from_identity_start() {
        let dir = tempfile::tempdir().unwrap();
        let native = write_native(dir.path(), "native.pdb");
        let spec = TargetSpec {
            name: "tiny".into(),
            scenario: Scenario::Optimal,
            receptor: None,
            ligand: None,
            receptor_chain: 'A',
            ligand_chain: 'B',
            native: Some(native),
            contacts: ContactSource::ExtractTrue,
            methods: vec![Method::Gd],
            seeds: vec![0],
        };
        let target = load_target(&spec, 6.0).unwrap();
        let mut settings = fast_settings();
        settings.optimizer.max_iterations = 2000;
        // The native pose already satisfies everything; identity stays there.
        settings.optimizer.sampler = InitialSampler::Identity;
        let outcome = reconstruct(&target, &settings, Method::Gd, 1).unwrap();
        assert_eq!(outcome.objective_energy, 0.0);
        assert_eq!(outcome.final_energy, 0.0);
        assert!(outcome.log.contains("result objective_energy 0"));

        let model = Dimer::new(target.receptor.clone(), target.ligand.clone());
        let report = evaluate_model(&model, target.native.as_ref().unwrap()).unwrap();
        assert_eq!(report.fnat, 1.0);
    }

    #[test]
    fn reconstruct_log_echoes_settings_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let native = write_native(dir.path(), "native.pdb");
        let spec = TargetSpec {
            name: "tiny".into(),
            scenario: Scenario::Optimal,
            receptor: None,
            ligand: None,
            receptor_chain: 'A',
            ligand_chain: 'B',
            native: Some(native),
            contacts: ContactSource::ExtractTrue,
            methods: vec![Method::Mc],
            seeds: vec![3],
        };
        let target = load_target(&spec, 6.0).unwrap();
        let settings = fast_settings();
        let a = reconstruct(&target, &settings, Method::Mc, 3).unwrap();
        let b = reconstruct(&target, &settings, Method::Mc, 3).unwrap();
        assert_eq!(a.log, b.log);
        assert!(a.log.contains("setting sampler = random-shell"));
        assert!(a.log.contains("restart 0 "));
        let c = reconstruct(&target, &settings, Method::Mc, 4).unwrap();
        assert_ne!(a.log, c.log);
    }

    #[test]
    fn benchmark_writes_consistent_tables_and_reruns_identically() {
        let dir = tempfile::tempdir().unwrap();
        write_native(dir.path(), "tiny.pdb");
        let manifest_path = dir.path().join("suite.manifest");
        let mut f = fs::File::create(&manifest_path).unwrap();
        write!(
            f,
            "qfold-manifest v1\n\n\
             [target t1]\nscenario = optimal\nnative = tiny.pdb\nmethods = gd, mc\nseeds = 1\n\n\
             [target t2]\nscenario = optimal\nnative = tiny.pdb\nmethods = gd, mc\nseeds = 1\n"
        )
        .unwrap();
        drop(f);
        let manifest = read_manifest(&manifest_path).unwrap();
        let mut settings = fast_settings();
        settings.threads = Some(1);

        let out_a = dir.path().join("out_a");
        let report = run_benchmark(&manifest, &settings, None, &out_a).unwrap();
        assert_eq!(report.jobs.len(), 4);
        assert!(report.jobs.iter().all(|j| j.outcome.is_ok()));
        assert_eq!(report.summary.len(), 2);

        let per_target = fs::read_to_string(out_a.join("per_target.csv")).unwrap();
        let lines: Vec<&str> = per_target.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], PER_TARGET_HEADER);
        assert!(lines[0].starts_with(CSV_HEADER));
        assert!(out_a.join("models/t1_GD_1.pdb").exists());
        assert!(out_a.join("models/t2_MC_1.pdb").exists());
        assert!(out_a.join("logs/t1_GD_1.log").exists());

        // Summary means must equal the column means of the per-target rows.
        let summary = fs::read_to_string(out_a.join("summary.csv")).unwrap();
        for row in summary.lines().skip(1) {
            let cells: Vec<&str> = row.split(',').collect();
            let method = cells[0];
            let mean_tm: f64 = cells[3].parse().unwrap();
            let rows: Vec<f64> = lines[1..]
                .iter()
                .filter(|l| l.split(',').nth(2) == Some(method))
                .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
                .collect();
            let expect = rows.iter().sum::<f64>() / rows.len() as f64;
            assert!((mean_tm - expect).abs() <= 1e-9, "{method}: {mean_tm} vs {expect}");
        }

        let out_b = dir.path().join("out_b");
        run_benchmark(&manifest, &settings, None, &out_b).unwrap();
        for name in [
            "per_target.csv",
            "summary.csv",
            "run.log",
            "failures.log",
            "tm_vs_precision.csv",
            "tm_vs_recall.csv",
            "tm_vs_f1.csv",
        ] {
            let a = fs::read_to_string(out_a.join(name)).unwrap();
            let b = fs::read_to_string(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
        let model_a = fs::read_to_string(out_a.join("models/t1_GD_1.pdb")).unwrap();
        let model_b = fs::read_to_string(out_b.join("models/t1_GD_1.pdb")).unwrap();
        assert_eq!(model_a, model_b);

        let rendered = render_report(&out_a).unwrap();
        assert!(rendered.contains("Method averages"));
        assert!(rendered.contains("GD"));
    }

    #[test]
    fn benchmark_records_failures_without_aborting() {
        let dir = tempfile::tempdir().unwrap();
        write_native(dir.path(), "tiny.pdb");
        let manifest_path = dir.path().join("suite.manifest");
        fs::write(
            &manifest_path,
            "qfold-manifest v1\n\
             [target ok]\nscenario = optimal\nnative = tiny.pdb\nmethods = mc\nseeds = 1\n\
             [target broken]\nscenario = optimal\nnative = missing.pdb\nmethods = mc\nseeds = 1\n",
        )
        .unwrap();
        let manifest = read_manifest(&manifest_path).unwrap();
        let mut settings = fast_settings();
        settings.threads = Some(1);
        let out = dir.path().join("out");
        let report = run_benchmark(&manifest, &settings, None, &out).unwrap();
        assert_eq!(report.jobs.len(), 2);
        let by_name: Vec<bool> =
            report.jobs.iter().map(|j| j.outcome.is_ok()).collect();
        assert_eq!(by_name, vec![false, true], "sorted order: broken, ok");
        let failures = fs::read_to_string(out.join("failures.log")).unwrap();
        assert!(failures.contains("broken MC 1"));
        let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
        let mc_row = summary.lines().find(|l| l.starts_with("MC,")).unwrap();
        assert!(mc_row.starts_with("MC,2,1,"), "{mc_row}");
    }

    #[test]
    fn extract_contacts_cli_roundtrip_and_empty_case() {
        let dir = tempfile::tempdir().unwrap();
        let native = write_native(dir.path(), "tiny.pdb");
        let out = dir.path().join("contacts.txt");
        let n = extract_contacts_file(&native, 'A', 'B', 6.0, &out).unwrap();
        assert!(n >= 4);
        let text = fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), n);

        let err = extract_contacts_file(&native, 'A', 'B', 0.1, &out).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let err = extract_contacts_file(&native, 'A', 'Q', 6.0, &out).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
