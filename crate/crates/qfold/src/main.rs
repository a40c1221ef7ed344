use clap::{Parser, Subcommand};
use qfold::harness::config::{apply_config, parse_action_mode, Method, RunSettings, Scenario};
use qfold::harness::manifest::read_manifest;
use qfold::harness::{
    self, extract_contacts_file, load_target, read_dimer, render_report, run_benchmark,
    CliOverrides, ContactSource, HarnessError, TargetSpec,
};
use qfold::metrics::{csv_row, CSV_HEADER};
use qfold::pdb::write_complex;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Rigid-body reconstruction of protein dimers from inter-chain contacts.
#[derive(Parser)]
#[command(name = "qfold", version)]
struct Cli {
    /// Settings file; CLI flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Benchmark worker threads (QFOLD_THREADS changes the default).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reconstruction method: drl, gd, mc or sa.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Scenario label: optimal, suboptimal or realistic.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Observation image side length.
    #[arg(long, global = true)]
    obs_size: Option<usize>,
    /// Action set: six or twelve.
    #[arg(long, global = true)]
    action_mode: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List residue pairs of two chains whose heavy atoms are in contact.
    ExtractContacts {
        #[arg(long)]
        pdb: PathBuf,
        #[arg(long, default_value_t = 'A')]
        receptor_chain: char,
        #[arg(long, default_value_t = 'B')]
        ligand_chain: char,
        /// Contact cutoff in angstrom; defaults to the effective setting.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pose the ligand against the receptor from a contact list.
    Reconstruct {
        #[arg(long)]
        receptor: PathBuf,
        #[arg(long)]
        ligand: PathBuf,
        #[arg(long, default_value_t = 'A')]
        receptor_chain: char,
        #[arg(long, default_value_t = 'B')]
        ligand_chain: char,
        #[arg(long)]
        contacts: PathBuf,
        /// Native complex; enables RMSD-based rewards and episode RMSD logs.
        #[arg(long)]
        native: Option<PathBuf>,
        #[arg(long)]
        out_pdb: PathBuf,
        #[arg(long)]
        out_log: PathBuf,
    },
    /// Score a model complex against its native.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        native: PathBuf,
        #[arg(long, default_value_t = 'A')]
        receptor_chain: char,
        #[arg(long, default_value_t = 'B')]
        ligand_chain: char,
        /// Row label; defaults to the model file stem.
        #[arg(long)]
        target: Option<String>,
        /// Also write the header and row to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (target, method, seed) cell of a manifest.
    Benchmark {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Render benchmark CSVs as aligned text tables.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Serialize)]
struct RunSummary {
    target: String,
    method: &'static str,
    seed: u64,
    final_energy: f64,
    objective_energy: f64,
    steps: usize,
    wall_ms: u128,
    model: String,
    log: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let mut settings = RunSettings::default();
    if let Some(path) = &cli.config {
        let file = fs::File::open(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        apply_config(file, &mut settings)?;
    }
    let method_flag =
        cli.method.as_deref().map(Method::parse).transpose().map_err(HarnessError::Config)?;
    let overrides = CliOverrides {
        seed: cli.seed,
        threads: cli.threads,
        method: method_flag,
        scenario: cli
            .scenario
            .as_deref()
            .map(Scenario::parse)
            .transpose()
            .map_err(HarnessError::Config)?,
        obs_size: cli.obs_size,
        action_mode: cli
            .action_mode
            .as_deref()
            .map(parse_action_mode)
            .transpose()
            .map_err(HarnessError::Config)?,
    };
    overrides.apply(&mut settings);

    match cli.command {
        Command::ExtractContacts { pdb, receptor_chain, ligand_chain, threshold, out } => {
            let threshold = threshold.unwrap_or(settings.contact_threshold);
            let n = extract_contacts_file(&pdb, receptor_chain, ligand_chain, threshold, &out)?;
            println!("{n} contacts written to {}", out.display());
            Ok(())
        }
        Command::Reconstruct {
            receptor,
            ligand,
            receptor_chain,
            ligand_chain,
            contacts,
            native,
            out_pdb,
            out_log,
        } => {
            let spec = TargetSpec {
                name: stem_of(&out_pdb),
                scenario: settings.scenario,
                receptor: Some(receptor),
                ligand: Some(ligand),
                receptor_chain,
                ligand_chain,
                native,
                contacts: ContactSource::File(contacts),
                methods: vec![settings.method],
                seeds: vec![settings.seed],
            };
            let target = load_target(&spec, settings.contact_threshold)?;
            let start = std::time::Instant::now();
            let outcome = harness::reconstruct(&target, &settings, settings.method, settings.seed)?;
            let mut model = fs::File::create(&out_pdb)?;
            write_complex(&mut model, &target.receptor, &target.ligand, &outcome.pose, None)?;
            fs::write(&out_log, &outcome.log)?;
            let summary = RunSummary {
                target: target.name.clone(),
                method: settings.method.label(),
                seed: settings.seed,
                final_energy: outcome.final_energy,
                objective_energy: outcome.objective_energy,
                steps: outcome.steps,
                wall_ms: start.elapsed().as_millis(),
                model: out_pdb.display().to_string(),
                log: out_log.display().to_string(),
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&summary)
                    .map_err(|e| HarnessError::Io(std::io::Error::other(e)))?
            );
            Ok(())
        }
        Command::Evaluate { model, native, receptor_chain, ligand_chain, target, out } => {
            let model_dimer = read_dimer(&model, receptor_chain, ligand_chain)?;
            let native_dimer = read_dimer(&native, receptor_chain, ligand_chain)?;
            let report = harness::evaluate_model(&model_dimer, &native_dimer)?;
            let label = target.unwrap_or_else(|| stem_of(&model));
            let row = csv_row(
                &label,
                settings.scenario.token(),
                settings.method.label(),
                &report,
            );
            println!("{CSV_HEADER}");
            println!("{row}");
            if let Some(path) = out {
                fs::write(&path, format!("{CSV_HEADER}\n{row}\n"))?;
            }
            Ok(())
        }
        Command::Benchmark { manifest, out_dir } => {
            let manifest = read_manifest(&manifest)?;
            let report = run_benchmark(&manifest, &settings, method_flag, &out_dir)?;
            let failed = report.jobs.iter().filter(|j| j.outcome.is_err()).count();
            println!(
                "{} jobs, {} failed; tables in {}",
                report.jobs.len(),
                failed,
                out_dir.display()
            );
            print!("{}", render_report(&out_dir)?);
            Ok(())
        }
        Command::Report { dir } => {
            print!("{}", render_report(&dir)?);
            Ok(())
        }
    }
}
