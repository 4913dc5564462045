//! Command-line front end: catalog export, survey server, analysis,
//! simulation and estimation.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use transferlab::analysis::{
    acceptance_table, clear_sessions, equality_tests_markdown, label_counts, restricted_sample,
    text_acceptance_table, text_equality_tests, transfer_equality_tests, Stratifier,
};
use transferlab::catalog::{catalog_to_json, parse_catalog_csv, parse_catalog_json, write_catalog_csv, Catalog};
use transferlab::estimation::{
    fit_batch, median_weighting_profile, parse_fits_csv, report_markdown, respondents_from_rows, write_fits_csv,
    FitOptions, ModelKind, Optimizer,
};
use transferlab::simulator::{parse_population_spec, recovery_experiment, simulate_population, RecoveryConfig};
use transferlab::survey::{parse_responses_csv, parse_sessions_csv, ResponseRow, SessionRow, SessionStore};

#[derive(Parser)]
#[command(name = "transferlab", version, about = "Pairwise income-transfer survey toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CatalogFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Util,
    Egini,
    Nonparam,
    All,
}

impl ModelArg {
    fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelArg::Util => vec![ModelKind::Utilitarian],
            ModelArg::Egini => vec![ModelKind::ExtendedGini],
            ModelArg::Nonparam => vec![ModelKind::NonParametric],
            ModelArg::All => ModelKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Bfgs,
    Sann,
    Both,
}

impl OptimizerArg {
    fn optimizers(self) -> Vec<Optimizer> {
        match self {
            OptimizerArg::Bfgs => vec![Optimizer::Bfgs],
            OptimizerArg::Sann => vec![Optimizer::Sann],
            OptimizerArg::Both => Optimizer::ALL.to_vec(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the question catalog, or write catalog.json and catalog.csv.
    Catalog {
        #[arg(long, value_enum, default_value = "json")]
        format: CatalogFormat,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the survey HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Catalog file (.json or .csv); the built-in catalog by default.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Event log, created if missing.
        #[arg(long)]
        store: PathBuf,
    },
    /// Write responses.csv and sessions.csv from an event log.
    Export {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Acceptance tables and equality tests.
    Analyze {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        sessions: PathBuf,
        /// Keep only sessions without test-question errors.
        #[arg(long)]
        restricted: bool,
        /// gender, education, politics, employment or block.
        #[arg(long)]
        by: Option<String>,
        /// Add the text-statement tables.
        #[arg(long)]
        text: bool,
        /// Emit CSV instead of Markdown.
        #[arg(long)]
        csv: bool,
    },
    /// Generate synthetic responses in the export format.
    Simulate {
        #[arg(long)]
        pop: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Overrides the population's replicate count.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit preference models to every respondent.
    Estimate {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        model: ModelArg,
        #[arg(long, value_enum, default_value = "both")]
        optimizer: OptimizerArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        restricted: bool,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
    /// Population summaries of a fits file.
    Report {
        #[arg(long)]
        fits: PathBuf,
        /// Write the median weighting profile with its IQR band here.
        #[arg(long)]
        profile_out: Option<PathBuf>,
    },
    /// Simulate a population, refit it and compare with the truth.
    Recover {
        #[arg(long)]
        pop: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        model: ModelArg,
        #[arg(long, value_enum, default_value = "both")]
        optimizer: OptimizerArg,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

fn load_catalog(path: Option<&Path>) -> Result<Catalog> {
    let Some(path) = path else {
        return Ok(Catalog::standard());
    };
    let questions = if path.extension().is_some_and(|e| e == "csv") {
        parse_catalog_csv(File::open(path).with_context(|| format!("opening {}", path.display()))?)?
    } else {
        parse_catalog_json(&std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)?
    };
    Ok(Catalog::new(questions)?)
}

fn load_exports(responses: &Path, sessions: &Path) -> Result<(Vec<ResponseRow>, Vec<SessionRow>)> {
    let r = parse_responses_csv(BufReader::new(File::open(responses).with_context(|| format!("opening {}", responses.display()))?))?;
    let s = parse_sessions_csv(BufReader::new(File::open(sessions).with_context(|| format!("opening {}", sessions.display()))?))?;
    Ok((r, s))
}

fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    match cli.command {
        Command::Catalog { format, out_dir } => {
            let catalog = Catalog::standard();
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("catalog.json"), catalog_to_json(catalog.questions())?)?;
                write_catalog_csv(catalog.questions(), File::create(dir.join("catalog.csv"))?)?;
                return Ok(());
            }
            match format {
                CatalogFormat::Json => writeln!(out, "{}", catalog_to_json(catalog.questions())?)?,
                CatalogFormat::Csv => write_catalog_csv(catalog.questions(), &mut *out)?,
            }
        }
        Command::Serve { port, catalog, store } => {
            let store = SessionStore::open(Arc::new(load_catalog(catalog.as_deref())?), &store)?;
            let addr = SocketAddr::from(([0, 0, 0, 0], port));
            writeln!(out, "listening on {addr}")?;
            out.flush()?;
            tokio::runtime::Runtime::new()?.block_on(transferlab_server::serve(Arc::new(store), addr))?;
        }
        Command::Export { store, out: dir, catalog } => {
            if !store.exists() {
                bail!("event log {} does not exist", store.display());
            }
            let store = SessionStore::open(Arc::new(load_catalog(catalog.as_deref())?), &store)?;
            std::fs::create_dir_all(&dir)?;
            store.export_responses(File::create(dir.join("responses.csv"))?)?;
            store.export_sessions(File::create(dir.join("sessions.csv"))?)?;
        }
        Command::Analyze { responses, sessions, restricted, by, text, csv } => {
            let (responses, sessions) = load_exports(&responses, &sessions)?;
            let filter = restricted.then(|| restricted_sample(&sessions));
            let stratifier = by.as_deref().map(str::parse::<Stratifier>).transpose()?;
            let sample = if restricted { "restricted sample" } else { "full sample" };
            let table = acceptance_table(&responses, &sessions, filter.as_ref(), stratifier);
            if csv {
                write!(out, "{}", table.to_csv())?;
            } else {
                let title = match by.as_deref() {
                    Some(b) => format!("Acceptance by transfer type and {b}, {sample}"),
                    None => format!("Acceptance by transfer type, {sample}"),
                };
                writeln!(out, "{}", table.to_markdown(&title))?;
                let tests = transfer_equality_tests(&label_counts(&responses, filter.as_ref()));
                writeln!(out, "{}", equality_tests_markdown("Equality of acceptance rates", &tests))?;
            }
            if text {
                for clarity in [false, true] {
                    let t = text_acceptance_table(&sessions, filter.as_ref(), clarity);
                    if csv {
                        write!(out, "{}", t.to_csv())?;
                        continue;
                    }
                    let scope = if clarity {
                        format!("{sample}, {} respondents finding the question clear", clear_sessions(&sessions).len())
                    } else {
                        sample.to_string()
                    };
                    writeln!(out, "{}", t.to_markdown(&format!("Text statements, {scope}")))?;
                    let tests = text_equality_tests(&t);
                    writeln!(out, "{}", equality_tests_markdown("Equality of text acceptance rates", &tests))?;
                }
            }
        }
        Command::Simulate { pop, catalog, replicates, out_dir } => {
            let mut spec = parse_population_spec(&std::fs::read_to_string(&pop).with_context(|| format!("reading {}", pop.display()))?)?;
            if let Some(k) = replicates {
                spec.replicates = k;
            }
            let sim = simulate_population(&spec, &load_catalog(catalog.as_deref())?)?;
            sim.write_to(&out_dir)?;
            writeln!(out, "{} respondents, {} responses written to {}", sim.sessions.len(), sim.responses.len(), out_dir.display())?;
        }
        Command::Estimate { responses, sessions, model, optimizer, out: path, restricted, catalog, seed } => {
            let catalog = load_catalog(catalog.as_deref())?;
            let (mut responses, sessions) = load_exports(&responses, &sessions)?;
            if restricted {
                let keep = restricted_sample(&sessions);
                responses.retain(|r| keep.contains(&r.session_id));
            }
            let data = respondents_from_rows(&catalog, &responses)?;
            let options = FitOptions { seed, ..FitOptions::default() };
            let fits = fit_batch(&data, &model.kinds(), &optimizer.optimizers(), &options)?;
            write_fits_csv(&fits, File::create(&path)?)?;
            let converged = fits.iter().filter(|f| f.converged).count();
            writeln!(out, "{} fits for {} respondents, {converged} converged", fits.len(), data.len())?;
        }
        Command::Report { fits, profile_out } => {
            let fits = parse_fits_csv(BufReader::new(File::open(&fits).with_context(|| format!("opening {}", fits.display()))?))?;
            write!(out, "{}", report_markdown(&fits))?;
            if let Some(p) = profile_out {
                let grid: Vec<_> = fits.iter().filter(|f| f.model() == ModelKind::NonParametric).cloned().collect();
                std::fs::write(&p, median_weighting_profile(&grid)?.to_csv())?;
            }
        }
        Command::Recover { pop, model, optimizer, catalog } => {
            let spec = parse_population_spec(&std::fs::read_to_string(&pop)?)?;
            let config = RecoveryConfig {
                population: spec,
                kinds: model.kinds(),
                optimizers: optimizer.optimizers(),
                options: FitOptions::default(),
            };
            let report = recovery_experiment(&config, &load_catalog(catalog.as_deref())?)?;
            write!(out, "{}", report.to_markdown())?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse(), &mut io::stdout().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str]) -> Result<String> {
        let mut buf = Vec::new();
        run(Cli::try_parse_from(std::iter::once("transferlab").chain(args.iter().copied()))?, &mut buf)?;
        Ok(String::from_utf8(buf)?)
    }

    #[test]
    fn catalog_prints_both_formats() {
        let json: serde_json::Value = serde_json::from_str(&exec(&["catalog"]).unwrap()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 55);
        let csv = exec(&["catalog", "--format", "csv"]).unwrap();
        assert_eq!(csv.lines().count(), 56);
        assert!(csv.starts_with("id,block,A1"));
    }

    #[test]
    fn simulate_estimate_report_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let d = |f: &str| dir.path().join(f).to_str().unwrap().to_string();
        exec(&["catalog", "--out-dir", &d("cat")]).unwrap();
        std::fs::write(
            d("pop.json"),
            r#"{"seed": 3, "groups": [{"count": 4, "model": {"kind": "extended_gini", "eta": 2.0}}]}"#,
        )
        .unwrap();
        let msg = exec(&["simulate", "--pop", &d("pop.json"), "--catalog", &d("cat/catalog.json"), "--replicates", "2", "--out-dir", &d("sim")]).unwrap();
        assert!(msg.starts_with("4 respondents, 352 responses"), "{msg}");

        let table = exec(&["analyze", "--responses", &d("sim/responses.csv"), "--sessions", &d("sim/sessions.csv"), "--by", "block", "--text"]).unwrap();
        assert!(table.contains("| y1 | URL |") && table.contains("Text statements"), "{table}");

        let msg = exec(&[
            "estimate", "--responses", &d("sim/responses.csv"), "--sessions", &d("sim/sessions.csv"),
            "--model", "nonparam", "--optimizer", "bfgs", "--catalog", &d("cat/catalog.csv"), "--out", &d("fits.csv"),
        ])
        .unwrap();
        assert!(msg.starts_with("4 fits for 4 respondents"), "{msg}");
        let report = exec(&["report", "--fits", &d("fits.csv"), "--profile-out", &d("profile.csv")]).unwrap();
        assert!(report.contains('|'));
        let profile = std::fs::read_to_string(d("profile.csv")).unwrap();
        assert!(profile.starts_with("t,median,q1,q3,gini\n0,0,0,0,0\n"));
        assert!(profile.trim_end().ends_with("1,1,1,1,1"), "{profile}");
    }

    #[test]
    fn export_requires_existing_store() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none.jsonl");
        assert!(exec(&["export", "--store", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).is_err());
    }

    #[test]
    fn rejects_unknown_stratifier() {
        assert!(exec(&["analyze", "--responses", "r.csv", "--sessions", "s.csv", "--by", "height"]).is_err());
    }
}
