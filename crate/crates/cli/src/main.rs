//! cellgate: score cradle-to-gate battery GWP under swappable electricity
//! mixes, describe the study-level dataset, and fit the regression models.
//!
//! Exit codes: 0 success, 1 data or validation failure (diagnostics on
//! stderr, machine-readable where applicable), 2 usage error. Repeated
//! invocations with identical inputs produce identical bytes per format.

use clap::{Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cellgate_core::engine::{self, BasisConversion, ScoreBreakdown};
use cellgate_core::inventory::{
    self, EmissionFactorTable, InventoryGraph, ScenarioConfig,
};
use cellgate_core::regress::{self, ModelSpec, RegressionInput};
use cellgate_core::stats::{self, FunctionalUnit, StudyRecord};

mod render;

#[derive(Parser)]
#[command(
    name = "cellgate",
    version,
    about = "Cradle-to-gate battery LCA scoring and meta-analysis toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Score one process and emit its contribution breakdown
    #[command(name = "lca-compute")]
    LcaCompute {
        /// Inventory graph (JSON)
        #[arg(long)]
        inventory: PathBuf,
        /// Emission factor table (CSV)
        #[arg(long)]
        factors: PathBuf,
        /// Scenario name (resolved next to the inventory) or path
        #[arg(long)]
        scenario: Option<String>,
        /// Process id; defaults to the graph's unique root
        #[arg(long)]
        process: Option<String>,
        /// Tree depth for csv/text output (full tree when omitted)
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Score one process under several scenarios and compare totals
    #[command(name = "lca-compare")]
    LcaCompare {
        #[arg(long)]
        inventory: PathBuf,
        #[arg(long)]
        factors: PathBuf,
        /// Comma-separated scenario names or paths
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<String>,
        #[arg(long)]
        process: Option<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Convert a mass-basis score to an energy basis
    #[command(name = "lca-convert")]
    LcaConvert {
        /// Score in kg CO2-eq per kg
        #[arg(long)]
        value: f64,
        /// Pack specific energy in kWh per kg
        #[arg(long)]
        specific_energy: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Descriptive statistics of the study dataset
    #[command(name = "stats-describe")]
    StatsDescribe {
        /// Dataset CSV
        #[arg(long)]
        data: PathBuf,
        /// Restrict to one functional unit (km, kwh, kg) or 'all' for a per-group table
        #[arg(long)]
        group: Option<String>,
        /// Drop records flagged as outliers
        #[arg(long)]
        exclude_outliers: bool,
        /// Emit yearly averages instead of descriptive statistics
        #[arg(long)]
        yearly: bool,
        /// Report records above Q3 + 1.5 IQR instead of descriptive statistics
        #[arg(long)]
        iqr_check: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Fit one model form (or all six) and report inference and diagnostics
    #[command(name = "regress-fit")]
    RegressFit {
        /// Regression input CSV
        #[arg(long)]
        data: PathBuf,
        /// all, l_qa, l_ech, l_both, p_qa, p_ech, p_both
        #[arg(long, default_value = "l_both")]
        models: String,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Rank all six model forms by overall F p-value
    #[command(name = "regress-select")]
    RegressSelect {
        #[arg(long)]
        data: PathBuf,
        /// Significance threshold for flagging fully-significant models
        #[arg(long, default_value_t = 0.16)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Cross-scenario contribution table for one process
    Report {
        #[arg(long)]
        inventory: PathBuf,
        #[arg(long)]
        factors: PathBuf,
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<String>,
        #[arg(long)]
        process: Option<String>,
        /// Contribution depth (1 = direct exchanges)
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

/// Data-level failure: message on stderr, exit 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<InventoryGraph, Failure> {
    Ok(InventoryGraph::from_reader(open(path)?)?)
}

fn load_factors(path: &Path) -> Result<EmissionFactorTable, Failure> {
    Ok(EmissionFactorTable::parse(open(path)?)?)
}

fn load_dataset(path: &Path) -> Result<Vec<StudyRecord>, Failure> {
    Ok(stats::ingest_dataset(open(path)?)?)
}

fn load_regression(path: &Path) -> Result<RegressionInput, Failure> {
    Ok(RegressionInput::from_reader(open(path)?)?)
}

/// Resolve a scenario argument: a path if it looks like one, otherwise
/// `scenario_<name>.json` next to the inventory file.
fn load_scenario(arg: &str, inventory: &Path) -> Result<ScenarioConfig, Failure> {
    let path = if arg.contains('/') || arg.contains('\\') || arg.ends_with(".json") {
        PathBuf::from(arg)
    } else {
        inventory
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(format!("scenario_{arg}.json"))
    };
    Ok(ScenarioConfig::from_reader(open(&path)?)?)
}

fn resolve_process<'g>(
    graph: &'g InventoryGraph,
    requested: Option<&str>,
) -> Result<&'g str, Failure> {
    match requested {
        Some(id) => graph
            .process(id)
            .map(|p| p.id.as_str())
            .ok_or_else(|| Failure(format!("unknown process '{id}'"))),
        None => graph.root_process().map(|p| p.id.as_str()).ok_or_else(|| {
            Failure("no unique root process; pass --process".to_string())
        }),
    }
}

/// Apply a scenario, report its warnings on stderr, and gate on validation
/// findings (each printed as a JSON line on stderr).
fn scenario_graph(
    graph: &InventoryGraph,
    factors: &EmissionFactorTable,
    scenario: &ScenarioConfig,
) -> Result<InventoryGraph, Failure> {
    let outcome = inventory::apply_scenario(graph, scenario);
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let findings = inventory::validate(&outcome.graph, factors);
    if !findings.is_empty() {
        for f in &findings {
            eprintln!("{}", serde_json::to_string(f).expect("finding serializes"));
        }
        return Err(Failure(format!(
            "validation failed for scenario '{}' with {} finding(s)",
            scenario.name,
            findings.len()
        )));
    }
    Ok(outcome.graph)
}

fn print(s: String) {
    println!("{s}");
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::LcaCompute { inventory, factors, scenario, process, depth, format } => {
            let graph = load_graph(&inventory)?;
            let table = load_factors(&factors)?;
            let (graph, label) = match scenario {
                Some(arg) => {
                    let sc = load_scenario(&arg, &inventory)?;
                    (scenario_graph(&graph, &table, &sc)?, sc.name)
                }
                None => {
                    (scenario_graph(&graph, &table, &ScenarioConfig::identity("baseline"))?,
                     "baseline".to_string())
                }
            };
            let process = resolve_process(&graph, process.as_deref())?.to_string();
            let breakdown = engine::unit_score_labelled(&graph, &table, &process, &label)?;
            print(match format {
                Format::Json => render::breakdown_json(&breakdown),
                Format::Csv => render::sankey_csv(&breakdown, depth),
                Format::Text => render::breakdown_text(&breakdown, depth),
            });
            Ok(())
        }
        Command::LcaCompare { inventory, factors, scenarios, process, format } => {
            if scenarios.is_empty() {
                return Err(Failure("at least one scenario is required".to_string()));
            }
            let graph = load_graph(&inventory)?;
            let table = load_factors(&factors)?;
            let process = resolve_process(&graph, process.as_deref())?.to_string();
            let mut results: Vec<ScoreBreakdown> = Vec::with_capacity(scenarios.len());
            for arg in &scenarios {
                let sc = load_scenario(arg, &inventory)?;
                let applied = scenario_graph(&graph, &table, &sc)?;
                results.push(engine::unit_score_labelled(&applied, &table, &process, &sc.name)?);
            }
            print(render::compare(&results, format));
            Ok(())
        }
        Command::LcaConvert { value, specific_energy, format } => {
            let conv = BasisConversion::new(specific_energy)?;
            let converted = engine::convert_basis(value, conv);
            print(render::conversion(value, specific_energy, converted, format));
            Ok(())
        }
        Command::StatsDescribe { data, group, exclude_outliers, yearly, iqr_check, format } => {
            let records = load_dataset(&data)?;
            if yearly {
                let years = stats::yearly_averages(&records, exclude_outliers);
                print(render::yearly(&years, format));
                return Ok(());
            }
            if iqr_check {
                let flagged = stats::iqr_outlier_candidates(&records);
                print(render::iqr_flags(&flagged, format));
                return Ok(());
            }
            match group.as_deref() {
                Some("all") => {
                    let mut rows = Vec::new();
                    rows.push(("all".to_string(), stats::describe(&records, None, exclude_outliers)?));
                    for unit in [FunctionalUnit::Km, FunctionalUnit::KWh, FunctionalUnit::Kg] {
                        if let Ok(d) = stats::describe(&records, Some(unit), exclude_outliers) {
                            rows.push((unit.to_string(), d));
                        }
                    }
                    print(render::describe_groups(&rows, format));
                }
                Some(g) => {
                    let unit: FunctionalUnit = g.parse().map_err(Failure)?;
                    let d = stats::describe(&records, Some(unit), exclude_outliers)?;
                    print(render::describe_groups(&[(unit.to_string(), d)], format));
                }
                None => {
                    let d = stats::describe(&records, None, exclude_outliers)?;
                    print(render::describe_one(&d, format));
                }
            }
            Ok(())
        }
        Command::RegressFit { data, models, format } => {
            let input = load_regression(&data)?;
            let specs: Vec<ModelSpec> = if models == "all" {
                ModelSpec::ALL.to_vec()
            } else {
                vec![ModelSpec::from_code(&models).ok_or_else(|| {
                    Failure(format!(
                        "unknown model '{models}' (expected all, l_qa, l_ech, l_both, p_qa, p_ech, p_both)"
                    ))
                })?]
            };
            let mut fits = Vec::with_capacity(specs.len());
            for spec in &specs {
                let fit = regress::fit(spec, &input)?;
                let diag = regress::diagnostics(&fit.residuals)?;
                fits.push((fit, diag));
            }
            print(render::fits(&input, &fits, format));
            Ok(())
        }
        Command::RegressSelect { data, alpha, format } => {
            let input = load_regression(&data)?;
            let report = regress::model_selection_report(&input, alpha)?;
            print(render::selection(&report, format));
            Ok(())
        }
        Command::Report { inventory, factors, scenarios, process, depth, format } => {
            if scenarios.is_empty() {
                return Err(Failure("at least one scenario is required".to_string()));
            }
            let graph = load_graph(&inventory)?;
            let table = load_factors(&factors)?;
            let process = resolve_process(&graph, process.as_deref())?.to_string();
            let mut names = Vec::with_capacity(scenarios.len());
            let mut rankings = Vec::with_capacity(scenarios.len());
            for arg in &scenarios {
                let sc = load_scenario(arg, &inventory)?;
                let applied = scenario_graph(&graph, &table, &sc)?;
                let breakdown =
                    engine::unit_score_labelled(&applied, &table, &process, &sc.name)?;
                rankings.push(engine::contribution_ranking(&breakdown, depth));
                names.push(sc.name.clone());
            }
            print(render::cross_scenario(&names, &rankings, format)?);
            Ok(())
        }
    }
}
