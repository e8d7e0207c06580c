//! `psh`: solve, compare and inspect pumped storage unit commitment cases.
//!
//! Failures print `{"error": {"category": ..., "message": ...}}` on stderr
//! and exit with status 1. A solve that stops before reaching the
//! requested gap writes its results and then fails with category
//! `gap_not_reached`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psh_core::analysis::{
    compactness_formulas, compactness_report, compare_models, random_scenarios, run_model,
    AnalysisError, RunOptions, SolvedRun,
};
use psh_core::formulation::{
    build_baseline, build_legacy, build_proposed, ModelKind, ObjectiveMode,
};
use psh_core::io::{
    emit_plot_data, load_case, load_results, load_scenarios, price_csv, save_results, IoError,
    ResultsFile, ScenarioOutcome,
};
use psh_core::model::{validate_case, Horizon};
use psh_core::solver::{MipOptions, MipStatus, SolverHandle, DEFAULT_REL_GAP};
use psh_core::{model_stats, ValidatedCase};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "psh",
    version,
    about = "Day-ahead unit commitment with pumped storage hydro units"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model and write a results file.
    Solve {
        #[command(flatten)]
        common: CaseModel,
        #[command(flatten)]
        solve: SolveArgs,
        /// Results JSON to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the legacy model, hand its reservoir outcome to the proposed
    /// model and compare the two.
    Compare {
        #[arg(long)]
        case: PathBuf,
        /// Extra net-load scenarios: a count of seeded random days, or a
        /// scenario JSON file.
        #[arg(long)]
        scenarios: Option<String>,
        /// Seed for generated scenarios.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print model size and the reservoir extension's size as JSON.
    Stats {
        #[command(flatten)]
        common: CaseModel,
    },
    /// Solve one model and write interval prices as CSV.
    Lmp {
        #[command(flatten)]
        common: CaseModel,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a results file into a tidy CSV for plotting.
    PlotData {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CaseModel {
    /// Case JSON file.
    #[arg(long)]
    case: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Proposed)]
    model: ModelArg,
    /// Objective of the proposed model.
    #[arg(long, value_enum, default_value_t = ObjectiveArg::ThermalOnly)]
    objective: ObjectiveArg,
}

#[derive(Args)]
struct SolveArgs {
    /// Relative MIP gap at which the search stops.
    #[arg(long, default_value_t = DEFAULT_REL_GAP)]
    gap: f64,
    /// Branch-and-bound node limit.
    #[arg(long, default_value_t = MipOptions::default().node_limit)]
    node_limit: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Proposed,
    Legacy,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    ThermalOnly,
    WithBids,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Proposed => ModelKind::Proposed,
            ModelArg::Legacy => ModelKind::Legacy,
        }
    }
}

impl From<ObjectiveArg> for ObjectiveMode {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::ThermalOnly => ObjectiveMode::ThermalOnly,
            ObjectiveArg::WithBids => ObjectiveMode::WithPshBids,
        }
    }
}

struct Failure {
    category: &'static str,
    message: String,
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        let category = match &e {
            AnalysisError::Formulation(_) => "formulation",
            AnalysisError::Solver(_) => "solver",
            AnalysisError::Pricing(_) => "pricing",
            AnalysisError::Validation(_) => "validation",
            AnalysisError::NoSolution {
                status: MipStatus::Infeasible,
                ..
            } => "infeasible",
            AnalysisError::NoSolution { .. } => "no_solution",
            AnalysisError::TooLarge { .. } => "too_large",
        };
        Failure {
            category,
            message: e.to_string(),
        }
    }
}

fn fail(category: &'static str, message: impl Into<String>) -> Failure {
    Failure {
        category,
        message: message.into(),
    }
}

type Outcome = Result<(), Failure>;

fn run_options(solve: &SolveArgs, objective: ObjectiveMode) -> Result<RunOptions, Failure> {
    if solve.gap.is_nan() || solve.gap < 0.0 {
        return Err(fail(
            "usage",
            format!("--gap must be a non-negative number, got {}", solve.gap),
        ));
    }
    let solver = SolverHandle::from_env().map_err(|e| fail("solver", e.to_string()))?;
    Ok(RunOptions {
        rel_gap: solve.gap,
        node_limit: solve.node_limit,
        solver,
        objective,
    })
}

fn within_gap(status: MipStatus) -> bool {
    matches!(status, MipStatus::Optimal | MipStatus::GapReached)
}

fn check_gap(runs: &[&SolvedRun]) -> Outcome {
    for run in runs {
        if !within_gap(run.solve.status) {
            return Err(fail(
                "gap_not_reached",
                format!(
                    "{} run stopped with {:?} at gap {:e}",
                    run.model.as_str(),
                    run.solve.status,
                    run.solve.gap
                ),
            ));
        }
    }
    Ok(())
}

fn summary(run: &SolvedRun) -> serde_json::Value {
    json!({
        "model": run.model,
        "status": run.solve.status,
        "objective": run.solve.objective,
        "best_bound": run.solve.best_bound,
        "gap": run.solve.gap,
        "nodes": run.solve.nodes_explored,
        "backend": run.solve.backend,
    })
}

fn write_text(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| fail("io", format!("{}: {e}", path.display())))
}

fn solve(common: &CaseModel, args: &SolveArgs, out: &Path) -> Outcome {
    let case = load_case(&common.case)?;
    let run = run_model(
        &case,
        common.model.into(),
        &run_options(args, common.objective.into())?,
    )?;
    save_results(&ResultsFile::single(&run), out)?;
    println!("{}", summary(&run));
    check_gap(&[&run])
}

fn scenario_cases(
    base: &ValidatedCase,
    spec: &str,
    seed: u64,
) -> Result<Vec<(String, Option<psh_core::analysis::LoadShape>, ValidatedCase)>, Failure> {
    if let Ok(count) = spec.parse::<usize>() {
        return random_scenarios(base.case(), count, seed)
            .into_iter()
            .enumerate()
            .map(|(i, (shape, case))| {
                Ok((
                    format!("seed{seed}-{i}"),
                    Some(shape),
                    validate_case(case).map_err(IoError::from)?,
                ))
            })
            .collect();
    }
    let file = load_scenarios(spec)?;
    file.scenarios
        .into_iter()
        .map(|s| {
            let mut case = base.case().clone();
            case.horizon = Horizon {
                n_intervals: s.net_load.len(),
                net_load: s.net_load,
                ..case.horizon
            };
            Ok((s.label, None, validate_case(case).map_err(IoError::from)?))
        })
        .collect()
}

fn compare(
    case: &Path,
    scenarios: Option<&str>,
    seed: u64,
    args: &SolveArgs,
    out: &Path,
) -> Outcome {
    let case = load_case(case)?;
    let options = run_options(args, ObjectiveMode::ThermalOnly)?;
    let base = compare_models(&case, &options)?;
    let mut results = ResultsFile::comparison(&base);
    let mut gap_failures = check_gap(&[&base.legacy, &base.proposed]).err();
    let mut dominated = 0usize;
    if let Some(spec) = scenarios {
        for (label, shape, scenario) in scenario_cases(&case, spec, seed)? {
            let c = compare_models(&scenario, &options)?;
            if gap_failures.is_none() {
                gap_failures = check_gap(&[&c.legacy, &c.proposed]).err();
            }
            let r = &c.report;
            if r.proposed_objective <= r.legacy_objective + 1e-6 * r.legacy_objective.abs() {
                dominated += 1;
            }
            results.scenarios.push(ScenarioOutcome {
                label,
                shape,
                net_load: scenario.horizon.net_load.clone(),
                report: c.report,
            });
        }
    }
    save_results(&results, out)?;
    let pct: Vec<Option<f64>> = results
        .scenarios
        .iter()
        .map(|s| s.report.objective_improvement_pct)
        .collect();
    println!(
        "{}",
        json!({
            "legacy": summary(&base.legacy),
            "proposed": summary(&base.proposed),
            "objective_improvement_pct": base.report.objective_improvement_pct,
            "scenarios": results.scenarios.len(),
            "scenarios_not_worse": dominated,
            "scenario_improvement_pct": pct,
        })
    );
    gap_failures.map_or(Ok(()), Err)
}

fn stats(common: &CaseModel) -> Outcome {
    let case = load_case(&common.case)?;
    let objective = common.objective.into();
    let (model, map) = match common.model {
        ModelArg::Proposed => build_proposed(&case, objective).map_err(AnalysisError::from)?,
        ModelArg::Legacy => build_legacy(&case).map_err(AnalysisError::from)?,
    };
    let (proposed, _) = build_proposed(&case, objective).map_err(AnalysisError::from)?;
    let (baseline, _) = build_baseline(&case, objective);
    let warnings: Vec<String> = map.warnings.iter().map(|w| format!("{w:?}")).collect();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "model": ModelKind::from(common.model),
            "stats": model_stats(&model),
            "compactness": compactness_report(&proposed, &baseline),
            "compactness_formulas": compactness_formulas(&case),
            "warnings": warnings,
        }))
        .expect("json values serialize")
    );
    Ok(())
}

fn lmp(common: &CaseModel, args: &SolveArgs, out: &Path) -> Outcome {
    let case = load_case(&common.case)?;
    let run = run_model(
        &case,
        common.model.into(),
        &run_options(args, common.objective.into())?,
    )?;
    write_text(out, &price_csv(&run.prices.lmp))?;
    println!("{}", summary(&run));
    check_gap(&[&run])
}

fn plot_data(results: &Path, out: &Path) -> Outcome {
    let results = load_results(results)?;
    emit_plot_data(&results, out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve {
            common,
            solve: s,
            out,
        } => solve(common, s, out),
        Command::Compare {
            case,
            scenarios,
            seed,
            solve: s,
            out,
        } => compare(case, scenarios.as_deref(), *seed, s, out),
        Command::Stats { common } => stats(common),
        Command::Lmp {
            common,
            solve: s,
            out,
        } => lmp(common, s, out),
        Command::PlotData { results, out } => plot_data(results, out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "{}",
                json!({ "error": { "category": f.category, "message": f.message } })
            );
            ExitCode::FAILURE
        }
    }
}
