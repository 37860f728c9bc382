//! Command-line surface: thin orchestration over [`crate::config`],
//! [`crate::sim`] and [`crate::report`].
//!
//! Exit codes: `0` success, `1` infeasible assessment (a report is still
//! printed), `2` anything wrong with the invocation or its inputs.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::assess::{assess, AssessmentProblem, AssessmentResult};
use crate::config::load_scenario;
use crate::dispatch::{dispatch, DispatchProblem};
use crate::model::Disturbance;
use crate::oracle::assess_exhaustive;
use crate::report::{comparison_table, kpi_table, write_kpis, write_trace};
use crate::sim::{compare_controllers, compute_kpis, run_closed_loop, Scenario};

const BASELINE_TITLE: &str = "Conventional control";
const CONTROLLER_TITLE: &str = "Optimization-based control";

#[derive(Parser)]
#[command(
    name = "hptes",
    version,
    about = "Flexibility assessment and exact on/off dispatch for a heat pump with stratified thermal storage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured controller over the scenario's working day and
    /// write trace.csv, kpis.json and kpis.txt.
    Simulate {
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Evaluate assessment candidates on a thread pool. Outputs are
        /// identical either way.
        #[arg(long)]
        parallel: bool,
    },
    /// One-shot flexibility assessment: print the offered window, the plan
    /// behind it and its objective. The scenario's initial state is taken
    /// as the measurement; --at-step selects the forecast slice.
    Assess {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        at_step: usize,
        #[arg(long)]
        parallel: bool,
    },
    /// One-shot dispatch with explicit pinned-off steps, e.g.
    /// --request "8-12,14" (absolute step indices from the day start).
    Dispatch {
        scenario: PathBuf,
        #[arg(long)]
        request: String,
    },
    /// Run the hysteresis baseline and the MPC on the same day and print
    /// the paired KPI study.
    Compare {
        scenario: PathBuf,
        /// Also write both traces and KPI files here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        parallel: bool,
    },
    /// Load and validate the scenario, printing a one-line summary.
    Validate { scenario: PathBuf },
    /// Exhaustive-enumeration assessment (slow; for verification). Prints
    /// the same window line as `assess`.
    Oracle {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        at_step: usize,
    },
}

/// Runs the CLI against an explicit argument vector and returns the
/// process exit code. `main` is a one-line wrapper; tests call this
/// directly.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            2
        }
    }
}

fn run(command: Command) -> Result<i32, String> {
    match command {
        Command::Simulate { scenario, out_dir, parallel } => {
            let mut scenario = load_scenario(&scenario).map_err(|e| e.to_string())?;
            scenario.parallel_solvers = parallel;
            simulate(&scenario, &out_dir)
        }
        Command::Assess { scenario, at_step, parallel } => {
            let mut scenario = load_scenario(&scenario).map_err(|e| e.to_string())?;
            scenario.parallel_solvers = parallel;
            let problem = assessment_at(&scenario, at_step)?;
            let result = assess(&problem).map_err(|e| e.to_string())?;
            println!("assessment at step {at_step} over {} planning steps", problem.horizon);
            Ok(print_assessment(&result, at_step))
        }
        Command::Oracle { scenario, at_step } => {
            let scenario = load_scenario(&scenario).map_err(|e| e.to_string())?;
            let problem = assessment_at(&scenario, at_step)?;
            let result = assess_exhaustive(&problem).map_err(|e| e.to_string())?;
            println!(
                "exhaustive assessment at step {at_step} over {} planning steps",
                problem.horizon
            );
            Ok(print_assessment(&result, at_step))
        }
        Command::Dispatch { scenario, request } => {
            let scenario = load_scenario(&scenario).map_err(|e| e.to_string())?;
            let steps = parse_request_steps(&request)?;
            dispatch_once(&scenario, &steps)
        }
        Command::Compare { scenario, out_dir, parallel } => {
            let mut scenario = load_scenario(&scenario).map_err(|e| e.to_string())?;
            scenario.parallel_solvers = parallel;
            compare(&scenario, out_dir.as_deref())
        }
        Command::Validate { scenario } => {
            let loaded = load_scenario(&scenario).map_err(|e| e.to_string())?;
            println!(
                "scenario OK: {} working steps of {} h from {:.2} h, controller {}, horizon {} steps",
                loaded.working_steps(),
                loaded.step_hours,
                loaded.start_hour,
                loaded.controller.as_str(),
                loaded.horizon_steps
            );
            Ok(0)
        }
    }
}

fn simulate(scenario: &Scenario, out_dir: &Path) -> Result<i32, String> {
    let trace = run_closed_loop(scenario).map_err(|e| e.to_string())?;
    let kpis = compute_kpis(&trace, None).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let trace_path = out_dir.join("trace.csv");
    write_trace(&trace, &trace_path).map_err(|e| e.to_string())?;
    write_kpis(
        &kpis,
        &title_for(scenario),
        &out_dir.join("kpis.json"),
        &out_dir.join("kpis.txt"),
    )
    .map_err(|e| e.to_string())?;
    for event in &trace.events {
        println!("[step {}] {}", event.step, event.message);
    }
    print!("{}", kpi_table(&title_for(scenario), &kpis));
    println!("wrote {}", trace_path.display());
    Ok(0)
}

fn title_for(scenario: &Scenario) -> String {
    format!("{} ({})", CONTROLLER_TITLE, scenario.controller.as_str())
}

/// Builds the one-shot assessment problem `assess`/`oracle` share: the
/// document's initial state measured at `at_step`, no input history, the
/// forecast slice starting there.
fn assessment_at(scenario: &Scenario, at_step: usize) -> Result<AssessmentProblem, String> {
    let steps = scenario.working_steps();
    if at_step >= steps {
        return Err(format!(
            "--at-step {at_step} outside the working day (steps 0..={})",
            steps - 1
        ));
    }
    let horizon = scenario.horizon_steps.min(steps - at_step);
    Ok(AssessmentProblem {
        horizon,
        assess_range: 0..scenario.assess_period_steps.min(horizon),
        state0: scenario.state0,
        u_init: scenario.u_init,
        input_history: Vec::new(),
        demand_forecast: scenario.demand_predicted_kg_h[at_step..at_step + horizon]
            .iter()
            .map(|&m| Disturbance::draw(m))
            .collect(),
        price_forecast: scenario.price_eur_kwh[at_step..at_step + horizon].to_vec(),
        lambda: scenario.lambda,
        include_operating_cost: scenario.assess_with_operating_cost,
        params: scenario.params.clone(),
        constraints: scenario.constraints,
        predict_substeps: scenario.plant_substeps,
        parallel: scenario.parallel_solvers,
    })
}

fn plan_bits(plan: &[bool]) -> String {
    plan.iter().map(|&u| if u { '1' } else { '0' }).collect()
}

/// The window line both `assess` and `oracle` print; byte-identical by
/// construction for equal results.
fn window_line(steps: &[usize], offset: usize) -> String {
    let listed: Vec<String> = steps.iter().map(|s| (s + offset).to_string()).collect();
    format!("F = {{{}}}", listed.join(", "))
}

fn print_assessment(result: &AssessmentResult, offset: usize) -> i32 {
    if !result.feasible {
        let family = result
            .blocking
            .map(|f| f.to_string())
            .unwrap_or_else(|| "unknown".into());
        println!(
            "assessment infeasible: no plan satisfies the hard constraints \
             (first blocked family: {family})"
        );
        return 1;
    }
    println!("{}", window_line(&result.window.steps, offset));
    println!("plan u = {}", plan_bits(&result.plan_u));
    println!("objective = {}", result.objective);
    0
}

/// Parses "8-12,14" into sorted unique step indices.
fn parse_request_steps(spec: &str) -> Result<Vec<usize>, String> {
    let mut steps = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad request range start \"{a}\" in \"{spec}\""))?;
                let b: usize = b
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad request range end \"{b}\" in \"{spec}\""))?;
                if b < a {
                    return Err(format!("request range {a}-{b} runs backwards"));
                }
                steps.extend(a..=b);
            }
            None => steps.push(
                part.parse()
                    .map_err(|_| format!("bad request step \"{part}\" in \"{spec}\""))?,
            ),
        }
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

fn dispatch_once(scenario: &Scenario, request: &[usize]) -> Result<i32, String> {
    let steps = scenario.working_steps();
    let horizon = scenario.horizon_steps.min(steps);
    if let Some(&bad) = request.iter().find(|&&s| s >= horizon) {
        return Err(format!(
            "request step {bad} outside the planning horizon (steps 0..={})",
            horizon - 1
        ));
    }
    let problem = DispatchProblem {
        horizon,
        state0: scenario.state0,
        u_init: scenario.u_init,
        input_history: Vec::new(),
        demand_forecast: scenario.demand_predicted_kg_h[..horizon]
            .iter()
            .map(|&m| Disturbance::draw(m))
            .collect(),
        price_forecast: scenario.price_eur_kwh[..horizon].to_vec(),
        request: request.to_vec(),
        m1_penalty: scenario.m1_penalty,
        m2_penalty: scenario.m2_penalty,
        params: scenario.params.clone(),
        constraints: scenario.constraints,
        predict_substeps: scenario.plant_substeps,
    };
    let result = dispatch(&problem).map_err(|e| e.to_string())?;
    println!("dispatch over {horizon} planning steps, {} pinned", request.len());
    println!("plan u = {}", plan_bits(&result.plan_u));
    println!("delta1 = {}", result.slacks.delta1);
    println!("delta2 = {}", result.slacks.delta2);
    println!("objective = {}", result.objective);
    Ok(0)
}

fn compare(scenario: &Scenario, out_dir: Option<&Path>) -> Result<i32, String> {
    let comparison = compare_controllers(scenario).map_err(|e| e.to_string())?;
    print!(
        "{}",
        comparison_table(
            BASELINE_TITLE,
            &comparison.baseline,
            CONTROLLER_TITLE,
            &comparison.mpc
        )
    );
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        write_trace(&comparison.baseline_trace, &dir.join("baseline_trace.csv"))
            .map_err(|e| e.to_string())?;
        write_trace(&comparison.mpc_trace, &dir.join("mpc_trace.csv"))
            .map_err(|e| e.to_string())?;
        write_kpis(
            &comparison.baseline,
            BASELINE_TITLE,
            &dir.join("baseline_kpis.json"),
            &dir.join("baseline_kpis.txt"),
        )
        .map_err(|e| e.to_string())?;
        write_kpis(
            &comparison.mpc,
            CONTROLLER_TITLE,
            &dir.join("mpc_kpis.json"),
            &dir.join("mpc_kpis.txt"),
        )
        .map_err(|e| e.to_string())?;
        println!("wrote traces and KPI files to {}", dir.display());
    }
    Ok(0)
}
