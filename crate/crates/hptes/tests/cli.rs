//! Black-box tests of the command-line interface: exit codes, printed
//! contracts, and the files each subcommand leaves behind.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hptes::report::{read_trace, KPI_LABELS, TRACE_HEADER};

fn hptes_bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hptes"))
        .args(args)
        .output()
        .expect("the hptes binary should run")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("process exited without a signal")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

fn reference_day() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios/reference_day.json")
        .display()
        .to_string()
}

/// Lines that carry the assessment outcome, skipping the per-command
/// banner (the only line allowed to differ between `assess` and `oracle`).
fn outcome_lines(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| {
            l.starts_with("F = ")
                || l.starts_with("plan u = ")
                || l.starts_with("objective = ")
                || l.starts_with("assessment infeasible")
        })
        .map(str::to_owned)
        .collect()
}

/// Writes a three-step scenario (07:00-08:00 at 20-minute steps) into
/// `dir`, letting the caller reshape the JSON document and the demand CSV
/// before they hit disk.
fn write_tiny_scenario(
    dir: &Path,
    mutate: impl FnOnce(&mut serde_json::Value),
    demand_csv: Option<&str>,
) -> PathBuf {
    let mut doc = serde_json::json!({
        "time": { "end_hour": 8.0 },
        "plant": { "p_rated_w": 11000.0 },
        "data": { "demand_csv": "demand.csv", "price_csv": "price.csv" }
    });
    mutate(&mut doc);
    let demand = demand_csv.unwrap_or(
        "step_index,mdot_s_actual_kg_per_h,mdot_s_predicted_kg_per_h\n\
         0,200,210\n\
         1,150,160\n\
         2,100,110\n",
    );
    std::fs::write(dir.join("demand.csv"), demand).unwrap();
    std::fs::write(
        dir.join("price.csv"),
        "step_index,price_eur_per_kwh\n0,0.2\n1,0.25\n2,0.3\n",
    )
    .unwrap();
    let path = dir.join("scenario.json");
    std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path
}

#[test]
fn validate_reports_the_shipped_scenario() {
    let out = hptes_bin(&["validate", &reference_day()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("scenario OK"), "got: {text}");
    assert!(text.contains("31 working steps"), "got: {text}");
}

#[test]
fn assess_and_oracle_print_identical_outcomes() {
    // Step 0: feasible with an empty window. Step 16: feasible with a
    // non-empty window, exercising the absolute-index formatting.
    for at_step in ["0", "16"] {
        let fast = hptes_bin(&["assess", &reference_day(), "--at-step", at_step]);
        let slow = hptes_bin(&["oracle", &reference_day(), "--at-step", at_step]);
        assert_eq!(code(&fast), 0, "assess at {at_step}: {}", stderr(&fast));
        assert_eq!(code(&slow), 0, "oracle at {at_step}: {}", stderr(&slow));
        let fast_lines = outcome_lines(&stdout(&fast));
        let slow_lines = outcome_lines(&stdout(&slow));
        assert_eq!(fast_lines, slow_lines, "solvers disagree at step {at_step}");
        assert!(
            fast_lines.iter().any(|l| l.starts_with("F = {")),
            "no window line at step {at_step}: {fast_lines:?}"
        );
    }
    let with_window = hptes_bin(&["assess", &reference_day(), "--at-step", "16"]);
    let text = stdout(&with_window);
    let window = text.lines().find(|l| l.starts_with("F = {")).unwrap();
    assert_ne!(window, "F = {}", "step 16 should offer steps");
    assert!(
        window.contains("16"),
        "window indices should be absolute day steps: {window}"
    );
}

#[test]
fn infeasible_one_shot_assessment_exits_one_from_both_solvers() {
    // From the 07:00 measurement no plan survives the midday forecast
    // slice, so the one-shot assessment at step 8 reports infeasibility.
    let fast = hptes_bin(&["assess", &reference_day(), "--at-step", "8"]);
    let slow = hptes_bin(&["oracle", &reference_day(), "--at-step", "8"]);
    assert_eq!(code(&fast), 1);
    assert_eq!(code(&slow), 1);
    let fast_lines = outcome_lines(&stdout(&fast));
    assert_eq!(fast_lines, outcome_lines(&stdout(&slow)));
    assert_eq!(fast_lines.len(), 1, "exactly the infeasibility line: {fast_lines:?}");
    assert!(fast_lines[0].contains("first blocked family"), "got: {fast_lines:?}");
}

#[test]
fn at_step_outside_the_day_is_an_input_error() {
    let out = hptes_bin(&["assess", &reference_day(), "--at-step", "99"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("outside the working day"), "got: {}", stderr(&out));
}

#[test]
fn unknown_config_keys_are_named_in_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_tiny_scenario(
        dir.path(),
        |doc| {
            doc["constraints"] = serde_json::json!({ "frobnication": 1.0 });
        },
        None,
    );
    let out = hptes_bin(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("frobnication"), "got: {}", stderr(&out));
}

#[test]
fn negative_demand_is_rejected_with_row_context() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_tiny_scenario(
        dir.path(),
        |_| {},
        Some(
            "step_index,mdot_s_actual_kg_per_h,mdot_s_predicted_kg_per_h\n\
             0,200,210\n\
             1,-5,160\n\
             2,100,110\n",
        ),
    );
    let out = hptes_bin(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let text = stderr(&out);
    assert!(text.contains("mdot_s_actual_kg_per_h"), "got: {text}");
    assert!(text.contains("row 1"), "got: {text}");
}

#[test]
fn gapped_step_indices_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_tiny_scenario(
        dir.path(),
        |_| {},
        Some(
            "step_index,mdot_s_actual_kg_per_h,mdot_s_predicted_kg_per_h\n\
             0,200,210\n\
             2,150,160\n\
             3,100,110\n",
        ),
    );
    let out = hptes_bin(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("without gaps"),
        "got: {}",
        stderr(&out)
    );
}

#[test]
fn simulate_writes_the_documented_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = hptes_bin(&[
        "simulate",
        &reference_day(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let trace_text = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(trace_text.lines().next().unwrap(), TRACE_HEADER);
    let rows = read_trace(&out_dir.join("trace.csv")).unwrap();
    assert_eq!(rows.len(), 31, "one row per working step");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("kpis.json")).unwrap())
            .unwrap();
    assert!(json.get("energy_cost_eur").is_some(), "got: {json}");

    let table = std::fs::read_to_string(out_dir.join("kpis.txt")).unwrap();
    for label in KPI_LABELS {
        assert!(table.contains(label), "kpis.txt misses {label:?}: {table}");
    }
}

#[test]
fn compare_prints_both_controllers_and_the_ratios() {
    let out = hptes_bin(&["compare", &reference_day()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Conventional control"), "got: {text}");
    assert!(text.contains("Optimization-based control"), "got: {text}");
    for label in KPI_LABELS {
        assert!(text.contains(label), "comparison misses {label:?}");
    }
    assert!(text.contains("Energy Cost ratio"), "got: {text}");
}

#[test]
fn dispatch_pins_requested_steps_off() {
    let out = hptes_bin(&["dispatch", &reference_day(), "--request", "8-11"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let plan = text
        .lines()
        .find_map(|l| l.strip_prefix("plan u = "))
        .expect("a plan line");
    for t in 8..=11 {
        assert_eq!(plan.as_bytes()[t], b'0', "step {t} must stay off: {plan}");
    }
    assert!(text.contains("delta1 = "), "got: {text}");
    assert!(text.contains("delta2 = "), "got: {text}");
}

#[test]
fn dispatch_requests_beyond_the_horizon_are_input_errors() {
    let out = hptes_bin(&["dispatch", &reference_day(), "--request", "8-15"]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("outside the planning horizon"),
        "got: {}",
        stderr(&out)
    );
}
