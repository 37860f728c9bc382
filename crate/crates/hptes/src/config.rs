//! Scenario files and time-series ingestion.
//!
//! A scenario is a JSON document with six sections — `time`, `plant`,
//! `initial`, `constraints`, `data`, `controller` — plus two CSV files for
//! the demand and price series referenced from `data`. Every key is
//! optional except `plant.p_rated_w` and the two CSV paths; omitted keys
//! fall back to the identified reference-plant values and the standard
//! working-day layout. Unknown keys are rejected so typos cannot silently
//! revert a setting to its default.
//!
//! All keys carry the unit their name states (`*_hours` in hours,
//! `*_kg_per_h` in kg/h, temperatures in °C, prices in €/kWh, powers in
//! W). Conversion to per-second SI happens exactly once, inside the plant
//! model.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSet, SwitchBudget, TemperatureConstraintSpec};
use crate::dispatch::RequestPolicy;
use crate::model::{ModelVariant, PlantParameters, StateVector};
use crate::sim::{ControllerKind, Scenario, SimError};

/// Boundary-layer failure: anything wrong with a scenario document, its
/// CSV companions, or the filesystem around them.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
    #[error("scenario invalid: {0}")]
    Invalid(#[from] SimError),
}

fn io_err(path: &Path, source: std::io::Error) -> ConfigError {
    ConfigError::Io { path: path.display().to_string(), source }
}

/// The `time` section: sampling grid and planning cadence.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    /// Sampling interval, hours.
    pub step_hours: f64,
    /// Working-day start, hours since midnight.
    pub start_hour: f64,
    /// Working-day end, hours since midnight (exclusive step-start bound).
    pub end_hour: f64,
    /// Prediction/dispatch horizon, steps.
    pub horizon_steps: usize,
    /// Assessment period length, steps.
    pub assess_period_steps: usize,
    /// Steps between assessments.
    pub assess_interval_steps: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            step_hours: 1.0 / 3.0,
            start_hour: 7.0,
            end_hour: 17.5,
            horizon_steps: 12,
            assess_period_steps: 8,
            assess_interval_steps: 8,
        }
    }
}

/// The `plant` section. Every physical parameter of
/// [`PlantParameters`] can be overridden by the key of the same name;
/// whatever is omitted keeps the identified reference-plant value. Only
/// the rated electrical power is site-specific and therefore mandatory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    /// Rated electrical power of the heat pump, W. Mandatory.
    pub p_rated_w: f64,
    /// Layer-update equation set: `"corrected"` (default) or `"literal"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_variant: Option<String>,
    /// Euler sub-intervals per sampling step used by both the simulated
    /// plant and the controllers' predictions (default 1 = the plain
    /// one-interval discretization).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_pipe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_pipe_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_pipe_bottom: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r12: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r23: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r34: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r45: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r56: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_pipe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m5: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m6: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_he: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_off: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_amb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mdot_c_kg_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mdot_p_kg_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a4: Option<f64>,
}

impl PlantSection {
    fn to_params(&self, step_hours: f64, path: &Path) -> Result<PlantParameters, ConfigError> {
        let mut p = PlantParameters::nominal(self.p_rated_w);
        p.dt_hours = step_hours;
        p.variant = match self.model_variant.as_deref() {
            None | Some("corrected") => ModelVariant::Corrected,
            Some("literal") => ModelVariant::Literal,
            Some(other) => {
                return Err(ConfigError::Parse {
                    path: path.display().to_string(),
                    message: format!(
                        "plant.model_variant must be \"corrected\" or \"literal\", got \"{other}\""
                    ),
                })
            }
        };
        macro_rules! take {
            ($($field:ident),+) => {
                $(if let Some(v) = self.$field { p.$field = v; })+
            };
        }
        take!(
            cp, r_pipe, r_pipe_upper, r_pipe_bottom, r12, r23, r34, r45, r56, m_pipe, m1,
            m2, m3, m4, m5, m6, dt_he, dt_c, t_s, dt_off, t_amb, mdot_c_kg_h,
            mdot_p_kg_h, a1, a2, a3, a4
        );
        Ok(p)
    }
}

/// The `initial` section: tank/pipe temperatures and the pre-day command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    /// Supply-pipe temperature, °C.
    pub x1: f64,
    /// Return temperature, °C.
    pub x2: f64,
    /// Storage layer temperatures top to bottom, °C.
    pub x3: f64,
    pub x4: f64,
    pub x5: f64,
    pub x6: f64,
    pub x7: f64,
    pub x8: f64,
    /// Heat-pump command active before the first step.
    pub u_init: bool,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            x1: 60.0,
            x2: 60.0,
            x3: 60.0,
            x4: 60.0,
            x5: 60.0,
            x6: 60.0,
            x7: 60.0,
            x8: 60.0,
            u_init: false,
        }
    }
}

impl InitialSection {
    fn to_state(&self) -> StateVector {
        StateVector([
            self.x1, self.x2, self.x3, self.x4, self.x5, self.x6, self.x7, self.x8,
        ])
    }
}

/// The `constraints` section: monitored-temperature band, switching
/// budget, slack prices and the off-step reward.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintsSection {
    /// Hard lower bound on the monitored temperature, °C.
    pub t_low_hard: f64,
    /// Comfort lower bound, °C (violations are priced, not forbidden).
    pub t_low_soft: f64,
    /// Hard upper bound, °C.
    pub t_high_hard: f64,
    /// Switching-budget window length, steps.
    pub switch_window_m: usize,
    /// Maximum on/off transitions per window.
    pub switch_max: usize,
    /// Hard-band slack price, €/K.
    pub m1: f64,
    /// Comfort slack price, €/K.
    pub m2: f64,
    /// Reward per committed off-step, €.
    pub lambda: f64,
    /// Whether assessments weigh electricity cost against the reward
    /// (disable to rank candidate windows purely by size).
    pub assess_with_operating_cost: bool,
}

impl Default for ConstraintsSection {
    fn default() -> Self {
        ConstraintsSection {
            t_low_hard: 55.0,
            t_low_soft: 60.0,
            t_high_hard: 75.0,
            switch_window_m: 8,
            switch_max: 1,
            m1: 1e3,
            m2: 1e2,
            lambda: 1.0,
            assess_with_operating_cost: true,
        }
    }
}

impl ConstraintsSection {
    fn to_set(&self) -> ConstraintSet {
        ConstraintSet {
            temperature: TemperatureConstraintSpec {
                t_low_hard: self.t_low_hard,
                t_low_soft: self.t_low_soft,
                t_high_hard: self.t_high_hard,
                ..TemperatureConstraintSpec::default()
            },
            switching: SwitchBudget {
                window_m: self.switch_window_m,
                max_switches: self.switch_max,
            },
        }
    }
}

/// The `data` section: where the demand and price series live. Relative
/// paths resolve against the scenario file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// CSV with columns `step_index,mdot_s_actual_kg_per_h,mdot_s_predicted_kg_per_h`.
    pub demand_csv: String,
    /// CSV with columns `step_index,price_eur_per_kwh`.
    pub price_csv: String,
}

/// The `controller` section: which decision logic runs the day.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    /// `"mpc_with_dr"` (default), `"mpc_no_dr"` or `"rule_based"`.
    pub mode: String,
    /// `"full"` (default), `"prefix:K"` or `"random:SEED:K"`.
    pub request_policy: String,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection { mode: "mpc_with_dr".into(), request_policy: "full".into() }
    }
}

/// In-memory form of a scenario document, exactly mirroring the JSON
/// schema. [`load_scenario`] is the usual entry point; this type is public
/// so tools can write scenarios programmatically.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub time: TimeSection,
    pub plant: PlantSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub constraints: ConstraintsSection,
    pub data: DataSection,
    #[serde(default)]
    pub controller: ControllerSection,
}

fn parse_controller(mode: &str, path: &Path) -> Result<ControllerKind, ConfigError> {
    match mode {
        "mpc_with_dr" => Ok(ControllerKind::MpcWithDr),
        "mpc_no_dr" => Ok(ControllerKind::MpcNoDr),
        "rule_based" => Ok(ControllerKind::RuleBased),
        other => Err(ConfigError::Parse {
            path: path.display().to_string(),
            message: format!(
                "controller.mode must be \"mpc_with_dr\", \"mpc_no_dr\" or \"rule_based\", got \"{other}\""
            ),
        }),
    }
}

fn parse_request_policy(spec: &str, path: &Path) -> Result<RequestPolicy, ConfigError> {
    let bad = |detail: String| ConfigError::Parse {
        path: path.display().to_string(),
        message: format!(
            "controller.request_policy must be \"full\", \"prefix:K\" or \"random:SEED:K\"; {detail}"
        ),
    };
    if spec == "full" {
        return Ok(RequestPolicy::Full);
    }
    if let Some(rest) = spec.strip_prefix("prefix:") {
        let k = rest.parse::<usize>().map_err(|_| bad(format!("bad count \"{rest}\"")))?;
        return Ok(RequestPolicy::Prefix(k));
    }
    if let Some(rest) = spec.strip_prefix("random:") {
        let (seed_s, k_s) =
            rest.split_once(':').ok_or_else(|| bad(format!("expected SEED:K after \"random:\", got \"{rest}\"")))?;
        let seed = seed_s.parse::<u64>().map_err(|_| bad(format!("bad seed \"{seed_s}\"")))?;
        let k = k_s.parse::<usize>().map_err(|_| bad(format!("bad count \"{k_s}\"")))?;
        return Ok(RequestPolicy::Random { seed, k });
    }
    Err(bad(format!("got \"{spec}\"")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandRow {
    step_index: usize,
    mdot_s_actual_kg_per_h: f64,
    mdot_s_predicted_kg_per_h: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriceRow {
    step_index: usize,
    price_eur_per_kwh: f64,
}

fn csv_err(path: &Path, message: String) -> ConfigError {
    ConfigError::Csv { path: path.display().to_string(), message }
}

fn check_contiguous(index: usize, row: usize, path: &Path) -> Result<(), ConfigError> {
    if index != row {
        return Err(csv_err(
            path,
            format!("step_index must count 0,1,2,... without gaps; row {row} has step_index {index}"),
        ));
    }
    Ok(())
}

fn check_flow(value: f64, column: &str, row: usize, path: &Path) -> Result<(), ConfigError> {
    if !value.is_finite() || value < 0.0 {
        return Err(csv_err(
            path,
            format!("{column} must be a finite flow >= 0 kg/h; row {row} has {value}"),
        ));
    }
    Ok(())
}

/// Reads a demand CSV into (actual, predicted) series in kg/h.
pub fn load_demand_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| csv_err(path, e.to_string()))?;
    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    for (row, record) in reader.deserialize::<DemandRow>().enumerate() {
        let record = record.map_err(|e| csv_err(path, e.to_string()))?;
        check_contiguous(record.step_index, row, path)?;
        check_flow(record.mdot_s_actual_kg_per_h, "mdot_s_actual_kg_per_h", row, path)?;
        check_flow(record.mdot_s_predicted_kg_per_h, "mdot_s_predicted_kg_per_h", row, path)?;
        actual.push(record.mdot_s_actual_kg_per_h);
        predicted.push(record.mdot_s_predicted_kg_per_h);
    }
    Ok((actual, predicted))
}

/// Reads a price CSV into a €/kWh series. Negative prices are legal —
/// day-ahead markets produce them — but every value must be finite.
pub fn load_price_csv(path: &Path) -> Result<Vec<f64>, ConfigError> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| csv_err(path, e.to_string()))?;
    let mut prices = Vec::new();
    for (row, record) in reader.deserialize::<PriceRow>().enumerate() {
        let record = record.map_err(|e| csv_err(path, e.to_string()))?;
        check_contiguous(record.step_index, row, path)?;
        if !record.price_eur_per_kwh.is_finite() {
            return Err(csv_err(
                path,
                format!(
                    "price_eur_per_kwh must be finite (€/kWh); row {row} has {}",
                    record.price_eur_per_kwh
                ),
            ));
        }
        prices.push(record.price_eur_per_kwh);
    }
    Ok(prices)
}

impl ScenarioFile {
    /// Builds the runnable [`Scenario`], reading the CSVs relative to
    /// `base_dir` and validating everything.
    pub fn into_scenario(self, base_dir: &Path, origin: &Path) -> Result<Scenario, ConfigError> {
        let params = self.plant.to_params(self.time.step_hours, origin)?;
        let demand_path = base_dir.join(&self.data.demand_csv);
        let price_path = base_dir.join(&self.data.price_csv);
        let (demand_actual, demand_predicted) = load_demand_csv(&demand_path)?;
        let prices = load_price_csv(&price_path)?;
        let scenario = Scenario {
            step_hours: self.time.step_hours,
            start_hour: self.time.start_hour,
            end_hour: self.time.end_hour,
            horizon_steps: self.time.horizon_steps,
            assess_period_steps: self.time.assess_period_steps,
            assess_interval_steps: self.time.assess_interval_steps,
            demand_actual_kg_h: demand_actual,
            demand_predicted_kg_h: demand_predicted,
            price_eur_kwh: prices,
            state0: self.initial.to_state(),
            u_init: self.initial.u_init,
            params,
            constraints: self.constraints.to_set(),
            m1_penalty: self.constraints.m1,
            m2_penalty: self.constraints.m2,
            lambda: self.constraints.lambda,
            assess_with_operating_cost: self.constraints.assess_with_operating_cost,
            controller: parse_controller(&self.controller.mode, origin)?,
            request_policy: parse_request_policy(&self.controller.request_policy, origin)?,
            parallel_solvers: false,
            plant_substeps: self.plant.substeps.unwrap_or(1),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Captures a runnable scenario back into document form, pointing its
    /// `data` section at the given CSV paths. Together with
    /// [`write_demand_csv`]/[`write_price_csv`] this round-trips
    /// [`load_scenario`] exactly.
    pub fn from_scenario(scenario: &Scenario, demand_csv: &str, price_csv: &str) -> Self {
        let nominal = PlantParameters::nominal(scenario.params.p_rated_w);
        let p = &scenario.params;
        // Emit only the overrides that differ from the reference plant so
        // the document stays minimal.
        macro_rules! diff {
            ($field:ident) => {
                (p.$field != nominal.$field).then_some(p.$field)
            };
        }
        ScenarioFile {
            time: TimeSection {
                step_hours: scenario.step_hours,
                start_hour: scenario.start_hour,
                end_hour: scenario.end_hour,
                horizon_steps: scenario.horizon_steps,
                assess_period_steps: scenario.assess_period_steps,
                assess_interval_steps: scenario.assess_interval_steps,
            },
            plant: PlantSection {
                p_rated_w: p.p_rated_w,
                model_variant: match p.variant {
                    ModelVariant::Corrected => None,
                    ModelVariant::Literal => Some("literal".into()),
                },
                substeps: (scenario.plant_substeps != 1).then_some(scenario.plant_substeps),
                cp: diff!(cp),
                r_pipe: diff!(r_pipe),
                r_pipe_upper: diff!(r_pipe_upper),
                r_pipe_bottom: diff!(r_pipe_bottom),
                r12: diff!(r12),
                r23: diff!(r23),
                r34: diff!(r34),
                r45: diff!(r45),
                r56: diff!(r56),
                m_pipe: diff!(m_pipe),
                m1: diff!(m1),
                m2: diff!(m2),
                m3: diff!(m3),
                m4: diff!(m4),
                m5: diff!(m5),
                m6: diff!(m6),
                dt_he: diff!(dt_he),
                dt_c: diff!(dt_c),
                t_s: diff!(t_s),
                dt_off: diff!(dt_off),
                t_amb: diff!(t_amb),
                mdot_c_kg_h: diff!(mdot_c_kg_h),
                mdot_p_kg_h: diff!(mdot_p_kg_h),
                a1: diff!(a1),
                a2: diff!(a2),
                a3: diff!(a3),
                a4: diff!(a4),
            },
            initial: InitialSection {
                x1: scenario.state0.0[0],
                x2: scenario.state0.0[1],
                x3: scenario.state0.0[2],
                x4: scenario.state0.0[3],
                x5: scenario.state0.0[4],
                x6: scenario.state0.0[5],
                x7: scenario.state0.0[6],
                x8: scenario.state0.0[7],
                u_init: scenario.u_init,
            },
            constraints: ConstraintsSection {
                t_low_hard: scenario.constraints.temperature.t_low_hard,
                t_low_soft: scenario.constraints.temperature.t_low_soft,
                t_high_hard: scenario.constraints.temperature.t_high_hard,
                switch_window_m: scenario.constraints.switching.window_m,
                switch_max: scenario.constraints.switching.max_switches,
                m1: scenario.m1_penalty,
                m2: scenario.m2_penalty,
                lambda: scenario.lambda,
                assess_with_operating_cost: scenario.assess_with_operating_cost,
            },
            data: DataSection { demand_csv: demand_csv.into(), price_csv: price_csv.into() },
            controller: ControllerSection {
                mode: scenario.controller.as_str().into(),
                request_policy: match &scenario.request_policy {
                    RequestPolicy::Full => "full".into(),
                    RequestPolicy::Prefix(k) => format!("prefix:{k}"),
                    RequestPolicy::Random { seed, k } => format!("random:{seed}:{k}"),
                },
            },
        }
    }
}

/// Loads and fully validates a scenario document plus its CSV companions.
/// Relative CSV paths resolve against the document's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    file.into_scenario(&base_dir, path)
}

/// Writes a demand CSV in the schema [`load_demand_csv`] reads.
pub fn write_demand_csv(path: &Path, actual: &[f64], predicted: &[f64]) -> Result<(), ConfigError> {
    let mut out = String::from("step_index,mdot_s_actual_kg_per_h,mdot_s_predicted_kg_per_h\n");
    for (k, (a, p)) in actual.iter().zip(predicted).enumerate() {
        writeln!(out, "{k},{a},{p}").expect("string write");
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes a price CSV in the schema [`load_price_csv`] reads.
pub fn write_price_csv(path: &Path, prices: &[f64]) -> Result<(), ConfigError> {
    let mut out = String::from("step_index,price_eur_per_kwh\n");
    for (k, p) in prices.iter().enumerate() {
        writeln!(out, "{k},{p}").expect("string write");
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn workdir() -> tempfile::TempDir {
        tempfile::tempdir().expect("tempdir")
    }

    fn write_series(dir: &Path, steps: usize) {
        let actual: Vec<f64> = (0..steps).map(|k| 100.0 + k as f64).collect();
        let predicted: Vec<f64> = actual.iter().map(|a| a * 1.05).collect();
        let prices: Vec<f64> = (0..steps).map(|k| 0.10 + 0.01 * k as f64).collect();
        write_demand_csv(&dir.join("demand.csv"), &actual, &predicted).unwrap();
        write_price_csv(&dir.join("price.csv"), &prices).unwrap();
    }

    fn minimal_json() -> &'static str {
        r#"{
            "plant": { "p_rated_w": 11000.0 },
            "data": { "demand_csv": "demand.csv", "price_csv": "price.csv" }
        }"#
    }

    #[test]
    fn minimal_file_gets_reference_defaults() {
        let dir = workdir();
        write_series(dir.path(), 31);
        let path = dir.path().join("scenario.json");
        fs::write(&path, minimal_json()).unwrap();
        let s = load_scenario(&path).unwrap();
        assert_eq!(s.working_steps(), 31);
        assert_eq!(s.params.p_rated_w, 11_000.0);
        assert_eq!(s.params.mdot_p_kg_h, PlantParameters::nominal(1.0).mdot_p_kg_h);
        assert_eq!(s.constraints.temperature.t_low_hard, 55.0);
        assert_eq!(s.constraints.temperature.t_low_soft, 60.0);
        assert_eq!(s.constraints.temperature.t_high_hard, 75.0);
        assert_eq!(s.constraints.switching.window_m, 8);
        assert_eq!(s.constraints.switching.max_switches, 1);
        assert_eq!(s.m1_penalty, 1e3);
        assert_eq!(s.m2_penalty, 1e2);
        assert_eq!(s.controller, ControllerKind::MpcWithDr);
        assert_eq!(s.request_policy, RequestPolicy::Full);
        assert_eq!(s.plant_substeps, 1);
        assert_eq!(s.demand_actual_kg_h[3], 103.0);
        assert_eq!(s.price_eur_kwh[2], 0.10 + 0.01 * 2.0);
    }

    #[test]
    fn working_day_step_count_uses_start_inclusive_end_exclusive() {
        let dir = workdir();
        write_series(dir.path(), 31);
        let path = dir.path().join("scenario.json");
        fs::write(&path, minimal_json()).unwrap();
        let s = load_scenario(&path).unwrap();
        // 7.0 .. 17.5 at 20-minute steps: starts 7:00, 7:20, ..., 17:00.
        assert_eq!(s.working_steps(), 31);
        assert!(s.hour_of(30) < 17.5 - 1e-9);
        assert!((s.hour_of(30) - 17.0).abs() < 1e-9);
    }

    #[test]
    fn missing_rated_power_names_the_key() {
        let dir = workdir();
        write_series(dir.path(), 31);
        let path = dir.path().join("scenario.json");
        fs::write(
            &path,
            r#"{ "plant": {}, "data": { "demand_csv": "demand.csv", "price_csv": "price.csv" } }"#,
        )
        .unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(err.to_string().contains("p_rated_w"), "got: {err}");
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        let dir = workdir();
        write_series(dir.path(), 31);
        let path = dir.path().join("scenario.json");
        fs::write(
            &path,
            r#"{
                "plant": { "p_rated_w": 11000.0, "p_rated_kw": 11.0 },
                "data": { "demand_csv": "demand.csv", "price_csv": "price.csv" }
            }"#,
        )
        .unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(err.to_string().contains("p_rated_kw"), "got: {err}");

        fs::write(
            &path,
            r#"{
                "plant": { "p_rated_w": 11000.0 },
                "data": { "demand_csv": "demand.csv", "price_csv": "price.csv" },
                "extra_section": {}
            }"#,
        )
        .unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(err.to_string().contains("extra_section"), "got: {err}");
    }

    #[test]
    fn plant_overrides_apply_and_variant_parses() {
        let dir = workdir();
        write_series(dir.path(), 31);
        let path = dir.path().join("scenario.json");
        fs::write(
            &path,
            r#"{
                "plant": { "p_rated_w": 9000.0, "t_amb": 20.0, "model_variant": "literal", "substeps": 4 },
                "data": { "demand_csv": "demand.csv", "price_csv": "price.csv" }
            }"#,
        )
        .unwrap();
        let s = load_scenario(&path).unwrap();
        assert_eq!(s.params.t_amb, 20.0);
        assert_eq!(s.params.variant, ModelVariant::Literal);
        assert_eq!(s.plant_substeps, 4);

        fs::write(
            &path,
            r#"{
                "plant": { "p_rated_w": 9000.0, "model_variant": "euler" },
                "data": { "demand_csv": "demand.csv", "price_csv": "price.csv" }
            }"#,
        )
        .unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(err.to_string().contains("model_variant"), "got: {err}");
    }

    #[test]
    fn demand_csv_schema_violations_name_column_and_row() {
        let dir = workdir();
        let path = dir.path().join("scenario.json");
        fs::write(&path, minimal_json()).unwrap();
        let prices: Vec<f64> = vec![0.1; 31];
        write_price_csv(&dir.path().join("price.csv"), &prices).unwrap();

        // Gap in step_index.
        let mut body = String::from("step_index,mdot_s_actual_kg_per_h,mdot_s_predicted_kg_per_h\n");
        body.push_str("0,100,105\n2,100,105\n");
        fs::write(dir.path().join("demand.csv"), body).unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(err.to_string().contains("step_index"), "got: {err}");

        // Negative flow.
        let mut body = String::from("step_index,mdot_s_actual_kg_per_h,mdot_s_predicted_kg_per_h\n");
        for k in 0..31 {
            if k == 7 {
                body.push_str("7,-1,105\n");
            } else {
                body.push_str(&format!("{k},100,105\n"));
            }
        }
        fs::write(dir.path().join("demand.csv"), body).unwrap();
        let err = load_scenario(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mdot_s_actual_kg_per_h") && msg.contains("row 7"), "got: {msg}");

        // Missing column.
        let mut body = String::from("step_index,mdot_s_actual_kg_per_h\n");
        for k in 0..31 {
            body.push_str(&format!("{k},100\n"));
        }
        fs::write(dir.path().join("demand.csv"), body).unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(err.to_string().contains("mdot_s_predicted_kg_per_h"), "got: {err}");
    }

    #[test]
    fn short_series_is_a_length_mismatch_error() {
        let dir = workdir();
        write_series(dir.path(), 20);
        let path = dir.path().join("scenario.json");
        fs::write(&path, minimal_json()).unwrap();
        let err = load_scenario(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("20") && msg.contains("31"), "got: {msg}");
    }

    #[test]
    fn negative_prices_load_but_non_finite_do_not() {
        let dir = workdir();
        let actual: Vec<f64> = vec![100.0; 31];
        write_demand_csv(&dir.path().join("demand.csv"), &actual, &actual).unwrap();
        let mut prices: Vec<f64> = vec![0.1; 31];
        prices[5] = -0.02;
        write_price_csv(&dir.path().join("price.csv"), &prices).unwrap();
        let path = dir.path().join("scenario.json");
        fs::write(&path, minimal_json()).unwrap();
        let s = load_scenario(&path).unwrap();
        assert_eq!(s.price_eur_kwh[5], -0.02);

        fs::write(
            dir.path().join("price.csv"),
            "step_index,price_eur_per_kwh\n0,NaN\n",
        )
        .unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(err.to_string().contains("price_eur_per_kwh"), "got: {err}");
    }

    #[test]
    fn demand_above_primary_flow_is_rejected_with_units() {
        let dir = workdir();
        let actual: Vec<f64> = vec![900.0; 31]; // primary circuit moves 880 kg/h
        write_demand_csv(&dir.path().join("demand.csv"), &actual, &actual).unwrap();
        write_price_csv(&dir.path().join("price.csv"), &vec![0.1; 31]).unwrap();
        let path = dir.path().join("scenario.json");
        fs::write(&path, minimal_json()).unwrap();
        let err = load_scenario(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kg/h"), "got: {msg}");
    }

    #[test]
    fn controller_section_parses_all_policies() {
        let dir = workdir();
        write_series(dir.path(), 31);
        let path = dir.path().join("scenario.json");
        for (spec, expected) in [
            ("full", RequestPolicy::Full),
            ("prefix:3", RequestPolicy::Prefix(3)),
            ("random:42:2", RequestPolicy::Random { seed: 42, k: 2 }),
        ] {
            fs::write(
                &path,
                format!(
                    r#"{{
                        "plant": {{ "p_rated_w": 11000.0 }},
                        "data": {{ "demand_csv": "demand.csv", "price_csv": "price.csv" }},
                        "controller": {{ "mode": "rule_based", "request_policy": "{spec}" }}
                    }}"#
                ),
            )
            .unwrap();
            let s = load_scenario(&path).unwrap();
            assert_eq!(s.controller, ControllerKind::RuleBased);
            assert_eq!(s.request_policy, expected);
        }

        fs::write(
            &path,
            r#"{
                "plant": { "p_rated_w": 11000.0 },
                "data": { "demand_csv": "demand.csv", "price_csv": "price.csv" },
                "controller": { "mode": "rule_based", "request_policy": "random:7" }
            }"#,
        )
        .unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(err.to_string().contains("request_policy"), "got: {err}");
    }

    #[test]
    fn scenario_document_round_trips_semantically() {
        let dir = workdir();
        write_series(dir.path(), 31);
        let path = dir.path().join("scenario.json");
        fs::write(
            &path,
            r#"{
                "time": { "step_hours": 0.3333333333333333, "start_hour": 7.0, "end_hour": 17.5,
                          "horizon_steps": 10, "assess_period_steps": 8, "assess_interval_steps": 8 },
                "plant": { "p_rated_w": 15500.0, "substeps": 20, "t_amb": 18.5 },
                "initial": { "x1": 65.0, "x2": 42.0, "x3": 65.0, "x4": 63.8, "x5": 62.6,
                             "x6": 61.2, "x7": 59.8, "x8": 58.5, "u_init": false },
                "constraints": { "t_low_hard": 55.0, "t_low_soft": 60.0, "t_high_hard": 75.0,
                                 "switch_window_m": 8, "switch_max": 1,
                                 "m1": 1000.0, "m2": 100.0, "lambda": 1.0,
                                 "assess_with_operating_cost": true },
                "data": { "demand_csv": "demand.csv", "price_csv": "price.csv" },
                "controller": { "mode": "mpc_with_dr", "request_policy": "full" }
            }"#,
        )
        .unwrap();
        let first = load_scenario(&path).unwrap();

        let doc = ScenarioFile::from_scenario(&first, "demand.csv", "price.csv");
        let rewritten = dir.path().join("rewritten.json");
        fs::write(&rewritten, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        let second = load_scenario(&rewritten).unwrap();
        assert_eq!(format!("{first:?}"), format!("{second:?}"));
    }

    #[test]
    fn kg_per_hour_sentinel_survives_loading_unconverted() {
        // The configured flow must arrive in the scenario in kg/h exactly
        // as written; the single /3600 conversion happens inside the plant
        // model's heat-balance terms, not at the boundary.
        let dir = workdir();
        let mut actual: Vec<f64> = vec![100.0; 31];
        actual[0] = 877.0; // sentinel close to, but under, the 880 kg/h cap
        write_demand_csv(&dir.path().join("demand.csv"), &actual, &actual).unwrap();
        write_price_csv(&dir.path().join("price.csv"), &vec![0.1; 31]).unwrap();
        let path = dir.path().join("scenario.json");
        fs::write(&path, minimal_json()).unwrap();
        let s = load_scenario(&path).unwrap();
        assert_eq!(s.demand_actual_kg_h[0], 877.0);
    }
}
