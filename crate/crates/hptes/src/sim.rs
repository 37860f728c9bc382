//! Closed-loop simulation of one working day.
//!
//! The harness advances the plant with the *actual* hot-water demand while
//! every controller only ever sees the *predicted* demand and the measured
//! state — forecast error is part of the experiment, not a bug. Three
//! controllers are supported:
//!
//! * `RuleBased` — the two-point hysteresis baseline,
//! * `MpcNoDr` — receding-horizon dispatch without any flexibility
//!   commitments,
//! * `MpcWithDr` — the full pipeline: periodic flexibility assessments,
//!   each offer turned into a request by the configured policy, the
//!   request's steps pinned off in every subsequent dispatch.
//!
//! Horizons are truncated at the end of the working day; assessments run at
//! fixed intervals while a whole assessment period still fits into the
//! remaining day. Committed steps accumulate (a later request never cancels
//! an earlier one); with the canonical schedule — assessment interval equal
//! to the period length — requests cover disjoint spans anyway.

use serde::Serialize;
use thiserror::Error;

use crate::assess::{assess, AssessError, AssessmentProblem};
use crate::constraints::{
    slack_of_state, switch_ok, ConstraintError, ConstraintSet, FlexibilityWindow,
    TemperatureConstraintSpec,
};
use crate::dispatch::{
    dispatch, make_request, rule_based_step, DispatchError, DispatchProblem, DrRequest,
    HysteresisState, RequestPolicy,
};
use crate::model::{
    cop, hp_inlet_temperature, step_fine, Disturbance, ModelError, PlantParameters, StateVector,
};

/// Errors from scenario validation or the closed loop itself.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    BadScenario(String),
    #[error("plant left the physical band at step {step}: x{component} = {value} °C")]
    StateOutOfBand { step: usize, component: usize, value: f64 },
    #[error("KPI comparison needs traces of equal length, got {ours} and {baseline}")]
    SpanMismatch { ours: usize, baseline: usize },
    #[error(transparent)]
    Assess(#[from] AssessError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

/// Which controller runs the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    MpcWithDr,
    MpcNoDr,
    RuleBased,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::MpcWithDr => "mpc_with_dr",
            ControllerKind::MpcNoDr => "mpc_no_dr",
            ControllerKind::RuleBased => "rule_based",
        }
    }
}

/// A fully resolved simulation scenario (typically produced by
/// [`crate::config::load_scenario`]).
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Sampling interval, hours.
    pub step_hours: f64,
    /// Working day start, hours since midnight.
    pub start_hour: f64,
    /// Working day end, hours since midnight.
    pub end_hour: f64,
    /// Prediction/dispatch horizon, steps.
    pub horizon_steps: usize,
    /// Assessment period length, steps.
    pub assess_period_steps: usize,
    /// Steps between assessments.
    pub assess_interval_steps: usize,
    /// Realized hot-water draw per step, kg/h.
    pub demand_actual_kg_h: Vec<f64>,
    /// Forecast hot-water draw per step, kg/h (what controllers see).
    pub demand_predicted_kg_h: Vec<f64>,
    /// Day-ahead electricity price per step, €/kWh.
    pub price_eur_kwh: Vec<f64>,
    /// Plant state at the start of the day.
    pub state0: StateVector,
    /// Heat-pump command active before the day starts.
    pub u_init: bool,
    pub params: PlantParameters,
    pub constraints: ConstraintSet,
    /// Hard-band slack penalty, €/K.
    pub m1_penalty: f64,
    /// Comfort slack penalty, €/K.
    pub m2_penalty: f64,
    /// Reward rate per committed off-step used by assessments.
    pub lambda: f64,
    /// Whether assessments weigh electricity cost against the reward
    /// (disabled: offers are ranked by window size alone).
    pub assess_with_operating_cost: bool,
    pub controller: ControllerKind,
    pub request_policy: RequestPolicy,
    /// Solve assessments on the rayon thread pool.
    pub parallel_solvers: bool,
    /// Internal Euler sub-intervals per sampling step, shared by the
    /// simulated plant and by every controller's predictions so that sharp
    /// thermocline fronts stay monotone on both sides (see
    /// [`crate::model::step_fine`]).
    pub plant_substeps: usize,
}

impl Scenario {
    /// Number of whole sampling steps inside the working day.
    pub fn working_steps(&self) -> usize {
        ((self.end_hour - self.start_hour) / self.step_hours + 1e-9).floor() as usize
    }

    /// Wall-clock hour at the start of step `k`.
    pub fn hour_of(&self, k: usize) -> f64 {
        self.start_hour + k as f64 * self.step_hours
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::BadScenario(msg));
        if !(self.step_hours.is_finite() && self.step_hours > 0.0) {
            return bad(format!("step_hours must be > 0 (hours), got {}", self.step_hours));
        }
        if !(self.start_hour.is_finite()
            && self.end_hour.is_finite()
            && self.start_hour < self.end_hour)
        {
            return bad(format!(
                "working day must satisfy start_hour < end_hour, got {} and {}",
                self.start_hour, self.end_hour
            ));
        }
        let steps = self.working_steps();
        if steps == 0 {
            return bad("working day shorter than one sampling step".into());
        }
        if self.horizon_steps == 0 {
            return bad("horizon_steps must be >= 1".into());
        }
        if self.assess_period_steps == 0 || self.assess_period_steps > self.horizon_steps {
            return bad(format!(
                "assess_period_steps must be in 1..=horizon_steps ({}), got {}",
                self.horizon_steps, self.assess_period_steps
            ));
        }
        if self.assess_interval_steps == 0 {
            return bad("assess_interval_steps must be >= 1".into());
        }
        for (name, series) in [
            ("demand_actual", &self.demand_actual_kg_h),
            ("demand_predicted", &self.demand_predicted_kg_h),
        ] {
            if series.len() < steps {
                return bad(format!(
                    "{name} covers {} steps but the working day has {steps}",
                    series.len()
                ));
            }
            for (k, &m) in series.iter().enumerate() {
                if !(m.is_finite() && (0.0..=self.params.mdot_p_kg_h).contains(&m)) {
                    return bad(format!(
                        "{name}[{k}] = {m} kg/h outside [0, {}] kg/h",
                        self.params.mdot_p_kg_h
                    ));
                }
            }
        }
        if self.price_eur_kwh.len() < steps {
            return bad(format!(
                "price covers {} steps but the working day has {steps}",
                self.price_eur_kwh.len()
            ));
        }
        if let Some((k, &p)) =
            self.price_eur_kwh.iter().enumerate().find(|(_, p)| !p.is_finite())
        {
            return bad(format!("price[{k}] = {p} €/kWh is not finite"));
        }
        if !(self.m1_penalty.is_finite() && self.m1_penalty > 0.0)
            || !(self.m2_penalty.is_finite() && self.m2_penalty > 0.0)
        {
            return bad(format!(
                "slack penalties must be > 0 (€/K), got m1 = {}, m2 = {}",
                self.m1_penalty, self.m2_penalty
            ));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0 (€/step), got {}", self.lambda));
        }
        if self.plant_substeps == 0 {
            return bad("plant_substeps must be >= 1".into());
        }
        self.params.validate()?;
        self.constraints.validate()?;
        if !self.state0.is_plausible() {
            return bad("initial state outside the physical band (0, 100) °C".into());
        }
        Ok(())
    }
}

/// How a step was decided, as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// MPC dispatch without an active commitment at this step.
    Normal,
    /// MPC dispatch with this step pinned off by a request.
    CommittedOff,
    /// Hysteresis baseline.
    RuleBased,
}

impl StepMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepMode::Normal => "normal",
            StepMode::CommittedOff => "committed_off",
            StepMode::RuleBased => "rule_based",
        }
    }
}

/// One simulated step: the measured state *before* applying `u`, the
/// decision, and the step's energy/cost bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub hour: f64,
    pub state: StateVector,
    pub u: bool,
    pub mode: StepMode,
    /// Step lies in the most recently offered flexibility window.
    pub in_flex_window: bool,
    /// Step was pinned off by a request.
    pub in_request: bool,
    pub energy_kwh: f64,
    pub cost_eur: f64,
    /// Dispatch slacks at this decision (for the baseline: the slack the
    /// measured state itself requires).
    pub delta1: f64,
    pub delta2: f64,
}

/// A diagnostic emitted during simulation (assessments, requests, COP
/// warnings, ...). Purely informational; never affects the trace rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub step: usize,
    pub message: String,
}

/// Complete record of one closed-loop run.
#[derive(Debug, Clone)]
pub struct ClosedLoopTrace {
    pub rows: Vec<TraceRow>,
    /// Plant state after the last step.
    pub final_state: StateVector,
    pub u_init: bool,
    pub controller: ControllerKind,
    /// Temperature spec used, kept for KPI computation.
    pub temperature: TemperatureConstraintSpec,
    /// Offered windows in absolute step indices, in assessment order.
    pub flex_windows: Vec<FlexibilityWindow>,
    /// Requests cut from those windows, in absolute step indices.
    pub requests: Vec<DrRequest>,
    pub events: Vec<SimEvent>,
}

impl ClosedLoopTrace {
    /// Inputs actually applied, oldest first.
    pub fn applied_inputs(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.u).collect()
    }
}

/// Runs the configured controller over the scenario's working day.
///
/// Errors abort the run: structural scenario problems, a dispatch with no
/// feasible plan, or the plant leaving the physical temperature band.
pub fn run_closed_loop(scenario: &Scenario) -> Result<ClosedLoopTrace, SimError> {
    scenario.validate()?;
    let n_steps = scenario.working_steps();
    let energy_per_on_step = (scenario.params.p_rated_w / 1000.0) * scenario.step_hours;

    let mut state = scenario.state0;
    let mut u_prev = scenario.u_init;
    let mut applied: Vec<bool> = Vec::with_capacity(n_steps);
    let mut hysteresis =
        HysteresisState { mode: scenario.u_init, ..HysteresisState::default() };
    let mut committed_steps: Vec<usize> = Vec::new(); // absolute, sorted
    let mut current_window: Option<FlexibilityWindow> = None; // absolute
    let mut flex_windows = Vec::new();
    let mut requests = Vec::new();
    let mut events = Vec::new();
    let mut rows = Vec::with_capacity(n_steps);

    for k in 0..n_steps {
        let remaining = n_steps - k;
        let horizon = scenario.horizon_steps.min(remaining);

        let (u, delta1, delta2) = match scenario.controller {
            ControllerKind::RuleBased => {
                let (proposed, next_h) = rule_based_step(&hysteresis, &state);
                // The baseline competes under the same switching budget as
                // the optimizing controllers: a threshold toggle is only
                // followed when the resulting schedule stays legal, otherwise
                // the current mode is held until the budget window frees up.
                let u = if proposed != u_prev {
                    let mut seq = Vec::with_capacity(applied.len() + 2);
                    seq.push(scenario.u_init);
                    seq.extend_from_slice(&applied);
                    seq.push(proposed);
                    if switch_ok(&seq, seq.len() - 1, &scenario.constraints.switching) {
                        proposed
                    } else {
                        u_prev
                    }
                } else {
                    proposed
                };
                hysteresis = HysteresisState { mode: u, ..next_h };
                let slack = slack_of_state(&state, &scenario.constraints.temperature);
                (u, slack.delta1, slack.delta2)
            }
            ControllerKind::MpcNoDr | ControllerKind::MpcWithDr => {
                if scenario.controller == ControllerKind::MpcWithDr
                    && k % scenario.assess_interval_steps == 0
                    && remaining >= scenario.assess_period_steps
                {
                    let problem = AssessmentProblem {
                        horizon,
                        assess_range: 0..scenario.assess_period_steps.min(horizon),
                        state0: state,
                        u_init: scenario.u_init,
                        input_history: applied.clone(),
                        demand_forecast: forecast_slice(scenario, k, horizon),
                        price_forecast: scenario.price_eur_kwh[k..k + horizon].to_vec(),
                        lambda: scenario.lambda,
                        include_operating_cost: scenario.assess_with_operating_cost,
                        params: scenario.params.clone(),
                        constraints: scenario.constraints,
                        predict_substeps: scenario.plant_substeps,
                        parallel: scenario.parallel_solvers,
                    };
                    let result = assess(&problem)?;
                    if result.feasible {
                        let absolute = result.window.shifted(k);
                        events.push(SimEvent {
                            step: k,
                            message: format!(
                                "assessment offered {} off-step(s) {:?}",
                                absolute.len(),
                                absolute.steps
                            ),
                        });
                        let request = make_request(&absolute, &scenario.request_policy)?;
                        events.push(SimEvent {
                            step: k,
                            message: format!("request pinned steps {:?}", request.steps),
                        });
                        for &s in &request.steps {
                            if !committed_steps.contains(&s) {
                                committed_steps.push(s);
                            }
                        }
                        committed_steps.sort_unstable();
                        current_window = Some(absolute.clone());
                        flex_windows.push(absolute);
                        requests.push(request);
                    } else {
                        let family = result
                            .blocking
                            .map(|f| f.to_string())
                            .unwrap_or_else(|| "unknown".into());
                        events.push(SimEvent {
                            step: k,
                            message: format!(
                                "assessment infeasible (first blocked family: {family}); no offer"
                            ),
                        });
                    }
                }
                let request_in_horizon: Vec<usize> = committed_steps
                    .iter()
                    .filter(|&&s| s >= k && s < k + horizon)
                    .map(|&s| s - k)
                    .collect();
                let problem = DispatchProblem {
                    horizon,
                    state0: state,
                    u_init: scenario.u_init,
                    input_history: applied.clone(),
                    demand_forecast: forecast_slice(scenario, k, horizon),
                    price_forecast: scenario.price_eur_kwh[k..k + horizon].to_vec(),
                    request: request_in_horizon,
                    m1_penalty: scenario.m1_penalty,
                    m2_penalty: scenario.m2_penalty,
                    params: scenario.params.clone(),
                    constraints: scenario.constraints,
                    predict_substeps: scenario.plant_substeps,
                };
                let result = dispatch(&problem)?;
                (result.plan_u[0], result.slacks.delta1, result.slacks.delta2)
            }
        };

        let in_request = committed_steps.binary_search(&k).is_ok();
        debug_assert!(!(in_request && u), "dispatch must keep committed steps off");
        let in_flex_window =
            current_window.as_ref().map_or(false, |w| w.contains(k));
        let mode = match scenario.controller {
            ControllerKind::RuleBased => StepMode::RuleBased,
            _ if in_request => StepMode::CommittedOff,
            _ => StepMode::Normal,
        };
        let energy_kwh = if u { energy_per_on_step } else { 0.0 };
        let cost_eur = if u { scenario.price_eur_kwh[k] * energy_per_on_step } else { 0.0 };
        rows.push(TraceRow {
            step: k,
            hour: scenario.hour_of(k),
            state,
            u,
            mode,
            in_flex_window,
            in_request,
            energy_kwh,
            cost_eur,
            delta1,
            delta2,
        });

        // Advance the true plant with the realized demand.
        let d = Disturbance::draw(scenario.demand_actual_kg_h[k]);
        let next = step_fine(&state, u, u_prev, &d, &scenario.params, scenario.plant_substeps)?;
        if u {
            let realized_cop =
                cop(hp_inlet_temperature(&next, &scenario.params), d_t_amb(&d, scenario), &scenario.params);
            if realized_cop < 1.0 {
                events.push(SimEvent {
                    step: k,
                    message: format!(
                        "COP {realized_cop:.3} below 1: operating point far outside the \
                         identification region"
                    ),
                });
            }
        }
        if let Some(component) = next.0.iter().position(|t| !(t.is_finite() && *t > 0.0 && *t < 100.0))
        {
            return Err(SimError::StateOutOfBand {
                step: k,
                component: component + 1,
                value: next.0[component],
            });
        }
        state = next;
        u_prev = u;
        applied.push(u);
    }

    Ok(ClosedLoopTrace {
        rows,
        final_state: state,
        u_init: scenario.u_init,
        controller: scenario.controller,
        temperature: scenario.constraints.temperature,
        flex_windows,
        requests,
        events,
    })
}

fn forecast_slice(scenario: &Scenario, k: usize, horizon: usize) -> Vec<Disturbance> {
    scenario.demand_predicted_kg_h[k..k + horizon]
        .iter()
        .map(|&m| Disturbance::draw(m))
        .collect()
}

fn d_t_amb(d: &Disturbance, scenario: &Scenario) -> f64 {
    d.t_amb.unwrap_or(scenario.params.t_amb)
}

// ---------------------------------------------------------------------------
// KPIs
// ---------------------------------------------------------------------------

/// Day-level performance indicators of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiReport {
    /// Mean monitored temperature over all visited states (°C), the
    /// terminal state included.
    pub avg_temperature_c: f64,
    /// Worst violation of the comfort floor or the hard ceiling over all
    /// visited states (°C).
    pub max_violation_c: f64,
    /// Total electrical energy, kWh.
    pub energy_kwh: f64,
    /// Total electricity cost, €.
    pub cost_eur: f64,
    /// Input transitions over the day (initial input included as
    /// predecessor).
    pub switch_total: usize,
    /// Energy as a percentage of the baseline run (baseline = 100).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_pct_of_baseline: Option<f64>,
    /// Cost as a percentage of the baseline run (baseline = 100).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_pct_of_baseline: Option<f64>,
}

/// Violation of the effective band (comfort floor, hard ceiling) by one
/// state: the larger of the two slack components.
fn violation_of(state: &StateVector, temp: &TemperatureConstraintSpec) -> f64 {
    let slack = slack_of_state(state, temp);
    slack.delta1.max(slack.delta2)
}

/// Computes the KPI block of a trace; with a baseline trace, also the
/// energy/cost percentages (omitted if the baseline quantity is zero).
pub fn compute_kpis(
    trace: &ClosedLoopTrace,
    baseline: Option<&ClosedLoopTrace>,
) -> Result<KpiReport, SimError> {
    let temps: Vec<f64> = trace
        .rows
        .iter()
        .map(|r| trace.temperature.monitored(&r.state))
        .chain(std::iter::once(trace.temperature.monitored(&trace.final_state)))
        .collect();
    let avg_temperature_c = temps.iter().sum::<f64>() / temps.len() as f64;
    let max_violation_c = trace
        .rows
        .iter()
        .map(|r| violation_of(&r.state, &trace.temperature))
        .chain(std::iter::once(violation_of(&trace.final_state, &trace.temperature)))
        .fold(0.0, f64::max);
    let energy_kwh: f64 = trace.rows.iter().map(|r| r.energy_kwh).sum();
    let cost_eur: f64 = trace.rows.iter().map(|r| r.cost_eur).sum();
    let mut switch_total = 0usize;
    let mut prev = trace.u_init;
    for row in &trace.rows {
        if row.u != prev {
            switch_total += 1;
        }
        prev = row.u;
    }

    let (energy_pct_of_baseline, cost_pct_of_baseline) = match baseline {
        None => (None, None),
        Some(base) => {
            if base.rows.len() != trace.rows.len() {
                return Err(SimError::SpanMismatch {
                    ours: trace.rows.len(),
                    baseline: base.rows.len(),
                });
            }
            let base_energy: f64 = base.rows.iter().map(|r| r.energy_kwh).sum();
            let base_cost: f64 = base.rows.iter().map(|r| r.cost_eur).sum();
            (
                (base_energy != 0.0).then(|| 100.0 * energy_kwh / base_energy),
                (base_cost != 0.0).then(|| 100.0 * cost_eur / base_cost),
            )
        }
    };

    Ok(KpiReport {
        avg_temperature_c,
        max_violation_c,
        energy_kwh,
        cost_eur,
        switch_total,
        energy_pct_of_baseline,
        cost_pct_of_baseline,
    })
}

/// Side-by-side closed-loop comparison on identical data.
#[derive(Debug, Clone)]
pub struct ControllerComparison {
    pub baseline_trace: ClosedLoopTrace,
    pub mpc_trace: ClosedLoopTrace,
    pub baseline: KpiReport,
    pub mpc: KpiReport,
}

/// Runs the hysteresis baseline and the scenario's MPC variant (the full
/// pipeline unless the scenario says `mpc_no_dr`) over the same day and
/// reports both KPI blocks, the MPC one relative to the baseline.
pub fn compare_controllers(scenario: &Scenario) -> Result<ControllerComparison, SimError> {
    let mut baseline_scenario = scenario.clone();
    baseline_scenario.controller = ControllerKind::RuleBased;
    let mut mpc_scenario = scenario.clone();
    mpc_scenario.controller = match scenario.controller {
        ControllerKind::RuleBased => ControllerKind::MpcWithDr,
        other => other,
    };
    let baseline_trace = run_closed_loop(&baseline_scenario)?;
    let mpc_trace = run_closed_loop(&mpc_scenario)?;
    let baseline = compute_kpis(&baseline_trace, None)?;
    let mpc = compute_kpis(&mpc_trace, Some(&baseline_trace))?;
    Ok(ControllerComparison { baseline_trace, mpc_trace, baseline, mpc })
}
