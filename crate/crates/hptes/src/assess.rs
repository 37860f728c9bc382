//! Flexibility assessment: which contiguous block of upcoming steps can the
//! heat pump be switched off without leaving the hard temperature band or
//! the switching budget?
//!
//! The assessment considers every contiguous candidate window inside the
//! assessment period (plus the empty window), solves an exact on/off
//! planning problem with the window pinned to off, and picks the window
//! whose best plan minimizes `operating cost − λ·|window|`. Ties are broken
//! toward larger windows, then earlier start, then the lexicographically
//! smallest plan — so results are fully deterministic, with or without
//! parallel window evaluation.

use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

use crate::constraints::{
    switch_ok, ConstraintError, ConstraintSet, FlexibilityWindow,
};
use crate::model::{rollout_fine, Disturbance, ModelError, PlantParameters, StateVector};
use crate::search::{best_plan, Candidate, CostModel, SearchProblem};

pub use crate::search::ConstraintFamily;

/// Errors from malformed assessment problems.
#[derive(Debug, Error)]
pub enum AssessError {
    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error(
        "assessment period {start}..{end} does not fit the horizon 0..{horizon}"
    )]
    BadAssessRange { start: usize, end: usize, horizon: usize },
    #[error("flexibility reward rate must be finite and >= 0, got {0}")]
    BadLambda(f64),
    #[error("prediction sub-steps must be at least 1")]
    BadSubsteps,
    #[error("electricity price at step {index} is not finite")]
    BadPrice { index: usize },
    #[error("measured state contains a non-finite component")]
    BadState,
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One flexibility-assessment instance at a single decision time.
#[derive(Debug, Clone)]
pub struct AssessmentProblem {
    /// Plan length in steps.
    pub horizon: usize,
    /// Contiguous sub-range of the horizon from which the window may be
    /// chosen (the assessment period).
    pub assess_range: Range<usize>,
    /// Measured state at the decision time.
    pub state0: StateVector,
    /// Input active before the recorded history (pad value for the
    /// switching window).
    pub u_init: bool,
    /// Inputs already applied, oldest first.
    pub input_history: Vec<bool>,
    /// Forecast hot-water draw per step, length `horizon`.
    pub demand_forecast: Vec<Disturbance>,
    /// Electricity price per step in €/kWh, length `horizon`.
    pub price_forecast: Vec<f64>,
    /// Reward rate per committed off-step, €.
    pub lambda: f64,
    /// Whether electricity cost enters the objective (disable to rank
    /// windows purely by size).
    pub include_operating_cost: bool,
    pub params: PlantParameters,
    pub constraints: ConstraintSet,
    /// Euler sub-intervals used to advance each plan step during prediction;
    /// 1 evaluates the one-interval planning model exactly.
    pub predict_substeps: usize,
    /// Evaluate candidate windows on the rayon thread pool. Results are
    /// identical either way.
    pub parallel: bool,
}

/// Outcome of one assessment.
#[derive(Debug, Clone)]
pub struct AssessmentResult {
    /// The offered window 𝓕 (possibly empty), in horizon-relative indices.
    pub window: FlexibilityWindow,
    /// The optimal plan behind the offer, length `horizon`.
    pub plan_u: Vec<bool>,
    /// `operating cost − λ·|window|`; `+∞` when no plan satisfies the hard
    /// constraints at all.
    pub objective: f64,
    /// Electricity cost incurred per step under `plan_u`.
    pub per_step_cost: Vec<f64>,
    /// Whether any plan satisfied the hard constraints.
    pub feasible: bool,
    /// When infeasible: the family of the first constraint that cut a
    /// branch during the unrestricted search.
    pub blocking: Option<ConstraintFamily>,
}

/// Electricity cost of one step with the heat pump running: price (€/kWh)
/// times rated power (kW) times step length (h). The single authoritative
/// stage-cost formula; planners and reference implementations must all use
/// it so objectives agree bitwise.
pub fn stage_cost_on(price_eur_per_kwh: f64, params: &PlantParameters) -> f64 {
    price_eur_per_kwh * (params.p_rated_w / 1000.0) * params.dt_hours
}

/// Candidate windows in canonical preference order: every contiguous block
/// inside `range` from largest to smallest, earlier start first, then the
/// empty window.
pub(crate) fn candidate_windows(range: &Range<usize>) -> Vec<Range<usize>> {
    let mut windows = Vec::new();
    let span = range.end.saturating_sub(range.start);
    for len in (1..=span).rev() {
        for start in range.start..=(range.end - len) {
            windows.push(start..start + len);
        }
    }
    windows.push(range.start..range.start); // the empty window, last
    windows
}

fn validate(problem: &AssessmentProblem) -> Result<(), AssessError> {
    if problem.horizon == 0 {
        return Err(AssessError::EmptyHorizon);
    }
    if problem.assess_range.start > problem.assess_range.end
        || problem.assess_range.end > problem.horizon
    {
        return Err(AssessError::BadAssessRange {
            start: problem.assess_range.start,
            end: problem.assess_range.end,
            horizon: problem.horizon,
        });
    }
    if problem.demand_forecast.len() != problem.horizon {
        return Err(AssessError::LengthMismatch {
            what: "demand forecast",
            expected: problem.horizon,
            got: problem.demand_forecast.len(),
        });
    }
    if problem.price_forecast.len() != problem.horizon {
        return Err(AssessError::LengthMismatch {
            what: "price forecast",
            expected: problem.horizon,
            got: problem.price_forecast.len(),
        });
    }
    if let Some(index) = problem.price_forecast.iter().position(|p| !p.is_finite()) {
        return Err(AssessError::BadPrice { index });
    }
    if !(problem.lambda.is_finite() && problem.lambda >= 0.0) {
        return Err(AssessError::BadLambda(problem.lambda));
    }
    if problem.predict_substeps == 0 {
        return Err(AssessError::BadSubsteps);
    }
    if !problem.state0.0.iter().all(|t| t.is_finite()) {
        return Err(AssessError::BadState);
    }
    problem.params.validate()?;
    problem.constraints.validate()?;
    // Validate all disturbances up front; the search then steps without
    // re-checking.
    for (index, d) in problem.demand_forecast.iter().enumerate() {
        d.validate(&problem.params)
            .map_err(|e| ModelError::AtStep { step: index, source: Box::new(e) })?;
    }
    Ok(())
}

/// Assesses the flexibility of the plant at one decision time.
///
/// Returns the canonical optimal offer (see module docs for the tie-break).
/// An infeasible problem — no input sequence satisfies the hard temperature
/// band and the switching budget — is not an error: the result carries
/// `feasible = false`, an empty window and an infinite objective.
pub fn assess(problem: &AssessmentProblem) -> Result<AssessmentResult, AssessError> {
    validate(problem)?;

    let n = problem.horizon;
    let stage_costs: Vec<f64> = if problem.include_operating_cost {
        problem
            .price_forecast
            .iter()
            .map(|&e| stage_cost_on(e, &problem.params))
            .collect()
    } else {
        vec![0.0; n]
    };
    let mut prefix = Vec::with_capacity(1 + problem.input_history.len());
    prefix.push(problem.u_init);
    prefix.extend_from_slice(&problem.input_history);
    let si = problem.params.si_fine(problem.predict_substeps);
    let windows = candidate_windows(&problem.assess_range);

    let solve_window = |window: &Range<usize>, bound: f64| {
        let mut pins = vec![None; n];
        for t in window.clone() {
            pins[t] = Some(false);
        }
        let offset = -(problem.lambda * window.len() as f64);
        let sp = SearchProblem {
            n,
            pins: &pins,
            prefix: &prefix,
            state0: problem.state0,
            demand: &problem.demand_forecast,
            stage_cost_on: &stage_costs,
            temp: &problem.constraints.temperature,
            budget: &problem.constraints.switching,
            si,
            substeps: problem.predict_substeps,
            cost_model: CostModel::Hard,
            objective_offset: offset,
        };
        best_plan(&sp, bound)
    };

    // Solve every candidate window, keeping the first strict optimum in
    // canonical order. Sequentially the incumbent objective doubles as the
    // bound for later windows; in parallel each window is solved to its own
    // optimum first. Both yield the same winner.
    let mut best: Option<(Range<usize>, Candidate)> = None;
    let mut empty_window_violation = None;
    if problem.parallel {
        let outcomes: Vec<_> = windows
            .par_iter()
            .map(|w| solve_window(w, f64::INFINITY))
            .collect();
        for (window, outcome) in windows.iter().zip(outcomes) {
            if window.is_empty() {
                empty_window_violation = outcome.first_violation;
            }
            if let Some(cand) = outcome.best {
                let improves = match &best {
                    None => true,
                    Some((_, incumbent)) => cand.objective < incumbent.objective,
                };
                if improves {
                    best = Some((window.clone(), cand));
                }
            }
        }
    } else {
        for window in &windows {
            let bound = best
                .as_ref()
                .map_or(f64::INFINITY, |(_, incumbent)| incumbent.objective);
            let outcome = solve_window(window, bound);
            if window.is_empty() {
                empty_window_violation = outcome.first_violation;
            }
            if let Some(cand) = outcome.best {
                best = Some((window.clone(), cand));
            }
        }
    }

    match best {
        Some((window_range, cand)) => {
            let window = FlexibilityWindow {
                steps: window_range.collect(),
                assess_period: problem.assess_range.clone().collect(),
            };
            verify_offer(problem, &window, &cand.plan)?;
            let per_step_cost = cand
                .plan
                .iter()
                .zip(&stage_costs)
                .map(|(&u, &c)| if u { c } else { 0.0 })
                .collect();
            Ok(AssessmentResult {
                window,
                plan_u: cand.plan,
                objective: cand.objective,
                per_step_cost,
                feasible: true,
                blocking: None,
            })
        }
        None => Ok(AssessmentResult {
            window: FlexibilityWindow::empty(problem.assess_range.clone().collect()),
            plan_u: Vec::new(),
            objective: f64::INFINITY,
            per_step_cost: Vec::new(),
            feasible: false,
            blocking: empty_window_violation,
        }),
    }
}

/// Largest feasible window regardless of prices or reward rate.
///
/// Equivalent to an assessment with operating cost disabled and any
/// positive reward rate: the objective degenerates to window size, so the
/// canonical tie-break picks the largest, earliest window.
pub fn max_flex_window(problem: &AssessmentProblem) -> Result<AssessmentResult, AssessError> {
    let mut sized = problem.clone();
    sized.include_operating_cost = false;
    sized.lambda = 1.0;
    assess(&sized)
}

/// Defensive post-check: the offer coming out of the search must satisfy
/// everything it promises when re-verified through the public model and
/// constraint functions. A failure here is a planner bug, not a user error.
fn verify_offer(
    problem: &AssessmentProblem,
    window: &FlexibilityWindow,
    plan: &[bool],
) -> Result<(), AssessError> {
    assert!(
        window.is_contiguous(),
        "planner offered a non-contiguous window: {:?}",
        window.steps
    );
    assert!(
        window.steps.iter().all(|t| problem.assess_range.contains(t)),
        "planner offered steps outside the assessment period"
    );
    assert!(
        window.steps.iter().all(|&t| !plan[t]),
        "planner offered a window but plans to run inside it"
    );
    let states = rollout_fine(
        &problem.state0,
        plan,
        *prefix_last(problem),
        &problem.demand_forecast,
        &problem.params,
        problem.predict_substeps,
    )?;
    assert!(
        states
            .iter()
            .all(|s| problem.constraints.temperature.zero_slack_ok(s)),
        "planned trajectory leaves the certified temperature band"
    );
    let mut seq = Vec::with_capacity(1 + problem.input_history.len() + plan.len());
    seq.push(problem.u_init);
    seq.extend_from_slice(&problem.input_history);
    seq.extend_from_slice(plan);
    let first_plan_index = seq.len() - plan.len();
    assert!(
        (first_plan_index..seq.len())
            .all(|at| switch_ok(&seq, at, &problem.constraints.switching)),
        "planned inputs exceed the switching budget"
    );
    Ok(())
}

fn prefix_last(problem: &AssessmentProblem) -> &bool {
    problem.input_history.last().unwrap_or(&problem.u_init)
}
