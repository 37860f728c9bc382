//! Exhaustive reference implementations of both planners.
//!
//! These enumerate every binary input sequence of the horizon, apply the
//! constraint predicates and objectives directly, and keep the first strict
//! optimum in canonical order. No pruning, no incremental state — just the
//! problem definition spelled out. The fast planners are required to agree
//! with these bitwise (same window, same plan, same objective), which is
//! what the differential tests assert. Practical up to roughly twenty
//! steps.
//!
//! Shared with the fast path are only *definitions*: the plant step, the
//! constraint predicates, the stage-cost formula, and the canonical window
//! order — each of which is pinned by its own unit tests.

use crate::assess::{
    candidate_windows, stage_cost_on, AssessError, AssessmentProblem, AssessmentResult,
    ConstraintFamily,
};
use crate::constraints::{slack_requirement, switch_ok, FlexibilityWindow};
use crate::dispatch::{DispatchError, DispatchProblem, DispatchResult};
use crate::model::rollout_fine;

/// Hard ceiling on exhaustive enumeration (2^24 rollouts is already far
/// beyond interactive use).
const MAX_EXHAUSTIVE_STEPS: usize = 24;

struct PlanEval {
    plan: Vec<bool>,
    switching_ok: bool,
    certified_temp_ok: bool,
    electricity_cost: f64,
    trajectory: Vec<crate::model::StateVector>,
}

/// All 2^n plans in lexicographic order (off < on), each rolled out and
/// labeled with feasibility and cost.
fn enumerate_plans(
    n: usize,
    state0: &crate::model::StateVector,
    u_init: bool,
    history: &[bool],
    demand: &[crate::model::Disturbance],
    stage_costs: &[f64],
    constraints: &crate::constraints::ConstraintSet,
    params: &crate::model::PlantParameters,
    substeps: usize,
) -> Result<Vec<PlanEval>, crate::model::ModelError> {
    assert!(
        n <= MAX_EXHAUSTIVE_STEPS,
        "exhaustive reference limited to {MAX_EXHAUSTIVE_STEPS} steps, got {n}"
    );
    let mut prefix = Vec::with_capacity(1 + history.len());
    prefix.push(u_init);
    prefix.extend_from_slice(history);
    let u_before_plan = *prefix.last().unwrap();

    let mut evals = Vec::with_capacity(1usize << n);
    for mask in 0..(1usize << n) {
        // Bit 0 of the plan is the most significant bit of the counter, so
        // ascending masks enumerate plans in lexicographic order.
        let plan: Vec<bool> = (0..n).map(|t| mask >> (n - 1 - t) & 1 == 1).collect();
        let mut seq = prefix.clone();
        seq.extend_from_slice(&plan);
        let switching_ok = (prefix.len()..seq.len())
            .all(|at| switch_ok(&seq, at, &constraints.switching));
        let trajectory = rollout_fine(state0, &plan, u_before_plan, demand, params, substeps)?;
        let certified_temp_ok = trajectory
            .iter()
            .all(|s| constraints.temperature.zero_slack_ok(s));
        let mut electricity_cost = 0.0;
        for t in 0..n {
            if plan[t] {
                electricity_cost += stage_costs[t];
            }
        }
        evals.push(PlanEval { plan, switching_ok, certified_temp_ok, electricity_cost, trajectory });
    }
    Ok(evals)
}

/// Exhaustive counterpart of [`crate::assess::assess`].
pub fn assess_exhaustive(
    problem: &AssessmentProblem,
) -> Result<AssessmentResult, AssessError> {
    let n = problem.horizon;
    if n == 0 {
        return Err(AssessError::EmptyHorizon);
    }
    if !(problem.lambda.is_finite() && problem.lambda >= 0.0) {
        return Err(AssessError::BadLambda(problem.lambda));
    }
    if problem.predict_substeps == 0 {
        return Err(AssessError::BadSubsteps);
    }
    problem.params.validate()?;
    problem.constraints.validate()?;
    if problem.assess_range.end > n || problem.assess_range.start > problem.assess_range.end {
        return Err(AssessError::BadAssessRange {
            start: problem.assess_range.start,
            end: problem.assess_range.end,
            horizon: n,
        });
    }
    if problem.demand_forecast.len() != n {
        return Err(AssessError::LengthMismatch {
            what: "demand forecast",
            expected: n,
            got: problem.demand_forecast.len(),
        });
    }
    if problem.price_forecast.len() != n {
        return Err(AssessError::LengthMismatch {
            what: "price forecast",
            expected: n,
            got: problem.price_forecast.len(),
        });
    }

    let stage_costs: Vec<f64> = if problem.include_operating_cost {
        problem
            .price_forecast
            .iter()
            .map(|&e| stage_cost_on(e, &problem.params))
            .collect()
    } else {
        vec![0.0; n]
    };
    let evals = enumerate_plans(
        n,
        &problem.state0,
        problem.u_init,
        &problem.input_history,
        &problem.demand_forecast,
        &stage_costs,
        &problem.constraints,
        &problem.params,
        problem.predict_substeps,
    )?;

    let mut best: Option<(std::ops::Range<usize>, &PlanEval, f64)> = None;
    for window in candidate_windows(&problem.assess_range) {
        for eval in &evals {
            if !eval.switching_ok || !eval.certified_temp_ok {
                continue;
            }
            if window.clone().any(|t| eval.plan[t]) {
                continue;
            }
            let objective =
                eval.electricity_cost - problem.lambda * window.len() as f64;
            let improves = match &best {
                None => true,
                Some((_, _, incumbent)) => objective < *incumbent,
            };
            if improves {
                best = Some((window.clone(), eval, objective));
            }
        }
    }

    match best {
        Some((window_range, eval, objective)) => Ok(AssessmentResult {
            window: FlexibilityWindow {
                steps: window_range.collect(),
                assess_period: problem.assess_range.clone().collect(),
            },
            plan_u: eval.plan.clone(),
            objective,
            per_step_cost: eval
                .plan
                .iter()
                .zip(&stage_costs)
                .map(|(&u, &c)| if u { c } else { 0.0 })
                .collect(),
            feasible: true,
            blocking: None,
        }),
        None => {
            let blocking = if evals.iter().all(|e| !e.switching_ok) {
                Some(ConstraintFamily::Switching)
            } else {
                Some(ConstraintFamily::Temperature)
            };
            Ok(AssessmentResult {
                window: FlexibilityWindow::empty(problem.assess_range.clone().collect()),
                plan_u: Vec::new(),
                objective: f64::INFINITY,
                per_step_cost: Vec::new(),
                feasible: false,
                blocking,
            })
        }
    }
}

/// Exhaustive counterpart of [`crate::dispatch::dispatch`].
pub fn dispatch_exhaustive(
    problem: &DispatchProblem,
) -> Result<DispatchResult, DispatchError> {
    let n = problem.horizon;
    if n == 0 {
        return Err(DispatchError::EmptyHorizon);
    }
    if problem.demand_forecast.len() != n {
        return Err(DispatchError::LengthMismatch {
            what: "demand forecast",
            expected: n,
            got: problem.demand_forecast.len(),
        });
    }
    if problem.price_forecast.len() != n {
        return Err(DispatchError::LengthMismatch {
            what: "price forecast",
            expected: n,
            got: problem.price_forecast.len(),
        });
    }
    if let Some(&index) = problem.request.iter().find(|&&t| t >= n) {
        return Err(DispatchError::PinOutOfRange { index, horizon: n });
    }
    let (m1, m2) = (problem.m1_penalty, problem.m2_penalty);
    if !(m1.is_finite() && m1 > 0.0 && m2.is_finite() && m2 > 0.0) {
        return Err(DispatchError::BadPenalties { m1, m2 });
    }
    if problem.predict_substeps == 0 {
        return Err(DispatchError::BadSubsteps);
    }
    problem.params.validate()?;
    problem.constraints.validate()?;

    let stage_costs: Vec<f64> = problem
        .price_forecast
        .iter()
        .map(|&e| stage_cost_on(e, &problem.params))
        .collect();
    let evals = enumerate_plans(
        n,
        &problem.state0,
        problem.u_init,
        &problem.input_history,
        &problem.demand_forecast,
        &stage_costs,
        &problem.constraints,
        &problem.params,
        problem.predict_substeps,
    )?;

    let mut best: Option<(&PlanEval, f64)> = None;
    for eval in &evals {
        if !eval.switching_ok {
            continue;
        }
        if problem.request.iter().any(|&t| eval.plan[t]) {
            continue;
        }
        let slacks = slack_requirement(&eval.trajectory, &problem.constraints.temperature);
        let objective = (eval.electricity_cost + problem.m1_penalty * slacks.delta1)
            + problem.m2_penalty * slacks.delta2;
        let improves = match &best {
            None => true,
            Some((_, incumbent)) => objective < *incumbent,
        };
        if improves {
            best = Some((eval, objective));
        }
    }

    let Some((eval, objective)) = best else {
        return Err(DispatchError::NoFeasiblePlan);
    };
    Ok(DispatchResult {
        plan_u: eval.plan.clone(),
        slacks: slack_requirement(&eval.trajectory, &problem.constraints.temperature),
        objective,
        trajectory: eval.trajectory.clone(),
    })
}
