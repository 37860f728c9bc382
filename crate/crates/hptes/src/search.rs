//! Exact depth-first search over binary input plans.
//!
//! Both planners reduce to the same question: among all on/off sequences of
//! a fixed length that respect some pinned positions and the switching
//! budget, which one minimizes an objective evaluated along the simulated
//! trajectory? The horizon lengths involved are small (a dozen steps), so
//! the search enumerates the binary tree depth-first with three prunes:
//!
//! * switching-budget violations (checked incrementally per step),
//! * hard temperature violations (in hard mode),
//! * an objective lower bound against the incumbent.
//!
//! The bound prune is only applied when it is exact in floating-point
//! arithmetic: accumulated cost plus accumulated penalties is a lower bound
//! on any completion *provided no remaining stage cost is negative* (adding
//! non-negative terms and growing max-slacks are both monotone under IEEE
//! rounding). When negative electricity prices appear in the remaining
//! horizon, the cost prune is skipped for that node so that results stay
//! bitwise identical to exhaustive enumeration.
//!
//! Plans are explored with `off` before `on`, so the first optimum found is
//! the lexicographically smallest one; later plans are only accepted on
//! strict improvement.

use crate::constraints::{
    slack_of_state, switch_ok, SlackPair, SwitchBudget, TemperatureConstraintSpec,
};
use crate::model::{step_unchecked, Disturbance, SiParams, StateVector};

/// Constraint family blamed for a pruned branch; reported when a whole
/// search comes up empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintFamily {
    Temperature,
    Switching,
}

impl std::fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstraintFamily::Temperature => write!(f, "temperature"),
            ConstraintFamily::Switching => write!(f, "switching"),
        }
    }
}

/// How trajectory quality enters the objective.
#[derive(Debug, Clone, Copy)]
pub(crate) enum CostModel {
    /// States outside the hard temperature band are infeasible.
    Hard,
    /// Band violations are priced: `m1` per degree outside the hard band,
    /// `m2` per degree below the comfort floor.
    Soft { m1: f64, m2: f64 },
}

/// One plan-search instance over a fixed horizon.
pub(crate) struct SearchProblem<'a> {
    /// Number of plan steps.
    pub n: usize,
    /// Pinned inputs (`Some`) and free positions (`None`), length `n`.
    pub pins: &'a [Option<bool>],
    /// Inputs applied before the plan, oldest first, never empty (the first
    /// entry doubles as the pad value for the switching window).
    pub prefix: &'a [bool],
    pub state0: StateVector,
    /// Forecast disturbances, length `n`.
    pub demand: &'a [Disturbance],
    /// Cost of running the heat pump in step `t`, length `n`.
    pub stage_cost_on: &'a [f64],
    pub temp: &'a TemperatureConstraintSpec,
    pub budget: &'a SwitchBudget,
    /// Per-substep step inputs (see `substeps`).
    pub si: SiParams,
    /// Euler sub-intervals used to advance one plan step; 1 reproduces the
    /// one-interval planning model exactly.
    pub substeps: usize,
    pub cost_model: CostModel,
    /// Constant added to every objective value (e.g. a window reward).
    pub objective_offset: f64,
}

/// A feasible plan and its objective value (offset included).
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub objective: f64,
    pub plan: Vec<bool>,
}

pub(crate) struct SearchOutcome {
    /// Best plan strictly better than the caller's bound, if any.
    pub best: Option<Candidate>,
    /// Family of the first constraint-pruned branch in visit order; `None`
    /// when no branch was cut by a constraint.
    pub first_violation: Option<ConstraintFamily>,
}

/// Runs the search. `bound` is an exclusive upper bound: only plans with a
/// strictly smaller objective are returned (pass `f64::INFINITY` for an
/// unconstrained search).
pub(crate) fn best_plan(problem: &SearchProblem<'_>, bound: f64) -> SearchOutcome {
    debug_assert_eq!(problem.pins.len(), problem.n);
    debug_assert_eq!(problem.demand.len(), problem.n);
    debug_assert_eq!(problem.stage_cost_on.len(), problem.n);
    debug_assert!(!problem.prefix.is_empty());
    debug_assert!(problem.substeps >= 1);

    // has_negative_cost_from[t]: any negative stage cost at index >= t.
    let mut has_negative_cost_from = vec![false; problem.n + 1];
    for t in (0..problem.n).rev() {
        has_negative_cost_from[t] =
            has_negative_cost_from[t + 1] || problem.stage_cost_on[t] < 0.0;
    }

    let mut dfs = Dfs {
        problem,
        seq: problem.prefix.to_vec(),
        states: vec![problem.state0],
        has_negative_cost_from,
        bound,
        best: None,
        first_violation: None,
    };
    dfs.visit(0, 0.0, SlackPair::ZERO);
    SearchOutcome { best: dfs.best, first_violation: dfs.first_violation }
}

struct Dfs<'a, 'b> {
    problem: &'a SearchProblem<'b>,
    /// Prefix plus the plan chosen so far.
    seq: Vec<bool>,
    /// `states[t]` is the state before plan step `t`.
    states: Vec<StateVector>,
    has_negative_cost_from: Vec<bool>,
    bound: f64,
    best: Option<Candidate>,
    first_violation: Option<ConstraintFamily>,
}

impl Dfs<'_, '_> {
    /// Objective of a (partial) path: running cost, plus penalties in soft
    /// mode, plus the constant offset. For completed plans this is the exact
    /// objective; for partial ones it is an exact lower bound whenever no
    /// remaining stage cost is negative.
    fn value(&self, elec: f64, slack: SlackPair) -> f64 {
        let core = match self.problem.cost_model {
            CostModel::Hard => elec,
            CostModel::Soft { m1, m2 } => (elec + m1 * slack.delta1) + m2 * slack.delta2,
        };
        core + self.problem.objective_offset
    }

    fn record_violation(&mut self, family: ConstraintFamily) {
        if self.first_violation.is_none() {
            self.first_violation = Some(family);
        }
    }

    fn visit(&mut self, t: usize, elec: f64, slack: SlackPair) {
        let p = self.problem;
        if t == p.n {
            let objective = self.value(elec, slack);
            if objective < self.bound {
                self.bound = objective;
                let plan = self.seq[p.prefix.len()..].to_vec();
                self.best = Some(Candidate { objective, plan });
            }
            return;
        }

        let options: &[bool] = match p.pins[t] {
            Some(false) => &[false],
            Some(true) => &[true],
            None => &[false, true],
        };
        for &u in options {
            self.seq.push(u);
            if !switch_ok(&self.seq, self.seq.len() - 1, p.budget) {
                self.record_violation(ConstraintFamily::Switching);
                self.seq.pop();
                continue;
            }
            let u_prev = self.seq[self.seq.len() - 2];
            let mut next = *self.states.last().unwrap();
            let mut prev = u_prev;
            for _ in 0..p.substeps {
                next = step_unchecked(&next, u, prev, &p.demand[t], &p.si);
                prev = u;
            }
            let next_slack = match p.cost_model {
                CostModel::Hard => {
                    // Hard mode certifies offers, so it enforces the tightest
                    // band: a promise must remain dispatchable at zero slack.
                    if !p.temp.zero_slack_ok(&next) {
                        self.record_violation(ConstraintFamily::Temperature);
                        self.seq.pop();
                        continue;
                    }
                    SlackPair::ZERO
                }
                CostModel::Soft { .. } => slack.max(slack_of_state(&next, p.temp)),
            };
            let next_elec = if u { elec + p.stage_cost_on[t] } else { elec };
            // Bound prune, only where exact (see module docs).
            if !self.has_negative_cost_from[t + 1]
                && self.value(next_elec, next_slack) >= self.bound
            {
                self.seq.pop();
                continue;
            }
            self.states.push(next);
            self.visit(t + 1, next_elec, next_slack);
            self.states.pop();
            self.seq.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlantParameters;

    fn tiny_problem_parts() -> (PlantParameters, StateVector, Vec<Disturbance>, Vec<f64>) {
        let p = PlantParameters::nominal(10_000.0);
        let s0 = StateVector([60.0, 55.0, 68.0, 66.0, 64.0, 62.0, 60.0, 56.0]);
        let demand = vec![Disturbance::draw(200.0); 4];
        let cost = vec![0.4, 0.1, 0.3, 0.2];
        (p, s0, demand, cost)
    }

    #[test]
    fn finds_all_off_plan_when_costs_are_positive_and_band_is_loose() {
        let (p, s0, demand, cost) = tiny_problem_parts();
        let temp = TemperatureConstraintSpec {
            t_low_hard: 5.0,
            t_low_soft: 6.0,
            t_high_hard: 99.0,
            monitored_index: 2,
        };
        let budget = SwitchBudget::default();
        let pins = vec![None; 4];
        let prefix = vec![false];
        let problem = SearchProblem {
            n: 4,
            pins: &pins,
            prefix: &prefix,
            state0: s0,
            demand: &demand,
            stage_cost_on: &cost,
            temp: &temp,
            budget: &budget,
            si: p.si(),
            substeps: 1,
            cost_model: CostModel::Hard,
            objective_offset: 0.0,
        };
        let outcome = best_plan(&problem, f64::INFINITY);
        let best = outcome.best.expect("loose band must be feasible");
        assert_eq!(best.plan, vec![false; 4], "all-off is cheapest at positive prices");
        assert_eq!(best.objective, 0.0);
    }

    #[test]
    fn respects_pins() {
        let (p, s0, demand, cost) = tiny_problem_parts();
        let temp = TemperatureConstraintSpec {
            t_low_hard: 5.0,
            t_low_soft: 6.0,
            t_high_hard: 99.0,
            monitored_index: 2,
        };
        let budget = SwitchBudget { window_m: 2, max_switches: 2 };
        let pins = vec![None, Some(true), None, Some(true)];
        let prefix = vec![true];
        let problem = SearchProblem {
            n: 4,
            pins: &pins,
            prefix: &prefix,
            state0: s0,
            demand: &demand,
            stage_cost_on: &cost,
            temp: &temp,
            budget: &budget,
            si: p.si(),
            substeps: 1,
            cost_model: CostModel::Hard,
            objective_offset: 0.0,
        };
        let outcome = best_plan(&problem, f64::INFINITY);
        let best = outcome.best.expect("pins alone cannot be infeasible here");
        assert!(best.plan[1] && best.plan[3], "pinned positions must be honored");
    }

    #[test]
    fn reports_switching_as_blocking_family() {
        let (p, s0, demand, cost) = tiny_problem_parts();
        let temp = TemperatureConstraintSpec {
            t_low_hard: 5.0,
            t_low_soft: 6.0,
            t_high_hard: 99.0,
            monitored_index: 2,
        };
        // Budget of one switch per two steps, but pins force u = (1,0,1,...):
        // impossible.
        let budget = SwitchBudget { window_m: 2, max_switches: 1 };
        let pins = vec![Some(true), Some(false), Some(true), Some(false)];
        let prefix = vec![false];
        let problem = SearchProblem {
            n: 4,
            pins: &pins,
            prefix: &prefix,
            state0: s0,
            demand: &demand,
            stage_cost_on: &cost,
            temp: &temp,
            budget: &budget,
            si: p.si(),
            substeps: 1,
            cost_model: CostModel::Hard,
            objective_offset: 0.0,
        };
        let outcome = best_plan(&problem, f64::INFINITY);
        assert!(outcome.best.is_none());
        assert_eq!(outcome.first_violation, Some(ConstraintFamily::Switching));
    }
}
