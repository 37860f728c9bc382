//! Constraint kernel shared by the planners: temperature bands and their
//! slack relaxation, the sliding-window switching budget, and the binary
//! logic that ties the heat-pump command to a declared flexibility window.
//!
//! Everything here is a small pure function over plain data; the planners
//! and the exhaustive reference solver both build on these predicates, so
//! they are tested exhaustively where the domain allows it.

use thiserror::Error;

use crate::model::StateVector;

/// Errors from validating constraint specifications.
#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("temperature bounds must satisfy hard low < soft low < hard high, got {low} < {soft} < {high}")]
    BadTemperatureOrder { low: f64, soft: f64, high: f64 },
    #[error("monitored state index {0} out of range (expected 0..8)")]
    BadStateIndex(usize),
    #[error("switching budget must have window length >= 1 and allowance >= 1, got m={window_m}, allowance={max_switches}")]
    BadSwitchBudget { window_m: usize, max_switches: usize },
    #[error("flexibility logic sequences must share one length, got u={u}, s={s}, z={z}")]
    LogicLengthMismatch { u: usize, s: usize, z: usize },
    #[error("window indicator has {indicator} entries but the assessment period has {period}")]
    WindowLengthMismatch { indicator: usize, period: usize },
}

// ---------------------------------------------------------------------------
// Temperature band
// ---------------------------------------------------------------------------

/// Bounds on the monitored storage temperature.
///
/// The hard band is a physical operating range that plans must never leave;
/// the soft floor is a comfort target that may be traded off against cost
/// through a penalty. The monitored temperature is a single state component,
/// by default the top storage layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureConstraintSpec {
    /// Hard lower bound, °C.
    pub t_low_hard: f64,
    /// Hard upper bound, °C.
    pub t_high_hard: f64,
    /// Soft (comfort) lower bound, °C; must sit inside the hard band.
    pub t_low_soft: f64,
    /// Index into the state vector of the monitored temperature.
    pub monitored_index: usize,
}

impl Default for TemperatureConstraintSpec {
    fn default() -> Self {
        TemperatureConstraintSpec {
            t_low_hard: 55.0,
            t_high_hard: 75.0,
            t_low_soft: 60.0,
            monitored_index: 2,
        }
    }
}

impl TemperatureConstraintSpec {
    pub fn validate(&self) -> Result<(), ConstraintError> {
        if !(self.t_low_hard < self.t_low_soft && self.t_low_soft < self.t_high_hard) {
            return Err(ConstraintError::BadTemperatureOrder {
                low: self.t_low_hard,
                soft: self.t_low_soft,
                high: self.t_high_hard,
            });
        }
        if self.monitored_index >= 8 {
            return Err(ConstraintError::BadStateIndex(self.monitored_index));
        }
        Ok(())
    }

    /// The monitored temperature of a state.
    pub fn monitored(&self, state: &StateVector) -> f64 {
        state.0[self.monitored_index]
    }

    /// Whether a state satisfies the hard band.
    pub fn hard_ok(&self, state: &StateVector) -> bool {
        let t = self.monitored(state);
        t >= self.t_low_hard && t <= self.t_high_hard
    }

    /// Whether a state satisfies the tightest band, i.e. would require zero
    /// slack on both the hard box and the comfort floor.
    ///
    /// Flexibility offers are certified against this band rather than the
    /// hard box alone: an off-window promise is only useful if a dispatcher
    /// that honors it can still achieve zero slack, and the comfort floor sits
    /// above the hard lower bound.
    pub fn zero_slack_ok(&self, state: &StateVector) -> bool {
        let t = self.monitored(state);
        t >= self.t_low_soft && t <= self.t_high_hard
    }
}

// ---------------------------------------------------------------------------
// Switching budget
// ---------------------------------------------------------------------------

/// Limit on input transitions inside every sliding window of `window_m`
/// consecutive steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchBudget {
    /// Window length in steps.
    pub window_m: usize,
    /// Maximum number of 0/1 transitions allowed within one window.
    pub max_switches: usize,
}

impl Default for SwitchBudget {
    fn default() -> Self {
        SwitchBudget { window_m: 8, max_switches: 1 }
    }
}

impl SwitchBudget {
    pub fn validate(&self) -> Result<(), ConstraintError> {
        if self.window_m < 1 || self.max_switches < 1 {
            return Err(ConstraintError::BadSwitchBudget {
                window_m: self.window_m,
                max_switches: self.max_switches,
            });
        }
        Ok(())
    }
}

/// The full constraint configuration shared by the planners: temperature
/// band plus switching budget.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintSet {
    pub temperature: TemperatureConstraintSpec,
    pub switching: SwitchBudget,
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<(), ConstraintError> {
        self.temperature.validate()?;
        self.switching.validate()
    }
}

/// Number of transitions in the window of `budget.window_m` steps ending at
/// `seq[at]`.
///
/// The window covers the `window_m` adjacent pairs ending at `at`. Positions
/// before the start of `seq` are read as `seq[0]`, i.e. the sequence is
/// treated as constant before its first entry. Callers that track an input
/// history should therefore pass the history (oldest first) concatenated
/// with the plan, so that the pad value is the oldest known input.
///
/// # Panics
///
/// Panics if `seq` is empty or `at >= seq.len()`.
pub fn switch_count(seq: &[bool], at: usize, budget: &SwitchBudget) -> usize {
    assert!(at < seq.len(), "switch_count position {at} out of range");
    let read = |i: isize| -> bool {
        if i < 0 {
            seq[0]
        } else {
            seq[i as usize]
        }
    };
    let at = at as isize;
    (0..budget.window_m as isize)
        .filter(|k| read(at - k) != read(at - k - 1))
        .count()
}

/// Whether the window ending at `seq[at]` respects the budget.
pub fn switch_ok(seq: &[bool], at: usize, budget: &SwitchBudget) -> bool {
    switch_count(seq, at, budget) <= budget.max_switches
}

// ---------------------------------------------------------------------------
// Slack relaxation
// ---------------------------------------------------------------------------

/// Scalar slacks relaxing the temperature band over a whole trajectory.
///
/// `delta1` widens the hard band symmetrically (one scalar covers both the
/// floor and the ceiling); `delta2` lowers the comfort floor. Both are
/// non-negative by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlackPair {
    pub delta1: f64,
    pub delta2: f64,
}

impl SlackPair {
    pub const ZERO: SlackPair = SlackPair { delta1: 0.0, delta2: 0.0 };

    pub fn is_zero(&self) -> bool {
        self.delta1 == 0.0 && self.delta2 == 0.0
    }

    /// Componentwise maximum; used to accumulate slack along a trajectory.
    pub fn max(self, other: SlackPair) -> SlackPair {
        SlackPair {
            delta1: self.delta1.max(other.delta1),
            delta2: self.delta2.max(other.delta2),
        }
    }
}

/// Slack needed by a single state: how far the monitored temperature sits
/// outside the hard band (`delta1`) and below the comfort floor (`delta2`).
pub fn slack_of_state(state: &StateVector, spec: &TemperatureConstraintSpec) -> SlackPair {
    let t = spec.monitored(state);
    SlackPair {
        delta1: 0f64.max(spec.t_low_hard - t).max(t - spec.t_high_hard),
        delta2: 0f64.max(spec.t_low_soft - t),
    }
}

/// Minimal scalar slacks that make a whole trajectory satisfy the relaxed
/// band: the componentwise maximum of the per-state slacks.
///
/// # Panics
///
/// Panics on an empty trajectory; a plan always has at least one successor
/// state.
pub fn slack_requirement(
    trajectory: &[StateVector],
    spec: &TemperatureConstraintSpec,
) -> SlackPair {
    assert!(!trajectory.is_empty(), "slack_requirement needs at least one state");
    trajectory
        .iter()
        .map(|s| slack_of_state(s, spec))
        .fold(SlackPair::ZERO, SlackPair::max)
}

// ---------------------------------------------------------------------------
// Flexibility-window logic
// ---------------------------------------------------------------------------

/// The three binary sequences of a flexibility commitment over an assessment
/// period: the heat-pump command `u`, the window indicator `s`, and the
/// after-window latch `z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlexLogicTriple {
    pub u: Vec<bool>,
    pub s: Vec<bool>,
    pub z: Vec<bool>,
}

impl FlexLogicTriple {
    pub fn validate(&self) -> Result<(), ConstraintError> {
        if self.u.len() != self.s.len() || self.s.len() != self.z.len() {
            return Err(ConstraintError::LogicLengthMismatch {
                u: self.u.len(),
                s: self.s.len(),
                z: self.z.len(),
            });
        }
        Ok(())
    }
}

/// The four rule families tying the window indicator and latch together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlexRule {
    /// The heat pump is commanded on at an index inside the window.
    OnInsideWindow,
    /// The window indicator fell without raising the after-window latch.
    WindowEndsWithoutLatch,
    /// Window indicator and after-window latch are set at the same index.
    WindowOverlapsLatch,
    /// The after-window latch dropped back to zero.
    LatchNotMonotone,
}

/// A single rule violation at an index (for pairwise rules, the first index
/// of the offending pair).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlexViolation {
    pub rule: FlexRule,
    pub index: usize,
}

/// Result of checking a [`FlexLogicTriple`] against all four rule families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlexCheck {
    pub violations: Vec<FlexViolation>,
}

impl FlexCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates the four linear rule families on a triple of binary sequences:
///
/// 1. `u[t] + s[t] <= 1` — the pump is off wherever the window is declared;
/// 2. `s[t+1] >= s[t] - z[t+1]` — a window may only end by raising the latch;
/// 3. `s[t] + z[t] <= 1` — window and latch are mutually exclusive;
/// 4. `z[t+1] >= z[t]` — the latch never falls.
///
/// Together these force the declared window to be one contiguous block of
/// off-steps. All violations are reported, not just the first.
pub fn check_flex_logic(triple: &FlexLogicTriple) -> Result<FlexCheck, ConstraintError> {
    triple.validate()?;
    let n = triple.u.len();
    let mut violations = Vec::new();
    for t in 0..n {
        if triple.u[t] && triple.s[t] {
            violations.push(FlexViolation { rule: FlexRule::OnInsideWindow, index: t });
        }
        if triple.s[t] && triple.z[t] {
            violations.push(FlexViolation { rule: FlexRule::WindowOverlapsLatch, index: t });
        }
    }
    for t in 0..n.saturating_sub(1) {
        if triple.s[t] && !triple.s[t + 1] && !triple.z[t + 1] {
            violations.push(FlexViolation {
                rule: FlexRule::WindowEndsWithoutLatch,
                index: t,
            });
        }
        if triple.z[t] && !triple.z[t + 1] {
            violations.push(FlexViolation { rule: FlexRule::LatchNotMonotone, index: t });
        }
    }
    Ok(FlexCheck { violations })
}

// ---------------------------------------------------------------------------
// Flexibility window
// ---------------------------------------------------------------------------

/// A committed flexibility window: the time indices at which the heat pump
/// is promised off, together with the assessment period the promise was made
/// over. Indices are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlexibilityWindow {
    /// Off-committed step indices (a contiguous block, possibly empty).
    pub steps: Vec<usize>,
    /// The assessment period the window was selected from.
    pub assess_period: Vec<usize>,
}

impl FlexibilityWindow {
    pub fn empty(assess_period: Vec<usize>) -> Self {
        FlexibilityWindow { steps: Vec::new(), assess_period }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.steps.binary_search(&t).is_ok()
    }

    /// Whether the committed steps form one contiguous run.
    pub fn is_contiguous(&self) -> bool {
        self.steps.windows(2).all(|w| w[1] == w[0] + 1)
    }

    /// Shifts all indices by `offset` (e.g. from horizon-relative to
    /// absolute simulation steps).
    pub fn shifted(&self, offset: usize) -> FlexibilityWindow {
        FlexibilityWindow {
            steps: self.steps.iter().map(|t| t + offset).collect(),
            assess_period: self.assess_period.iter().map(|t| t + offset).collect(),
        }
    }
}

/// Reads the flexibility window out of a window-indicator sequence: the
/// period indices at which the indicator is set.
///
/// `indicator[i]` refers to the i-th index of `assess_period`; both must
/// have the same length. The caller is responsible for the indicator being
/// logically valid (see [`check_flex_logic`]); this function just collects
/// the marked indices.
pub fn extract_flex_window(
    indicator: &[bool],
    assess_period: &[usize],
) -> Result<FlexibilityWindow, ConstraintError> {
    if indicator.len() != assess_period.len() {
        return Err(ConstraintError::WindowLengthMismatch {
            indicator: indicator.len(),
            period: assess_period.len(),
        });
    }
    let steps = assess_period
        .iter()
        .zip(indicator)
        .filter_map(|(&t, &on)| on.then_some(t))
        .collect();
    Ok(FlexibilityWindow { steps, assess_period: assess_period.to_vec() })
}
