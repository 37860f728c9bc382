//! Discrete-time model of a heat pump charging a stratified two-tank storage.
//!
//! The plant is described by eight temperature states advanced with a forward
//! Euler scheme: the heat-pump supply pipe (`x1`), the mixed return into the
//! heat exchanger (`x2`), and six storage layers from the hot top (`x3`) to
//! the cold bottom (`x8`). The single control input is the on/off state of
//! the heat pump; the disturbance is the hot-water draw taken from the top of
//! the tank. Parameters are stored in the units they are usually reported in
//! (hours, kg/h, degrees Celsius); all step arithmetic happens in SI units
//! after a single conversion.

use thiserror::Error;

/// Errors raised by the plant model.
#[derive(Debug, Error)]
pub enum ModelError {
    /// A parameter set failed validation. The message names the field and the
    /// expected range/unit.
    #[error("invalid plant parameters: {0}")]
    InvalidParameters(String),
    /// A hot-water draw outside the physically meaningful range for this
    /// plant (the draw is pumped through the primary circuit, so it can never
    /// exceed the primary flow).
    #[error("hot-water draw {mdot_s_kg_h} kg/h outside [0, {mdot_p_kg_h}] kg/h")]
    DisturbanceOutOfRange { mdot_s_kg_h: f64, mdot_p_kg_h: f64 },
    /// Input and disturbance sequences passed to [`rollout`] differ in length.
    #[error("input sequence has {inputs} entries but disturbance sequence has {disturbances}")]
    LengthMismatch { inputs: usize, disturbances: usize },
    /// A rollout failed at a specific step.
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<ModelError>,
    },
}

/// Which variant of the layer update equations to use.
///
/// The middle-layer updates exist in two shapes: `Corrected` anchors each
/// layer update on the layer's own previous temperature (physically
/// consistent, conserves enthalpy under pure conduction), while `Literal`
/// anchors layers four and five on the layer two positions below, which
/// breaks conservation. `Literal` is kept selectable for reproducing results
/// derived from the uncorrected equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelVariant {
    #[default]
    Corrected,
    Literal,
}

/// Physical parameters of the heat pump / storage plant.
///
/// Field units follow the conventions the values are reported in:
/// temperatures and temperature differences in °C/K, masses in kg, mass flow
/// rates in kg/h, thermal conductances in W/K, the sampling interval in
/// hours, and the rated electrical power in W. [`step`] converts to SI
/// internally (exactly once, see `SiParams`).
#[derive(Debug, Clone, PartialEq)]
pub struct PlantParameters {
    /// Sampling interval in hours.
    pub dt_hours: f64,
    /// Specific heat capacity of water, J/(kg·K).
    pub cp: f64,
    /// Conductance from the supply pipe to ambient, W/K.
    pub r_pipe: f64,
    /// Conductance from the supply pipe to the top storage layer, W/K.
    pub r_pipe_upper: f64,
    /// Conductance from the supply pipe to the tank bottom, W/K.
    pub r_pipe_bottom: f64,
    /// Inter-layer conductances between adjacent storage layers, W/K.
    pub r12: f64,
    pub r23: f64,
    pub r34: f64,
    pub r45: f64,
    pub r56: f64,
    /// Water mass sitting in the supply pipe, kg.
    pub m_pipe: f64,
    /// Water masses of the six storage layers (top to bottom), kg.
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub m6: f64,
    /// Temperature lift across the condenser-side heat exchanger, K.
    pub dt_he: f64,
    /// Temperature spread credited to the consumer circuit, K.
    pub dt_c: f64,
    /// Cold supply (mains) water temperature, °C.
    pub t_s: f64,
    /// Top-layer temperature drop observed on a switch-off event, K.
    pub dt_off: f64,
    /// Ambient temperature around the supply pipe, °C.
    pub t_amb: f64,
    /// Consumer-circuit mass flow rate, kg/h.
    pub mdot_c_kg_h: f64,
    /// Primary (charging) circuit mass flow rate, kg/h.
    pub mdot_p_kg_h: f64,
    /// COP regression coefficients: `cop = a1 + a2·T_in + a3·T_amb + a4·T_in·T_amb`.
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    /// Rated electrical power draw of the heat pump when running, W.
    pub p_rated_w: f64,
    /// Which layer-update equations to use.
    pub variant: ModelVariant,
}

impl PlantParameters {
    /// Identified parameter set of the reference plant. Only the rated
    /// electrical power is site-specific and must be supplied.
    pub fn nominal(p_rated_w: f64) -> Self {
        PlantParameters {
            dt_hours: 1.0 / 3.0,
            cp: 4186.0,
            r_pipe: 0.30,
            r_pipe_upper: 0.0,
            r_pipe_bottom: 2.0,
            r12: 0.24,
            r23: 0.24,
            r34: 0.49,
            r45: 0.54,
            r56: 0.53,
            m_pipe: 3.27,
            m1: 250.0,
            m2: 250.0,
            m3: 169.66,
            m4: 95.38,
            m5: 136.67,
            m6: 98.29,
            dt_he: 2.84,
            dt_c: 1.76,
            t_s: 13.0,
            dt_off: 2.5,
            t_amb: 18.5,
            mdot_c_kg_h: 1100.0,
            mdot_p_kg_h: 880.0,
            a1: 3.3297,
            a2: -0.0423,
            a3: 0.0219,
            a4: 0.0003,
            p_rated_w,
            variant: ModelVariant::Corrected,
        }
    }

    /// Checks the structural invariants of the parameter set.
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("dt_hours", self.dt_hours),
            ("cp", self.cp),
            ("m_pipe", self.m_pipe),
            ("m1", self.m1),
            ("m2", self.m2),
            ("m3", self.m3),
            ("m4", self.m4),
            ("m5", self.m5),
            ("m6", self.m6),
            ("mdot_c_kg_h", self.mdot_c_kg_h),
            ("mdot_p_kg_h", self.mdot_p_kg_h),
            ("p_rated_w", self.p_rated_w),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParameters(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        let non_negative = [
            ("r_pipe", self.r_pipe),
            ("r_pipe_upper", self.r_pipe_upper),
            ("r_pipe_bottom", self.r_pipe_bottom),
            ("r12", self.r12),
            ("r23", self.r23),
            ("r34", self.r34),
            ("r45", self.r45),
            ("r56", self.r56),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParameters(format!(
                    "{name} must be finite and >= 0 W/K, got {v}"
                )));
            }
        }
        let finite = [
            ("dt_he", self.dt_he),
            ("dt_c", self.dt_c),
            ("t_s", self.t_s),
            ("dt_off", self.dt_off),
            ("t_amb", self.t_amb),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("a4", self.a4),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(ModelError::InvalidParameters(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        if self.mdot_p_kg_h > self.mdot_c_kg_h {
            return Err(ModelError::InvalidParameters(format!(
                "mdot_p_kg_h ({}) must not exceed mdot_c_kg_h ({}); the primary flow returns through the consumer circuit",
                self.mdot_p_kg_h, self.mdot_c_kg_h
            )));
        }
        Ok(())
    }

    pub(crate) fn si(&self) -> SiParams {
        SiParams::from_plant(self)
    }

    /// Step inputs for integrating one sampling interval with `substeps`
    /// equal Euler sub-intervals. `si_fine(1)` equals `si()` exactly.
    pub(crate) fn si_fine(&self, substeps: usize) -> SiParams {
        let mut fine = self.clone();
        fine.dt_hours = self.dt_hours / substeps as f64;
        fine.si()
    }
}

/// The same parameters converted to SI base units (seconds, kg/s, W, J).
///
/// This is the only place in the crate where kg/h becomes kg/s and hours
/// become seconds; everything downstream works on `SiParams`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SiParams {
    pub dt_s: f64,
    pub cp: f64,
    pub r_pipe: f64,
    pub r_pipe_upper: f64,
    pub r_pipe_bottom: f64,
    pub r12: f64,
    pub r23: f64,
    pub r34: f64,
    pub r45: f64,
    pub r56: f64,
    pub m_pipe: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub m6: f64,
    pub dt_he: f64,
    pub dt_c: f64,
    pub t_s: f64,
    pub dt_off: f64,
    pub t_amb: f64,
    pub mdot_c: f64,
    pub mdot_p: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub p_rated_w: f64,
    pub variant: ModelVariant,
}

/// Seconds per hour; also converts kg/h to kg/s.
pub(crate) const SECONDS_PER_HOUR: f64 = 3600.0;

impl SiParams {
    fn from_plant(p: &PlantParameters) -> Self {
        SiParams {
            dt_s: p.dt_hours * SECONDS_PER_HOUR,
            cp: p.cp,
            r_pipe: p.r_pipe,
            r_pipe_upper: p.r_pipe_upper,
            r_pipe_bottom: p.r_pipe_bottom,
            r12: p.r12,
            r23: p.r23,
            r34: p.r34,
            r45: p.r45,
            r56: p.r56,
            m_pipe: p.m_pipe,
            m1: p.m1,
            m2: p.m2,
            m3: p.m3,
            m4: p.m4,
            m5: p.m5,
            m6: p.m6,
            dt_he: p.dt_he,
            dt_c: p.dt_c,
            t_s: p.t_s,
            dt_off: p.dt_off,
            t_amb: p.t_amb,
            mdot_c: p.mdot_c_kg_h / SECONDS_PER_HOUR,
            mdot_p: p.mdot_p_kg_h / SECONDS_PER_HOUR,
            a1: p.a1,
            a2: p.a2,
            a3: p.a3,
            a4: p.a4,
            p_rated_w: p.p_rated_w,
            variant: p.variant,
        }
    }
}

/// The eight plant temperatures in °C.
///
/// `0`: supply pipe, `1`: heat-exchanger return, `2..=7`: storage layers top
/// to bottom. Helper accessors use the conventional one-based naming
/// (`x1()..x8()`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f64; 8]);

impl StateVector {
    pub fn x1(&self) -> f64 {
        self.0[0]
    }
    pub fn x2(&self) -> f64 {
        self.0[1]
    }
    pub fn x3(&self) -> f64 {
        self.0[2]
    }
    pub fn x4(&self) -> f64 {
        self.0[3]
    }
    pub fn x5(&self) -> f64 {
        self.0[4]
    }
    pub fn x6(&self) -> f64 {
        self.0[5]
    }
    pub fn x7(&self) -> f64 {
        self.0[6]
    }
    pub fn x8(&self) -> f64 {
        self.0[7]
    }

    /// All temperatures finite and inside the loose physical band for a
    /// pressureless hot-water system (0 °C .. 100 °C, exclusive). Used as a
    /// simulation sanity check, not as an optimization constraint.
    pub fn is_plausible(&self) -> bool {
        self.0.iter().all(|t| t.is_finite() && *t > 0.0 && *t < 100.0)
    }
}

/// Exogenous conditions over one sampling interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    /// Hot-water draw from the top of the tank, kg/h.
    pub mdot_s_kg_h: f64,
    /// Optional ambient-temperature override (°C); `None` uses the
    /// parameter-set ambient.
    pub t_amb: Option<f64>,
}

impl Disturbance {
    pub fn draw(mdot_s_kg_h: f64) -> Self {
        Disturbance { mdot_s_kg_h, t_amb: None }
    }

    pub(crate) fn validate(&self, p: &PlantParameters) -> Result<(), ModelError> {
        if !self.mdot_s_kg_h.is_finite()
            || self.mdot_s_kg_h < 0.0
            || self.mdot_s_kg_h > p.mdot_p_kg_h
        {
            return Err(ModelError::DisturbanceOutOfRange {
                mdot_s_kg_h: self.mdot_s_kg_h,
                mdot_p_kg_h: p.mdot_p_kg_h,
            });
        }
        if let Some(t) = self.t_amb {
            if !t.is_finite() {
                return Err(ModelError::DisturbanceOutOfRange {
                    mdot_s_kg_h: self.mdot_s_kg_h,
                    mdot_p_kg_h: p.mdot_p_kg_h,
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Heat pump characteristics
// ---------------------------------------------------------------------------

/// Coefficient of performance as a bilinear function of the condenser inlet
/// temperature and ambient temperature.
///
/// Total on finite inputs; the model does not clamp the result, so
/// extrapolating far outside the identification region can produce values
/// below 1 or even negative. Callers that care should check
/// [`StateVector::is_plausible`]-style bounds on their side.
pub fn cop(t_in_hp: f64, t_amb: f64, p: &PlantParameters) -> f64 {
    p.a1 + p.a2 * t_in_hp + p.a3 * t_amb + p.a4 * t_in_hp * t_amb
}

/// Thermal power delivered by the heat pump, W. Zero when the unit is off;
/// `cop · p_rated` when running.
pub fn hp_heat_output(u: bool, t_in_hp: f64, t_amb: f64, p: &PlantParameters) -> f64 {
    if u {
        cop(t_in_hp, t_amb, p) * p.p_rated_w
    } else {
        0.0
    }
}

/// Condenser inlet temperature: heat-exchanger return plus the exchanger
/// temperature lift.
pub fn hp_inlet_temperature(state: &StateVector, p: &PlantParameters) -> f64 {
    p.dt_he + state.x2()
}

// ---------------------------------------------------------------------------
// State update
// ---------------------------------------------------------------------------

/// Advances the plant by one sampling interval.
///
/// `u` is the heat-pump command held over the interval, `u_prev` the command
/// of the previous interval (needed for the switch-off temperature drop on
/// the top layer). Parameters and the disturbance are validated on every
/// call; use [`rollout`] for multi-step simulation.
pub fn step(
    state: &StateVector,
    u: bool,
    u_prev: bool,
    d: &Disturbance,
    p: &PlantParameters,
) -> Result<StateVector, ModelError> {
    p.validate()?;
    d.validate(p)?;
    Ok(step_unchecked(state, u, u_prev, d, &p.si()))
}

/// Advances the plant by one sampling interval, integrating internally with
/// `substeps` equal Euler sub-intervals.
///
/// The command `u` is held constant over the whole interval and the
/// switch-off drop fires once, at the interval start, on a 1 → 0 transition.
/// With `substeps = 1` this is exactly [`step`].
///
/// The layer updates are explicit-Euler convection steps whose per-step gain
/// is ṁ·Δt/mᵢ. At the full sampling interval that gain exceeds 1 for the
/// lighter layers at ordinary draw rates, so a simulated plant driven by
/// [`step`] overshoots and can oscillate unphysically whenever sharp
/// temperature fronts meet a mode change. Sub-stepping divides the gain by
/// `substeps` and restores monotone, physically plausible plant behavior
/// while leaving the one-interval planning model untouched.
pub fn step_fine(
    state: &StateVector,
    u: bool,
    u_prev: bool,
    d: &Disturbance,
    p: &PlantParameters,
    substeps: usize,
) -> Result<StateVector, ModelError> {
    if substeps == 0 {
        return Err(ModelError::InvalidParameters(
            "substeps must be at least 1".into(),
        ));
    }
    p.validate()?;
    d.validate(p)?;
    let si = p.si_fine(substeps);
    let mut current = *state;
    let mut prev = u_prev;
    for _ in 0..substeps {
        current = step_unchecked(&current, u, prev, d, &si);
        prev = u;
    }
    Ok(current)
}

/// The Euler update itself, assuming parameters and disturbance are already
/// validated. Shared by [`step`] and the planning code, which validates once
/// per problem instead of once per node.
pub(crate) fn step_unchecked(
    state: &StateVector,
    u: bool,
    u_prev: bool,
    d: &Disturbance,
    si: &SiParams,
) -> StateVector {
    // The old return temperature (index 1) does not feed into any update.
    let [x1, _, x3, x4, x5, x6, x7, x8] = state.0;
    let on = if u { 1.0 } else { 0.0 };
    let off = 1.0 - on;
    let t_amb = d.t_amb.unwrap_or(si.t_amb);
    let ms = d.mdot_s_kg_h / SECONDS_PER_HOUR;
    let mp = si.mdot_p;
    let mc = si.mdot_c;
    let cp = si.cp;
    let dt = si.dt_s;

    // Return temperature: draw replaced by cold supply water, remainder
    // recirculated from the tank bottom.
    let ratio = ms / mp;
    let x2n = si.t_s * ratio + x8 * (1.0 - ratio);

    // Heat delivered when running, based on the refreshed return temperature.
    let t_in_hp = si.dt_he + x2n;
    let cop = si.a1 + si.a2 * t_in_hp + si.a3 * t_amb + si.a4 * t_in_hp * t_amb;
    let q_hp = cop * si.p_rated_w;

    // Supply pipe: follows the condenser outlet while running, otherwise
    // relaxes toward ambient and the tank through the pipe conductances.
    let x1n = if u {
        x2n + q_hp / (mp * cp)
    } else {
        x1 - dt / (si.m_pipe * cp)
            * (si.r_pipe * (x1 - t_amb)
                + si.r_pipe_upper * (x1 - x3)
                + si.r_pipe_bottom * (x1 - x8))
    };

    // Switch-off drop on the top layer: only on a 1 -> 0 transition.
    let off_drop = if u_prev && !u { -si.dt_off } else { 0.0 };

    // Storage layers, top to bottom. While charging (`on`) the primary flow
    // pushes hot water downward; while discharging (`off`) the draw pulls
    // water upward. Adjacent layers also exchange heat by conduction.
    let x3n = x3
        + dt / (si.m1 * cp)
            * (mp * cp * (x1 - x3) * on - (mc - ms) * cp * si.dt_c - si.r12 * (x3 - x4)
                + ms * cp * (x4 - x3) * off)
        + off_drop;
    let x4n = x4
        + dt / (si.m2 * cp)
            * ((mp - ms) * cp * (x3 - x4) * on + si.r12 * (x3 - x4) - si.r23 * (x4 - x5)
                + ms * cp * (x5 - x4) * off);
    let base5 = match si.variant {
        ModelVariant::Corrected => x5,
        ModelVariant::Literal => x7,
    };
    let x5n = base5
        + dt / (si.m3 * cp)
            * ((mp - ms) * cp * (x4 - x5) * on + si.r23 * (x4 - x5) - si.r34 * (x5 - x6)
                + ms * cp * (x6 - x5) * off);
    let base6 = match si.variant {
        ModelVariant::Corrected => x6,
        ModelVariant::Literal => x8,
    };
    let x6n = base6
        + dt / (si.m4 * cp)
            * ((mp - ms) * cp * (x5 - x6) * on + si.r34 * (x5 - x6) - si.r45 * (x6 - x7)
                + ms * cp * (x7 - x6) * off);
    let x7n = x7
        + dt / (si.m5 * cp)
            * ((mp - ms) * cp * (x6 - x7) * on + si.r45 * (x6 - x7) - si.r56 * (x7 - x8)
                + ms * cp * (x8 - x7) * off);
    let x8n = x8
        + dt / (si.m6 * cp)
            * ((mp - ms) * cp * (x7 - x8) * on + si.r56 * (x7 - x8)
                + ms * cp * (si.t_s - x8) * off);

    StateVector([x1n, x2n, x3n, x4n, x5n, x6n, x7n, x8n])
}

/// Simulates a sequence of inputs from `state0`, returning the successor
/// states `x_1 .. x_N` (the initial state is not repeated in the output).
///
/// `u_init` is the input that was active before the first step; it seeds the
/// switch-off detection. Inputs and disturbances must have equal nonzero
/// length. Errors from individual steps are wrapped with the step index.
pub fn rollout(
    state0: &StateVector,
    inputs: &[bool],
    u_init: bool,
    disturbances: &[Disturbance],
    p: &PlantParameters,
) -> Result<Vec<StateVector>, ModelError> {
    rollout_fine(state0, inputs, u_init, disturbances, p, 1)
}

/// Like [`rollout`], but advances each sampling interval with `substeps`
/// equal Euler sub-intervals (each disturbance held constant over its
/// interval). `substeps = 1` is exactly [`rollout`].
pub fn rollout_fine(
    state0: &StateVector,
    inputs: &[bool],
    u_init: bool,
    disturbances: &[Disturbance],
    p: &PlantParameters,
    substeps: usize,
) -> Result<Vec<StateVector>, ModelError> {
    if inputs.len() != disturbances.len() || inputs.is_empty() {
        return Err(ModelError::LengthMismatch {
            inputs: inputs.len(),
            disturbances: disturbances.len(),
        });
    }
    p.validate()?;
    if substeps == 0 {
        return Err(ModelError::InvalidParameters(
            "substeps must be at least 1".into(),
        ));
    }
    let si = p.si_fine(substeps);
    let mut states = Vec::with_capacity(inputs.len());
    let mut current = *state0;
    let mut u_prev = u_init;
    for (k, (&u, d)) in inputs.iter().zip(disturbances).enumerate() {
        d.validate(p).map_err(|e| ModelError::AtStep {
            step: k,
            source: Box::new(e),
        })?;
        for _ in 0..substeps {
            current = step_unchecked(&current, u, u_prev, d, &si);
            u_prev = u;
        }
        states.push(current);
    }
    Ok(states)
}
