//! Asymmetric delay attack algebra.
//!
//! An attacker controls two extra path delays: `M(t)` on the Alice→Bob leg and
//! `N(t)` on the Bob→Alice leg. Each is a [`DelayTrajectory`], the linear
//! superposition of [`AttackEvent`]s of three shapes:
//!
//! * jump: `A·H(t−t0)`
//! * spike: `A·[H(t−t0) − H(t−(t0+ε))]`
//! * gradual: `A·f(t−t0)·H(t−t0)` for a behavior function `f` with `f(0) = 0`
//!
//! where `H` is the Heaviside step with `H(0) = 1`. The victim's computed
//! clock difference is then shifted according to the synchronization scheme,
//! see [`tampered_clock_difference`].
//!
//! Sign convention: a positive delay lengthens the path. Amplitudes are in
//! picoseconds and times in seconds; nothing here quantizes to integer
//! picoseconds.

use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::scalar::Scalar;

/// Spike width used when a scenario omits `width_s`: one 1 s measurement epoch.
pub const DEFAULT_SPIKE_WIDTH_S: f64 = 1.0;
/// Staircase interval of a gradual attack when `step_interval_s` is omitted.
pub const DEFAULT_STEP_INTERVAL_S: f64 = 35.0;

fn default_spike_width<T: Scalar>() -> T {
    T::lit(DEFAULT_SPIKE_WIDTH_S)
}

fn default_step_interval<T: Scalar>() -> T {
    T::lit(DEFAULT_STEP_INTERVAL_S)
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Heaviside step `H(t − t0)`: 0 before `t0`, 1 from `t0` onward (inclusive).
#[inline]
pub fn heaviside<T: Scalar>(t: T, t0: T) -> u8 {
    u8::from(t >= t0)
}

#[inline]
fn step<T: Scalar>(t: T, t0: T) -> T {
    if t >= t0 {
        T::one()
    } else {
        T::zero()
    }
}

/// Shape function `f(u)` of a gradual attack, `u` being seconds since onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior<T> {
    /// `f(u) = rate·u`
    Linear { rate_per_s: T },
    /// `f(u) = ln(1 + u/scale)`
    Logarithmic { scale_s: T },
    /// `f(u) = exp(rate·u) − 1`
    Exponential { rate_per_s: T },
    /// `f(u) = Σ c_k·u^k`
    Polynomial { coefficients: Vec<T> },
}

impl<T: Scalar> Behavior<T> {
    pub fn eval(&self, u: T) -> T {
        match self {
            Behavior::Linear { rate_per_s } => *rate_per_s * u,
            Behavior::Logarithmic { scale_s } => (u / *scale_s).ln_1p(),
            Behavior::Exponential { rate_per_s } => (*rate_per_s * u).exp_m1(),
            Behavior::Polynomial { coefficients } => coefficients
                .iter()
                .rev()
                .fold(T::zero(), |acc, &c| acc * u + c),
        }
    }

    fn validate(&self) -> Result<(), FieldError> {
        let finite = |v: T, field: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(FieldError::new(format!("behavior.{field}"), "must be finite"))
            }
        };
        match self {
            Behavior::Linear { rate_per_s } | Behavior::Exponential { rate_per_s } => {
                finite(*rate_per_s, "rate_per_s")
            }
            Behavior::Logarithmic { scale_s } => {
                finite(*scale_s, "scale_s")?;
                if *scale_s <= T::zero() {
                    return Err(FieldError::new("behavior.scale_s", "must be > 0"));
                }
                Ok(())
            }
            Behavior::Polynomial { coefficients } => {
                for (i, c) in coefficients.iter().enumerate() {
                    finite(*c, &format!("coefficients[{i}]"))?;
                }
                Ok(())
            }
        }
    }
}

/// One elementary attack contribution to a delay trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub enum AttackEvent<T> {
    Jump {
        amplitude_ps: T,
        start_s: T,
    },
    Spike {
        amplitude_ps: T,
        start_s: T,
        #[serde(default = "default_spike_width")]
        width_s: T,
    },
    Gradual {
        amplitude_ps: T,
        start_s: T,
        behavior: Behavior<T>,
        /// Staircase quantization of elapsed time; 0 means continuous.
        #[serde(default = "default_step_interval")]
        step_interval_s: T,
        /// Absolute time after which the trajectory holds (or reverses).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end_s: Option<T>,
        /// After `end_s`, negate further increments instead of holding.
        #[serde(default, skip_serializing_if = "is_false")]
        reverse_after_end: bool,
    },
}

impl<T: Scalar> AttackEvent<T> {
    pub fn jump(amplitude_ps: T, start_s: T) -> Self {
        AttackEvent::Jump {
            amplitude_ps,
            start_s,
        }
    }

    pub fn spike(amplitude_ps: T, start_s: T, width_s: T) -> Self {
        AttackEvent::Spike {
            amplitude_ps,
            start_s,
            width_s,
        }
    }

    /// Gradual attack with the default 35 s staircase and no end point.
    pub fn gradual(amplitude_ps: T, start_s: T, behavior: Behavior<T>) -> Self {
        AttackEvent::Gradual {
            amplitude_ps,
            start_s,
            behavior,
            step_interval_s: default_step_interval(),
            end_s: None,
            reverse_after_end: false,
        }
    }

    /// Set the staircase interval of a gradual event (0 = continuous). No-op otherwise.
    pub fn stepped(mut self, interval_s: T) -> Self {
        if let AttackEvent::Gradual {
            step_interval_s, ..
        } = &mut self
        {
            *step_interval_s = interval_s;
        }
        self
    }

    /// Hold (or with `reverse`, mirror) a gradual event after `end`. No-op otherwise.
    pub fn until(mut self, end: T, reverse: bool) -> Self {
        if let AttackEvent::Gradual {
            end_s,
            reverse_after_end,
            ..
        } = &mut self
        {
            *end_s = Some(end);
            *reverse_after_end = reverse;
        }
        self
    }

    pub fn amplitude_ps(&self) -> T {
        match self {
            AttackEvent::Jump { amplitude_ps, .. }
            | AttackEvent::Spike { amplitude_ps, .. }
            | AttackEvent::Gradual { amplitude_ps, .. } => *amplitude_ps,
        }
    }

    pub fn start_s(&self) -> T {
        match self {
            AttackEvent::Jump { start_s, .. }
            | AttackEvent::Spike { start_s, .. }
            | AttackEvent::Gradual { start_s, .. } => *start_s,
        }
    }

    /// Same event with its amplitude multiplied by `k`.
    pub fn scaled(&self, k: T) -> Self {
        match self {
            AttackEvent::Jump {
                amplitude_ps,
                start_s,
            } => AttackEvent::Jump {
                amplitude_ps: *amplitude_ps * k,
                start_s: *start_s,
            },
            AttackEvent::Spike {
                amplitude_ps,
                start_s,
                width_s,
            } => AttackEvent::Spike {
                amplitude_ps: *amplitude_ps * k,
                start_s: *start_s,
                width_s: *width_s,
            },
            AttackEvent::Gradual {
                amplitude_ps,
                start_s,
                behavior,
                step_interval_s,
                end_s,
                reverse_after_end,
            } => AttackEvent::Gradual {
                amplitude_ps: *amplitude_ps * k,
                start_s: *start_s,
                behavior: behavior.clone(),
                step_interval_s: *step_interval_s,
                end_s: *end_s,
                reverse_after_end: *reverse_after_end,
            },
        }
    }

    /// Check the event invariants; the error path names the offending field.
    pub fn validate(&self) -> Result<(), FieldError> {
        let amplitude = self.amplitude_ps();
        if !amplitude.is_finite() {
            return Err(FieldError::new("amplitude_ps", "must be finite"));
        }
        let start = self.start_s();
        if !start.is_finite() || start < T::zero() {
            return Err(FieldError::new("start_s", "must be finite and >= 0"));
        }
        match self {
            AttackEvent::Jump { .. } => Ok(()),
            AttackEvent::Spike { width_s, .. } => {
                if !width_s.is_finite() || *width_s <= T::zero() {
                    return Err(FieldError::new("width_s", "must be finite and > 0"));
                }
                Ok(())
            }
            AttackEvent::Gradual {
                behavior,
                step_interval_s,
                end_s,
                ..
            } => {
                behavior.validate()?;
                if !step_interval_s.is_finite() || *step_interval_s < T::zero() {
                    return Err(FieldError::new("step_interval_s", "must be finite and >= 0"));
                }
                if let Some(end) = end_s {
                    if !end.is_finite() || *end < start {
                        return Err(FieldError::new("end_s", "must be finite and >= start_s"));
                    }
                }
                Ok(())
            }
        }
    }
}

#[inline]
fn quantize<T: Scalar>(u: T, interval: T) -> T {
    if interval > T::zero() {
        (u / interval).floor() * interval
    } else {
        u
    }
}

/// Delay contributed by a single event at time `t` (seconds), in picoseconds.
pub fn eval_event<T: Scalar>(event: &AttackEvent<T>, t: T) -> T {
    match event {
        AttackEvent::Jump {
            amplitude_ps,
            start_s,
        } => *amplitude_ps * step(t, *start_s),
        AttackEvent::Spike {
            amplitude_ps,
            start_s,
            width_s,
        } => *amplitude_ps * (step(t, *start_s) - step(t, *start_s + *width_s)),
        AttackEvent::Gradual {
            amplitude_ps,
            start_s,
            behavior,
            step_interval_s,
            end_s,
            reverse_after_end,
        } => {
            if t < *start_s {
                return T::zero();
            }
            let u = t - *start_s;
            let shape = match end_s {
                Some(end) if t > *end => {
                    let u_end = quantize(*end - *start_s, *step_interval_s);
                    let at_end = behavior.eval(u_end);
                    if *reverse_after_end {
                        let beyond = quantize(t - *end, *step_interval_s);
                        at_end + at_end - behavior.eval(u_end + beyond)
                    } else {
                        at_end
                    }
                }
                _ => behavior.eval(quantize(u, *step_interval_s)),
            };
            *amplitude_ps * shape
        }
    }
}

/// Time-varying extra delay on one channel direction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct DelayTrajectory<T> {
    pub events: Vec<AttackEvent<T>>,
}

impl<T: Scalar> DelayTrajectory<T> {
    pub fn new(events: Vec<AttackEvent<T>>) -> Self {
        Self { events }
    }

    pub fn empty() -> Self {
        Self { events: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn eval(&self, t: T) -> T {
        eval_trajectory(self, t)
    }

    /// Concatenate the events of two trajectories.
    pub fn union(&self, other: &Self) -> Self {
        let mut events = self.events.clone();
        events.extend(other.events.iter().cloned());
        Self { events }
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            events: self.events.iter().map(|e| e.scaled(k)).collect(),
        }
    }
}

pub fn eval_trajectory<T: Scalar>(traj: &DelayTrajectory<T>, t: T) -> T {
    traj.events.iter().map(|e| eval_event(e, t)).sum()
}

/// How the attacker ties the return-leg delay `N(t)` to `M(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoordinationRule<T> {
    /// `N` is supplied separately.
    Independent,
    /// `N(t) = n·M(t)`; `n = −1` keeps the round-trip time constant.
    Proportional { n: T },
}

impl<T: Scalar> CoordinationRule<T> {
    pub fn constant_round_trip() -> Self {
        CoordinationRule::Proportional { n: -T::one() }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        match self {
            CoordinationRule::Proportional { n } if !n.is_finite() => {
                Err(FieldError::new("n", "must be finite"))
            }
            _ => Ok(()),
        }
    }
}

/// Build the return-leg trajectory. Under `Independent` the supplied `n`
/// trajectory is returned as-is (empty when none was given).
pub fn derive_n_from_m<T: Scalar>(
    m: &DelayTrajectory<T>,
    rule: &CoordinationRule<T>,
    independent_n: Option<&DelayTrajectory<T>>,
) -> DelayTrajectory<T> {
    match rule {
        CoordinationRule::Proportional { n } => m.scaled(*n),
        CoordinationRule::Independent => independent_n.cloned().unwrap_or_default(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    TwoWay,
    HomInterference,
    RoundTrip,
}

/// `(α, β)` weights of `M` and `N` in the tampered clock difference.
pub fn scheme_coefficients(kind: SchemeKind) -> (i8, i8) {
    match kind {
        SchemeKind::TwoWay => (1, -1),
        SchemeKind::HomInterference | SchemeKind::RoundTrip => (-1, 1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QcsScheme {
    pub kind: SchemeKind,
    pub alpha: i8,
    pub beta: i8,
}

impl QcsScheme {
    pub fn new(kind: SchemeKind) -> Self {
        let (alpha, beta) = scheme_coefficients(kind);
        Self { kind, alpha, beta }
    }
}

impl From<SchemeKind> for QcsScheme {
    fn from(kind: SchemeKind) -> Self {
        Self::new(kind)
    }
}

/// Clock difference the victim computes under attack: `Δt − (α·M + β·N)/2`.
pub fn tampered_clock_difference<T: Scalar>(delta_t: T, m_t: T, n_t: T, scheme: QcsScheme) -> T {
    let alpha = T::lit(f64::from(scheme.alpha));
    let beta = T::lit(f64::from(scheme.beta));
    delta_t - (alpha * m_t + beta * n_t) / T::lit(2.0)
}
