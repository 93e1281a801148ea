//! Coupler flux waveforms Θ(t) with analytic time derivatives.
//!
//! Angles are in radians, times in ns, rates in rad/ns. Outside `[0, T]`
//! every pulse reports the idle flux with zero rate.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted `Σ|c_k|` for the ramp corrections of a [`DcPulse`].
pub const MAX_RAMP_CORRECTION: f64 = 0.5;

pub trait Pulse: Send + Sync {
    /// Gate time T (ns).
    fn duration(&self) -> f64;

    /// Idle flux Θ₀ (radians).
    fn idle(&self) -> f64;

    /// (Θ, Θ̇) for `t` inside `[0, T]`.
    fn evaluate(&self, t: f64) -> (f64, f64);

    /// Bounds (min, max) on Θ over the pulse.
    fn flux_range(&self) -> (f64, f64);

    /// Interior times where Θ is not smooth; integrators step onto them.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn value_and_derivative(&self, t: f64) -> (f64, f64) {
        if t < 0.0 || t > self.duration() {
            (self.idle(), 0.0)
        } else {
            self.evaluate(t)
        }
    }
}

/// Θ₀ + α tanh(βt) tanh(β(T−t)) cos(ω t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcPulse {
    pub theta0: f64,
    pub alpha: f64,
    /// Edge rate (1/ns).
    pub beta: f64,
    pub duration: f64,
    /// Modulation angular frequency (rad/ns).
    pub carrier: f64,
}

impl AcPulse {
    pub fn new(theta0: f64, alpha: f64, beta: f64, duration: f64, carrier: f64) -> Result<Self> {
        let p = Self {
            theta0,
            alpha,
            beta,
            duration,
            carrier,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta0, self.alpha, self.beta, self.duration, self.carrier].iter().all(|x| x.is_finite());
        if !finite || self.duration < 0.0 || self.beta < 0.0 {
            return Err(Error::InvalidArgument(format!("invalid ac pulse {self:?}")));
        }
        Ok(())
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    /// Envelope and its derivative.
    pub fn envelope(&self, t: f64) -> (f64, f64) {
        let a = (self.beta * t).tanh();
        let b = (self.beta * (self.duration - t)).tanh();
        let env = self.alpha * a * b;
        let denv = self.alpha * self.beta * ((1.0 - a * a) * b - a * (1.0 - b * b));
        (env, denv)
    }
}

impl Pulse for AcPulse {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn idle(&self) -> f64 {
        self.theta0
    }

    fn evaluate(&self, t: f64) -> (f64, f64) {
        let (env, denv) = self.envelope(t);
        let (s, c) = (self.carrier * t).sin_cos();
        (self.theta0 + env * c, denv * c - env * self.carrier * s)
    }

    fn flux_range(&self) -> (f64, f64) {
        let a = self.alpha.abs();
        (self.theta0 - a, self.theta0 + a)
    }
}

/// Flat-top excursion Θ₀ → θ_peak → Θ₀ with symmetric ramps of length
/// `ramp_fraction · T`. The ramp profile is
/// `s(u) = (1 − cos πu)/2 + Σ_k c_k (1 − cos 2πku)/2` for u ∈ [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcPulse {
    pub theta0: f64,
    pub theta_peak: f64,
    pub duration: f64,
    pub ramp_fraction: f64,
    #[serde(default)]
    pub ramp_coeffs: Vec<f64>,
}

impl DcPulse {
    pub fn new(theta0: f64, theta_peak: f64, duration: f64, ramp_fraction: f64, ramp_coeffs: Vec<f64>) -> Result<Self> {
        let p = Self {
            theta0,
            theta_peak,
            duration,
            ramp_fraction,
            ramp_coeffs,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta0, self.theta_peak, self.duration, self.ramp_fraction]
            .iter()
            .chain(&self.ramp_coeffs)
            .all(|x| x.is_finite());
        if !finite || self.duration < 0.0 {
            return Err(Error::InvalidArgument(format!("invalid dc pulse {self:?}")));
        }
        if !(self.ramp_fraction > 0.0 && self.ramp_fraction <= 0.5) {
            return Err(Error::InvalidArgument(format!("ramp fraction {} outside (0, 0.5]", self.ramp_fraction)));
        }
        let total: f64 = self.ramp_coeffs.iter().map(|c| c.abs()).sum();
        if total > MAX_RAMP_CORRECTION {
            return Err(Error::InvalidArgument(format!(
                "ramp corrections sum to {total:.4} in magnitude; the limit is {MAX_RAMP_CORRECTION}"
            )));
        }
        Ok(())
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    /// Analytic overshoot bound ε: Θ stays within
    /// `[min(Θ₀, θ_peak) − ε, max(Θ₀, θ_peak) + ε]`.
    pub fn overshoot_bound(&self) -> f64 {
        (self.theta_peak - self.theta0).abs() * self.ramp_coeffs.iter().map(|c| c.abs()).sum::<f64>()
    }

    fn ramp_time(&self) -> f64 {
        self.ramp_fraction * self.duration
    }

    /// Ramp profile s(u) and ds/du.
    pub fn ramp_profile(&self, u: f64) -> (f64, f64) {
        let mut s = 0.5 * (1.0 - (PI * u).cos());
        let mut ds = 0.5 * PI * (PI * u).sin();
        for (k, c) in self.ramp_coeffs.iter().enumerate() {
            let w = 2.0 * PI * (k + 1) as f64;
            s += 0.5 * c * (1.0 - (w * u).cos());
            ds += 0.5 * c * w * (w * u).sin();
        }
        (s, ds)
    }
}

impl Pulse for DcPulse {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn idle(&self) -> f64 {
        self.theta0
    }

    fn evaluate(&self, t: f64) -> (f64, f64) {
        let tau = self.ramp_time();
        let amp = self.theta_peak - self.theta0;
        if tau <= 0.0 {
            return (self.theta0, 0.0);
        }
        if t < tau {
            let (s, ds) = self.ramp_profile(t / tau);
            (self.theta0 + amp * s, amp * ds / tau)
        } else if t > self.duration - tau {
            let (s, ds) = self.ramp_profile((self.duration - t) / tau);
            (self.theta0 + amp * s, -amp * ds / tau)
        } else {
            (self.theta_peak, 0.0)
        }
    }

    fn flux_range(&self) -> (f64, f64) {
        let eps = self.overshoot_bound();
        (self.theta0.min(self.theta_peak) - eps, self.theta0.max(self.theta_peak) + eps)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let tau = self.ramp_time();
        if tau < 0.5 * self.duration {
            vec![tau, self.duration - tau]
        } else {
            vec![0.5 * self.duration]
        }
    }
}

/// Θ held at `theta` for the whole gate time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantPulse {
    pub theta0: f64,
    pub theta: f64,
    pub duration: f64,
}

impl Pulse for ConstantPulse {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn idle(&self) -> f64 {
        self.theta0
    }

    fn evaluate(&self, _t: f64) -> (f64, f64) {
        (self.theta, 0.0)
    }

    fn flux_range(&self) -> (f64, f64) {
        (self.theta0.min(self.theta), self.theta0.max(self.theta))
    }
}

/// Serializable pulse description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PulseDescriptor {
    Ac(AcPulse),
    Dc(DcPulse),
    Constant(ConstantPulse),
}

impl PulseDescriptor {
    pub fn as_pulse(&self) -> &dyn Pulse {
        match self {
            PulseDescriptor::Ac(p) => p,
            PulseDescriptor::Dc(p) => p,
            PulseDescriptor::Constant(p) => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PulseDescriptor::Ac(p) => p.validate(),
            PulseDescriptor::Dc(p) => p.validate(),
            PulseDescriptor::Constant(_) => Ok(()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pulse descriptors serialize")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let d: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        d.validate()?;
        Ok(d)
    }
}

/// Samples (t, Θ, Θ̇) every `dt` ns over `[0, T]` as CSV.
pub fn pulse_csv(pulse: &dyn Pulse, dt: f64, provenance: &str) -> Result<String> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("sample interval {dt} must be positive")));
    }
    let mut s = String::new();
    let _ = writeln!(s, "# {provenance}");
    let _ = writeln!(s, "t_ns,theta_over_pi,theta_dot_rad_per_ns");
    let n = (pulse.duration() / dt).round() as usize;
    for i in 0..=n {
        let t = (i as f64 * dt).min(pulse.duration());
        let (th, dth) = pulse.value_and_derivative(t);
        let _ = writeln!(s, "{t:.6},{:.12},{dth:.12e}", th / PI);
    }
    Ok(s)
}
