//! Time-dependent scalar controls: pump ramp β(t), detuning trajectories Δ(t)
//! and the microwave drive envelope E(t).
//!
//! Schedules are evaluated in closed form (never tabulated) so the integrator
//! may sample them at arbitrary stage times between grid points.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A tagged time-dependent real scalar. Amplitudes are angular frequencies
/// (rad/ns), durations are in ns. Every kind is defined for all `t ≥ 0`; the
/// value after the active window is the documented hold value.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    /// `value` for all t.
    Constant { value: f64 },
    /// `amplitude·t/T` for `t ≤ T`, then `amplitude`.
    LinearRampHold { amplitude: f64, duration: f64 },
    /// `amplitude·(1 - t/T)` for `t ≤ T`, then `0`.
    LinearDecayToZero { amplitude: f64, duration: f64 },
    /// `amplitude·sin²(πt/T)` for `t ≤ T`, then `0`.
    SinSquaredPulse { amplitude: f64, duration: f64 },
    /// `amplitude·sin(πt/T)` for `t ≤ T`, then `0`.
    SineEnvelope { amplitude: f64, duration: f64 },
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration > 0.0) {
        return Err(Error::InvalidSchedule {
            reason: format!("duration must be positive, got {duration}"),
        });
    }
    Ok(())
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    pub fn linear_ramp_hold(amplitude: f64, duration: f64) -> Result<Self> {
        check_duration(duration)?;
        Ok(Schedule::LinearRampHold { amplitude, duration })
    }

    pub fn linear_decay_to_zero(amplitude: f64, duration: f64) -> Result<Self> {
        check_duration(duration)?;
        Ok(Schedule::LinearDecayToZero { amplitude, duration })
    }

    pub fn sin_squared_pulse(amplitude: f64, duration: f64) -> Result<Self> {
        check_duration(duration)?;
        Ok(Schedule::SinSquaredPulse { amplitude, duration })
    }

    pub fn sine_envelope(amplitude: f64, duration: f64) -> Result<Self> {
        check_duration(duration)?;
        Ok(Schedule::SineEnvelope { amplitude, duration })
    }

    /// Drive envelope realizing a π phase gate in duration `t_gate`:
    /// a sine envelope of amplitude `π²/(8·T·√(2β/χ))`.
    pub fn rz_envelope(beta: f64, chi: f64, t_gate: f64) -> Result<Self> {
        check_duration(t_gate)?;
        if !(beta > 0.0) || !(chi > 0.0) {
            return Err(Error::InvalidSchedule {
                reason: format!("rz envelope requires beta > 0 and chi > 0, got {beta}, {chi}"),
            });
        }
        let amplitude = PI * PI / (8.0 * t_gate * (2.0 * beta / chi).sqrt());
        Schedule::sine_envelope(amplitude, t_gate)
    }

    /// Value at time `t` (ns).
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::LinearRampHold { amplitude, duration } => {
                if t <= duration {
                    amplitude * t / duration
                } else {
                    amplitude
                }
            }
            Schedule::LinearDecayToZero { amplitude, duration } => {
                if t <= duration {
                    amplitude * (1.0 - t / duration)
                } else {
                    0.0
                }
            }
            Schedule::SinSquaredPulse { amplitude, duration } => {
                if t <= duration {
                    let s = (PI * t / duration).sin();
                    amplitude * s * s
                } else {
                    0.0
                }
            }
            Schedule::SineEnvelope { amplitude, duration } => {
                if t <= duration {
                    amplitude * (PI * t / duration).sin()
                } else {
                    0.0
                }
            }
        }
    }

    /// Analytic time derivative at `t`; taken one-sided (zero) past the
    /// active window of the piecewise kinds.
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant { .. } => 0.0,
            Schedule::LinearRampHold { amplitude, duration } => {
                if t < duration {
                    amplitude / duration
                } else {
                    0.0
                }
            }
            Schedule::LinearDecayToZero { amplitude, duration } => {
                if t < duration {
                    -amplitude / duration
                } else {
                    0.0
                }
            }
            Schedule::SinSquaredPulse { amplitude, duration } => {
                if t < duration {
                    amplitude * PI / duration * (2.0 * PI * t / duration).sin()
                } else {
                    0.0
                }
            }
            Schedule::SineEnvelope { amplitude, duration } => {
                if t < duration {
                    amplitude * PI / duration * (PI * t / duration).cos()
                } else {
                    0.0
                }
            }
        }
    }

    /// Range `(min, max)` of the schedule over `t ∈ [0, ∞)`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Schedule::Constant { value } => (value, value),
            Schedule::LinearRampHold { amplitude, .. }
            | Schedule::LinearDecayToZero { amplitude, .. }
            | Schedule::SinSquaredPulse { amplitude, .. }
            | Schedule::SineEnvelope { amplitude, .. } => {
                (amplitude.min(0.0), amplitude.max(0.0))
            }
        }
    }

    /// Same shape with the amplitude scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Schedule::Constant { value } => Schedule::Constant { value: value * factor },
            Schedule::LinearRampHold { amplitude, duration } => Schedule::LinearRampHold {
                amplitude: amplitude * factor,
                duration,
            },
            Schedule::LinearDecayToZero { amplitude, duration } => Schedule::LinearDecayToZero {
                amplitude: amplitude * factor,
                duration,
            },
            Schedule::SinSquaredPulse { amplitude, duration } => Schedule::SinSquaredPulse {
                amplitude: amplitude * factor,
                duration,
            },
            Schedule::SineEnvelope { amplitude, duration } => Schedule::SineEnvelope {
                amplitude: amplitude * factor,
                duration,
            },
        }
    }
}

/// Accumulated phase `φ = 4·√(2β/χ)·∫₀ᵀ E(t) dt` of the parametron under a
/// sine drive envelope, in closed form (`∫ = 2·amplitude·T/π`).
pub fn rz_phase(envelope: &Schedule, beta: f64, chi: f64) -> Result<f64> {
    match *envelope {
        Schedule::SineEnvelope { amplitude, duration } => {
            Ok(4.0 * (2.0 * beta / chi).sqrt() * amplitude * 2.0 * duration / PI)
        }
        _ => Err(Error::InvalidSchedule {
            reason: "rz_phase requires a sine envelope".to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::mhz_to_rad_per_ns;

    #[test]
    fn ramp_hold_values() {
        let s = Schedule::linear_ramp_hold(2.0, 10.0).unwrap();
        assert_eq!(s.value(5.0), 1.0);
        assert_eq!(s.value(20.0), 2.0);
        assert_eq!(s.value(0.0), 0.0);
    }

    #[test]
    fn decay_values() {
        let s = Schedule::linear_decay_to_zero(-4.0, 8.0).unwrap();
        assert_eq!(s.value(0.0), -4.0);
        assert_eq!(s.value(4.0), -2.0);
        assert_eq!(s.value(8.0), 0.0);
        assert_eq!(s.value(9.0), 0.0);
    }

    #[test]
    fn sin_squared_values() {
        let s = Schedule::sin_squared_pulse(-3.0, 6.0).unwrap();
        assert_relative_eq!(s.value(3.0), -3.0, epsilon = 1e-15);
        assert!(s.value(0.0).abs() < 1e-15);
        assert!(s.value(6.0).abs() < 1e-12);
        assert_eq!(s.value(7.0), 0.0);
    }

    #[test]
    fn rejects_non_positive_duration() {
        assert!(Schedule::linear_ramp_hold(1.0, 0.0).is_err());
        assert!(Schedule::sin_squared_pulse(1.0, -2.0).is_err());
    }

    #[test]
    fn continuity_at_window_edge() {
        let eps = 1e-9;
        for s in [
            Schedule::linear_ramp_hold(2.0, 10.0).unwrap(),
            Schedule::linear_decay_to_zero(-4.0, 10.0).unwrap(),
            Schedule::sin_squared_pulse(1.5, 10.0).unwrap(),
            Schedule::sine_envelope(1.5, 10.0).unwrap(),
        ] {
            assert!((s.value(10.0 - eps) - s.value(10.0 + eps)).abs() < 1e-6);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-7;
        for s in [
            Schedule::linear_ramp_hold(2.0, 10.0).unwrap(),
            Schedule::linear_decay_to_zero(-4.0, 10.0).unwrap(),
            Schedule::sin_squared_pulse(1.5, 10.0).unwrap(),
            Schedule::sine_envelope(1.5, 10.0).unwrap(),
        ] {
            for &t in &[1.0, 3.7, 6.5, 9.3] {
                let fd = (s.value(t + h) - s.value(t - h)) / (2.0 * h);
                assert_relative_eq!(s.derivative(t), fd, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn rz_envelope_peak_against_pump_strength() {
        let beta = mhz_to_rad_per_ns(200.0);
        let chi = mhz_to_rad_per_ns(68.0);
        let s = Schedule::rz_envelope(beta, chi, 10.0).unwrap();
        let peak = match s {
            Schedule::SineEnvelope { amplitude, .. } => amplitude,
            _ => unreachable!(),
        };
        let expected = PI * PI / (8.0 * 10.0 * (2.0 * 200.0 / 68.0_f64).sqrt());
        assert_relative_eq!(peak, expected, max_relative = 1e-14);
        // the pump dwarfs the drive by a factor of ~24 (24.70 exactly)
        let ratio = beta / peak;
        assert_relative_eq!(ratio, 24.0, max_relative = 0.03);
    }

    #[test]
    fn rz_phase_closed_form_is_pi() {
        let beta = mhz_to_rad_per_ns(200.0);
        let chi = mhz_to_rad_per_ns(68.0);
        let s = Schedule::rz_envelope(beta, chi, 10.0).unwrap();
        let phi = rz_phase(&s, beta, chi).unwrap();
        assert!((phi - PI).abs() < 1e-10);
        // linearity in the envelope
        assert!((rz_phase(&s.scaled(0.5), beta, chi).unwrap() - PI / 2.0).abs() < 1e-10);
        assert_eq!(rz_phase(&s.scaled(0.0), beta, chi).unwrap(), 0.0);
    }

    #[test]
    fn rz_phase_matches_quadrature() {
        let beta = mhz_to_rad_per_ns(53.0);
        let chi = mhz_to_rad_per_ns(17.0);
        let t_gate = 25.0;
        let s = Schedule::rz_envelope(beta, chi, t_gate).unwrap();
        // Simpson's rule on the envelope integral
        let n = 4000;
        let h = t_gate / n as f64;
        let mut integral = s.value(0.0) + s.value(t_gate);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            integral += w * s.value(k as f64 * h);
        }
        integral *= h / 3.0;
        let phi_quad = 4.0 * (2.0 * beta / chi).sqrt() * integral;
        let phi = rz_phase(&s, beta, chi).unwrap();
        assert_relative_eq!(phi, phi_quad, max_relative = 1e-10);
    }

    #[test]
    fn rz_phase_rejects_other_kinds() {
        let s = Schedule::constant(1.0);
        assert!(rz_phase(&s, 1.0, 1.0).is_err());
    }
}
