//! Pulse time profiles `p(t)` and separable forcings `f(t, x) = p(t) g(x)`.
//!
//! Discontinuous profiles use the right-continuous convention: a rectangular
//! pulse equals its amplitude on `[onset, onset + duration)`.

use std::fmt;

use thiserror::Error;

use crate::timestepping::TimeGrid;
use crate::{Point, SpaceTimeFn, SpatialFn};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("invalid pulse parameter: {0}")]
    InvalidParameter(String),
    #[error("time {t} outside [0, {final_time}]")]
    TimeOutOfRange { t: f64, final_time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseShape {
    /// `A` on `[onset, onset + duration)`.
    Rectangular {
        amplitude: f64,
        onset: f64,
        duration: f64,
    },
    /// Linear ramps of length `rise` at both ends of `[onset, onset + duration]`.
    Trapezoidal {
        amplitude: f64,
        onset: f64,
        duration: f64,
        rise: f64,
    },
    /// `A exp(-(t - center)^2 / (2 width^2))`.
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `A sin(2 pi s / duration) exp(-s / decay)` for `s = t - onset` in
    /// `[0, duration]`: a positive then a negative lobe, continuous at both ends.
    BiphasicExponential {
        amplitude: f64,
        onset: f64,
        duration: f64,
        decay: f64,
    },
}

/// Names of the supported kinds, as used in run configurations.
pub const PULSE_KINDS: [&str; 4] = [
    "rectangular",
    "trapezoidal",
    "gaussian",
    "biphasic-exponential",
];

impl PulseShape {
    /// Checks duration > 0, 0 <= rise <= duration / 2, width > 0, decay > 0.
    pub fn validate(&self) -> Result<(), PulseError> {
        let bad = |m: String| Err(PulseError::InvalidParameter(m));
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match *self {
            PulseShape::Rectangular {
                amplitude,
                onset,
                duration,
            } => {
                if !finite(&[amplitude, onset, duration]) || duration <= 0.0 {
                    return bad(format!("rectangular duration {duration} must be > 0"));
                }
            }
            PulseShape::Trapezoidal {
                amplitude,
                onset,
                duration,
                rise,
            } => {
                if !finite(&[amplitude, onset, duration, rise]) || duration <= 0.0 {
                    return bad(format!("trapezoidal duration {duration} must be > 0"));
                }
                if rise < 0.0 || 2.0 * rise > duration {
                    return bad(format!("rise {rise} must lie in [0, duration/2]"));
                }
            }
            PulseShape::Gaussian {
                amplitude,
                center,
                width,
            } => {
                if !finite(&[amplitude, center, width]) || width <= 0.0 {
                    return bad(format!("gaussian width {width} must be > 0"));
                }
            }
            PulseShape::BiphasicExponential {
                amplitude,
                onset,
                duration,
                decay,
            } => {
                if !finite(&[amplitude, onset, duration, decay]) || duration <= 0.0 || decay <= 0.0
                {
                    return bad("biphasic duration and decay must be > 0".into());
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PulseShape::Rectangular { .. } => PULSE_KINDS[0],
            PulseShape::Trapezoidal { .. } => PULSE_KINDS[1],
            PulseShape::Gaussian { .. } => PULSE_KINDS[2],
            PulseShape::BiphasicExponential { .. } => PULSE_KINDS[3],
        }
    }

    /// False exactly for the rectangular kind, whose jumps put `f` outside
    /// `H^1` in time. A trapezoidal ramp with `rise = 0` is also a jump.
    pub fn is_h1_in_time(&self) -> bool {
        match *self {
            PulseShape::Rectangular { .. } => false,
            PulseShape::Trapezoidal { rise, .. } => rise > 0.0,
            _ => true,
        }
    }

    /// Support interval for compactly supported kinds.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            PulseShape::Rectangular {
                onset, duration, ..
            }
            | PulseShape::Trapezoidal {
                onset, duration, ..
            }
            | PulseShape::BiphasicExponential {
                onset, duration, ..
            } => Some((onset, onset + duration)),
            PulseShape::Gaussian { .. } => None,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            PulseShape::Rectangular { amplitude, .. }
            | PulseShape::Trapezoidal { amplitude, .. }
            | PulseShape::Gaussian { amplitude, .. }
            | PulseShape::BiphasicExponential { amplitude, .. } => amplitude,
        }
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        match &mut self {
            PulseShape::Rectangular { amplitude, .. }
            | PulseShape::Trapezoidal { amplitude, .. }
            | PulseShape::Gaussian { amplitude, .. }
            | PulseShape::BiphasicExponential { amplitude, .. } => *amplitude = a,
        }
        self
    }

    /// `p(t)`.
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            PulseShape::Rectangular {
                amplitude,
                onset,
                duration,
            } => {
                if t >= onset && t < onset + duration {
                    amplitude
                } else {
                    0.0
                }
            }
            PulseShape::Trapezoidal {
                amplitude,
                onset,
                duration,
                rise,
            } => {
                let s = t - onset;
                if s < 0.0 || s >= duration {
                    0.0
                } else if s < rise {
                    amplitude * s / rise
                } else if s > duration - rise {
                    amplitude * (duration - s) / rise
                } else {
                    amplitude
                }
            }
            PulseShape::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let z = (t - center) / width;
                amplitude * (-0.5 * z * z).exp()
            }
            PulseShape::BiphasicExponential {
                amplitude,
                onset,
                duration,
                decay,
            } => {
                let s = t - onset;
                if !(0.0..=duration).contains(&s) {
                    0.0
                } else {
                    amplitude * (std::f64::consts::TAU * s / duration).sin() * (-s / decay).exp()
                }
            }
        }
    }
}

impl fmt::Display for PulseShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PulseShape::Rectangular { amplitude, onset, duration } => {
                write!(f, "rectangular(amplitude={amplitude}, onset={onset}, duration={duration})")
            }
            PulseShape::Trapezoidal { amplitude, onset, duration, rise } => write!(
                f,
                "trapezoidal(amplitude={amplitude}, onset={onset}, duration={duration}, rise={rise})"
            ),
            PulseShape::Gaussian { amplitude, center, width } => {
                write!(f, "gaussian(amplitude={amplitude}, center={center}, width={width})")
            }
            PulseShape::BiphasicExponential { amplitude, onset, duration, decay } => write!(
                f,
                "biphasic-exponential(amplitude={amplitude}, onset={onset}, duration={duration}, decay={decay})"
            ),
        }
    }
}

/// `p(t^n)` at the nodes `t^1, ..., t^N`.
pub fn time_samples(pulse: &PulseShape, grid: &TimeGrid) -> Vec<f64> {
    (1..=grid.steps())
        .map(|n| pulse.value(grid.node(n)))
        .collect()
}

/// `f(t, x) = p(t) g(x)` on `[0, T] x Omega`, optionally overridden by a
/// general closure.
#[derive(Clone)]
pub struct SeparableForcing {
    pub pulse: PulseShape,
    pub profile: SpatialFn,
    pub general: Option<SpaceTimeFn>,
    pub final_time: f64,
}

impl fmt::Debug for SeparableForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeparableForcing")
            .field("pulse", &self.pulse)
            .field("general", &self.general.is_some())
            .field("final_time", &self.final_time)
            .finish()
    }
}

impl SeparableForcing {
    pub fn new(pulse: PulseShape, profile: SpatialFn, final_time: f64) -> Result<Self, PulseError> {
        pulse.validate()?;
        Ok(Self {
            pulse,
            profile,
            general: None,
            final_time,
        })
    }

    pub fn evaluate(&self, t: f64, x: Point) -> Result<f64, PulseError> {
        if !(0.0..=self.final_time).contains(&t) {
            return Err(PulseError::TimeOutOfRange {
                t,
                final_time: self.final_time,
            });
        }
        Ok(match &self.general {
            Some(f) => f(t, x),
            None => self.pulse.value(t) * (self.profile)(x),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn rect() -> PulseShape {
        PulseShape::Rectangular {
            amplitude: 1.0,
            onset: 0.25,
            duration: 0.25,
        }
    }

    #[test]
    fn rectangular_is_right_continuous() {
        let p = rect();
        assert_eq!(p.value(0.25), 1.0);
        assert_eq!(p.value(0.5), 0.0);
        assert_eq!(p.value(0.2499), 0.0);
        assert!(!p.is_h1_in_time());
    }

    #[test]
    fn gaussian_peaks_at_center() {
        let p = PulseShape::Gaussian {
            amplitude: 3.0,
            center: 0.4,
            width: 0.05,
        };
        assert_eq!(p.value(0.4), 3.0);
        assert!(p.is_h1_in_time());
        assert_eq!(p.support(), None);
    }

    #[test]
    fn trapezoid_ramp_midpoint_is_half_amplitude() {
        let p = PulseShape::Trapezoidal {
            amplitude: 2.0,
            onset: 0.1,
            duration: 0.5,
            rise: 0.1,
        };
        assert!((p.value(0.15) - 1.0).abs() < 1e-15);
        assert!((p.value(0.55) - 1.0).abs() < 1e-12);
        assert_eq!(p.value(0.3), 2.0);
        assert!(p.is_h1_in_time());
    }

    #[test]
    fn biphasic_changes_sign_and_is_continuous_at_ends() {
        let p = PulseShape::BiphasicExponential {
            amplitude: 1.0,
            onset: 0.0,
            duration: 1.0,
            decay: 0.5,
        };
        assert!(p.value(0.25) > 0.0);
        assert!(p.value(0.75) < 0.0);
        assert!(p.value(1.0).abs() < 1e-15);
        assert!(p.value(1e-9).abs() < 1e-8);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(PulseShape::Rectangular {
            amplitude: 1.0,
            onset: 0.0,
            duration: 0.0
        }
        .validate()
        .is_err());
        assert!(PulseShape::Trapezoidal {
            amplitude: 1.0,
            onset: 0.0,
            duration: 1.0,
            rise: -0.1
        }
        .validate()
        .is_err());
        assert!(PulseShape::Trapezoidal {
            amplitude: 1.0,
            onset: 0.0,
            duration: 1.0,
            rise: 0.6
        }
        .validate()
        .is_err());
        assert!(PulseShape::Gaussian {
            amplitude: 1.0,
            center: 0.0,
            width: 0.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn rectangular_covering_k_intervals_has_k_samples() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        // nodes t^n = n/10; [0.3, 0.6) contains t = 0.3, 0.4, 0.5
        let p = PulseShape::Rectangular {
            amplitude: 1.0,
            onset: 0.3,
            duration: 0.3,
        };
        let s = time_samples(&p, &grid);
        let expected: Vec<bool> = (1..=10)
            .map(|n| {
                let t = grid.node(n);
                (0.3..0.6).contains(&t)
            })
            .collect();
        assert_eq!(s.iter().map(|&v| v != 0.0).collect::<Vec<_>>(), expected);
        assert_eq!(s.iter().filter(|&&v| v != 0.0).count(), 3);
    }

    #[test]
    fn gaussian_samples_match_direct_evaluation() {
        let grid = TimeGrid::new(2.0, 16).unwrap();
        let p = PulseShape::Gaussian {
            amplitude: 1.5,
            center: 1.0,
            width: 0.2,
        };
        let s = time_samples(&p, &grid);
        for (n, v) in s.iter().enumerate() {
            assert_eq!(v.to_bits(), p.value(grid.node(n + 1)).to_bits());
        }
        let zero = PulseShape::Gaussian {
            amplitude: 0.0,
            center: 1.0,
            width: 0.2,
        };
        assert!(time_samples(&zero, &grid).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forcing_rejects_times_outside_horizon() {
        let f = SeparableForcing::new(rect(), Arc::new(|_| 1.0), 1.0).unwrap();
        assert!(f.evaluate(1.5, [0.0, 0.0]).is_err());
        assert!(f.evaluate(-0.1, [0.0, 0.0]).is_err());
        assert_eq!(f.evaluate(0.3, [0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn general_closure_overrides_separable_form() {
        let mut f = SeparableForcing::new(rect(), Arc::new(|_| 1.0), 1.0).unwrap();
        f.general = Some(Arc::new(|t, x| t + x[0]));
        assert_eq!(f.evaluate(0.5, [0.25, 0.0]).unwrap(), 0.75);
    }
}
