//! Scalar time envelopes attached to Hamiltonian terms.

use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};

/// Complex amplitude that deserializes from either a plain number or an
/// `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "AmplitudeRepr", into = "AmplitudeRepr")]
pub struct Amplitude {
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AmplitudeRepr {
    Real(f64),
    Pair([f64; 2]),
}

impl From<AmplitudeRepr> for Amplitude {
    fn from(r: AmplitudeRepr) -> Self {
        match r {
            AmplitudeRepr::Real(re) => Amplitude { re, im: 0.0 },
            AmplitudeRepr::Pair([re, im]) => Amplitude { re, im },
        }
    }
}

impl From<Amplitude> for AmplitudeRepr {
    fn from(a: Amplitude) -> Self {
        if a.im == 0.0 {
            AmplitudeRepr::Real(a.re)
        } else {
            AmplitudeRepr::Pair([a.re, a.im])
        }
    }
}

impl Amplitude {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

impl From<f64> for Amplitude {
    fn from(re: f64) -> Self {
        Self { re, im: 0.0 }
    }
}

impl From<C64> for Amplitude {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Scalar envelope g(t) multiplying a Hamiltonian term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeSpec {
    /// g(t) = amplitude.
    Constant { amplitude: Amplitude },
    /// g(t) = amplitude * cos(angular_frequency * t + phase).
    Sinusoid { amplitude: Amplitude, angular_frequency: f64, phase: f64 },
    /// g(t) = amplitude * exp(-(t - center)^2 / (2 width^2)).
    GaussianPulse { amplitude: Amplitude, center: f64, width: f64 },
    /// Constant on each segment; `values` has one more entry than
    /// `breakpoints` and the last segment extends to the horizon.
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<Amplitude> },
}

impl EnvelopeSpec {
    /// A constant envelope with real value `x`.
    pub fn constant(x: f64) -> Self {
        EnvelopeSpec::Constant { amplitude: x.into() }
    }

    /// A constant envelope with complex value `z`.
    pub fn constant_complex(z: C64) -> Self {
        EnvelopeSpec::Constant { amplitude: z.into() }
    }

    /// amplitude * sin(omega t), as a phase-shifted sinusoid.
    pub fn sine(amplitude: f64, omega: f64) -> Self {
        EnvelopeSpec::Sinusoid {
            amplitude: amplitude.into(),
            angular_frequency: omega,
            phase: -std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvelopeSpec::Constant { .. } => Ok(()),
            EnvelopeSpec::Sinusoid { angular_frequency, phase, .. } => {
                if !angular_frequency.is_finite() || !phase.is_finite() {
                    return Err(Error::InvalidEnvelope(
                        "sinusoid frequency and phase must be finite".into(),
                    ));
                }
                Ok(())
            }
            EnvelopeSpec::GaussianPulse { center, width, .. } => {
                if !(*width > 0.0) || !center.is_finite() {
                    return Err(Error::InvalidEnvelope(format!(
                        "gaussian pulse needs finite center and width > 0, got center {center}, width {width}"
                    )));
                }
                Ok(())
            }
            EnvelopeSpec::PiecewiseConstant { breakpoints, values } => {
                if values.len() != breakpoints.len() + 1 {
                    return Err(Error::InvalidEnvelope(format!(
                        "piecewise envelope needs len(values) == len(breakpoints) + 1, got {} and {}",
                        values.len(),
                        breakpoints.len()
                    )));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidEnvelope(
                        "piecewise breakpoints must be strictly increasing".into(),
                    ));
                }
                if breakpoints.iter().any(|b| !b.is_finite()) {
                    return Err(Error::InvalidEnvelope("piecewise breakpoints must be finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> C64 {
        match self {
            EnvelopeSpec::Constant { amplitude } => amplitude.value(),
            EnvelopeSpec::Sinusoid { amplitude, angular_frequency, phase } => {
                amplitude.value() * (angular_frequency * t + phase).cos()
            }
            EnvelopeSpec::GaussianPulse { amplitude, center, width } => {
                let z = (t - center) / width;
                amplitude.value() * (-0.5 * z * z).exp()
            }
            EnvelopeSpec::PiecewiseConstant { breakpoints, values } => {
                let seg = breakpoints.partition_point(|&b| b <= t);
                values[seg].value()
            }
        }
    }

    /// Scales the amplitude(s) by a real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |a: &Amplitude| Amplitude::new(a.re * factor, a.im * factor);
        match self {
            EnvelopeSpec::Constant { amplitude } => {
                EnvelopeSpec::Constant { amplitude: scale(amplitude) }
            }
            EnvelopeSpec::Sinusoid { amplitude, angular_frequency, phase } => {
                EnvelopeSpec::Sinusoid {
                    amplitude: scale(amplitude),
                    angular_frequency: *angular_frequency,
                    phase: *phase,
                }
            }
            EnvelopeSpec::GaussianPulse { amplitude, center, width } => {
                EnvelopeSpec::GaussianPulse {
                    amplitude: scale(amplitude),
                    center: *center,
                    width: *width,
                }
            }
            EnvelopeSpec::PiecewiseConstant { breakpoints, values } => {
                EnvelopeSpec::PiecewiseConstant {
                    breakpoints: breakpoints.clone(),
                    values: values.iter().map(scale).collect(),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_segments_and_bounds() {
        let env = EnvelopeSpec::PiecewiseConstant {
            breakpoints: vec![1.0, 2.0],
            values: vec![0.5.into(), Amplitude::new(0.0, -1.0), 2.0.into()],
        };
        env.validate().unwrap();
        assert_eq!(env.eval(0.0), C64::new(0.5, 0.0));
        assert_eq!(env.eval(0.999), C64::new(0.5, 0.0));
        assert_eq!(env.eval(1.0), C64::new(0.0, -1.0));
        assert_eq!(env.eval(5.0), C64::new(2.0, 0.0));
    }

    #[test]
    fn piecewise_shape_errors() {
        let bad_len = EnvelopeSpec::PiecewiseConstant {
            breakpoints: vec![1.0],
            values: vec![0.5.into()],
        };
        assert!(bad_len.validate().is_err());
        let bad_order = EnvelopeSpec::PiecewiseConstant {
            breakpoints: vec![2.0, 1.0],
            values: vec![0.5.into(), 1.0.into(), 2.0.into()],
        };
        assert!(bad_order.validate().is_err());
    }

    #[test]
    fn sine_helper_matches_sin() {
        let env = EnvelopeSpec::sine(0.4, 1.0);
        for &t in &[0.0, 0.3, 1.7] {
            assert!((env.eval(t).re - 0.4 * t.sin()).abs() < 1e-15);
            assert_eq!(env.eval(t).im, 0.0);
        }
    }

    #[test]
    fn gaussian_pulse_width_must_be_positive() {
        let env = EnvelopeSpec::GaussianPulse {
            amplitude: 1.0.into(),
            center: 0.5,
            width: 0.0,
        };
        assert!(env.validate().is_err());
    }

    #[test]
    fn scaling_by_powers_of_two_is_exact() {
        let env = EnvelopeSpec::Sinusoid {
            amplitude: Amplitude::new(0.3, 0.7),
            angular_frequency: 2.0,
            phase: 0.1,
        };
        let half = env.scaled(0.5);
        for &t in &[0.0, 0.4, 2.2] {
            assert_eq!(half.eval(t), env.eval(t) * 0.5);
        }
    }

    #[test]
    fn amplitude_json_roundtrip() {
        let a: Amplitude = serde_json::from_str("0.25").unwrap();
        assert_eq!(a, Amplitude::new(0.25, 0.0));
        let b: Amplitude = serde_json::from_str("[0.0, -0.2]").unwrap();
        assert_eq!(b, Amplitude::new(0.0, -0.2));
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, "[0.0,-0.2]");
    }
}
