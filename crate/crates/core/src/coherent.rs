//! Coherent-state algebra.
//!
//! Every state that appears in the amplifier is a coherent state or a
//! classical mixture of coherent states, so the whole model works with
//! complex amplitudes and weighted lists of them. No Fock-basis expansion
//! is ever needed.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScaError};

/// Tolerance used for unitarity and normalization checks.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Complex amplitude of a single-mode coherent state `|alpha>`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoherentAmplitude(pub Complex64);

impl CoherentAmplitude {
    pub const VACUUM: Self = Self(Complex64 { re: 0.0, im: 0.0 });

    pub fn new(re: f64, im: f64) -> Self {
        Self(Complex64::new(re, im))
    }

    pub fn real(re: f64) -> Self {
        Self::new(re, 0.0)
    }

    pub fn from_polar(modulus: f64, phase: f64) -> Self {
        Self(Complex64::from_polar(modulus, phase))
    }

    /// Real amplitude whose mean photon number is `mean_photons`.
    pub fn from_mean_photons(mean_photons: f64) -> Self {
        Self::real(mean_photons.sqrt())
    }

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    /// `|alpha|^2`.
    pub fn mean_photon_number(self) -> f64 {
        self.0.norm_sqr()
    }

    pub fn modulus(self) -> f64 {
        self.0.norm()
    }

    pub fn rotate(self, phase: f64) -> Self {
        Self(self.0 * Complex64::from_polar(1.0, phase))
    }

    pub fn scale(self, factor: f64) -> Self {
        Self(self.0 * factor)
    }

    /// `|self - other|^2`.
    pub fn distance_sq(self, other: Self) -> f64 {
        (self.0 - other.0).norm_sqr()
    }
}

impl From<Complex64> for CoherentAmplitude {
    fn from(value: Complex64) -> Self {
        Self(value)
    }
}

impl Add for CoherentAmplitude {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for CoherentAmplitude {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Neg for CoherentAmplitude {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl Mul<f64> for CoherentAmplitude {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl fmt::Display for CoherentAmplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}i", self.0.re, self.0.im)
    }
}

/// `|<a|b>|^2 = exp(-|a - b|^2)`.
pub fn overlap_sq(a: CoherentAmplitude, b: CoherentAmplitude) -> f64 {
    (-a.distance_sq(b)).exp()
}

/// Two-port output of a lossless beamsplitter with real amplitudes `t`, `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamsplitterOutput {
    /// `r*a + t*b`: the port that carries light onward.
    pub retained: CoherentAmplitude,
    /// `t*a - r*b`: the port that is dark when `b = (t/r) a`.
    pub monitor: CoherentAmplitude,
}

pub(crate) fn check_unitary(t: f64, r: f64) -> Result<()> {
    let in_range = (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&r);
    if in_range && (t * t + r * r - 1.0).abs() <= NORM_TOLERANCE {
        Ok(())
    } else {
        Err(ScaError::NonUnitary { t, r })
    }
}

/// Combine coherent inputs `a` and `b` on a beamsplitter.
///
/// The monitor port carries `t*a - r*b` and the retained port `r*a + t*b`.
/// With this sign choice a guess `b = (t/r) a` empties the monitor port and
/// leaves `a / r` in the retained port.
pub fn beamsplitter(
    a: CoherentAmplitude,
    b: CoherentAmplitude,
    t: f64,
    r: f64,
) -> Result<BeamsplitterOutput> {
    check_unitary(t, r)?;
    Ok(BeamsplitterOutput {
        retained: a * r + b * t,
        monitor: a * t - b * r,
    })
}

/// One weighted coherent component of a [`Mixture`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub amplitude: CoherentAmplitude,
}

/// Classical mixture of coherent states, `sum_i w_i |a_i><a_i|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    components: Vec<Component>,
}

impl Mixture {
    /// Build a mixture from `(weight, amplitude)` pairs. Weights must be
    /// non-negative; they need not sum to one.
    pub fn new<I>(components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, CoherentAmplitude)>,
    {
        let components: Vec<Component> = components
            .into_iter()
            .map(|(weight, amplitude)| Component { weight, amplitude })
            .collect();
        if components.is_empty() {
            return Err(ScaError::EmptyMixture);
        }
        if let Some(bad) = components
            .iter()
            .find(|c| !(c.weight.is_finite() && c.weight >= 0.0))
        {
            return Err(ScaError::InvalidWeight(bad.weight));
        }
        Ok(Self { components })
    }

    pub fn pure(amplitude: CoherentAmplitude) -> Self {
        Self {
            components: vec![Component {
                weight: 1.0,
                amplitude,
            }],
        }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_weight() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Rescale weights to sum to one. Fails when every weight is zero.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total_weight();
        if total <= 0.0 {
            return Err(ScaError::NotNormalized(total));
        }
        Ok(Self {
            components: self
                .components
                .iter()
                .map(|c| Component {
                    weight: c.weight / total,
                    amplitude: c.amplitude,
                })
                .collect(),
        })
    }

    pub(crate) fn ensure_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(ScaError::NotNormalized(self.total_weight()))
        }
    }

    /// Apply the same phase rotation to every component.
    pub fn rotate(&self, phase: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| Component {
                    weight: c.weight,
                    amplitude: c.amplitude.rotate(phase),
                })
                .collect(),
        }
    }
}

/// `<target| rho |target>` for a normalized mixture `rho`.
pub fn mixture_fidelity(mixture: &Mixture, target: CoherentAmplitude) -> Result<f64> {
    mixture.ensure_normalized()?;
    let f = mixture
        .components()
        .iter()
        .map(|c| c.weight * overlap_sq(c.amplitude, target))
        .sum::<f64>();
    Ok(f.clamp(0.0, 1.0))
}
