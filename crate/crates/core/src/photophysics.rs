//! Effective four-level rate model of NV populations under optical pumping.
//!
//! State ordering is `(m₋₁, m₀, m₊₁, S)` everywhere: the three ground+excited spin
//! manifolds followed by the shelving singlet. Rates are linear rates in MHz
//! (inverse microseconds) and times are in microseconds.

use crate::error::{invalid, OdmrError, Result};
use crate::linalg::Matrix4;
use crate::scalar::Real;

/// Counts per second in one inverse microsecond.
pub const PER_MICROSECOND: f64 = 1.0e6;

/// Spin projection of a triplet manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Minus,
    Zero,
    Plus,
}

impl Spin {
    pub const ALL: [Spin; 3] = [Spin::Minus, Spin::Zero, Spin::Plus];

    /// Slot of this manifold in a population vector.
    pub fn index(self) -> usize {
        match self {
            Spin::Minus => 0,
            Spin::Zero => 1,
            Spin::Plus => 2,
        }
    }
}

/// Radiative and non-radiative NV rates in MHz. The ±1 manifolds share `k1` and `d1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants<T> {
    /// Radiative decay of the excited triplet.
    pub gamma: T,
    /// Intersystem crossing `|e₀⟩ → S`.
    pub k0: T,
    /// Intersystem crossing `|e±1⟩ → S`.
    pub k1: T,
    /// Singlet decay into `|g₀⟩`.
    pub d0: T,
    /// Singlet decay into each of `|g±1⟩`.
    pub d1: T,
}

impl<T: Real> Default for RateConstants<T> {
    fn default() -> Self {
        RateConstants {
            gamma: T::lit(66.50),
            k0: T::lit(10.78),
            k1: T::lit(91.07),
            d0: T::lit(4.835),
            d1: T::lit(1.063),
        }
    }
}

impl<T: Real> RateConstants<T> {
    pub fn new(gamma: T, k0: T, k1: T, d0: T, d1: T) -> Result<Self> {
        let rates = RateConstants { gamma, k0, k1, d0, d1 };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("k0", self.k0),
            ("k1", self.k1),
            ("d0", self.d0),
            ("d1", self.d1),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(invalid(name, format!("rate must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn shelving(&self, spin: Spin) -> T {
        match spin {
            Spin::Zero => self.k0,
            Spin::Minus | Spin::Plus => self.k1,
        }
    }

    pub fn deshelving(&self, spin: Spin) -> T {
        match spin {
            Spin::Zero => self.d0,
            Spin::Minus | Spin::Plus => self.d1,
        }
    }

    /// Total singlet decay rate `D₀ + 2D₁`.
    pub fn singlet_decay(&self) -> T {
        self.d0 + self.d1 + self.d1
    }
}

/// Spin-conserving optical excitation rate `R` (MHz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpField<T> {
    r: T,
}

impl<T: Real> PumpField<T> {
    pub fn new(r: T) -> Result<Self> {
        if !(r.is_finite() && r >= T::zero()) {
            return Err(invalid("r", format!("excitation rate must be ≥ 0, got {r}")));
        }
        Ok(PumpField { r })
    }

    pub fn from_saturation(s: T, rates: &RateConstants<T>) -> Result<Self> {
        Self::new(excitation_rate(s, rates))
    }

    pub fn rate(&self) -> T {
        self.r
    }

    pub fn saturation(&self, rates: &RateConstants<T>) -> T {
        saturation_parameter(self.r, rates)
    }
}

/// Probabilities of the four slots; see the module docs for the ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationVector<T> {
    pub m_minus: T,
    pub m_zero: T,
    pub m_plus: T,
    pub singlet: T,
}

impl<T: Real> PopulationVector<T> {
    pub fn from_array(p: [T; 4]) -> Self {
        PopulationVector {
            m_minus: p[0],
            m_zero: p[1],
            m_plus: p[2],
            singlet: p[3],
        }
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.m_minus, self.m_zero, self.m_plus, self.singlet]
    }

    pub fn uniform() -> Self {
        let q = T::lit(0.25);
        Self::from_array([q; 4])
    }

    pub fn pure(slot: usize) -> Self {
        let mut p = [T::zero(); 4];
        p[slot] = T::one();
        Self::from_array(p)
    }

    pub fn spin(&self, spin: Spin) -> T {
        self.to_array()[spin.index()]
    }

    pub fn total(&self) -> T {
        self.to_array().into_iter().fold(T::zero(), |a, b| a + b)
    }

    /// Checks the probability-vector invariants within `tol`.
    pub fn is_valid(&self, tol: T) -> bool {
        let p = self.to_array();
        p.iter().all(|&x| x.is_finite() && x >= -tol && x <= T::one() + tol)
            && (self.total() - T::one()).abs() <= tol
    }

    pub fn validate(&self, tol: T) -> Result<()> {
        if self.is_valid(tol) {
            Ok(())
        } else {
            Err(invalid("populations", format!("not a probability vector: {self:?}")))
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    /// Clamps round-off negatives to zero and renormalizes.
    pub(crate) fn cleaned(p: [T; 4]) -> Self {
        let clipped = p.map(|x| x.max(T::zero()));
        let total = clipped.iter().fold(T::zero(), |a, &b| a + b);
        Self::from_array(clipped.map(|x| x / total))
    }
}

/// Rate generator `Λ(R)` with `p'(t) = Λ p(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorMatrix<T>(Matrix4<T>);

impl<T: Real> GeneratorMatrix<T> {
    pub fn matrix(&self) -> &Matrix4<T> {
        &self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> T {
        self.0[(row, col)]
    }
}

/// Net shelving rate `K_i R / (R + K_i + γ)` out of spin manifold `i`.
pub fn effective_pump_rate<T: Real>(rates: &RateConstants<T>, r: T, spin: Spin) -> T {
    let k = rates.shelving(spin);
    k * r / (r + k + rates.gamma)
}

/// Fraction of manifold population sitting in the excited state, `R / (R + K_i + γ)`.
pub fn excited_fraction<T: Real>(rates: &RateConstants<T>, r: T, spin: Spin) -> T {
    r / (r + rates.shelving(spin) + rates.gamma)
}

/// Per-slot excited fractions with a zero for the singlet; `γ` times this dotted with
/// a population vector is the emitted photon rate.
pub fn emission_weights<T: Real>(rates: &RateConstants<T>, r: T) -> [T; 4] {
    [
        excited_fraction(rates, r, Spin::Minus),
        excited_fraction(rates, r, Spin::Zero),
        excited_fraction(rates, r, Spin::Plus),
        T::zero(),
    ]
}

pub fn build_generator<T: Real>(rates: &RateConstants<T>, r: T) -> Result<GeneratorMatrix<T>> {
    PumpField::new(r)?;
    let mut m = Matrix4::zeros();
    for spin in Spin::ALL {
        let i = spin.index();
        let k = effective_pump_rate(rates, r, spin);
        m[(i, i)] = -k;
        m[(3, i)] = k;
        m[(i, 3)] = rates.deshelving(spin);
    }
    m[(3, 3)] = -rates.singlet_decay();
    Ok(GeneratorMatrix(m))
}

/// `e^{Λt}` as a matrix.
pub fn propagator<T: Real>(generator: &GeneratorMatrix<T>, t: T) -> Result<Matrix4<T>> {
    if !(t.is_finite() && t >= T::zero()) {
        return Err(invalid("t", format!("evolution time must be ≥ 0, got {t}")));
    }
    generator.0.scale(t).expm()
}

pub fn propagate<T: Real>(
    generator: &GeneratorMatrix<T>,
    p0: &PopulationVector<T>,
    t: T,
) -> Result<PopulationVector<T>> {
    let u = propagator(generator, t)?;
    Ok(PopulationVector::from_array(u.mul_vec(&p0.to_array())))
}

/// Long-time limit of dark evolution: the singlet empties into the spin manifolds with
/// branching `D_i / (D₀ + 2D₁)` and spin populations are untouched.
pub fn wait_relaxation<T: Real>(rates: &RateConstants<T>) -> Matrix4<T> {
    let mut w = Matrix4::identity();
    let total = rates.singlet_decay();
    for spin in Spin::ALL {
        w[(spin.index(), 3)] = rates.deshelving(spin) / total;
    }
    w[(3, 3)] = T::zero();
    w
}

/// Stationary distribution of `Λ`, solved with the singlet row replaced by the
/// normalization constraint. Fails when pumping is absent and the null space is
/// degenerate.
pub fn steady_state<T: Real>(generator: &GeneratorMatrix<T>) -> Result<PopulationVector<T>> {
    let mut a = generator.0;
    for j in 0..4 {
        a[(3, j)] = T::one();
    }
    let p = a
        .solve(&[T::zero(), T::zero(), T::zero(), T::one()])
        .map_err(|_| OdmrError::DegenerateSteadyState)?;
    Ok(PopulationVector::cleaned(p))
}

/// Detected photon rate in counts/s: `εγ Σ_i R/(R+K_i+γ) m_i + bR`.
pub fn fluorescence_rate<T: Real>(
    p: &PopulationVector<T>,
    r: T,
    rates: &RateConstants<T>,
    epsilon: T,
    b: T,
) -> T {
    let w = emission_weights(rates, r);
    let emitted = w
        .iter()
        .zip(p.to_array().iter())
        .fold(T::zero(), |acc, (&wi, &pi)| acc + wi * pi);
    (epsilon * rates.gamma * emitted + b * r) * T::lit(PER_MICROSECOND)
}

/// Excitation rate at which MW-off fluorescence reaches half its asymptote.
pub fn saturation_rate<T: Real>(rates: &RateConstants<T>) -> T {
    let RateConstants { gamma, k0, k1, d0, d1 } = *rates;
    let two_d1 = d1 + d1;
    let num = (two_d1 + d0) * k0 * k1 + (two_d1 * k0 + d0 * k1) * gamma;
    let den = two_d1 * k0 + d0 * k1 + k0 * k1;
    num / den
}

/// `s = R / R_sat`.
pub fn saturation_parameter<T: Real>(r: T, rates: &RateConstants<T>) -> T {
    r / saturation_rate(rates)
}

/// `R = s · R_sat`.
pub fn excitation_rate<T: Real>(s: T, rates: &RateConstants<T>) -> T {
    s * saturation_rate(rates)
}
