//! Gaussian quadrature rules and one-dimensional search primitives.

use std::sync::OnceLock;

use crate::error::{OdmrError, Result};
use crate::scalar::Real;

/// Node count of the Gauss–Hermite rule used for detuning convolutions.
pub const HERMITE_NODES: usize = 64;

/// Gauss–Hermite nodes and weights for the weight function `e^{-x²}` (Golub–Welsch
/// equivalent, found by Newton iteration on the orthonormal recurrence).
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut nodes = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0].0,
            3 => 1.91 * z - 0.91 * nodes[1].0,
            _ => 2.0 * z - nodes[i - 2].0,
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let w = 2.0 / (pp * pp);
        nodes[i] = (z, w);
        nodes[n - 1 - i] = (-z, w);
    }
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes
}

fn hermite_64() -> &'static [(f64, f64)] {
    static CACHE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    CACHE.get_or_init(|| gauss_hermite(HERMITE_NODES))
}

/// Expectation of `f(x)` for `x ~ N(mean, sd²)` with the 64-node Gauss–Hermite rule.
pub fn gaussian_expectation<T: Real, F: Fn(T) -> T>(f: F, mean: T, sd: T) -> T {
    let scale = T::SQRT_2() * sd;
    let sum = hermite_64()
        .iter()
        .fold(T::zero(), |acc, &(x, w)| acc + T::lit(w) * f(mean + scale * T::lit(x)));
    sum / T::PI().sqrt()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        nodes.push((z, 2.0 / ((1.0 - z * z) * pp * pp)));
    }
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes
}

/// Composite Gauss–Legendre rule of order `order` on `panels` equal panels of `[a, b]`.
pub fn composite_legendre<T: Real>(a: T, b: T, panels: usize, order: usize) -> Vec<(T, T)> {
    let base = gauss_legendre(order);
    let width = (b - a) / T::lit(panels as f64);
    let half = width * T::lit(0.5);
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + width * T::lit(p as f64) + half;
        for &(x, w) in &base {
            out.push((mid + half * T::lit(x), half * T::lit(w)));
        }
    }
    out
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]` to absolute tolerance `tol`.
/// Returns `(argmin, min)`.
pub fn golden_section<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, tol: T) -> (T, T) {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut guard = 0;
    while (b - a).abs() > tol && guard < 300 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        guard += 1;
    }
    let x = (a + b) * T::lit(0.5);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Bisection for a sign change of `g` on `[lo, hi]`, to absolute tolerance `tol`.
pub fn bisect<T: Real, F: FnMut(T) -> Result<T>>(mut g: F, lo: T, hi: T, tol: T) -> Result<T> {
    let (mut a, mut b) = (lo, hi);
    let ga = g(a)?;
    let gb = g(b)?;
    if ga == T::zero() {
        return Ok(a);
    }
    if gb == T::zero() {
        return Ok(b);
    }
    if (ga > T::zero()) == (gb > T::zero()) {
        return Err(OdmrError::Unbracketed);
    }
    let negative_at_a = ga < T::zero();
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mid = (a + b) * T::lit(0.5);
        let gm = g(mid)?;
        if gm == T::zero() {
            return Ok(mid);
        }
        if (gm < T::zero()) == negative_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((a + b) * T::lit(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_integrates_even_moments() {
        // ∫ x^{2k} e^{-x²} dx = Γ(k + 1/2).
        let rule = gauss_hermite(HERMITE_NODES);
        let moment = |k: i32| rule.iter().map(|&(x, w)| w * x.powi(2 * k)).sum::<f64>();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((moment(0) - sqrt_pi).abs() < 1e-13);
        assert!((moment(1) - sqrt_pi / 2.0).abs() < 1e-13);
        assert!((moment(3) - 15.0 * sqrt_pi / 8.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_expectation_of_quadratic() {
        let got: f64 = gaussian_expectation(|x| x * x, 1.5, 0.3);
        assert!((got - (1.5 * 1.5 + 0.09)).abs() < 1e-13);
    }

    #[test]
    fn legendre_is_exact_for_polynomials() {
        let rule = composite_legendre(0.0f64, 3.0, 4, 5);
        let integral: f64 = rule.iter().map(|&(x, w)| w * (x.powi(9) - 2.0 * x)).sum();
        let exact = 3f64.powi(10) / 10.0 - 9.0;
        assert!((integral - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, fx) = golden_section(|x: f64| (x - 0.3).powi(2) + 2.0, -1.0, 4.0, 1e-7);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bisect_requires_bracket() {
        let r = bisect(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, 1e-12);
        assert_eq!(r, Err(OdmrError::Unbracketed));
        let root = bisect(|x: f64| Ok(x * x - 2.0), 0.0, 2.0, 1e-13).unwrap();
        assert!((root - 2f64.sqrt()).abs() < 1e-12);
    }
}
