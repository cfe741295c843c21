//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

/// Published rate constants `(γ, K₀, K₁, D₀, D₁)`, MHz.
pub const RATES: (f64, f64, f64, f64, f64) = (66.50, 10.78, 91.07, 4.835, 1.063);

/// Right-hand side of the MW-off rate equations for `(m₋₁, m₀, m₊₁, S)`.
pub fn rate_rhs(r: f64, p: &[f64; 4]) -> [f64; 4] {
    let (g, k0, k1, d0, d1) = RATES;
    let k = [k1, k0, k1];
    let d = [d1, d0, d1];
    let mut out = [0.0; 4];
    for i in 0..3 {
        let shelve = k[i] * r / (r + k[i] + g) * p[i];
        out[i] = -shelve + d[i] * p[3];
        out[3] += shelve - d[i] * p[3];
    }
    out
}

/// Fixed-step RK4 for `y' = f(y)`.
pub fn rk4<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], y0: [f64; N], t: f64, dt: f64) -> [f64; N] {
    let steps = (t / dt).ceil() as usize;
    let h = t / steps as f64;
    let mut y = y0;
    let axpy = |y: &[f64; N], k: &[f64; N], a: f64| {
        let mut o = *y;
        for i in 0..N {
            o[i] += a * k[i];
        }
        o
    };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, h / 2.0));
        let k3 = f(&axpy(&y, &k2, h / 2.0));
        let k4 = f(&axpy(&y, &k3, h));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Coherently driven equations for `(m₋₁, m₀, m₊₁, S, Re ρ₀₁, Im ρ₀₁)` with
/// `Γ₂ = R + 2√ln2/T₂*`.
pub fn bloch_rhs(r: f64, omega: f64, delta: f64, t2star: f64, y: &[f64; 6]) -> [f64; 6] {
    let base = rate_rhs(r, &[y[0], y[1], y[2], y[3]]);
    let g2 = r + 2.0 * 2f64.ln().sqrt() / t2star;
    let (re, im) = (y[4], y[5]);
    // i(Ω/2)(ρ₁₀ − ρ₀₁) = i(Ω/2)(−2i Im ρ₀₁) = Ω Im ρ₀₁
    let transfer = omega * im;
    let pop_diff = y[2] - y[1];
    [
        base[0],
        base[1] + transfer,
        base[2] - transfer,
        base[3],
        -g2 * re + delta * im,
        -g2 * im - delta * re + omega / 2.0 * pop_diff,
    ]
}

/// Emitted count rate `εγ Σ R/(R+K_i+γ) m_i + bR`, counts/s.
pub fn fluorescence(r: f64, m: &[f64], epsilon: f64, b: f64) -> f64 {
    let (g, k0, k1, _, _) = RATES;
    let w = [r / (r + k1 + g), r / (r + k0 + g), r / (r + k1 + g)];
    (epsilon * g * (w[0] * m[0] + w[1] * m[1] + w[2] * m[2]) + b * r) * 1e6
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Normalized random population vector from four weights.
pub fn normalized(w: [f64; 4]) -> [f64; 4] {
    let s: f64 = w.iter().sum();
    [w[0] / s, w[1] / s, w[2] / s, w[3] / s]
}
