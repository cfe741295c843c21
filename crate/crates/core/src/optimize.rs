//! Deterministic box-constrained minimizer: a coarse grid scan followed by
//! Nelder–Mead refinement in unit-cube coordinates.
//!
//! Grid cells are evaluated on the rayon pool and gathered in index order, so the
//! result does not depend on the number of worker threads.

use rayon::prelude::*;

use crate::error::{invalid, OdmrError, Result};
use crate::scalar::Real;

/// Default relative tolerance on the objective.
pub const DEFAULT_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchDim<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
    pub scale: Scale,
    /// An optimum pressed against this dimension's bounds is legitimate (e.g. a
    /// fraction constrained to ≤ 1) and does not raise the boundary flag.
    pub boundary_ok: bool,
}

impl<T: Real> SearchDim<T> {
    pub fn new(name: impl Into<String>, lower: T, upper: T, scale: Scale) -> Self {
        SearchDim {
            name: name.into(),
            lower,
            upper,
            scale,
            boundary_ok: false,
        }
    }

    pub fn log(name: impl Into<String>, lower: T, upper: T) -> Self {
        Self::new(name, lower, upper, Scale::Log)
    }

    pub fn linear(name: impl Into<String>, lower: T, upper: T) -> Self {
        Self::new(name, lower, upper, Scale::Linear)
    }

    pub fn allow_boundary(mut self) -> Self {
        self.boundary_ok = true;
        self
    }

    /// Maps `u ∈ [0, 1]` onto the dimension.
    pub fn value(&self, u: T) -> T {
        let u = u.max(T::zero()).min(T::one());
        match self.scale {
            Scale::Linear => self.lower + (self.upper - self.lower) * u,
            Scale::Log => (self.lower.ln() + (self.upper.ln() - self.lower.ln()) * u)
                .exp()
                .max(self.lower)
                .min(self.upper),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace<T> {
    dims: Vec<SearchDim<T>>,
    coarse_points_per_dim: usize,
}

impl<T: Real> SearchSpace<T> {
    pub fn new(dims: Vec<SearchDim<T>>, coarse_points_per_dim: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(invalid("dims", "search space needs at least one dimension"));
        }
        if coarse_points_per_dim < 2 {
            return Err(invalid("coarse_points_per_dim", "need at least two points per dimension"));
        }
        for d in &dims {
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(invalid("dims", format!("`{}` needs finite lower < upper", d.name)));
            }
            if d.scale == Scale::Log && !(d.lower > T::zero()) {
                return Err(invalid("dims", format!("log-scaled `{}` needs lower > 0", d.name)));
            }
        }
        Ok(SearchSpace {
            dims,
            coarse_points_per_dim,
        })
    }

    pub fn dims(&self) -> &[SearchDim<T>] {
        &self.dims
    }

    pub fn coarse_points_per_dim(&self) -> usize {
        self.coarse_points_per_dim
    }

    fn point(&self, u: &[T]) -> Vec<T> {
        self.dims.iter().zip(u).map(|(d, &ui)| d.value(ui)).collect()
    }

    fn grid_unit(&self, flat: usize) -> Vec<T> {
        let p = self.coarse_points_per_dim;
        let step = T::one() / T::lit((p - 1) as f64);
        let mut rem = flat;
        let mut u = vec![T::zero(); self.dims.len()];
        for slot in u.iter_mut().rev() {
            *slot = T::lit((rem % p) as f64) * step;
            rem /= p;
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult<T> {
    pub argmin: Vec<(String, T)>,
    pub objective: T,
    pub evaluations: usize,
    pub boundary_flag: bool,
    /// Names of the dimensions whose optimum sits against a bound.
    pub boundary_dims: Vec<String>,
}

impl<T: Real> OptimResult<T> {
    pub fn get(&self, name: &str) -> Option<T> {
        self.argmin.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn values(&self) -> Vec<T> {
        self.argmin.iter().map(|&(_, v)| v).collect()
    }

    pub(crate) fn boundary_error(&self) -> OdmrError {
        OdmrError::BoundaryOptimum {
            dim: self.boundary_dims.join(","),
            objective: self.objective.as_f64(),
            argmin: self.argmin.iter().map(|(n, v)| (n.clone(), v.as_f64())).collect(),
        }
    }
}

fn sanitize<T: Real>(v: T) -> T {
    if v.is_finite() {
        v
    } else {
        T::infinity()
    }
}

/// Minimizes `objective` over `space`. Non-finite objective values are treated as
/// infeasible points.
pub fn minimize<T, F>(objective: F, space: &SearchSpace<T>, rel_tol: T) -> Result<OptimResult<T>>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    let d = space.dims.len();
    let p = space.coarse_points_per_dim;
    let total = p.checked_pow(d as u32).ok_or_else(|| invalid("coarse_points_per_dim", "grid too large"))?;

    let coarse: Vec<T> = (0..total)
        .into_par_iter()
        .map(|i| sanitize(objective(&space.point(&space.grid_unit(i)))))
        .collect();
    let mut evaluations = total;

    let (best_idx, best_val) = coarse
        .iter()
        .enumerate()
        .fold((0usize, T::infinity()), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    if !best_val.is_finite() {
        return Err(OdmrError::NoFiniteObjective);
    }

    let cell = T::one() / T::lit((p - 1) as f64);
    let eval_unit = |u: &[T]| sanitize(objective(&space.point(u)));
    let mut start = space.grid_unit(best_idx);
    let mut start_val = best_val;
    let mut step = cell;
    for _ in 0..2 {
        let (u, v, n) = nelder_mead(&eval_unit, &start, start_val, step, rel_tol);
        evaluations += n;
        let improved = v < start_val;
        if v <= start_val {
            start = u;
            start_val = v;
        }
        if !improved {
            break;
        }
        step = cell * T::lit(0.25);
    }

    let half_cell = cell * T::lit(0.5);
    let boundary_dims: Vec<String> = space
        .dims
        .iter()
        .zip(start.iter())
        .filter(|(dim, &u)| !dim.boundary_ok && (u < half_cell || u > T::one() - half_cell))
        .map(|(dim, _)| dim.name.clone())
        .collect();

    Ok(OptimResult {
        argmin: space
            .dims
            .iter()
            .zip(space.point(&start))
            .map(|(dim, v)| (dim.name.clone(), v))
            .collect(),
        objective: start_val,
        evaluations,
        boundary_flag: !boundary_dims.is_empty(),
        boundary_dims,
    })
}

fn clamp_unit<T: Real>(u: &mut [T]) {
    for x in u.iter_mut() {
        *x = x.max(T::zero()).min(T::one());
    }
}

/// Nelder–Mead on the unit cube with projection onto the box. Returns the best
/// vertex, its value, and the evaluation count.
fn nelder_mead<T: Real, F: Fn(&[T]) -> T>(f: &F, x0: &[T], f0: T, step: T, rel_tol: T) -> (Vec<T>, T, usize) {
    let d = x0.len();
    let max_evals = 400 * d + 200;
    let x_tol = T::lit(1e-5);
    let half = T::lit(0.5);
    let mut evals = 0usize;

    let mut simplex: Vec<(Vec<T>, T)> = vec![(x0.to_vec(), f0)];
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] = if v[i] + step <= T::one() { v[i] + step } else { v[i] - step };
        clamp_unit(&mut v);
        let fv = f(&v);
        evals += 1;
        simplex.push((v, fv));
    }

    let order = |s: &mut Vec<(Vec<T>, T)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    };

    while evals < max_evals {
        order(&mut simplex);
        let best = simplex[0].1;
        let worst = simplex[d].1;
        let spread = if worst.is_finite() { worst - best } else { T::infinity() };
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(&simplex[0].0).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
            .fold(T::zero(), T::max);
        if spread <= rel_tol * best.abs() && diameter <= x_tol {
            break;
        }
        if diameter <= T::epsilon() {
            break;
        }

        let mut centroid = vec![T::zero(); d];
        for (v, _) in &simplex[..d] {
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c = *c + x / T::lit(d as f64);
            }
        }
        let along = |coef: T| {
            let mut v: Vec<T> = centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(&c, &w)| c + coef * (c - w))
                .collect();
            clamp_unit(&mut v);
            v
        };

        let xr = along(T::one());
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(T::lit(2.0));
            let fe = f(&xe);
            evals += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let xc = along(half);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-half);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let mut v: Vec<T> = anchor.iter().zip(&vertex.0).map(|(&a, &x)| a + half * (x - a)).collect();
                    clamp_unit(&mut v);
                    let fv = f(&v);
                    evals += 1;
                    *vertex = (v, fv);
                }
            }
        }
    }
    order(&mut simplex);
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, evals)
}
