//! Liouvillian assembly, time propagation and steady states.

use nalgebra::Schur;

use crate::error::{Error, Result};
use crate::linalg::{
    c, mat_exp, null_space, sandwich, trace_functional, unvectorize, vectorize, CMatrix, CVector, C64, NULL_SPACE_TOL,
};
use crate::state::{DensityMatrix, LEVELS};
use crate::systems::LindbladModel;

/// Maximum allowed trace drift before propagation is reported as failed.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// 9×9 generator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    matrix: CMatrix,
    source: LindbladModel,
}

impl Liouvillian {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn model(&self) -> &LindbladModel {
        &self.source
    }

    /// Largest entry of `vec(I)†·L`; zero for a trace-preserving generator.
    pub fn trace_residual(&self) -> f64 {
        (trace_functional(LEVELS) * &self.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the generator, via a complex Schur decomposition.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let schur = Schur::new(self.matrix.clone());
        let (_, t) = schur.unpack();
        (0..t.nrows()).map(|k| t[(k, k)]).collect()
    }

    /// Slowest nonzero decay rate `min |Re λ|` over eigenvalues with `|λ|` above `tol`.
    pub fn slowest_rate(&self, tol: f64) -> Option<f64> {
        self.eigenvalues()
            .into_iter()
            .filter(|z| z.norm() > tol)
            .map(|z| z.re.abs())
            .filter(|r| *r > 0.0)
            .min_by(f64::total_cmp)
    }

    /// Superoperator of the feeding part `J(ρ) = Σ rate·A_l ρ A_r†`.
    pub fn jump_superoperator(&self) -> CMatrix {
        let mut j = CMatrix::zeros(LEVELS * LEVELS, LEVELS * LEVELS);
        for t in &self.source.terms {
            j += sandwich(&self.source.channels[t.left], &self.source.channels[t.right].adjoint()) * c(t.rate);
        }
        j
    }

    /// `L·vec(ρ)`, unvectorized.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        unvectorize(&(&self.matrix * vectorize(rho)), LEVELS)
    }
}

/// Assembles `ρ ↦ −i[H, ρ] + Σ rate·(A_l ρ A_r† − ½{A_r† A_l, ρ})`.
pub fn liouvillian(model: &LindbladModel) -> Liouvillian {
    let id = CMatrix::identity(LEVELS, LEVELS);
    let h = &model.hamiltonian;
    let minus_i = C64::new(0.0, -1.0);
    let mut l = (sandwich(h, &id) - sandwich(&id, h)) * minus_i;
    for t in &model.terms {
        let a = &model.channels[t.left];
        let b_dag = model.channels[t.right].adjoint();
        let loss = &b_dag * a;
        l += sandwich(a, &b_dag) * c(t.rate);
        l -= (sandwich(&loss, &id) + sandwich(&id, &loss)) * c(0.5 * t.rate);
    }
    Liouvillian { matrix: l, source: model.clone() }
}

fn checked_state(vec: &CVector, time: f64) -> Result<DensityMatrix> {
    let rho = DensityMatrix::from_raw_hermitized(unvectorize(vec, LEVELS));
    let trace = rho.trace();
    if !trace.is_finite() || (trace - 1.0).abs() > TRACE_DRIFT_LIMIT {
        return Err(Error::Propagation { time, reason: format!("trace drifted to {trace}") });
    }
    Ok(rho)
}

/// `unvec(exp(L·t)·vec(ρ₀))`, re-Hermitized.
pub fn propagate(l: &Liouvillian, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("propagation time must be ≥ 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let step = mat_exp(&l.matrix, t).map_err(|e| Error::Propagation { time: t, reason: e.to_string() })?;
    checked_state(&(step * vectorize(rho0.matrix())), t)
}

/// Propagates through an increasing time grid, reusing the step propagator whenever
/// consecutive spacings coincide.
pub fn propagate_series(l: &Liouvillian, rho0: &DensityMatrix, times: &[f64]) -> Result<Vec<DensityMatrix>> {
    let Some(&first) = times.first() else {
        return Ok(Vec::new());
    };
    if !(first >= 0.0) {
        return Err(Error::invalid("time grid must start at t ≥ 0"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut current = propagate(l, rho0, first)?;
    out.push(current.clone());
    let mut cached: Option<(f64, CMatrix)> = None;
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let reuse = matches!(&cached, Some((h, _)) if (h - dt).abs() <= 1e-13 * dt.abs());
        if !reuse {
            let step = mat_exp(&l.matrix, dt).map_err(|e| Error::Propagation { time: w[1], reason: e.to_string() })?;
            cached = Some((dt, step));
        }
        let step = &cached.as_ref().expect("step cached above").1;
        current = checked_state(&(step * vectorize(current.matrix())), w[1])?;
        out.push(current.clone());
    }
    Ok(out)
}

/// `exp(G·t)·v₀` on an increasing grid for an arbitrary generator, with the same
/// step reuse as [`propagate_series`]. No trace checks: `G` need not preserve trace.
pub(crate) fn evolve_series(generator: &CMatrix, v0: &CVector, times: &[f64]) -> Result<Vec<CVector>> {
    let Some(&first) = times.first() else {
        return Ok(Vec::new());
    };
    if !(first >= 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("grid must start at t ≥ 0 and be strictly increasing"));
    }
    let mut current = if first == 0.0 { v0.clone() } else { mat_exp(generator, first)? * v0 };
    let mut out = Vec::with_capacity(times.len());
    out.push(current.clone());
    let mut cached: Option<(f64, CMatrix)> = None;
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let reuse = matches!(&cached, Some((h, _)) if (h - dt).abs() <= 1e-13 * dt.abs());
        if !reuse {
            cached = Some((dt, mat_exp(generator, dt)?));
        }
        current = &cached.as_ref().expect("step cached above").1 * current;
        out.push(current.clone());
    }
    Ok(out)
}

/// Projector onto the stationary subspace along the decaying modes:
/// `P = R (Lᴴ R)⁻¹ Lᴴ` from right and left null vectors of `L`. For generators without
/// undamped oscillations, `exp(L·t) → P` as `t → ∞`.
pub fn stationary_projector(l: &Liouvillian) -> Result<CMatrix> {
    let right = null_space(&l.matrix, NULL_SPACE_TOL);
    let left = null_space(&l.matrix.adjoint(), NULL_SPACE_TOL);
    if right.is_empty() || right.len() != left.len() {
        return Err(Error::invalid(format!(
            "stationary subspace is ill-defined ({} right vs {} left null vectors)",
            right.len(),
            left.len()
        )));
    }
    let r = CMatrix::from_columns(&right);
    let lf = CMatrix::from_columns(&left);
    let overlap = lf.adjoint() * &r;
    let inv = overlap.try_inverse().ok_or_else(|| Error::invalid("left and right null spaces are orthogonal"))?;
    Ok(r * inv * lf.adjoint())
}

/// `lim_{t→∞} exp(L·t) ρ₀`, computed directly from the stationary projector.
pub fn stationary_limit(l: &Liouvillian, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    let p = stationary_projector(l)?;
    let rho = DensityMatrix::from_raw_hermitized(unvectorize(&(p * vectorize(rho0.matrix())), LEVELS));
    let trace = rho.trace();
    if (trace - 1.0).abs() > TRACE_DRIFT_LIMIT {
        return Err(Error::invalid(format!("stationary limit has trace {trace}")));
    }
    Ok(rho)
}

/// Unique stationary state, from the singular-value null space of `L`.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    steady_state_with_tol(l, NULL_SPACE_TOL)
}

pub fn steady_state_with_tol(l: &Liouvillian, tol: f64) -> Result<DensityMatrix> {
    let ns = null_space(&l.matrix, tol);
    if ns.len() != 1 {
        return Err(Error::NonUniqueSteadyState { dim: ns.len() });
    }
    let m = unvectorize(&ns[0], LEVELS);
    let trace = m.trace();
    if trace.norm() < 1e-14 {
        return Err(Error::invalid("null vector of the Liouvillian has zero trace"));
    }
    Ok(DensityMatrix::from_raw_hermitized(m / trace))
}
