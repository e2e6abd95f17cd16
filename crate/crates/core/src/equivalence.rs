//! Partial dressed-state maps between configuration pairs.
//!
//! Diagonalizing the sub-block of the Hamiltonian that couples the metastable level
//! turns the two-laser systems (`Fig1a`, `Fig2a`) into single-laser systems with
//! interfering decay channels (`Fig1b`, `Fig2b`). The maps below compute the dressed
//! basis, the transformed rates and the dipole angle that make each pair of master
//! equations identical, and [`verify_equivalence`] checks the claim numerically by
//! integrating both.
//!
//! Root convention: `λ₁` is the `+` root and `θ ∈ [0, π/2]`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{liouvillian, propagate_series};
use crate::error::{Error, Result};
use crate::linalg::{c, frob_dist, CMatrix};
use crate::state::{DensityMatrix, LEVELS};
use crate::systems::{Fig1bParams, Fig2bParams, LindbladModel, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Rotation in the |1⟩–|3⟩ plane.
    Fig1,
    /// Rotation in the |2⟩–|3⟩ plane.
    Fig2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingAngle {
    pub theta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Roots `(plus, minus)` of `x² − b·x − Ω² = 0`, evaluated without cancellation,
/// together with the mixing angle `atan2(plus, Ω)`.
fn dressed_roots(b: f64, omega: f64) -> (f64, f64, f64) {
    let root = b.hypot(2.0 * omega);
    let (plus, minus) = if b >= 0.0 {
        let plus = 0.5 * (b + root);
        (plus, -omega * omega / plus)
    } else {
        let minus = 0.5 * (b - root);
        (-omega * omega / minus, minus)
    };
    (plus, minus, plus.atan2(omega))
}

fn check_mixing_inputs(detuning: f64, omega: f64, omega_name: &str) -> Result<()> {
    if !detuning.is_finite() || !omega.is_finite() {
        return Err(Error::invalid("mixing angle inputs must be finite"));
    }
    if omega < 0.0 {
        return Err(Error::invalid(format!("{omega_name} must be non-negative")));
    }
    if detuning == 0.0 && omega == 0.0 {
        return Err(Error::DegenerateBasis(format!(
            "detuning and {omega_name} are both zero, so the dressed basis is not defined"
        )));
    }
    Ok(())
}

/// Dressed basis of `H₁₃ = −Δ₃|3⟩⟨3| + Ω₃₁(|3⟩⟨1| + |1⟩⟨3|)`.
pub fn mixing_angle_fig1(delta3: f64, omega31: f64) -> Result<MixingAngle> {
    check_mixing_inputs(delta3, omega31, "omega31")?;
    let (lambda1, lambda2, theta) = dressed_roots(-delta3, omega31);
    Ok(MixingAngle { theta, lambda1, lambda2 })
}

/// Dressed basis of the |2⟩–|3⟩ block of the `Fig2a` Hamiltonian. The angle comes from
/// the eigenvalues before the common `−Δ₂` shift; `λ₁`, `λ₂` include it.
pub fn mixing_angle_fig2(delta2: f64, delta3: f64, omega23: f64) -> Result<MixingAngle> {
    check_mixing_inputs(delta3, omega23, "omega23")?;
    if !delta2.is_finite() {
        return Err(Error::invalid("delta2 must be finite"));
    }
    let (plus, minus, theta) = dressed_roots(delta3, omega23);
    Ok(MixingAngle { theta, lambda1: plus - delta2, lambda2: minus - delta2 })
}

/// Real orthogonal basis change. Row `i` holds the components of the new state `|i'⟩`,
/// so operators transform as `X' = U·X·U†`.
pub fn basis_unitary(theta: f64, family: Family) -> CMatrix {
    let (s, co) = theta.sin_cos();
    let (a, b) = match family {
        Family::Fig1 => (0, 2),
        Family::Fig2 => (1, 2),
    };
    let mut u = CMatrix::identity(LEVELS, LEVELS);
    u[(a, a)] = c(co);
    u[(a, b)] = c(s);
    u[(b, a)] = c(s);
    u[(b, b)] = c(-co);
    u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappedRates {
    pub a: f64,
    pub b: f64,
    pub cross: f64,
}

/// Decay rates seen by the rotated channels.
pub fn map_rates(theta: f64, gamma_a: f64, gamma_b: f64) -> Result<MappedRates> {
    for (name, g) in [("gamma_a", gamma_a), ("gamma_b", gamma_b)] {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::invalid(format!("{name} must be a finite non-negative rate, got {g}")));
        }
    }
    if !theta.is_finite() {
        return Err(Error::invalid("theta must be finite"));
    }
    let (s, co) = theta.sin_cos();
    Ok(MappedRates {
        a: gamma_a * co * co + gamma_b * s * s,
        b: gamma_a * s * s + gamma_b * co * co,
        cross: (gamma_a - gamma_b) * co * s,
    })
}

/// Dipole angle with `cos φ = cross / √(a·b)`, in `[0, π]`; a negative cross rate
/// gives an obtuse angle.
pub fn dipole_angle(a: f64, b: f64, cross: f64) -> Result<f64> {
    let product = a * b;
    if !(product > 0.0) || !product.is_finite() {
        return Err(Error::UndefinedAngle(format!("rate product {product} is not positive; one channel is dark")));
    }
    let disc = product - cross * cross;
    if disc < -1e-12 * product {
        return Err(Error::invalid(format!("cross rate {cross} exceeds the geometric mean of {a} and {b}")));
    }
    if disc <= 4.0 * f64::EPSILON * product {
        return Ok(if cross >= 0.0 { 0.0 } else { std::f64::consts::PI });
    }
    Ok(disc.sqrt().atan2(cross))
}

/// Uses `a·b − cross² = Γ_A·Γ_B`, which holds exactly for rates from [`map_rates`];
/// this makes `Γ_B = 0` give `φ = 0` with no rounding.
fn dipole_angle_from_bare(gamma_a: f64, gamma_b: f64, cross: f64) -> f64 {
    (gamma_a * gamma_b).sqrt().atan2(cross)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceMap {
    pub family: Family,
    pub theta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma_p21: f64,
    /// `Γ'₂₃` for the Fig. 1 family, `Γ'₃₁` for the Fig. 2 family.
    pub gamma_p_second: f64,
    pub gamma_cross: f64,
    pub phi: f64,
    /// Maps states of the source system to the target: `ρ_target = U·ρ_source·U†`.
    pub unitary: CMatrix,
    /// `(Δ̃₂₁, Δ̃₃₁)` for the Fig. 1 family, `(λ₁, λ₂)` for the Fig. 2 family.
    pub shifted_detunings: (f64, f64),
    pub mapped_rabis: (f64, f64),
}

impl EquivalenceMap {
    pub fn unitary_rows(&self) -> [[f64; LEVELS]; LEVELS] {
        let mut rows = [[0.0; LEVELS]; LEVELS];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.unitary[(i, j)].re;
            }
        }
        rows
    }
}

/// Maps a `Fig1a` system onto the equivalent `Fig1b` Λ-system.
///
/// The returned unitary is the dressed rotation followed by `|2'⟩ → −|2'⟩`, which
/// gives the target drive terms their `−Ω` sign.
pub fn map_fig1a_to_fig1b(params: &SystemParams) -> Result<(SystemParams, EquivalenceMap)> {
    let SystemParams::Fig1a(p) = params else {
        return Err(Error::invalid(format!("expected fig1a parameters, got {}", params.config())));
    };
    params.validate()?;
    let mix = mixing_angle_fig1(p.delta31, p.omega31)?;
    let rates = map_rates(mix.theta, p.gamma21, p.gamma23)?;
    let phi = dipole_angle_from_bare(p.gamma21, p.gamma23, rates.cross);
    let (s, co) = mix.theta.sin_cos();
    let rabis = (p.omega21 * co, p.omega21 * s);
    let target = Fig1bParams {
        gamma21: rates.a,
        gamma23: rates.b,
        omega21: rabis.0,
        omega23: rabis.1,
        delta2: p.delta21 + mix.lambda1,
        delta3: p.delta21 + mix.lambda2,
        phi,
    };
    let mut unitary = basis_unitary(mix.theta, Family::Fig1);
    unitary.row_mut(1).neg_mut();
    let map = EquivalenceMap {
        family: Family::Fig1,
        theta: mix.theta,
        lambda1: mix.lambda1,
        lambda2: mix.lambda2,
        gamma_p21: rates.a,
        gamma_p_second: rates.b,
        gamma_cross: rates.cross,
        phi,
        unitary,
        shifted_detunings: (p.delta21 + mix.lambda1, mix.lambda1 - mix.lambda2),
        mapped_rabis: rabis,
    };
    Ok((SystemParams::Fig1b(target), map))
}

/// Maps a `Fig2a` system onto the equivalent `Fig2b` V-system.
pub fn map_fig2a_to_fig2b(params: &SystemParams) -> Result<(SystemParams, EquivalenceMap)> {
    let SystemParams::Fig2a(p) = params else {
        return Err(Error::invalid(format!("expected fig2a parameters, got {}", params.config())));
    };
    params.validate()?;
    let mix = mixing_angle_fig2(p.delta2, p.delta3, p.omega23)?;
    let rates = map_rates(mix.theta, p.gamma21, p.gamma31)?;
    let phi = dipole_angle_from_bare(p.gamma21, p.gamma31, rates.cross);
    let (s, co) = mix.theta.sin_cos();
    let rabis = (p.omega21 * co, p.omega21 * s);
    let target = Fig2bParams {
        gamma21: rates.a,
        gamma31: rates.b,
        omega21: rabis.0,
        omega31: rabis.1,
        delta2: -mix.lambda1,
        delta3: -mix.lambda2,
        phi,
    };
    let map = EquivalenceMap {
        family: Family::Fig2,
        theta: mix.theta,
        lambda1: mix.lambda1,
        lambda2: mix.lambda2,
        gamma_p21: rates.a,
        gamma_p_second: rates.b,
        gamma_cross: rates.cross,
        phi,
        unitary: basis_unitary(mix.theta, Family::Fig2),
        shifted_detunings: (mix.lambda1, mix.lambda2),
        mapped_rabis: rabis,
    };
    Ok((SystemParams::Fig2b(target), map))
}

/// Dispatches to the map for the source configuration (`Fig1a` or `Fig2a`).
pub fn map_to_partner(params: &SystemParams) -> Result<(SystemParams, EquivalenceMap)> {
    match params {
        SystemParams::Fig1a(_) => map_fig1a_to_fig1b(params),
        SystemParams::Fig2a(_) => map_fig2a_to_fig2b(params),
        other => Err(Error::invalid(format!("only fig1a and fig2a systems can be mapped, got {}", other.config()))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub max_dist: f64,
    pub worst_time: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Integrates both master equations and returns `max_t ‖U·ρ_A(t)·U† − ρ_B(t)‖_F`.
pub fn verify_equivalence(
    model_a: &LindbladModel,
    model_b: &LindbladModel,
    unitary: &CMatrix,
    rho0: &DensityMatrix,
    times: &[f64],
    tol: f64,
) -> Result<EquivalenceReport> {
    let id = CMatrix::identity(LEVELS, LEVELS);
    if unitary.shape() != (LEVELS, LEVELS) || frob_dist(&(unitary * unitary.adjoint()), &id)? > 1e-10 {
        return Err(Error::invalid("basis change is not unitary"));
    }
    let series_a = propagate_series(&liouvillian(model_a), rho0, times)?;
    let series_b = propagate_series(&liouvillian(model_b), &rho0.transformed(unitary), times)?;
    let mut max_dist = 0.0;
    let mut worst_time = times.first().copied().unwrap_or(0.0);
    for ((t, ra), rb) in times.iter().zip(&series_a).zip(&series_b) {
        let d = frob_dist(ra.transformed(unitary).matrix(), rb.matrix())?;
        if d > max_dist {
            max_dist = d;
            worst_time = *t;
        }
    }
    Ok(EquivalenceReport { max_dist, worst_time, tol, pass: max_dist < tol })
}
