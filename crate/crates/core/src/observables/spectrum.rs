//! Resonance-fluorescence spectrum from the quantum regression theorem.
//!
//! With a detection operator `d` (a lowering operator) and steady state `ρ_ss`, the
//! two-time correlation is `C(τ) = Tr(d† e^{Lτ}(d ρ_ss))`. Its `τ → ∞` limit
//! `|⟨d⟩|²` is the coherent (elastic) weight and is reported separately. The returned
//! incoherent spectrum is
//!
//! `S(ω) = (1/π) Re ∫₀^∞ e^{−iωτ} [C(τ) − C(∞)] dτ`,
//!
//! normalized so that `∫ S dω = C(0) − C(∞)`, the incoherent part of `⟨d† d⟩`.
//! Frequencies are measured from the laser frequency in the rotating frame.

use serde::{Deserialize, Serialize};

use super::{check_grid, SampleKind, SampledFunction};
use crate::dynamics::{evolve_series, liouvillian, stationary_projector, steady_state};
use crate::error::{Error, Result};
use crate::linalg::{c, vectorize, CMatrix, CVector, C64};
use crate::state::{DensityMatrix, LEVELS};
use crate::systems::LindbladModel;

const DEFAULT_QUADRATURE_POINTS: usize = 1 << 14;
const DEFAULT_HORIZON_FACTOR: f64 = 20.0;
const STATIONARITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum SpectrumMethod {
    /// Exact Laplace transform through the resolvent `(iω − L)⁻¹`.
    #[default]
    Resolvent,
    /// Trapezoid quadrature of the one-sided transform on a uniform τ grid.
    /// The horizon defaults to 20 times the slowest decay time of `L`.
    Quadrature { horizon: Option<f64>, points: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub incoherent: SampledFunction,
    /// `C(∞) = |⟨d⟩_ss|²`, weight of the elastic delta peak.
    pub coherent_weight: f64,
    /// `C(0) − C(∞)`.
    pub incoherent_weight: f64,
}

pub fn emission_spectrum(model: &LindbladModel, detect: &CMatrix, omegas: &[f64]) -> Result<Spectrum> {
    emission_spectrum_with(model, detect, omegas, SpectrumMethod::Resolvent)
}

pub fn emission_spectrum_with(
    model: &LindbladModel,
    detect: &CMatrix,
    omegas: &[f64],
    method: SpectrumMethod,
) -> Result<Spectrum> {
    let ss = steady_state(&liouvillian(model))?;
    emission_spectrum_from_state(model, &ss, detect, omegas, method)
}

/// Spectrum around a caller-supplied stationary state, for models whose stationary
/// state is not unique (for example with a decoupled level).
pub fn emission_spectrum_from_state(
    model: &LindbladModel,
    stationary: &DensityMatrix,
    detect: &CMatrix,
    omegas: &[f64],
    method: SpectrumMethod,
) -> Result<Spectrum> {
    if detect.shape() != (LEVELS, LEVELS) {
        return Err(Error::invalid("detection operator must be 3×3"));
    }
    check_grid(omegas)?;
    let l = liouvillian(model);
    let rho = stationary.matrix();
    let residual = l.apply(rho).norm();
    if residual > STATIONARITY_TOL {
        return Err(Error::invalid(format!("supplied state is not stationary (‖Lρ‖ = {residual:.3e})")));
    }
    let projector = stationary_projector(&l)?;
    let total = (detect.adjoint() * detect * rho).trace().re;

    // Split d·ρ into its stationary part (elastic scattering) and the decaying rest.
    let source = vectorize(&(detect * rho));
    let frozen = &projector * &source;
    let seed = &source - &frozen;
    let readout = vectorize(detect).adjoint();
    let coherent_weight = (&readout * &frozen)[(0, 0)].re;

    let values = match method {
        SpectrumMethod::Resolvent => {
            // L − P acts as L on the decaying modes and is invertible at ω = 0.
            let shifted = l.matrix() - &projector;
            let n = LEVELS * LEVELS;
            let mut out = Vec::with_capacity(omegas.len());
            for &w in omegas {
                let a = CMatrix::identity(n, n) * C64::new(0.0, w) - &shifted;
                let y =
                    a.lu().solve(&seed).ok_or_else(|| Error::invalid(format!("resolvent is singular at ω = {w}")))?;
                out.push((&readout * y)[(0, 0)].re / std::f64::consts::PI);
            }
            out
        }
        SpectrumMethod::Quadrature { horizon, points } => {
            let points = points.unwrap_or(DEFAULT_QUADRATURE_POINTS).max(2);
            let horizon = match horizon {
                Some(h) if h > 0.0 && h.is_finite() => h,
                Some(h) => return Err(Error::invalid(format!("quadrature horizon must be positive, got {h}"))),
                None => {
                    let slowest =
                        l.slowest_rate(1e-9).ok_or_else(|| Error::invalid("Liouvillian has no decaying mode"))?;
                    DEFAULT_HORIZON_FACTOR / slowest
                }
            };
            let dt = horizon / (points - 1) as f64;
            let taus: Vec<f64> = (0..points).map(|k| k as f64 * dt).collect();
            let corr: Vec<C64> =
                evolve_series(l.matrix(), &seed, &taus)?.iter().map(|v: &CVector| (&readout * v)[(0, 0)]).collect();
            omegas.iter().map(|&w| one_sided_transform(&corr, dt, w) / std::f64::consts::PI).collect()
        }
    };

    Ok(Spectrum {
        incoherent: SampledFunction::new(SampleKind::Spectrum, omegas.to_vec(), values)?,
        coherent_weight,
        incoherent_weight: total - coherent_weight,
    })
}

/// `Re Σ_k w_k e^{−iωτ_k} f_k` with trapezoid weights on a uniform grid.
fn one_sided_transform(f: &[C64], dt: f64, omega: f64) -> f64 {
    let rot = C64::from_polar(1.0, -omega * dt);
    let mut phase = c(1.0);
    let mut acc = C64::new(0.0, 0.0);
    let last = f.len() - 1;
    for (k, v) in f.iter().enumerate() {
        let w = if k == 0 || k == last { 0.5 } else { 1.0 };
        acc += v * phase * w;
        phase *= rot;
        if k % 256 == 255 {
            // Re-anchor the phase to stop rounding drift from accumulating.
            phase = C64::from_polar(1.0, -omega * dt * (k + 1) as f64);
        }
    }
    (acc * dt).re
}

/// Indices of interior local maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1)).filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarrowFeature {
    pub center: f64,
    pub height: f64,
    pub fwhm: f64,
}

/// Width of a narrow peak riding on a slowly varying background.
///
/// The background is a least-squares fit `a + b·(ω − ω₀)²` to the outer half of the
/// window (`|ω − ω₀| ≥ W/2`, `ω₀` the window centre); the full width at half maximum is
/// read from the background-subtracted peak by linear interpolation.
pub fn narrow_feature_fwhm(spectrum: &SampledFunction) -> Result<NarrowFeature> {
    let (grid, values) = (&spectrum.grid, &spectrum.values);
    if grid.len() < 8 {
        return Err(Error::invalid("too few points to locate a narrow feature"));
    }
    let center = 0.5 * (grid[0] + grid[grid.len() - 1]);
    let half_window = 0.5 * (grid[grid.len() - 1] - grid[0]);

    // Normal equations for the two-parameter background fit.
    let (mut s0, mut s1, mut s2, mut y0, mut y1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&w, &v) in grid.iter().zip(values) {
        let x = (w - center).powi(2);
        if (w - center).abs() >= 0.5 * half_window {
            s0 += 1.0;
            s1 += x;
            s2 += x * x;
            y0 += v;
            y1 += x * v;
        }
    }
    let det = s0 * s2 - s1 * s1;
    if !(det.abs() > 0.0) {
        return Err(Error::invalid("background fit is singular"));
    }
    let a = (y0 * s2 - y1 * s1) / det;
    let b = (s0 * y1 - s1 * y0) / det;
    let residual: Vec<f64> = grid.iter().zip(values).map(|(&w, &v)| v - a - b * (w - center).powi(2)).collect();

    let peak = residual.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).map(|(i, _)| i).expect("non-empty");
    let height = residual[peak];
    if !(height > 0.0) {
        return Err(Error::invalid("no peak above the background"));
    }
    let half = 0.5 * height;
    let crossing = |range: &mut dyn Iterator<Item = usize>, step: isize| -> Option<f64> {
        for i in range {
            let j = (i as isize - step) as usize;
            if residual[i] < half {
                let t = (half - residual[i]) / (residual[j] - residual[i]);
                return Some(grid[i] + t * (grid[j] - grid[i]));
            }
        }
        None
    };
    let left = crossing(&mut (0..peak).rev(), -1)
        .ok_or_else(|| Error::invalid("peak does not fall to half height on the left"))?;
    let right = crossing(&mut (peak + 1..grid.len()), 1)
        .ok_or_else(|| Error::invalid("peak does not fall to half height on the right"))?;
    Ok(NarrowFeature { center: grid[peak], height, fwhm: right - left })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ket_bra;
    use crate::observables::uniform_grid;
    use crate::systems::{Fig1aParams, Fig2aParams, SystemParams};

    fn two_level(gamma: f64, omega: f64, detuning: f64) -> LindbladModel {
        // Level 3 decays back to |1⟩ so the steady state is unique.
        let mut m = SystemParams::Fig1a(Fig1aParams {
            gamma21: gamma,
            gamma23: 0.0,
            omega21: omega,
            omega31: 0.0,
            delta21: detuning,
            delta31: 0.0,
        })
        .build()
        .unwrap();
        m.channels.push(ket_bra(3, 0, 2));
        m.terms.push(crate::systems::DecayTerm { left: 2, right: 2, rate: 1.0 });
        m
    }

    #[test]
    fn undriven_atom_has_no_incoherent_spectrum() {
        let m = two_level(1.0, 0.0, 0.0);
        let omegas = uniform_grid(-5.0, 5.0, 101).unwrap();
        let s = emission_spectrum(&m, &ket_bra(3, 0, 1), &omegas).unwrap();
        assert!(s.incoherent.values.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(s.coherent_weight, 0.0);
    }

    #[test]
    fn weak_drive_lorentzian_width() {
        // Weak resonant drive: the incoherent spectrum is dominated by the
        // elastic peak; the remainder integrates to the incoherent weight.
        let m = two_level(0.5, 0.3, 0.0);
        let omegas = uniform_grid(-200.0, 200.0, 40001).unwrap();
        let s = emission_spectrum(&m, &ket_bra(3, 0, 1), &omegas).unwrap();
        let integral = s.incoherent.integral();
        assert!(
            (integral - s.incoherent_weight).abs() < 2e-3 * s.incoherent_weight,
            "{integral} vs {}",
            s.incoherent_weight
        );
        assert!(s.coherent_weight > 0.0);
    }

    #[test]
    fn quadrature_agrees_with_resolvent() {
        let m = two_level(1.0, 3.0, 0.5);
        let d = ket_bra(3, 0, 1);
        let omegas = uniform_grid(-10.0, 10.0, 201).unwrap();
        let exact = emission_spectrum(&m, &d, &omegas).unwrap();
        let quad = emission_spectrum_with(&m, &d, &omegas, SpectrumMethod::Quadrature { horizon: None, points: None })
            .unwrap();
        let peak = exact.incoherent.values.iter().cloned().fold(0.0, f64::max);
        assert!(exact.incoherent.max_abs_diff(&quad.incoherent) < 1e-4 * peak);
        assert_eq!(exact.coherent_weight, quad.coherent_weight);
    }

    #[test]
    fn mollow_sidebands() {
        let omega = 10.0;
        let m = two_level(1.0, omega, 0.0);
        // Damping pulls the true maxima in by O(Γ²/Ω) ≈ 0.1 from ±2Ω, so the grid is
        // coarser than that offset but still resolves the sideband width 3Γ.
        let omegas = uniform_grid(-40.0, 40.0, 321).unwrap();
        let s = emission_spectrum(&m, &ket_bra(3, 0, 1), &omegas).unwrap();
        let maxima = local_maxima(&s.incoherent.values);
        let positions: Vec<f64> = maxima.iter().map(|&i| omegas[i]).collect();
        assert_eq!(positions.len(), 3, "{positions:?}");
        let step = omegas[1] - omegas[0];
        assert!((positions[0] + 2.0 * omega).abs() <= step);
        assert!(positions[1].abs() <= step);
        assert!((positions[2] - 2.0 * omega).abs() <= step);
        let ratio = s.incoherent.values[maxima[1]] / s.incoherent.values[maxima[2]];
        assert!((ratio - 3.0).abs() < 0.05 * 3.0, "{ratio}");
    }

    #[test]
    fn spectrum_is_non_negative() {
        let m = SystemParams::Fig2a(Fig2aParams {
            gamma21: 1.0,
            gamma31: 0.05,
            omega21: 2.0,
            omega23: 0.3,
            delta2: 0.4,
            delta3: -0.2,
        })
        .build()
        .unwrap();
        let omegas = uniform_grid(-10.0, 10.0, 801).unwrap();
        let s = emission_spectrum(&m, &ket_bra(3, 0, 1), &omegas).unwrap();
        assert!(s.incoherent.values.iter().all(|v| *v >= -1e-8));
    }

    #[test]
    fn narrow_feature_of_synthetic_lorentzian() {
        let grid = uniform_grid(-1.0, 1.0, 2001).unwrap();
        let width = 0.05;
        let values: Vec<f64> =
            grid.iter().map(|w| 3.0 - 0.4 * w * w + 1.0 / (1.0 + (2.0 * w / width).powi(2))).collect();
        let f = SampledFunction::new(SampleKind::Spectrum, grid, values).unwrap();
        let feature = narrow_feature_fwhm(&f).unwrap();
        assert!((feature.fwhm - width).abs() < 0.01 * width, "{}", feature.fwhm);
    }

    #[test]
    fn decoupled_level_uses_supplied_stationary_state() {
        let pumped = two_level(1.0, 2.0, 0.3);
        let decoupled = SystemParams::Fig1a(Fig1aParams {
            gamma21: 1.0,
            gamma23: 0.0,
            omega21: 2.0,
            omega31: 0.0,
            delta21: 0.3,
            delta31: 0.0,
        })
        .build()
        .unwrap();
        let d = ket_bra(3, 0, 1);
        let omegas = uniform_grid(-8.0, 8.0, 161).unwrap();
        let reference = emission_spectrum(&pumped, &d, &omegas).unwrap();
        let l = liouvillian(&decoupled);
        let ss = crate::dynamics::stationary_limit(&l, &DensityMatrix::pure_level(0).unwrap()).unwrap();
        let s = emission_spectrum_from_state(&decoupled, &ss, &d, &omegas, SpectrumMethod::Resolvent).unwrap();
        assert!(s.incoherent.max_abs_diff(&reference.incoherent) < 1e-12);
        assert!((s.coherent_weight - reference.coherent_weight).abs() < 1e-12);
        assert!(emission_spectrum_from_state(
            &decoupled,
            &DensityMatrix::pure_level(1).unwrap(),
            &d,
            &omegas,
            SpectrumMethod::Resolvent
        )
        .is_err());
    }

    #[test]
    fn non_unique_steady_state_is_reported() {
        let m = SystemParams::Fig1a(Fig1aParams {
            gamma21: 1.0,
            gamma23: 0.0,
            omega21: 1.0,
            omega31: 0.0,
            delta21: 0.0,
            delta31: 0.0,
        })
        .build()
        .unwrap();
        let err = emission_spectrum(&m, &ket_bra(3, 0, 1), &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonUniqueSteadyState { .. }));
    }
}
