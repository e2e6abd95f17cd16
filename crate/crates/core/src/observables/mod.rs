//! Measurable quantities: photon statistics after a detection, populations,
//! emission spectra and quantum-jump trajectories.

mod spectrum;
mod trajectories;

pub use spectrum::{
    emission_spectrum, emission_spectrum_from_state, emission_spectrum_with, local_maxima, narrow_feature_fwhm,
    NarrowFeature, Spectrum, SpectrumMethod,
};
pub use trajectories::{
    bright_dark_stats, gap_bimodality, inter_jump_gaps, ks_two_sample, mc_populations, mc_trajectories,
    mc_trajectories_with, Bimodality, BrightDarkStats, JumpRecord, KsResult, McOptions, McPopulations,
};

use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_series, liouvillian, propagate_series, steady_state};
use crate::error::{Error, Result};
use crate::linalg::{unvectorize, vectorize};
use crate::state::{DensityMatrix, LEVELS};
use crate::systems::LindbladModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleKind {
    G2,
    WaitingTime,
    Spectrum,
    Population,
}

/// Real values on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub kind: SampleKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(kind: SampleKind, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::invalid("grid and values differ in length"));
        }
        check_grid(&grid)?;
        Ok(SampledFunction { kind, grid, values })
    }

    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid.windows(2).zip(self.values.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
    }

    pub fn max_abs_diff(&self, other: &SampledFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("grid has non-finite points"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    Ok(())
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn uniform_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(Error::invalid("grid needs finite bounds and at least one point"));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    if !(stop > start) {
        return Err(Error::invalid("grid stop must exceed start"));
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count).map(|k| if k + 1 == count { stop } else { start + step * k as f64 }).collect())
}

fn require_decay(model: &LindbladModel) -> Result<()> {
    if !model.has_decay() {
        return Err(Error::invalid("model has no radiative decay channel"));
    }
    Ok(())
}

fn reset_state() -> DensityMatrix {
    DensityMatrix::pure_level(0).expect("ground level exists")
}

/// Photon detection rate at delay `τ` after a detection that reset the atom to |1⟩:
/// `Tr J(ρ(τ))`, the unnormalized intensity correlation.
pub fn g2(model: &LindbladModel, taus: &[f64]) -> Result<SampledFunction> {
    require_decay(model)?;
    let states = propagate_series(&liouvillian(model), &reset_state(), taus)?;
    let values = states.iter().map(|rho| model.emission_rate(rho.matrix())).collect();
    SampledFunction::new(SampleKind::G2, taus.to_vec(), values)
}

/// [`g2`] divided by its long-delay limit, the steady-state emission rate.
pub fn g2_normalized(model: &LindbladModel, taus: &[f64]) -> Result<SampledFunction> {
    let mut f = g2(model, taus)?;
    let ss = steady_state(&liouvillian(model))?;
    let rate = model.emission_rate(ss.matrix());
    if !(rate > 0.0) {
        return Err(Error::invalid("steady-state emission rate is zero; cannot normalize"));
    }
    f.values.iter_mut().for_each(|v| *v /= rate);
    Ok(f)
}

/// Density of the delay to the next photon after a detection, from the no-jump
/// evolution `exp((L − J)·τ)` of the reset state.
pub fn waiting_time(model: &LindbladModel, taus: &[f64]) -> Result<SampledFunction> {
    require_decay(model)?;
    let l = liouvillian(model);
    let no_jump = l.matrix() - l.jump_superoperator();
    let states = evolve_series(&no_jump, &vectorize(reset_state().matrix()), taus)?;
    let values = states.iter().map(|v| model.emission_rate(&unvectorize(v, LEVELS))).collect();
    SampledFunction::new(SampleKind::WaitingTime, taus.to_vec(), values)
}

/// Diagonal of the propagated density matrix, one function per level.
pub fn populations(model: &LindbladModel, rho0: &DensityMatrix, times: &[f64]) -> Result<[SampledFunction; LEVELS]> {
    let states = propagate_series(&liouvillian(model), rho0, times)?;
    let level = |k: usize| {
        SampledFunction::new(SampleKind::Population, times.to_vec(), states.iter().map(|r| r.population(k)).collect())
    };
    Ok([level(0)?, level(1)?, level(2)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivalence::map_fig2a_to_fig2b;
    use crate::systems::{Fig1aParams, Fig2aParams, SystemParams};

    fn fig2a(omega21: f64, omega23: f64) -> SystemParams {
        SystemParams::Fig2a(Fig2aParams { gamma21: 1.0, gamma31: 0.3, omega21, omega23, delta2: 0.2, delta3: -0.5 })
    }

    fn two_level(gamma: f64, omega: f64) -> LindbladModel {
        SystemParams::Fig1a(Fig1aParams {
            gamma21: gamma,
            gamma23: 0.0,
            omega21: omega,
            omega31: 0.0,
            delta21: 0.0,
            delta31: 0.0,
        })
        .build()
        .unwrap()
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(0.0, 1.0, 11).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[10], 1.0);
        assert_eq!(uniform_grid(2.0, 2.0, 1).unwrap(), vec![2.0]);
        assert!(uniform_grid(1.0, 0.0, 5).is_err());
    }

    #[test]
    fn g2_antibunching_and_no_drive() {
        let taus = uniform_grid(0.0, 10.0, 101).unwrap();
        let m = fig2a(1.0, 0.5).build().unwrap();
        let f = g2(&m, &taus).unwrap();
        assert_eq!(f.values[0], 0.0);
        assert!(f.values.iter().all(|v| *v >= -1e-12));
        let dark = fig2a(0.0, 0.0).build().unwrap();
        assert!(g2(&dark, &taus).unwrap().values.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn g2_tends_to_steady_state_rate() {
        let params = fig2a(1.2, 0.6);
        let SystemParams::Fig2a(p) = params else { unreachable!() };
        let m = params.build().unwrap();
        let ss = steady_state(&liouvillian(&m)).unwrap();
        let expected = 2.0 * (p.gamma21 * ss.population(1) + p.gamma31 * ss.population(2));
        let f = g2(&m, &[0.0, 200.0]).unwrap();
        assert!((f.values[1] - expected).abs() < 1e-9);
        let n = g2_normalized(&m, &[0.0, 200.0]).unwrap();
        assert!((n.values[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn waiting_time_matches_two_level_closed_form() {
        let (gamma, omega) = (0.5, 3.0);
        let m = two_level(gamma, omega);
        let taus = uniform_grid(0.0, 8.0, 801).unwrap();
        let w = waiting_time(&m, &taus).unwrap();
        assert_eq!(w.values[0], 0.0);
        // No-jump amplitude: c₂(τ) = −i(Ω/Ω')e^{−Γτ/2} sin(Ω'τ), Ω' = √(Ω² − Γ²/4).
        let shifted = (omega * omega - gamma * gamma / 4.0).sqrt();
        for (t, v) in taus.iter().zip(&w.values) {
            let exact = 2.0 * gamma * (omega / shifted).powi(2) * (-gamma * t).exp() * (shifted * t).sin().powi(2);
            assert!((v - exact).abs() < 1e-10, "τ={t}: {v} vs {exact}");
        }
        let first_peak = local_maxima(&w.values)[0];
        // Maximum of e^{−Γτ} sin²(Ω'τ): tan(Ω'τ) = 2Ω'/Γ.
        let expected = (2.0 * shifted / gamma).atan() / shifted;
        assert!((taus[first_peak] - expected).abs() <= 0.01);
    }

    #[test]
    fn waiting_time_normalization() {
        let m = fig2a(1.0, 0.5).build().unwrap();
        let l = liouvillian(&m);
        let slowest = l.slowest_rate(1e-9).unwrap();
        let horizon = 10.0 / slowest;
        let taus = uniform_grid(0.0, horizon, 40001).unwrap();
        let w = waiting_time(&m, &taus).unwrap();
        let total = w.integral();
        assert!(total <= 1.0 + 1e-6);
        assert!(total > 0.999, "integral {total}");
        assert!(w.values.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn mapped_pair_statistics_coincide() {
        let params = fig2a(1.3, 0.7);
        let (target, _) = map_fig2a_to_fig2b(&params).unwrap();
        let (a, b) = (params.build().unwrap(), target.build().unwrap());
        let taus = uniform_grid(0.0, 30.0, 301).unwrap();
        assert!(g2(&a, &taus).unwrap().max_abs_diff(&g2(&b, &taus).unwrap()) < 1e-8);
        assert!(waiting_time(&a, &taus).unwrap().max_abs_diff(&waiting_time(&b, &taus).unwrap()) < 1e-8);
    }

    #[test]
    fn populations_sum_to_one_and_decay() {
        let gamma = 0.4;
        let m = two_level(gamma, 0.0);
        let times = uniform_grid(0.0, 5.0, 26).unwrap();
        let pops = populations(&m, &DensityMatrix::pure_level(1).unwrap(), &times).unwrap();
        for (k, t) in times.iter().enumerate() {
            let total: f64 = pops.iter().map(|p| p.values[k]).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!((pops[1].values[k] - (-2.0 * gamma * t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn requires_a_decay_channel() {
        let m = SystemParams::Fig2a(Fig2aParams {
            gamma21: 0.0,
            gamma31: 0.0,
            omega21: 1.0,
            omega23: 1.0,
            delta2: 0.0,
            delta3: 0.0,
        })
        .build()
        .unwrap();
        assert!(g2(&m, &[0.0]).is_err());
        assert!(waiting_time(&m, &[0.0]).is_err());
    }
}
