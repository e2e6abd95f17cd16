//! Master equations for the four driven three-level configurations.
//!
//! Levels are zero-based in code (`0, 1, 2` ↔ `|1⟩, |2⟩, |3⟩`). All rates and
//! frequencies are in units of a reference rate Γ_ref and time in 1/Γ_ref. A stored
//! rate `Γ` enters the equations as the Einstein coefficient `2Γ`.
//!
//! * `Fig1a`: ground state |1⟩ driven to |2⟩ and |3⟩ by two lasers; |2⟩ decays to |1⟩ and |3⟩.
//! * `Fig1b`: Λ-system, a single laser couples |1⟩ and |3⟩ to the unstable level |2⟩;
//!   the two decay channels interfere with strength `cos φ`.
//! * `Fig2a`: |1⟩–|2⟩ and |2⟩–|3⟩ driven by two lasers; |2⟩ and |3⟩ decay to |1⟩.
//! * `Fig2b`: V-system with close-lying upper levels and interfering decay channels.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, ket_bra, CMatrix, C64};
use crate::state::LEVELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Configuration {
    Fig1a,
    Fig1b,
    Fig2a,
    Fig2b,
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Configuration::Fig1a => "fig1a",
            Configuration::Fig1b => "fig1b",
            Configuration::Fig2a => "fig2a",
            Configuration::Fig2b => "fig2b",
        };
        f.write_str(s)
    }
}

/// Two lasers on |1⟩↔|2⟩ and |1⟩↔|3⟩; |2⟩ decays into |1⟩ and the metastable |3⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig1aParams {
    pub gamma21: f64,
    pub gamma23: f64,
    pub omega21: f64,
    pub omega31: f64,
    pub delta21: f64,
    pub delta31: f64,
}

/// Λ-system driven by one laser. `H₂₂ = −Δ₂`, `H₃₃ = Δ₃ − Δ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig1bParams {
    pub gamma21: f64,
    pub gamma23: f64,
    pub omega21: f64,
    pub omega23: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Angle between the two transition dipoles, in `[0, π]`.
    pub phi: f64,
}

/// Lasers on |1⟩↔|2⟩ and |2⟩↔|3⟩; both |2⟩ and |3⟩ decay to |1⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2aParams {
    pub gamma21: f64,
    pub gamma31: f64,
    pub omega21: f64,
    pub omega23: f64,
    pub delta2: f64,
    pub delta3: f64,
}

/// V-system driven by one laser. `H₂₂ = −Δ₂`, `H₃₃ = −Δ₃`, each detuning taken
/// from the respective |i⟩↔|1⟩ transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2bParams {
    pub gamma21: f64,
    pub gamma31: f64,
    pub omega21: f64,
    pub omega31: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "config", rename_all = "lowercase")]
pub enum SystemParams {
    Fig1a(Fig1aParams),
    Fig1b(Fig1bParams),
    Fig2a(Fig2aParams),
    Fig2b(Fig2bParams),
}

fn check_rate(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::invalid(format!("{name} must be a finite non-negative rate, got {value}")));
    }
    Ok(())
}

fn check_rabi(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::invalid(format!("{name} must be a finite non-negative Rabi frequency, got {value}")));
    }
    Ok(())
}

fn check_detuning(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::invalid(format!("{name} must be finite, got {value}")));
    }
    Ok(())
}

fn check_phi(value: f64) -> Result<()> {
    if !(0.0..=PI).contains(&value) {
        return Err(Error::invalid(format!("phi must lie in [0, π], got {value}")));
    }
    Ok(())
}

impl SystemParams {
    pub fn config(&self) -> Configuration {
        match self {
            SystemParams::Fig1a(_) => Configuration::Fig1a,
            SystemParams::Fig1b(_) => Configuration::Fig1b,
            SystemParams::Fig2a(_) => Configuration::Fig2a,
            SystemParams::Fig2b(_) => Configuration::Fig2b,
        }
    }

    /// Checks every field; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        match self {
            SystemParams::Fig1a(p) => {
                check_rate("gamma21", p.gamma21)?;
                check_rate("gamma23", p.gamma23)?;
                check_rabi("omega21", p.omega21)?;
                check_rabi("omega31", p.omega31)?;
                check_detuning("delta21", p.delta21)?;
                check_detuning("delta31", p.delta31)
            }
            SystemParams::Fig1b(p) => {
                check_rate("gamma21", p.gamma21)?;
                check_rate("gamma23", p.gamma23)?;
                check_rabi("omega21", p.omega21)?;
                check_rabi("omega23", p.omega23)?;
                check_detuning("delta2", p.delta2)?;
                check_detuning("delta3", p.delta3)?;
                check_phi(p.phi)
            }
            SystemParams::Fig2a(p) => {
                check_rate("gamma21", p.gamma21)?;
                check_rate("gamma31", p.gamma31)?;
                check_rabi("omega21", p.omega21)?;
                check_rabi("omega23", p.omega23)?;
                check_detuning("delta2", p.delta2)?;
                check_detuning("delta3", p.delta3)
            }
            SystemParams::Fig2b(p) => {
                check_rate("gamma21", p.gamma21)?;
                check_rate("gamma31", p.gamma31)?;
                check_rabi("omega21", p.omega21)?;
                check_rabi("omega31", p.omega31)?;
                check_detuning("delta2", p.delta2)?;
                check_detuning("delta3", p.delta3)?;
                check_phi(p.phi)
            }
        }
    }

    /// Builds the master equation for whichever configuration this is.
    pub fn build(&self) -> Result<LindbladModel> {
        match self.config() {
            Configuration::Fig1a => build_fig1a(self),
            Configuration::Fig1b => build_fig1b(self),
            Configuration::Fig2a => build_fig2a(self),
            Configuration::Fig2b => build_fig2b(self),
        }
    }
}

/// One entry of the dissipator: `rate·(A_l ρ A_r† − ½{A_r† A_l, ρ})`.
///
/// Diagonal terms have `left == right`; a cross term and its mirror are stored as two
/// entries with equal rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayTerm {
    pub left: usize,
    pub right: usize,
    pub rate: f64,
}

/// A Hamiltonian plus decay channels with a (possibly non-diagonal) rate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    pub config: Option<Configuration>,
    pub hamiltonian: CMatrix,
    pub channels: Vec<CMatrix>,
    pub terms: Vec<DecayTerm>,
}

impl LindbladModel {
    pub fn new(hamiltonian: CMatrix, channels: Vec<CMatrix>, terms: Vec<DecayTerm>) -> Result<Self> {
        if hamiltonian.shape() != (LEVELS, LEVELS) {
            return Err(Error::invalid("Hamiltonian must be 3×3"));
        }
        if (&hamiltonian - hamiltonian.adjoint()).norm() > 1e-12 * hamiltonian.norm().max(1.0) {
            return Err(Error::invalid("Hamiltonian is not Hermitian"));
        }
        if channels.iter().any(|a| a.shape() != (LEVELS, LEVELS)) {
            return Err(Error::invalid("decay channel operators must be 3×3"));
        }
        for t in &terms {
            if t.left >= channels.len() || t.right >= channels.len() {
                return Err(Error::invalid("decay term refers to a missing channel"));
            }
            if !t.rate.is_finite() {
                return Err(Error::invalid("decay term rate is not finite"));
            }
        }
        Ok(LindbladModel { config: None, hamiltonian, channels, terms })
    }

    /// Channel rate matrix `G` with `G[l][r] = Σ rate` over terms `(l, r)`.
    pub fn rate_matrix(&self) -> DMatrix<f64> {
        let n = self.channels.len();
        let mut g = DMatrix::zeros(n, n);
        for t in &self.terms {
            g[(t.left, t.right)] += t.rate;
        }
        g
    }

    /// Feeding part of the dissipator, `J(ρ) = Σ rate·A_l ρ A_r†`.
    pub fn jump_map(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(LEVELS, LEVELS);
        for t in &self.terms {
            out += &self.channels[t.left] * rho * self.channels[t.right].adjoint() * c(t.rate);
        }
        out
    }

    /// `K = ½ Σ rate·A_r† A_l`, so the loss part of the dissipator is `−{K, ρ}`.
    pub fn decay_operator(&self) -> CMatrix {
        let mut k = CMatrix::zeros(LEVELS, LEVELS);
        for t in &self.terms {
            k += self.channels[t.right].adjoint() * &self.channels[t.left] * c(0.5 * t.rate);
        }
        k
    }

    /// Non-Hermitian generator of the no-jump evolution, `H − iK`.
    pub fn effective_hamiltonian(&self) -> CMatrix {
        &self.hamiltonian - self.decay_operator() * C64::new(0.0, 1.0)
    }

    /// Total photon emission rate `Tr J(ρ)`.
    pub fn emission_rate(&self, rho: &CMatrix) -> f64 {
        self.jump_map(rho).trace().re
    }

    pub fn has_decay(&self) -> bool {
        self.terms.iter().any(|t| t.left == t.right && t.rate > 0.0)
    }

    /// The same model expressed in the basis `|i'⟩ = Σ_j U*_{ij}|j⟩`, i.e. `ρ' = U ρ U†`.
    pub fn transformed(&self, unitary: &CMatrix) -> LindbladModel {
        let rot = |m: &CMatrix| unitary * m * unitary.adjoint();
        LindbladModel {
            config: self.config,
            hamiltonian: rot(&self.hamiltonian),
            channels: self.channels.iter().map(rot).collect(),
            terms: self.terms.clone(),
        }
    }
}

fn cos_dipole(phi: f64) -> f64 {
    if phi == FRAC_PI_2 {
        0.0
    } else {
        phi.cos()
    }
}

fn wrong_config(expected: Configuration, got: Configuration) -> Error {
    Error::invalid(format!("expected {expected} parameters, got {got}"))
}

fn symmetric_coupling(h: &mut CMatrix, i: usize, j: usize, value: f64) {
    h[(i, j)] = c(value);
    h[(j, i)] = c(value);
}

fn diagonal_terms(rates: &[f64]) -> Vec<DecayTerm> {
    rates
        .iter()
        .enumerate()
        .filter(|(_, &r)| r != 0.0)
        .map(|(k, &r)| DecayTerm { left: k, right: k, rate: r })
        .collect()
}

fn with_cross(mut terms: Vec<DecayTerm>, weight: f64) -> Vec<DecayTerm> {
    if weight != 0.0 {
        terms.push(DecayTerm { left: 0, right: 1, rate: weight });
        terms.push(DecayTerm { left: 1, right: 0, rate: weight });
    }
    terms
}

fn finish(config: Configuration, h: CMatrix, channels: Vec<CMatrix>, terms: Vec<DecayTerm>) -> Result<LindbladModel> {
    let mut model = LindbladModel::new(h, channels, terms)?;
    model.config = Some(config);
    Ok(model)
}

pub fn build_fig1a(params: &SystemParams) -> Result<LindbladModel> {
    let SystemParams::Fig1a(p) = params else {
        return Err(wrong_config(Configuration::Fig1a, params.config()));
    };
    params.validate()?;
    let mut h = CMatrix::zeros(LEVELS, LEVELS);
    h[(1, 1)] = c(-p.delta21);
    h[(2, 2)] = c(-p.delta31);
    symmetric_coupling(&mut h, 1, 0, p.omega21);
    symmetric_coupling(&mut h, 2, 0, p.omega31);
    let channels = vec![ket_bra(LEVELS, 0, 1), ket_bra(LEVELS, 2, 1)];
    let terms = diagonal_terms(&[2.0 * p.gamma21, 2.0 * p.gamma23]);
    finish(Configuration::Fig1a, h, channels, terms)
}

pub fn build_fig1b(params: &SystemParams) -> Result<LindbladModel> {
    let SystemParams::Fig1b(p) = params else {
        return Err(wrong_config(Configuration::Fig1b, params.config()));
    };
    params.validate()?;
    let mut h = CMatrix::zeros(LEVELS, LEVELS);
    h[(1, 1)] = c(-p.delta2);
    h[(2, 2)] = c(p.delta3 - p.delta2);
    symmetric_coupling(&mut h, 1, 0, -p.omega21);
    symmetric_coupling(&mut h, 1, 2, -p.omega23);
    let channels = vec![ket_bra(LEVELS, 0, 1), ket_bra(LEVELS, 2, 1)];
    let cross = 2.0 * (p.gamma21 * p.gamma23).sqrt() * cos_dipole(p.phi);
    let terms = with_cross(diagonal_terms(&[2.0 * p.gamma21, 2.0 * p.gamma23]), cross);
    finish(Configuration::Fig1b, h, channels, terms)
}

pub fn build_fig2a(params: &SystemParams) -> Result<LindbladModel> {
    let SystemParams::Fig2a(p) = params else {
        return Err(wrong_config(Configuration::Fig2a, params.config()));
    };
    params.validate()?;
    let mut h = CMatrix::zeros(LEVELS, LEVELS);
    h[(1, 1)] = c(-p.delta2);
    h[(2, 2)] = c(p.delta3 - p.delta2);
    symmetric_coupling(&mut h, 0, 1, p.omega21);
    symmetric_coupling(&mut h, 2, 1, p.omega23);
    let channels = vec![ket_bra(LEVELS, 0, 1), ket_bra(LEVELS, 0, 2)];
    let terms = diagonal_terms(&[2.0 * p.gamma21, 2.0 * p.gamma31]);
    finish(Configuration::Fig2a, h, channels, terms)
}

pub fn build_fig2b(params: &SystemParams) -> Result<LindbladModel> {
    let SystemParams::Fig2b(p) = params else {
        return Err(wrong_config(Configuration::Fig2b, params.config()));
    };
    params.validate()?;
    let mut h = CMatrix::zeros(LEVELS, LEVELS);
    h[(1, 1)] = c(-p.delta2);
    h[(2, 2)] = c(-p.delta3);
    symmetric_coupling(&mut h, 1, 0, p.omega21);
    symmetric_coupling(&mut h, 2, 0, p.omega31);
    let channels = vec![ket_bra(LEVELS, 0, 1), ket_bra(LEVELS, 0, 2)];
    let cross = 2.0 * (p.gamma21 * p.gamma31).sqrt() * cos_dipole(p.phi);
    let terms = with_cross(diagonal_terms(&[2.0 * p.gamma21, 2.0 * p.gamma31]), cross);
    finish(Configuration::Fig2b, h, channels, terms)
}
