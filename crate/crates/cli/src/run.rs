//! Task execution, data files and the run report.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;

use trilevel::dynamics::{liouvillian, propagate_series, stationary_limit, steady_state};
use trilevel::equivalence::{map_to_partner, verify_equivalence, EquivalenceMap, Family};
use trilevel::linalg::{c, CMatrix};
use trilevel::observables::{
    bright_dark_stats, emission_spectrum_from_state, g2, inter_jump_gaps, mc_populations, mc_trajectories_with,
    waiting_time, McOptions, SampledFunction, SpectrumMethod,
};
use trilevel::state::DensityMatrix;
use trilevel::systems::{LindbladModel, SystemParams};
use trilevel::Error as CoreError;

use crate::scenario::{Scenario, Task};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serializable view of an [`EquivalenceMap`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSummary {
    pub family: Family,
    pub theta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma_p21: f64,
    pub gamma_p_second: f64,
    pub gamma_cross: f64,
    pub phi: f64,
    pub shifted_detunings: (f64, f64),
    pub mapped_rabis: (f64, f64),
    pub unitary: [[f64; 3]; 3],
    pub partner: SystemParams,
}

impl MapSummary {
    pub fn new(map: &EquivalenceMap, partner: &SystemParams) -> Self {
        MapSummary {
            family: map.family,
            theta: map.theta,
            lambda1: map.lambda1,
            lambda2: map.lambda2,
            gamma_p21: map.gamma_p21,
            gamma_p_second: map.gamma_p_second,
            gamma_cross: map.gamma_cross,
            phi: map.phi,
            shifted_detunings: map.shifted_detunings,
            mapped_rabis: map.mapped_rabis,
            // Adding zero turns −0 into 0 for printing.
            unitary: map.unitary_rows().map(|row| row.map(|v| v + 0.0)),
            partner: *partner,
        }
    }

    /// Human-readable listing.
    pub fn render(&self) -> String {
        let (second, cross_label) = match self.family {
            Family::Fig1 => ("Γ'23", "Δ̃21, Δ̃31"),
            Family::Fig2 => ("Γ'31", "λ1, λ2"),
        };
        let mut out = String::new();
        let _ = writeln!(out, "family        {:?}", self.family);
        let _ = writeln!(out, "theta         {}", self.theta);
        let _ = writeln!(out, "lambda1       {}", self.lambda1);
        let _ = writeln!(out, "lambda2       {}", self.lambda2);
        let _ = writeln!(out, "Γ'21          {}", self.gamma_p21);
        let _ = writeln!(out, "{second:<13} {}", self.gamma_p_second);
        let _ = writeln!(out, "Γ'cross       {}", self.gamma_cross);
        let _ = writeln!(out, "phi           {}", self.phi);
        let _ = writeln!(out, "drives        {}, {}", self.mapped_rabis.0, self.mapped_rabis.1);
        let _ =
            writeln!(out, "detunings     {}, {}  ({cross_label})", self.shifted_detunings.0, self.shifted_detunings.1);
        for row in &self.unitary {
            let _ = writeln!(out, "U             {:>22} {:>22} {:>22}", row[0], row[1], row[2]);
        }
        out
    }
}

/// Outcome of one in-scenario check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    /// How `measured` is compared with `tolerance`.
    pub relation: &'static str,
    pub pass: bool,
}

impl Check {
    fn below(name: &str, measured: f64, tolerance: f64) -> Self {
        Check { name: name.into(), measured, tolerance, relation: "<", pass: measured < tolerance }
    }

    fn above(name: &str, measured: f64, tolerance: f64) -> Self {
        Check { name: name.into(), measured, tolerance, relation: ">", pass: measured > tolerance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub task: Task,
    pub scenario: Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSummary>,
    pub checks: Vec<Check>,
    /// Scalar results that are not checks (for example spectral weights).
    pub results: Vec<(String, f64)>,
    pub outputs: Vec<PathBuf>,
    pub duration_s: f64,
    pub pass: bool,
}

/// Columns of a data file: header name with unit, then values.
struct Table {
    title: String,
    columns: Vec<(String, Vec<f64>)>,
}

impl Table {
    fn new(title: impl Into<String>) -> Self {
        Table { title: title.into(), columns: Vec::new() }
    }

    fn column(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push((name.to_string(), values));
        self
    }

    fn render(&self, scenario: &Scenario) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.title);
        let _ = writeln!(out, "# trilevel {VERSION}, system {}, seed {}", scenario.system.config(), scenario.seed);
        let _ = writeln!(out, "# units: rates and frequencies in Γ_ref, times in 1/Γ_ref");
        let names: Vec<&str> = self.columns.iter().map(|c| c.0.as_str()).collect();
        let _ = writeln!(out, "# {}", names.join("\t"));
        let rows = self.columns.first().map_or(0, |c| c.1.len());
        for r in 0..rows {
            let line: Vec<String> = self.columns.iter().map(|c| format!("{:e}", c.1[r])).collect();
            let _ = writeln!(out, "{}", line.join("\t"));
        }
        out
    }
}

struct Runner<'a> {
    scenario: &'a Scenario,
    dir: PathBuf,
    checks: Vec<Check>,
    results: Vec<(String, f64)>,
    outputs: Vec<PathBuf>,
    map: Option<MapSummary>,
}

impl<'a> Runner<'a> {
    fn write(&mut self, name: &str, table: Table) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, table.render(self.scenario)).with_context(|| format!("writing {}", path.display()))?;
        info!("wrote {}", path.display());
        self.outputs.push(path);
        Ok(())
    }

    /// Partner system and map, when the scenario asks for a partner comparison.
    fn partner(&mut self) -> Result<Option<(LindbladModel, CMatrix)>> {
        if !self.scenario.checks.partner {
            return Ok(None);
        }
        let (target, map) = map_to_partner(&self.scenario.system).context("mapping to the partner configuration")?;
        self.map = Some(MapSummary::new(&map, &target));
        Ok(Some((target.build()?, map.unitary)))
    }

    fn conservation(&mut self, states: &[DensityMatrix]) {
        let trace = states.iter().map(|r| (r.trace() - 1.0).abs()).fold(0.0, f64::max);
        let min_eig = states.iter().map(|r| r.min_eigenvalue()).fold(f64::INFINITY, f64::min);
        let tol = &self.scenario.tolerances;
        self.checks.push(Check::below("trace error", trace, tol.trace));
        self.checks.push(Check::above("minimum eigenvalue", min_eig, -tol.positivity));
    }

    fn simulate(&mut self, model: &LindbladModel, rho0: &DensityMatrix) -> Result<()> {
        let times = self.scenario.time.points();
        let states = propagate_series(&liouvillian(model), rho0, &times)?;
        let pop = |k: usize| states.iter().map(|r| r.population(k)).collect();
        let table = Table::new("populations")
            .column("t [1/Γ_ref]", times.clone())
            .column("rho11", pop(0))
            .column("rho22", pop(1))
            .column("rho33", pop(2))
            .column("emission_rate [Γ_ref]", states.iter().map(|r| model.emission_rate(r.matrix())).collect());
        self.write("populations.dat", table)?;
        self.conservation(&states);
        Ok(())
    }

    fn equivalence(&mut self, model: &LindbladModel, rho0: &DensityMatrix) -> Result<()> {
        let (mapped, map) = map_to_partner(&self.scenario.system).context("mapping to the partner configuration")?;
        let target = self.scenario.system_b.unwrap_or(mapped);
        self.map = Some(MapSummary::new(&map, &target));
        let model_b = target.build()?;
        let times = self.scenario.time.points();
        let l_a = liouvillian(model);
        let a = propagate_series(&l_a, rho0, &times)?;
        let b = propagate_series(&liouvillian(&model_b), &rho0.transformed(&map.unitary), &times)?;
        let dist: Vec<f64> =
            a.iter().zip(&b).map(|(ra, rb)| (ra.transformed(&map.unitary).matrix() - rb.matrix()).norm()).collect();
        self.write(
            "equivalence.dat",
            Table::new("Frobenius distance between mapped trajectories")
                .column("t [1/Γ_ref]", times.clone())
                .column("distance", dist),
        )?;
        let report =
            verify_equivalence(model, &model_b, &map.unitary, rho0, &times, self.scenario.tolerances.equivalence)?;
        self.checks.push(Check::below("max Frobenius distance", report.max_dist, report.tol));
        self.results.push(("worst time".into(), report.worst_time));
        let mut all = a;
        all.extend(b);
        self.conservation(&all);
        Ok(())
    }

    fn stationary(&self, model: &LindbladModel, rho0: &DensityMatrix) -> Result<DensityMatrix> {
        let l = liouvillian(model);
        match steady_state(&l) {
            Ok(ss) => Ok(ss),
            Err(CoreError::NonUniqueSteadyState { dim }) => {
                warn!(
                    "stationary state is not unique (dimension {dim}); using the long-time limit of the initial state"
                );
                Ok(stationary_limit(&l, rho0)?)
            }
            Err(e) => Err(e.into()),
        }
    }

    fn spectrum(&mut self, model: &LindbladModel, rho0: &DensityMatrix) -> Result<()> {
        let omegas = self.scenario.frequency.points();
        let d = self.scenario.spectrum.detect;
        let detect = CMatrix::from_fn(3, 3, |i, j| c(d[i][j]));
        let ss = self.stationary(model, rho0)?;
        let s = emission_spectrum_from_state(model, &ss, &detect, &omegas, SpectrumMethod::Resolvent)?;
        let mut table = Table::new("incoherent resonance-fluorescence spectrum")
            .column("omega [Γ_ref]", omegas.clone())
            .column("S [1/Γ_ref]", s.incoherent.values.clone());
        self.results.push(("coherent weight".into(), s.coherent_weight));
        self.results.push(("incoherent weight".into(), s.incoherent_weight));
        if let Some((partner, u)) = self.partner()? {
            let detect_b = &u * &detect * u.adjoint();
            let ss_b = ss.transformed(&u);
            let sb = emission_spectrum_from_state(&partner, &ss_b, &detect_b, &omegas, SpectrumMethod::Resolvent)?;
            let scale = s.incoherent.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let rel = if scale > 0.0 {
                s.incoherent.max_abs_diff(&sb.incoherent) / scale
            } else {
                s.incoherent.max_abs_diff(&sb.incoherent)
            };
            self.checks.push(Check::below(
                "partner spectrum relative difference",
                rel,
                self.scenario.tolerances.spectrum_relative,
            ));
            table = table.column("S_partner [1/Γ_ref]", sb.incoherent.values);
        }
        self.write("spectrum.dat", table)?;
        self.conservation(&[ss]);
        Ok(())
    }

    fn photon_curve(
        &mut self,
        model: &LindbladModel,
        file: &str,
        title: &str,
        f: fn(&LindbladModel, &[f64]) -> trilevel::Result<SampledFunction>,
    ) -> Result<()> {
        let taus = self.scenario.time.points();
        let a = f(model, &taus)?;
        let mut table =
            Table::new(title).column("tau [1/Γ_ref]", taus.clone()).column("value [Γ_ref]", a.values.clone());
        if self.scenario.checks.partner && !matches!(self.scenario.system, SystemParams::Fig2a(_)) {
            bail!("partner comparison of photon statistics needs a fig2a system: the reset state |1⟩ is only invariant under the Fig. 2 map");
        }
        if let Some((partner, _)) = self.partner()? {
            let b = f(&partner, &taus)?;
            self.checks.push(Check::below(
                "partner max abs difference",
                a.max_abs_diff(&b),
                self.scenario.tolerances.photon_statistics,
            ));
            table = table.column("partner [Γ_ref]", b.values);
        }
        self.results.push(("integral".into(), a.integral()));
        self.write(file, table)
    }

    fn trajectories(&mut self, model: &LindbladModel, rho0: &DensityMatrix) -> Result<()> {
        let s = self.scenario;
        let settings = &s.trajectories;
        let opts = McOptions { dt: settings.dt, initial: rho0.clone() };
        let t_final = s.time.stop;
        if !(t_final > 0.0) {
            bail!("trajectories need time.stop > 0");
        }
        let records = mc_trajectories_with(model, settings.count, t_final, s.seed, &opts)?;
        let (mut ids, mut times, mut channels) = (Vec::new(), Vec::new(), Vec::new());
        for r in &records {
            for &(t, ch) in &r.jumps {
                ids.push(r.trajectory as f64);
                times.push(t);
                channels.push(ch as f64);
            }
        }
        let table = Table::new(format!("quantum jumps of {} trajectories to t = {t_final}", records.len()))
            .column("trajectory", ids)
            .column("t [1/Γ_ref]", times)
            .column("channel", channels);
        self.write("jumps.dat", table)?;
        self.results.push(("jumps".into(), records.iter().map(|r| r.jumps.len()).sum::<usize>() as f64));
        self.results.push(("inter-jump gaps".into(), inter_jump_gaps(&records).len() as f64));
        let stats = bright_dark_stats(&records, settings.dark_threshold)?;
        self.results.push(("dark periods".into(), stats.n_dark_periods as f64));
        if let Some(m) = stats.mean_dark {
            self.results.push(("mean dark period [1/Γ_ref]".into(), m));
        }
        if let Some(m) = stats.mean_bright {
            self.results.push(("mean bright period [1/Γ_ref]".into(), m));
        }
        if settings.check_populations {
            let grid = s.time.points();
            let mc = mc_populations(model, &grid, settings.count, s.seed, &opts)?;
            let exact = propagate_series(&liouvillian(model), rho0, &grid)?;
            let mut worst = 0.0_f64;
            for (k, rho) in exact.iter().enumerate() {
                for l in 0..3 {
                    let diff = (mc.mean[k][l] - rho.population(l)).abs();
                    let se = mc.stderr[k][l];
                    worst = worst.max(if se > 0.0 {
                        diff / se
                    } else if diff > 1e-12 {
                        f64::INFINITY
                    } else {
                        0.0
                    });
                }
            }
            let col = |l: usize| mc.mean.iter().map(|m| m[l]).collect();
            let err = |l: usize| mc.stderr.iter().map(|m| m[l]).collect();
            let table = Table::new("ensemble populations")
                .column("t [1/Γ_ref]", grid.clone())
                .column("rho11", col(0))
                .column("se11", err(0))
                .column("rho22", col(1))
                .column("se22", err(1))
                .column("rho33", col(2))
                .column("se33", err(2));
            self.write("mc_populations.dat", table)?;
            self.checks.push(Check::below(
                "populations vs master equation [standard errors]",
                worst,
                s.tolerances.mc_sigmas,
            ));
        }
        Ok(())
    }
}

/// Executes the scenario's task and writes data files plus `report.json` to its output directory.
pub fn run(scenario: &Scenario) -> Result<RunReport> {
    let start = Instant::now();
    let dir = scenario.output.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let model = scenario.system.build().context("building the master equation")?;
    let rho0 = scenario.initial.to_density()?;
    let mut runner =
        Runner { scenario, dir: dir.clone(), checks: Vec::new(), results: Vec::new(), outputs: Vec::new(), map: None };
    info!("running {} on {}", scenario.task, scenario.system.config());
    match scenario.task {
        Task::Simulate => runner.simulate(&model, &rho0),
        Task::EquivCheck => runner.equivalence(&model, &rho0),
        Task::Spectrum => runner.spectrum(&model, &rho0),
        Task::G2 => {
            runner.photon_curve(&model, "g2.dat", "photon detection rate after a detection (unnormalized g2)", g2)
        }
        Task::WaitingTime => {
            runner.photon_curve(&model, "waiting_time.dat", "next-photon waiting-time density", waiting_time)
        }
        Task::Trajectories => runner.trajectories(&model, &rho0),
    }
    .with_context(|| format!("task {} failed", scenario.task))?;

    let pass = runner.checks.iter().all(|c| c.pass);
    let report_path = dir.join("report.json");
    let mut report = RunReport {
        version: VERSION,
        task: scenario.task,
        scenario: scenario.clone(),
        map: runner.map,
        checks: runner.checks,
        results: runner.results,
        outputs: runner.outputs,
        duration_s: 0.0,
        pass,
    };
    report.outputs.push(report_path.clone());
    report.duration_s = start.elapsed().as_secs_f64();
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;
    Ok(report)
}

pub fn describe_map(params: &SystemParams) -> Result<MapSummary> {
    let (target, map) = map_to_partner(params).map_err(|e| match e {
        CoreError::DegenerateBasis(msg) => anyhow::anyhow!("cannot build the dressed basis: {msg}"),
        other => other.into(),
    })?;
    Ok(MapSummary::new(&map, &target))
}
