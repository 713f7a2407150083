//! Scenario runner: simulates the four coincidence measurements, runs the
//! analysis pipeline, evaluates witnesses, and writes all output files.
//!
//! Per-distribution randomness derives from the scenario seed: distribution
//! `d` draws its counts with stream `2d` and its Monte-Carlo resamples with
//! stream `2d + 1`, so externally analyzed count grids reproduce a full run
//! exactly.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::estimate::{analyze_count_grid, marginal_hist, rotated_hist, AnalyzedGrid, FitError, Rotation};
use crate::grid::{CountGrid, Grid2D, GridError};
use crate::model::{spectrogram_covariance, ModelError, Side};
use crate::report::{
    read_count_grid_csv, write_count_grid_csv, write_hist_csv, DistributionReport, Provenance,
    Report, ReportError, ToolInfo,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::simulate::{
    derive_seed, draw_counts, sample_gaussian2d, InstrumentResponse, SimulateError, GENERATOR_NAME,
};
use crate::witness::{
    dispersion_cancellation_witness, heralded_tbp_witness, mirrored_uncertainty_witness,
    uncertainty_witness, Measurement, WitnessError, WitnessReport,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("analysis of {label}: {source}")]
    Fit { label: String, source: FitError },
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("count grid {path} has unknown distribution label {label:?}")]
    UnknownDistribution { path: String, label: String },
    #[error("count grids carry different master seeds ({0} vs {1})")]
    MixedSeeds(u64, u64),
}

/// What a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Count grids and histograms only.
    Simulate,
    /// Simulate plus fits and deconvolution in the report.
    Analyze,
    /// Analyze plus entanglement witnesses.
    Witness,
    /// Everything (same as `Witness`).
    All,
}

impl Mode {
    fn wants_analysis(self) -> bool {
        !matches!(self, Mode::Simulate)
    }

    fn wants_witnesses(self) -> bool {
        matches!(self, Mode::Witness | Mode::All)
    }
}

/// The four simulated coincidence measurements, in fixed output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    JointSpectrum,
    JointTemporal,
    SignalTimeIdlerFrequency,
    SignalFrequencyIdlerTime,
}

impl Distribution {
    pub const ALL: [Distribution; 4] = [
        Distribution::JointSpectrum,
        Distribution::JointTemporal,
        Distribution::SignalTimeIdlerFrequency,
        Distribution::SignalFrequencyIdlerTime,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Distribution::JointSpectrum => "joint_spectrum",
            Distribution::JointTemporal => "joint_temporal",
            Distribution::SignalTimeIdlerFrequency => "signal_time_idler_frequency",
            Distribution::SignalFrequencyIdlerTime => "signal_frequency_idler_time",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.label() == label)
    }

    fn index(self) -> u64 {
        Self::ALL.iter().position(|d| d == &self).unwrap() as u64
    }

    /// Seed stream for the Poisson draw of this distribution.
    pub fn draw_seed(self, master: u64) -> u64 {
        derive_seed(master, 2 * self.index())
    }

    /// Seed stream for the Monte-Carlo resamples of this distribution.
    pub fn mc_seed(self, master: u64) -> u64 {
        derive_seed(master, 2 * self.index() + 1)
    }
}

/// A simulated count grid together with the responses to deconvolve from it.
#[derive(Debug, Clone)]
pub struct PreparedDistribution {
    pub dist: Distribution,
    pub counts: CountGrid,
    pub response: InstrumentResponse,
}

/// Simulate one distribution of a scenario: sample the response-broadened
/// closed-form Gaussian on the measurement grid and draw Poisson counts.
pub fn simulate_distribution(
    scenario: &Scenario,
    dist: Distribution,
) -> Result<PreparedDistribution, RunError> {
    let state = scenario.biphoton_state()?;
    let gate = scenario.gate_pulse()?;
    let spectral = scenario.spectral_response()?;
    let tau_g = gate.tau_g();
    let (half, n) = (scenario.grid.half_span_sigmas, scenario.grid.n);

    let (grid, cov, means, response) = match dist {
        Distribution::JointSpectrum => {
            let grid = Grid2D::spectral(&state, half, n)?;
            (
                grid,
                state.spectral_covariance().blurred(spectral.res_s, spectral.res_i),
                (state.center(Side::Signal), state.center(Side::Idler)),
                spectral,
            )
        }
        Distribution::JointTemporal => {
            let grid = Grid2D::temporal(&state, half, n)?;
            (
                grid,
                state.temporal_covariance().blurred(tau_g, tau_g),
                (0.0, 0.0),
                InstrumentResponse::new(tau_g, tau_g)?,
            )
        }
        Distribution::SignalTimeIdlerFrequency => {
            let grid = Grid2D::time_frequency(&state, &gate, Side::Signal, half, n)?;
            // the gate width is already part of the spectrogram time axis;
            // only the partner's monochromator broadens the frequency axis
            (
                grid,
                spectrogram_covariance(&state, &gate, Side::Signal).blurred(0.0, spectral.res_i),
                (0.0, state.center(Side::Idler)),
                InstrumentResponse::new(tau_g, spectral.res_i)?,
            )
        }
        Distribution::SignalFrequencyIdlerTime => {
            let grid = Grid2D::time_frequency(&state, &gate, Side::Idler, half, n)?;
            (
                grid,
                spectrogram_covariance(&state, &gate, Side::Idler).blurred(spectral.res_s, 0.0),
                (state.center(Side::Signal), 0.0),
                InstrumentResponse::new(spectral.res_s, tau_g)?,
            )
        }
    };

    let intensity = sample_gaussian2d(&grid, means.0, means.1, cov)?;
    let counts = draw_counts(
        &intensity,
        scenario.run.total_counts,
        dist.draw_seed(scenario.run.seed),
    )?;
    Ok(PreparedDistribution {
        dist,
        counts,
        response,
    })
}

/// Everything a run produced.
#[derive(Debug)]
pub struct RunOutput {
    pub report: Option<Report>,
    pub files: Vec<PathBuf>,
    pub any_inconclusive: bool,
}

/// Run a scenario end to end and write outputs under `out_dir`.
pub fn run(scenario: &Scenario, mode: Mode, out_dir: &Path) -> Result<RunOutput, RunError> {
    std::fs::create_dir_all(out_dir).map_err(|e| RunError::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let mut files = Vec::new();

    let prepared: Vec<PreparedDistribution> = Distribution::ALL
        .into_iter()
        .map(|d| simulate_distribution(scenario, d))
        .collect::<Result<_, _>>()?;

    for p in &prepared {
        let path = out_dir.join(format!("counts_{}.csv", p.dist.label()));
        write_count_grid_csv(&path, &p.counts, p.dist.label(), scenario.run.seed, GENERATOR_NAME)?;
        files.push(path);
        write_histograms(out_dir, p, &mut files)?;
    }

    if !mode.wants_analysis() {
        return Ok(RunOutput {
            report: None,
            files,
            any_inconclusive: false,
        });
    }

    let analyses = analyze_prepared(scenario, &prepared)?;
    let report = assemble_report(scenario, scenario.run.seed, &prepared, &analyses, mode)?;
    let any_inconclusive = report.any_inconclusive();
    files.extend(write_report_files(out_dir, &report)?);
    Ok(RunOutput {
        report: Some(report),
        files,
        any_inconclusive,
    })
}

/// Analyze externally supplied count-grid CSVs with a scenario's instrument
/// configuration: the estimation and witness pipeline without simulation.
/// The grids' recorded master seed drives the Monte-Carlo streams, so a grid
/// written by [`run`] reproduces that run's report exactly.
pub fn analyze_external(
    scenario: &Scenario,
    csv_paths: &[PathBuf],
    out_dir: &Path,
) -> Result<RunOutput, RunError> {
    std::fs::create_dir_all(out_dir).map_err(|e| RunError::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let mut master: Option<u64> = None;
    let mut prepared = Vec::new();
    for path in csv_paths {
        let parsed = read_count_grid_csv(path)?;
        let dist = Distribution::from_label(&parsed.label).ok_or_else(|| {
            RunError::UnknownDistribution {
                path: path.display().to_string(),
                label: parsed.label.clone(),
            }
        })?;
        match master {
            None => master = Some(parsed.master_seed),
            Some(m) if m != parsed.master_seed => {
                return Err(RunError::MixedSeeds(m, parsed.master_seed))
            }
            _ => {}
        }
        prepared.push(PreparedDistribution {
            dist,
            counts: parsed.counts,
            response: external_response(scenario, dist)?,
        });
    }
    prepared.sort_by_key(|p| p.dist.index());
    let master = master.unwrap_or(scenario.run.seed);

    let analyses = analyze_prepared_with_master(scenario, &prepared, master)?;
    let report = assemble_report(scenario, master, &prepared, &analyses, Mode::All)?;
    let any_inconclusive = report.any_inconclusive();
    let files = write_report_files(out_dir, &report)?;
    Ok(RunOutput {
        report: Some(report),
        files,
        any_inconclusive,
    })
}

fn external_response(
    scenario: &Scenario,
    dist: Distribution,
) -> Result<InstrumentResponse, RunError> {
    let spectral = scenario.spectral_response()?;
    let tau_g = scenario.gate.tau_g;
    Ok(match dist {
        Distribution::JointSpectrum => spectral,
        Distribution::JointTemporal => InstrumentResponse::new(tau_g, tau_g)?,
        Distribution::SignalTimeIdlerFrequency => {
            InstrumentResponse::new(tau_g, spectral.res_i)?
        }
        Distribution::SignalFrequencyIdlerTime => {
            InstrumentResponse::new(spectral.res_s, tau_g)?
        }
    })
}

fn analyze_prepared(
    scenario: &Scenario,
    prepared: &[PreparedDistribution],
) -> Result<Vec<AnalyzedGrid>, RunError> {
    analyze_prepared_with_master(scenario, prepared, scenario.run.seed)
}

fn analyze_prepared_with_master(
    scenario: &Scenario,
    prepared: &[PreparedDistribution],
    master: u64,
) -> Result<Vec<AnalyzedGrid>, RunError> {
    let policy = scenario.herald_policy();
    prepared
        .iter()
        .map(|p| {
            analyze_count_grid(
                &p.counts,
                &p.response,
                &policy,
                scenario.run.mc_trials,
                p.dist.mc_seed(master),
            )
            .map_err(|source| RunError::Fit {
                label: p.dist.label().to_string(),
                source,
            })
        })
        .collect()
}

fn assemble_report(
    scenario: &Scenario,
    master_seed: u64,
    prepared: &[PreparedDistribution],
    analyses: &[AnalyzedGrid],
    mode: Mode,
) -> Result<Report, RunError> {
    let distributions: Vec<DistributionReport> = prepared
        .iter()
        .zip(analyses)
        .map(|(p, a)| DistributionReport::from_analysis(p.dist.label(), &p.counts, a))
        .collect();
    let witnesses = if mode.wants_witnesses() {
        build_witnesses(scenario, &distributions)?
    } else {
        Vec::new()
    };
    Ok(Report {
        schema_version: crate::report::REPORT_SCHEMA_VERSION,
        tool: ToolInfo::current(),
        provenance: Provenance {
            master_seed,
            generator: GENERATOR_NAME.to_string(),
            mc_trials: scenario.run.mc_trials,
            significance: scenario.run.significance,
        },
        scenario: scenario.clone(),
        distributions,
        witnesses,
    })
}

fn build_witnesses(
    scenario: &Scenario,
    distributions: &[DistributionReport],
) -> Result<Vec<WitnessReport>, RunError> {
    let find = |label: &str| distributions.iter().find(|d| d.label == label);
    let (Some(jsi), Some(jti)) = (find("joint_spectrum"), find("joint_temporal")) else {
        return Ok(Vec::new());
    };
    let k = scenario.run.significance;
    let mut out = Vec::new();

    let meas = |w: &crate::report::WidthEntry, dec: bool| {
        if dec {
            Measurement::new(w.deconvolved, w.deconvolved_error)
        } else {
            Measurement::new(w.raw, w.raw_error)
        }
    };

    if let (Some(sum_w), Some(diff_t)) = (&jsi.width_sum, &jti.width_diff) {
        let mut w = uncertainty_witness(meas(sum_w, true), meas(diff_t, true), k)?;
        w.name = "uncertainty_product".into();
        out.push(w);
        let mut w = uncertainty_witness(meas(sum_w, false), meas(diff_t, false), k)?;
        w.name = "uncertainty_product_raw".into();
        out.push(w);
    }
    if let (Some(diff_w), Some(sum_t)) = (&jsi.width_diff, &jti.width_sum) {
        out.push(mirrored_uncertainty_witness(
            meas(diff_w, true),
            meas(sum_t, true),
            k,
        )?);
    }
    for (label, bw, t) in [
        ("heralded_tbp_signal", &jsi.signal_heralded, &jti.signal_heralded),
        ("heralded_tbp_idler", &jsi.idler_heralded, &jti.idler_heralded),
    ] {
        let mut w = heralded_tbp_witness(meas(bw, true), meas(t, true), k)?;
        w.name = label.into();
        out.push(w);
    }

    // dispersion-cancellation comparison for chirped scenarios: the
    // classical floor is computed from the model's unchirped spread and the
    // mean applied dispersion magnitude
    let state = scenario.biphoton_state()?;
    if state.is_chirped() {
        if let Some(diff_t) = &jti.width_diff {
            let dt0 = state
                .with_chirps(0.0, 0.0)
                .temporal_moments()
                .width_diff
                .expect("temporal moments carry a difference width");
            let chirps = [state.chirp(Side::Signal), state.chirp(Side::Idler)];
            let nonzero: Vec<f64> = chirps.iter().filter(|a| **a != 0.0).map(|a| a.abs()).collect();
            let mean_a = nonzero.iter().sum::<f64>() / nonzero.len() as f64;
            out.push(dispersion_cancellation_witness(
                meas(diff_t, true),
                Measurement::exact(dt0),
                mean_a,
                k,
            )?);
        }
    }
    Ok(out)
}

fn write_histograms(
    out_dir: &Path,
    p: &PreparedDistribution,
    files: &mut Vec<PathBuf>,
) -> Result<(), RunError> {
    let label = p.dist.label();
    for (suffix, hist) in [
        ("signal", marginal_hist(&p.counts, Side::Signal)),
        ("idler", marginal_hist(&p.counts, Side::Idler)),
    ] {
        let path = out_dir.join(format!("hist_{label}_{suffix}.csv"));
        write_hist_csv(&path, &hist, &format!("{label} {suffix} marginal"))?;
        files.push(path);
    }
    if p.counts.grid.signal.kind == p.counts.grid.idler.kind {
        for (suffix, mode) in [("sum", Rotation::Sum), ("diff", Rotation::Difference)] {
            let path = out_dir.join(format!("hist_{label}_{suffix}.csv"));
            write_hist_csv(
                &path,
                &rotated_hist(&p.counts, mode),
                &format!("{label} {suffix} coordinate"),
            )?;
            files.push(path);
        }
    }
    Ok(())
}

fn write_report_files(out_dir: &Path, report: &Report) -> Result<Vec<PathBuf>, RunError> {
    let json_path = out_dir.join("report.json");
    std::fs::write(&json_path, report.to_json()).map_err(|e| RunError::Io {
        path: json_path.display().to_string(),
        source: e,
    })?;
    let txt_path = out_dir.join("report.txt");
    std::fs::write(&txt_path, report.to_text_table()).map_err(|e| RunError::Io {
        path: txt_path.display().to_string(),
        source: e,
    })?;
    Ok(vec![json_path, txt_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witness::Verdict;

    fn quick_scenario() -> Scenario {
        let mut s = Scenario::preset("table1").unwrap();
        s.grid.n = 48;
        s.run.total_counts = 2e5;
        s.run.mc_trials = 50;
        s
    }

    #[test]
    fn simulate_mode_writes_grids_and_hists() {
        let s = quick_scenario();
        let dir = tempfile::tempdir().unwrap();
        let out = run(&s, Mode::Simulate, dir.path()).unwrap();
        assert!(out.report.is_none());
        // 4 count grids + (2 marginals each) + (sum/diff for the two
        // same-unit distributions)
        assert_eq!(out.files.len(), 4 + 8 + 4);
        for f in &out.files {
            assert!(f.exists(), "{f:?} missing");
        }
    }

    #[test]
    fn witness_mode_reports_violation() {
        let s = quick_scenario();
        let dir = tempfile::tempdir().unwrap();
        let out = run(&s, Mode::All, dir.path()).unwrap();
        let report = out.report.unwrap();
        assert_eq!(report.distributions.len(), 4);
        let uncertainty = report
            .witnesses
            .iter()
            .find(|w| w.name == "uncertainty_product")
            .unwrap();
        assert_eq!(uncertainty.verdict, Verdict::Violated);
        assert!(uncertainty.value < 1.0);
        let mirrored = report
            .witnesses
            .iter()
            .find(|w| w.name == "mirrored_uncertainty_product")
            .unwrap();
        assert_eq!(mirrored.verdict, Verdict::NotViolated);
        assert!(!out.any_inconclusive);
    }

    #[test]
    fn analyze_mode_skips_witnesses() {
        let s = quick_scenario();
        let dir = tempfile::tempdir().unwrap();
        let out = run(&s, Mode::Analyze, dir.path()).unwrap();
        let report = out.report.unwrap();
        assert!(report.witnesses.is_empty());
        assert_eq!(report.distributions.len(), 4);
    }

    #[test]
    fn external_analysis_reproduces_run_report() {
        let s = quick_scenario();
        let dir = tempfile::tempdir().unwrap();
        let full = run(&s, Mode::All, dir.path()).unwrap();
        let csvs: Vec<PathBuf> = Distribution::ALL
            .iter()
            .map(|d| dir.path().join(format!("counts_{}.csv", d.label())))
            .collect();
        let ext_dir = tempfile::tempdir().unwrap();
        let ext = analyze_external(&s, &csvs, ext_dir.path()).unwrap();
        assert_eq!(ext.report.unwrap(), full.report.unwrap());
        assert_eq!(
            std::fs::read(dir.path().join("report.json")).unwrap(),
            std::fs::read(ext_dir.path().join("report.json")).unwrap()
        );
    }

    #[test]
    fn chirped_scenario_reports_dispersion_witness() {
        let mut s = Scenario::preset("fig4d").unwrap();
        s.grid.n = 48;
        s.run.total_counts = 2e5;
        s.run.mc_trials = 50;
        let dir = tempfile::tempdir().unwrap();
        let out = run(&s, Mode::Witness, dir.path()).unwrap();
        let report = out.report.unwrap();
        let w = report
            .witnesses
            .iter()
            .find(|w| w.name == "dispersion_cancellation")
            .unwrap();
        assert_eq!(w.verdict, Verdict::Violated);
    }
}
