//! Analysis pipeline for coincidence-count grids: marginal and rotated
//! histograms, Gaussian least-squares fits, heralded slice widths, the
//! one-parameter correlation fit, instrument-response deconvolution, and
//! Monte-Carlo error propagation.
//!
//! The staged procedure fits the one-dimensional marginals first, then finds
//! the correlation that best fits a two-dimensional Gaussian with those
//! marginals frozen.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{AxisKind, CountGrid};
use crate::model::{MomentSummary, Side};
use crate::simulate::{derive_seed, resample_counts, InstrumentResponse};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("histogram needs at least {min} bins, got {got}")]
    TooFewBins { min: usize, got: usize },
    #[error("histogram bins are not uniformly spaced")]
    NonUniformBins,
    #[error("histogram has no weight")]
    EmptyHistogram,
    #[error("histogram is degenerate (no resolvable peak shape)")]
    Degenerate,
    #[error("fit did not converge within {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        last: GaussFit1D,
    },
    #[error("only {found} heralding slices qualify, need at least {required}")]
    TooFewSlices { found: usize, required: usize },
    #[error("marginal fits are degenerate (non-positive widths)")]
    DegenerateMarginals,
    #[error(
        "measured width {measured} is at or below the instrument resolution \
         {resolution}: resolution-limited"
    )]
    ResolutionLimited { measured: f64, resolution: f64 },
    #[error("width and resolution must be non-negative, got ({measured}, {resolution})")]
    InvalidDeconvolution { measured: f64, resolution: f64 },
    #[error("Monte-Carlo error estimation needs at least {min} trials, got {got}")]
    TooFewTrials { min: usize, got: usize },
    #[error("estimator failed in {failed} of {trials} Monte-Carlo trials")]
    TooManyFailures { failed: usize, trials: usize },
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

pub const MIN_HIST_BINS: usize = 8;

/// Uniformly binned 1D histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Hist1D {
    pub centers: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: AxisKind,
}

impl Hist1D {
    pub fn new(centers: Vec<f64>, weights: Vec<f64>, kind: AxisKind) -> Result<Self, FitError> {
        if centers.len() < MIN_HIST_BINS {
            return Err(FitError::TooFewBins {
                min: MIN_HIST_BINS,
                got: centers.len(),
            });
        }
        if centers.len() != weights.len() {
            return Err(FitError::NonUniformBins);
        }
        let step = centers[1] - centers[0];
        if !(step.is_finite() && step > 0.0) {
            return Err(FitError::NonUniformBins);
        }
        for w in centers.windows(2) {
            if ((w[1] - w[0]) - step).abs() > 1e-9 * step {
                return Err(FitError::NonUniformBins);
            }
        }
        Ok(Self {
            centers,
            weights,
            kind,
        })
    }

    pub fn step(&self) -> f64 {
        self.centers[1] - self.centers[0]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Histogram of one photon's coordinate: counts summed over the other axis.
/// Preserves the total number of counts exactly.
pub fn marginal_hist(counts: &CountGrid, side: Side) -> Hist1D {
    let (ns, ni) = counts.grid.shape();
    let axis = counts.grid.axis(side);
    let weights = match side {
        Side::Signal => (0..ns)
            .map(|j| (0..ni).map(|k| counts.counts[(j, k)] as f64).sum())
            .collect(),
        Side::Idler => (0..ni)
            .map(|k| (0..ns).map(|j| counts.counts[(j, k)] as f64).sum())
            .collect(),
    };
    Hist1D::new(axis.values(), weights, axis.kind).expect("grid axes satisfy histogram invariants")
}

/// Rotated-coordinate accumulation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    /// signal + idler
    Sum,
    /// signal - idler
    Difference,
}

/// Histogram of the sum or difference coordinate. The bin size matches the
/// coarser of the two grid steps; bins are anchored so the distribution
/// center falls on a bin center. Total counts are preserved exactly.
pub fn rotated_hist(counts: &CountGrid, mode: Rotation) -> Hist1D {
    let grid = &counts.grid;
    let step = grid.signal.step.max(grid.idler.step);
    let sign = match mode {
        Rotation::Sum => 1.0,
        Rotation::Difference => -1.0,
    };
    let origin = grid.signal.center + sign * grid.idler.center;

    let coord = |j: usize, k: usize| grid.signal.value(j) + sign * grid.idler.value(k);
    let (ns, ni) = grid.shape();
    let bin_of = |v: f64| ((v - origin) / step).round() as i64;
    let lo = bin_of(coord(0, if sign > 0.0 { 0 } else { ni - 1 }));
    let hi = bin_of(coord(ns - 1, if sign > 0.0 { ni - 1 } else { 0 }));
    let nbins = (hi - lo + 1) as usize;
    let mut weights = vec![0.0; nbins];
    for j in 0..ns {
        for k in 0..ni {
            let c = counts.counts[(j, k)];
            if c > 0 {
                weights[(bin_of(coord(j, k)) - lo) as usize] += c as f64;
            }
        }
    }
    let centers = (0..nbins)
        .map(|b| origin + (lo + b as i64) as f64 * step)
        .collect();
    Hist1D::new(centers, weights, grid.signal.kind)
        .expect("rotated histogram satisfies invariants for valid grids")
}

// ---------------------------------------------------------------------------
// 1D Gaussian fit (Levenberg-Marquardt)
// ---------------------------------------------------------------------------

/// Result of a least-squares fit of `A exp(-(x-mu)^2 / 2 w^2) + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussFit1D {
    pub amplitude: f64,
    pub center: f64,
    /// Intensity standard deviation.
    pub width: f64,
    pub offset: f64,
    /// Euclidean norm of the residual vector at the solution.
    pub residual_norm: f64,
}

const LM_MAX_ITERATIONS: usize = 200;
const LM_RELATIVE_STEP_TOL: f64 = 1e-10;

/// Fit a Gaussian peak with constant offset to a histogram. Initialized from
/// the sample moments and the extreme weights; converges when the relative
/// parameter step drops below 1e-10.
pub fn fit_gauss1d(hist: &Hist1D) -> Result<GaussFit1D, FitError> {
    let x = &hist.centers;
    let y = &hist.weights;
    let n = x.len();
    if n < MIN_HIST_BINS {
        return Err(FitError::TooFewBins {
            min: MIN_HIST_BINS,
            got: n,
        });
    }
    if hist.total() == 0.0 {
        return Err(FitError::EmptyHistogram);
    }

    // moment-based initialization above the baseline
    let b0 = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let a0 = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - b0;
    if !(a0 > 0.0) {
        return Err(FitError::Degenerate);
    }
    let excess: Vec<f64> = y.iter().map(|v| (v - b0).max(0.0)).collect();
    let mass: f64 = excess.iter().sum();
    let mu0 = excess.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / mass;
    let var0 = excess
        .iter()
        .zip(x)
        .map(|(w, x)| w * (x - mu0) * (x - mu0))
        .sum::<f64>()
        / mass;
    let w0 = var0.sqrt();
    if !(w0 > 1e-6 * hist.step()) {
        // all weight effectively in one bin
        return Err(FitError::Degenerate);
    }

    let mut theta = [a0, mu0, w0, b0];
    let scale = [a0, w0, w0, a0];

    let model = |t: &[f64; 4], xi: f64| {
        let d = (xi - t[1]) / t[2];
        t[0] * (-0.5 * d * d).exp() + t[3]
    };
    let sse = |t: &[f64; 4]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let r = model(t, xi) - yi;
                r * r
            })
            .sum()
    };

    let mut current_sse = sse(&theta);
    let mut lambda = 1e-3;
    for iteration in 0..LM_MAX_ITERATIONS {
        // normal equations
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtr = [0.0f64; 4];
        for (&xi, &yi) in x.iter().zip(y) {
            let d = (xi - theta[1]) / theta[2];
            let e = (-0.5 * d * d).exp();
            let g = [
                e,
                theta[0] * e * d / theta[2],
                theta[0] * e * d * d / theta[2],
                1.0,
            ];
            let r = theta[0] * e + theta[3] - yi;
            for p in 0..4 {
                jtr[p] += g[p] * r;
                for q in p..4 {
                    jtj[p][q] += g[p] * g[q];
                }
            }
        }
        for p in 0..4 {
            for q in 0..p {
                jtj[p][q] = jtj[q][p];
            }
        }

        let mut accepted = false;
        let mut step_rel = f64::INFINITY;
        for _ in 0..40 {
            let mut aug = jtj;
            for p in 0..4 {
                aug[p][p] += lambda * jtj[p][p].max(1e-30);
            }
            let Some(delta) = solve4(&aug, &jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [
                theta[0] - delta[0],
                theta[1] - delta[1],
                theta[2] - delta[2],
                theta[3] - delta[3],
            ];
            if !(trial[2].abs() > 0.0) || trial.iter().any(|v| !v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let trial_sse = sse(&trial);
            if trial_sse <= current_sse {
                step_rel = (0..4)
                    .map(|p| delta[p].abs() / (theta[p].abs() + scale[p].abs() + f64::MIN_POSITIVE))
                    .fold(0.0, f64::max);
                theta = trial;
                current_sse = trial_sse;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }

        if accepted && step_rel < LM_RELATIVE_STEP_TOL {
            return Ok(finish(theta, current_sse));
        }
        if !accepted {
            // stuck: either converged to machine precision or genuinely failing
            if iteration > 0 {
                return Ok(finish(theta, current_sse));
            }
            return Err(FitError::NonConvergence {
                iterations: LM_MAX_ITERATIONS,
                last: finish(theta, current_sse),
            });
        }
    }
    Err(FitError::NonConvergence {
        iterations: LM_MAX_ITERATIONS,
        last: finish(theta, current_sse),
    })
}

fn finish(theta: [f64; 4], sse: f64) -> GaussFit1D {
    GaussFit1D {
        amplitude: theta[0],
        center: theta[1],
        width: theta[2].abs(),
        offset: theta[3],
        residual_norm: sse.sqrt(),
    }
}

/// Solve a 4x4 linear system by Gaussian elimination with partial pivoting.
fn solve4(a: &[[f64; 4]; 4], b: &[f64; 4]) -> Option<[f64; 4]> {
    let mut m = *a;
    let mut v = *b;
    for col in 0..4 {
        let pivot = (col..4).max_by(|&p, &q| {
            m[p][col].abs().partial_cmp(&m[q][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in (col + 1)..4 {
            let f = m[row][col] / m[col][col];
            for c in col..4 {
                m[row][c] -= f * m[col][c];
            }
            v[row] -= f * v[col];
        }
    }
    let mut out = [0.0; 4];
    for col in (0..4).rev() {
        let mut s = v[col];
        for c in (col + 1)..4 {
            s -= m[col][c] * out[c];
        }
        out[col] = s / m[col][col];
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// Heralded widths
// ---------------------------------------------------------------------------

/// Slice-selection policy for heralded widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldPolicy {
    /// A slice qualifies when its marginal weight is at least this fraction
    /// of the peak slice.
    pub min_peak_fraction: f64,
    /// Minimum number of qualifying slices.
    pub min_slices: usize,
}

impl Default for HeraldPolicy {
    fn default() -> Self {
        Self {
            min_peak_fraction: 0.5,
            min_slices: 3,
        }
    }
}

/// Width of one photon's distribution with the partner fixed, estimated as
/// the unweighted mean of Gaussian widths fitted to every qualifying slice.
/// `herald` names the fixed photon; the width describes the other one.
/// Returns (mean width, standard error of the mean).
pub fn heralded_width(
    counts: &CountGrid,
    herald: Side,
    policy: &HeraldPolicy,
) -> Result<(f64, f64), FitError> {
    let herald_marginal = marginal_hist(counts, herald);
    let peak = herald_marginal
        .weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(FitError::EmptyHistogram);
    }
    let threshold = policy.min_peak_fraction * peak;
    let measured_axis = counts.grid.axis(herald.other());
    let centers = measured_axis.values();

    let mut widths = Vec::new();
    for (slice_idx, &w) in herald_marginal.weights.iter().enumerate() {
        if w < threshold {
            continue;
        }
        let slice: Vec<f64> = match herald {
            Side::Idler => (0..counts.grid.signal.n)
                .map(|j| counts.counts[(j, slice_idx)] as f64)
                .collect(),
            Side::Signal => (0..counts.grid.idler.n)
                .map(|k| counts.counts[(slice_idx, k)] as f64)
                .collect(),
        };
        let hist = Hist1D::new(centers.clone(), slice, measured_axis.kind)?;
        if let Ok(fit) = fit_gauss1d(&hist) {
            widths.push(fit.width);
        }
    }
    if widths.len() < policy.min_slices {
        return Err(FitError::TooFewSlices {
            found: widths.len(),
            required: policy.min_slices,
        });
    }
    let k = widths.len() as f64;
    let mean = widths.iter().sum::<f64>() / k;
    let var = widths.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (k - 1.0);
    Ok((mean, (var / k).sqrt()))
}

// ---------------------------------------------------------------------------
// Correlation fit
// ---------------------------------------------------------------------------

const RHO_SEARCH_BOUND: f64 = 1.0 - 1e-7;
const RHO_TOLERANCE: f64 = 1e-6;

/// Correlation of a two-dimensional Gaussian with centers and widths frozen
/// from the marginal fits, by one-parameter least squares over rho in (-1, 1)
/// with the overall amplitude profiled out analytically. Golden-section
/// search to 1e-6 in rho.
pub fn fit_correlation(
    counts: &CountGrid,
    marginal_s: &GaussFit1D,
    marginal_i: &GaussFit1D,
) -> Result<f64, FitError> {
    if !(marginal_s.width > 0.0 && marginal_i.width > 0.0) {
        return Err(FitError::DegenerateMarginals);
    }
    let (ns, ni) = counts.grid.shape();
    let u: Vec<f64> = counts
        .grid
        .signal
        .values()
        .iter()
        .map(|x| (x - marginal_s.center) / marginal_s.width)
        .collect();
    let v: Vec<f64> = counts
        .grid
        .idler
        .values()
        .iter()
        .map(|y| (y - marginal_i.center) / marginal_i.width)
        .collect();

    // negative profiled objective: maximizing (sum c g)^2 / (sum g^2)
    // minimizes the sum of squared residuals
    let neg_gain = |rho: f64| -> f64 {
        let one_m = 1.0 - rho * rho;
        let mut cg = 0.0;
        let mut gg = 0.0;
        for j in 0..ns {
            for k in 0..ni {
                let q = (u[j] * u[j] - 2.0 * rho * u[j] * v[k] + v[k] * v[k]) / (2.0 * one_m);
                let g = (-q).exp();
                cg += counts.counts[(j, k)] as f64 * g;
                gg += g * g;
            }
        }
        -(cg * cg) / gg
    };

    Ok(golden_min(neg_gain, -RHO_SEARCH_BOUND, RHO_SEARCH_BOUND, RHO_TOLERANCE))
}

/// Golden-section minimization of a unimodal scalar function.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

// ---------------------------------------------------------------------------
// Deconvolution
// ---------------------------------------------------------------------------

/// Quadrature subtraction of a Gaussian instrument response from a measured
/// Gaussian width. Errors when the measurement is resolution-limited.
pub fn deconvolve_width(measured: f64, resolution: f64) -> Result<f64, FitError> {
    if !(measured.is_finite() && resolution.is_finite()) || measured < 0.0 || resolution < 0.0 {
        return Err(FitError::InvalidDeconvolution {
            measured,
            resolution,
        });
    }
    if measured <= resolution {
        return Err(FitError::ResolutionLimited {
            measured,
            resolution,
        });
    }
    Ok((measured * measured - resolution * resolution).sqrt())
}

/// A moment summary together with a flag recording whether the deconvolved
/// correlation had to be clamped into (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeconvolvedSummary {
    pub summary: MomentSummary,
    pub rho_clamped: bool,
}

/// Remove independent per-axis Gaussian responses from a fitted summary.
///
/// Marginals deconvolve in quadrature. The response adds no covariance, so
/// the covariance is preserved and the correlation rescales by the width
/// ratio; it is clamped (and flagged) if responses inconsistent with the data
/// would push it past +-1. Heralded widths deconvolve in quadrature against
/// an effective response that includes the partner-axis response mapped
/// through the correlation slope. Sum and difference widths deconvolve
/// against the quadrature-combined response.
pub fn deconvolve_summary(
    raw: &MomentSummary,
    response: &InstrumentResponse,
) -> Result<DeconvolvedSummary, FitError> {
    let marginal_s = deconvolve_width(raw.marginal_s, response.res_s)?;
    let marginal_i = deconvolve_width(raw.marginal_i, response.res_i)?;
    let mut rho = raw.rho * (raw.marginal_s * raw.marginal_i) / (marginal_s * marginal_i);
    let rho_clamped = rho.abs() >= 1.0;
    if rho_clamped {
        rho = rho.signum() * (1.0 - 1e-12);
    }

    // effective heralded response: own axis plus the partner response seen
    // through the conditional-mean slope
    let eff_s = (response.res_s * response.res_s
        + (raw.rho * raw.marginal_s / marginal_i).powi(2) * response.res_i * response.res_i)
        .sqrt();
    let eff_i = (response.res_i * response.res_i
        + (raw.rho * raw.marginal_i / marginal_s).powi(2) * response.res_s * response.res_s)
        .sqrt();
    let heralded_s = deconvolve_width(raw.heralded_s, eff_s)?;
    let heralded_i = deconvolve_width(raw.heralded_i, eff_i)?;

    let combined = response.combined();
    let width_sum = raw
        .width_sum
        .map(|w| deconvolve_width(w, combined))
        .transpose()?;
    let width_diff = raw
        .width_diff
        .map(|w| deconvolve_width(w, combined))
        .transpose()?;

    Ok(DeconvolvedSummary {
        summary: MomentSummary {
            marginal_s,
            marginal_i,
            heralded_s,
            heralded_i,
            rho,
            width_sum,
            width_diff,
        },
        rho_clamped,
    })
}

// ---------------------------------------------------------------------------
// Full grid fit
// ---------------------------------------------------------------------------

/// All fitted quantities of one count grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFit {
    pub summary: MomentSummary,
    pub marginal_fit_s: GaussFit1D,
    pub marginal_fit_i: GaussFit1D,
    /// Standard errors of the slice means backing the heralded widths.
    pub heralded_sem_s: f64,
    pub heralded_sem_i: f64,
}

/// Run the staged fit on a count grid: marginal fits, heralded slice widths,
/// the frozen-marginal correlation fit, and (when both axes share a unit)
/// Gaussian fits to the rotated sum/difference histograms.
pub fn fit_count_grid(counts: &CountGrid, policy: &HeraldPolicy) -> Result<GridFit, FitError> {
    let fit_s = fit_gauss1d(&marginal_hist(counts, Side::Signal))?;
    let fit_i = fit_gauss1d(&marginal_hist(counts, Side::Idler))?;
    let (heralded_s, sem_s) = heralded_width(counts, Side::Idler, policy)?;
    let (heralded_i, sem_i) = heralded_width(counts, Side::Signal, policy)?;
    let rho = fit_correlation(counts, &fit_s, &fit_i)?;

    let same_units = counts.grid.signal.kind == counts.grid.idler.kind;
    let (width_sum, width_diff) = if same_units {
        let sum = fit_gauss1d(&rotated_hist(counts, Rotation::Sum))?;
        let diff = fit_gauss1d(&rotated_hist(counts, Rotation::Difference))?;
        (Some(sum.width), Some(diff.width))
    } else {
        (None, None)
    };

    Ok(GridFit {
        summary: MomentSummary {
            marginal_s: fit_s.width,
            marginal_i: fit_i.width,
            heralded_s,
            heralded_i,
            rho,
            width_sum,
            width_diff,
        },
        marginal_fit_s: fit_s,
        marginal_fit_i: fit_i,
        heralded_sem_s: sem_s,
        heralded_sem_i: sem_i,
    })
}

// ---------------------------------------------------------------------------
// Monte-Carlo errors
// ---------------------------------------------------------------------------

pub const MIN_MC_TRIALS: usize = 50;
/// An estimator may fail in at most this fraction of the trials.
pub const MC_MAX_FAILURE_FRACTION: f64 = 0.2;

/// Standard errors of an estimator under Poissonian shot noise: every cell is
/// resampled as Poisson with the observed count as its mean, the estimator is
/// rerun, and the per-parameter sample standard deviations are returned.
/// Deterministic for a fixed seed, under any parallel schedule.
pub fn monte_carlo_errors<F>(
    counts: &CountGrid,
    n_trials: usize,
    seed: u64,
    estimator: F,
) -> Result<Vec<f64>, FitError>
where
    F: Fn(&CountGrid) -> Result<Vec<f64>, FitError> + Sync,
{
    if n_trials < MIN_MC_TRIALS {
        return Err(FitError::TooFewTrials {
            min: MIN_MC_TRIALS,
            got: n_trials,
        });
    }
    let results: Vec<Option<Vec<f64>>> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let resampled = resample_counts(counts, derive_seed(seed, trial as u64));
            estimator(&resampled).ok()
        })
        .collect();

    let ok: Vec<&Vec<f64>> = results.iter().flatten().collect();
    let failed = n_trials - ok.len();
    if (failed as f64) > MC_MAX_FAILURE_FRACTION * n_trials as f64 || ok.is_empty() {
        return Err(FitError::TooManyFailures {
            failed,
            trials: n_trials,
        });
    }
    let dim = ok[0].len();
    let m = ok.len() as f64;
    let mut std = vec![0.0; dim];
    for p in 0..dim {
        let mean = ok.iter().map(|r| r[p]).sum::<f64>() / m;
        let var = ok.iter().map(|r| (r[p] - mean) * (r[p] - mean)).sum::<f64>() / (m - 1.0);
        std[p] = var.sqrt();
    }
    Ok(std)
}

// ---------------------------------------------------------------------------
// Combined analysis with Monte-Carlo errors
// ---------------------------------------------------------------------------

/// Per-entry standard errors matching the fields of a `MomentSummary`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentErrors {
    pub marginal_s: f64,
    pub marginal_i: f64,
    pub heralded_s: f64,
    pub heralded_i: f64,
    pub rho: f64,
    pub width_sum: Option<f64>,
    pub width_diff: Option<f64>,
}

/// A fully analyzed count grid: the staged fit, its deconvolution, and
/// Monte-Carlo standard errors for every raw and deconvolved entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzedGrid {
    pub fit: GridFit,
    pub deconvolved: DeconvolvedSummary,
    pub raw_errors: MomentErrors,
    pub dec_errors: MomentErrors,
    /// Standard errors of the fitted marginal centers.
    pub center_errors: (f64, f64),
}

fn flatten_analysis(fit: &GridFit, dec: &DeconvolvedSummary) -> Vec<f64> {
    fn push_summary(v: &mut Vec<f64>, s: &MomentSummary) {
        v.extend([s.marginal_s, s.marginal_i, s.heralded_s, s.heralded_i, s.rho]);
        if let Some(w) = s.width_sum {
            v.push(w);
        }
        if let Some(w) = s.width_diff {
            v.push(w);
        }
    }
    let mut v = vec![fit.marginal_fit_s.center, fit.marginal_fit_i.center];
    push_summary(&mut v, &fit.summary);
    push_summary(&mut v, &dec.summary);
    v
}

fn unpack_errors(std: &[f64], offset: usize, has_rotated: bool) -> MomentErrors {
    MomentErrors {
        marginal_s: std[offset],
        marginal_i: std[offset + 1],
        heralded_s: std[offset + 2],
        heralded_i: std[offset + 3],
        rho: std[offset + 4],
        width_sum: has_rotated.then(|| std[offset + 5]),
        width_diff: has_rotated.then(|| std[offset + 6]),
    }
}

/// Fit a count grid, deconvolve the instrument response, and attach
/// Monte-Carlo standard errors from `mc_trials` Poisson resamples.
pub fn analyze_count_grid(
    counts: &CountGrid,
    response: &InstrumentResponse,
    policy: &HeraldPolicy,
    mc_trials: usize,
    mc_seed: u64,
) -> Result<AnalyzedGrid, FitError> {
    let fit = fit_count_grid(counts, policy)?;
    let deconvolved = deconvolve_summary(&fit.summary, response)?;
    let std = monte_carlo_errors(counts, mc_trials, mc_seed, |c| {
        let f = fit_count_grid(c, policy)?;
        let d = deconvolve_summary(&f.summary, response)?;
        Ok(flatten_analysis(&f, &d))
    })?;
    let has_rotated = fit.summary.width_sum.is_some();
    let block = if has_rotated { 7 } else { 5 };
    Ok(AnalyzedGrid {
        raw_errors: unpack_errors(&std, 2, has_rotated),
        dec_errors: unpack_errors(&std, 2 + block, has_rotated),
        center_errors: (std[0], std[1]),
        fit,
        deconvolved,
    })
}
