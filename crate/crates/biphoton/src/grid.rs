//! Measurement grids and the sampled intensity / coincidence-count
//! containers that live on them.
//!
//! A grid models a pair of scanning instruments stepping through positions on
//! two axes; intensities are the normalized coincidence probabilities sampled
//! at those positions, and count grids hold the Poisson-distributed
//! coincidence counts recorded there.

use ndarray::Array2;
use thiserror::Error;

use crate::model::{spectrogram_covariance, BiphotonState, Covariance2, GatePulse, Side};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("axis step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("axis needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("half span must be positive, got {0}")]
    BadSpan(f64),
    #[error("expected a {expected} axis, got {got}")]
    AxisKindMismatch {
        expected: AxisKind,
        got: AxisKind,
    },
    #[error("value array shape {got:?} does not match grid shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("intensity values must be finite and non-negative")]
    InvalidIntensity,
    #[error("intensity grid has zero total mass")]
    ZeroMass,
}

/// Physical kind (and unit) of one grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    /// Angular frequency, rad/ps.
    Frequency,
    /// Time, ps.
    Time,
}

impl AxisKind {
    pub fn unit(self) -> &'static str {
        match self {
            AxisKind::Frequency => "rad/ps",
            AxisKind::Time => "ps",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AxisKind::Frequency => "frequency",
            AxisKind::Time => "time",
        }
    }
}

impl std::fmt::Display for AxisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One uniform scan axis: `n` strictly increasing sample positions centred on
/// `center` with spacing `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub kind: AxisKind,
    pub center: f64,
    pub step: f64,
    pub n: usize,
}

pub const MIN_AXIS_SAMPLES: usize = 8;

impl Axis {
    pub fn new(kind: AxisKind, center: f64, step: f64, n: usize) -> Result<Self, GridError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(GridError::BadStep(step));
        }
        if n < MIN_AXIS_SAMPLES {
            return Err(GridError::TooFewSamples {
                min: MIN_AXIS_SAMPLES,
                got: n,
            });
        }
        Ok(Self {
            kind,
            center,
            step,
            n,
        })
    }

    /// Sample position `j`; positions are symmetric about the center.
    pub fn value(&self, j: usize) -> f64 {
        self.center + (j as f64 - (self.n as f64 - 1.0) / 2.0) * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.value(j)).collect()
    }

    /// Distance from the center to the outermost sample.
    pub fn half_span(&self) -> f64 {
        (self.n as f64 - 1.0) / 2.0 * self.step
    }
}

/// A pair of scan axes; the signal axis indexes rows, the idler axis columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub signal: Axis,
    pub idler: Axis,
}

impl Grid2D {
    pub fn new(signal: Axis, idler: Axis) -> Self {
        Self { signal, idler }
    }

    /// Frequency-frequency grid centred on the state's central frequencies,
    /// each axis spanning +-`half_span_sigmas` marginal bandwidths.
    pub fn spectral(
        state: &BiphotonState,
        half_span_sigmas: f64,
        n: usize,
    ) -> Result<Self, GridError> {
        if !(half_span_sigmas.is_finite() && half_span_sigmas > 0.0) {
            return Err(GridError::BadSpan(half_span_sigmas));
        }
        let axis = |side: Side| {
            Axis::new(
                AxisKind::Frequency,
                state.center(side),
                2.0 * half_span_sigmas * state.sigma(side) / n as f64,
                n,
            )
        };
        Ok(Self::new(axis(Side::Signal)?, axis(Side::Idler)?))
    }

    /// Time-time grid centred on zero delay, each axis spanning
    /// +-`half_span_sigmas` chirp-aware marginal pulse widths.
    pub fn temporal(
        state: &BiphotonState,
        half_span_sigmas: f64,
        n: usize,
    ) -> Result<Self, GridError> {
        if !(half_span_sigmas.is_finite() && half_span_sigmas > 0.0) {
            return Err(GridError::BadSpan(half_span_sigmas));
        }
        let m = state.temporal_moments();
        let axis = |w: f64| Axis::new(AxisKind::Time, 0.0, 2.0 * half_span_sigmas * w / n as f64, n);
        Ok(Self::new(axis(m.marginal_s)?, axis(m.marginal_i)?))
    }

    /// Mixed grid for a gated time-frequency scan: the gated photon's axis is
    /// time (spanning the gate-convolved pulse width), the partner's axis is
    /// frequency.
    pub fn time_frequency(
        state: &BiphotonState,
        gate: &GatePulse,
        gated: Side,
        half_span_sigmas: f64,
        n: usize,
    ) -> Result<Self, GridError> {
        if !(half_span_sigmas.is_finite() && half_span_sigmas > 0.0) {
            return Err(GridError::BadSpan(half_span_sigmas));
        }
        let cov = spectrogram_covariance(state, gate, gated);
        let span = |v: f64| 2.0 * half_span_sigmas * v.sqrt() / n as f64;
        let time_axis = |var: f64| Axis::new(AxisKind::Time, 0.0, span(var), n);
        let freq_axis = |side: Side, var: f64| {
            Axis::new(AxisKind::Frequency, state.center(side), span(var), n)
        };
        match gated {
            Side::Signal => Ok(Self::new(
                time_axis(cov.var_s)?,
                freq_axis(Side::Idler, cov.var_i)?,
            )),
            Side::Idler => Ok(Self::new(
                freq_axis(Side::Signal, cov.var_s)?,
                time_axis(cov.var_i)?,
            )),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.signal.n, self.idler.n)
    }

    pub fn axis(&self, side: Side) -> &Axis {
        match side {
            Side::Signal => &self.signal,
            Side::Idler => &self.idler,
        }
    }

    pub fn kinds(&self) -> (AxisKind, AxisKind) {
        (self.signal.kind, self.idler.kind)
    }

    pub(crate) fn expect_kinds(
        &self,
        signal: AxisKind,
        idler: AxisKind,
    ) -> Result<(), GridError> {
        if self.signal.kind != signal {
            return Err(GridError::AxisKindMismatch {
                expected: signal,
                got: self.signal.kind,
            });
        }
        if self.idler.kind != idler {
            return Err(GridError::AxisKindMismatch {
                expected: idler,
                got: self.idler.kind,
            });
        }
        Ok(())
    }
}

/// Weighted first and second moments of a gridded distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMoments {
    pub mean_s: f64,
    pub mean_i: f64,
    pub cov: Covariance2,
}

fn weighted_moments(grid: &Grid2D, value: impl Fn(usize, usize) -> f64) -> GridMoments {
    let (ns, ni) = grid.shape();
    let xs = grid.signal.values();
    let ys = grid.idler.values();
    let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for j in 0..ns {
        for k in 0..ni {
            let v = value(j, k);
            w += v;
            sx += v * xs[j];
            sy += v * ys[k];
        }
    }
    let (mx, my) = (sx / w, sy / w);
    let (mut vxx, mut vyy, mut vxy) = (0.0, 0.0, 0.0);
    for j in 0..ns {
        let dx = xs[j] - mx;
        for k in 0..ni {
            let v = value(j, k);
            let dy = ys[k] - my;
            vxx += v * dx * dx;
            vyy += v * dy * dy;
            vxy += v * dx * dy;
        }
    }
    GridMoments {
        mean_s: mx,
        mean_i: my,
        cov: Covariance2 {
            var_s: vxx / w,
            var_i: vyy / w,
            cov: vxy / w,
        },
    }
}

/// Normalized joint intensity sampled on a grid. Values are non-negative and
/// sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Intensity2D {
    grid: Grid2D,
    values: Array2<f64>,
}

impl Intensity2D {
    /// Normalize raw sampled values onto the grid. Rejects negative or
    /// non-finite entries and all-zero grids.
    pub fn new(grid: Grid2D, mut values: Array2<f64>) -> Result<Self, GridError> {
        if values.dim() != grid.shape() {
            return Err(GridError::ShapeMismatch {
                expected: grid.shape(),
                got: values.dim(),
            });
        }
        let mut sum = 0.0;
        for &v in values.iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(GridError::InvalidIntensity);
            }
            sum += v;
        }
        if sum <= 0.0 {
            return Err(GridError::ZeroMass);
        }
        values.mapv_inplace(|v| v / sum);
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn moments(&self) -> GridMoments {
        weighted_moments(&self.grid, |j, k| self.values[(j, k)])
    }

    /// Largest absolute pointwise difference to another intensity on the
    /// same-shaped grid.
    pub fn sup_distance(&self, other: &Intensity2D) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Integer coincidence counts recorded on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CountGrid {
    pub grid: Grid2D,
    pub counts: Array2<u64>,
    /// Expected total number of coincidences the draw was scaled to.
    pub total_expected: f64,
    /// Seed the counts were drawn with.
    pub seed: u64,
}

impl CountGrid {
    pub fn new(
        grid: Grid2D,
        counts: Array2<u64>,
        total_expected: f64,
        seed: u64,
    ) -> Result<Self, GridError> {
        if counts.dim() != grid.shape() {
            return Err(GridError::ShapeMismatch {
                expected: grid.shape(),
                got: counts.dim(),
            });
        }
        Ok(Self {
            grid,
            counts,
            total_expected,
            seed,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn moments(&self) -> GridMoments {
        weighted_moments(&self.grid, |j, k| self.counts[(j, k)] as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table1_state() -> BiphotonState {
        BiphotonState::new(10.56, 9.69, -0.9951, 2586.9, 2276.9, 0.0, 0.0).unwrap()
    }

    #[test]
    fn axis_validation() {
        assert!(Axis::new(AxisKind::Time, 0.0, 0.0, 16).is_err());
        assert!(Axis::new(AxisKind::Time, 0.0, -0.1, 16).is_err());
        assert!(matches!(
            Axis::new(AxisKind::Time, 0.0, 0.1, 1),
            Err(GridError::TooFewSamples { got: 1, .. })
        ));
        let ax = Axis::new(AxisKind::Time, 1.0, 0.5, 9).unwrap();
        assert_eq!(ax.value(4), 1.0);
        assert_eq!(ax.half_span(), 2.0);
        let vals = ax.values();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn spectral_grid_step_matches_span() {
        let g = Grid2D::spectral(&table1_state(), 4.0, 128).unwrap();
        assert_relative_eq!(g.signal.step, 0.66, max_relative = 1e-12);
        assert_eq!(g.signal.center, 2586.9);
        assert_eq!(g.idler.center, 2276.9);
        assert_eq!(g.kinds(), (AxisKind::Frequency, AxisKind::Frequency));
    }

    #[test]
    fn temporal_grid_spans_pulse_widths() {
        let g = Grid2D::temporal(&table1_state(), 4.0, 128).unwrap();
        assert_eq!(g.signal.center, 0.0);
        // +-4 x 0.4789 ps
        assert_relative_eq!(
            g.signal.step * 128.0 / 2.0,
            1.9155156436777,
            max_relative = 1e-12
        );
        assert!(Grid2D::temporal(&table1_state(), -1.0, 128).is_err());
    }

    #[test]
    fn time_frequency_grid_axis_kinds() {
        let st = table1_state();
        let gate = GatePulse::new(0.120, 0.0).unwrap();
        let g = Grid2D::time_frequency(&st, &gate, Side::Signal, 4.0, 64).unwrap();
        assert_eq!(g.kinds(), (AxisKind::Time, AxisKind::Frequency));
        assert_eq!(g.idler.center, 2276.9);
        let g = Grid2D::time_frequency(&st, &gate, Side::Idler, 4.0, 64).unwrap();
        assert_eq!(g.kinds(), (AxisKind::Frequency, AxisKind::Time));
    }

    #[test]
    fn intensity_normalizes_and_validates() {
        let grid = Grid2D::spectral(&table1_state(), 4.0, 8).unwrap();
        let vals = Array2::from_elem((8, 8), 2.0);
        let int = Intensity2D::new(grid, vals).unwrap();
        assert_relative_eq!(int.total(), 1.0, max_relative = 1e-14);

        let bad = Array2::from_elem((8, 8), -1.0);
        assert!(matches!(
            Intensity2D::new(grid, bad),
            Err(GridError::InvalidIntensity)
        ));
        let zeros = Array2::zeros((8, 8));
        assert!(matches!(
            Intensity2D::new(grid, zeros),
            Err(GridError::ZeroMass)
        ));
        let wrong = Array2::zeros((8, 9));
        assert!(matches!(
            Intensity2D::new(grid, wrong),
            Err(GridError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn count_grid_totals() {
        let grid = Grid2D::spectral(&table1_state(), 4.0, 8).unwrap();
        let mut counts = Array2::zeros((8, 8));
        counts[(3, 4)] = 7u64;
        counts[(0, 0)] = 2u64;
        let cg = CountGrid::new(grid, counts, 9.0, 1).unwrap();
        assert_eq!(cg.total(), 9);
    }
}
