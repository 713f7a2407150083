//! Closed-form Gaussian model of an energy-time entangled photon pair.
//!
//! The two-photon state is parametrized by the marginal bandwidths of the
//! signal and idler photons, their spectral correlation, the central angular
//! frequencies, and a quadratic spectral phase (chirp) on each photon. Every
//! second moment of the joint spectral intensity, the joint temporal
//! intensity, and the optically gated time-frequency distribution has a
//! closed form, implemented here directly.
//!
//! Conventions used throughout the crate:
//! - every "width" is the intensity standard deviation (the 1/sqrt(e)
//!   half-width of a Gaussian intensity profile); FWHM never appears,
//! - angular frequencies are in rad/ps, times in ps, chirps in ps^2,
//! - the joint temporal amplitude is the Fourier transform of the joint
//!   spectral amplitude with kernel exp(+i w t) on both photons, so the
//!   temporal correlation has the opposite sign of the spectral one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in nm/ps.
pub const SPEED_OF_LIGHT_NM_PER_PS: f64 = 299_792.458;

/// Grating-compressor dispersion per mm of displacement on the signal arm (ps^2/mm).
pub const SIGNAL_CHIRP_PS2_PER_MM: f64 = 1.315e-3;
/// Grating-compressor dispersion per mm of displacement on the idler arm (ps^2/mm).
pub const IDLER_CHIRP_PS2_PER_MM: f64 = 1.925e-3;

/// Correlations with 1 - rho^2 below this lose roughly half of the f64
/// mantissa in the heralded-width formulas. Operations do not regularize;
/// they simply get less accurate past this point.
pub const RHO_PRECISION_GUARD: f64 = 1e-10;

/// Which photon of the pair an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Signal,
    Idler,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Signal => Side::Idler,
            Side::Idler => Side::Signal,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Signal => "signal",
            Side::Idler => "idler",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("marginal bandwidth must be positive, got {0} rad/ps")]
    NonPositiveBandwidth(f64),
    #[error("spectral correlation must satisfy |rho| < 1, got {0}")]
    CorrelationOutOfRange(f64),
    #[error("gate width must be positive, got {0} ps")]
    NonPositiveGateWidth(f64),
    #[error("wavelength must be positive, got {0} nm")]
    NonPositiveWavelength(f64),
    #[error("state parameter is not finite: {0}")]
    NonFinite(&'static str),
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

/// Gaussian two-photon state.
///
/// The joint spectral amplitude is a correlated Gaussian with marginal
/// intensity bandwidths `sigma_s`, `sigma_i` and statistical correlation
/// `rho`, centred at `omega0_s`, `omega0_i`, with a separable quadratic
/// spectral phase `chirp_s (w_s - omega0_s)^2 + chirp_i (w_i - omega0_i)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiphotonState {
    sigma_s: f64,
    sigma_i: f64,
    rho: f64,
    omega0_s: f64,
    omega0_i: f64,
    chirp_s: f64,
    chirp_i: f64,
}

impl BiphotonState {
    /// Validate and build a state. Rejects non-positive bandwidths and
    /// |rho| >= 1 (the Gaussian amplitude is not normalizable there).
    pub fn new(
        sigma_s: f64,
        sigma_i: f64,
        rho: f64,
        omega0_s: f64,
        omega0_i: f64,
        chirp_s: f64,
        chirp_i: f64,
    ) -> Result<Self, ModelError> {
        for (v, name) in [
            (sigma_s, "sigma_s"),
            (sigma_i, "sigma_i"),
            (rho, "rho"),
            (omega0_s, "omega0_s"),
            (omega0_i, "omega0_i"),
            (chirp_s, "chirp_s"),
            (chirp_i, "chirp_i"),
        ] {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        if sigma_s <= 0.0 {
            return Err(ModelError::NonPositiveBandwidth(sigma_s));
        }
        if sigma_i <= 0.0 {
            return Err(ModelError::NonPositiveBandwidth(sigma_i));
        }
        if rho.abs() >= 1.0 {
            return Err(ModelError::CorrelationOutOfRange(rho));
        }
        Ok(Self {
            sigma_s,
            sigma_i,
            rho,
            omega0_s,
            omega0_i,
            chirp_s,
            chirp_i,
        })
    }

    pub fn sigma(&self, side: Side) -> f64 {
        match side {
            Side::Signal => self.sigma_s,
            Side::Idler => self.sigma_i,
        }
    }

    pub fn center(&self, side: Side) -> f64 {
        match side {
            Side::Signal => self.omega0_s,
            Side::Idler => self.omega0_i,
        }
    }

    pub fn chirp(&self, side: Side) -> f64 {
        match side {
            Side::Signal => self.chirp_s,
            Side::Idler => self.chirp_i,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn is_chirped(&self) -> bool {
        self.chirp_s != 0.0 || self.chirp_i != 0.0
    }

    /// Same state with the chirps replaced.
    pub fn with_chirps(&self, chirp_s: f64, chirp_i: f64) -> Self {
        Self {
            chirp_s,
            chirp_i,
            ..*self
        }
    }

    /// Purity of the partial trace, sqrt(1 - rho^2).
    pub fn purity(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }

    /// Joint spectral amplitude, including the chirp phase. The modulus
    /// squared integrates to one over the frequency plane.
    pub fn jsa(&self, omega_s: f64, omega_i: f64) -> Complex64 {
        let x = omega_s - self.omega0_s;
        let y = omega_i - self.omega0_i;
        let one_m = 1.0 - self.rho * self.rho;
        let norm = 1.0
            / ((2.0 * std::f64::consts::PI * self.sigma_s * self.sigma_i).sqrt()
                * one_m.powf(0.25));
        let quad = x * x / (2.0 * self.sigma_s * self.sigma_s)
            + y * y / (2.0 * self.sigma_i * self.sigma_i)
            - self.rho * x * y / (self.sigma_s * self.sigma_i);
        let phase = self.chirp_s * x * x + self.chirp_i * y * y;
        Complex64::from_polar(norm * (-quad / (2.0 * one_m)).exp(), phase)
    }

    /// Joint spectral intensity |F|^2. Chirp-independent.
    pub fn jsi(&self, omega_s: f64, omega_i: f64) -> f64 {
        self.jsa(omega_s, omega_i).norm_sqr()
    }

    // -- spectral second moments ------------------------------------------

    /// Covariance matrix of the joint spectral intensity, in (signal, idler)
    /// axis order.
    pub fn spectral_covariance(&self) -> Covariance2 {
        Covariance2 {
            var_s: self.sigma_s * self.sigma_s,
            var_i: self.sigma_i * self.sigma_i,
            cov: self.rho * self.sigma_s * self.sigma_i,
        }
    }

    /// Marginal and heralded bandwidths, correlation, and sum/difference
    /// frequency widths. Independent of the chirps.
    pub fn spectral_moments(&self) -> MomentSummary {
        let herald = self.purity();
        let cov = self.spectral_covariance();
        MomentSummary {
            marginal_s: self.sigma_s,
            marginal_i: self.sigma_i,
            heralded_s: herald * self.sigma_s,
            heralded_i: herald * self.sigma_i,
            rho: self.rho,
            width_sum: Some(cov.sum_width()),
            width_diff: Some(cov.diff_width()),
        }
    }

    // -- temporal second moments ------------------------------------------

    /// Variance of one photon's arrival time, including chirp broadening.
    fn temporal_marginal_var(&self, side: Side) -> f64 {
        let s = self.sigma(side);
        let a = self.chirp(side);
        let one_m = 1.0 - self.rho * self.rho;
        1.0 / (4.0 * one_m * s * s) + 4.0 * a * a * s * s
    }

    /// Heralded (conditional) arrival-time variance of one photon. With
    /// opposite-sign chirps the cross term can stay small; the last term
    /// vanishes as |rho| -> 1.
    fn temporal_heralded_var(&self, side: Side) -> f64 {
        let (s, a) = (self.sigma(side), self.chirp(side));
        let (so, ao) = (self.sigma(side.other()), self.chirp(side.other()));
        let one_m = 1.0 - self.rho * self.rho;
        let r2 = self.rho * self.rho;
        let cross = a * s * s + ao * so * so;
        1.0 / (4.0 * s * s)
            + 4.0 * a * a * one_m * s * s
            + 4.0 * r2 * cross * cross / (s * s * (1.0 + 16.0 * ao * ao * one_m * so.powi(4)))
    }

    /// Covariance matrix of the joint temporal intensity, in (signal, idler)
    /// axis order, including both chirps.
    pub fn temporal_covariance(&self) -> Covariance2 {
        let one_m = 1.0 - self.rho * self.rho;
        Covariance2 {
            var_s: self.temporal_marginal_var(Side::Signal),
            var_i: self.temporal_marginal_var(Side::Idler),
            cov: -self.rho / (4.0 * one_m * self.sigma_s * self.sigma_i)
                + 4.0 * self.rho * self.chirp_s * self.chirp_i * self.sigma_s * self.sigma_i,
        }
    }

    /// Marginal and heralded pulse widths, temporal correlation, and
    /// sum/difference arrival-time widths. Reduces to the transform-limited
    /// expressions when both chirps vanish; the temporal correlation has the
    /// opposite sign of the spectral one.
    pub fn temporal_moments(&self) -> MomentSummary {
        let cov = self.temporal_covariance();
        // Var(ts - ti) assembled term by term: the transform-limited part,
        // the part that cancels when As*ss = -Ai*si, and the part that
        // vanishes for perfect anti-correlation.
        let one_m = 1.0 - self.rho * self.rho;
        let (ss, si) = (self.sigma_s, self.sigma_i);
        let (a_s, a_i) = (self.chirp_s, self.chirp_i);
        let fl_diff = (ss * ss + 2.0 * self.rho * ss * si + si * si)
            / (4.0 * one_m * ss * ss * si * si);
        let shear = a_s * ss + a_i * si;
        let var_diff =
            fl_diff + 4.0 * shear * shear - 8.0 * a_s * a_i * (1.0 + self.rho) * ss * si;
        let fl_sum = (ss * ss - 2.0 * self.rho * ss * si + si * si)
            / (4.0 * one_m * ss * ss * si * si);
        let var_sum = fl_sum
            + 4.0 * a_s * a_s * ss * ss
            + 4.0 * a_i * a_i * si * si
            + 8.0 * self.rho * a_s * a_i * ss * si;
        MomentSummary {
            marginal_s: cov.var_s.sqrt(),
            marginal_i: cov.var_i.sqrt(),
            heralded_s: self.temporal_heralded_var(Side::Signal).sqrt(),
            heralded_i: self.temporal_heralded_var(Side::Idler).sqrt(),
            rho: cov.correlation(),
            width_sum: Some(var_sum.sqrt()),
            width_diff: Some(var_diff.sqrt()),
        }
    }

    // -- derived products ---------------------------------------------------

    /// Joint uncertainty product D(ws + wi) * D(ts - ti). Equals
    /// sqrt((1 + rho)/(1 - rho)) for equal bandwidths and no chirp; any
    /// nonzero chirp strictly increases it.
    pub fn joint_uncertainty_product(&self) -> f64 {
        let sum_w = self.spectral_moments().width_sum.unwrap();
        let diff_t = self.temporal_moments().width_diff.unwrap();
        sum_w * diff_t
    }

    /// The four time-bandwidth products of one photon. At zero chirp the
    /// mixed products equal 1/2 exactly and the marginal/heralded pair
    /// depends only on the correlation; chirp can only increase them.
    pub fn time_bandwidth_products(&self, side: Side) -> TimeBandwidthProducts {
        let sw = self.spectral_moments();
        let st = self.temporal_moments();
        let (bw_m, bw_h, t_m, t_h) = match side {
            Side::Signal => (sw.marginal_s, sw.heralded_s, st.marginal_s, st.heralded_s),
            Side::Idler => (sw.marginal_i, sw.heralded_i, st.marginal_i, st.heralded_i),
        };
        TimeBandwidthProducts {
            marginal_bw_heralded_t: bw_m * t_h,
            heralded_bw_marginal_t: bw_h * t_m,
            marginal_marginal: bw_m * t_m,
            heralded_heralded: bw_h * t_h,
        }
    }
}

// ---------------------------------------------------------------------------
// Gate pulse
// ---------------------------------------------------------------------------

/// Optical gate pulse for temporal and time-frequency measurements.
///
/// `tau_g` is the intensity temporal width (1/sqrt(e)); the field bandwidth
/// is fixed by the Fourier-limited Gaussian relation sigma_g = 1/(2 tau_g).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatePulse {
    tau_g: f64,
    omega_g0: f64,
}

impl GatePulse {
    pub fn new(tau_g: f64, omega_g0: f64) -> Result<Self, ModelError> {
        if !(tau_g.is_finite() && tau_g > 0.0) {
            return Err(ModelError::NonPositiveGateWidth(tau_g));
        }
        Ok(Self { tau_g, omega_g0 })
    }

    /// Intensity temporal width in ps.
    pub fn tau_g(&self) -> f64 {
        self.tau_g
    }

    /// Marginal bandwidth sigma_g = 1/(2 tau_g) in rad/ps.
    pub fn bandwidth(&self) -> f64 {
        1.0 / (2.0 * self.tau_g)
    }

    /// Central angular frequency (bookkeeping only).
    pub fn center(&self) -> f64 {
        self.omega_g0
    }
}

// ---------------------------------------------------------------------------
// Spectrogram (gated time on one photon, frequency on the other)
// ---------------------------------------------------------------------------

/// Second moments of the gated time-frequency coincidence distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrogramMoments {
    /// Marginal bandwidth of the spectrally measured partner photon (rad/ps).
    pub partner_bandwidth: f64,
    /// Marginal pulse width on the gated axis (ps): gate width, coherence
    /// time, and chirp stretch in quadrature.
    pub pulse_width: f64,
    /// Statistical correlation between gate delay and partner frequency.
    /// Zero without chirp on the gated photon; positive for positive chirp
    /// with anti-correlated frequencies.
    pub rho: f64,
}

/// Moments of the coincidence spectrogram with the gate applied to
/// `gated`, assuming an infinitely broad upconversion phasematching.
pub fn spectrogram_moments(
    state: &BiphotonState,
    gate: &GatePulse,
    gated: Side,
) -> SpectrogramMoments {
    let cov = spectrogram_covariance(state, gate, gated);
    let (var_t, var_w) = match gated {
        Side::Signal => (cov.var_s, cov.var_i),
        Side::Idler => (cov.var_i, cov.var_s),
    };
    SpectrogramMoments {
        partner_bandwidth: var_w.sqrt(),
        pulse_width: var_t.sqrt(),
        rho: cov.correlation(),
    }
}

/// Covariance of the spectrogram in (signal-axis, idler-axis) order. The
/// gated photon's axis is time, the partner's axis is frequency. The cross
/// covariance is the chirp group delay mapped through the frequency
/// correlations, Cov = -2 A rho sigma_s sigma_i.
pub fn spectrogram_covariance(
    state: &BiphotonState,
    gate: &GatePulse,
    gated: Side,
) -> Covariance2 {
    let s = state.sigma(gated);
    let partner = state.sigma(gated.other());
    let a = state.chirp(gated);
    let one_m = 1.0 - state.rho() * state.rho();
    let var_t =
        gate.tau_g() * gate.tau_g() + 1.0 / (4.0 * one_m * s * s) + 4.0 * a * a * s * s;
    let cov = -2.0 * a * state.rho() * state.sigma(Side::Signal) * state.sigma(Side::Idler);
    match gated {
        Side::Signal => Covariance2 {
            var_s: var_t,
            var_i: partner * partner,
            cov,
        },
        Side::Idler => Covariance2 {
            var_s: partner * partner,
            var_i: var_t,
            cov,
        },
    }
}

// ---------------------------------------------------------------------------
// Second-moment containers
// ---------------------------------------------------------------------------

/// Symmetric 2x2 covariance in (signal-axis, idler-axis) order. Units are the
/// squared axis units; mixed-axis grids carry a mixed-unit covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance2 {
    pub var_s: f64,
    pub var_i: f64,
    pub cov: f64,
}

impl Covariance2 {
    pub fn correlation(&self) -> f64 {
        self.cov / (self.var_s * self.var_i).sqrt()
    }

    pub fn width_s(&self) -> f64 {
        self.var_s.sqrt()
    }

    pub fn width_i(&self) -> f64 {
        self.var_i.sqrt()
    }

    /// Width of the sum coordinate.
    pub fn sum_width(&self) -> f64 {
        (self.var_s + self.var_i + 2.0 * self.cov).sqrt()
    }

    /// Width of the difference coordinate.
    pub fn diff_width(&self) -> f64 {
        (self.var_s + self.var_i - 2.0 * self.cov).sqrt()
    }

    /// Covariance after an independent additive Gaussian response on each
    /// axis: the marginals broaden in quadrature, the covariance is
    /// unchanged.
    pub fn blurred(&self, res_s: f64, res_i: f64) -> Covariance2 {
        Covariance2 {
            var_s: self.var_s + res_s * res_s,
            var_i: self.var_i + res_i * res_i,
            cov: self.cov,
        }
    }
}

/// Marginal widths, heralded widths, correlation, and (when the two axes
/// share a unit) sum/difference widths of one joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub marginal_s: f64,
    pub marginal_i: f64,
    pub heralded_s: f64,
    pub heralded_i: f64,
    pub rho: f64,
    pub width_sum: Option<f64>,
    pub width_diff: Option<f64>,
}

/// The four time-bandwidth products of one photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBandwidthProducts {
    /// Marginal bandwidth times heralded pulse width; 1/2 at zero chirp.
    pub marginal_bw_heralded_t: f64,
    /// Heralded bandwidth times marginal pulse width; 1/2 at zero chirp.
    pub heralded_bw_marginal_t: f64,
    /// Both marginals; 1/(2 sqrt(1-rho^2)) at zero chirp.
    pub marginal_marginal: f64,
    /// Both heralded; sqrt(1-rho^2)/2 at zero chirp, below the classical 1/2
    /// for any correlated state.
    pub heralded_heralded: f64,
}

// ---------------------------------------------------------------------------
// Unit helpers
// ---------------------------------------------------------------------------

/// Angular frequency (rad/ps) of a vacuum wavelength in nm.
pub fn wavelength_to_angfreq(lambda_nm: f64) -> Result<f64, ModelError> {
    if !(lambda_nm.is_finite() && lambda_nm > 0.0) {
        return Err(ModelError::NonPositiveWavelength(lambda_nm));
    }
    Ok(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_NM_PER_PS / lambda_nm)
}

/// Vacuum wavelength in nm of an angular frequency in rad/ps.
pub fn angfreq_to_wavelength(omega: f64) -> Result<f64, ModelError> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(ModelError::NonPositiveWavelength(omega));
    }
    Ok(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_NM_PER_PS / omega)
}

/// Angular-frequency resolution (rad/ps) of a wavelength resolution
/// `dlambda_nm` at wavelength `lambda_nm`.
pub fn angfreq_resolution(lambda_nm: f64, dlambda_nm: f64) -> Result<f64, ModelError> {
    if !(lambda_nm.is_finite() && lambda_nm > 0.0) {
        return Err(ModelError::NonPositiveWavelength(lambda_nm));
    }
    Ok(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_NM_PER_PS * dlambda_nm
        / (lambda_nm * lambda_nm))
}

/// Chirp (ps^2) applied by a grating-compressor displacement in mm.
pub fn displacement_to_chirp(displacement_mm: f64, side: Side) -> f64 {
    match side {
        Side::Signal => displacement_mm * SIGNAL_CHIRP_PS2_PER_MM,
        Side::Idler => displacement_mm * IDLER_CHIRP_PS2_PER_MM,
    }
}

// ---------------------------------------------------------------------------
