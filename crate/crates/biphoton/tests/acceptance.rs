//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured numbers (visible under --nocapture).
//!
//! The criteria combine exact analytic identities, equivalence between the
//! closed-form and Fourier-oracle paths, reproduction of published reference
//! values, and statistical round trips through the full simulate-analyze
//! pipeline at pinned seeds and tolerances.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use biphoton::estimate::{deconvolve_summary, deconvolve_width, monte_carlo_errors};
use biphoton::grid::Grid2D;
use biphoton::model::{BiphotonState, MomentSummary, Side};
use biphoton::runner::{run, simulate_distribution, Distribution, Mode};
use biphoton::scenario::Scenario;
use biphoton::simulate::{
    joint_temporal_intensity, joint_temporal_intensity_dft, InstrumentResponse,
};
use biphoton::witness::{
    classical_dispersion_bound, dispersion_cancellation_witness, Measurement, Verdict,
};

fn table1_state() -> BiphotonState {
    BiphotonState::new(10.56, 9.69, -0.9951, 2586.9, 2276.9, 0.0, 0.0).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, chirped: bool) -> BiphotonState {
    let sigma_s = rng.gen_range(0.5..15.0);
    let sigma_i = rng.gen_range(0.5..15.0);
    let rho = rng.gen_range(-0.996..0.996);
    let (a_s, a_i) = if chirped {
        (rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05))
    } else {
        (0.0, 0.0)
    };
    BiphotonState::new(sigma_s, sigma_i, rho, 2500.0, 2300.0, a_s, a_i).unwrap()
}

#[test]
fn criterion_1_tbp_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let state = random_state(&mut rng, false);
        for side in [Side::Signal, Side::Idler] {
            let tbp = state.time_bandwidth_products(side);
            worst = worst
                .max((tbp.marginal_bw_heralded_t - 0.5).abs())
                .max((tbp.heralded_bw_marginal_t - 0.5).abs());
        }
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 1: TBP identities, worst |product - 1/2| = {worst:.3e} \
         (tol 1e-12), {elapsed:.2?} (< 1 s): {}",
        if worst < 1e-12 { "PASS" } else { "FAIL" }
    );
    assert!(worst < 1e-12);
    assert!(elapsed.as_secs_f64() < 1.0);
}

#[test]
fn criterion_2_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB2);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let state = random_state(&mut rng, case % 2 == 1);
        let grid = Grid2D::temporal(&state, 4.0, 128).unwrap();
        let closed = joint_temporal_intensity(&state, &grid).unwrap();
        let oracle = joint_temporal_intensity_dft(&state, &grid).unwrap();
        worst = worst.max(closed.sup_distance(&oracle));
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 2: oracle equivalence over 50 states, worst sup-norm = \
         {worst:.3e} (tol 1e-6), {elapsed:.2?} (< 30 s): {}",
        if worst < 1e-6 { "PASS" } else { "FAIL" }
    );
    assert!(worst < 1e-6);
    assert!(elapsed.as_secs_f64() < 30.0);
}

#[test]
fn criterion_3_chirped_difference_width() {
    let state = table1_state().with_chirps(0.0373, -0.0359);
    let closed = state.temporal_moments().width_diff.unwrap();

    let grid = Grid2D::temporal(&state, 4.0, 128).unwrap();
    let oracle = joint_temporal_intensity_dft(&state, &grid).unwrap();
    let m = oracle.moments();
    let oracle_diff = m.cov.diff_width();

    let target = 0.135;
    let ok = (closed / target - 1.0).abs() < 0.01
        && (oracle_diff / target - 1.0).abs() < 0.01
        && (closed / oracle_diff - 1.0).abs() < 0.01;
    println!(
        "criterion 3: D(ts-ti) with opposite chirps = {closed:.6} ps closed form, \
         {oracle_diff:.6} ps oracle (target 0.135 ps, 1%): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!((closed / target - 1.0).abs() < 0.01);
    assert!((oracle_diff / target - 1.0).abs() < 0.01);
    assert!((closed / oracle_diff - 1.0).abs() < 0.01);
}

#[test]
fn criterion_4_reference_values() {
    let width_sum = table1_state().spectral_moments().width_sum.unwrap();
    let bound_a = classical_dispersion_bound(0.162, 0.0366).unwrap();
    let bound_b = classical_dispersion_bound(0.235, 0.0366).unwrap();

    let ok = (width_sum - 1.327).abs() < 5e-4
        && (width_sum / 1.329 - 1.0).abs() < 0.005
        && (bound_a / 0.480 - 1.0).abs() < 0.005
        && (bound_b / 0.390 - 1.0).abs() < 0.005;
    println!(
        "criterion 4: width_sum = {width_sum:.6} (1.327 exact, 1.329 published, \
         0.5%), bounds {bound_a:.6} / {bound_b:.6} ps (0.480 / 0.390, 0.5%): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!((width_sum - 1.327).abs() < 5e-4);
    assert!((width_sum / 1.329 - 1.0).abs() < 0.005);
    assert!((bound_a / 0.480 - 1.0).abs() < 0.005);
    assert!((bound_b / 0.390 - 1.0).abs() < 0.005);
}

#[test]
fn criterion_5_deconvolution_reproduction() {
    let marginal = deconvolve_width(0.550, 0.120).unwrap();

    // The exact quadrature result for (0.203, sqrt(2) x 0.120) is
    // 0.111396 ps; the published rounded value is 0.110(10) ps. The exact
    // value sits 1.27% from the rounded quote, so the check pins the exact
    // arithmetic, the derived 0.111 ps reference, and the published
    // uncertainty band.
    let diff = deconvolve_width(0.203, std::f64::consts::SQRT_2 * 0.120).unwrap();
    let diff_exact = (0.203f64 * 0.203 - 2.0 * 0.120 * 0.120).sqrt();

    let raw = MomentSummary {
        marginal_s: 0.550,
        marginal_i: 0.600,
        heralded_s: 0.176,
        heralded_i: 0.185,
        rho: 0.944,
        width_sum: None,
        width_diff: None,
    };
    let response = InstrumentResponse::new(0.120, 0.120).unwrap();
    let rho_dec = deconvolve_summary(&raw, &response).unwrap().summary.rho;

    let ok = (marginal / 0.537 - 1.0).abs() < 0.01
        && (diff - diff_exact).abs() < 1e-12
        && (diff / 0.111 - 1.0).abs() < 0.01
        && (diff - 0.110).abs() < 0.010
        && (rho_dec - 0.987).abs() < 0.002;
    println!(
        "criterion 5: deconvolution {marginal:.6} ps (0.537, 1%), {diff:.6} ps \
         (0.111 derived / 0.110(10) published), correlation {rho_dec:.6} \
         (0.987 +- 0.002): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!((marginal / 0.537 - 1.0).abs() < 0.01);
    assert!((diff - diff_exact).abs() < 1e-12);
    assert!((diff / 0.111 - 1.0).abs() < 0.01);
    assert!((diff - 0.110).abs() < 0.010);
    assert!((rho_dec - 0.987).abs() < 0.002);
}

#[test]
fn criterion_6_end_to_end_round_trip() {
    let start = Instant::now();
    let scenario = Scenario::preset("table1").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let output = run(&scenario, Mode::All, dir.path()).unwrap();
    let report = output.report.unwrap();

    let jsi = report
        .distributions
        .iter()
        .find(|d| d.label == "joint_spectrum")
        .unwrap();
    let jti = report
        .distributions
        .iter()
        .find(|d| d.label == "joint_temporal")
        .unwrap();

    let truth = table1_state();
    let sw = truth.spectral_moments();
    let tw = truth.temporal_moments();
    let mut all_ok = true;
    let mut check = |name: &str, value: f64, error: f64, target: f64| {
        let pull = (value - target) / error;
        let ok = pull.abs() <= 3.0;
        all_ok &= ok;
        println!(
            "  {name:<22} {value:>12.6} vs {target:>12.6}  ({pull:+.2} MC sigma) {}",
            if ok { "ok" } else { "OUT OF BAND" }
        );
    };
    check("sigma_s", jsi.signal_marginal.deconvolved, jsi.signal_marginal.deconvolved_error, sw.marginal_s);
    check("sigma_i", jsi.idler_marginal.deconvolved, jsi.idler_marginal.deconvolved_error, sw.marginal_i);
    check("rho_spectral", jsi.correlation.deconvolved, jsi.correlation.deconvolved_error, sw.rho);
    check("rho_temporal", jti.correlation.deconvolved, jti.correlation.deconvolved_error, tw.rho);
    check("heralded_bw_signal", jsi.signal_heralded.deconvolved, jsi.signal_heralded.deconvolved_error, sw.heralded_s);
    check("heralded_bw_idler", jsi.idler_heralded.deconvolved, jsi.idler_heralded.deconvolved_error, sw.heralded_i);
    check("heralded_t_signal", jti.signal_heralded.deconvolved, jti.signal_heralded.deconvolved_error, tw.heralded_s);
    check("heralded_t_idler", jti.idler_heralded.deconvolved, jti.idler_heralded.deconvolved_error, tw.heralded_i);

    let witness = report
        .witnesses
        .iter()
        .find(|w| w.name == "uncertainty_product")
        .unwrap();
    let witness_ok =
        witness.value < 1.0 && witness.verdict == Verdict::Violated && witness.sigma_distance >= 3.0;
    all_ok &= witness_ok;
    let elapsed = start.elapsed();
    println!(
        "criterion 6: table1 round trip, witness = {:.4} +- {:.4} ({:.0} sigma \
         below 1), {elapsed:.2?} (< 60 s): {}",
        witness.value,
        witness.error,
        witness.sigma_distance,
        if all_ok { "PASS" } else { "FAIL" }
    );
    assert!(all_ok);
    assert!(elapsed.as_secs_f64() < 60.0);
}

#[test]
fn criterion_7_dispersion_cancellation() {
    // deconvolved D(ts-ti) of the four dispersion scenarios
    let mut measured = Vec::new();
    for name in ["fig4a", "fig4b", "fig4c", "fig4d"] {
        let scenario = Scenario::preset(name).unwrap();
        let prepared = simulate_distribution(&scenario, Distribution::JointTemporal).unwrap();
        let analysis = biphoton::estimate::analyze_count_grid(
            &prepared.counts,
            &prepared.response,
            &scenario.herald_policy(),
            scenario.run.mc_trials,
            Distribution::JointTemporal.mc_seed(scenario.run.seed),
        )
        .unwrap();
        let w = analysis.deconvolved.summary.width_diff.unwrap();
        let e = analysis.dec_errors.width_diff.unwrap();
        println!("  {name}: D(ts-ti) = {w:.4} +- {e:.4} ps");
        measured.push((w, e));
    }
    let ordering_ok = measured[0].0.max(measured[3].0) < measured[1].0.min(measured[2].0);

    let witness = dispersion_cancellation_witness(
        Measurement::new(measured[3].0, measured[3].1),
        Measurement::new(measured[0].0, measured[0].1),
        0.0366,
        3.0,
    )
    .unwrap();
    let bound = classical_dispersion_bound(measured[0].0, 0.0366).unwrap();
    let quantum_ok = witness.verdict == Verdict::Violated && witness.sigma_distance >= 3.0;
    println!(
        "criterion 7: ordering (small, large, large, small) {}, fig4d \
         {:.4} ps vs classical bound {bound:.4} ps ({:.0} sigma): {}",
        if ordering_ok { "holds" } else { "BROKEN" },
        measured[3].0,
        witness.sigma_distance,
        if ordering_ok && quantum_ok { "PASS" } else { "FAIL" }
    );
    assert!(ordering_ok);
    assert!(quantum_ok);
}

#[test]
fn criterion_8_determinism() {
    let scenario = Scenario::preset("table1").unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let dir_c = tempfile::tempdir().unwrap();

    let out_a = run(&scenario, Mode::All, dir_a.path()).unwrap();
    let _ = run(&scenario, Mode::All, dir_b.path()).unwrap();
    // single-threaded execution must produce identical bytes
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run(&scenario, Mode::All, dir_c.path()))
        .unwrap();

    let mut compared = 0;
    for file in &out_a.files {
        let name = file.file_name().unwrap();
        let a = std::fs::read(file).unwrap();
        for dir in [dir_b.path(), dir_c.path()] {
            let other = std::fs::read(dir.join(name)).unwrap();
            assert_eq!(a, other, "{name:?} differs between runs");
        }
        compared += 1;
    }
    println!(
        "criterion 8: determinism, {compared} files byte-identical across \
         repeated and single-threaded runs: PASS"
    );
    assert!(compared >= 18);
}

#[test]
fn criterion_9_monte_carlo_scaling() {
    let mut scenario = Scenario::preset("table1").unwrap();
    let estimator = |c: &biphoton::grid::CountGrid| -> Result<Vec<f64>, biphoton::estimate::FitError> {
        Ok(vec![
            biphoton::estimate::fit_gauss1d(&biphoton::estimate::marginal_hist(c, Side::Signal))?
                .width,
            biphoton::estimate::fit_gauss1d(&biphoton::estimate::marginal_hist(c, Side::Idler))?
                .width,
        ])
    };
    scenario.run.total_counts = 1e4;
    let small = simulate_distribution(&scenario, Distribution::JointSpectrum).unwrap();
    scenario.run.total_counts = 1e6;
    let large = simulate_distribution(&scenario, Distribution::JointSpectrum).unwrap();

    let err_small = monte_carlo_errors(&small.counts, 400, 0xC9, estimator).unwrap();
    let err_large = monte_carlo_errors(&large.counts, 400, 0xC9, estimator).unwrap();
    let ratios: Vec<f64> = err_small
        .iter()
        .zip(&err_large)
        .map(|(s, l)| s / l)
        .collect();
    let ok = ratios.iter().all(|r| (8.0..=12.0).contains(r));
    println!(
        "criterion 9: width-error ratios at 100x counts = {:.2} / {:.2} \
         (band 10 +- 20%): {}",
        ratios[0],
        ratios[1],
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}
