//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with its measured quantities (run with `--nocapture` to
//! see them). Expected values come from independent brute-force oracles in
//! `common`, from closed-form limits, or from cross-solver agreement.

mod common;

use std::time::Instant;

use common::*;
use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use superabs::bath::{engineered_rates, OccupationModel, RateSet, SpectralDensityModel};
use superabs::dicke::{
    resolution_margin, transition_rate, DickeLadder, GeometrySpec, HalfInt, InteractionModel,
    TransitionKind,
};
use superabs::e2ls::{
    absorption_probability_within_lifetime, bi_exponential_population, excitons_per_cycle,
    trap_current, CostModel,
};
use superabs::lindblad::{
    build_collective_generator, dissipator, evolve, evolve_states, DensityOperator, TrapMode,
    TrapSpec,
};
use superabs::mcwf::{mcwf_ensemble, TrajectoryConfig};
use superabs::site::{
    build_site_hamiltonian, collective_dipole, default_degeneracy_tol, disorder_realization_series,
    eigenoperators, sample_disorder, symmetric_state, DisorderConfig, SecularPolicy,
    SiteHamiltonianSpec, Topology,
};

fn ladder_with_env(
    n: usize,
    n_good: f64,
    kappa_bad: f64,
) -> (DickeLadder<f64>, SpectralDensityModel<f64>, OccupationModel<f64>) {
    let ladder = DickeLadder::new(n, 100.0, 1.0, InteractionModel::NearestNeighbour).unwrap();
    let mid = ladder.mid_level().unwrap();
    let sd = SpectralDensityModel::TopHatNotch {
        center: ladder.frequency_from(mid - 1),
        width: 1e-6,
        floor: kappa_bad,
    };
    let occ = OccupationModel::FilteredSingleMode {
        center: ladder.frequency_from(mid),
        halfwidth: 1e-7,
        occupation: n_good,
    };
    (ladder, sd, occ)
}

#[test]
fn criterion_01_rate_formula_oracle() {
    let t0 = Instant::now();
    let gamma = 1.0;
    for n in 2usize..=5 {
        let jm = collective_lower(n);
        let jp = jm.adjoint();
        let h_ring = hopping_hamiltonian(n, &ring_pairs(n, 1.0));
        let h_all = hopping_hamiltonian(n, &all_pairs(n, 1.0));
        for k in 0..=n {
            let m = HalfInt::from_twice(2 * k as i64 - n as i64);
            let state = dicke_state(n, k);
            assert!((norm(&state) - 1.0).abs() < 1e-12);

            if k > 0 {
                let elem = norm(&(&jm * &state));
                let oracle = elem * elem * gamma;
                let lib: f64 = transition_rate(n, m, TransitionKind::Emit, gamma).unwrap();
                assert!(
                    (lib - oracle).abs() <= 1e-12 * oracle.max(1.0),
                    "N={n} k={k} emit: {lib} vs oracle {oracle}"
                );
            }
            if k < n {
                let elem = norm(&(&jp * &state));
                let oracle = elem * elem * gamma;
                let lib: f64 = transition_rate(n, m, TransitionKind::Absorb, gamma).unwrap();
                assert!(
                    (lib - oracle).abs() <= 1e-12 * oracle.max(1.0),
                    "N={n} k={k} absorb: {lib} vs oracle {oracle}"
                );
            }

            let oracle_ring = expectation(&h_ring, &state);
            let lib_ring: f64 = superabs::dicke::energy_shift(
                n,
                m,
                1.0,
                InteractionModel::NearestNeighbour,
            )
            .unwrap();
            assert!(
                (lib_ring - oracle_ring).abs() <= 1e-12 * oracle_ring.abs().max(1.0),
                "N={n} k={k} ring shift: {lib_ring} vs {oracle_ring}"
            );
            let oracle_all = expectation(&h_all, &state);
            let lib_all: f64 =
                superabs::dicke::energy_shift(n, m, 1.0, InteractionModel::AllPair).unwrap();
            assert!(
                (lib_all - oracle_all).abs() <= 1e-12 * oracle_all.abs().max(1.0),
                "N={n} k={k} all-pair shift: {lib_all} vs {oracle_all}"
            );
        }
    }
    println!(
        "PASS criterion 1: rates and shifts match the site-basis oracle to 1e-12 ({:.2?})",
        t0.elapsed()
    );
}

#[test]
fn criterion_02_n4_spectrum() {
    let t0 = Instant::now();
    let (wa, om) = (10.0f64, 1.0f64);
    let spec = SiteHamiltonianSpec {
        n_atoms: 4,
        site_frequencies: vec![wa; 4],
        hop_strength: om,
        topology: Topology::RingNn,
        trap: None,
    };
    let h = build_site_hamiltonian(&spec).unwrap();
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let sqrt2 = 2.0f64.sqrt();
    let closed = [
        0.0,
        wa - 2.0 * om,
        2.0 * wa - 2.0 * sqrt2 * om,
        3.0 * wa - 2.0 * om,
        4.0 * wa,
    ];
    for &e in &closed {
        let best = ev.iter().map(|&x| (x - e).abs()).fold(f64::MAX, f64::min);
        assert!(best < 1e-10, "eigenvalue {e} missing (closest off by {best})");
    }

    // consecutive differences of the five-level chain; the four transition
    // frequencies must telescope to 4 omega_A, which pins the middle entry to
    // omega_A + 2 Omega (1 - sqrt(2))
    let diffs: Vec<f64> = closed.windows(2).map(|w| (w[1] - w[0])).collect();
    let mut expected = [
        wa - 2.0 * om,
        wa + 2.0 * om * (1.0 - sqrt2),
        wa + 2.0 * om * (sqrt2 - 1.0),
        wa + 2.0 * om,
    ];
    let mut got = diffs.clone();
    expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (g, e) in got.iter().zip(expected.iter()) {
        assert!((g - e).abs() < 1e-10, "transition frequency {g} vs {e}");
    }
    assert!((diffs.iter().sum::<f64>() - 4.0 * wa).abs() < 1e-10);
    println!(
        "PASS criterion 2: N=4 ring spectrum contains the closed-form eigenvalues and \
         transition frequencies ({:.2?})",
        t0.elapsed()
    );
}

/// Fixed-step RK4 on the two-level rate model, independent of the closed form.
fn rate_ode_oracle(t_end: f64, a: f64, e: f64, l: f64, tr: f64) -> f64 {
    let steps = 50_000usize.max((t_end.abs() * 20_000.0) as usize);
    let mut x = 1.0f64; // lower
    let mut y = 0.0f64; // upper
    let h = t_end / steps as f64;
    let f = |x: f64, y: f64| (-(a + l) * x + (e + tr) * y, a * x - (e + tr) * y);
    for _ in 0..steps {
        let (k1x, k1y) = f(x, y);
        let (k2x, k2y) = f(x + 0.5 * h * k1x, y + 0.5 * h * k1y);
        let (k3x, k3y) = f(x + 0.5 * h * k2x, y + 0.5 * h * k2y);
        let (k4x, k4y) = f(x + h * k3x, y + h * k3y);
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    }
    y
}

#[test]
fn criterion_03_e2ls_closed_form() {
    let t0 = Instant::now();
    // 20-point coefficient grid. All-nonnegative rates are always
    // overdamped (the discriminant is a sum of squares there), so the
    // degenerate and oscillatory branches are exercised on raw coefficient
    // sets where the same linear ODE remains well-defined.
    let grid: Vec<(f64, f64, f64, f64)> = vec![
        // overdamped, physical
        (1.0, 2.0, 0.0, 4.0),
        (3.0, 1.0, 0.5, 2.0),
        (0.5, 0.5, 0.5, 0.5),
        (10.0, 1.0, 0.1, 30.0),
        (0.01, 5.0, 2.0, 0.0),
        (2.0, 0.0, 1.0, 0.0),
        (7.0, 3.0, 0.2, 70.0),
        (0.3, 0.0, 0.0, 0.0),
        (1.0, 1.0, 3.0, 1.0),
        (5.0, 2.5, 1.25, 0.625),
        (0.0, 1.0, 2.0, 3.0),
        (4.0, 4.0, 4.0, 4.0),
        (1.5, 0.1, 0.01, 15.0),
        (2.2, 3.3, 1.1, 0.0),
        (0.9, 0.0, 2.0, 0.1),
        (6.0, 0.6, 0.06, 0.006),
        // degenerate D = 0 exactly
        (-1.0, 0.6, 4.0, 0.4),
        (0.0, 1.5, 2.0, 0.5),
        // oscillatory D^2 < 0
        (1.0, 2.0, -4.0, 1.5),
        (0.5, 1.0, -2.0, 0.3),
    ];
    assert_eq!(grid.len(), 20);
    let mut n_deg = 0;
    let mut n_osc = 0;
    for &(a, e, l, tr) in &grid {
        let total = a + e + l + tr;
        let disc = total * total - 4.0 * l * (e + tr);
        if disc.abs() < 1e-12 {
            n_deg += 1;
        }
        if disc < -1e-12 {
            n_osc += 1;
        }
        for &t in &[0.1, 0.8, 2.0] {
            let closed = bi_exponential_population(t, a, e, l, tr);
            let oracle = rate_ode_oracle(t, a, e, l, tr);
            assert!(
                (closed - oracle).abs() < 1e-8,
                "({a},{e},{l},{tr}) t={t}: closed {closed} vs oracle {oracle}"
            );
        }
    }
    assert!(n_deg >= 2 && n_osc >= 2);
    println!(
        "PASS criterion 3: closed form matches rate-equation integration to 1e-8 on 20 \
         coefficient sets ({n_deg} degenerate, {n_osc} oscillatory) ({:.2?})",
        t0.elapsed()
    );
}

#[test]
fn criterion_04_cross_solver_agreement() {
    let t0 = Instant::now();
    // N=8, n(omega_good)=10, Gamma_trap = 10 Gamma_emit, gamma=1, ideal
    // stop band
    let n = 8usize;
    let gamma = 1.0;
    let (ladder, sd, occ) = ladder_with_env(n, 10.0, 0.0);
    let rates = engineered_rates(&ladder, &sd, &occ, gamma, 0.0).unwrap();
    let trap_rate = 10.0 * rates.emit;
    let trap = TrapSpec {
        coupling: 0.0,
        trap_frequency: 0.0,
        extraction_rate: trap_rate,
        mode: TrapMode::Phenomenological,
    };
    let gen = build_collective_generator(&ladder, &sd, &occ, gamma, Some(&trap)).unwrap();
    let mid = ladder.mid_level().unwrap();
    let rho0 = DensityOperator::pure(gen.dim(), mid - 1).unwrap();

    let full_rates = RateSet::new(rates.absorb, rates.emit, 0.0, trap_rate).unwrap();
    let t_end = 5.0 / full_rates.total;
    let t_grid: Vec<f64> = (0..=25).map(|i| i as f64 * t_end / 25.0).collect();

    let me_series = evolve(&gen, &rho0, &t_grid, 1e-10).unwrap();
    let me_peak_idx = me_series
        .trap_current
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    let me_peak = me_series.trap_current[me_peak_idx];
    let analytic_peak = trap_current(t_grid[me_peak_idx], &full_rates).unwrap();
    let peak_dev = (me_peak - analytic_peak).abs() / analytic_peak;
    assert!(peak_dev < 0.01, "master equation vs closed form at peak: {peak_dev:.4}");

    // MCWF, 1e4 trajectories, within 3 stderr everywhere
    let mut psi0 = nalgebra::DVector::<Complex<f64>>::zeros(gen.dim());
    psi0[mid - 1] = Complex::new(1.0, 0.0);
    let cfg = TrajectoryConfig {
        n_trajectories: 10_000,
        base_seed: 0x5ABs as u64,
        t_grid: t_grid.clone(),
        jump_tolerance: 1e-10,
        tol: 1e-8,
    };
    let ens = mcwf_ensemble(&gen, &psi0, &cfg).unwrap();
    let mut worst_sigma = 0.0f64;
    for k in 0..t_grid.len() {
        let diff = (ens.mean.trap_current[k] - me_series.trap_current[k]).abs();
        let se = ens.stderr.trap_current[k];
        assert!(
            diff <= 3.0 * se + 1e-9,
            "grid point {k}: |MCWF - ME| = {diff}, stderr = {se}"
        );
        if se > 0.0 {
            worst_sigma = worst_sigma.max(diff / se);
        }
    }
    println!(
        "PASS criterion 4: ME vs closed form {peak_dev:.2e} at peak; MCWF(1e4) within \
         {worst_sigma:.2} stderr of ME everywhere ({:.2?})",
        t0.elapsed()
    );
}

#[test]
fn criterion_05_superabsorption_transient() {
    let t0 = Instant::now();
    let n = 20usize;
    let gamma = 1.0;
    let n_good = 10.0;
    let (ladder, sd, occ) = ladder_with_env(n, n_good, 0.01);
    let rates = engineered_rates(&ladder, &sd, &occ, gamma, 0.0).unwrap();
    let trap_rate = 1000.0 * rates.emit;
    let full = RateSet::new(rates.absorb, rates.emit, rates.loss, trap_rate).unwrap();

    let gamma_ind = n_good * n as f64 * gamma; // kappa_good = 1
    // dense early grid for the plateau, long grid for the crossing
    let mut plateau = 0.0f64;
    for i in 0..=2000 {
        let t = i as f64 * (50.0 / full.trap) / 2000.0;
        plateau = plateau.max(trap_current(t, &full).unwrap());
    }
    let ratio = plateau / gamma_ind;
    let expect = (n as f64 + 2.0) / 4.0;
    assert!(
        (ratio - expect).abs() <= 0.01 * expect,
        "plateau ratio {ratio} vs (N+2)/4 = {expect}"
    );

    let mut crossed_below = None;
    for i in 1..=4000 {
        let t = i as f64 * (5.0 / full.loss) / 4000.0;
        if trap_current(t, &full).unwrap() < gamma_ind {
            crossed_below = Some(t);
            break;
        }
    }
    let t_cross = crossed_below.expect("trap current never fell below the independent rate");
    println!(
        "PASS criterion 5: plateau/independent = {ratio:.4} (target {expect} +- 1%), curve \
         drops below the independent rate at t = {t_cross:.3} ({:.2?})",
        t0.elapsed()
    );
}

#[test]
fn criterion_06_quadratic_scaling() {
    let t0 = Instant::now();
    // advantage ratio linear in N (small-occupation sensing regime)
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in (4usize..=40).step_by(2) {
        let (ladder, sd, occ) = ladder_with_env(n, 1e-8, 0.01);
        let rates = engineered_rates(&ladder, &sd, &occ, 1.0, 0.0).unwrap();
        let adv = absorption_probability_within_lifetime(n, &rates).unwrap();
        xs.push(n as f64);
        ys.push(adv.advantage);
    }
    let (slope_adv, _, r2) = linear_fit(&xs, &ys);
    assert!(r2 > 0.99, "advantage fit R^2 = {r2}");
    assert!(slope_adv > 0.0);

    // log-log slope of the exact M=0 absorption rate over N = 10..100
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for n in (10usize..=100).step_by(2) {
        let m_lower = HalfInt::from_int(-1);
        let rate: f64 = transition_rate(n, m_lower, TransitionKind::Absorb, 1.0).unwrap();
        lx.push((n as f64).ln());
        ly.push(rate.ln());
    }
    let (slope_rate, _, _) = linear_fit(&lx, &ly);
    println!(
        "criterion 6 measurements: advantage R^2 = {r2:.6}, rate log-log slope = \
         {slope_rate:.4} ({:.2?})",
        t0.elapsed()
    );

    // The exact rate is gamma (N/2)(N/2 + 1); its fitted log-log slope over
    // this window is 2 - d with d ~ 0.058 from the subleading N/2 term, so
    // this gate can only close for the pure (N/2)^2 law. It is asserted as
    // specified and its failure is a recorded known deviation, not a solver
    // defect: the rate column itself is exact (criterion 1 pins it).
    assert!(
        (slope_rate - 2.0).abs() <= 0.05,
        "exact-rate log-log slope {slope_rate:.4} is outside 2.0 +- 0.05; the fitted slope \
         of gamma (N/2)(N/2+1) over N = 10..100 is 1.942 analytically"
    );
    println!("PASS criterion 6");
}

#[test]
fn criterion_07_reinitialisation_scaling() {
    let t0 = Instant::now();
    let gamma = 1.0;
    let n_good = 10.0;
    let mut lx = Vec::new();
    let mut ly = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    let mut loss4 = None;
    for n in (4usize..=20).step_by(2) {
        let (ladder, sd, occ) = ladder_with_env(n, n_good, 0.01);
        let base = engineered_rates(&ladder, &sd, &occ, gamma, 0.0).unwrap();
        let rates = RateSet::new(base.absorb, base.emit, base.loss, 10.0 * base.emit).unwrap();
        if n == 4 {
            loss4 = Some(rates.loss);
        }
        let t_ref = 1.0 / loss4.unwrap();
        let cycles = rates.loss * t_ref;
        lx.push((n as f64).ln());
        for (idx, cost) in [
            CostModel::ZeroCost,
            CostModel::SingleExciton,
            CostModel::FullReinit,
            CostModel::Feedback,
        ]
        .iter()
        .enumerate()
        {
            let count = match cost {
                CostModel::Feedback => excitons_per_cycle(n, &rates, *cost).unwrap() * t_ref,
                _ => cycles * excitons_per_cycle(n, &rates, *cost).unwrap(),
            };
            assert!(count > 0.0, "N={n} model {idx}: non-positive net count {count}");
            ly[idx].push(count.ln());
        }
    }
    let mut slopes = [0.0f64; 4];
    for (idx, y) in ly.iter().enumerate() {
        slopes[idx] = linear_fit(&lx, y).0;
    }
    for (idx, name) in ["zero-cost", "single-exciton", "full-reinit"].iter().enumerate() {
        assert!(slopes[idx] > 1.0, "{name} slope {} not superlinear", slopes[idx]);
    }
    assert!(
        (1.8..=2.0).contains(&slopes[3]),
        "feedback slope {} outside [1.8, 2.0]",
        slopes[3]
    );
    println!(
        "PASS criterion 7: net-exciton slopes zero={:.3} single={:.3} full={:.3} \
         feedback={:.3} ({:.2?})",
        slopes[0],
        slopes[1],
        slopes[2],
        slopes[3],
        t0.elapsed()
    );
}

#[test]
fn criterion_08_disorder_robustness() {
    let t0 = Instant::now();
    let n = 4usize;
    let omega_a = 10.0;
    let gamma = 0.01;
    let n_real = 200usize;
    let sigmas = [0.0, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64, 1.28];
    let t_grid: Vec<f64> = (0..=80).map(|i| i as f64 * 2.0).collect();
    let policy = SecularPolicy::new(f64::INFINITY, 1e-6, 0);
    let psi0 = symmetric_state::<f64>(n, n, false);
    let rho0 = DensityOperator::from_matrix(&psi0 * psi0.adjoint()).unwrap();
    let independent_peak = n as f64 * gamma;

    // mean and stderr of the per-realization peak emission excess over the
    // uncorrelated-atom maximum N*gamma; for N=4 the raw peak saturates at
    // ~0.83 of the collective value in the strong-disorder limit, so the
    // halving is measured on the collective excess
    let half_sigma = |hop: f64| -> (f64, Vec<f64>, Vec<f64>) {
        let template = SiteHamiltonianSpec {
            n_atoms: n,
            site_frequencies: vec![omega_a; n],
            hop_strength: hop,
            topology: Topology::RingNn,
            trap: None,
        };
        let mut means = Vec::new();
        let mut serrs = Vec::new();
        for &sigma in &sigmas {
            let cfg = DisorderConfig {
                mean: omega_a,
                stddev: sigma,
                n_realizations: n_real,
                base_seed: 0xD15C0,
            };
            let peaks: Vec<f64> = (0..n_real)
                .into_par_iter()
                .map(|r| {
                    let series = disorder_realization_series(
                        &template,
                        &cfg,
                        &SpectralDensityModel::Flat,
                        &OccupationModel::Vacuum,
                        gamma,
                        &policy,
                        &rho0,
                        &t_grid,
                        1e-8,
                        r,
                    )
                    .unwrap();
                    series.emission_rate.iter().cloned().fold(f64::MIN, f64::max)
                        - independent_peak
                })
                .collect();
            let mean = peaks.iter().sum::<f64>() / n_real as f64;
            let var = peaks.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>()
                / (n_real as f64 - 1.0);
            means.push(mean);
            serrs.push((var / n_real as f64).sqrt());
        }
        // monotone decrease within statistical error
        for k in 1..means.len() {
            assert!(
                means[k] <= means[k - 1] + 2.0 * (serrs[k] + serrs[k - 1]),
                "hop {hop}: excess rose from {} to {} at sigma={}",
                means[k - 1],
                means[k],
                sigmas[k]
            );
        }
        // first sigma where the mean excess halves, log-interpolated
        let target = means[0] / 2.0;
        let mut s_half = f64::INFINITY;
        for k in 1..means.len() {
            if means[k] < target {
                let (s0, s1) = (sigmas[k - 1].max(1e-4), sigmas[k]);
                let (m0, m1) = (means[k - 1], means[k]);
                let f = (m0 - target) / (m0 - m1);
                s_half = (s0.ln() + f * (s1 / s0).ln()).exp();
                break;
            }
        }
        (s_half, means, serrs)
    };

    let (s_half_0, means_0, _) = half_sigma(0.0);
    let (s_half_int, means_int, _) = half_sigma(-1.0);
    assert!(s_half_0.is_finite(), "no halving found for the non-interacting ring");
    // if the interacting ring never halves within the sweep, bound from below
    let s_int_eff = if s_half_int.is_finite() { s_half_int } else { *sigmas.last().unwrap() };
    let robustness = s_int_eff / s_half_0;
    assert!(
        robustness >= 5.0,
        "robustness ratio {robustness:.2} (sigma_half {s_int_eff:.3} vs {s_half_0:.3})"
    );
    println!(
        "PASS criterion 8: peak excess halves at sigma = {s_half_0:.3} (Omega=0) vs \
         {s_int_eff:.3} (Omega=-1), ratio {robustness:.1} >= 5; base excesses {:.4}/{:.4} \
         ({:.2?})",
        means_0[0],
        means_int[0],
        t0.elapsed()
    );
}

#[test]
fn criterion_09_resolution_identity() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    for _ in 0..10_000 {
        let d = 10f64.powf(rng.gen_range(-3.0..3.0));
        let r = 10f64.powf(rng.gen_range(-3.0..3.0));
        let lambda = 10f64.powf(rng.gen_range(-3.0..3.0));
        let n = rng.gen_range(1usize..=12);
        let geom = GeometrySpec::with_consistent_gamma(d, r, lambda).unwrap();
        let rep = resolution_margin(&geom, n).unwrap();
        let lhs_sign = (rep.broadening - rep.shift).signum();
        let rhs_sign = (2.0 * n as f64 * std::f64::consts::PI * r - lambda).signum();
        assert_eq!(lhs_sign, rhs_sign, "d={d} r={r} lambda={lambda} N={n}");
        assert_eq!(rep.resolvable, rep.small_sample);
    }
    println!(
        "PASS criterion 9: sign(N^2 gamma - shift) = sign(2 N pi r - lambda) on 1e4 draws \
         ({:.2?})",
        t0.elapsed()
    );
}

#[test]
fn criterion_10_conservation_suite() {
    let t0 = Instant::now();
    let tol = 1e-8;

    // representative master-equation runs: bare cascade, engineered + trap,
    // thermal occupation, explicit trap site
    let mut runs: Vec<(superabs::lindblad::LindbladGenerator<f64>, DensityOperator<f64>, f64)> =
        Vec::new();
    {
        let ladder = DickeLadder::new(2, 10.0, 0.0, InteractionModel::NearestNeighbour).unwrap();
        let gen = build_collective_generator(
            &ladder,
            &SpectralDensityModel::Flat,
            &OccupationModel::Vacuum,
            1.0,
            None,
        )
        .unwrap();
        let rho0 = DensityOperator::pure(3, 2).unwrap();
        runs.push((gen, rho0, 4.0));
    }
    {
        let (ladder, sd, occ) = ladder_with_env(4, 5.0, 0.01);
        let rates = engineered_rates(&ladder, &sd, &occ, 1.0, 0.0).unwrap();
        let trap = TrapSpec {
            coupling: 0.0,
            trap_frequency: 0.0,
            extraction_rate: 10.0 * rates.emit,
            mode: TrapMode::Phenomenological,
        };
        let gen = build_collective_generator(&ladder, &sd, &occ, 1.0, Some(&trap)).unwrap();
        let rho0 = DensityOperator::pure(5, 1).unwrap();
        runs.push((gen, rho0, 0.05));
    }
    {
        let ladder = DickeLadder::new(8, 100.0, 1.0, InteractionModel::NearestNeighbour).unwrap();
        let gen = build_collective_generator(
            &ladder,
            &SpectralDensityModel::Flat,
            &OccupationModel::Planck { temperature: 60.0 },
            0.5,
            None,
        )
        .unwrap();
        let rho0 = DensityOperator::pure(9, 4).unwrap();
        runs.push((gen, rho0, 0.3));
    }
    {
        let ladder = DickeLadder::new(4, 50.0, 5.0, InteractionModel::NearestNeighbour).unwrap();
        let mid = ladder.mid_level().unwrap();
        let trap = TrapSpec {
            coupling: 1.0,
            trap_frequency: ladder.frequency_from(mid),
            extraction_rate: 4.0,
            mode: TrapMode::ExplicitSite,
        };
        let gen = build_collective_generator(
            &ladder,
            &SpectralDensityModel::Flat,
            &OccupationModel::Vacuum,
            0.2,
            Some(&trap),
        )
        .unwrap();
        let rho0 = DensityOperator::pure(10, 2 * mid).unwrap();
        runs.push((gen, rho0, 2.0));
    }

    let mut worst_trace = 0.0f64;
    let mut worst_eig = 0.0f64;
    for (gen, rho0, t_end) in &runs {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * t_end / 20.0).collect();
        let states = evolve_states(gen, rho0, &grid, tol).unwrap();
        for s in &states {
            let tr: Complex<f64> = (0..s.nrows()).map(|i| s[(i, i)]).sum();
            let drift = (tr.re - 1.0).abs().max(tr.im.abs());
            assert!(drift <= 10.0 * tol, "trace drift {drift}");
            worst_trace = worst_trace.max(drift);
            let min_eig = DensityOperator::from_matrix(s.clone())
                .map(|d| d.min_eigenvalue())
                .unwrap_or_else(|_| {
                    // symmetrise away integrator roundoff before the check
                    let h = (s + s.adjoint()) * Complex::new(0.5, 0.0);
                    h.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::MAX, f64::min)
                });
            assert!(min_eig >= -100.0 * tol, "negative eigenvalue {min_eig}");
            worst_eig = worst_eig.min(min_eig);
        }
    }

    // dissipator tracelessness on 100 random states
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for _ in 0..100 {
        let dim = 2 + (rng.gen::<u64>() % 6) as usize;
        let a = DMatrix::<Complex<f64>>::from_fn(dim, dim, |_, _| {
            Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let h = &a * a.adjoint();
        let tr: Complex<f64> = (0..dim).map(|i| h[(i, i)]).sum();
        let rho = h / tr;
        let l = DMatrix::<Complex<f64>>::from_fn(dim, dim, |_, _| {
            Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let d = dissipator(&l, &rho).unwrap();
        let dtr: Complex<f64> = (0..dim).map(|i| d[(i, i)]).sum();
        assert!(dtr.norm() < 1e-12, "dissipator trace {}", dtr.norm());
    }
    println!(
        "PASS criterion 10: worst trace drift {worst_trace:.2e} (<= 1e-7), worst eigenvalue \
         {worst_eig:.2e} (>= -1e-6), dissipator traceless on 100 states ({:.2?})",
        t0.elapsed()
    );
}
