//! Monte Carlo wavefunction (quantum trajectory) unravelling of a Lindblad
//! generator.
//!
//! Each trajectory propagates the unnormalised state under the effective
//! non-Hermitian Hamiltonian H_eff = H − (i/2) Σ r_i L_i†L_i. When the
//! squared norm crosses a pre-drawn uniform threshold, the jump time is
//! refined by bisection, a channel is selected with probability
//! ∝ r_i ‖L_i ψ‖², and the state is projected and renormalised. Averaging
//! trajectories recovers the master-equation dynamics; the per-trajectory
//! seed is `base_seed + index`, so runs are bit-reproducible and trajectories
//! can execute in parallel.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::lindblad::{ChannelKind, LindbladGenerator, SystemLayout};
use crate::ode::{one_accepted_step, rk4_step};
use crate::scalar::{im, num, RealScalar};
use crate::series::{ensemble_average, EnsembleResult, ObservableSeries};

/// Identifier of the random number generator recorded in run metadata.
pub const RNG_ID: &str = "ChaCha12Rng (rand_chacha 0.3); per-trajectory seed = base_seed + index";

type CMat<R> = DMatrix<Complex<R>>;
type CVec<R> = DVector<Complex<R>>;

#[derive(Debug, Clone)]
pub struct TrajectoryConfig<R> {
    pub n_trajectories: usize,
    pub base_seed: u64,
    pub t_grid: Vec<R>,
    /// Acceptance window for |‖ψ‖² − threshold| in the jump-time bisection.
    pub jump_tolerance: R,
    /// Local tolerance of the deterministic segments.
    pub tol: R,
}

/// H − (i/2) Σ r_i L_i†L_i.
pub fn effective_hamiltonian<R: RealScalar>(gen: &LindbladGenerator<R>) -> CMat<R> {
    let mut h_eff = gen.hamiltonian.clone();
    for ch in &gen.channels {
        let ldl = ch.op.adjoint() * &ch.op;
        h_eff += ldl * im(-ch.rate / num::<R>(2.0));
    }
    h_eff
}

struct ChannelApply<R: RealScalar> {
    op: CMat<R>,
    rate: R,
    kind: ChannelKind,
}

/// One stochastic trajectory, recorded on the configured grid. Populations
/// are normalised expectations; `extracted` counts trap-channel jumps.
pub fn mcwf_run<R: RealScalar>(
    gen: &LindbladGenerator<R>,
    psi0: &CVec<R>,
    config: &TrajectoryConfig<R>,
    traj_index: usize,
) -> Result<ObservableSeries<R>> {
    let d = gen.dim();
    if psi0.len() != d {
        return Err(Error::Domain("initial state dimension mismatch".into()));
    }
    if (norm_sqr(psi0) - R::one()).abs() > num::<R>(1e-10) {
        return Err(Error::Domain("initial state must be normalised".into()));
    }
    let grid = &config.t_grid;
    if grid.len() < 2 {
        return Err(Error::Config("time grid needs at least two points".into()));
    }

    let h_eff = effective_hamiltonian(gen);
    let minus_i_h = h_eff * im(-R::one());
    let rhs = move |y: &CVec<R>| &minus_i_h * y;
    let channels: Vec<ChannelApply<R>> = gen
        .channels
        .iter()
        .map(|c| ChannelApply { op: c.op.clone(), rate: c.rate, kind: c.kind })
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(config.base_seed.wrapping_add(traj_index as u64));
    let mut threshold: R = num(rng.gen::<f64>());

    let span = *grid.last().unwrap() - grid[0];
    let h_min = span * num::<R>(1e-14);
    let mut h = (grid[1] - grid[0]) / num::<R>(10.0);

    let mut psi = psi0.clone();
    let mut extracted = R::zero();
    let mut series = ObservableSeries::<R>::with_capacity(grid.len());
    series.times = grid.to_vec();
    if matches!(gen.layout, SystemLayout::LadderTrap { .. }) {
        series.trap_population = Some(Vec::with_capacity(grid.len()));
    }
    record(&mut series, gen, &channels, &psi, extracted);

    for seg in grid.windows(2) {
        let mut t = seg[0];
        let target = seg[1];
        while t < target {
            let (psi_new, h_used, h_next) =
                one_accepted_step(&rhs, &psi, h, target - t, config.tol, h_min)?;
            if norm_sqr(&psi_new) >= threshold {
                psi = psi_new;
                t = t + h_used;
                h = h_next;
                continue;
            }
            // jump inside (t, t + h_used]: bisect the step fraction
            let (dt_jump, psi_pre) =
                bisect_jump(&rhs, &psi, h_used, threshold, config.jump_tolerance);
            // channel selection with weight r_i ||L_i psi||^2
            let mut weights = Vec::with_capacity(channels.len());
            let mut total = R::zero();
            for c in &channels {
                let w = c.rate * norm_sqr(&(&c.op * &psi_pre));
                weights.push(w);
                total += w;
            }
            if total <= R::zero() {
                return Err(Error::Numerical(
                    "all jump channels have zero weight at a norm-threshold crossing; \
                     jump_tolerance is likely too coarse"
                        .into(),
                ));
            }
            let mut pick: R = num::<R>(rng.gen::<f64>()) * total;
            let mut chosen = channels.len() - 1;
            for (i, &w) in weights.iter().enumerate() {
                if pick < w {
                    chosen = i;
                    break;
                }
                pick -= w;
            }
            let jumped = &channels[chosen].op * &psi_pre;
            let nrm = norm_sqr(&jumped).sqrt();
            psi = jumped / Complex::new(nrm, R::zero());
            if channels[chosen].kind == ChannelKind::Trap {
                extracted += R::one();
            }
            threshold = num(rng.gen::<f64>());
            t = t + dt_jump;
        }
        record(&mut series, gen, &channels, &psi, extracted);
    }
    Ok(series)
}

/// Finds the step fraction where ‖ψ‖² crosses `threshold`, to within
/// `jump_tol` on the norm, and returns the pre-jump state there.
fn bisect_jump<R: RealScalar, F>(
    rhs: &F,
    psi: &CVec<R>,
    h_full: R,
    threshold: R,
    jump_tol: R,
) -> (R, CVec<R>)
where
    F: Fn(&CVec<R>) -> CVec<R>,
{
    let mut lo = R::zero();
    let mut hi = h_full;
    let mut best = rk4_step(rhs, psi, h_full);
    for _ in 0..64 {
        let mid = (lo + hi) / num::<R>(2.0);
        let trial = rk4_step(rhs, psi, mid);
        let g = norm_sqr(&trial) - threshold;
        if g.abs() <= jump_tol {
            return (mid, trial);
        }
        if g > R::zero() {
            lo = mid;
        } else {
            hi = mid;
            best = trial;
        }
        if hi - lo <= h_full * num::<R>(1e-15) {
            break;
        }
    }
    (hi, best)
}

fn record<R: RealScalar>(
    series: &mut ObservableSeries<R>,
    gen: &LindbladGenerator<R>,
    channels: &[ChannelApply<R>],
    psi: &CVec<R>,
    extracted: R,
) {
    let n2 = norm_sqr(psi);
    match gen.layout {
        SystemLayout::Plain => {
            series
                .populations
                .push(psi.iter().map(|z| z.norm_sqr() / n2).collect());
        }
        SystemLayout::LadderTrap { n_levels } => {
            let mut pops = Vec::with_capacity(n_levels);
            let mut trap_pop = R::zero();
            for k in 0..n_levels {
                let p0 = psi[2 * k].norm_sqr();
                let p1 = psi[2 * k + 1].norm_sqr();
                pops.push((p0 + p1) / n2);
                trap_pop += p1 / n2;
            }
            series.populations.push(pops);
            series.trap_population.as_mut().unwrap().push(trap_pop);
        }
    }
    let flux = |kind: ChannelKind| -> R {
        let mut f = R::zero();
        for c in channels {
            if c.kind == kind {
                f += c.rate * norm_sqr(&(&c.op * psi)) / n2;
            }
        }
        f
    };
    series.trap_current.push(flux(ChannelKind::Trap));
    series.emission_rate.push(flux(ChannelKind::RadiativeDown));
    series.extracted.push(extracted);
}

fn norm_sqr<R: RealScalar>(v: &CVec<R>) -> R {
    let mut s = R::zero();
    for z in v.iter() {
        s += z.norm_sqr();
    }
    s
}

/// Ensemble mean and standard error over `n_trajectories` seeded
/// trajectories. Identical inputs give bit-identical results; the reduction
/// is block-deterministic, so parallel and serial runs agree exactly.
pub fn mcwf_ensemble<R: RealScalar + Send + Sync>(
    gen: &LindbladGenerator<R>,
    psi0: &CVec<R>,
    config: &TrajectoryConfig<R>,
) -> Result<EnsembleResult<R>> {
    if config.n_trajectories == 0 {
        return Err(Error::Config("n_trajectories must be at least 1".into()));
    }
    ensemble_average(config.n_trajectories, |i| mcwf_run(gen, psi0, config, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::Channel;
    use crate::scalar::re;

    fn pure_state(dim: usize, k: usize) -> CVec<f64> {
        let mut v = CVec::<f64>::zeros(dim);
        v[k] = re(1.0);
        v
    }

    fn decay_generator(gamma: f64) -> LindbladGenerator<f64> {
        let mut sm = CMat::<f64>::zeros(2, 2);
        sm[(0, 1)] = re(1.0);
        LindbladGenerator {
            hamiltonian: CMat::zeros(2, 2),
            channels: vec![Channel { op: sm, rate: gamma, kind: ChannelKind::RadiativeDown }],
            layout: SystemLayout::Plain,
        }
    }

    fn config(n: usize, grid: Vec<f64>) -> TrajectoryConfig<f64> {
        TrajectoryConfig {
            n_trajectories: n,
            base_seed: 20260810,
            t_grid: grid,
            jump_tolerance: 1e-10,
            tol: 1e-9,
        }
    }

    #[test]
    fn no_channels_is_unitary() {
        let mut h = CMat::<f64>::zeros(2, 2);
        h[(0, 0)] = re(1.0);
        h[(1, 1)] = re(-1.0);
        let gen = LindbladGenerator {
            hamiltonian: h,
            channels: vec![],
            layout: SystemLayout::Plain,
        };
        let psi0 = (pure_state(2, 0) + pure_state(2, 1)) / re(2.0f64.sqrt());
        let cfg = config(1, (0..=10).map(|i| i as f64 * 0.3).collect());
        let series = mcwf_run(&gen, &psi0, &cfg, 0).unwrap();
        for row in &series.populations {
            assert!((row[0] + row[1] - 1.0).abs() < 1e-10);
            assert!((row[0] - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn norm_monotone_under_effective_hamiltonian() {
        let gen = decay_generator(0.8);
        let h_eff = effective_hamiltonian(&gen);
        let minus_i_h = h_eff * im(-1.0);
        let rhs = move |y: &CVec<f64>| &minus_i_h * y;
        let psi0 = (pure_state(2, 0) + pure_state(2, 1)) / re(2.0f64.sqrt());
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let mut last = 1.0 + 1e-12;
        crate::ode::integrate_adaptive(rhs, &psi0, &grid, 1e-10, |_, _, y| {
            let n2 = norm_sqr(y);
            assert!(n2 <= last + 1e-12);
            last = n2;
        })
        .unwrap();
    }

    #[test]
    fn single_atom_survival_matches_exponential() {
        let gamma = 1.0;
        let gen = decay_generator(gamma);
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.25).collect();
        let cfg = config(4000, grid.clone());
        let ens = mcwf_ensemble(&gen, &pure_state(2, 1), &cfg).unwrap();
        for (k, &t) in grid.iter().enumerate() {
            let exact = (-gamma * t).exp();
            let mean = ens.mean.populations[k][1];
            let se = ens.stderr.populations[k][1];
            assert!(
                (mean - exact).abs() <= 3.0 * se + 1e-12,
                "t={t}: mean {mean}, exact {exact}, stderr {se}"
            );
        }
    }

    #[test]
    fn seed_determinism_and_single_trajectory_mean() {
        let gen = decay_generator(0.7);
        let grid: Vec<f64> = (0..=6).map(|i| i as f64 * 0.4).collect();
        let cfg = config(1, grid);
        let a = mcwf_run(&gen, &pure_state(2, 1), &cfg, 3).unwrap();
        let b = mcwf_run(&gen, &pure_state(2, 1), &cfg, 3).unwrap();
        assert_eq!(a, b);
        let ens = mcwf_ensemble(&gen, &pure_state(2, 1), &cfg).unwrap();
        let first = mcwf_run(&gen, &pure_state(2, 1), &cfg, 0).unwrap();
        assert_eq!(ens.mean, first);
    }

    #[test]
    fn stderr_shrinks_as_inverse_sqrt() {
        let gen = decay_generator(1.0);
        let grid = vec![0.0, 0.5, 1.0];
        let small = mcwf_ensemble(&gen, &pure_state(2, 1), &config(1000, grid.clone())).unwrap();
        let large = mcwf_ensemble(&gen, &pure_state(2, 1), &config(4000, grid)).unwrap();
        let r = small.stderr.populations[2][1] / large.stderr.populations[2][1];
        assert!((r - 2.0).abs() < 0.4, "stderr ratio {r}");
    }

    #[test]
    fn two_atom_cascade_matches_master_equation() {
        use crate::bath::{OccupationModel, SpectralDensityModel};
        use crate::dicke::{DickeLadder, InteractionModel};
        let ladder =
            DickeLadder::<f64>::new(2, 10.0, 0.0, InteractionModel::NearestNeighbour).unwrap();
        let gen = crate::lindblad::build_collective_generator(
            &ladder,
            &SpectralDensityModel::Flat,
            &OccupationModel::Vacuum,
            1.0,
            None,
        )
        .unwrap();
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.2).collect();
        let rho0 = crate::lindblad::DensityOperator::pure(3, 2).unwrap();
        let exact = crate::lindblad::evolve(&gen, &rho0, &grid, 1e-10).unwrap();
        let cfg = config(4000, grid.clone());
        let ens = mcwf_ensemble(&gen, &pure_state(3, 2), &cfg).unwrap();
        for k in 0..grid.len() {
            for lvl in 0..3 {
                let diff = (ens.mean.populations[k][lvl] - exact.populations[k][lvl]).abs();
                let se = ens.stderr.populations[k][lvl];
                assert!(diff <= 3.0 * se + 1e-9, "k={k} lvl={lvl}: diff {diff}, se {se}");
            }
        }
    }
}
