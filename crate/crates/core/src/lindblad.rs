//! Density-operator evolution of the collective master equation on the Dicke
//! ladder,
//!
//!   dρ/dt = −i[H, ρ] + γ Σ_β κ(ω_β) [ (n(ω_β)+1) D[L_β]ρ + n(ω_β) D[L_β†]ρ ],
//!
//! with one lowering operator L_β per ladder transition sampling the
//! environment at its own shifted frequency. Jump operators are unit level
//! projectors; the collective (J ± M + 1)(J ∓ M) factors are folded into the
//! channel rates. Energy extraction is modelled either phenomenologically
//! (a trap dissipator |J,−1⟩⟨J,0| at rate Γ_trap) or with an explicit
//! two-level trap site coupled by H_T = g(J₊σ₋ᵀ + J₋σ₊ᵀ) + ω_trap σ₊ᵀσ₋ᵀ and
//! drained at Γ_trap.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::bath::{OccupationModel, SpectralDensityModel};
use crate::dicke::{collective_matrix_element, DickeLadder, HalfInt, LadderDirection};
use crate::error::{Error, Result};
use crate::ode::integrate_adaptive;
use crate::scalar::{im, num, re, scaled_tol, RealScalar};
use crate::series::ObservableSeries;

/// Hard ceiling on the Hilbert-space dimension of dense solvers.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Default local integration tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

type CMat<R> = DMatrix<Complex<R>>;
type CVec<R> = DVector<Complex<R>>;

/// Complex Hermitian, unit-trace state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator<R: RealScalar> {
    matrix: CMat<R>,
}

impl<R: RealScalar> DensityOperator<R> {
    /// Validates Hermiticity and unit trace on construction.
    pub fn from_matrix(matrix: CMat<R>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Domain("density operator must be square".into()));
        }
        let herm_tol = scaled_tol::<R>(1e-12);
        let n = matrix.nrows();
        for i in 0..n {
            for j in i..n {
                let d = matrix[(i, j)] - matrix[(j, i)].conj();
                if d.norm_sqr().sqrt() > herm_tol {
                    return Err(Error::Domain(format!(
                        "density operator is not Hermitian at ({i},{j})"
                    )));
                }
            }
        }
        let tr = trace(&matrix);
        if (tr.re - R::one()).abs() > scaled_tol::<R>(1e-9) || tr.im.abs() > scaled_tol::<R>(1e-9)
        {
            return Err(Error::Domain("density operator trace must be 1".into()));
        }
        Ok(Self { matrix })
    }

    /// Pure basis state |k⟩⟨k|.
    pub fn pure(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Domain(format!("state index {k} out of range for dim {dim}")));
        }
        let mut m = CMat::<R>::zeros(dim, dim);
        m[(k, k)] = re(R::one());
        Ok(Self { matrix: m })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat<R> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex<R> {
        trace(&self.matrix)
    }

    /// Smallest eigenvalue; states are positive semidefinite up to solver
    /// tolerance.
    pub fn min_eigenvalue(&self) -> R {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut min = R::max_value().unwrap();
        for &v in eig.eigenvalues.iter() {
            if v < min {
                min = v;
            }
        }
        min
    }
}

fn trace<R: RealScalar>(m: &CMat<R>) -> Complex<R> {
    let mut t = Complex::new(R::zero(), R::zero());
    for i in 0..m.nrows() {
        t += m[(i, i)];
    }
    t
}

/// Role of a jump channel, used when assembling observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    RadiativeDown,
    RadiativeUp,
    Trap,
}

#[derive(Debug, Clone)]
pub struct Channel<R: RealScalar> {
    pub op: CMat<R>,
    pub rate: R,
    pub kind: ChannelKind,
}

/// How basis indices map onto physical levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemLayout {
    /// Populations are the bare diagonal.
    Plain,
    /// Ladder ⊗ trap qubit; basis index = 2k + s with k the ladder level and
    /// s the trap occupation.
    LadderTrap { n_levels: usize },
}

/// Hamiltonian plus weighted jump channels; immutable after construction.
#[derive(Debug, Clone)]
pub struct LindbladGenerator<R: RealScalar> {
    pub hamiltonian: CMat<R>,
    pub channels: Vec<Channel<R>>,
    pub layout: SystemLayout,
}

/// Trap configuration. `Phenomenological` reduces the trap to a dissipator
/// |J,−1⟩⟨J,0|; `ExplicitSite` doubles the Hilbert space with a drained trap
/// qubit, in which case `coupling` and `trap_frequency` matter.
#[derive(Debug, Clone, Copy)]
pub struct TrapSpec<R> {
    pub coupling: R,
    pub trap_frequency: R,
    pub extraction_rate: R,
    pub mode: TrapMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrapMode {
    Phenomenological,
    ExplicitSite,
}

impl<R: RealScalar> LindbladGenerator<R> {
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// dρ/dt.
    pub fn rhs(&self, rho: &CMat<R>) -> CMat<R> {
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * im(-R::one());
        for ch in &self.channels {
            out += dissipator_unchecked(&ch.op, rho) * re(ch.rate);
        }
        out
    }

    /// Σ over channels of `kind` of r ⟨L†L⟩.
    fn flux(&self, rho: &CMat<R>, kind: ChannelKind) -> R {
        let mut f = R::zero();
        for ch in &self.channels {
            if ch.kind == kind {
                // tr(L†L rho) = sum_{ij} |L_{ij}|^2 ... computed as tr((L rho) L†)
                let lr = &ch.op * rho;
                let mut t = R::zero();
                for i in 0..lr.nrows() {
                    for j in 0..lr.ncols() {
                        t += (lr[(i, j)] * ch.op[(i, j)].conj()).re;
                    }
                }
                f += ch.rate * t;
            }
        }
        f
    }
}

/// Lindblad dissipator D[L]ρ = LρL† − ½{L†L, ρ}.
pub fn dissipator<R: RealScalar>(l: &CMat<R>, rho: &CMat<R>) -> Result<CMat<R>> {
    if l.nrows() != rho.nrows() || l.ncols() != rho.ncols() || rho.nrows() != rho.ncols() {
        return Err(Error::Domain(format!(
            "dissipator dimension mismatch: L is {}x{}, rho is {}x{}",
            l.nrows(),
            l.ncols(),
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(dissipator_unchecked(l, rho))
}

fn dissipator_unchecked<R: RealScalar>(l: &CMat<R>, rho: &CMat<R>) -> CMat<R> {
    let ldag = l.adjoint();
    let ldl = &ldag * l;
    let half = re(num::<R>(0.5));
    l * rho * ldag - (&ldl * rho + rho * ldl) * half
}

/// Assembles the collective generator for a ladder in its engineered
/// environment, optionally extended by a trap.
pub fn build_collective_generator<R: RealScalar>(
    ladder: &DickeLadder<R>,
    sd: &SpectralDensityModel<R>,
    occ: &OccupationModel<R>,
    gamma: R,
    trap: Option<&TrapSpec<R>>,
) -> Result<LindbladGenerator<R>> {
    let n = ladder.n_atoms;
    let n_levels = n + 1;
    let explicit = matches!(
        trap,
        Some(TrapSpec { mode: TrapMode::ExplicitSite, .. })
    );
    let dim = if explicit { 2 * n_levels } else { n_levels };
    if dim > DEFAULT_DIM_CAP {
        return Err(Error::Capacity(format!(
            "generator dimension {dim} exceeds the cap {DEFAULT_DIM_CAP}"
        )));
    }

    let j = crate::dicke::total_spin(n);
    // |k-1><k| on the ladder, optionally tensored with the trap identity
    let projector = |upper: usize| -> CMat<R> {
        let mut m = CMat::<R>::zeros(dim, dim);
        if explicit {
            for s in 0..2 {
                m[(2 * (upper - 1) + s, 2 * upper + s)] = re(R::one());
            }
        } else {
            m[(upper - 1, upper)] = re(R::one());
        }
        m
    };

    let mut channels = Vec::new();
    for upper in 1..=n {
        let m = HalfInt::from_twice(2 * upper as i64 - j.twice());
        let omega = ladder.frequency_from(upper);
        let kappa = sd.kappa(omega)?;
        let occ_n = occ.occupation(omega)?;
        let elem: R = collective_matrix_element(j, m, LadderDirection::Lower)?;
        let factor = elem * elem;
        let down_rate = gamma * kappa * (occ_n + R::one()) * factor;
        let up_rate = gamma * kappa * occ_n * factor;
        let l = projector(upper);
        if down_rate > R::zero() {
            channels.push(Channel { op: l.clone(), rate: down_rate, kind: ChannelKind::RadiativeDown });
        }
        if up_rate > R::zero() {
            channels.push(Channel { op: l.adjoint(), rate: up_rate, kind: ChannelKind::RadiativeUp });
        }
    }

    let mut hamiltonian = CMat::<R>::zeros(dim, dim);
    for k in 0..n_levels {
        let e = ladder.energy(k);
        if explicit {
            hamiltonian[(2 * k, 2 * k)] = re(e);
            hamiltonian[(2 * k + 1, 2 * k + 1)] = re(e);
        } else {
            hamiltonian[(k, k)] = re(e);
        }
    }

    let layout = if explicit { SystemLayout::LadderTrap { n_levels } } else { SystemLayout::Plain };

    match trap {
        None => {}
        Some(spec) if spec.mode == TrapMode::Phenomenological => {
            if spec.extraction_rate < R::zero() {
                return Err(Error::Domain("trap rate must be non-negative".into()));
            }
            if n < 4 || n % 2 != 0 {
                return Err(Error::Domain(
                    "the phenomenological trap |J,-1><J,0| needs even N >= 4".into(),
                ));
            }
            let mid = ladder.mid_level()?;
            let mut l = CMat::<R>::zeros(dim, dim);
            l[(mid - 1, mid)] = re(R::one());
            if spec.extraction_rate > R::zero() {
                channels.push(Channel { op: l, rate: spec.extraction_rate, kind: ChannelKind::Trap });
            }
        }
        Some(spec) => {
            // explicit trap site: H_T and a drain on the trap qubit
            for k in 0..n_levels {
                hamiltonian[(2 * k + 1, 2 * k + 1)] += re(spec.trap_frequency);
            }
            // g (J+ sigma_-^T + J- sigma_+^T): |k+1,0><k,1| + h.c.
            for k in 0..n {
                let m = HalfInt::from_twice(2 * k as i64 - j.twice());
                let elem: R = collective_matrix_element(j, m, LadderDirection::Raise)?;
                let g = spec.coupling * elem;
                hamiltonian[(2 * (k + 1), 2 * k + 1)] += re(g);
                hamiltonian[(2 * k + 1, 2 * (k + 1))] += re(g);
            }
            let mut drain = CMat::<R>::zeros(dim, dim);
            for k in 0..n_levels {
                drain[(2 * k, 2 * k + 1)] = re(R::one());
            }
            if spec.extraction_rate > R::zero() {
                channels.push(Channel {
                    op: drain,
                    rate: spec.extraction_rate,
                    kind: ChannelKind::Trap,
                });
            }
        }
    }

    Ok(LindbladGenerator { hamiltonian, channels, layout })
}

/// Integrates the master equation across `t_grid`, recording populations,
/// trap current, cumulative extraction, and radiative flux at every grid
/// point. The extraction accumulator rides along inside the ODE state, so the
/// reported totals are integrator-consistent.
pub fn evolve<R: RealScalar>(
    gen: &LindbladGenerator<R>,
    rho0: &DensityOperator<R>,
    t_grid: &[R],
    tol: R,
) -> Result<ObservableSeries<R>> {
    let d = gen.dim();
    if rho0.dim() != d {
        return Err(Error::Domain(format!(
            "initial state dimension {} does not match generator dimension {d}",
            rho0.dim()
        )));
    }
    let n_t = t_grid.len();
    let mut series = ObservableSeries::<R>::with_capacity(n_t);
    series.times = t_grid.to_vec();
    if matches!(gen.layout, SystemLayout::LadderTrap { .. }) {
        series.trap_population = Some(Vec::with_capacity(n_t));
    }

    // state = vec(rho) followed by the extraction accumulator
    let mut y0 = CVec::<R>::zeros(d * d + 1);
    pack(rho0.matrix(), &mut y0);

    let rhs = |y: &CVec<R>| -> CVec<R> {
        let rho = unpack::<R>(y, d);
        let drho = gen.rhs(&rho);
        let mut out = CVec::<R>::zeros(d * d + 1);
        pack(&drho, &mut out);
        out[d * d] = re(gen.flux(&rho, ChannelKind::Trap));
        out
    };

    integrate_adaptive(rhs, &y0, t_grid, tol, |_, _, y| {
        let rho = unpack::<R>(y, d);
        match gen.layout {
            SystemLayout::Plain => {
                series
                    .populations
                    .push((0..d).map(|i| rho[(i, i)].re).collect());
            }
            SystemLayout::LadderTrap { n_levels } => {
                let mut pops = Vec::with_capacity(n_levels);
                let mut trap_pop = R::zero();
                for k in 0..n_levels {
                    pops.push(rho[(2 * k, 2 * k)].re + rho[(2 * k + 1, 2 * k + 1)].re);
                    trap_pop += rho[(2 * k + 1, 2 * k + 1)].re;
                }
                series.populations.push(pops);
                series.trap_population.as_mut().unwrap().push(trap_pop);
            }
        }
        series.trap_current.push(gen.flux(&rho, ChannelKind::Trap));
        series.emission_rate.push(gen.flux(&rho, ChannelKind::RadiativeDown));
        series.extracted.push(y[d * d].re);
    })?;
    Ok(series)
}

/// Like `evolve`, but returns the density-matrix snapshots at the grid
/// points, for state-level diagnostics (trace drift, positivity).
pub fn evolve_states<R: RealScalar>(
    gen: &LindbladGenerator<R>,
    rho0: &DensityOperator<R>,
    t_grid: &[R],
    tol: R,
) -> Result<Vec<CMat<R>>> {
    let d = gen.dim();
    if rho0.dim() != d {
        return Err(Error::Domain("initial state dimension mismatch".into()));
    }
    let mut y0 = CVec::<R>::zeros(d * d);
    pack(rho0.matrix(), &mut y0);
    let rhs = |y: &CVec<R>| -> CVec<R> {
        let rho = unpack::<R>(y, d);
        let drho = gen.rhs(&rho);
        let mut out = CVec::<R>::zeros(d * d);
        pack(&drho, &mut out);
        out
    };
    let mut states = Vec::with_capacity(t_grid.len());
    integrate_adaptive(rhs, &y0, t_grid, tol, |_, _, y| {
        states.push(unpack::<R>(y, d));
    })?;
    Ok(states)
}

/// Recomputes I_trap(t) from recorded populations: Γ_trap P_{M=0}(t) for the
/// phenomenological trap, Γ_trap P_trap(t) for the explicit site.
pub fn trap_current_numeric<R: RealScalar>(
    series: &ObservableSeries<R>,
    trap: &TrapSpec<R>,
    n_atoms: usize,
) -> Result<Vec<R>> {
    match trap.mode {
        TrapMode::Phenomenological => {
            let mid = n_atoms / 2;
            if series.populations.is_empty() || series.populations[0].len() <= mid {
                return Err(Error::Domain("series lacks the M = 0 population".into()));
            }
            Ok(series
                .populations
                .iter()
                .map(|row| trap.extraction_rate * row[mid])
                .collect())
        }
        TrapMode::ExplicitSite => {
            let tp = series
                .trap_population
                .as_ref()
                .ok_or_else(|| Error::Domain("series lacks the trap population".into()))?;
            Ok(tp.iter().map(|&p| trap.extraction_rate * p).collect())
        }
    }
}

fn pack<R: RealScalar>(m: &CMat<R>, y: &mut CVec<R>) {
    let d = m.nrows();
    for j in 0..d {
        for i in 0..d {
            y[j * d + i] = m[(i, j)];
        }
    }
}

fn unpack<R: RealScalar>(y: &CVec<R>, d: usize) -> CMat<R> {
    CMat::<R>::from_fn(d, d, |i, j| y[j * d + i])
}
