//! Dicke-ladder algebra for a ring of N identical two-level atoms.
//!
//! The fully symmetric subspace of N atoms forms a ladder of N+1 states
//! |J,M⟩ with J = N/2 and M = −J..J. Collective raising/lowering goes as
//!
//!   J±|J,M⟩ = √((J ± M + 1)(J ∓ M)) |J,M±1⟩,
//!
//! so the radiative rates between adjacent rungs carry the combinatorial
//! factor (J ± M + 1)(J ∓ M) on top of the free-atom decay rate γ. A
//! symmetric hopping interaction of strength Ω does not mix the ladder to
//! first order; it only shifts the rung energies,
//!
//!   δE_M = Ω (J² − M²)/(J − 1/2)      (ring, nearest-neighbour hops)
//!   δE_M = 2Ω (J² − M²)               (all pairs coupled equally)
//!
//! which makes every ladder transition frequency unique and therefore
//! individually addressable by a structured environment.

use crate::error::{Error, Result};
use crate::scalar::{num, RealScalar};

/// Half-integer quantum number stored as twice its value, so level indexing
/// stays exact for both even and odd N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt {
    twice: i64,
}

impl HalfInt {
    /// From twice the desired value: `HalfInt::from_twice(3)` is 3/2.
    pub const fn from_twice(twice: i64) -> Self {
        Self { twice }
    }

    /// From an integer value.
    pub const fn from_int(n: i64) -> Self {
        Self { twice: 2 * n }
    }

    pub const fn twice(self) -> i64 {
        self.twice
    }

    pub fn abs(self) -> Self {
        Self { twice: self.twice.abs() }
    }

    pub fn to_scalar<R: RealScalar>(self) -> R {
        num::<R>(self.twice as f64 / 2.0)
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }
}

impl std::fmt::Display for HalfInt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Total spin of the fully symmetric ladder: J = N/2.
pub fn total_spin(n_atoms: usize) -> HalfInt {
    HalfInt::from_twice(n_atoms as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderDirection {
    Raise,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    Emit,
    Absorb,
}

/// Which hopping interaction sets the rung energy shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionModel {
    NearestNeighbour,
    AllPair,
}

/// Matrix element ⟨J,M±1| J± |J,M⟩ = √((J ± M + 1)(J ∓ M)).
///
/// Raising from M = J (or lowering from M = −J) returns 0.
pub fn collective_matrix_element<R: RealScalar>(
    j: HalfInt,
    m: HalfInt,
    direction: LadderDirection,
) -> Result<R> {
    if m.abs() > j {
        return Err(Error::Domain(format!("|M| = {} exceeds J = {}", m.abs(), j)));
    }
    let (tj, tm) = (j.twice() as f64, m.twice() as f64);
    let factor = match direction {
        LadderDirection::Raise => (tj + tm + 2.0) * (tj - tm) / 4.0,
        LadderDirection::Lower => (tj - tm + 2.0) * (tj + tm) / 4.0,
    };
    Ok(num::<R>(factor.sqrt()))
}

/// Radiative rate between adjacent rungs:
/// emit Γ_{M→M−1} = γ (N/2 − M + 1)(N/2 + M), absorb Γ_{M→M+1} = γ (N/2 + M + 1)(N/2 − M).
pub fn transition_rate<R: RealScalar>(
    n_atoms: usize,
    m: HalfInt,
    kind: TransitionKind,
    gamma: R,
) -> Result<R> {
    let j = total_spin(n_atoms);
    let direction = match kind {
        TransitionKind::Emit => LadderDirection::Lower,
        TransitionKind::Absorb => LadderDirection::Raise,
    };
    let elem = collective_matrix_element::<R>(j, m, direction)?;
    Ok(gamma * elem * elem)
}

/// Interaction-induced energy shift δE_M of the rung |J,M⟩.
pub fn energy_shift<R: RealScalar>(
    n_atoms: usize,
    m: HalfInt,
    omega_hop: R,
    model: InteractionModel,
) -> Result<R> {
    if n_atoms < 2 {
        return Err(Error::Domain(format!(
            "energy shift needs N >= 2 atoms, got {n_atoms}"
        )));
    }
    let j = total_spin(n_atoms);
    if m.abs() > j {
        return Err(Error::Domain(format!("|M| = {} exceeds J = {}", m.abs(), j)));
    }
    // J^2 - M^2 = (2J)^2/4 - (2M)^2/4, exact in integers
    let jj_mm = (j.twice() * j.twice() - m.twice() * m.twice()) as f64 / 4.0;
    match model {
        InteractionModel::NearestNeighbour => {
            let j_minus_half = (j.twice() - 1) as f64 / 2.0;
            Ok(omega_hop * num::<R>(jj_mm / j_minus_half))
        }
        InteractionModel::AllPair => Ok(omega_hop * num::<R>(2.0 * jj_mm)),
    }
}

/// Transition frequency ω_{M→M−1} = ω_A − 4Ω (M − 1/2)/(N − 1) for the
/// nearest-neighbour ring. Equals ω_A + δE_M − δE_{M−1}.
pub fn transition_frequency<R: RealScalar>(
    n_atoms: usize,
    m: HalfInt,
    omega_a: R,
    omega_hop: R,
) -> Result<R> {
    let j = total_spin(n_atoms);
    if m.twice() <= -j.twice() || m.twice() > j.twice() {
        return Err(Error::Domain(format!(
            "transition {m} -> {} does not exist on the N = {n_atoms} ladder",
            HalfInt::from_twice(m.twice() - 2)
        )));
    }
    // 4 (M - 1/2)/(N - 1) = 2 (2M - 1)/(N - 1)
    let slope = 2.0 * (m.twice() - 1) as f64 / (n_atoms as f64 - 1.0);
    Ok(omega_a - omega_hop * num::<R>(slope))
}

/// One rung of the ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DickeLevel<R> {
    pub j: HalfInt,
    pub m: HalfInt,
    /// δE_M in the same units as Ω.
    pub energy_shift: R,
}

/// The symmetric N-atom ladder with its shifted energies and per-transition
/// frequencies. Levels are ordered by excitation number k = J + M, so
/// `levels[0]` is the ground state |J,−J⟩ and `levels[N]` is |J,J⟩.
#[derive(Debug, Clone)]
pub struct DickeLadder<R> {
    pub n_atoms: usize,
    pub omega_a: R,
    pub omega_hop: R,
    pub interaction_model: InteractionModel,
    pub levels: Vec<DickeLevel<R>>,
    /// `transition_frequencies[k]` is ω for |k+1⟩ → |k⟩ (k = 0..N−1 in
    /// excitation indexing), i.e. the transition out of the level with
    /// M = k + 1 − J.
    pub transition_frequencies: Vec<R>,
}

impl<R: RealScalar> DickeLadder<R> {
    pub fn new(
        n_atoms: usize,
        omega_a: R,
        omega_hop: R,
        interaction_model: InteractionModel,
    ) -> Result<Self> {
        if n_atoms < 2 {
            return Err(Error::Domain(format!(
                "a Dicke ladder needs N >= 2 atoms, got {n_atoms}"
            )));
        }
        let j = total_spin(n_atoms);
        let levels = (0..=n_atoms)
            .map(|k| {
                let m = HalfInt::from_twice(2 * k as i64 - j.twice());
                Ok(DickeLevel {
                    j,
                    m,
                    energy_shift: energy_shift::<R>(n_atoms, m, omega_hop, interaction_model)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let transition_frequencies = (0..n_atoms)
            .map(|k| {
                omega_a + levels[k + 1].energy_shift - levels[k].energy_shift
            })
            .collect();
        Ok(Self {
            n_atoms,
            omega_a,
            omega_hop,
            interaction_model,
            levels,
            transition_frequencies,
        })
    }

    /// Total energy E_M = (N/2 + M) ω_A + δE_M of level k (excitation index).
    pub fn energy(&self, k: usize) -> R {
        num::<R>(k as f64) * self.omega_a + self.levels[k].energy_shift
    }

    /// Excitation index of the level with projection M = 0 (even N only).
    pub fn mid_level(&self) -> Result<usize> {
        if self.n_atoms % 2 != 0 {
            return Err(Error::Domain(format!(
                "level M = 0 only exists for even N, got {}",
                self.n_atoms
            )));
        }
        Ok(self.n_atoms / 2)
    }

    /// Frequency of the transition out of the level with excitation index k
    /// (k = 1..=N), i.e. |k⟩ → |k−1⟩.
    pub fn frequency_from(&self, k: usize) -> R {
        self.transition_frequencies[k - 1]
    }
}

/// Physical geometry of the ring, used for the frequency-resolution check.
/// Units: ħ = 1 and ε₀ is absorbed into d², so γ = 8π²d²/(3λ³) and
/// Ω = d²/(4πr³).
#[derive(Debug, Clone, Copy)]
pub struct GeometrySpec<R> {
    pub dipole_moment: R,
    pub nn_distance: R,
    pub wavelength: R,
    pub free_decay_rate: R,
}

impl<R: RealScalar> GeometrySpec<R> {
    pub fn new(dipole_moment: R, nn_distance: R, wavelength: R, free_decay_rate: R) -> Result<Self> {
        for (name, v) in [
            ("dipole_moment", dipole_moment),
            ("nn_distance", nn_distance),
            ("wavelength", wavelength),
            ("free_decay_rate", free_decay_rate),
        ] {
            if v <= R::zero() {
                return Err(Error::Domain(format!("{name} must be strictly positive")));
            }
        }
        Ok(Self { dipole_moment, nn_distance, wavelength, free_decay_rate })
    }

    /// Geometry with γ tied to (d, λ) as γ = 8π²d²/(3λ³).
    pub fn with_consistent_gamma(dipole_moment: R, nn_distance: R, wavelength: R) -> Result<Self> {
        let gamma = free_decay_rate_from(dipole_moment, wavelength);
        Self::new(dipole_moment, nn_distance, wavelength, gamma)
    }

    /// Small-sample hopping strength Ω = d²/(4πr³).
    pub fn hopping_strength(&self) -> R {
        let d2 = self.dipole_moment * self.dipole_moment;
        let r3 = self.nn_distance.powi(3);
        d2 / (num::<R>(4.0) * R::pi() * r3)
    }
}

/// Free-atom decay rate γ = 8π²d²/(3λ³).
pub fn free_decay_rate_from<R: RealScalar>(dipole_moment: R, wavelength: R) -> R {
    let d2 = dipole_moment * dipole_moment;
    num::<R>(8.0) * R::pi() * R::pi() * d2 / (num::<R>(3.0) * wavelength.powi(3))
}

/// Outcome of the frequency-resolution feasibility check.
#[derive(Debug, Clone, Copy)]
pub struct ResolutionReport<R> {
    /// Collective lifetime broadening N²γ near the middle of the ladder.
    pub broadening: R,
    /// Adjacent-transition detuning scale at M = 0, normalised so that
    /// `broadening < shift` coincides exactly with the reduced small-sample
    /// criterion 2Nπr < λ when γ = 8π²d²/(3λ³).
    pub shift: R,
    /// broadening < shift.
    pub resolvable: bool,
    /// The reduced criterion 2Nπr < λ.
    pub small_sample: bool,
}

/// Checks whether the interaction-induced detunings stay resolvable against
/// the N²γ collective broadening. The reported `shift` is d²/(3πNr³); with γ
/// computed from (d, λ) the comparison reduces algebraically to 2Nπr < λ, and
/// the two booleans agree.
pub fn resolution_margin<R: RealScalar>(
    geometry: &GeometrySpec<R>,
    n_atoms: usize,
) -> Result<ResolutionReport<R>> {
    if n_atoms == 0 {
        return Err(Error::Domain("n_atoms must be positive".into()));
    }
    let n = num::<R>(n_atoms as f64);
    let broadening = n * n * geometry.free_decay_rate;
    let d2 = geometry.dipole_moment * geometry.dipole_moment;
    let shift = d2 / (num::<R>(3.0) * R::pi() * n * geometry.nn_distance.powi(3));
    let resolvable = broadening < shift;
    let small_sample =
        num::<R>(2.0) * n * R::pi() * geometry.nn_distance < geometry.wavelength;
    Ok(ResolutionReport { broadening, shift, resolvable, small_sample })
}
