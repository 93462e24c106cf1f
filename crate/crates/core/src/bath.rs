//! Engineered photonic environment: spectral density κ(ω), mode occupation
//! n(ω), and the four effective rates that bias the ladder dynamics into the
//! two levels around M = 0.
//!
//! Each ladder transition samples the environment at its own shifted
//! frequency, so a stop band at ω_bad = ω_{−1→−2} suppresses loss out of the
//! effective two-level system while a filtered occupation peak at
//! ω_good = ω_{0→−1} drives absorption within it.

use crate::dicke::{DickeLadder, TransitionKind};
use crate::error::{Error, Result};
use crate::scalar::{num, RealScalar};

/// Spectral density κ(ω) of the photonic environment, normalised to 1 in the
/// unstructured regions.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensityModel<R> {
    /// κ(ω) = 1 everywhere (free space).
    Flat,
    /// Stop band: κ = `floor` for |ω − center| ≤ width/2, 1 outside.
    TopHatNotch { center: R, width: R, floor: R },
    /// Nearest-entry lookup with exact-match preference; table entries are
    /// (frequency, κ) pairs.
    Tabulated(Vec<(R, R)>),
}

impl<R: RealScalar> SpectralDensityModel<R> {
    pub fn kappa(&self, omega: R) -> Result<R> {
        match self {
            Self::Flat => Ok(R::one()),
            Self::TopHatNotch { center, width, floor } => {
                let half = *width / num::<R>(2.0);
                if (omega - *center).abs() <= half {
                    Ok(*floor)
                } else {
                    Ok(R::one())
                }
            }
            Self::Tabulated(table) => {
                if table.is_empty() {
                    return Err(Error::Config("tabulated spectral density is empty".into()));
                }
                let mut best = table[0];
                for &(w, k) in table {
                    if w == omega {
                        return Ok(k);
                    }
                    if (w - omega).abs() < (best.0 - omega).abs() {
                        best = (w, k);
                    }
                }
                Ok(best.1)
            }
        }
    }
}

/// Mean photon number n(ω) of the environment mode at frequency ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OccupationModel<R> {
    /// n = 0 everywhere.
    Vacuum,
    /// Planck distribution n(ω) = 1/(e^{ω/T} − 1); satisfies
    /// n(−ω) = −(1 + n(ω)).
    Planck { temperature: R },
    /// Filtered narrowband light: n = `occupation` for
    /// |ω − center| ≤ halfwidth, 0 outside.
    FilteredSingleMode { center: R, halfwidth: R, occupation: R },
}

impl<R: RealScalar> OccupationModel<R> {
    pub fn occupation(&self, omega: R) -> Result<R> {
        match self {
            Self::Vacuum => Ok(R::zero()),
            Self::Planck { temperature } => {
                if omega == R::zero() {
                    return Err(Error::Domain(
                        "Planck occupation diverges at omega = 0".into(),
                    ));
                }
                Ok(R::one() / ((omega / *temperature).exp() - R::one()))
            }
            Self::FilteredSingleMode { center, halfwidth, occupation } => {
                if (omega - *center).abs() <= *halfwidth {
                    Ok(*occupation)
                } else {
                    Ok(R::zero())
                }
            }
        }
    }
}

/// Effective rates of the two-level model around M = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet<R> {
    pub absorb: R,
    pub emit: R,
    pub loss: R,
    pub trap: R,
    pub total: R,
}

impl<R: RealScalar> RateSet<R> {
    pub fn new(absorb: R, emit: R, loss: R, trap: R) -> Result<Self> {
        for (name, v) in [("absorb", absorb), ("emit", emit), ("loss", loss), ("trap", trap)] {
            if v < R::zero() {
                return Err(Error::Domain(format!("rate {name} must be non-negative")));
            }
        }
        Ok(Self { absorb, emit, loss, trap, total: absorb + emit + loss + trap })
    }
}

/// Derives the effective two-level rates from the ladder and its environment:
///
///   Γ_absorb = κ(ω_good) n(ω_good) Γ_{−1→0}
///   Γ_emit   = κ(ω_good) (n(ω_good)+1) Γ_{0→−1}
///   Γ_loss   = κ(ω_bad) (n(ω_bad)+1) Γ_{−1→−2}
///
/// with ω_good = ω_{0→−1} and ω_bad = ω_{−1→−2} read off the shifted ladder.
pub fn engineered_rates<R: RealScalar>(
    ladder: &DickeLadder<R>,
    sd: &SpectralDensityModel<R>,
    occ: &OccupationModel<R>,
    gamma: R,
    trap_rate: R,
) -> Result<RateSet<R>> {
    let n = ladder.n_atoms;
    if n < 4 || n % 2 != 0 {
        return Err(Error::Domain(format!(
            "the effective two-level construction needs even N >= 4 (levels M = 0, -1, -2), got {n}"
        )));
    }
    let mid = ladder.mid_level()?;
    let omega_good = ladder.frequency_from(mid);
    let omega_bad = ladder.frequency_from(mid - 1);

    let kappa_good = sd.kappa(omega_good)?;
    let kappa_bad = sd.kappa(omega_bad)?;
    let n_good = occ.occupation(omega_good)?;
    let n_bad = occ.occupation(omega_bad)?;

    let m0 = ladder.levels[mid].m;
    let m_minus1 = ladder.levels[mid - 1].m;
    let rate_down_good = transition_rate_of(n, m0, TransitionKind::Emit, gamma)?;
    let rate_up_good = transition_rate_of(n, m_minus1, TransitionKind::Absorb, gamma)?;
    let rate_down_bad = transition_rate_of(n, m_minus1, TransitionKind::Emit, gamma)?;

    RateSet::new(
        kappa_good * n_good * rate_up_good,
        kappa_good * (n_good + R::one()) * rate_down_good,
        kappa_bad * (n_bad + R::one()) * rate_down_bad,
        trap_rate,
    )
}

fn transition_rate_of<R: RealScalar>(
    n: usize,
    m: crate::dicke::HalfInt,
    kind: TransitionKind,
    gamma: R,
) -> Result<R> {
    crate::dicke::transition_rate(n, m, kind, gamma)
}
