//! Time-series observables shared by every solver, and deterministic
//! mean/standard-error reduction for trajectory and disorder ensembles.

use crate::error::{Error, Result};
use crate::scalar::{num, RealScalar};

/// Per-time observables of one run: level populations, optional trap-site
/// population, extraction current, cumulative extracted excitons, and the
/// radiative emission flux.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries<R> {
    pub times: Vec<R>,
    /// `populations[k][i]` = population of level i at grid point k. For the
    /// ladder solvers i indexes the rungs by excitation number; for the
    /// site-basis solver it indexes total-excitation sectors.
    pub populations: Vec<Vec<R>>,
    pub trap_population: Option<Vec<R>>,
    pub trap_current: Vec<R>,
    /// Cumulative excitons removed through the trap channel.
    pub extracted: Vec<R>,
    /// Instantaneous radiative emission flux.
    pub emission_rate: Vec<R>,
}

impl<R: RealScalar> ObservableSeries<R> {
    pub fn with_capacity(n_times: usize) -> Self {
        Self {
            times: Vec::with_capacity(n_times),
            populations: Vec::with_capacity(n_times),
            trap_population: None,
            trap_current: Vec::with_capacity(n_times),
            extracted: Vec::with_capacity(n_times),
            emission_rate: Vec::with_capacity(n_times),
        }
    }

    /// Flattens the record into fixed-order columns for ensemble reduction.
    fn flatten(&self) -> Vec<R> {
        let mut out = Vec::new();
        for row in &self.populations {
            out.extend_from_slice(row);
        }
        if let Some(tp) = &self.trap_population {
            out.extend_from_slice(tp);
        }
        out.extend_from_slice(&self.trap_current);
        out.extend_from_slice(&self.extracted);
        out.extend_from_slice(&self.emission_rate);
        out
    }

    fn unflatten(&self, data: &[R]) -> Self {
        let mut it = data.iter().copied();
        let mut take = |n: usize| -> Vec<R> { (&mut it).take(n).collect() };
        let populations: Vec<Vec<R>> =
            self.populations.iter().map(|row| take(row.len())).collect();
        let trap_population =
            self.trap_population.as_ref().map(|tp| take(tp.len()));
        let trap_current = take(self.trap_current.len());
        let extracted = take(self.extracted.len());
        let emission_rate = take(self.emission_rate.len());
        Self {
            times: self.times.clone(),
            populations,
            trap_population,
            trap_current,
            extracted,
            emission_rate,
        }
    }
}

/// Ensemble mean and per-observable standard error on a shared grid.
#[derive(Debug, Clone)]
pub struct EnsembleResult<R> {
    pub mean: ObservableSeries<R>,
    pub stderr: ObservableSeries<R>,
    pub n_members: usize,
}

/// Averages the records produced by `member(index)` for indices `0..n`.
///
/// Members are evaluated in parallel but accumulated in fixed blocks of 64 in
/// index order, so parallel and serial reductions produce bit-identical
/// results.
pub fn ensemble_average<R, F>(n: usize, member: F) -> Result<EnsembleResult<R>>
where
    R: RealScalar + Send + Sync,
    F: Fn(usize) -> Result<ObservableSeries<R>> + Send + Sync,
{
    use rayon::prelude::*;

    if n == 0 {
        return Err(Error::Config("ensemble needs at least one member".into()));
    }
    const BLOCK: usize = 64;
    let n_blocks = n.div_ceil(BLOCK);

    // Welford within blocks, Chan combination across blocks, in fixed index
    // order regardless of scheduling.
    struct Block<R> {
        template: ObservableSeries<R>,
        count: usize,
        mean: Vec<R>,
        m2: Vec<R>,
    }

    let blocks: Vec<Result<Block<R>>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(n);
            let first = member(lo)?;
            let mean = first.flatten();
            let mut m2 = vec![R::zero(); mean.len()];
            let mut mean = mean;
            let mut count = 1usize;
            for i in lo + 1..hi {
                let rec = member(i)?;
                let flat = rec.flatten();
                if flat.len() != mean.len() {
                    return Err(Error::Numerical(
                        "ensemble members produced inconsistent observable shapes".into(),
                    ));
                }
                count += 1;
                let cf = num::<R>(count as f64);
                for (j, &x) in flat.iter().enumerate() {
                    let delta = x - mean[j];
                    mean[j] += delta / cf;
                    m2[j] += delta * (x - mean[j]);
                }
            }
            Ok(Block { template: first, count, mean, m2 })
        })
        .collect();

    let mut iter = blocks.into_iter();
    let mut acc = iter.next().unwrap()?;
    for b in iter {
        let b = b?;
        let na = num::<R>(acc.count as f64);
        let nb = num::<R>(b.count as f64);
        let nab = na + nb;
        for j in 0..acc.mean.len() {
            let delta = b.mean[j] - acc.mean[j];
            acc.mean[j] += delta * nb / nab;
            acc.m2[j] += b.m2[j] + delta * delta * na * nb / nab;
        }
        acc.count += b.count;
    }

    let nf = num::<R>(n as f64);
    let stderr_flat: Vec<R> = acc
        .m2
        .iter()
        .map(|&m2| {
            if n < 2 {
                R::zero()
            } else {
                let var = (m2 / (nf - R::one())).max(R::zero());
                (var / nf).sqrt()
            }
        })
        .collect();

    Ok(EnsembleResult {
        mean: acc.template.unflatten(&acc.mean),
        stderr: acc.template.unflatten(&stderr_flat),
        n_members: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(x: f64) -> ObservableSeries<f64> {
        ObservableSeries {
            times: vec![0.0, 1.0],
            populations: vec![vec![x, 1.0 - x], vec![x * x, 1.0 - x * x]],
            trap_population: Some(vec![0.1 * x, 0.2 * x]),
            trap_current: vec![x, 2.0 * x],
            extracted: vec![0.0, x],
            emission_rate: vec![x, x / 2.0],
        }
    }

    #[test]
    fn single_member_mean_is_identity() {
        let res = ensemble_average(1, |_| Ok(record(0.3))).unwrap();
        assert_eq!(res.mean, record(0.3));
        assert!(res.stderr.trap_current.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn mean_and_stderr_of_two_point_ensemble() {
        let res = ensemble_average(2, |i| Ok(record(if i == 0 { 0.2 } else { 0.4 }))).unwrap();
        assert!((res.mean.trap_current[0] - 0.3).abs() < 1e-15);
        // sample sd = 0.1414.., stderr = sd/sqrt(2) = 0.1
        assert!((res.stderr.trap_current[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn parallel_reduction_matches_serial() {
        let many = ensemble_average(500, |i| Ok(record((i as f64).sin().abs()))).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial =
            pool.install(|| ensemble_average(500, |i| Ok(record((i as f64).sin().abs()))))
                .unwrap();
        for (a, b) in many.mean.flatten().iter().zip(serial.mean.flatten().iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let res = ensemble_average(2, |i| {
            let mut r = record(0.5);
            if i == 1 {
                r.trap_current.push(0.0);
            }
            Ok(r)
        });
        assert!(res.is_err());
    }
}
