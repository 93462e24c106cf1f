//! Brute-force site-basis oracles, independent of the library internals:
//! explicit 2^N vectors, ladder states built from the factorial-normalised
//! repeated application of the collective lowering operator, and hand-rolled
//! spin Hamiltonians.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type M = DMatrix<Complex<f64>>;
pub type V = DVector<Complex<f64>>;

pub fn c(x: f64) -> Complex<f64> {
    Complex::new(x, 0.0)
}

/// σ₋ acting on `site` of an n-qubit register (bit = excitation).
pub fn lower_site(n: usize, site: usize) -> M {
    let dim = 1 << n;
    let mut m = M::zeros(dim, dim);
    for b in 0..dim {
        if b >> site & 1 == 1 {
            m[(b ^ (1 << site), b)] = c(1.0);
        }
    }
    m
}

pub fn collective_lower(n: usize) -> M {
    let mut j = M::zeros(1 << n, 1 << n);
    for s in 0..n {
        j += lower_site(n, s);
    }
    j
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product::<f64>().max(1.0)
}

/// |J, M⟩ with k = J + M excitations, built as
/// √((J+M)!/(N!(J−M)!)) J₋^{(J−M)} |e…e⟩.
pub fn dicke_state(n: usize, k_exc: usize) -> V {
    let dim = 1 << n;
    let mut v = V::zeros(dim);
    v[dim - 1] = c(1.0); // all excited
    let jm = collective_lower(n);
    let drops = n - k_exc; // J - M
    for _ in 0..drops {
        v = &jm * v;
    }
    let norm = (factorial(k_exc) / (factorial(n) * factorial(drops))).sqrt();
    v * c(norm)
}

/// Hopping Hamiltonian Σ w_ij (σ₊^i σ₋^j + h.c.) from a symmetric weight
/// table given as (i, j, w) entries with i < j.
pub fn hopping_hamiltonian(n: usize, pairs: &[(usize, usize, f64)]) -> M {
    let dim = 1 << n;
    let mut h = M::zeros(dim, dim);
    for &(i, j, w) in pairs {
        for b in 0..dim {
            if b >> i & 1 == 1 && b >> j & 1 == 0 {
                let b2 = b ^ (1 << i) ^ (1 << j);
                h[(b2, b)] += c(w);
                h[(b, b2)] += c(w);
            }
        }
    }
    h
}

/// Ring nearest-neighbour pair table: the cyclic sum, which doubles the
/// single pair at N = 2.
pub fn ring_pairs(n: usize, omega: f64) -> Vec<(usize, usize, f64)> {
    let mut acc = std::collections::BTreeMap::<(usize, usize), f64>::new();
    for i in 0..n {
        let j = (i + 1) % n;
        let key = (i.min(j), i.max(j));
        *acc.entry(key).or_insert(0.0) += omega;
    }
    acc.into_iter().map(|((i, j), w)| (i, j, w)).collect()
}

/// All-pair table in the ordered-sum normalisation (2Ω per unordered pair).
pub fn all_pairs(n: usize, omega: f64) -> Vec<(usize, usize, f64)> {
    let mut v = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            v.push((i, j, 2.0 * omega));
        }
    }
    v
}

pub fn expectation(op: &M, psi: &V) -> f64 {
    (psi.adjoint() * op * psi)[(0, 0)].re
}

pub fn norm(v: &V) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Least-squares fit y = a + b x; returns (b, a, R²).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}
