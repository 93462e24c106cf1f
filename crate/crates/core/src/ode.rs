//! Adaptive embedded Runge–Kutta integration for the density-operator and
//! state-vector equations of motion.
//!
//! Dormand–Prince 5(4) with standard step control. States are flat complex
//! vectors; callers map matrices in and out.

use nalgebra::DVector;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{num, RealScalar};

type State<R> = DVector<Complex<R>>;

// Dormand-Prince 5(4) tableau
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One trial Dormand-Prince step; returns (5th-order solution, error estimate).
fn dp_step<R, F>(rhs: &F, y: &State<R>, h: R) -> (State<R>, R)
where
    R: RealScalar,
    F: Fn(&State<R>) -> State<R>,
{
    let mut k: Vec<State<R>> = Vec::with_capacity(7);
    k.push(rhs(y));
    for (i, row) in A.iter().enumerate() {
        let mut yi = y.clone();
        for (j, &aij) in row.iter().enumerate().take(i + 1) {
            if aij != 0.0 {
                yi.axpy(Complex::new(h * num::<R>(aij), R::zero()), &k[j], Complex::new(R::one(), R::zero()));
            }
        }
        k.push(rhs(&yi));
    }
    let mut y5 = y.clone();
    let mut err = State::<R>::zeros(y.len());
    for (i, ki) in k.iter().enumerate() {
        if B5[i] != 0.0 {
            y5.axpy(Complex::new(h * num::<R>(B5[i]), R::zero()), ki, Complex::new(R::one(), R::zero()));
        }
        let d = B5[i] - B4[i];
        if d != 0.0 {
            err.axpy(Complex::new(h * num::<R>(d), R::zero()), ki, Complex::new(R::one(), R::zero()));
        }
    }
    // scaled max-norm error
    let mut e = R::zero();
    for (ei, yi) in err.iter().zip(y5.iter()) {
        let scale = R::one() + yi.norm_sqr().sqrt();
        let m = ei.norm_sqr().sqrt() / scale;
        if m > e {
            e = m;
        }
    }
    (y5, e)
}

/// Performs one error-accepted Dormand-Prince step of size at most `h_cap`,
/// starting from trial size `h_init`. Returns the new state, the step
/// actually taken, and the suggested next step.
pub(crate) fn one_accepted_step<R, F>(
    rhs: &F,
    y: &State<R>,
    h_init: R,
    h_cap: R,
    tol: R,
    h_min: R,
) -> Result<(State<R>, R, R)>
where
    R: RealScalar,
    F: Fn(&State<R>) -> State<R>,
{
    let mut h_try = h_init.min(h_cap);
    loop {
        let (y_new, err) = dp_step(rhs, y, h_try);
        let err_ratio = err / tol;
        if err_ratio <= R::one() {
            let grow = if err_ratio > R::zero() {
                (num::<R>(0.9) * err_ratio.powf(num::<R>(-0.2))).min(num::<R>(5.0))
            } else {
                num::<R>(5.0)
            };
            return Ok((y_new, h_try, h_try * grow));
        }
        let shrink = (num::<R>(0.9) * err_ratio.powf(num::<R>(-0.2))).max(num::<R>(0.2));
        h_try = h_try * shrink;
        if h_try < h_min {
            return Err(Error::Numerical(
                "step size underflow: the generator is too stiff for the explicit integrator \
                 at this tolerance; reduce rates or refine the grid"
                    .into(),
            ));
        }
    }
}

/// Integrates dy/dt = rhs(y) across `t_grid`, calling `observe(index, t, y)`
/// at every grid point (including t_grid[0]). Local error per step is held at
/// `tol` in a scaled max-norm.
pub fn integrate_adaptive<R, F, O>(
    rhs: F,
    y0: &State<R>,
    t_grid: &[R],
    tol: R,
    mut observe: O,
) -> Result<()>
where
    R: RealScalar,
    F: Fn(&State<R>) -> State<R>,
    O: FnMut(usize, R, &State<R>),
{
    if t_grid.len() < 2 {
        return Err(Error::Config("time grid needs at least two points".into()));
    }
    for w in t_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config("time grid must be strictly increasing".into()));
        }
    }
    if tol <= R::zero() {
        return Err(Error::Config("tolerance must be positive".into()));
    }

    let span = *t_grid.last().unwrap() - t_grid[0];
    let h_min = span * num::<R>(1e-14);
    let max_steps = 50_000_000usize;

    let mut y = y0.clone();
    observe(0, t_grid[0], &y);
    let mut h = (t_grid[1] - t_grid[0]) * num::<R>(0.1);
    let mut steps = 0usize;

    for (idx, pair) in t_grid.windows(2).enumerate() {
        let (t_start, t_target) = (pair[0], pair[1]);
        let mut t = t_start;
        while t < t_target {
            let mut h_try = h.min(t_target - t);
            loop {
                steps += 1;
                if steps > max_steps {
                    return Err(Error::Numerical("step budget exhausted".into()));
                }
                let (y_new, err) = dp_step(&rhs, &y, h_try);
                let err_ratio = err / tol;
                if err_ratio <= R::one() {
                    t = t + h_try;
                    y = y_new;
                    // PI-free growth clamp
                    let grow = if err_ratio > R::zero() {
                        (num::<R>(0.9) * err_ratio.powf(num::<R>(-0.2))).min(num::<R>(5.0))
                    } else {
                        num::<R>(5.0)
                    };
                    h = (h_try * grow).min(span);
                    break;
                }
                let shrink =
                    (num::<R>(0.9) * err_ratio.powf(num::<R>(-0.2))).max(num::<R>(0.2));
                h_try = h_try * shrink;
                if h_try < h_min {
                    return Err(Error::Numerical(
                        "step size underflow: the generator is too stiff for the explicit \
                         integrator at this tolerance; reduce rates or refine the grid"
                            .into(),
                    ));
                }
            }
        }
        observe(idx + 1, t_target, &y);
    }
    Ok(())
}

/// Single classical RK4 step, used for jump-time bisection where the step
/// size is already below the accepted adaptive step.
pub fn rk4_step<R, F>(rhs: &F, y: &State<R>, h: R) -> State<R>
where
    R: RealScalar,
    F: Fn(&State<R>) -> State<R>,
{
    let one = Complex::new(R::one(), R::zero());
    let ch = |x: f64| Complex::new(h * num::<R>(x), R::zero());
    let k1 = rhs(y);
    let mut y2 = y.clone();
    y2.axpy(ch(0.5), &k1, one);
    let k2 = rhs(&y2);
    let mut y3 = y.clone();
    y3.axpy(ch(0.5), &k2, one);
    let k3 = rhs(&y3);
    let mut y4 = y.clone();
    y4.axpy(ch(1.0), &k3, one);
    let k4 = rhs(&y4);
    let mut out = y.clone();
    out.axpy(ch(1.0 / 6.0), &k1, one);
    out.axpy(ch(1.0 / 3.0), &k2, one);
    out.axpy(ch(1.0 / 3.0), &k3, one);
    out.axpy(ch(1.0 / 6.0), &k4, one);
    out
}
