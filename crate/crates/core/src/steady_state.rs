//! Mean-field fixed point of the pumped resonator.
//!
//! At a fixed displacement `x` the three complex amplitudes follow from a
//! 3x3 linear system; `x` itself is pushed by radiation pressure of both
//! modes plus the centrifugal load of the spinning ring. The coupled problem
//! is solved by damped fixed-point iteration on `x`. Without the emitter the
//! problem collapses to a real cubic, which is solved in closed form and used
//! as an independent cross-check.

use crate::error::{Error, Result};
use crate::linalg::{solve_with_residual, vec_norm, DenseMatrix};
use crate::num::{cx, re, Cplx, Real};
use crate::params::DerivedRates;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState<T: Real> {
    pub a_mean: Cplx<T>,
    pub b_mean: Cplx<T>,
    pub sigma_mean: Cplx<T>,
    /// Static displacement (m).
    pub x_mean: T,
    pub iterations: usize,
    /// Relative fixed-point residual `|F(x) - x| / max(|x|, x_floor)`.
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions<T: Real> {
    pub max_iter: usize,
    pub tol: T,
    /// Initial damping `lambda` in `x <- (1 - lambda) x + lambda F(x)`.
    pub damping: T,
    pub x_floor: T,
    /// Starting displacement; `None` starts from the centrifugal
    /// displacement alone.
    pub seed: Option<T>,
}

impl<T: Real> Default for FixedPointOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: T::lit(1e-10),
            damping: T::lit(0.5),
            x_floor: T::lit(1e-18),
            seed: None,
        }
    }
}

impl<T: Real> FixedPointOptions<T> {
    pub fn seeded(mut self, seed: T) -> Self {
        self.seed = Some(seed);
        self
    }
}

pub(crate) fn linear_residual_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

/// Solves the amplitude equations at fixed displacement `x`.
pub fn solve_fields_given_x<T: Real>(
    rates: &DerivedRates<T>,
    x: T,
) -> Result<(Cplx<T>, Cplx<T>, Cplx<T>)> {
    let zero = re(T::zero());
    let ij = cx(T::zero(), rates.j);
    let j = re(rates.j);
    let gx = rates.g * x;
    let m = DenseMatrix::from_rows(&[
        vec![cx(rates.beta, rates.delta_ca - gx), zero, ij],
        vec![zero, cx(rates.beta, rates.delta_cb - gx), ij],
        vec![j, j, rates.delta_eg_complex()],
    ]);
    let rhs = [re(rates.sqrt_kappa_ex() * rates.eps_l), zero, zero];
    let (sol, res) = solve_with_residual(&m, &rhs, "mean-field amplitude system")?;
    let bound = linear_residual_tol::<T>() * (m.norm_inf() * vec_norm(&sol) + vec_norm(&rhs));
    if res > bound {
        return Err(Error::Singular {
            context: format!("mean-field amplitude system at x = {x:e} (residual {res:e})"),
            pivot: f64::NAN,
            condition: crate::linalg::condition_estimate(&m).unwrap_or(f64::INFINITY),
        });
    }
    Ok((sol[0], sol[1], sol[2]))
}

/// Right-hand side of the displacement balance,
/// `hbar g (|a|^2 + |b|^2) / (m omega_m^2) + r (Omega/omega_m)^2`.
pub fn displacement_target<T: Real>(rates: &DerivedRates<T>, a: Cplx<T>, b: Cplx<T>) -> T {
    rates.photon_acceleration() / (rates.omega_m * rates.omega_m) * (a.norm_sqr() + b.norm_sqr())
        + rates.spin_displacement()
}

/// Upper bound on any fixed-point displacement. Energy balance of the
/// passive driven system gives `|a|^2 + |b|^2 <= kappa_ex eps_l^2 / beta^2`.
pub fn displacement_upper_bound<T: Real>(rates: &DerivedRates<T>) -> T {
    let photons = rates.kappa_ex * rates.eps_l * rates.eps_l / (rates.beta * rates.beta);
    rates.photon_acceleration() / (rates.omega_m * rates.omega_m) * photons
        + rates.spin_displacement()
}

fn state_at<T: Real>(rates: &DerivedRates<T>, x: T, floor: T) -> Result<(SteadyState<T>, T)> {
    let (a, b, s) = solve_fields_given_x(rates, x)?;
    let target = displacement_target(rates, a, b);
    let step = target - x;
    let residual = step.abs() / x.abs().max(floor);
    Ok((
        SteadyState {
            a_mean: a,
            b_mean: b,
            sigma_mean: s,
            x_mean: x,
            iterations: 0,
            residual,
        },
        step,
    ))
}

/// Damped fixed-point iteration for the displacement.
///
/// When the iterate starts to oscillate without contracting the damping is
/// halved and the iteration restarts from the best point seen. If damping
/// alone fails, a bracketed bisection on `F(x) - x` over the provable
/// interval `[r (Omega/omega_m)^2, upper bound]` finishes the job.
pub fn solve_fixed_point<T: Real>(
    rates: &DerivedRates<T>,
    opts: &FixedPointOptions<T>,
) -> Result<SteadyState<T>> {
    if !(opts.damping > T::zero() && opts.damping <= T::one()) {
        return Err(Error::validation("damping", "must lie in (0, 1]"));
    }
    let floor = opts.x_floor;
    let x_lo = rates.spin_displacement();
    let x_hi = displacement_upper_bound(rates);
    let mut x = opts.seed.unwrap_or(x_lo);
    let mut lambda = opts.damping;
    let min_lambda = T::lit(1e-6);

    let mut best = (x, T::infinity());
    let mut prev_step: Option<T> = None;
    let mut bad_streak = 0usize;
    let mut visited = (x, x);
    let mut last_residual = T::infinity();

    for it in 0..opts.max_iter {
        let (mut state, step) = state_at(rates, x, floor)?;
        last_residual = state.residual;
        visited = (visited.0.min(x), visited.1.max(x));
        if state.residual <= opts.tol {
            state.iterations = it + 1;
            return Ok(state);
        }
        if step.abs() < best.1 {
            best = (x, step.abs());
        }
        if let Some(p) = prev_step {
            let flipped = p * step < T::zero();
            let not_contracting = step.abs() >= T::lit(0.95) * p.abs();
            if not_contracting && (flipped || step.abs() > p.abs()) {
                bad_streak += 1;
            } else {
                bad_streak = 0;
            }
        }
        if bad_streak >= 2 {
            lambda /= T::lit(2.0);
            log::debug!("fixed point oscillating at iteration {it}; damping -> {lambda}");
            if lambda < min_lambda {
                break;
            }
            x = best.0;
            prev_step = None;
            bad_streak = 0;
            continue;
        }
        prev_step = Some(step);
        x += lambda * step;
    }

    log::debug!("damped iteration failed (residual {last_residual:e}); trying bracketed solve");
    bracketed_fixed_point(rates, opts, x_lo, x_hi).map_err(|_| Error::NonConvergence {
        iterations: opts.max_iter,
        residual: last_residual.to_f64_lossy(),
        lo: visited.0.to_f64_lossy(),
        hi: visited.1.to_f64_lossy(),
        damping: lambda.to_f64_lossy(),
    })
}

fn bracketed_fixed_point<T: Real>(
    rates: &DerivedRates<T>,
    opts: &FixedPointOptions<T>,
    lo: T,
    hi: T,
) -> Result<SteadyState<T>> {
    let floor = opts.x_floor;
    let h = |x: T| -> Result<T> { Ok(state_at(rates, x, floor)?.1) };
    // Scan for the sign change nearest the seed.
    let seed = opts.seed.unwrap_or(lo).max(lo).min(hi);
    let n = 4096usize;
    let grid: Vec<T> = (0..=n)
        .map(|i| lo + (hi - lo) * T::from_usize(i).unwrap() / T::from_usize(n).unwrap())
        .collect();
    let vals: Vec<T> = grid.iter().map(|&x| h(x)).collect::<Result<_>>()?;
    let mut brackets: Vec<(T, T)> = Vec::new();
    for i in 0..n {
        if vals[i] == T::zero() {
            brackets.push((grid[i], grid[i]));
        } else if vals[i] * vals[i + 1] < T::zero() {
            brackets.push((grid[i], grid[i + 1]));
        }
    }
    let (mut a, mut b) = *brackets
        .iter()
        .min_by(|p, q| {
            let dp = ((p.0 + p.1) / T::lit(2.0) - seed).abs();
            let dq = ((q.0 + q.1) / T::lit(2.0) - seed).abs();
            dp.partial_cmp(&dq).unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or_else(|| {
            Error::Domain("no sign change of F(x) - x in the admissible interval".into())
        })?;
    let mut ha = h(a)?;
    let mut iterations = 0;
    while iterations < 400 {
        iterations += 1;
        let mid = (a + b) / T::lit(2.0);
        let (mut state, step) = state_at(rates, mid, floor)?;
        if state.residual <= opts.tol || mid == a || mid == b {
            state.iterations = iterations;
            return Ok(state);
        }
        if ha * step <= T::zero() {
            b = mid;
        } else {
            a = mid;
            ha = step;
        }
    }
    Err(Error::Domain("bisection exhausted".into()))
}

/// Number of fixed points, counted by sign changes of `F(x) - x` on a fine
/// grid over the admissible interval.
pub fn count_branches<T: Real>(rates: &DerivedRates<T>) -> Result<usize> {
    if rates.j == T::zero() {
        return Ok(solve_no_qubit_cubic(rates)?.len());
    }
    let lo = rates.spin_displacement();
    let hi = displacement_upper_bound(rates);
    if !(hi > lo) {
        return Ok(1);
    }
    let span_in_linewidths = (rates.g * (hi - lo) / rates.beta).to_f64_lossy();
    let n = (20.0 * span_in_linewidths).clamp(2000.0, 1e6) as usize;
    let mut count = 0;
    let mut prev: Option<T> = None;
    for i in 0..=n {
        let x = lo + (hi - lo) * T::from_usize(i).unwrap() / T::from_usize(n).unwrap();
        let (a, b, _) = solve_fields_given_x(rates, x)?;
        let hval = displacement_target(rates, a, b) - x;
        if hval == T::zero() {
            count += 1;
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            if p * hval < T::zero() {
                count += 1;
            }
        }
        prev = Some(hval);
    }
    Ok(count.max(1))
}

/// Coefficients of the no-emitter displacement cubic.
///
/// With `w = g (x - x_spin) / beta` (radiation-pressure pull in linewidths),
/// `d = (Delta_ca - g x_spin) / beta` and `q` the dimensionless pump
/// strength, the balance reads `w (1 + (d - w)^2) = q`, i.e.
/// `w^3 - 2 d w^2 + (1 + d^2) w - q = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoQubitCubic<T: Real> {
    pub d: T,
    pub q: T,
}

impl<T: Real> NoQubitCubic<T> {
    pub fn new(rates: &DerivedRates<T>) -> Self {
        let x_spin = rates.spin_displacement();
        let d = (rates.delta_ca - rates.g * x_spin) / rates.beta;
        let a_coef = rates.photon_acceleration() / (rates.omega_m * rates.omega_m)
            * rates.kappa_ex
            * rates.eps_l
            * rates.eps_l;
        let q = rates.g * a_coef / (rates.beta * rates.beta * rates.beta);
        Self { d, q }
    }

    pub fn eval(&self, w: T) -> T {
        let s = self.d - w;
        w * (T::one() + s * s) - self.q
    }

    fn deriv(&self, w: T) -> T {
        let s = self.d - w;
        T::one() + s * s - T::lit(2.0) * w * s
    }

    /// All real roots, ascending.
    pub fn roots(&self) -> Vec<T> {
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        // Monic w^3 + a2 w^2 + a1 w + a0.
        let a2 = -two * self.d;
        let a1 = T::one() + self.d * self.d;
        let a0 = -self.q;
        let shift = a2 / three;
        let p = a1 - a2 * a2 / three;
        let qq = two * a2 * a2 * a2 / T::lit(27.0) - a2 * a1 / three + a0;
        let disc = qq * qq / T::lit(4.0) + p * p * p / T::lit(27.0);
        let mut raw: Vec<T> = if disc > T::zero() {
            let sq = disc.sqrt();
            let u = (-qq / two + sq).cbrt();
            let v = (-qq / two - sq).cbrt();
            vec![u + v - shift]
        } else {
            let r = (-p / three).sqrt();
            let arg = if r > T::zero() {
                (-qq / (two * r * r * r)).max(-T::one()).min(T::one())
            } else {
                T::zero()
            };
            let phi = arg.acos() / three;
            let tau = two * T::PI() / three;
            (0..3)
                .map(|k| two * r * (phi - tau * T::from_usize(k).unwrap()).cos() - shift)
                .collect()
        };
        for w in raw.iter_mut() {
            for _ in 0..8 {
                let f = self.eval(*w);
                let df = self.deriv(*w);
                if df == T::zero() {
                    break;
                }
                let next = *w - f / df;
                if !next.is_finite() {
                    break;
                }
                *w = next;
            }
        }
        raw.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let scale = self.d.abs().max(self.q.abs()).max(T::one());
        let mut out: Vec<T> = Vec::with_capacity(3);
        for w in raw {
            if out
                .last()
                .is_none_or(|&l: &T| (w - l).abs() > T::lit(1e-7) * scale)
            {
                out.push(w);
            }
        }
        out
    }
}

/// All steady states without the emitter (`J = 0`), ascending in `x`.
pub fn solve_no_qubit_cubic<T: Real>(rates: &DerivedRates<T>) -> Result<Vec<SteadyState<T>>> {
    if rates.j != T::zero() {
        return Err(Error::Domain("no-emitter cubic requires J = 0".to_string()));
    }
    let x_spin = rates.spin_displacement();
    let floor = T::lit(1e-18);
    let pack = |x: T| -> SteadyState<T> {
        let a =
            re(rates.sqrt_kappa_ex() * rates.eps_l) / cx(rates.beta, rates.delta_ca - rates.g * x);
        let target = displacement_target(rates, a, re(T::zero()));
        SteadyState {
            a_mean: a,
            b_mean: re(T::zero()),
            sigma_mean: re(T::zero()),
            x_mean: x,
            iterations: 0,
            residual: (target - x).abs() / x.abs().max(floor),
        }
    };
    if rates.g == T::zero() || rates.eps_l == T::zero() {
        return Ok(vec![pack(x_spin)]);
    }
    let cubic = NoQubitCubic::new(rates);
    Ok(cubic
        .roots()
        .into_iter()
        .map(|w| pack(x_spin + rates.beta * w / rates.g))
        .collect())
}
