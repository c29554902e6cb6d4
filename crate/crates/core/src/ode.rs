//! Dormand-Prince 5(4) with adaptive steps and continuous output.

use crate::error::{Error, Result};
use crate::num::Real;

pub trait OdeSystem<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dopri5Options<T: Real> {
    pub rtol: T,
    /// Per-component absolute tolerance; a single entry applies to all.
    pub atol: Vec<T>,
    pub h_init: Option<T>,
    pub h_max: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> Default for Dopri5Options<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-9),
            atol: vec![T::lit(1e-12)],
            h_init: None,
            h_max: None,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dopri5Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T: Real> {
    pub y_end: Vec<T>,
    /// States at the requested sample times, in order.
    pub samples: Vec<Vec<T>>,
    pub stats: Dopri5Stats,
}

struct Tableau<T> {
    c: [T; 7],
    a: [[T; 6]; 7],
    e: [T; 7],
    d: [T; 7],
}

fn tableau<T: Real>() -> Tableau<T> {
    let f = |n: f64, d: f64| T::lit(n / d);
    let z = T::zero();
    Tableau {
        c: [
            z,
            f(1., 5.),
            f(3., 10.),
            f(4., 5.),
            f(8., 9.),
            T::one(),
            T::one(),
        ],
        a: [
            [z; 6],
            [f(1., 5.), z, z, z, z, z],
            [f(3., 40.), f(9., 40.), z, z, z, z],
            [f(44., 45.), f(-56., 15.), f(32., 9.), z, z, z],
            [
                f(19372., 6561.),
                f(-25360., 2187.),
                f(64448., 6561.),
                f(-212., 729.),
                z,
                z,
            ],
            [
                f(9017., 3168.),
                f(-355., 33.),
                f(46732., 5247.),
                f(49., 176.),
                f(-5103., 18656.),
                z,
            ],
            [
                f(35., 384.),
                z,
                f(500., 1113.),
                f(125., 192.),
                f(-2187., 6784.),
                f(11., 84.),
            ],
        ],
        e: [
            f(71., 57600.),
            z,
            f(-71., 16695.),
            f(71., 1920.),
            f(-17253., 339200.),
            f(22., 525.),
            f(-1., 40.),
        ],
        d: [
            f(-12715105075., 11282082432.),
            z,
            f(87487479700., 32700410799.),
            f(-10690763975., 1880347072.),
            f(701980252875., 199316789632.),
            f(-1453857185., 822651844.),
            f(69997945., 29380423.),
        ],
    }
}

fn atol_at<T: Real>(atol: &[T], i: usize) -> T {
    if atol.len() == 1 {
        atol[0]
    } else {
        atol[i]
    }
}

fn scaled_norm<T: Real>(v: &[T], y: &[T], opts: &Dopri5Options<T>) -> T {
    let n = T::from_usize(v.len()).unwrap();
    let s: T = v
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (vi, yi))| {
            let sc = atol_at(&opts.atol, i) + opts.rtol * yi.abs();
            let q = *vi / sc;
            q * q
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<T: Real, S: OdeSystem<T>>(
    sys: &S,
    t0: T,
    y0: &[T],
    f0: &[T],
    dir_span: T,
    opts: &Dopri5Options<T>,
    evals: &mut usize,
) -> T {
    let d0 = scaled_norm(y0, y0, opts);
    let d1 = scaled_norm(f0, y0, opts);
    let small = T::lit(1e-5);
    let mut h0 = if d0 < small || d1 < small {
        T::lit(1e-6) * dir_span
    } else {
        T::lit(0.01) * d0 / d1
    };
    h0 = h0.min(dir_span);
    let y1: Vec<T> = y0.iter().zip(f0).map(|(y, f)| *y + h0 * *f).collect();
    let mut f1 = vec![T::zero(); y0.len()];
    sys.rhs(t0 + h0, &y1, &mut f1);
    *evals += 1;
    let diff: Vec<T> = f1.iter().zip(f0).map(|(a, b)| *a - *b).collect();
    let d2 = scaled_norm(&diff, y0, opts) / h0;
    let m = d1.max(d2);
    let h1 = if m <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6) * dir_span)
    } else {
        (T::lit(0.01) / m).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1).min(dir_span)
}

/// Integrates from `t0` to `t_end`, recording the state at each of the
/// (ascending) `sample_times` from the continuous extension.
pub fn integrate<T: Real, S: OdeSystem<T>>(
    sys: &S,
    t0: T,
    y0: &[T],
    t_end: T,
    sample_times: &[T],
    opts: &Dopri5Options<T>,
) -> Result<Solution<T>> {
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::validation(
            "y0",
            "state length does not match the system",
        ));
    }
    if !(t_end > t0) {
        return Err(Error::validation("t_end", "must exceed the start time"));
    }
    if !(opts.rtol > T::zero())
        || opts.atol.is_empty()
        || (opts.atol.len() != 1 && opts.atol.len() != n)
    {
        return Err(Error::validation(
            "atol",
            "need positive rtol and 1 or dim absolute tolerances",
        ));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0])
        || sample_times.iter().any(|&s| s < t0 || s > t_end)
    {
        return Err(Error::validation(
            "sample_times",
            "must be ascending within [t0, t_end]",
        ));
    }

    let tab = tableau::<T>();
    let mut stats = Dopri5Stats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    sys.rhs(t, &y, &mut k[0]);
    stats.rhs_evals += 1;

    let span = t_end - t0;
    let mut h = match opts.h_init {
        Some(h) => h.min(span),
        None => initial_step(sys, t, &y, &k[0], span, opts, &mut stats.rhs_evals),
    };
    if let Some(hm) = opts.h_max {
        h = h.min(hm);
    }

    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;
    while next_sample < sample_times.len() && sample_times[next_sample] == t0 {
        samples.push(y.clone());
        next_sample += 1;
    }

    let mut stage = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    let mut err = vec![T::zero(); n];
    let mut rc: Vec<Vec<T>> = vec![vec![T::zero(); n]; 5];
    let mut last_rejected = false;
    let safety = T::lit(0.9);
    let fac_min = T::lit(0.2);
    let fac_max = T::lit(10.0);

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow {
                t: t.to_f64_lossy(),
                h: h.to_f64_lossy(),
            });
        }
        let h_floor = T::lit(16.0) * T::epsilon() * t.abs().max(span * T::epsilon());
        if h < h_floor {
            return Err(Error::StepUnderflow {
                t: t.to_f64_lossy(),
                h: h.to_f64_lossy(),
            });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = tab.a[s][j];
                    if a != T::zero() {
                        acc += h * a * kj[i];
                    }
                }
                stage[i] = acc;
            }
            let (_, tail) = k.split_at_mut(s);
            sys.rhs(t + tab.c[s] * h, &stage, &mut tail[0]);
            // Stage 7 is evaluated at the 5th-order solution (FSAL).
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }
        stats.rhs_evals += 6;

        for i in 0..n {
            let mut e = T::zero();
            for (s, ks) in k.iter().enumerate() {
                e += tab.e[s] * ks[i];
            }
            err[i] = h * e;
        }
        let mut en = T::zero();
        for i in 0..n {
            let sc = atol_at(&opts.atol, i) + opts.rtol * y[i].abs().max(y_new[i].abs());
            let q = err[i] / sc;
            en += q * q;
        }
        let en = (en / T::from_usize(n).unwrap()).sqrt();
        if !en.is_finite() {
            stats.rejected += 1;
            h *= fac_min;
            last_rejected = true;
            continue;
        }

        if en <= T::one() {
            // Continuous extension coefficients.
            for i in 0..n {
                let dy = y_new[i] - y[i];
                let bspl = h * k[0][i] - dy;
                rc[0][i] = y[i];
                rc[1][i] = dy;
                rc[2][i] = bspl;
                rc[3][i] = dy - h * k[6][i] - bspl;
                let mut acc = T::zero();
                for (s, ks) in k.iter().enumerate() {
                    acc += tab.d[s] * ks[i];
                }
                rc[4][i] = h * acc;
            }
            let t_new = if last { t_end } else { t + h };
            while next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                let theta = (sample_times[next_sample] - t) / h;
                let th1 = T::one() - theta;
                let v: Vec<T> = (0..n)
                    .map(|i| {
                        rc[0][i]
                            + theta
                                * (rc[1][i]
                                    + th1 * (rc[2][i] + theta * (rc[3][i] + th1 * rc[4][i])))
                    })
                    .collect();
                samples.push(v);
                next_sample += 1;
            }

            stats.accepted += 1;
            t = t_new;
            y.copy_from_slice(&y_new);
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);

            let mut fac = safety * en.max(T::lit(1e-10)).powf(T::lit(-0.2));
            fac = fac.max(fac_min).min(fac_max);
            if last_rejected {
                fac = fac.min(T::one());
            }
            h *= fac;
            if let Some(hm) = opts.h_max {
                h = h.min(hm);
            }
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (safety * en.powf(T::lit(-0.2))).max(fac_min);
            h *= fac;
            last_rejected = true;
        }
    }

    Ok(Solution {
        y_end: y,
        samples,
        stats,
    })
}
