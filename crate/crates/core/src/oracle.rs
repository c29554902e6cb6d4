//! Time-domain cross-check of the linear sideband solver.
//!
//! The mean-field equations of motion are integrated from rest with both
//! pump and probe on. Once transients have died out, each variable is fitted
//! to `O + dO- e^{-i eta t} + dO+ e^{i eta t}` and the fitted sidebands are
//! compared with the frequency-domain solution. Nothing here reuses the
//! steady-state or sideband algebra.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluctuations::solve_fluctuations;
use crate::linalg::{solve_with_residual, DenseMatrix};
use crate::num::{cx, re, rel_dev, Cplx, Real};
use crate::ode::{integrate, Dopri5Options, OdeSystem};
use crate::params::{derive_rates, DerivedRates, PhysicalParams};
use crate::sagnac::SagnacSplit;
use crate::steady_state::{displacement_upper_bound, solve_fixed_point, FixedPointOptions};

/// State layout: `[Re a, Im a, Re b, Im b, Re s, Im s, x, v]`.
pub const STATE_DIM: usize = 8;

/// Mean-field equations of motion in the frame of the pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanField<T: Real> {
    pub rates: DerivedRates<T>,
    /// Probe-pump offset.
    pub eta: T,
}

impl<T: Real> MeanField<T> {
    /// Angular momentum of the ring, `m r^2 Omega`; constant in time.
    pub fn p_theta(&self) -> T {
        let r = &self.rates;
        r.mass * r.radius * r.radius * r.spin_rate
    }
}

impl<T: Real> OdeSystem<T> for MeanField<T> {
    fn dim(&self) -> usize {
        STATE_DIM
    }

    fn rhs(&self, t: T, y: &[T], dy: &mut [T]) {
        let r = &self.rates;
        let a = cx(y[0], y[1]);
        let b = cx(y[2], y[3]);
        let s = cx(y[4], y[5]);
        let x = y[6];
        let v = y[7];
        let i = cx(T::zero(), T::one());
        let phase = -self.eta * t;
        let drive = re(r.sqrt_kappa_ex()) * (re(r.eps_l) + cx(phase.cos(), phase.sin()) * r.eps_p);
        let da = -(cx(r.beta, r.delta_ca)) * a + i * a * (r.g * x) - i * s * r.j + drive;
        let db = -(cx(r.beta, r.delta_cb)) * b + i * b * (r.g * x) - i * s * r.j;
        let ds = -i * r.delta_eg_complex() * s - i * (a + b) * r.j;
        let pt = self.p_theta();
        let centrifugal = pt * pt / (r.mass * r.mass * r.radius * r.radius * r.radius);
        let dv = -r.omega_m * r.omega_m * x - r.gamma_m * v
            + r.photon_acceleration() * (a.norm_sqr() + b.norm_sqr())
            + centrifugal;
        dy[0] = da.re;
        dy[1] = da.im;
        dy[2] = db.re;
        dy[3] = db.im;
        dy[4] = ds.re;
        dy[5] = ds.im;
        dy[6] = v;
        dy[7] = dv;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub a: Vec<Cplx<T>>,
    pub b: Vec<Cplx<T>>,
    pub sigma: Vec<Cplx<T>>,
    pub x: Vec<T>,
    pub v: Vec<T>,
    pub p_theta: T,
}

/// Absolute tolerances scaled to the largest amplitude each variable can
/// reach, so the error control is meaningful for every component.
pub fn default_ode_options<T: Real>(rates: &DerivedRates<T>, rtol: T) -> Dopri5Options<T> {
    let amp = (rates.sqrt_kappa_ex() * (rates.eps_l + rates.eps_p) / rates.beta).max(T::lit(1e-30));
    let emitter =
        (rates.j * amp / rates.delta_eg_complex().norm().max(rates.beta)).max(amp * T::lit(1e-6));
    let x_scale = displacement_upper_bound(rates)
        .abs()
        .max(rates.spin_displacement().abs())
        .max(T::lit(1e-30));
    let v_scale = x_scale * rates.omega_m;
    let f = rtol * T::lit(1e-2);
    Dopri5Options {
        rtol,
        atol: vec![
            f * amp,
            f * amp,
            f * amp,
            f * amp,
            f * emitter,
            f * emitter,
            f * x_scale,
            f * v_scale,
        ],
        ..Default::default()
    }
}

/// Integrates from `initial` at `t = 0` to `t_end`, recording `count`
/// uniform samples of spacing `dt` that end one step before `t_end`.
pub fn integrate_mean_field<T: Real>(
    system: &MeanField<T>,
    initial: &[T; STATE_DIM],
    t_end: T,
    dt: T,
    count: usize,
    opts: &Dopri5Options<T>,
) -> Result<Trajectory<T>> {
    let r = &system.rates;
    let fastest = r
        .omega_m
        .max(r.delta_ca.abs())
        .max(r.delta_cb.abs())
        .max(r.beta)
        .max(system.eta.abs());
    if !(dt > T::zero()) || dt * fastest > T::FRAC_PI_2() {
        return Err(Error::validation(
            "dt",
            "sampling must resolve the fastest rate (4 samples per period)",
        ));
    }
    let n = T::from_usize(count).unwrap();
    let t_rec = t_end - n * dt;
    if t_rec < T::zero() {
        return Err(Error::validation(
            "t_end",
            "recording window exceeds the integration span",
        ));
    }
    let times: Vec<T> = (0..count)
        .map(|k| t_rec + T::from_usize(k).unwrap() * dt)
        .collect();
    let sol = integrate(system, T::zero(), initial, t_end, &times, opts)?;
    let mut tr = Trajectory {
        times,
        a: Vec::with_capacity(count),
        b: Vec::with_capacity(count),
        sigma: Vec::with_capacity(count),
        x: Vec::with_capacity(count),
        v: Vec::with_capacity(count),
        p_theta: system.p_theta(),
    };
    for y in sol.samples {
        tr.a.push(cx(y[0], y[1]));
        tr.b.push(cx(y[2], y[3]));
        tr.sigma.push(cx(y[4], y[5]));
        tr.x.push(y[6]);
        tr.v.push(y[7]);
    }
    Ok(tr)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandFit<T: Real> {
    pub dc: Cplx<T>,
    /// Coefficient of `e^{-i eta t}`.
    pub minus: Cplx<T>,
    /// Coefficient of `e^{+i eta t}`.
    pub plus: Cplx<T>,
    /// `||signal - fit|| / ||signal||`.
    pub residual: T,
}

/// Least-squares fit of `signal(t)` to `c0 + c- e^{-i eta t} + c+ e^{i eta t}`.
pub fn fit_sidebands<T: Real>(times: &[T], signal: &[Cplx<T>], eta: T) -> Result<SidebandFit<T>> {
    if times.len() != signal.len() || times.len() < 3 {
        return Err(Error::validation(
            "signal",
            "need at least 3 samples matching the time grid",
        ));
    }
    let basis = |t: T| {
        let ph = eta * t;
        let em = cx(ph.cos(), -ph.sin());
        [re(T::one()), em, em.conj()]
    };
    let mut gram = DenseMatrix::zeros(3);
    let mut rhs = vec![re(T::zero()); 3];
    for (&t, &s) in times.iter().zip(signal) {
        let phi = basis(t);
        for i in 0..3 {
            for j in 0..3 {
                gram[(i, j)] += phi[i].conj() * phi[j];
            }
            rhs[i] += phi[i].conj() * s;
        }
    }
    let (c, _) = solve_with_residual(&gram, &rhs, "sideband fit")?;
    let mut res = T::zero();
    let mut norm = T::zero();
    for (&t, &s) in times.iter().zip(signal) {
        let phi = basis(t);
        let fit = c[0] * phi[0] + c[1] * phi[1] + c[2] * phi[2];
        res += (s - fit).norm_sqr();
        norm += s.norm_sqr();
    }
    let residual = if norm > T::zero() {
        (res / norm).sqrt()
    } else {
        res.sqrt()
    };
    Ok(SidebandFit {
        dc: c[0],
        minus: c[1],
        plus: c[2],
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demodulated<T: Real> {
    pub a: SidebandFit<T>,
    pub b: SidebandFit<T>,
    pub sigma: SidebandFit<T>,
    pub x: SidebandFit<T>,
}

/// Fits the last `n_periods` probe periods of a trajectory.
pub fn demodulate<T: Real>(
    tr: &Trajectory<T>,
    eta: T,
    n_periods: usize,
    limit: T,
) -> Result<Demodulated<T>> {
    if tr.times.len() < 2 || n_periods == 0 {
        return Err(Error::validation("n_periods", "need a nonempty window"));
    }
    let dt = tr.times[1] - tr.times[0];
    let window = T::from_usize(n_periods).unwrap() * T::TAU() / eta.abs();
    let keep = ((window / dt).round().to_usize().unwrap_or(0)).min(tr.times.len());
    if keep < 3 {
        return Err(Error::validation(
            "n_periods",
            "window shorter than three samples",
        ));
    }
    let from = tr.times.len() - keep;
    let t = &tr.times[from..];
    let xs: Vec<Cplx<T>> = tr.x[from..].iter().map(|&v| re(v)).collect();
    let out = Demodulated {
        a: fit_sidebands(t, &tr.a[from..], eta)?,
        b: fit_sidebands(t, &tr.b[from..], eta)?,
        sigma: fit_sidebands(t, &tr.sigma[from..], eta)?,
        x: fit_sidebands(t, &xs, eta)?,
    };
    let worst = [
        out.a.residual,
        out.b.residual,
        out.sigma.residual,
        out.x.residual,
    ]
    .into_iter()
    .fold(T::zero(), T::max);
    if worst > limit {
        return Err(Error::Unsettled {
            ratio: worst.to_f64_lossy(),
            limit: limit.to_f64_lossy(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions<T: Real> {
    /// Probe power multiplier applied before both paths run.
    pub probe_scale: T,
    pub n_periods: usize,
    pub samples_per_period: usize,
    /// Settling time in units of the slowest relaxation time.
    pub settle_factor: T,
    pub rtol: T,
    pub fit_limit: T,
    pub split: SagnacSplit,
}

impl<T: Real> Default for OracleOptions<T> {
    fn default() -> Self {
        Self {
            probe_scale: T::lit(1e-3),
            n_periods: 200,
            samples_per_period: 16,
            settle_factor: T::lit(25.0),
            rtol: T::lit(1e-10),
            fit_limit: T::lit(1e-3),
            split: SagnacSplit::Opposite,
        }
    }
}

/// Slowest relaxation rate among the variables that are actually excited.
pub fn slowest_rate<T: Real>(rates: &DerivedRates<T>) -> Result<T> {
    let mut slow = rates.beta.min(rates.gamma_m / T::lit(2.0));
    if rates.j != T::zero() {
        slow = slow.min(rates.gamma_star);
    }
    if !(slow > T::zero()) {
        return Err(Error::Domain(
            "an undamped degree of freedom never settles".into(),
        ));
    }
    Ok(slow)
}

/// Runs the time-domain model at one probe offset and demodulates it.
pub fn simulate_sidebands<T: Real>(
    rates: &DerivedRates<T>,
    eta: T,
    opts: &OracleOptions<T>,
) -> Result<Demodulated<T>> {
    if !(eta.abs() > T::zero()) {
        return Err(Error::validation("eta", "probe offset must be nonzero"));
    }
    let system = MeanField { rates: *rates, eta };
    let period = T::TAU() / eta.abs();
    let spp = opts.samples_per_period.max(4);
    let dt = period / T::from_usize(spp).unwrap();
    let count = opts.n_periods * spp;
    let settle = opts.settle_factor / slowest_rate(rates)?;
    let t_end = settle + T::from_usize(opts.n_periods).unwrap() * period;
    let tr = integrate_mean_field(
        &system,
        &[T::zero(); STATE_DIM],
        t_end,
        dt,
        count,
        &default_ode_options(rates, opts.rtol),
    )?;
    demodulate(&tr, eta, opts.n_periods, opts.fit_limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyRow {
    pub eta: f64,
    pub dev_da: f64,
    pub dev_db: f64,
    pub dev_dx: f64,
    pub pass: bool,
}

/// Compares the time-domain and sideband paths at every `eta`.
pub fn verify_against_linear<T: Real>(
    p: &PhysicalParams<T>,
    etas: &[T],
    tol: T,
    opts: &OracleOptions<T>,
) -> Result<Vec<VerifyRow>> {
    if etas.is_empty() {
        return Err(Error::validation("eta", "need at least one probe offset"));
    }
    let mut q = *p;
    q.probe_power *= opts.probe_scale;
    let rates = derive_rates(&q, opts.split)?;
    let ss = solve_fixed_point(&rates, &FixedPointOptions::default())?;
    etas.par_iter()
        .map(|&eta| {
            let lin = solve_fluctuations(&rates, &ss, eta)?;
            let dm = simulate_sidebands(&rates, eta, opts)?;
            let dev_da = rel_dev(dm.a.minus, lin.da_minus).to_f64_lossy();
            let dev_db = rel_dev(dm.b.minus, lin.db_minus).to_f64_lossy();
            let dev_dx = rel_dev(dm.x.minus, lin.dx).to_f64_lossy();
            let t = tol.to_f64_lossy();
            Ok(VerifyRow {
                eta: eta.to_f64_lossy(),
                dev_da,
                dev_db,
                dev_dx,
                pass: dev_da <= t && dev_db <= t && dev_dx <= t,
            })
        })
        .collect()
}
