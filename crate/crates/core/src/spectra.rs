//! Probe observables and sweeps.
//!
//! The steady state is solved once per spin rate; every probe detuning is
//! then an independent 7x7 solve, so detuning grids run as a parallel map.
//! Spin-rate scans follow a branch by seeding each fixed point from the
//! previous one unless continuation is switched off.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fluctuations::{solve_fluctuations, Fluctuations};
use crate::num::{re, wrap_phase, Cplx, Real};
use crate::params::{derive_rates, DerivedRates, PhysicalParams};
use crate::sagnac::SagnacSplit;
use crate::steady_state::{solve_fixed_point, FixedPointOptions, SteadyState};

/// How the swept probe detuning maps onto the probe-pump offset `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaPConvention {
    /// `delta_p = eta - omega_m`
    #[default]
    MechanicalSideband,
    /// `delta_p = eta - Delta_c`
    PumpDetuning,
}

impl FromStr for DeltaPConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mechanical" | "omega_m" => Ok(Self::MechanicalSideband),
            "pump" | "delta_c" => Ok(Self::PumpDetuning),
            other => Err(Error::validation(
                "delta_p_convention",
                format!("expected `mechanical` or `pump`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for DeltaPConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MechanicalSideband => "mechanical",
            Self::PumpDetuning => "pump",
        })
    }
}

/// Normalization of the two spectra entering the isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsolationNorm {
    /// Each spectrum divided by its own maximum over the grid.
    #[default]
    Max,
    Raw,
}

impl FromStr for IsolationNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Self::Max),
            "raw" => Ok(Self::Raw),
            other => Err(Error::validation(
                "isolation_norm",
                format!("expected `max` or `raw`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for IsolationNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Max => "max",
            Self::Raw => "raw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid<T: Real> {
    pub start: T,
    pub stop: T,
    pub count: usize,
}

impl<T: Real> SweepGrid<T> {
    pub fn new(start: T, stop: T, count: usize) -> Result<Self> {
        let g = Self { start, stop, count };
        g.validate()?;
        Ok(g)
    }

    /// The plotted window, -10..10 MHz with 2001 nodes.
    pub fn default_window() -> Self {
        Self {
            start: T::lit(-10e6),
            stop: T::lit(10e6),
            count: 2001,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::validation("points", "need at least 2 grid points"));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start < self.stop) {
            return Err(Error::validation(
                "from",
                "grid start must be finite and below stop",
            ));
        }
        Ok(())
    }

    pub fn node(&self, i: usize) -> T {
        let n = T::from_usize(self.count - 1).unwrap();
        let k = T::from_usize(i).unwrap();
        // Exact endpoints.
        if i + 1 == self.count {
            return self.stop;
        }
        self.start + (self.stop - self.start) * k / n
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.count).map(|i| self.node(i)).collect()
    }

    /// Default finite-difference step for group delays on this grid.
    pub fn delay_step(&self) -> T {
        (self.stop - self.start) / T::lit(1e6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions<T: Real> {
    pub split: SagnacSplit,
    pub convention: DeltaPConvention,
    pub isolation_norm: IsolationNorm,
    pub continuation: bool,
    pub fixed_point: FixedPointOptions<T>,
    /// Allowed relative change of the group delay when the step is halved.
    pub richardson_tol: T,
    /// Group delays smaller than this (s) are not subject to the step check.
    pub delay_floor: T,
}

impl<T: Real> Default for SpectrumOptions<T> {
    fn default() -> Self {
        Self {
            split: SagnacSplit::Opposite,
            convention: DeltaPConvention::MechanicalSideband,
            isolation_norm: IsolationNorm::Max,
            continuation: true,
            fixed_point: FixedPointOptions::default(),
            richardson_tol: T::lit(0.01),
            delay_floor: T::lit(1e-15),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint<T: Real> {
    pub delta_p: T,
    pub t: T,
    pub r: T,
    pub t_p_arg: T,
    pub tau_g: Option<T>,
}

/// Rates and steady state for one spin rate; the thing every probe
/// detuning is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<T: Real> {
    pub rates: DerivedRates<T>,
    pub steady: SteadyState<T>,
    pub convention: DeltaPConvention,
}

impl<T: Real> OperatingPoint<T> {
    pub fn new(p: &PhysicalParams<T>, opts: &SpectrumOptions<T>, seed: Option<T>) -> Result<Self> {
        let rates = derive_rates(p, opts.split)?;
        let mut fp = opts.fixed_point;
        if seed.is_some() {
            fp.seed = seed;
        }
        let steady = solve_fixed_point(&rates, &fp)?;
        Ok(Self {
            rates,
            steady,
            convention: opts.convention,
        })
    }

    pub fn eta(&self, delta_p: T) -> T {
        match self.convention {
            DeltaPConvention::MechanicalSideband => delta_p + self.rates.omega_m,
            DeltaPConvention::PumpDetuning => delta_p + self.rates.delta_c,
        }
    }

    pub fn fluctuations(&self, delta_p: T) -> Result<Fluctuations<T>> {
        solve_fluctuations(&self.rates, &self.steady, self.eta(delta_p))
    }

    /// `(T, R, t_p)` at one probe detuning.
    pub fn response(&self, delta_p: T) -> Result<(T, T, Cplx<T>)> {
        let fl = self
            .fluctuations(delta_p)
            .map_err(|e| at_point(delta_p, e))?;
        transmission_reflection(&fl, &self.rates)
    }

    pub fn point(&self, delta_p: T) -> Result<SpectrumPoint<T>> {
        let (t, r, tp) = self.response(delta_p)?;
        Ok(SpectrumPoint {
            delta_p,
            t,
            r,
            t_p_arg: tp.arg(),
            tau_g: None,
        })
    }

    fn phase(&self, delta_p: T) -> Result<T> {
        Ok(self.response(delta_p)?.2.arg())
    }

    fn central_difference(&self, delta_p: T, h: T) -> Result<T> {
        let lo = self.phase(delta_p - h)?;
        let mid = self.phase(delta_p)?;
        let hi = self.phase(delta_p + h)?;
        Ok((wrap_phase(mid - lo) + wrap_phase(hi - mid)) / (h + h))
    }

    /// Group delay `d arg t_p / d delta_p` by central difference, checked
    /// against the same estimate at half the step.
    pub fn group_delay(&self, delta_p: T, h: T, tol: T, floor: T) -> Result<T> {
        if !(h > T::zero() && h.is_finite()) {
            return Err(Error::validation(
                "delay_step",
                "must be positive and finite",
            ));
        }
        let coarse = self.central_difference(delta_p, h)?;
        let fine = self.central_difference(delta_p, h / T::lit(2.0))?;
        let change = (coarse - fine).abs();
        if change > tol * fine.abs() && change > floor {
            return Err(Error::StepInstability {
                delta_p: delta_p.to_f64_lossy(),
                coarse: coarse.to_f64_lossy(),
                fine: fine.to_f64_lossy(),
            });
        }
        Ok(coarse)
    }
}

fn at_point<T: Real>(delta_p: T, e: Error) -> Error {
    match e {
        e @ Error::AtPoint { .. } => e,
        e => Error::AtPoint {
            delta_p: delta_p.to_f64_lossy(),
            source: Box::new(e),
        },
    }
}

fn at_spin<T: Real>(omega: T, e: Error) -> Error {
    Error::AtSpin {
        omega: omega.to_f64_lossy(),
        source: Box::new(e),
    }
}

/// Input-output relations: `t_p = 1 - sqrt(kappa_ex) da- / eps_p`,
/// `T = |t_p|^2`, `R = |sqrt(kappa_ex) db- / eps_p|^2`.
pub fn transmission_reflection<T: Real>(
    fl: &Fluctuations<T>,
    rates: &DerivedRates<T>,
) -> Result<(T, T, Cplx<T>)> {
    if !(rates.eps_p > T::zero()) {
        return Err(Error::Domain(
            "probe amplitude is zero; transmission is undefined".into(),
        ));
    }
    let k = rates.sqrt_kappa_ex() / rates.eps_p;
    let tp = re(T::one()) - fl.da_minus * k;
    let rp = fl.db_minus * k;
    Ok((tp.norm_sqr(), rp.norm_sqr(), tp))
}

/// Unwraps a phase sequence so adjacent entries differ by at most `pi`.
pub fn unwrap_phases<T: Real>(phases: &mut [T]) {
    for i in 1..phases.len() {
        let d = wrap_phase(phases[i] - phases[i - 1]);
        phases[i] = phases[i - 1] + d;
    }
}

fn sweep_at<T: Real>(op: &OperatingPoint<T>, grid: &SweepGrid<T>) -> Result<Vec<SpectrumPoint<T>>> {
    let mut points = grid
        .nodes()
        .into_par_iter()
        .map(|d| op.point(d))
        .collect::<Result<Vec<_>>>()?;
    let mut phases: Vec<T> = points.iter().map(|p| p.t_p_arg).collect();
    unwrap_phases(&mut phases);
    for (p, ph) in points.iter_mut().zip(phases) {
        p.t_p_arg = ph;
    }
    Ok(points)
}

/// One spectrum over the probe grid at the spin rate in `p`.
pub fn sweep_spectrum<T: Real>(
    p: &PhysicalParams<T>,
    grid: &SweepGrid<T>,
    opts: &SpectrumOptions<T>,
) -> Result<Vec<SpectrumPoint<T>>> {
    grid.validate()?;
    let op = OperatingPoint::new(p, opts, None)?;
    sweep_at(&op, grid)
}

/// Spectrum with a group delay at every node.
pub fn sweep_with_delay<T: Real>(
    p: &PhysicalParams<T>,
    grid: &SweepGrid<T>,
    opts: &SpectrumOptions<T>,
) -> Result<Vec<SpectrumPoint<T>>> {
    grid.validate()?;
    let op = OperatingPoint::new(p, opts, None)?;
    let h = grid.delay_step();
    let mut points = sweep_at(&op, grid)?;
    let taus = points
        .par_iter()
        .map(|pt| {
            op.group_delay(pt.delta_p, h, opts.richardson_tol, opts.delay_floor)
                .map_err(|e| at_point(pt.delta_p, e))
        })
        .collect::<Result<Vec<_>>>()?;
    for (pt, tau) in points.iter_mut().zip(taus) {
        pt.tau_g = Some(tau);
    }
    Ok(points)
}

fn with_spin<T: Real>(p: &PhysicalParams<T>, omega: T) -> PhysicalParams<T> {
    let mut q = *p;
    q.spin_rate = omega;
    q
}

/// `I(delta_p) = |T_cw - T_ccw|` for spin rates `+|Omega|` and `-|Omega|`.
pub fn isolation<T: Real>(
    p: &PhysicalParams<T>,
    grid: &SweepGrid<T>,
    omega_abs: T,
    opts: &SpectrumOptions<T>,
) -> Result<Vec<(T, T)>> {
    if !(omega_abs.abs() > T::zero()) {
        return Err(Error::validation(
            "omega",
            "isolation needs a nonzero spin rate",
        ));
    }
    let w = omega_abs.abs();
    let cw = sweep_spectrum(&with_spin(p, w), grid, opts).map_err(|e| at_spin(w, e))?;
    let ccw = sweep_spectrum(&with_spin(p, -w), grid, opts).map_err(|e| at_spin(-w, e))?;
    isolation_from_spectra(&cw, &ccw, opts.isolation_norm)
}

pub fn isolation_from_spectra<T: Real>(
    cw: &[SpectrumPoint<T>],
    ccw: &[SpectrumPoint<T>],
    norm: IsolationNorm,
) -> Result<Vec<(T, T)>> {
    if cw.len() != ccw.len() {
        return Err(Error::Shape("spectra differ in length".into()));
    }
    let (ncw, nccw) = match norm {
        IsolationNorm::Raw => (T::one(), T::one()),
        IsolationNorm::Max => {
            let m1 = cw.iter().map(|p| p.t).fold(T::zero(), T::max);
            let m2 = ccw.iter().map(|p| p.t).fold(T::zero(), T::max);
            if !(m1 > T::zero() && m2 > T::zero()) {
                return Err(Error::Shape("cannot normalize an all-zero spectrum".into()));
            }
            (m1, m2)
        }
    };
    Ok(cw
        .iter()
        .zip(ccw)
        .map(|(a, b)| (a.delta_p, (a.t / ncw - b.t / nccw).abs()))
        .collect())
}

fn transmission_at_zero<T: Real>(op: &OperatingPoint<T>) -> Result<T> {
    Ok(op.response(T::zero())?.0)
}

/// `(T(Omega) - T(0)) / T(0)` at `delta_p = 0`.
pub fn enhancement_factor<T: Real>(
    p: &PhysicalParams<T>,
    omega: T,
    opts: &SpectrumOptions<T>,
) -> Result<T> {
    let still = OperatingPoint::new(&with_spin(p, T::zero()), opts, None)?;
    let spinning =
        OperatingPoint::new(&with_spin(p, omega), opts, None).map_err(|e| at_spin(omega, e))?;
    enhancement_from(&still, &spinning)
}

fn enhancement_from<T: Real>(still: &OperatingPoint<T>, spinning: &OperatingPoint<T>) -> Result<T> {
    let t0 = transmission_at_zero(still)?;
    if !(t0 > T::zero()) {
        return Err(Error::Domain(
            "transmission of the stationary ring vanishes at delta_p = 0".into(),
        ));
    }
    let t = transmission_at_zero(spinning)?;
    Ok((t - t0) / t0)
}

/// Group delay at one probe detuning. `h = None` uses the default step of
/// the plotted window.
pub fn group_delay<T: Real>(
    p: &PhysicalParams<T>,
    delta_p: T,
    h: Option<T>,
    opts: &SpectrumOptions<T>,
) -> Result<T> {
    let op = OperatingPoint::new(p, opts, None)?;
    let h = h.unwrap_or_else(|| SweepGrid::<T>::default_window().delay_step());
    op.group_delay(delta_p, h, opts.richardson_tol, opts.delay_floor)
}

/// Operating points at `+omega` and `-omega` for each magnitude in `omegas`.
/// With continuation each sign follows its own branch in order; without it
/// every point is independent and the scan runs in parallel.
fn spin_chains<T: Real>(
    p: &PhysicalParams<T>,
    omegas: &[T],
    opts: &SpectrumOptions<T>,
) -> Result<Vec<(OperatingPoint<T>, OperatingPoint<T>)>> {
    let chain = |sign: T| -> Result<Vec<OperatingPoint<T>>> {
        if opts.continuation {
            let mut seed = None;
            let mut out = Vec::with_capacity(omegas.len());
            for &w in omegas {
                let omega = sign * w.abs();
                let op = OperatingPoint::new(&with_spin(p, omega), opts, seed)
                    .map_err(|e| at_spin(omega, e))?;
                seed = Some(op.steady.x_mean);
                out.push(op);
            }
            Ok(out)
        } else {
            omegas
                .par_iter()
                .map(|&w| {
                    let omega = sign * w.abs();
                    OperatingPoint::new(&with_spin(p, omega), opts, None)
                        .map_err(|e| at_spin(omega, e))
                })
                .collect()
        }
    };
    let (cw, ccw) = rayon::join(|| chain(T::one()), || chain(-T::one()));
    Ok(cw?.into_iter().zip(ccw?).collect())
}

/// Rows `(|Omega|, E.F. cw, E.F. ccw)`.
pub fn ef_scan<T: Real>(
    p: &PhysicalParams<T>,
    omegas: &[T],
    opts: &SpectrumOptions<T>,
) -> Result<Vec<(T, T, T)>> {
    let still = OperatingPoint::new(&with_spin(p, T::zero()), opts, None)?;
    let chains = spin_chains(p, omegas, opts)?;
    omegas
        .iter()
        .zip(&chains)
        .map(|(&w, (cw, ccw))| {
            Ok((
                w.abs(),
                enhancement_from(&still, cw).map_err(|e| at_spin(w.abs(), e))?,
                enhancement_from(&still, ccw).map_err(|e| at_spin(-w.abs(), e))?,
            ))
        })
        .collect()
}

/// Rows `(|Omega|, tau cw, tau ccw)` at `delta_p = 0`.
pub fn delay_scan<T: Real>(
    p: &PhysicalParams<T>,
    omegas: &[T],
    h: Option<T>,
    opts: &SpectrumOptions<T>,
) -> Result<Vec<(T, T, T)>> {
    let h = h.unwrap_or_else(|| SweepGrid::<T>::default_window().delay_step());
    let chains = spin_chains(p, omegas, opts)?;
    chains
        .par_iter()
        .zip(omegas.par_iter())
        .map(|((cw, ccw), &w)| {
            let tcw = cw
                .group_delay(T::zero(), h, opts.richardson_tol, opts.delay_floor)
                .map_err(|e| at_spin(w.abs(), e))?;
            let tccw = ccw
                .group_delay(T::zero(), h, opts.richardson_tol, opts.delay_floor)
                .map_err(|e| at_spin(-w.abs(), e))?;
            Ok((w.abs(), tcw, tccw))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmitMetrics<T: Real> {
    pub peak_t: T,
    pub peak_pos: T,
    /// Full width at `(peak_t + min_t) / 2`.
    pub window_width: T,
    pub minima_pos: [T; 2],
    /// The higher of the two flanking minima.
    pub min_t: T,
}

fn crossing<T: Real>(x0: T, y0: T, x1: T, y1: T, level: T) -> T {
    if y1 == y0 {
        return x0;
    }
    x0 + (x1 - x0) * (level - y0) / (y1 - y0)
}

/// Peak, flanking minima and transparency-window width of a spectrum.
pub fn omit_metrics<T: Real>(points: &[SpectrumPoint<T>]) -> Result<OmitMetrics<T>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Shape("spectrum too short".into()));
    }
    let t: Vec<T> = points.iter().map(|p| p.t).collect();
    let mut minima: Vec<usize> = (1..n - 1)
        .filter(|&i| t[i] < t[i - 1] && t[i] <= t[i + 1])
        .collect();
    if minima.len() < 2 {
        return Err(Error::Shape(format!(
            "expected two absorption minima, found {}",
            minima.len()
        )));
    }
    minima.sort_by(|&a, &b| t[a].partial_cmp(&t[b]).unwrap_or(std::cmp::Ordering::Equal));
    let (mut lo, mut hi) = (minima[0], minima[1]);
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    if hi - lo < 2 {
        return Err(Error::Shape(
            "minima are adjacent; no peak between them".into(),
        ));
    }
    let peak = (lo + 1..hi)
        .max_by(|&a, &b| t[a].partial_cmp(&t[b]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap();
    let min_t = t[lo].max(t[hi]);
    if !(t[peak] > min_t) {
        return Err(Error::Shape(
            "no transmission peak between the minima".into(),
        ));
    }
    let level = (t[peak] + min_t) / T::lit(2.0);
    let x = |i: usize| points[i].delta_p;
    let mut left = x(lo);
    for i in (lo..peak).rev() {
        if t[i] <= level {
            left = crossing(x(i), t[i], x(i + 1), t[i + 1], level);
            break;
        }
    }
    let mut right = x(hi);
    for i in peak + 1..=hi {
        if t[i] <= level {
            right = crossing(x(i - 1), t[i - 1], x(i), t[i], level);
            break;
        }
    }
    Ok(OmitMetrics {
        peak_t: t[peak],
        peak_pos: x(peak),
        window_width: right - left,
        minima_pos: [x(lo), x(hi)],
        min_t,
    })
}

fn sci<T: Real>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

/// Writes a spectrum as CSV; the `tau_g` column appears when every point
/// carries a delay.
pub fn write_spectrum_csv<T: Real, W: Write + ?Sized>(
    out: &mut W,
    points: &[SpectrumPoint<T>],
) -> std::io::Result<()> {
    let with_delay = !points.is_empty() && points.iter().all(|p| p.tau_g.is_some());
    if with_delay {
        out.write_all(b"delta_p,T,R,arg_tp,tau_g\n")?;
    } else {
        out.write_all(b"delta_p,T,R,arg_tp\n")?;
    }
    for p in points {
        let mut line = format!(
            "{},{},{},{}",
            sci(p.delta_p),
            sci(p.t),
            sci(p.r),
            sci(p.t_p_arg)
        );
        if with_delay {
            line.push(',');
            line.push_str(&sci(p.tau_g.unwrap()));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_pairs_csv<T: Real, W: Write + ?Sized>(
    out: &mut W,
    header: &str,
    rows: &[(T, T)],
) -> std::io::Result<()> {
    writeln!(out, "{header}")?;
    for (a, b) in rows {
        writeln!(out, "{},{}", sci(*a), sci(*b))?;
    }
    Ok(())
}

pub fn write_triples_csv<T: Real, W: Write + ?Sized>(
    out: &mut W,
    header: &str,
    rows: &[(T, T, T)],
) -> std::io::Result<()> {
    writeln!(out, "{header}")?;
    for (a, b, c) in rows {
        writeln!(out, "{},{},{}", sci(*a), sci(*b), sci(*c))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::cx;

    fn fig_params(c: f64, spin: f64) -> PhysicalParams<f64> {
        let mut p = PhysicalParams::reference();
        p.delta_eg_ratio = 1.0;
        p.cooperativity = c;
        p.spin_rate = spin;
        p
    }

    fn small_grid() -> SweepGrid<f64> {
        SweepGrid::new(-10e6, 10e6, 201).unwrap()
    }

    #[test]
    fn empty_cavity_limits() {
        let p = fig_params(0.5, 0.0);
        let rates = derive_rates(&p, SagnacSplit::Opposite).unwrap();
        let zero = Fluctuations {
            da_minus: re(0.0),
            da_plus_conj: re(0.0),
            db_minus: re(0.0),
            db_plus_conj: re(0.0),
            dsigma_minus: re(0.0),
            dsigma_plus_conj: re(0.0),
            dx: re(0.0),
            eta: 0.0,
            residual: 0.0,
        };
        let (t, r, _) = transmission_reflection(&zero, &rates).unwrap();
        assert_eq!((t, r), (1.0, 0.0));
        let absorbing = Fluctuations {
            da_minus: re(rates.eps_p / rates.sqrt_kappa_ex()),
            ..zero
        };
        let (t, _, _) = transmission_reflection(&absorbing, &rates).unwrap();
        assert!(t < 1e-30);
    }

    #[test]
    fn zero_probe_is_rejected() {
        let mut p = fig_params(0.5, 0.0);
        p.probe_power = 0.0;
        let op = OperatingPoint::new(&p, &SpectrumOptions::default(), None).unwrap();
        assert!(op.response(0.0).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(SweepGrid::new(0.0, 1.0, 1).is_err());
        assert!(SweepGrid::new(1.0, 0.0, 10).is_err());
        let g = SweepGrid::new(-1.0, 1.0, 3).unwrap();
        assert_eq!(g.nodes(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(SweepGrid::<f64>::default_window().delay_step(), 20.0);
    }

    #[test]
    fn decoupled_emitter_gives_no_reflection_and_passive_transmission() {
        let pts = sweep_spectrum(
            &fig_params(0.0, 0.0),
            &small_grid(),
            &SpectrumOptions::default(),
        )
        .unwrap();
        assert_eq!(pts.len(), 201);
        for p in &pts {
            assert_eq!(p.r, 0.0);
            assert!(p.t <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn unwrapped_phase_is_continuous() {
        let pts = sweep_spectrum(
            &fig_params(0.5, 4e4),
            &small_grid(),
            &SpectrumOptions::default(),
        )
        .unwrap();
        for w in pts.windows(2) {
            assert!((w[1].t_p_arg - w[0].t_p_arg).abs() <= std::f64::consts::PI);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let p = fig_params(0.5, 4e4);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_spectrum_csv(
            &mut a,
            &sweep_spectrum(&p, &small_grid(), &SpectrumOptions::default()).unwrap(),
        )
        .unwrap();
        write_spectrum_csv(
            &mut b,
            &sweep_spectrum(&p, &small_grid(), &SpectrumOptions::default()).unwrap(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn isolation_vanishes_without_spin_and_is_symmetric() {
        let opts = SpectrumOptions::default();
        let grid = small_grid();
        let iso = isolation(&fig_params(0.5, 0.0), &grid, 1e-6, &opts).unwrap();
        assert!(iso.iter().all(|(_, i)| *i < 1e-9));
        let cw = sweep_spectrum(&fig_params(0.5, 4e4), &grid, &opts).unwrap();
        let ccw = sweep_spectrum(&fig_params(0.5, -4e4), &grid, &opts).unwrap();
        let fwd = isolation_from_spectra(&cw, &ccw, IsolationNorm::Raw).unwrap();
        let back = isolation_from_spectra(&ccw, &cw, IsolationNorm::Raw).unwrap();
        assert_eq!(fwd, back);
        assert!(isolation(&fig_params(0.5, 0.0), &grid, 0.0, &opts).is_err());
    }

    #[test]
    fn enhancement_factor_is_zero_without_spin() {
        let ef =
            enhancement_factor(&fig_params(0.5, 0.0), 0.0, &SpectrumOptions::default()).unwrap();
        assert_eq!(ef, 0.0);
    }

    #[test]
    fn empty_cavity_delay_matches_lorentzian_phase_slope() {
        // Optomechanics and emitter off: t_p = 1 - kappa/(beta + i(D - eta)).
        let mut p = fig_params(0.0, 0.0);
        p.pump_power = 0.0;
        let opts = SpectrumOptions::<f64>::default();
        let op = OperatingPoint::new(&p, &opts, None).unwrap();
        let rates = op.rates;
        // Critical coupling puts a zero of t_p at line center, where the
        // phase is undefined; sample half a linewidth away.
        let offset = 0.5 * rates.beta;
        let delta_p = rates.delta_ca - rates.omega_m + offset;
        let tau = op.group_delay(delta_p, 20.0, 0.01, 1e-15).unwrap();
        // d/d eta of arg t_p, evaluated analytically.
        let tp = |eta: f64| re(1.0) - re(rates.kappa_ex) / cx(rates.beta, rates.delta_ca - eta);
        let eta = rates.delta_ca + offset;
        let z = tp(eta);
        let dz = -re(rates.kappa_ex) * cx(0.0, 1.0) / cx(rates.beta, rates.delta_ca - eta).powi(2);
        let want = (dz / z).im;
        assert!((tau - want).abs() <= 1e-6 * want.abs(), "{tau} vs {want}");
    }

    #[test]
    fn mode_mirror_under_spin_reversal() {
        // With the emitter off, spinning the other way and driving the other
        // mode is the same experiment.
        let opts = SpectrumOptions::default();
        let p = fig_params(0.0, 4e4);
        let q = fig_params(0.0, -4e4);
        let rp = derive_rates(&p, SagnacSplit::Opposite).unwrap();
        let mut rq = derive_rates(&q, SagnacSplit::Opposite).unwrap();
        std::mem::swap(&mut rq.delta_ca, &mut rq.delta_cb);
        let sp = solve_fixed_point(&rp, &opts.fixed_point).unwrap();
        let sq = solve_fixed_point(&rq, &opts.fixed_point).unwrap();
        for k in -5..=5 {
            let eta = rp.omega_m + 1e6 * k as f64;
            let fp = solve_fluctuations(&rp, &sp, eta).unwrap();
            let fq = solve_fluctuations(&rq, &sq, eta).unwrap();
            let tp = transmission_reflection(&fp, &rp).unwrap().0;
            let tq = transmission_reflection(&fq, &rq).unwrap().0;
            assert_eq!(tp, tq);
        }
    }

    #[test]
    fn delta_p_conventions_coincide_on_the_sideband() {
        // Delta_c = omega_m by default, so both mappings agree.
        let p = fig_params(0.5, 0.0);
        let mut opts = SpectrumOptions::default();
        let a = sweep_spectrum(&p, &small_grid(), &opts).unwrap();
        opts.convention = DeltaPConvention::PumpDetuning;
        let b = sweep_spectrum(&p, &small_grid(), &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            "pump".parse::<DeltaPConvention>().unwrap(),
            DeltaPConvention::PumpDetuning
        );
        assert!("x".parse::<IsolationNorm>().is_err());
    }

    fn double_dip(x: f64, x0: f64, w: f64, depth: f64) -> f64 {
        1.0 - depth / (1.0 + ((x - x0) / w).powi(2)) - depth / (1.0 + ((x + x0) / w).powi(2))
    }

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn synthetic_double_lorentzian_width() {
        let (x0, w, depth) = (1.5e6, 0.6e6, 0.4);
        let grid = SweepGrid::new(-10e6, 10e6, 20001).unwrap();
        let pts: Vec<SpectrumPoint<f64>> = grid
            .nodes()
            .into_iter()
            .map(|x| SpectrumPoint {
                delta_p: x,
                t: double_dip(x, x0, w, depth),
                r: 0.0,
                t_p_arg: 0.0,
                tau_g: None,
            })
            .collect();
        let m = omit_metrics(&pts).unwrap();
        // Oracle: locate the minimum and the half level by bisection on the
        // analytic derivative and the analytic curve.
        let f = |x: f64| double_dip(x, x0, w, depth);
        let df = |x: f64| (f(x + 1.0) - f(x - 1.0)) / 2.0;
        let xmin = bisect(df, 0.5e6, 3e6);
        let peak = f(0.0);
        let level = 0.5 * (peak + f(xmin));
        let half = bisect(|x| f(x) - level, 0.0, xmin);
        let want = 2.0 * half;
        assert!(
            (m.window_width - want).abs() <= 0.01 * want,
            "{} vs {want}",
            m.window_width
        );
        assert_eq!(m.peak_pos, 0.0);
        assert!((m.minima_pos[1] - xmin).abs() < 2e3);
    }

    #[test]
    fn monotone_spectrum_has_no_window() {
        let pts: Vec<SpectrumPoint<f64>> = (0..50)
            .map(|i| SpectrumPoint {
                delta_p: i as f64,
                t: i as f64,
                r: 0.0,
                t_p_arg: 0.0,
                tau_g: None,
            })
            .collect();
        assert!(matches!(omit_metrics(&pts), Err(Error::Shape(_))));
    }

    #[test]
    fn csv_layout() {
        let pts = vec![SpectrumPoint {
            delta_p: -1.0,
            t: 0.5,
            r: 0.0,
            t_p_arg: 0.25,
            tau_g: Some(1e-6),
        }];
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &pts).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "delta_p,T,R,arg_tp,tau_g\n-1.0000000000000000e0,5.0000000000000000e-1,0.0000000000000000e0,2.5000000000000000e-1,9.9999999999999995e-7\n"
        );
    }

    #[test]
    fn delay_sweep_passes_step_check() {
        let grid = SweepGrid::new(-2e6, 2e6, 21).unwrap();
        let pts =
            sweep_with_delay(&fig_params(0.5, 4e4), &grid, &SpectrumOptions::default()).unwrap();
        assert!(pts.iter().all(|p| p.tau_g.unwrap().is_finite()));
    }

    #[test]
    fn continuation_and_independent_scans_agree_on_a_single_branch() {
        let p = fig_params(0.5, 0.0);
        let omegas = [0.0, 4e4, 8e4, 1.2e5];
        let mut opts = SpectrumOptions::default();
        let a = ef_scan(&p, &omegas, &opts).unwrap();
        opts.continuation = false;
        let b = ef_scan(&p, &omegas, &opts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.1 - y.1).abs() < 1e-9 && (x.2 - y.2).abs() < 1e-9);
        }
        assert_eq!(a[0].1, 0.0);
    }
}
