//! Linear response to a weak probe at offset `eta` from the pump.
//!
//! Each fluctuation is split into a lower sideband `e^{-i eta t}` and the
//! conjugate of its upper sideband. The seven unknowns are ordered
//! `[da-, da+*, db-, db+*, ds-, ds+*, dx]`.

use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, solve_with_residual, vec_norm, DenseMatrix};
use crate::num::{cx, re, Cplx, Real};
use crate::params::DerivedRates;
use crate::steady_state::SteadyState;

pub const UNKNOWNS: [&str; 7] = ["da-", "da+*", "db-", "db+*", "ds-", "ds+*", "dx"];

pub const DA_MINUS: usize = 0;
pub const DA_PLUS_CONJ: usize = 1;
pub const DB_MINUS: usize = 2;
pub const DB_PLUS_CONJ: usize = 3;
pub const DS_MINUS: usize = 4;
pub const DS_PLUS_CONJ: usize = 5;
pub const DX: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct SidebandSystem<T: Real> {
    pub matrix: DenseMatrix<T>,
    pub rhs: Vec<Cplx<T>>,
    pub eta: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fluctuations<T: Real> {
    pub da_minus: Cplx<T>,
    pub da_plus_conj: Cplx<T>,
    pub db_minus: Cplx<T>,
    pub db_plus_conj: Cplx<T>,
    pub dsigma_minus: Cplx<T>,
    pub dsigma_plus_conj: Cplx<T>,
    pub dx: Cplx<T>,
    pub eta: T,
    /// Two-norm of `M v - rhs`.
    pub residual: T,
}

impl<T: Real> Fluctuations<T> {
    pub fn as_vec(&self) -> [Cplx<T>; 7] {
        [
            self.da_minus,
            self.da_plus_conj,
            self.db_minus,
            self.db_plus_conj,
            self.dsigma_minus,
            self.dsigma_plus_conj,
            self.dx,
        ]
    }
}

/// Builds the 7x7 sideband system around a steady state.
///
/// Rows 0..4 are the cavity modes, row 4 the emitter lower sideband, row 5
/// the mechanics and row 6 the emitter upper sideband.
pub fn assemble_system<T: Real>(
    rates: &DerivedRates<T>,
    ss: &SteadyState<T>,
    eta: T,
) -> SidebandSystem<T> {
    let mut m = DenseMatrix::zeros(7);
    let i = cx(T::zero(), T::one());
    let g = rates.g;
    let j = rates.j;
    let a = ss.a_mean;
    let b = ss.b_mean;
    let ua = rates.delta_ca - g * ss.x_mean;
    let ub = rates.delta_cb - g * ss.x_mean;
    let deg = rates.delta_eg_complex();

    m[(0, DA_MINUS)] = cx(rates.beta, ua - eta);
    m[(0, DX)] = -i * a * g;
    m[(0, DS_MINUS)] = cx(T::zero(), j);

    m[(1, DA_PLUS_CONJ)] = cx(rates.beta, -ua - eta);
    m[(1, DX)] = i * a.conj() * g;
    m[(1, DS_PLUS_CONJ)] = cx(T::zero(), -j);

    m[(2, DB_MINUS)] = cx(rates.beta, ub - eta);
    m[(2, DX)] = -i * b * g;
    m[(2, DS_MINUS)] = cx(T::zero(), j);

    m[(3, DB_PLUS_CONJ)] = cx(rates.beta, -ub - eta);
    m[(3, DX)] = i * b.conj() * g;
    m[(3, DS_PLUS_CONJ)] = cx(T::zero(), -j);

    m[(4, DS_MINUS)] = deg - re(eta);
    m[(4, DA_MINUS)] = re(j);
    m[(4, DB_MINUS)] = re(j);

    let k = rates.photon_acceleration();
    let wm = rates.omega_m;
    m[(5, DX)] = cx((wm - eta) * (wm + eta), -eta * rates.gamma_m);
    m[(5, DA_MINUS)] = -a.conj() * k;
    m[(5, DA_PLUS_CONJ)] = -a * k;
    m[(5, DB_MINUS)] = -b.conj() * k;
    m[(5, DB_PLUS_CONJ)] = -b * k;

    m[(6, DS_PLUS_CONJ)] = deg.conj() + re(eta);
    m[(6, DA_PLUS_CONJ)] = re(j);
    m[(6, DB_PLUS_CONJ)] = re(j);

    let mut rhs = vec![re(T::zero()); 7];
    rhs[0] = re(rates.sqrt_kappa_ex() * rates.eps_p);
    SidebandSystem {
        matrix: m,
        rhs,
        eta,
    }
}

pub fn solve_system<T: Real>(sys: &SidebandSystem<T>) -> Result<Fluctuations<T>> {
    let context = format!("sideband system at eta = {:e}", sys.eta);
    let (v, res) = solve_with_residual(&sys.matrix, &sys.rhs, &context)?;
    let bound = T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
        * (sys.matrix.norm_inf() * vec_norm(&v) + vec_norm(&sys.rhs));
    if !(res <= bound) {
        return Err(Error::Singular {
            context: format!("{context}: residual {res:e} exceeds {bound:e}"),
            pivot: f64::NAN,
            condition: condition_estimate(&sys.matrix).unwrap_or(f64::INFINITY),
        });
    }
    Ok(Fluctuations {
        da_minus: v[0],
        da_plus_conj: v[1],
        db_minus: v[2],
        db_plus_conj: v[3],
        dsigma_minus: v[4],
        dsigma_plus_conj: v[5],
        dx: v[6],
        eta: sys.eta,
        residual: res,
    })
}

pub fn solve_fluctuations<T: Real>(
    rates: &DerivedRates<T>,
    ss: &SteadyState<T>,
    eta: T,
) -> Result<Fluctuations<T>> {
    solve_system(&assemble_system(rates, ss, eta))
}

/// Lower-sideband cavity response without the emitter, from the reduced
/// `[da-, da+*, dx]` system.
pub fn no_qubit_delta_a<T: Real>(
    rates: &DerivedRates<T>,
    ss: &SteadyState<T>,
    eta: T,
) -> Result<Cplx<T>> {
    if rates.j != T::zero() {
        return Err(Error::Domain("reduced response requires J = 0".into()));
    }
    let i = cx(T::zero(), T::one());
    let zero = re(T::zero());
    let a = ss.a_mean;
    let g = rates.g;
    let u = rates.delta_ca - g * ss.x_mean;
    let k = rates.photon_acceleration();
    let wm = rates.omega_m;
    let m = DenseMatrix::from_rows(&[
        vec![cx(rates.beta, u - eta), zero, -i * a * g],
        vec![zero, cx(rates.beta, -u - eta), i * a.conj() * g],
        vec![
            -a.conj() * k,
            -a * k,
            cx((wm - eta) * (wm + eta), -eta * rates.gamma_m),
        ],
    ]);
    let rhs = [re(rates.sqrt_kappa_ex() * rates.eps_p), zero, zero];
    let (v, _) = solve_with_residual(&m, &rhs, "reduced sideband system")?;
    let alt = closed_form_no_qubit(rates, ss, eta);
    log::debug!(
        "reduced response {:e}; textbook closed form {:e} (relative gap {:e})",
        v[0],
        alt,
        crate::num::rel_dev(alt, v[0])
    );
    Ok(v[0])
}

/// Textbook closed form for the emitter-free response as it is commonly
/// quoted, with `beta_- = beta - i Delta + i g x - i eta` and
/// `Gamma_m = omega_m - i eta (gamma_m - eta)`. It drops the `hbar` and the
/// mass scaling, so it is only logged next to the reduced solve.
pub fn closed_form_no_qubit<T: Real>(
    rates: &DerivedRates<T>,
    ss: &SteadyState<T>,
    eta: T,
) -> Cplx<T> {
    let i = cx(T::zero(), T::one());
    let g = rates.g;
    let bm = cx(rates.beta, -rates.delta_ca + g * ss.x_mean - eta);
    let gm = re(rates.omega_m) - i * (eta * (rates.gamma_m - eta));
    let n = ss.a_mean.norm_sqr();
    let inner = i * g * g * n + bm * gm * rates.mass;
    let num = -inner * rates.sqrt_kappa_ex() * rates.eps_p;
    let den = i * g * g * n * bm * bm.conj() * inner;
    num / den
}
