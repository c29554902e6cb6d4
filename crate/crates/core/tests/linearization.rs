//! The assembled sideband system against a linearization of the equations of
//! motion themselves: a finite-difference Jacobian of the real 8-dimensional
//! mean-field flow, driven at `e^{-i eta t}`.

use num_complex::Complex64;
use omit_ring::fluctuations::{assemble_system, solve_system};
use omit_ring::linalg::{solve_with_residual, DenseMatrix};
use omit_ring::num::rel_dev;
use omit_ring::ode::OdeSystem;
use omit_ring::oracle::{MeanField, STATE_DIM};
use omit_ring::params::{derive_rates, DerivedRates, PhysicalParams};
use omit_ring::steady_state::solve_fixed_point;
use omit_ring::{FixedPointOptions, SagnacSplit};

fn params(c: f64, spin: f64, ratio: f64) -> PhysicalParams<f64> {
    let mut p = PhysicalParams::reference();
    p.cooperativity = c;
    p.spin_rate = spin;
    p.delta_eg_ratio = ratio;
    p
}

/// Jacobian of the undriven-probe flow at `y0` by central differences. The
/// flow is at most quadratic in the state, so the differences are exact up
/// to rounding.
fn jacobian(rates: &DerivedRates<f64>, y0: &[f64; STATE_DIM]) -> [[f64; STATE_DIM]; STATE_DIM] {
    let mut pumped = *rates;
    pumped.eps_p = 0.0;
    let sys = MeanField {
        rates: pumped,
        eta: 1.0,
    };
    let field = y0[0].hypot(y0[1]);
    let scale = [
        field,
        field,
        field,
        field,
        field,
        field,
        y0[6].abs(),
        y0[6].abs() * rates.omega_m,
    ];
    let mut jac = [[0.0; STATE_DIM]; STATE_DIM];
    for k in 0..STATE_DIM {
        let h = 1e-4 * scale[k];
        let mut up = *y0;
        let mut dn = *y0;
        up[k] += h;
        dn[k] -= h;
        let mut fu = [0.0; STATE_DIM];
        let mut fd = [0.0; STATE_DIM];
        sys.rhs(0.0, &up, &mut fu);
        sys.rhs(0.0, &dn, &mut fd);
        for r in 0..STATE_DIM {
            jac[r][k] = (fu[r] - fd[r]) / (2.0 * h);
        }
    }
    jac
}

/// `[da-, da+*, db-, db+*, ds-, ds+*, dx]` from the real-state linearization.
fn linearized_response(rates: &DerivedRates<f64>, eta: f64) -> [Complex64; 7] {
    let ss = solve_fixed_point(rates, &FixedPointOptions::default()).unwrap();
    let y0 = [
        ss.a_mean.re,
        ss.a_mean.im,
        ss.b_mean.re,
        ss.b_mean.im,
        ss.sigma_mean.re,
        ss.sigma_mean.im,
        ss.x_mean,
        0.0,
    ];
    let jac = jacobian(rates, &y0);
    // y(t) = U e^{-i eta t} + c.c. solves (-i eta - J) U = F.
    let mut m = DenseMatrix::zeros(STATE_DIM);
    for r in 0..STATE_DIM {
        for c in 0..STATE_DIM {
            m[(r, c)] = Complex64::new(-jac[r][c], 0.0);
        }
        m[(r, r)] += Complex64::new(0.0, -eta);
    }
    let f = Complex64::new(rates.sqrt_kappa_ex() * rates.eps_p, 0.0);
    let mut rhs = vec![Complex64::new(0.0, 0.0); STATE_DIM];
    rhs[0] = f / 2.0;
    rhs[1] = f / Complex64::new(0.0, 2.0);
    let (u, _) = solve_with_residual(&m, &rhs, "real linearization").unwrap();
    let i = Complex64::new(0.0, 1.0);
    [
        u[0] + i * u[1],
        u[0] - i * u[1],
        u[2] + i * u[3],
        u[2] - i * u[3],
        u[4] + i * u[5],
        u[4] - i * u[5],
        u[6],
    ]
}

fn check(p: &PhysicalParams<f64>, delta_ps: &[f64], tol: f64) {
    let rates = derive_rates(p, SagnacSplit::Opposite).unwrap();
    let ss = solve_fixed_point(&rates, &FixedPointOptions::default()).unwrap();
    for &dp in delta_ps {
        let eta = rates.omega_m + dp;
        let sys = assemble_system(&rates, &ss, eta);
        let fl = solve_system(&sys).unwrap().as_vec();
        let reference = linearized_response(&rates, eta);
        let scale = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (k, (got, want)) in fl.iter().zip(&reference).enumerate() {
            // Components far below the largest one are compared absolutely.
            let dev = if want.norm() > 1e-6 * scale {
                rel_dev(*got, *want)
            } else {
                (got - want).norm() / scale
            };
            assert!(
                dev <= tol,
                "component {k} at delta_p = {dp:e}: {got:e} vs {want:e} (dev {dev:e})"
            );
        }
    }
}

const OFFSETS: [f64; 5] = [-8e6, -2e6, 0.0, 1.5e6, 6e6];

#[test]
fn stationary_ring_with_emitter() {
    check(&params(0.5, 0.0, 1.0), &OFFSETS, 1e-6);
}

#[test]
fn spinning_ring_both_directions() {
    check(&params(0.5, 4e4, 1.0), &OFFSETS, 1e-6);
    check(&params(0.5, -4e4, 1.0), &OFFSETS, 1e-6);
}

#[test]
fn detuned_emitter_and_table_coupling() {
    check(&params(0.5, 2e4, 0.5), &OFFSETS, 1e-6);
    let mut p = params(0.5, 0.0, 0.5);
    p.j_mode = omit_ring::JMode::FromTable;
    check(&p, &OFFSETS, 1e-6);
}

#[test]
fn bare_optomechanics() {
    check(&params(0.0, 0.0, 1.0), &OFFSETS, 1e-6);
}
