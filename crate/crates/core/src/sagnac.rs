//! Rotation-induced (Sagnac-Fizeau) shift of the counter-propagating modes.

use crate::error::{Error, Result};
use crate::num::Real;

/// How the shift is distributed over the two whispering-gallery modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SagnacSplit {
    /// Mode a is shifted by `+shift`, mode b by `-shift`.
    #[default]
    Opposite,
    /// Both modes are shifted by `+shift`.
    Common,
}

impl std::str::FromStr for SagnacSplit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "opposite" => Ok(Self::Opposite),
            "common" => Ok(Self::Common),
            other => Err(Error::validation(
                "sagnac_split",
                format!("expected `opposite` or `common`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for SagnacSplit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Opposite => "opposite",
            Self::Common => "common",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SagnacShift<T: Real> {
    /// Signed frequency shift in rate units.
    pub shift: T,
    /// Signed spin rate the shift was computed for (positive = clockwise).
    pub spin_rate: T,
}

/// `shift = (n r Omega omega_c / c) (1 - 1/n)`; the material dispersion
/// correction is not modelled.
pub fn sagnac_shift<T: Real>(
    refractive_index: T,
    radius: T,
    spin_rate: T,
    omega_c: T,
    light_speed: T,
) -> Result<SagnacShift<T>> {
    if !(refractive_index >= T::one()) {
        return Err(Error::validation("refractive_index", "must be >= 1"));
    }
    if !(radius > T::zero()) {
        return Err(Error::validation("radius_m", "must be > 0"));
    }
    if !(omega_c > T::zero()) {
        return Err(Error::validation("omega_c", "must be > 0"));
    }
    if !(light_speed > T::zero()) {
        return Err(Error::validation("light_speed", "must be > 0"));
    }
    let n = refractive_index;
    let shift = n * radius * spin_rate * omega_c / light_speed * (T::one() - T::one() / n);
    Ok(SagnacShift { shift, spin_rate })
}

/// Pump detunings `(Delta_ca, Delta_cb)` of the two modes after rotation.
pub fn effective_detunings<T: Real>(
    pump_detuning: T,
    shift: &SagnacShift<T>,
    split: SagnacSplit,
) -> (T, T) {
    let a = pump_detuning + shift.shift;
    let b = match split {
        SagnacSplit::Opposite => pump_detuning - shift.shift,
        SagnacSplit::Common => pump_detuning + shift.shift,
    };
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const N: f64 = 1.44;
    const R: f64 = 2.5e-4;
    const WC: f64 = 1.935e14;
    const C: f64 = 3.0e8;

    #[test]
    fn zero_spin_gives_zero_shift() {
        assert_eq!(sagnac_shift(N, R, 0.0, WC, C).unwrap().shift, 0.0);
    }

    #[test]
    fn vacuum_index_gives_zero_shift() {
        for om in [-1.2e5, 3.0, 4e4] {
            assert_eq!(sagnac_shift(1.0, R, om, WC, C).unwrap().shift, 0.0);
        }
    }

    #[test]
    fn forty_kilohertz_shift() {
        // 1.44 * 2.5e-4 * 4e4 * 1.935e14 / 3e8 * (1 - 1/1.44) = 2.838e6
        let s = sagnac_shift(N, R, 4e4, WC, C).unwrap();
        assert!((s.shift - 2.838e6).abs() < 1e-6 * 2.838e6, "{}", s.shift);
    }

    #[test]
    fn detunings_example() {
        let s = SagnacShift {
            shift: 2.84e6f64,
            spin_rate: 4e4,
        };
        let (a, b) = effective_detunings(200e6, &s, SagnacSplit::Opposite);
        assert!((a - 202.84e6).abs() < 1e-3);
        assert!((b - 197.16e6).abs() < 1e-3);
        let (a, b) = effective_detunings(200e6, &s, SagnacSplit::Common);
        assert_eq!(a, b);
    }

    #[test]
    fn stationary_resonator_keeps_pump_detuning() {
        let s = sagnac_shift(N, R, 0.0, WC, C).unwrap();
        assert_eq!(
            effective_detunings(2e8, &s, SagnacSplit::Opposite),
            (2e8, 2e8)
        );
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(sagnac_shift(0.9, R, 1.0, WC, C).is_err());
        assert!(sagnac_shift(N, 0.0, 1.0, WC, C).is_err());
        assert!(sagnac_shift(N, R, 1.0, -WC, C).is_err());
    }

    #[test]
    fn shift_stays_below_ten_megahertz_up_to_120_khz() {
        let s = sagnac_shift(N, R, 1.2e5, WC, C).unwrap();
        assert!(s.shift.abs() < 10e6);
    }

    #[test]
    fn single_precision_matches() {
        let s = sagnac_shift(1.44f32, 2.5e-4, 4e4, 1.935e14, 3e8).unwrap();
        assert!((s.shift - 2.838e6).abs() < 5.0);
    }

    proptest! {
        #[test]
        fn opposite_split_is_antisymmetric_in_spin(om in -1.2e5f64..1.2e5, dc in 1e8f64..3e8) {
            let p = sagnac_shift(N, R, om, WC, C).unwrap();
            let m = sagnac_shift(N, R, -om, WC, C).unwrap();
            let (ap, bp) = effective_detunings(dc, &p, SagnacSplit::Opposite);
            let (am, bm) = effective_detunings(dc, &m, SagnacSplit::Opposite);
            prop_assert_eq!(ap, bm);
            prop_assert_eq!(bp, am);
        }

        #[test]
        fn shift_is_linear_in_spin(om in -1.2e5f64..1.2e5, k in -3.0f64..3.0) {
            let a = sagnac_shift(N, R, k * om, WC, C).unwrap().shift;
            let b = k * sagnac_shift(N, R, om, WC, C).unwrap().shift;
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
