//! Physical parameters and the rates derived from them.
//!
//! Frequency-like quantities are angular frequencies in s^-1 with no 2*pi
//! factors anywhere: `omega_m = 2e8` means 2e8 s^-1. Both optical modes are
//! identical (same `omega_c`, `kappa`, `g`, `J`), and intrinsic loss equals
//! the external coupling, so the amplitude decay rate `beta` equals
//! `kappa_ex`.

use crate::error::{Error, Result};
use crate::num::{Cplx, Real, HBAR, LIGHT_SPEED};
use crate::sagnac::{effective_detunings, sagnac_shift, SagnacShift, SagnacSplit};

/// How the emitter-mode coupling `J` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JMode {
    /// `J = sqrt(2 C kappa_ex gamma_star)`.
    #[default]
    FromCooperativity,
    /// `J = 0.75 kappa_ex`, independent of `C`.
    FromTable,
}

impl std::str::FromStr for JMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cooperativity" | "from_cooperativity" => Ok(Self::FromCooperativity),
            "table" | "from_table" => Ok(Self::FromTable),
            other => Err(Error::validation(
                "j_mode",
                format!("expected `cooperativity` or `table`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for JMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FromCooperativity => "cooperativity",
            Self::FromTable => "table",
        })
    }
}

/// Ratio above which the probe is no longer a small perturbation.
pub const PROBE_RATIO_WARN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams<T: Real> {
    /// Effective mass of the breathing mode (kg).
    pub mass: T,
    pub omega_m: T,
    pub gamma_m: T,
    /// Optical wavelength (m). Only enters through the dropped dispersion
    /// term, kept for completeness of the parameter file.
    pub wavelength: T,
    pub refractive_index: T,
    /// Optical mode frequency shared by both modes.
    pub omega_c: T,
    pub quality_factor: T,
    /// Pump power (W).
    pub pump_power: T,
    /// Probe power (W).
    pub probe_power: T,
    /// Ring radius (m).
    pub radius: T,
    /// Signed spin rate, positive = clockwise.
    pub spin_rate: T,
    /// Emitter-pump detuning as a fraction of `omega_m`.
    pub delta_eg_ratio: T,
    /// Emitter amplitude decay rate.
    pub gamma_star: T,
    pub cooperativity: T,
    /// Pump-cavity detuning `Delta_c`; `None` means the red mechanical
    /// sideband `Delta_c = omega_m`.
    pub pump_detuning: Option<T>,
    pub j_mode: JMode,
}

impl<T: Real> Default for PhysicalParams<T> {
    fn default() -> Self {
        Self::reference()
    }
}

impl<T: Real> PhysicalParams<T> {
    /// Reference resonator: 2 ng, 200 MHz breathing mode, Q = 3e7 at
    /// 1.55 um, 0.25 mm radius, weakly coupled emitter at C = 0.5.
    pub fn reference() -> Self {
        Self {
            mass: T::lit(2e-12),
            omega_m: T::lit(2e8),
            gamma_m: T::lit(2e5),
            wavelength: T::lit(1.55e-6),
            refractive_index: T::lit(1.44),
            omega_c: T::lit(1.935e14),
            quality_factor: T::lit(3e7),
            pump_power: T::lit(1e-2),
            probe_power: T::lit(1e-6),
            radius: T::lit(2.5e-4),
            spin_rate: T::zero(),
            delta_eg_ratio: T::lit(0.5),
            gamma_star: T::lit(3e4),
            cooperativity: T::lit(0.5),
            pump_detuning: None,
            j_mode: JMode::FromCooperativity,
        }
    }

    pub fn effective_pump_detuning(&self) -> T {
        self.pump_detuning.unwrap_or(self.omega_m)
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, T, bool); 15] = [
            ("mass_kg", self.mass, self.mass > T::zero()),
            ("omega_m", self.omega_m, self.omega_m > T::zero()),
            ("gamma_m", self.gamma_m, self.gamma_m >= T::zero()),
            ("lambda_m", self.wavelength, self.wavelength > T::zero()),
            (
                "refractive_index",
                self.refractive_index,
                self.refractive_index >= T::one(),
            ),
            ("omega_c", self.omega_c, self.omega_c > T::zero()),
            (
                "quality_factor",
                self.quality_factor,
                self.quality_factor > T::zero(),
            ),
            (
                "pump_power_w",
                self.pump_power,
                self.pump_power >= T::zero(),
            ),
            (
                "probe_power_w",
                self.probe_power,
                self.probe_power >= T::zero(),
            ),
            ("radius_m", self.radius, self.radius > T::zero()),
            ("spin_rate", self.spin_rate, true),
            ("delta_eg_ratio", self.delta_eg_ratio, true),
            ("gamma_star", self.gamma_star, self.gamma_star >= T::zero()),
            (
                "cooperativity",
                self.cooperativity,
                self.cooperativity >= T::zero(),
            ),
            ("pump_detuning", self.effective_pump_detuning(), true),
        ];
        for (field, value, ok) in checks {
            if !value.is_finite() {
                return Err(Error::validation(field, format!("not finite ({value})")));
            }
            if !ok {
                return Err(Error::validation(
                    field,
                    format!("out of range ({value:e})"),
                ));
            }
        }
        Ok(())
    }

    /// Non-fatal findings, e.g. a probe too strong for linear response.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.pump_power > T::zero()
            && self.probe_power / self.pump_power > T::lit(PROBE_RATIO_WARN)
        {
            out.push(format!(
                "probe/pump power ratio {:e} exceeds {PROBE_RATIO_WARN:e}; \
                 linearized sidebands may be inaccurate",
                (self.probe_power / self.pump_power).to_f64_lossy()
            ));
        }
        out
    }
}

/// Rates that every solver works with. Built by [`derive_rates`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates<T: Real> {
    pub kappa_ex: T,
    pub kappa_in: T,
    /// Amplitude decay rate `(kappa_ex + kappa_in) / 2`.
    pub beta: T,
    /// Optomechanical frequency pull per metre, `omega_c / r`.
    pub g: T,
    /// Emitter-mode coupling.
    pub j: T,
    pub eps_l: T,
    pub eps_p: T,
    pub delta_c: T,
    pub delta_ca: T,
    pub delta_cb: T,
    pub delta_eg: T,
    pub gamma_star: T,
    pub sagnac: SagnacShift<T>,
    pub omega_m: T,
    pub gamma_m: T,
    pub mass: T,
    pub radius: T,
    pub spin_rate: T,
}

impl<T: Real> DerivedRates<T> {
    /// `Delta_eg - i gamma_star`.
    pub fn delta_eg_complex(&self) -> Cplx<T> {
        Cplx::new(self.delta_eg, -self.gamma_star)
    }

    pub fn sqrt_kappa_ex(&self) -> T {
        self.kappa_ex.sqrt()
    }

    /// Radiation-pressure acceleration per intracavity photon, `hbar g / m`.
    pub fn photon_acceleration(&self) -> T {
        T::lit(HBAR) * self.g / self.mass
    }

    /// Static displacement from the centrifugal load, `r (Omega/omega_m)^2`.
    pub fn spin_displacement(&self) -> T {
        let q = self.spin_rate / self.omega_m;
        self.radius * q * q
    }

    pub fn cooperativity(&self) -> T {
        if self.kappa_ex > T::zero() && self.gamma_star > T::zero() {
            self.j * self.j / (T::lit(2.0) * self.kappa_ex * self.gamma_star)
        } else {
            T::infinity()
        }
    }
}

/// `sqrt(P / (hbar omega))`, the drive amplitude in sqrt(photons/s).
pub fn drive_amplitude<T: Real>(power: T, omega: T) -> Result<T> {
    if !(omega > T::zero()) {
        return Err(Error::Domain(format!(
            "drive frequency must be positive, got {omega:e}"
        )));
    }
    if !(power >= T::zero()) {
        return Err(Error::Domain(format!(
            "drive power must be >= 0, got {power:e}"
        )));
    }
    Ok((power / (T::lit(HBAR) * omega)).sqrt())
}

pub fn derive_rates<T: Real>(p: &PhysicalParams<T>, split: SagnacSplit) -> Result<DerivedRates<T>> {
    p.validate()?;
    let kappa_ex = p.omega_c / p.quality_factor;
    let kappa_in = kappa_ex;
    let beta = (kappa_ex + kappa_in) / T::lit(2.0);
    let g = p.omega_c / p.radius;
    let j = match p.j_mode {
        JMode::FromCooperativity => {
            (T::lit(2.0) * p.cooperativity * kappa_ex * p.gamma_star).sqrt()
        }
        JMode::FromTable => T::lit(0.75) * kappa_ex,
    };
    // The probe sits ~omega_m away from a ~1e14 carrier; omega_p ~ omega_l.
    let eps_l = drive_amplitude(p.pump_power, p.omega_c)?;
    let eps_p = drive_amplitude(p.probe_power, p.omega_c)?;
    let sagnac = sagnac_shift(
        p.refractive_index,
        p.radius,
        p.spin_rate,
        p.omega_c,
        T::lit(LIGHT_SPEED),
    )?;
    let delta_c = p.effective_pump_detuning();
    let (delta_ca, delta_cb) = effective_detunings(delta_c, &sagnac, split);
    Ok(DerivedRates {
        kappa_ex,
        kappa_in,
        beta,
        g,
        j,
        eps_l,
        eps_p,
        delta_c,
        delta_ca,
        delta_cb,
        delta_eg: p.delta_eg_ratio * p.omega_m,
        gamma_star: p.gamma_star,
        sagnac,
        omega_m: p.omega_m,
        gamma_m: p.gamma_m,
        mass: p.mass,
        radius: p.radius,
        spin_rate: p.spin_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn defaults() -> PhysicalParams<f64> {
        PhysicalParams::reference()
    }

    #[test]
    fn kappa_from_quality_factor() {
        let r = derive_rates(&defaults(), SagnacSplit::Opposite).unwrap();
        assert_eq!(r.kappa_ex, 1.935e14 / 3e7);
        assert!((r.kappa_ex - 6.45e6).abs() < 1e-6);
        assert_eq!(r.kappa_in, r.kappa_ex);
        assert_eq!(r.beta, r.kappa_ex);
        assert_eq!(r.g, 1.935e14 / 2.5e-4);
    }

    #[test]
    fn zero_cooperativity_gives_zero_coupling() {
        let mut p = defaults();
        p.cooperativity = 0.0;
        assert_eq!(derive_rates(&p, SagnacSplit::Opposite).unwrap().j, 0.0);
    }

    #[test]
    fn coupling_from_cooperativity() {
        // sqrt(2 * 0.5 * 6.45e6 * 3e4), 50-digit reference
        let r = derive_rates(&defaults(), SagnacSplit::Opposite).unwrap();
        assert!((r.j - 439_886.348_958_455_4).abs() < 1e-6);
        assert!((r.cooperativity() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn both_coupling_prescriptions_are_reachable() {
        let mut p = defaults();
        let a = derive_rates(&p, SagnacSplit::Opposite).unwrap().j;
        p.j_mode = JMode::FromTable;
        let b = derive_rates(&p, SagnacSplit::Opposite).unwrap().j;
        assert!((b - 0.75 * 6.45e6).abs() < 1e-6);
        assert!(b > 10.0 * a);
    }

    #[test]
    fn drive_amplitude_cases() {
        assert_eq!(drive_amplitude(0.0, 1.935e14).unwrap(), 0.0);
        let a = drive_amplitude(1e-3f64, 1.935e14).unwrap();
        let b = drive_amplitude(4e-3, 1.935e14).unwrap();
        assert!((b / a - 2.0).abs() < 1e-15);
        assert!(drive_amplitude(1.0, 0.0).is_err());
        assert!(drive_amplitude(1.0, -1.0).is_err());
    }

    #[test]
    fn drive_amplitude_matches_high_precision_reference() {
        // sqrt(P/(hbar omega)) evaluated with 50 significant digits.
        let ten_watt = drive_amplitude(10.0f64, 1.935e14).unwrap();
        assert!((ten_watt / 22_137_136_089.074_91 - 1.0).abs() < 1e-14);
        let ten_mw = drive_amplitude(1e-2f64, 1.935e14).unwrap();
        assert!((ten_mw / 700_037_709.145_888 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stationary_detunings_coincide() {
        let r = derive_rates(&defaults(), SagnacSplit::Opposite).unwrap();
        assert_eq!(r.delta_ca, r.delta_c);
        assert_eq!(r.delta_cb, r.delta_c);
        assert_eq!(r.delta_c, 2e8);
        assert_eq!(r.delta_eg, 1e8);
    }

    #[test]
    fn validation_names_field() {
        let mut p = defaults();
        p.mass = -1.0;
        match derive_rates(&p, SagnacSplit::Opposite) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "mass_kg"),
            other => panic!("{other:?}"),
        }
        let mut p = defaults();
        p.refractive_index = 0.5;
        assert!(matches!(
            p.validate(),
            Err(Error::Validation {
                field: "refractive_index",
                ..
            })
        ));
        let mut p = defaults();
        p.cooperativity = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn probe_ratio_warning() {
        let mut p = defaults();
        assert!(p.warnings().is_empty());
        p.probe_power = p.pump_power * 0.01;
        assert_eq!(p.warnings().len(), 1);
    }

    #[test]
    fn derive_rates_is_bit_deterministic() {
        let mut p = defaults();
        p.spin_rate = 3.3e4;
        let a = derive_rates(&p, SagnacSplit::Opposite).unwrap();
        let b = derive_rates(&p, SagnacSplit::Opposite).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn single_precision_rates() {
        let r = derive_rates(&PhysicalParams::<f32>::reference(), SagnacSplit::Opposite).unwrap();
        assert!((r.kappa_ex - 6.45e6).abs() < 1.0);
        assert!(r.eps_l.is_finite() && r.eps_l > 0.0);
    }

    proptest! {
        #[test]
        fn scaling_quality_factor_scales_kappa(k in prop::sample::select(vec![0.25f64, 0.5, 2.0, 4.0, 8.0])) {
            let p = defaults();
            let mut q = p;
            q.quality_factor *= k;
            let a = derive_rates(&p, SagnacSplit::Opposite).unwrap().kappa_ex;
            let b = derive_rates(&q, SagnacSplit::Opposite).unwrap().kappa_ex;
            prop_assert_eq!(b, a / k);
        }

        #[test]
        fn scaling_quality_factor_scales_kappa_generic(k in 0.1f64..10.0) {
            let p = defaults();
            let mut q = p;
            q.quality_factor *= k;
            let a = derive_rates(&p, SagnacSplit::Opposite).unwrap().kappa_ex;
            let b = derive_rates(&q, SagnacSplit::Opposite).unwrap().kappa_ex;
            prop_assert!((b * k / a - 1.0).abs() < 4.0 * f64::EPSILON);
        }
    }
}
