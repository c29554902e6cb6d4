//! `key = value` parameter files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys not present keep the reference defaults. A repeated key overrides
//! the earlier one and produces a warning.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::params::{JMode, PhysicalParams};

pub const KEYS: [&str; 16] = [
    "mass_kg",
    "omega_m",
    "gamma_m",
    "lambda_m",
    "refractive_index",
    "omega_c",
    "quality_factor",
    "pump_power_w",
    "probe_power_w",
    "radius_m",
    "spin_rate",
    "delta_eg_ratio",
    "gamma_star",
    "cooperativity",
    "pump_detuning",
    "j_mode",
];

/// Value of `pump_detuning` that selects the mechanical sideband.
pub const SIDEBAND: &str = "omega_m";

fn number<T: Real>(line: usize, key: &str, value: &str) -> Result<T> {
    let v: f64 = value.parse().map_err(|_| Error::Config {
        line,
        message: format!("`{key}` expects a number, got `{value}`"),
    })?;
    T::from_f64(v).ok_or_else(|| Error::Config {
        line,
        message: format!("`{key}` = {value} is not representable"),
    })
}

/// Sets one key. `line` is only used for error messages (0 for command-line
/// overrides).
pub fn apply_key<T: Real>(
    p: &mut PhysicalParams<T>,
    line: usize,
    key: &str,
    value: &str,
) -> Result<()> {
    match key {
        "mass_kg" => p.mass = number(line, key, value)?,
        "omega_m" => p.omega_m = number(line, key, value)?,
        "gamma_m" => p.gamma_m = number(line, key, value)?,
        "lambda_m" => p.wavelength = number(line, key, value)?,
        "refractive_index" => p.refractive_index = number(line, key, value)?,
        "omega_c" => p.omega_c = number(line, key, value)?,
        "quality_factor" => p.quality_factor = number(line, key, value)?,
        "pump_power_w" => p.pump_power = number(line, key, value)?,
        "probe_power_w" => p.probe_power = number(line, key, value)?,
        "radius_m" => p.radius = number(line, key, value)?,
        "spin_rate" => p.spin_rate = number(line, key, value)?,
        "delta_eg_ratio" => p.delta_eg_ratio = number(line, key, value)?,
        "gamma_star" => p.gamma_star = number(line, key, value)?,
        "cooperativity" => p.cooperativity = number(line, key, value)?,
        "pump_detuning" => {
            p.pump_detuning = if value == SIDEBAND {
                None
            } else {
                Some(number(line, key, value)?)
            }
        }
        "j_mode" => {
            p.j_mode = value.parse::<JMode>().map_err(|e| Error::Config {
                line,
                message: e.to_string(),
            })?
        }
        other => {
            return Err(Error::Config {
                line,
                message: format!("unknown key `{other}` (known keys: {})", KEYS.join(", ")),
            })
        }
    }
    Ok(())
}

/// Parses a parameter file on top of `base`. Returns the parameters and any
/// warnings (duplicate keys).
pub fn parse_config<T: Real>(
    text: &str,
    base: PhysicalParams<T>,
) -> Result<(PhysicalParams<T>, Vec<String>)> {
    let mut p = base;
    let mut seen: Vec<(&str, usize)> = Vec::new();
    let mut warnings = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config {
                line,
                message: "empty key or value".into(),
            });
        }
        apply_key(&mut p, line, key, value)?;
        if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
            let w = format!("key `{key}` on line {line} overrides line {first}");
            log::warn!("{w}");
            warnings.push(w);
        } else {
            seen.push((key, line));
        }
    }
    Ok((p, warnings))
}

/// Writes every key with a value that parses back to the same bits.
pub fn dump_config<T: Real>(p: &PhysicalParams<T>) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    let f = |v: T| format!("{:?}", v.to_f64_lossy());
    put("mass_kg", f(p.mass));
    put("omega_m", f(p.omega_m));
    put("gamma_m", f(p.gamma_m));
    put("lambda_m", f(p.wavelength));
    put("refractive_index", f(p.refractive_index));
    put("omega_c", f(p.omega_c));
    put("quality_factor", f(p.quality_factor));
    put("pump_power_w", f(p.pump_power));
    put("probe_power_w", f(p.probe_power));
    put("radius_m", f(p.radius));
    put("spin_rate", f(p.spin_rate));
    put("delta_eg_ratio", f(p.delta_eg_ratio));
    put("gamma_star", f(p.gamma_star));
    put("cooperativity", f(p.cooperativity));
    put(
        "pump_detuning",
        p.pump_detuning.map_or_else(|| SIDEBAND.to_string(), f),
    );
    put("j_mode", p.j_mode.to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> PhysicalParams<f64> {
        PhysicalParams::reference()
    }

    #[test]
    fn empty_file_gives_defaults() {
        let (p, w) = parse_config("", table()).unwrap();
        assert_eq!(p, table());
        assert!(w.is_empty());
        let (p, _) = parse_config("# only a comment\n\n   \n", table()).unwrap();
        assert_eq!(p, table());
    }

    #[test]
    fn negative_spin_passes_through() {
        let (p, _) = parse_config("spin_rate = -40e3  # ccw\n", table()).unwrap();
        assert_eq!(p.spin_rate, -40e3);
    }

    #[test]
    fn duplicate_key_last_wins_with_warning() {
        let (p, w) = parse_config("cooperativity = 0.1\ncooperativity = 0.7\n", table()).unwrap();
        assert_eq!(p.cooperativity, 0.7);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("line 2"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_config("omega_m = 1\nbogus = 3\n", table()) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        match parse_config("\nomega_m = fast\n", table()) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_config("omega_m 3\n", table()).is_err());
        assert!(parse_config("j_mode = sometimes\n", table()).is_err());
    }

    #[test]
    fn enums_and_optional_detuning() {
        let (p, _) = parse_config("j_mode = table\npump_detuning = 1e8\n", table()).unwrap();
        assert_eq!(p.j_mode, JMode::FromTable);
        assert_eq!(p.pump_detuning, Some(1e8));
        let (p, _) = parse_config("pump_detuning = omega_m\n", p).unwrap();
        assert_eq!(p.pump_detuning, None);
    }

    #[test]
    fn dump_lists_every_key_once() {
        let d = dump_config(&table());
        for k in KEYS {
            assert_eq!(
                d.lines()
                    .filter(|l| l.starts_with(&format!("{k} =")))
                    .count(),
                1,
                "{k}"
            );
        }
    }

    proptest! {
        #[test]
        fn dump_round_trips_bit_for_bit(
            mass in 1e-15f64..1e-9,
            spin in -2e5f64..2e5,
            coop in 0.0f64..3.0,
            detuning in proptest::option::of(-1e9f64..1e9),
            table_j in any::<bool>(),
        ) {
            let mut p = table();
            p.mass = mass;
            p.spin_rate = spin;
            p.cooperativity = coop;
            p.pump_detuning = detuning;
            p.j_mode = if table_j { JMode::FromTable } else { JMode::FromCooperativity };
            let (q, _) = parse_config(&dump_config(&p), table()).unwrap();
            prop_assert_eq!(q, p);
        }
    }
}
