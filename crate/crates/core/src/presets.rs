//! Operating conditions for the standard figure set.
//!
//! All presets use a resonant emitter (`Delta_eg = Delta_c = omega_m`).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::spectra::SweepGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Spectrum,
    Isolation,
    EnhancementScan,
    DelayScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2,
    Fig3a,
    Fig3b,
    Fig4,
    Fig5a,
    Fig5b,
    Fig6,
}

pub const ALL: [Preset; 7] = [
    Preset::Fig2,
    Preset::Fig3a,
    Preset::Fig3b,
    Preset::Fig4,
    Preset::Fig5a,
    Preset::Fig5b,
    Preset::Fig6,
];

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::validation(
                "preset",
                format!("unknown preset `{s}` (expected fig2, fig3a, fig3b, fig4, fig5a, fig5b or fig6)"),
            )
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Spin magnitude used for the fixed-rotation figures (s^-1).
pub const SPIN_40K: f64 = 4e4;

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
            Preset::Fig4 => "fig4",
            Preset::Fig5a => "fig5a",
            Preset::Fig5b => "fig5b",
            Preset::Fig6 => "fig6",
        }
    }

    pub fn kind(self) -> PresetKind {
        match self {
            Preset::Fig2 | Preset::Fig3a | Preset::Fig3b | Preset::Fig5a => PresetKind::Spectrum,
            Preset::Fig4 => PresetKind::Isolation,
            Preset::Fig5b => PresetKind::EnhancementScan,
            Preset::Fig6 => PresetKind::DelayScan,
        }
    }

    pub fn params(self) -> PhysicalParams<f64> {
        let mut p = PhysicalParams::reference();
        p.delta_eg_ratio = 1.0;
        p.spin_rate = self.spins()[0];
        p.cooperativity = self.cooperativities()[0];
        p
    }

    /// Cooperativities of the curves in the figure; the first is the default.
    pub fn cooperativities(self) -> Vec<f64> {
        match self {
            Preset::Fig5a => vec![0.5],
            _ => vec![0.0, 0.5],
        }
    }

    /// Signed spin rates of the curves (spectrum presets) or the spin
    /// magnitude (isolation).
    pub fn spins(self) -> Vec<f64> {
        match self {
            Preset::Fig2 | Preset::Fig5b | Preset::Fig6 => vec![0.0],
            Preset::Fig3a => vec![SPIN_40K],
            Preset::Fig3b => vec![-SPIN_40K],
            Preset::Fig4 => vec![SPIN_40K],
            Preset::Fig5a => vec![SPIN_40K, 0.0, -SPIN_40K],
        }
    }

    pub fn grid(self) -> SweepGrid<f64> {
        match self {
            Preset::Fig5a => SweepGrid {
                start: -10e6,
                stop: 0.0,
                count: 1001,
            },
            _ => SweepGrid::default_window(),
        }
    }

    /// Spin magnitudes for the scan presets: 0..120 kHz in 2 kHz steps.
    pub fn omega_scan(self) -> Vec<f64> {
        match self {
            Preset::Fig5b | Preset::Fig6 => (0..=60).map(|k| k as f64 * 2e3).collect(),
            _ => Vec::new(),
        }
    }
}
