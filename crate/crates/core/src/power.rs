//! Event-based energy accounting and improvement ratios.
//!
//! Coefficients are held as integer micro-units so totals are exact and
//! ratios can be compared without rounding.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noc::{EventCounts, PacketClass, SimStats};

/// Micro-units per energy unit.
pub const MICRO: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PowerError {
    #[error("coefficient `{0}` must be a finite non-negative number")]
    Negative(&'static str),
    #[error("ina_add must be positive when accumulation is enabled")]
    FreeAdder,
    #[error("cannot compare runs of different layers or meshes: {0} vs {1}")]
    Mismatch(String, String),
    #[error("variant total is zero")]
    ZeroVariant,
}

/// Energy per event, in arbitrary units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyCoefficients {
    pub buffer_write: f64,
    pub buffer_read: f64,
    pub crossbar: f64,
    pub arbitration: f64,
    pub link: f64,
    pub ni_inject: f64,
    pub ni_eject: f64,
    pub ina_add: f64,
    /// Moving a local operand into the accumulation unit; zero by default
    /// since the PE-side read is charged to neither mode.
    pub operand_latch: f64,
}

impl Default for EnergyCoefficients {
    fn default() -> Self {
        Self {
            buffer_write: 1.0,
            buffer_read: 1.0,
            crossbar: 1.5,
            arbitration: 0.2,
            link: 2.0,
            ni_inject: 2.0,
            ni_eject: 2.0,
            ina_add: 0.8,
            operand_latch: 0.0,
        }
    }
}

impl EnergyCoefficients {
    pub fn as_array(&self) -> [f64; 9] {
        [
            self.buffer_write,
            self.buffer_read,
            self.crossbar,
            self.arbitration,
            self.link,
            self.ni_inject,
            self.ni_eject,
            self.ina_add,
            self.operand_latch,
        ]
    }

    pub fn validate(&self, ina_enabled: bool) -> Result<(), PowerError> {
        for (name, v) in EventCounts::FIELDS.iter().zip(self.as_array()) {
            if !v.is_finite() || v < 0.0 {
                return Err(PowerError::Negative(name));
            }
        }
        if ina_enabled && self.ina_add <= 0.0 {
            return Err(PowerError::FreeAdder);
        }
        Ok(())
    }

    /// Coefficients rounded to micro-units.
    pub fn micro(&self) -> [u64; 9] {
        self.as_array().map(|v| (v * MICRO as f64).round() as u64)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let a = self.as_array().map(|v| v * c);
        Self {
            buffer_write: a[0],
            buffer_read: a[1],
            crossbar: a[2],
            arbitration: a[3],
            link: a[4],
            ni_inject: a[5],
            ni_eject: a[6],
            ina_add: a[7],
            operand_latch: a[8],
        }
    }
}

/// Identifies the run a report belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunMeta {
    pub layer: String,
    pub mesh: u32,
    pub pes_per_router: u32,
    pub mode: String,
    pub coefficients: String,
}

impl RunMeta {
    fn key(&self) -> String {
        format!("{} {}x{} E={}", self.layer, self.mesh, self.mesh, self.pes_per_router)
    }
}

/// Energy in micro-units.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EnergyReport {
    pub meta: RunMeta,
    /// Per event kind, in [`EventCounts::FIELDS`] order.
    pub by_event: [u128; 9],
    /// Per packet class, in [`PacketClass::ALL`] order.
    pub by_class: [u128; 4],
    pub total: u128,
}

fn weigh(counts: &EventCounts, micro: &[u64; 9]) -> [u128; 9] {
    let c = counts.as_array();
    std::array::from_fn(|i| c[i] as u128 * micro[i] as u128)
}

pub fn tally(stats: &SimStats, coeffs: &EnergyCoefficients, meta: RunMeta) -> EnergyReport {
    let micro = coeffs.micro();
    let by_event = weigh(&stats.total, &micro);
    let by_class = std::array::from_fn(|i| weigh(stats.class(PacketClass::ALL[i]), &micro).iter().sum());
    EnergyReport { meta, by_event, total: by_event.iter().sum(), by_class }
}

impl EnergyReport {
    pub fn total_units(&self) -> f64 {
        self.total as f64 / MICRO as f64
    }
}

/// Formats micro-units as a fixed six-decimal number.
pub struct Units(pub u128);

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / MICRO as u128, self.0 % MICRO as u128)
    }
}

/// `baseline / variant` of two energy reports for the same layer and mesh.
pub fn improvement(baseline: &EnergyReport, variant: &EnergyReport) -> Result<Ratio<i128>, PowerError> {
    if baseline.meta.key() != variant.meta.key() {
        return Err(PowerError::Mismatch(baseline.meta.key(), variant.meta.key()));
    }
    ratio(baseline.total, variant.total)
}

/// `baseline / variant` of two latencies, in cycles.
pub fn latency_improvement(baseline: u64, variant: u64) -> Result<Ratio<i128>, PowerError> {
    ratio(baseline as u128, variant as u128)
}

fn ratio(baseline: u128, variant: u128) -> Result<Ratio<i128>, PowerError> {
    if variant == 0 {
        return if baseline == 0 { Ok(Ratio::from_integer(1)) } else { Err(PowerError::ZeroVariant) };
    }
    Ok(Ratio::new(baseline as i128, variant as i128))
}

pub fn ratio_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> RunMeta {
        RunMeta { layer: "L".into(), mesh: 8, pes_per_router: 1, mode: "m".into(), coefficients: "default".into() }
    }

    #[test]
    fn zero_stats_zero_energy() {
        let r = tally(&SimStats::new(4), &EnergyCoefficients::default(), meta());
        assert_eq!(r.total, 0);
    }

    #[test]
    fn single_link() {
        let mut s = SimStats::new(4);
        s.total.link = 1;
        s.by_class[0].link = 1;
        let r = tally(&s, &EnergyCoefficients::default(), meta());
        assert_eq!(r.total, 2 * MICRO as u128);
        assert_eq!(r.by_class.iter().sum::<u128>(), r.total);
        assert_eq!(Units(r.total).to_string(), "2.000000");
    }

    #[test]
    fn ratios() {
        let a = EnergyReport { meta: meta(), total: 200, ..Default::default() };
        let b = EnergyReport { meta: meta(), total: 100, ..Default::default() };
        assert_eq!(improvement(&a, &a).unwrap(), Ratio::from_integer(1));
        assert_eq!(improvement(&a, &b).unwrap(), Ratio::from_integer(2));
        let other = EnergyReport { meta: RunMeta { layer: "X".into(), ..meta() }, ..b };
        assert!(improvement(&a, &other).is_err());
        assert_eq!(latency_improvement(0, 0).unwrap(), Ratio::from_integer(1));
    }

    proptest::proptest! {
        #[test]
        fn scaling_coefficients_scales_totals(counts in proptest::array::uniform9(0u64..10_000), c in 1u32..50) {
            let mut s = SimStats::new(1);
            let [a, b, x, r, l, i, e, add, latch] = counts;
            s.total = EventCounts {
                buffer_write: a, buffer_read: b, crossbar: x, arbitration: r, link: l,
                ni_inject: i, ni_eject: e, ina_add: add, operand_latch: latch,
            };
            s.by_class[0] = s.total;
            let base = EnergyCoefficients::default();
            let one = tally(&s, &base, meta());
            let scaled = tally(&s, &base.scaled(c as f64), meta());
            proptest::prop_assert_eq!(scaled.total, one.total * c as u128);
            if one.total > 0 {
                proptest::prop_assert_eq!(improvement(&scaled, &scaled).unwrap(), Ratio::from_integer(1));
                let half = EnergyReport { total: one.total, ..scaled.clone() };
                proptest::prop_assert_eq!(improvement(&scaled, &half).unwrap(), Ratio::from_integer(c as i128));
            }
        }
    }

    #[test]
    fn validation() {
        let c = EnergyCoefficients { ina_add: 0.0, ..Default::default() };
        assert_eq!(c.validate(true), Err(PowerError::FreeAdder));
        assert!(c.validate(false).is_ok());
        let c = EnergyCoefficients { link: -1.0, ..Default::default() };
        assert_eq!(c.validate(false), Err(PowerError::Negative("link")));
    }
}
