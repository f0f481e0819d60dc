use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::OnceLock;

use super::{Pulse, PulseUnit};
use crate::error::{Error, Result};

const FAMILY_TABLE: &str = include_str!("../../data/families.tbl");

#[derive(Debug, Clone, PartialEq)]
struct TableEntry {
    name: String,
    phases_in_pi: Vec<f64>,
    source: String,
}

fn table() -> &'static std::result::Result<Vec<TableEntry>, String> {
    static TABLE: OnceLock<std::result::Result<Vec<TableEntry>, String>> = OnceLock::new();
    TABLE.get_or_init(|| parse_table(FAMILY_TABLE).map_err(|e| e.to_string()))
}

fn parse_fraction(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((n, d)) => Some(n.parse::<f64>().ok()? / d.parse::<f64>().ok()?),
        None => s.parse().ok(),
    }
}

fn parse_table(text: &str) -> Result<Vec<TableEntry>> {
    let err = |line: usize, message: String| Error::Table {
        table: "families.tbl",
        line,
        message,
    };
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (body, source) = line
            .split_once('|')
            .ok_or_else(|| err(i + 1, "missing `| source` column".into()))?;
        let source = source.trim();
        if source.is_empty() {
            return Err(err(i + 1, "empty source citation".into()));
        }
        let mut fields = body.split_whitespace();
        let name = fields.next().ok_or_else(|| err(i + 1, "missing name".into()))?;
        let n: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(i + 1, "missing or bad pulse count".into()))?;
        let phases = fields
            .map(|f| parse_fraction(f).ok_or_else(|| err(i + 1, format!("bad phase `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        if phases.len() != n {
            return Err(err(
                i + 1,
                format!("{name}: declared {n} pulses but lists {}", phases.len()),
            ));
        }
        entries.push(TableEntry {
            name: name.to_string(),
            phases_in_pi: phases,
            source: source.to_string(),
        });
    }
    Ok(entries)
}

/// A named DD family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    /// `n` pulses, all about +y.
    Cpmg(usize),
    /// An entry of the shipped phase table (XY4, XY8, XY16, YY8, UR-n).
    Table(String),
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        if let Some(n) = upper
            .strip_prefix("CPMG-")
            .or_else(|| upper.strip_prefix("CPMG"))
        {
            return match n.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Family::Cpmg(n)),
                _ => Err(Error::UnknownFamily(s.to_string())),
            };
        }
        let key = upper.replace('-', "");
        let entries = table().as_ref().map_err(|e| Error::Table {
            table: "families.tbl",
            line: 0,
            message: e.clone(),
        })?;
        entries
            .iter()
            .find(|e| e.name == key)
            .map(|e| Family::Table(e.name.clone()))
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::Cpmg(n) => format!("CPMG-{n}"),
            Family::Table(name) => name.clone(),
        }
    }

    /// Pulse phases in radians.
    pub fn phases(&self) -> Result<Vec<f64>> {
        match self {
            Family::Cpmg(n) => Ok(vec![0.5 * PI; *n]),
            Family::Table(name) => {
                let entry = self.entry(name)?;
                Ok(entry.phases_in_pi.iter().map(|p| p * PI).collect())
            }
        }
    }

    /// Literature reference for the phase table.
    pub fn source(&self) -> Result<String> {
        match self {
            Family::Cpmg(_) => Ok("Meiboom, Gill, Rev. Sci. Instrum. 29, 688 (1958)".into()),
            Family::Table(name) => Ok(self.entry(name)?.source.clone()),
        }
    }

    fn entry(&self, name: &str) -> Result<&'static TableEntry> {
        let entries = table().as_ref().map_err(|e| Error::Table {
            table: "families.tbl",
            line: 0,
            message: e.clone(),
        })?;
        entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::UnknownFamily(name.to_string()))
    }

    /// Names of every built-in family except the open-ended CPMG-n.
    pub fn table_names() -> Vec<String> {
        match table() {
            Ok(entries) => entries.iter().map(|e| e.name.clone()).collect(),
            Err(_) => Vec::new(),
        }
    }
}

/// Builds a unit of `family` with centre-to-centre spacing `tau`: pulse `j`
/// sits at `(j - 1/2) tau` and the unit lasts `N tau`.
pub fn build_named_unit(family: &str, tau: f64, pulse_duration: f64, rabi: f64) -> Result<PulseUnit> {
    let fam: Family = family.parse()?;
    if !(pulse_duration > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "pulse duration must be positive, got {pulse_duration:e} s"
        )));
    }
    if pulse_duration >= tau {
        return Err(Error::OverlappingPulses { tau, pulse_duration });
    }
    let expected = PI / pulse_duration;
    if !((rabi - expected).abs() <= 1e-9 * expected) {
        return Err(Error::InvalidParameter(format!(
            "rabi frequency {rabi:e} rad/s does not give a π pulse of {pulse_duration:e} s"
        )));
    }
    let pulses = fam
        .phases()?
        .into_iter()
        .enumerate()
        .map(|(j, phase)| {
            let mut p = Pulse::rectangular((j as f64 + 0.5) * tau, phase, rabi);
            p.duration = pulse_duration;
            p
        })
        .collect::<Vec<_>>();
    let n = pulses.len();
    PulseUnit::new(fam.name(), n as f64 * tau, pulses)
}
