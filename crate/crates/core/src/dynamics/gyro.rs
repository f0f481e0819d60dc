use std::f64::consts::TAU;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const GYRO_TABLE: &str = include_str!("../../data/gyromagnetic.tbl");

type Table = std::result::Result<Vec<(String, f64)>, String>;

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| parse(GYRO_TABLE).map_err(|e| e.to_string()))
}

fn parse(text: &str) -> Result<Vec<(String, f64)>> {
    let err = |line: usize, message: String| Error::Table {
        table: "gyromagnetic.tbl",
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (body, source) = line
            .split_once('|')
            .ok_or_else(|| err(i + 1, "missing `| source` column".into()))?;
        if source.trim().is_empty() {
            return Err(err(i + 1, "empty source citation".into()));
        }
        let mut fields = body.split_whitespace();
        let (Some(name), Some(value), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err(i + 1, "expected `SPECIES VALUE | source`".into()));
        };
        let khz: f64 = value.parse().map_err(|_| err(i + 1, format!("bad value `{value}`")))?;
        out.push((name.to_string(), khz * 1e3));
    }
    Ok(out)
}

fn lookup() -> Result<&'static [(String, f64)]> {
    table().as_deref().map_err(|e| Error::Table {
        table: "gyromagnetic.tbl",
        line: 0,
        message: e.clone(),
    })
}

/// Species listed in the shipped table.
pub fn species() -> Vec<String> {
    lookup().map(|t| t.iter().map(|(n, _)| n.clone()).collect()).unwrap_or_default()
}

/// γ/2π in Hz per gauss. Species names are case-insensitive (`1H`, `13c`).
pub fn gyromagnetic_ratio_hz_per_gauss(species: &str) -> Result<f64> {
    lookup()?
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(species.trim()))
        .map(|&(_, g)| g)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown nuclear species `{species}`")))
}

/// `|γ|B` in rad/s.
pub fn larmor_angular(species: &str, field_gauss: f64) -> Result<f64> {
    Ok(TAU * gyromagnetic_ratio_hz_per_gauss(species)?.abs() * field_gauss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proton_at_450_gauss() {
        let f = larmor_angular("1H", 450.0).unwrap() / TAU;
        assert!((f - 1.915987e6).abs() < 1.0);
        assert!((gyromagnetic_ratio_hz_per_gauss("13c").unwrap() - 1070.84).abs() < 1e-9);
        assert!(species().len() >= 2);
        assert!(gyromagnetic_ratio_hz_per_gauss("Xe").is_err());
    }

    #[test]
    fn malformed_rows_are_located() {
        match parse("# c\n1H 4.2 | ok\n13C x | y\n") {
            Err(Error::Table { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse("1H 4.2\n").is_err());
    }
}
