//! The `.ddseq` text format for custom pulse units.
//!
//! ```text
//! # XY4 with 20 ns pulses
//! unit xy4 T=4us rabi=2pi*25MHz {
//!     pi at 0.5us phase 0;
//!     pi at 1.5us phase 0.5pi;
//!     pi at 2.5us phase 0;
//!     pi at 3.5us phase 0.5pi;
//! }
//! ```
//!
//! Omitting `rabi` gives ideal instantaneous pulses; a pulse may override
//! the unit value with a trailing `rabi <freq>`. An exported plan appends a
//! `repeat M { globalphase <angle>; ... }` block with one line per unit.
//! The full grammar is in `docs/ddseq.md`.

mod lexer;
mod literal;
mod parser;

pub use literal::{parse_quantity, Dimension, Quantity};

use std::fmt::{self, Write as _};
use std::path::Path;

use crate::sequence::{PulseUnit, SequencePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A message tied to a 1-based line and column of the source.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

/// Diagnostics from a failed parse, prefixed with the source origin when
/// displayed.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub origin: String,
    pub items: Vec<ParseDiagnostic>,
}

impl Diagnostics {
    pub fn errors(&self) -> impl Iterator<Item = &ParseDiagnostic> {
        self.items.iter().filter(|d| d.severity == Severity::Error)
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.items.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}:{d}", self.origin)?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

/// Text of a `.ddseq` document plus where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSource {
    pub text: String,
    pub origin: String,
}

impl SequenceSource {
    pub fn inline(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            origin: "<inline>".into(),
        }
    }

    pub fn from_path(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            text: std::fs::read_to_string(path)?,
            origin: path.display().to_string(),
        })
    }
}

/// A successful parse together with any warnings.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<ParseDiagnostic>,
}

/// Parses a document containing exactly one unit.
pub fn parse_unit(source: &SequenceSource) -> Result<PulseUnit, Diagnostics> {
    parse_unit_with_warnings(source).map(|p| p.value)
}

pub fn parse_unit_with_warnings(source: &SequenceSource) -> Result<Parsed<PulseUnit>, Diagnostics> {
    let doc = parser::parse_document(&source.text, false);
    match doc.unit {
        Some(unit) => Ok(Parsed {
            value: unit,
            warnings: doc.diagnostics,
        }),
        None => Err(Diagnostics {
            origin: source.origin.clone(),
            items: doc.diagnostics,
        }),
    }
}

/// Parses a unit optionally followed by a `repeat` block. Without the block
/// the phase list is `[0.0]` (a single standard unit).
pub fn parse_plan(source: &SequenceSource) -> Result<(PulseUnit, Vec<f64>), Diagnostics> {
    let doc = parser::parse_document(&source.text, true);
    match doc.unit {
        Some(unit) => {
            let phases = doc.repetitions.map(|(_, p)| p).unwrap_or_else(|| vec![0.0]);
            Ok((unit, phases))
        }
        None => Err(Diagnostics {
            origin: source.origin.clone(),
            items: doc.diagnostics,
        }),
    }
}

fn write_unit(out: &mut String, unit: &PulseUnit) {
    let rates: Vec<f64> = unit.pulses().iter().map(|p| p.rabi_frequency).collect();
    let shared = rates.iter().all(|r| *r == rates[0]);
    let _ = write!(out, "unit {} T={:e}s", unit.name(), unit.duration());
    if shared && rates[0].is_finite() {
        let _ = write!(out, " rabi={:e}rad/s", rates[0]);
    }
    out.push_str(" {\n");
    for p in unit.pulses() {
        let _ = write!(
            out,
            "    pi at {:e}s phase {}",
            p.center_time,
            parser::format_phase(p.phase)
        );
        if !shared && p.rabi_frequency.is_finite() {
            let _ = write!(out, " rabi {:e}rad/s", p.rabi_frequency);
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
}

/// Canonical text for `unit`. Unit names containing whitespace or
/// punctuation are not representable and are replaced by `_` runs.
pub fn serialize_unit(unit: &PulseUnit) -> SequenceSource {
    let mut text = String::new();
    write_unit(&mut text, &sanitized(unit));
    SequenceSource {
        text,
        origin: format!("<serialized {}>", unit.name()),
    }
}

fn sanitized(unit: &PulseUnit) -> PulseUnit {
    let clean = sanitize_name(unit.name());
    if clean == unit.name() {
        unit.clone()
    } else {
        PulseUnit::new(clean, unit.duration(), unit.pulses().to_vec())
            .expect("renaming keeps a valid unit valid")
    }
}

/// Replaces characters the lexer treats specially so the name stays one word.
pub fn sanitize_name(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_whitespace() || matches!(c, '{' | '}' | ';' | '=' | '#') {
                '_'
            } else {
                c
            }
        })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

/// The unit of `plan` followed by an explicit `globalphase` line for every
/// repetition.
pub fn export_plan(plan: &SequencePlan, phases: &[f64]) -> crate::Result<SequenceSource> {
    plan.check_phases(phases)?;
    let mut text = String::new();
    write_unit(&mut text, &sanitized(plan.unit()));
    let _ = writeln!(text, "repeat {} {{", plan.repetitions());
    for phi in phases {
        let _ = writeln!(
            text,
            "    globalphase {};",
            parser::format_phase(phi.rem_euclid(std::f64::consts::TAU))
        );
    }
    text.push_str("}\n");
    Ok(SequenceSource {
        text,
        origin: format!("<plan {}>", plan.unit().name()),
    })
}
