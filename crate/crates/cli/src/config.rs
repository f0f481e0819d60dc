//! Run configuration files.
//!
//! TOML with one table per concern (`sequence`, `sweep` or `map`, `errors`,
//! `targets`, `rng`). Physical quantities are strings in the `.ddseq`
//! literal grammar, e.g. `"200ns"`, `"2pi*5kHz"`, `"450G"`, `"5%"`.

use std::f64::consts::PI;
use std::path::Path;

use ddsense::dynamics::{larmor_angular, ClassicalField, ClassicalOptions, ErrorModel, TargetSpin};
use ddsense::seqdsl::{parse_quantity, Quantity};
use ddsense::sequence::{Family, ReadoutBasis};
use ddsense::spectroscopy::{
    proton_ensemble, EnsembleSpec, RobustnessAxes, RobustnessConfig, SpectrumConfig, Sweep, Targets,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::{CliError, CliResult};

type Lit = Spanned<String>;

/// Config text after `--override` and `--seed` have been applied.
#[derive(Debug, Clone)]
pub struct ConfigText {
    pub origin: String,
    pub text: String,
    /// SHA-256 of the file as read.
    pub file_sha256: String,
    /// SHA-256 of `text`.
    pub effective_sha256: String,
    pub overrides: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// 1-based line and column of a byte offset.
pub fn locate(text: &str, offset: usize) -> (usize, usize) {
    let mut offset = offset.min(text.len());
    while !text.is_char_boundary(offset) {
        offset -= 1;
    }
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[start..].chars().count() + 1)
}

impl ConfigText {
    pub fn load(path: &Path, overrides: &[String], seed: Option<u64>) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let origin = path.display().to_string();
        let file_sha256 = sha256_hex(text.as_bytes());
        let mut all: Vec<String> = overrides.to_vec();
        if let Some(s) = seed {
            all.push(format!("rng.seed={s}"));
        }
        if all.is_empty() {
            return Ok(Self {
                effective_sha256: file_sha256.clone(),
                origin,
                text,
                file_sha256,
                overrides: all,
            });
        }
        let mut table: toml::Table = from_text(&origin, &text)?;
        for o in &all {
            apply_override(&mut table, o)?;
        }
        let merged = toml::to_string(&table).map_err(|e| CliError::Usage(format!("cannot rebuild config: {e}")))?;
        Ok(Self {
            origin: format!("{origin} (after overrides)"),
            effective_sha256: sha256_hex(merged.as_bytes()),
            text: merged,
            file_sha256,
            overrides: all,
        })
    }

    pub fn parse<T: DeserializeOwned>(&self) -> CliResult<T> {
        from_text(&self.origin, &self.text)
    }

    fn error_at(&self, offset: usize, message: impl Into<String>) -> CliError {
        let (line, column) = locate(&self.text, offset);
        CliError::Config {
            origin: self.origin.clone(),
            line,
            column,
            message: message.into(),
        }
    }

    fn quantity(&self, lit: &Lit, field: &str) -> CliResult<Quantity> {
        parse_quantity(lit.get_ref()).map_err(|m| self.error_at(lit.span().start, format!("{field}: {m}")))
    }

    fn get(&self, lit: &Lit, field: &str, want: fn(&Quantity) -> Result<f64, String>) -> CliResult<f64> {
        want(&self.quantity(lit, field)?).map_err(|m| self.error_at(lit.span().start, format!("{field}: {m}")))
    }
}

fn from_text<T: DeserializeOwned>(origin: &str, text: &str) -> CliResult<T> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| locate(text, s.start));
        CliError::Config {
            origin: origin.into(),
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })
}

/// `a.b.c=value`; the value is read as TOML when it parses, else as a string.
fn apply_override(table: &mut toml::Table, item: &str) -> CliResult<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{item}` is not KEY=VALUE")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("override key `{key}` is malformed")));
    }
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("override `{key}`: `{p}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    pub family: Spanned<String>,
    pub repetitions: usize,
    /// Rectangular π-pulse length; `"0s"` or absent for δ-pulses.
    pub pulse_duration: Option<Lit>,
    /// Ideal Rabi frequency, robustness maps only.
    pub rabi: Option<Lit>,
    /// `"x"`, `"-x"` or `"both"`.
    pub readout: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub start: Option<Lit>,
    pub stop: Option<Lit>,
    pub points: Option<usize>,
    pub frequencies: Option<Vec<Lit>>,
    pub taus: Option<Vec<Lit>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorsSection {
    pub amplitude: Option<Lit>,
    /// A plain number or percentage is a fraction of the ideal Rabi
    /// frequency; an angular frequency is absolute.
    pub detuning: Option<Lit>,
    pub y_phase: Option<Lit>,
    pub t2: Option<Lit>,
    pub detuning_during_free: Option<bool>,
    pub faulty_readout: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinEntry {
    pub label: Option<String>,
    /// Looked up in the gyromagnetic table at `targets.field`.
    pub species: Option<Spanned<String>>,
    pub larmor: Option<Lit>,
    pub a_perp: Lit,
    pub a_par: Lit,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleEntry {
    pub species: Option<String>,
    pub n_spins: usize,
    pub coupling_scale: Lit,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalEntry {
    pub amplitude: Lit,
    pub frequency: Lit,
    pub phase: Option<Lit>,
    pub phase_averaged: Option<bool>,
    pub substeps_per_pulse: Option<usize>,
    pub phase_grid: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsSection {
    pub field: Option<Lit>,
    pub independent: Option<bool>,
    #[serde(default)]
    pub spin: Vec<SpinEntry>,
    pub ensemble: Option<EnsembleEntry>,
    pub classical: Option<ClassicalEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

fn default_realizations() -> usize {
    10
}

impl Default for RngSection {
    fn default() -> Self {
        Self {
            seed: 0,
            realizations: default_realizations(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisEntry {
    pub min: Lit,
    pub max: Lit,
    pub points: Spanned<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    /// `"detuning-amplitude"` or `"y-phase-tau"`.
    pub kind: Spanned<String>,
    /// Spacing for the detuning × amplitude map.
    pub tau: Option<Lit>,
    pub x: AxisEntry,
    pub y: AxisEntry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumFile {
    pub sequence: SequenceSection,
    pub sweep: Spanned<SweepSection>,
    #[serde(default)]
    pub errors: ErrorsSection,
    pub targets: Option<Spanned<TargetsSection>>,
    #[serde(default)]
    pub rng: RngSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessFile {
    pub sequence: SequenceSection,
    pub map: MapSection,
    #[serde(default)]
    pub errors: ErrorsSection,
    #[serde(default)]
    pub rng: RngSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutChoice {
    One(ReadoutBasis),
    Both,
}

fn family(cfg: &ConfigText, f: &Spanned<String>) -> CliResult<String> {
    f.get_ref()
        .parse::<Family>()
        .map(|_| f.get_ref().clone())
        .map_err(|e| cfg.error_at(f.span().start, format!("sequence.family: {e}")))
}

fn readout(cfg: &ConfigText, r: &Option<Spanned<String>>) -> CliResult<ReadoutChoice> {
    let Some(r) = r else {
        return Ok(ReadoutChoice::One(ReadoutBasis::X));
    };
    match r.get_ref().trim().to_ascii_lowercase().as_str() {
        "x" | "+x" => Ok(ReadoutChoice::One(ReadoutBasis::X)),
        "-x" => Ok(ReadoutChoice::One(ReadoutBasis::MinusX)),
        "both" => Ok(ReadoutChoice::Both),
        other => Err(cfg.error_at(r.span().start, format!("readout: expected \"x\", \"-x\" or \"both\", got `{other}`"))),
    }
}

fn errors(cfg: &ConfigText, e: &ErrorsSection, rabi: Option<f64>) -> CliResult<ErrorModel> {
    let mut m = ErrorModel::ideal();
    if let Some(a) = &e.amplitude {
        m.amplitude_fraction = cfg.get(a, "errors.amplitude", Quantity::as_number)?;
    }
    if let Some(d) = &e.detuning {
        let q = cfg.quantity(d, "errors.detuning")?;
        m.detuning = match q.as_number() {
            Ok(fraction) => match rabi {
                Some(r) => fraction * r,
                None => {
                    return Err(cfg.error_at(
                        d.span().start,
                        "errors.detuning: a fractional detuning needs finite pulses; give an angular frequency",
                    ))
                }
            },
            Err(_) => cfg.get(d, "errors.detuning", Quantity::as_angular_frequency)?,
        };
    }
    if let Some(y) = &e.y_phase {
        m.y_phase_offset = cfg.get(y, "errors.y_phase", Quantity::as_angle)?;
    }
    if let Some(t) = &e.t2 {
        m.decoherence_t2 = Some(cfg.get(t, "errors.t2", Quantity::as_time)?);
    }
    if let Some(b) = e.detuning_during_free {
        m.detuning_during_free = b;
    }
    if let Some(b) = e.faulty_readout {
        m.faulty_readout = b;
    }
    Ok(m)
}

fn sweep(cfg: &ConfigText, s: &Spanned<SweepSection>) -> CliResult<Sweep> {
    let at = s.span().start;
    let sw = s.get_ref();
    let forms = [sw.start.is_some() || sw.stop.is_some() || sw.points.is_some(), sw.frequencies.is_some(), sw.taus.is_some()];
    if forms.iter().filter(|f| **f).count() != 1 {
        return Err(cfg.error_at(at, "sweep: give exactly one of start/stop/points, frequencies or taus"));
    }
    let result = if let Some(taus) = &sw.taus {
        let v = taus.iter().map(|t| cfg.get(t, "sweep.taus", Quantity::as_time)).collect::<CliResult<Vec<_>>>()?;
        Sweep::from_taus(v)
    } else if let Some(fs) = &sw.frequencies {
        let v = fs.iter().map(|f| cfg.get(f, "sweep.frequencies", Quantity::as_frequency_hz)).collect::<CliResult<Vec<_>>>()?;
        Sweep::from_frequencies(&v)
    } else {
        let (Some(a), Some(b), Some(n)) = (&sw.start, &sw.stop, sw.points) else {
            return Err(cfg.error_at(at, "sweep: start, stop and points must all be given"));
        };
        let a = cfg.get(a, "sweep.start", Quantity::as_frequency_hz)?;
        let b = cfg.get(b, "sweep.stop", Quantity::as_frequency_hz)?;
        Sweep::linear_frequencies(a, b, n)
    };
    result.map_err(|e| cfg.error_at(at, format!("sweep: {e}")))
}

fn targets(cfg: &ConfigText, t: Option<&Spanned<TargetsSection>>) -> CliResult<Targets> {
    let Some(t) = t else {
        return Ok(Targets::none());
    };
    let at = t.span().start;
    let t = t.get_ref();
    let field = t.field.as_ref().map(|f| cfg.get(f, "targets.field", Quantity::as_field_gauss)).transpose()?;
    if let Some(c) = &t.classical {
        if !t.spin.is_empty() || t.ensemble.is_some() {
            return Err(cfg.error_at(at, "targets: a classical field cannot be combined with spins"));
        }
        let mut options = ClassicalOptions::default();
        if let Some(v) = c.substeps_per_pulse {
            options.substeps_per_pulse = v;
        }
        if let Some(v) = c.phase_grid {
            options.phase_grid = v;
        }
        if let Some(v) = c.tolerance {
            options.tolerance = v;
        }
        let field = ClassicalField {
            amplitude: cfg.get(&c.amplitude, "targets.classical.amplitude", Quantity::as_angular_frequency)?,
            frequency_hz: cfg.get(&c.frequency, "targets.classical.frequency", Quantity::as_frequency_hz)?,
            phase: c.phase.as_ref().map(|p| cfg.get(p, "targets.classical.phase", Quantity::as_angle)).transpose()?.unwrap_or(0.0),
            phase_averaged: c.phase_averaged.unwrap_or(false),
        };
        return Ok(Targets::Field { field, options });
    }
    let mut spins = Vec::new();
    for (i, s) in t.spin.iter().enumerate() {
        let larmor = match (&s.larmor, &s.species) {
            (Some(l), _) => cfg.get(l, "targets.spin.larmor", Quantity::as_angular_frequency)?,
            (None, Some(sp)) => {
                let Some(b) = field else {
                    return Err(cfg.error_at(sp.span().start, "targets.spin.species needs targets.field"));
                };
                larmor_angular(sp.get_ref(), b).map_err(|e| cfg.error_at(sp.span().start, format!("targets.spin.species: {e}")))?
            }
            (None, None) => return Err(cfg.error_at(s.a_perp.span().start, "targets.spin: give species or larmor")),
        };
        let label = s
            .label
            .clone()
            .or_else(|| s.species.as_ref().map(|x| x.get_ref().clone()))
            .unwrap_or_else(|| format!("spin{i}"));
        let a_perp = cfg.get(&s.a_perp, "targets.spin.a_perp", Quantity::as_angular_frequency)?;
        let a_par = cfg.get(&s.a_par, "targets.spin.a_par", Quantity::as_angular_frequency)?;
        spins.push(TargetSpin::new(label, a_perp, a_par, larmor).map_err(|e| cfg.error_at(s.a_perp.span().start, e.to_string()))?);
    }
    if let Some(e) = &t.ensemble {
        let Some(b) = field else {
            return Err(cfg.error_at(e.coupling_scale.span().start, "targets.ensemble needs targets.field"));
        };
        let spec = EnsembleSpec {
            species: e.species.clone().unwrap_or_else(|| "1H".into()),
            n_spins: e.n_spins,
            field_gauss: b,
            coupling_scale: cfg.get(&e.coupling_scale, "targets.ensemble.coupling_scale", Quantity::as_angular_frequency)?,
            seed: e.seed.unwrap_or(0),
        };
        spins.extend(proton_ensemble(&spec).map_err(|err| cfg.error_at(e.coupling_scale.span().start, err.to_string()))?);
    }
    Ok(Targets::Spins {
        spins,
        independent: t.independent.unwrap_or(true),
    })
}

impl SpectrumFile {
    pub fn resolve(&self, cfg: &ConfigText) -> CliResult<(SpectrumConfig, ReadoutChoice)> {
        let seq = &self.sequence;
        let pulse_duration = match &seq.pulse_duration {
            Some(p) => cfg.get(p, "sequence.pulse_duration", Quantity::as_time)?,
            None => 0.0,
        };
        if let Some(r) = &seq.rabi {
            return Err(cfg.error_at(r.span().start, "sequence.rabi: spectra take pulse_duration instead"));
        }
        let rabi = (pulse_duration > 0.0).then(|| PI / pulse_duration);
        let choice = readout(cfg, &seq.readout)?;
        let config = SpectrumConfig {
            family: family(cfg, &seq.family)?,
            repetitions: seq.repetitions,
            pulse_duration,
            sweep: sweep(cfg, &self.sweep)?,
            errors: errors(cfg, &self.errors, rabi)?,
            targets: targets(cfg, self.targets.as_ref())?,
            realizations: self.rng.realizations,
            seed: self.rng.seed,
            readout: match choice {
                ReadoutChoice::One(b) => b,
                ReadoutChoice::Both => ReadoutBasis::X,
            },
        };
        Ok((config, choice))
    }
}

fn axis(cfg: &ConfigText, a: &AxisEntry, name: &str, want: fn(&Quantity) -> Result<f64, String>) -> CliResult<Vec<f64>> {
    let lo = cfg.get(&a.min, &format!("{name}.min"), want)?;
    let hi = cfg.get(&a.max, &format!("{name}.max"), want)?;
    let n = *a.points.get_ref();
    if lo == hi {
        return Ok(vec![lo]);
    }
    if n < 2 {
        return Err(cfg.error_at(a.points.span().start, format!("{name}.points: need at least 2 points when min ≠ max")));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

impl RobustnessFile {
    pub fn resolve(&self, cfg: &ConfigText) -> CliResult<RobustnessConfig> {
        let seq = &self.sequence;
        let Some(r) = &seq.rabi else {
            return Err(cfg.error_at(seq.family.span().start, "sequence.rabi is required for robustness maps"));
        };
        if let Some(p) = &seq.pulse_duration {
            return Err(cfg.error_at(p.span().start, "sequence.pulse_duration: maps derive it from rabi"));
        }
        let rabi = cfg.get(r, "sequence.rabi", Quantity::as_angular_frequency)?;
        let m = &self.map;
        let (axes, tau) = match m.kind.get_ref().as_str() {
            "detuning-amplitude" => {
                let Some(t) = &m.tau else {
                    return Err(cfg.error_at(m.kind.span().start, "map.tau is required for detuning-amplitude maps"));
                };
                (
                    RobustnessAxes::DetuningAmplitude {
                        detuning: axis(cfg, &m.x, "map.x", Quantity::as_number)?,
                        amplitude: axis(cfg, &m.y, "map.y", Quantity::as_number)?,
                    },
                    cfg.get(t, "map.tau", Quantity::as_time)?,
                )
            }
            "y-phase-tau" => {
                let tau = axis(cfg, &m.y, "map.y", Quantity::as_time)?;
                let first = tau[0];
                (
                    RobustnessAxes::YPhaseTau {
                        y_phase: axis(cfg, &m.x, "map.x", Quantity::as_angle)?,
                        tau,
                    },
                    first,
                )
            }
            other => {
                return Err(cfg.error_at(
                    m.kind.span().start,
                    format!("map.kind: expected \"detuning-amplitude\" or \"y-phase-tau\", got `{other}`"),
                ))
            }
        };
        Ok(RobustnessConfig {
            family: family(cfg, &seq.family)?,
            rabi,
            tau,
            repetitions: seq.repetitions,
            axes,
            base_errors: errors(cfg, &self.errors, Some(rabi))?,
            realizations: self.rng.realizations,
            seed: self.rng.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(s: &str) -> ConfigText {
        ConfigText {
            origin: "t.toml".into(),
            text: s.into(),
            file_sha256: String::new(),
            effective_sha256: String::new(),
            overrides: vec![],
        }
    }

    #[test]
    fn locate_counts_lines_and_chars() {
        assert_eq!(locate("ab\ncµd", 6), (2, 3));
        assert_eq!(locate("ab\ncµd", 5), (2, 2));
        assert_eq!(locate("", 0), (1, 1));
    }

    #[test]
    fn bad_literal_points_at_value() {
        let cfg = text("[sequence]\nfamily = \"XY8\"\nrepetitions = 4\npulse_duration = \"200 parsecs\"\n[sweep]\ntaus = [\"1us\"]\n");
        let f: SpectrumFile = cfg.parse().unwrap();
        match f.resolve(&cfg).unwrap_err() {
            CliError::Config { line, column, .. } => assert_eq!((line, column), (4, 18)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn overrides_create_nested_keys() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "rng.seed=7").unwrap();
        apply_override(&mut t, "sequence.family=XY4").unwrap();
        assert_eq!(t["rng"]["seed"].as_integer(), Some(7));
        assert_eq!(t["sequence"]["family"].as_str(), Some("XY4"));
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "rng.seed.x=1").is_err());
    }

    #[test]
    fn fractional_detuning_scales_with_rabi() {
        let cfg = text("detuning = \"5%\"\n");
        let e: ErrorsSection = cfg.parse().unwrap();
        let m = errors(&cfg, &e, Some(2.0)).unwrap();
        assert!((m.detuning - 0.1).abs() < 1e-15);
        assert!(errors(&cfg, &e, None).is_err());
    }
}
