//! Unit-suffixed numeric literals shared by `.ddseq` files and run configs.
//!
//! ```text
//! literal  := [coeff "pi*"] number [suffix]
//! coeff    := number | ""            (so "2pi*5kHz" and "pi*5kHz" both work)
//! number   := decimal ["/" decimal]
//! suffix   := time | frequency | angular | angle | field | "%"
//! time     := "s" | "ms" | "us" | "µs" | "ns" | "ps"
//! frequency:= "Hz" | "kHz" | "MHz" | "GHz"
//! angular  := "rad/s" | "krad/s" | "Mrad/s" | "Grad/s"
//! angle    := "rad" | "deg" | "pi"
//! field    := "G" | "mT" | "T"
//! ```
//!
//! A frequency written with the `2pi*` prefix is an angular frequency in
//! rad/s; a bare `Hz` value is a cyclic frequency. Quantities that are
//! angular by nature (Rabi frequency, couplings, detuning) refuse bare Hz so
//! that a missing factor of 2π cannot slip through.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Frequency,
    AngularFrequency,
    Angle,
    Field,
    Dimensionless,
}

/// A parsed literal in SI-style base units: seconds, Hz, rad/s, radians,
/// gauss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub dimension: Dimension,
}

fn parse_number(s: &str) -> Result<f64, String> {
    let parse = |t: &str| -> Result<f64, String> {
        let ok = !t.is_empty()
            && t.chars()
                .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'))
            && t.chars().any(|c| c.is_ascii_digit());
        if !ok {
            return Err(format!("`{t}` is not a number"));
        }
        t.parse::<f64>().map_err(|_| format!("`{t}` is not a number"))
    };
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let d = parse(d)?;
            if d == 0.0 {
                return Err("division by zero".into());
            }
            parse(n)? / d
        }
        None => parse(s)?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// Splits `text` into its numeric head and alphabetic suffix. The head may
/// contain an exponent, so `1e-6s` splits as (`1e-6`, `s`).
fn split_suffix(text: &str) -> (&str, &str) {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let is_exp = (c == 'e' || c == 'E')
            && i > 0
            && (bytes[i - 1] as char).is_ascii_digit() | (bytes[i - 1] == b'.')
            && bytes
                .get(i + 1)
                .map(|&b| (b as char).is_ascii_digit() || b == b'-' || b == b'+')
                .unwrap_or(false)
            && bytes[i + 1..]
                .iter()
                .skip_while(|b| **b == b'-' || **b == b'+')
                .next()
                .map(|b| b.is_ascii_digit())
                .unwrap_or(false);
        if c.is_ascii_digit() || matches!(c, '.' | '/' | '+' | '-') || is_exp {
            if is_exp {
                i += 2;
            } else {
                i += 1;
            }
            continue;
        }
        break;
    }
    (&text[..i], &text[i..])
}

/// Parses one literal.
pub fn parse_quantity(text: &str) -> Result<Quantity, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty literal".into());
    }
    if let Some(idx) = text.find("pi*") {
        let coeff = &text[..idx];
        let coeff = if coeff.is_empty() { 1.0 } else { parse_number(coeff)? };
        let rest = parse_quantity(&text[idx + 3..])?;
        return match rest.dimension {
            Dimension::Frequency => Ok(Quantity {
                value: coeff * PI * rest.value,
                dimension: Dimension::AngularFrequency,
            }),
            Dimension::Dimensionless => Ok(Quantity {
                value: coeff * PI * rest.value,
                dimension: Dimension::Angle,
            }),
            _ => Err(format!("`{text}`: the pi* prefix needs a frequency or a plain number")),
        };
    }
    let (head, suffix) = split_suffix(text);
    let number = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => parse_number(h)?,
    };
    if head.is_empty() && suffix != "pi" {
        return Err(format!("`{text}` has no numeric value"));
    }
    use Dimension::*;
    if head.is_empty() && suffix == "pi" {
        return Ok(Quantity {
            value: PI,
            dimension: Angle,
        });
    }
    // decimal exponent of the suffix; dividing by an exact power of ten keeps
    // "200ns" equal to the literal 2e-7
    let (exp10, dimension): (i32, Dimension) = match suffix {
        "" => (0, Dimensionless),
        "%" => (-2, Dimensionless),
        "s" => (0, Time),
        "ms" => (-3, Time),
        "us" | "µs" | "μs" => (-6, Time),
        "ns" => (-9, Time),
        "ps" => (-12, Time),
        "Hz" => (0, Frequency),
        "kHz" => (3, Frequency),
        "MHz" => (6, Frequency),
        "GHz" => (9, Frequency),
        "rad/s" => (0, AngularFrequency),
        "krad/s" => (3, AngularFrequency),
        "Mrad/s" => (6, AngularFrequency),
        "Grad/s" => (9, AngularFrequency),
        "rad" => (0, Angle),
        "deg" => return Ok(Quantity { value: number * PI / 180.0, dimension: Angle }),
        "pi" => return Ok(Quantity { value: number * PI, dimension: Angle }),
        "G" => (0, Field),
        "mT" => (1, Field),
        "T" => (4, Field),
        other => return Err(format!("unknown unit suffix `{other}` in `{text}`")),
    };
    let value = if exp10 >= 0 {
        number * 10f64.powi(exp10)
    } else {
        number / 10f64.powi(-exp10)
    };
    Ok(Quantity {
        value,
        dimension,
    })
}

impl Quantity {
    fn describe(&self) -> &'static str {
        match self.dimension {
            Dimension::Time => "a time",
            Dimension::Frequency => "a cyclic frequency",
            Dimension::AngularFrequency => "an angular frequency",
            Dimension::Angle => "an angle",
            Dimension::Field => "a magnetic field",
            Dimension::Dimensionless => "a plain number",
        }
    }

    pub fn as_time(&self) -> Result<f64, String> {
        match self.dimension {
            Dimension::Time => Ok(self.value),
            _ => Err(format!("expected a time (e.g. 200ns), got {}", self.describe())),
        }
    }

    /// Angular frequency in rad/s. Bare Hz values are rejected.
    pub fn as_angular_frequency(&self) -> Result<f64, String> {
        match self.dimension {
            Dimension::AngularFrequency => Ok(self.value),
            Dimension::Frequency => Err(
                "ambiguous frequency: write 2pi*<value>Hz for an angular frequency or use rad/s"
                    .into(),
            ),
            _ => Err(format!(
                "expected an angular frequency (e.g. 2pi*25MHz), got {}",
                self.describe()
            )),
        }
    }

    /// Cyclic frequency in Hz; angular values are divided by 2π.
    pub fn as_frequency_hz(&self) -> Result<f64, String> {
        match self.dimension {
            Dimension::Frequency => Ok(self.value),
            Dimension::AngularFrequency => Ok(self.value / (2.0 * PI)),
            _ => Err(format!("expected a frequency (e.g. 1.9MHz), got {}", self.describe())),
        }
    }

    /// Angle in radians; plain numbers are radians.
    pub fn as_angle(&self) -> Result<f64, String> {
        match self.dimension {
            Dimension::Angle | Dimension::Dimensionless => Ok(self.value),
            _ => Err(format!("expected an angle (e.g. 0.5pi, 90deg), got {}", self.describe())),
        }
    }

    pub fn as_field_gauss(&self) -> Result<f64, String> {
        match self.dimension {
            Dimension::Field => Ok(self.value),
            _ => Err(format!("expected a magnetic field (e.g. 450G), got {}", self.describe())),
        }
    }

    pub fn as_number(&self) -> Result<f64, String> {
        match self.dimension {
            Dimension::Dimensionless => Ok(self.value),
            _ => Err(format!("expected a plain number or percentage, got {}", self.describe())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Quantity {
        parse_quantity(s).unwrap()
    }

    #[test]
    fn times() {
        assert_eq!(q("200ns").as_time().unwrap(), 200e-9);
        assert_eq!(q("1.5us").as_time().unwrap(), 1.5e-6);
        assert_eq!(q("1e-6s").as_time().unwrap(), 1e-6);
        assert_eq!(q("5e-7s").as_time().unwrap(), 5e-7);
        assert_eq!(q("2.5E+2ns").as_time().unwrap(), 250e-9);
    }

    #[test]
    fn frequencies() {
        let rabi = q("2pi*25MHz");
        assert_eq!(rabi.dimension, Dimension::AngularFrequency);
        assert!((rabi.value - 2.0 * PI * 25e6).abs() < 1e-6);
        assert!(q("25MHz").as_angular_frequency().is_err());
        assert_eq!(q("1.9MHz").as_frequency_hz().unwrap(), 1.9e6);
        assert!((q("2pi*1kHz").as_frequency_hz().unwrap() - 1e3).abs() < 1e-9);
        assert_eq!(q("1.5e8rad/s").as_angular_frequency().unwrap(), 1.5e8);
    }

    #[test]
    fn angles() {
        assert_eq!(q("0").as_angle().unwrap(), 0.0);
        assert_eq!(q("pi").as_angle().unwrap(), PI);
        assert_eq!(q("-pi").as_angle().unwrap(), -PI);
        assert_eq!(q("0.5pi").as_angle().unwrap(), 0.5 * PI);
        assert_eq!(q("3/2pi").as_angle().unwrap(), 1.5 * PI);
        assert!((q("90deg").as_angle().unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(q("1.2rad").as_angle().unwrap(), 1.2);
    }

    #[test]
    fn fields_and_fractions() {
        assert_eq!(q("450G").as_field_gauss().unwrap(), 450.0);
        assert_eq!(q("45mT").as_field_gauss().unwrap(), 450.0);
        assert_eq!(q("5%").as_number().unwrap(), 0.05);
        assert_eq!(q("-0.05").as_number().unwrap(), -0.05);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "ns", "1.2.3ns", "5furlongs", "2pi*5ns", "1/0", "e5", "--1", "1e999s"] {
            assert!(parse_quantity(bad).is_err(), "accepted `{bad}`");
        }
    }
}
