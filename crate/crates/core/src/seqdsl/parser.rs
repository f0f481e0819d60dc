use std::f64::consts::PI;

use super::lexer::{tokenize, Tok, Token};
use super::literal::parse_quantity;
use super::{ParseDiagnostic, Severity};
use crate::sequence::{structural_issues, validate_parts, Pulse, PulseUnit, StructuralIssue};

/// Everything recovered from one document, valid or not.
#[derive(Debug, Default)]
pub(crate) struct Document {
    pub unit: Option<PulseUnit>,
    /// `Some` when a `repeat` block is present.
    pub repetitions: Option<(usize, Vec<f64>)>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
    diags: Vec<ParseDiagnostic>,
}

struct PulseDraft {
    at: f64,
    phase: f64,
    rabi: Option<f64>,
    at_pos: (usize, usize),
}

type Step<T> = Result<T, ()>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&mut self, pos: (usize, usize), message: impl Into<String>) {
        self.diags.push(ParseDiagnostic {
            line: pos.0,
            column: pos.1,
            message: message.into(),
            severity: Severity::Error,
        });
    }

    fn error_here(&mut self, expected: &str) {
        match self.peek().cloned() {
            Some(t) => {
                let found = t.describe();
                self.error_at((t.line, t.column), format!("expected {expected}, found {found}"))
            }
            None => self.error_at(self.eof, format!("expected {expected}, found end of input")),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Step<Token> {
        match self.peek() {
            Some(t) if t.tok == want => Ok(self.next().unwrap()),
            _ => {
                self.error_here(what);
                Err(())
            }
        }
    }

    fn keyword(&mut self, kw: &str) -> Step<Token> {
        match self.peek() {
            Some(Token { tok: Tok::Word(w), .. }) if w == kw => Ok(self.next().unwrap()),
            _ => {
                self.error_here(&format!("`{kw}`"));
                Err(())
            }
        }
    }

    fn word(&mut self, what: &str) -> Step<(String, (usize, usize))> {
        match self.peek().cloned() {
            Some(Token { tok: Tok::Word(w), line, column }) => {
                self.pos += 1;
                Ok((w, (line, column)))
            }
            _ => {
                self.error_here(what);
                Err(())
            }
        }
    }

    /// Reads a literal and converts it with `conv`.
    fn literal(
        &mut self,
        what: &str,
        conv: impl Fn(&super::Quantity) -> Result<f64, String>,
    ) -> Step<(f64, (usize, usize))> {
        let (w, pos) = self.word(what)?;
        match parse_quantity(&w).and_then(|q| conv(&q)) {
            Ok(v) => Ok((v, pos)),
            Err(e) => {
                self.error_at(pos, e);
                Err(())
            }
        }
    }

    /// Skips to just after the next `;`, or up to (not past) a `}`.
    fn recover(&mut self) {
        while let Some(t) = self.peek() {
            match t.tok {
                Tok::Semi => {
                    self.pos += 1;
                    return;
                }
                Tok::RBrace => return,
                _ => self.pos += 1,
            }
        }
    }

    fn is_word(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Word(w), .. }) if w == kw)
    }

    fn unit_header(&mut self) -> Step<(String, f64, Option<f64>, (usize, usize))> {
        let head = self.keyword("unit")?;
        let (name, _) = self.word("a unit name")?;
        let mut duration = None;
        let mut rabi = None;
        while let Some(Token { tok: Tok::Word(key), line, column }) = self.peek().cloned() {
            self.pos += 1;
            self.expect(Tok::Eq, "`=`")?;
            match key.as_str() {
                "T" => {
                    if duration.is_some() {
                        self.error_at((line, column), "duplicate attribute `T`");
                    }
                    duration = Some(self.literal("a duration", |q| q.as_time())?.0);
                }
                "rabi" => {
                    if rabi.is_some() {
                        self.error_at((line, column), "duplicate attribute `rabi`");
                    }
                    rabi = Some(self.literal("a Rabi frequency", |q| q.as_angular_frequency())?.0);
                }
                other => {
                    self.error_at((line, column), format!("unknown unit attribute `{other}`"));
                    return Err(());
                }
            }
        }
        let Some(duration) = duration else {
            self.error_at((head.line, head.column), "unit is missing `T=<duration>`");
            return Err(());
        };
        Ok((name, duration, rabi, (head.line, head.column)))
    }

    fn pulse_stmt(&mut self) -> Step<PulseDraft> {
        self.keyword("pi")?;
        self.keyword("at")?;
        let (at, at_pos) = self.literal("a pulse time", |q| q.as_time())?;
        self.keyword("phase")?;
        let (phase, _) = self.literal("a phase angle", |q| q.as_angle())?;
        let rabi = if self.is_word("rabi") {
            self.pos += 1;
            Some(self.literal("a Rabi frequency", |q| q.as_angular_frequency())?.0)
        } else {
            None
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(PulseDraft { at, phase, rabi, at_pos })
    }

    fn unit(&mut self) -> Option<PulseUnit> {
        let header = self.unit_header();
        if header.is_err() {
            // skip to the body, if any, so pulse errors still get reported
            while let Some(t) = self.peek() {
                if t.tok == Tok::LBrace {
                    break;
                }
                self.pos += 1;
            }
        }
        let open = self.expect(Tok::LBrace, "`{`");
        let mut drafts = Vec::new();
        let errors_before = self.diags.len();
        if open.is_ok() {
            loop {
                match self.peek().map(|t| t.tok.clone()) {
                    None => {
                        self.error_at(self.eof, "unterminated unit body: missing `}`");
                        break;
                    }
                    Some(Tok::RBrace) => {
                        self.pos += 1;
                        break;
                    }
                    Some(Tok::Word(w)) if w == "globalphase" => {
                        let t = self.next().unwrap();
                        self.error_at(
                            (t.line, t.column),
                            "`globalphase` belongs in a `repeat` block, not a unit body",
                        );
                        self.recover();
                    }
                    Some(_) => match self.pulse_stmt() {
                        Ok(d) => drafts.push(d),
                        Err(()) => self.recover(),
                    },
                }
            }
        }
        let (name, duration, unit_rabi, head_pos) = header.ok()?;
        if open.is_err() || self.diags.len() > errors_before {
            return None;
        }
        let pulses: Vec<Pulse> = drafts
            .iter()
            .map(|d| match d.rabi.or(unit_rabi) {
                Some(r) if r.is_finite() && r > 0.0 => Pulse::rectangular(d.at, d.phase, r),
                Some(_) => Pulse {
                    rabi_frequency: f64::NAN,
                    ..Pulse::instantaneous(d.at, d.phase)
                },
                None => Pulse::instantaneous(d.at, d.phase),
            })
            .collect();
        let issues = structural_issues(duration, &pulses);
        for issue in &issues {
            let pos = match issue {
                StructuralIssue::NoPulses | StructuralIssue::NonPositiveDuration => head_pos,
                StructuralIssue::NegativePulseWidth { index }
                | StructuralIssue::InconsistentRabi { index }
                | StructuralIssue::OutsideUnit { index }
                | StructuralIssue::OutOfOrder { index } => drafts[*index].at_pos,
                StructuralIssue::Overlap { second, .. } => drafts[*second].at_pos,
            };
            let message = match issue {
                StructuralIssue::OutsideUnit { .. } => "pulse outside unit".to_string(),
                StructuralIssue::InconsistentRabi { .. } => {
                    "Rabi frequency must be positive".to_string()
                }
                other => other.to_string(),
            };
            self.error_at(pos, message);
        }
        if !issues.is_empty() {
            return None;
        }
        let report = validate_parts(duration, &pulses);
        if !report.balanced {
            self.diags.push(ParseDiagnostic {
                line: head_pos.0,
                column: head_pos.1,
                message: format!(
                    "unit is not balanced (alternating-interval residual {:e} s)",
                    report.residual
                ),
                severity: Severity::Warning,
            });
        }
        PulseUnit::new(name, duration, pulses).ok()
    }

    fn repeat_block(&mut self) -> Option<(usize, Vec<f64>)> {
        let head = self.keyword("repeat").ok()?;
        let (count, count_pos) = self.word("a repetition count").ok()?;
        let m = match count.parse::<usize>() {
            Ok(m) if m >= 1 => m,
            _ => {
                self.error_at(count_pos, format!("repetition count must be a positive integer, got `{count}`"));
                return None;
            }
        };
        self.expect(Tok::LBrace, "`{`").ok()?;
        let mut phases = Vec::new();
        let before = self.diags.len();
        loop {
            match self.peek().map(|t| t.tok.clone()) {
                None => {
                    self.error_at(self.eof, "unterminated repeat block: missing `}`");
                    break;
                }
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    break;
                }
                Some(_) => {
                    let stmt = (|| {
                        self.keyword("globalphase")?;
                        let (phi, _) = self.literal("a phase angle", |q| q.as_angle())?;
                        self.expect(Tok::Semi, "`;`")?;
                        Ok::<f64, ()>(phi)
                    })();
                    match stmt {
                        Ok(phi) => phases.push(phi),
                        Err(()) => self.recover(),
                    }
                }
            }
        }
        if self.diags.len() > before {
            return None;
        }
        if phases.is_empty() {
            phases = vec![0.0; m];
        } else if phases.len() != m {
            self.error_at(
                (head.line, head.column),
                format!("repeat {m} lists {} globalphase lines", phases.len()),
            );
            return None;
        }
        Some((m, phases))
    }
}

pub(crate) fn parse_document(text: &str, allow_repeat: bool) -> Document {
    let toks = tokenize(text);
    let last_line = text.split('\n').count().max(1);
    let last_col = text.split('\n').next_back().map(|l| l.chars().count()).unwrap_or(0) + 1;
    let mut p = Parser {
        toks,
        pos: 0,
        eof: (last_line, last_col),
        diags: Vec::new(),
    };
    if p.toks.is_empty() {
        p.error_at((1, 1), "empty sequence source");
        return Document {
            diagnostics: p.diags,
            ..Default::default()
        };
    }
    let unit = p.unit();
    let mut repetitions = None;
    if p.peek().is_some() {
        if allow_repeat && p.is_word("repeat") {
            repetitions = p.repeat_block();
        } else if allow_repeat {
            p.error_here("`repeat` or end of input");
        } else {
            p.error_here("end of input");
        }
        if p.peek().is_some() && p.diags.iter().all(|d| d.severity != Severity::Error) {
            p.error_here("end of input");
        }
    }
    let failed = p.diags.iter().any(|d| d.severity == Severity::Error);
    Document {
        unit: if failed { None } else { unit },
        repetitions: if failed { None } else { repetitions },
        diagnostics: p.diags,
    }
}

/// `φ/π` rendered in the shortest form that round-trips.
pub(crate) fn format_phase(phi: f64) -> String {
    let r = phi / PI;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}pi")
    }
}
