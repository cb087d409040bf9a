//! Touchstone v1 two-port (`.s2p`) reader and writer.

use std::fmt::Write as _;
use std::path::Path;

use cpwchar_core::netparams::TwoPortRecord;
use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum TouchstoneError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> TouchstoneError {
    TouchstoneError::Parse { line, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FrequencyUnit {
    pub fn scale(self) -> f64 {
        match self {
            FrequencyUnit::Hz => 1.0,
            FrequencyUnit::KHz => 1e3,
            FrequencyUnit::MHz => 1e6,
            FrequencyUnit::GHz => 1e9,
        }
    }

    fn token(self) -> &'static str {
        match self {
            FrequencyUnit::Hz => "HZ",
            FrequencyUnit::KHz => "KHZ",
            FrequencyUnit::MHz => "MHZ",
            FrequencyUnit::GHz => "GHZ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Real / imaginary.
    Ri,
    /// Magnitude / angle in degrees.
    Ma,
    /// dB magnitude / angle in degrees.
    Db,
}

impl DataFormat {
    fn token(self) -> &'static str {
        match self {
            DataFormat::Ri => "RI",
            DataFormat::Ma => "MA",
            DataFormat::Db => "DB",
        }
    }

    fn decode(self, a: f64, b: f64) -> Complex64 {
        match self {
            DataFormat::Ri => Complex64::new(a, b),
            DataFormat::Ma => Complex64::from_polar(a, b.to_radians()),
            DataFormat::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        }
    }

    fn encode(self, z: Complex64) -> (f64, f64) {
        match self {
            DataFormat::Ri => (z.re, z.im),
            DataFormat::Ma => (z.norm(), z.arg().to_degrees()),
            DataFormat::Db => (20.0 * z.norm().log10(), z.arg().to_degrees()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionLine {
    pub unit: FrequencyUnit,
    pub format: DataFormat,
    pub resistance: f64,
}

impl Default for OptionLine {
    /// Touchstone defaults: `# GHZ S MA R 50`.
    fn default() -> Self {
        Self { unit: FrequencyUnit::GHz, format: DataFormat::Ma, resistance: 50.0 }
    }
}

impl OptionLine {
    fn parse(text: &str, line: usize) -> Result<Self, TouchstoneError> {
        let mut opt = OptionLine::default();
        let mut tokens = text.split_whitespace();
        while let Some(tok) = tokens.next() {
            match tok.to_ascii_uppercase().as_str() {
                "HZ" => opt.unit = FrequencyUnit::Hz,
                "KHZ" => opt.unit = FrequencyUnit::KHz,
                "MHZ" => opt.unit = FrequencyUnit::MHz,
                "GHZ" => opt.unit = FrequencyUnit::GHz,
                "RI" => opt.format = DataFormat::Ri,
                "MA" => opt.format = DataFormat::Ma,
                "DB" => opt.format = DataFormat::Db,
                "S" => {}
                "Y" | "Z" | "H" | "G" => return Err(parse_err(line, format!("unsupported parameter type {tok}"))),
                "R" => {
                    let v = tokens.next().ok_or_else(|| parse_err(line, "R without a value"))?;
                    opt.resistance = v
                        .parse()
                        .ok()
                        .filter(|r: &f64| *r > 0.0)
                        .ok_or_else(|| parse_err(line, format!("bad reference resistance {v:?}")))?;
                }
                other => return Err(parse_err(line, format!("unknown option token {other:?}"))),
            }
        }
        Ok(opt)
    }

    fn render(&self) -> String {
        format!("# {} S {} R {}", self.unit.token(), self.format.token(), self.resistance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Touchstone {
    pub options: OptionLine,
    /// Records with frequencies in Hz and complex (RI) parameters.
    pub records: Vec<TwoPortRecord>,
}

/// Parses two-port Touchstone v1 text. `!` starts a comment anywhere on a
/// line; the first `#` line is the option line.
pub fn parse(text: &str) -> Result<Touchstone, TouchstoneError> {
    let mut options: Option<OptionLine> = None;
    let mut records: Vec<TwoPortRecord> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('#') {
            if options.is_some() {
                return Err(parse_err(line, "second option line"));
            }
            options = Some(OptionLine::parse(rest, line)?);
            continue;
        }
        let opt = options.ok_or_else(|| parse_err(line, "data before the option line"))?;
        let values: Vec<f64> = content
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(line, format!("not a number: {t:?}"))))
            .collect::<Result<_, _>>()?;
        if values.len() != 9 {
            return Err(parse_err(line, format!("expected 9 columns, found {}", values.len())));
        }
        let frequency = values[0] * opt.unit.scale();
        if let Some(prev) = records.last() {
            if !(frequency > prev.frequency) {
                return Err(parse_err(line, format!("frequency {frequency} Hz is not increasing")));
            }
        }
        let p = |j: usize| opt.format.decode(values[1 + 2 * j], values[2 + 2 * j]);
        records.push(TwoPortRecord { frequency, s11: p(0), s21: p(1), s12: p(2), s22: p(3) });
    }
    let options = options.ok_or_else(|| parse_err(text.lines().count().max(1), "missing option line"))?;
    Ok(Touchstone { options, records })
}

pub fn read(path: &Path) -> Result<Touchstone, TouchstoneError> {
    parse(&std::fs::read_to_string(path)?)
}

/// Renders records in the requested unit and format. Numbers use the
/// shortest representation that parses back to the same value.
pub fn render(records: &[TwoPortRecord], options: &OptionLine, comments: &[&str]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "! {c}");
    }
    let _ = writeln!(out, "{}", options.render());
    for r in records {
        let _ = write!(out, "{:e}", r.frequency / options.unit.scale());
        for z in [r.s11, r.s21, r.s12, r.s22] {
            let (a, b) = options.format.encode(z);
            let _ = write!(out, " {a:e} {b:e}");
        }
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, records: &[TwoPortRecord], options: &OptionLine, comments: &[&str]) -> std::io::Result<()> {
    std::fs::write(path, render(records, options, comments))
}
