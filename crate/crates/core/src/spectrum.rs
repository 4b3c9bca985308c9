//! Sampled spectra and their CSV form.
//!
//! On disk the first column is optical frequency in Hz (`freq_hz`); in memory
//! `freqs` is on the model axis (angular s⁻¹).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Transmission,
    Dos,
}

impl SpectrumKind {
    pub fn column(&self) -> &'static str {
        match self {
            SpectrumKind::Transmission => "transmission",
            SpectrumKind::Dos => "dos",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub kind: SpectrumKind,
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
}

/// Upper bound accepted for a power transmission sample.
pub const TRANSMISSION_CEILING: f64 = 1.0 + 1e-6;

impl Spectrum {
    pub fn new(kind: SpectrumKind, freqs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::invalid(
                "spectrum",
                format!("{} frequencies but {} values", freqs.len(), values.len()),
            ));
        }
        if freqs.len() < 2 {
            return Err(Error::invalid("spectrum", "needs at least 2 samples"));
        }
        if freqs.iter().any(|f| !f.is_finite()) || freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("spectrum", "frequencies must be finite and strictly increasing"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid("spectrum", format!("value {v} is not a finite non-negative number")));
        }
        if kind == SpectrumKind::Transmission {
            if let Some(v) = values.iter().find(|v| **v > TRANSMISSION_CEILING) {
                return Err(Error::invalid("spectrum", format!("transmission {v} exceeds 1")));
            }
        }
        Ok(Spectrum { kind, freqs, values })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Mean grid spacing.
    pub fn step(&self) -> f64 {
        (self.freqs[self.len() - 1] - self.freqs[0]) / (self.len() - 1) as f64
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "freq_hz,{}", self.kind.column())?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            writeln!(out, "{:.15e},{:.15e}", units::hz_from_angular(*f), v)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::Parse { line: 1, message: "empty file".into() }),
        };
        let kind = match header.trim() {
            "freq_hz,transmission" => SpectrumKind::Transmission,
            "freq_hz,dos" => SpectrumKind::Dos,
            other => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header freq_hz,transmission or freq_hz,dos, got {other:?}"),
                })
            }
        };
        let mut freqs = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let (Some(f), Some(v), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse { line: lineno, message: "expected 2 columns".into() });
            };
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    message: format!("{s:?}: {e}"),
                })
            };
            freqs.push(units::angular_from_hz(parse(f)?));
            values.push(parse(v)?);
        }
        Spectrum::new(kind, freqs, values).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })
    }
}
