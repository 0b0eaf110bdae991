//! JSON file formats: matrix polynomials and command reports.
//!
//! Numbers are written in exponent form with 17 significant digits, which
//! round-trips every binary64 value, so `write(parse(file))` reproduces a
//! file written by this module byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use polyfact::rankdef::Verdict;
use polyfact::{CMatrix, ComplexScalar, LaurentMatrix};
use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::CliError;

/// A float written with 17 significant digits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite number"));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Num)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub power: i32,
    /// Row-major entries as `[re, im]` pairs.
    pub matrix: Vec<Vec<[Num; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub terms: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

impl MatrixFile {
    pub fn from_matrix(m: &LaurentMatrix, metadata: Option<Metadata>) -> Self {
        let terms = m
            .terms()
            .map(|(power, c)| Term {
                power,
                matrix: (0..c.nrows())
                    .map(|i| (0..c.ncols()).map(|j| [Num(c[(i, j)].re), Num(c[(i, j)].im)]).collect())
                    .collect(),
            })
            .collect();
        Self {
            rows: m.rows(),
            cols: m.cols(),
            terms,
            metadata,
        }
    }

    /// Checks the invariants and builds the matrix polynomial.
    pub fn to_matrix(&self) -> Result<LaurentMatrix, CliError> {
        let (rows, cols) = (self.rows, self.cols);
        if rows == 0 || cols == 0 {
            return Err(CliError::Input(format!("empty {rows}x{cols} matrix")));
        }
        for pair in self.terms.windows(2) {
            if pair[1].power <= pair[0].power {
                return Err(CliError::Input(format!(
                    "powers must be strictly increasing, found {} after {}",
                    pair[1].power, pair[0].power
                )));
            }
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            if term.matrix.len() != rows || term.matrix.iter().any(|r| r.len() != cols) {
                return Err(CliError::Input(format!("term of power {} is not {rows}x{cols}", term.power)));
            }
            let c = CMatrix::from_fn(rows, cols, |i, j| {
                let [re, im] = term.matrix[i][j];
                ComplexScalar::new(re.0, im.0)
            });
            terms.push((term.power, c));
        }
        LaurentMatrix::from_terms(rows, cols, terms).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("finite numbers serialize");
        s.push('\n');
        s
    }
}

/// Reads and converts a matrix file.
pub fn read_matrix(path: &Path) -> Result<LaurentMatrix, CliError> {
    MatrixFile::read(path)?.to_matrix()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl From<&Verdict> for VerdictEntry {
    fn from(v: &Verdict) -> Self {
        Self {
            pass: v.pass,
            measured: v.measured,
            threshold: v.threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub command: String,
    pub arguments: Vec<String>,
    pub options: BTreeMap<String, serde_json::Value>,
    pub verdicts: BTreeMap<String, VerdictEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
}

impl ReportFile {
    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
