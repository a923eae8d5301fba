//! CSV matrices with quoted `"re,im"` cells and JSON exports whose floats are
//! printed with 17 significant digits.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FredError, Result};
use crate::jordanforms::JordanForm;
use crate::linalg::{CMat, CVec};
use crate::operator_svd::OperatorSVD;
use crate::spectral::BiSpectralDecomposition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        ComplexJson { re: z.re, im: z.im }
    }
}

impl From<ComplexJson> for Complex64 {
    fn from(z: ComplexJson) -> Self {
        Complex64::new(z.re, z.im)
    }
}

pub fn complex_list(values: &[Complex64]) -> Vec<ComplexJson> {
    values.iter().copied().map(ComplexJson::from).collect()
}

pub fn format_complex(z: Complex64) -> String {
    format!("{:.16e},{:.16e}", z.re, z.im)
}

pub fn parse_complex(cell: &str) -> Result<Complex64> {
    let cell = cell.trim();
    let (a, b) = match cell.split_once(',') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (cell, "0"),
    };
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| invalid(format!("cannot parse complex cell {cell:?}")))
    };
    Ok(Complex64::new(parse(a)?, parse(b)?))
}

pub fn write_matrix_csv<W: Write>(out: W, m: &CMat) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Always)
        .from_writer(out);
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|z| format_complex(*z)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(input: R) -> Result<CMat> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(input);
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(rec.iter().map(parse_complex).collect::<Result<_>>()?);
    }
    if rows.is_empty() {
        return Err(invalid("empty matrix file"));
    }
    let cols = rows[0].len();
    Ok(CMat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Accepts a single column or a single row.
pub fn read_vector_csv<R: Read>(input: R) -> Result<CVec> {
    let m = read_matrix_csv(input)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(invalid(format!(
            "expected a vector, found a {}×{} matrix",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn write_vector_csv<W: Write>(out: W, v: &CVec) -> Result<()> {
    write_matrix_csv(out, &CMat::from_column_slice(v.len(), 1, v.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionExport {
    pub eigenvalues: Vec<ComplexJson>,
    pub biorth_residual: f64,
    pub hermitian: bool,
    pub significant: usize,
}

impl From<&BiSpectralDecomposition> for DecompositionExport {
    fn from(d: &BiSpectralDecomposition) -> Self {
        DecompositionExport {
            eigenvalues: complex_list(&d.eigenvalues),
            biorth_residual: d.biorth_residual,
            hermitian: d.hermitian_flag,
            significant: d.significant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockExport {
    pub lambda: ComplexJson,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanExport {
    pub blocks: Vec<BlockExport>,
    pub residuals: Vec<f64>,
}

impl From<&JordanForm> for JordanExport {
    fn from(jf: &JordanForm) -> Self {
        JordanExport {
            blocks: jf
                .blocks
                .iter()
                .map(|b| BlockExport {
                    lambda: b.lambda.into(),
                    m: b.size,
                })
                .collect(),
            residuals: jf.residuals.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdExport {
    pub singular_values: Vec<f64>,
    pub rank_numerical: usize,
}

impl From<&OperatorSVD> for SvdExport {
    fn from(s: &OperatorSVD) -> Self {
        SvdExport {
            singular_values: s.singular_values.clone(),
            rank_numerical: s.rank_numerical,
        }
    }
}

/// Prints every float as `{:.16e}` and non-finite values as `null`.
#[derive(Debug, Default, Clone, Copy)]
pub struct FixedDigits;

impl serde_json::ser::Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits);
    value.serialize(&mut ser)?;
    String::from_utf8(buf).map_err(|e| FredError::Io(e.to_string()))
}
