//! Matrix and weight file formats.
//!
//! Matrices are read from Matrix Market (`coordinate` or `array`, `real` or
//! `integer`, `general`) or headerless CSV. Weights are one value per line with
//! a `# sum=<value>` trailer.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{LewisError, Result};
use crate::linalg::{Matrix, WeightVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    MatrixMarket,
    Csv,
}

impl MatrixFormat {
    /// `.mtx` is Matrix Market, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("mtx") => MatrixFormat::MatrixMarket,
            _ => MatrixFormat::Csv,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = LewisError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mtx" | "mm" | "matrix-market" => Ok(MatrixFormat::MatrixMarket),
            "csv" => Ok(MatrixFormat::Csv),
            other => Err(LewisError::invalid(format!("unknown matrix format '{other}'"))),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> LewisError {
    LewisError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse '{tok}' as a number")))
}

pub fn read_matrix_market<R: BufRead>(input: R) -> Result<Matrix> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix <layout> <field> <symmetry>'"));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, format!("unsupported layout '{other}'"))),
    };
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field '{}'", fields[3])));
    }
    if fields[4] != "general" {
        return Err(parse_err(1, format!("unsupported symmetry '{}'", fields[4])));
    }

    let mut body = Vec::new();
    for (k, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        body.push((k + 1, t.to_string()));
    }
    let mut body = body.into_iter();
    let (size_line, size) = body.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    let expect = if coordinate { 3 } else { 2 };
    if dims.len() != expect {
        return Err(parse_err(size_line, format!("size line needs {expect} integers")));
    }
    let n: usize = parse_num(dims[0], size_line)?;
    let d: usize = parse_num(dims[1], size_line)?;
    let mut data = vec![0.0; n * d];
    if coordinate {
        let nnz: usize = parse_num(dims[2], size_line)?;
        let mut seen = 0;
        for (ln, entry) in body {
            let t: Vec<&str> = entry.split_whitespace().collect();
            if t.len() != 3 {
                return Err(parse_err(ln, "coordinate entry needs 'row col value'"));
            }
            let i: usize = parse_num(t[0], ln)?;
            let j: usize = parse_num(t[1], ln)?;
            if i == 0 || j == 0 || i > n || j > d {
                return Err(parse_err(ln, format!("index ({i}, {j}) outside {n} x {d}")));
            }
            data[(i - 1) * d + (j - 1)] += parse_num::<f64>(t[2], ln)?;
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_err(size_line, format!("declared {nnz} entries, found {seen}")));
        }
    } else {
        let mut k = 0;
        for (ln, entry) in body {
            for tok in entry.split_whitespace() {
                if k >= n * d {
                    return Err(parse_err(ln, "more values than the declared size"));
                }
                // Column-major.
                data[(k % n) * d + k / n] = parse_num(tok, ln)?;
                k += 1;
            }
        }
        if k != n * d {
            return Err(parse_err(size_line, format!("expected {} values, found {k}", n * d)));
        }
    }
    Matrix::new(n, d, data)
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let before = data.len();
        for tok in t.split(',') {
            data.push(parse_num::<f64>(tok.trim(), k + 1)?);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(parse_err(k + 1, format!("expected {c} columns, found {width}")))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(1, "no data rows"))?;
    Matrix::new(rows, cols, data)
}

pub fn read_matrix(path: &Path, format: Option<MatrixFormat>) -> Result<Matrix> {
    let reader = BufReader::new(File::open(path)?);
    match format.unwrap_or_else(|| MatrixFormat::from_path(path)) {
        MatrixFormat::MatrixMarket => read_matrix_market(reader),
        MatrixFormat::Csv => read_csv(reader),
    }
}

/// Dense `array` layout, column-major, 17 significant digits.
pub fn write_matrix_market<W: Write>(a: &Matrix, mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} {}", a.rows(), a.cols())?;
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            writeln!(out, "{:.16e}", a.get(i, j))?;
        }
    }
    Ok(())
}

pub fn write_csv<W: Write>(a: &Matrix, mut out: W) -> Result<()> {
    for row in a.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_matrix(a: &Matrix, path: &Path, format: Option<MatrixFormat>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format.unwrap_or_else(|| MatrixFormat::from_path(path)) {
        MatrixFormat::MatrixMarket => write_matrix_market(a, &mut out)?,
        MatrixFormat::Csv => write_csv(a, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

pub fn write_weights<W: Write>(w: &WeightVector, mut out: W) -> Result<()> {
    for v in w.as_slice() {
        writeln!(out, "{v:.16e}")?;
    }
    writeln!(out, "# sum={:.16e}", w.sum())?;
    Ok(())
}

/// Reads one value per line; `#` lines are ignored.
pub fn read_weights<R: BufRead>(input: R) -> Result<WeightVector> {
    let mut values = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        values.push(parse_num(t, k + 1)?);
    }
    WeightVector::new(values)
}
