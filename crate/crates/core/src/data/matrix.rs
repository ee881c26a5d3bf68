use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{MdcrError, Result};
use crate::scalar::Scalar;

/// Magic prefix of the binary matrix format.
pub const BINARY_MAGIC: &[u8; 8] = b"MDCRMAT1";

/// Dense real matrix, one instance per row.
///
/// Always at least 1×1 and free of NaN/Inf.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<F> {
    values: Array2<F>,
}

impl<F: Scalar> FeatureMatrix<F> {
    pub fn new(values: Array2<F>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows == 0 || cols == 0 {
            return Err(MdcrError::DimensionMismatch(format!(
                "feature matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(MdcrError::NonFinite { row, col });
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((r, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(MdcrError::DimensionMismatch(format!(
                "row {r} has {} values, expected {cols}",
                row.len()
            )));
        }
        let flat: Vec<F> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), cols), flat)
            .map_err(|e| MdcrError::DimensionMismatch(e.to_string()))?;
        Self::new(values)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, F> {
        self.values.view()
    }

    pub fn as_array(&self) -> &Array2<F> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<F> {
        self.values
    }

    pub(crate) fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            values: self.values.select(ndarray::Axis(0), indices),
        }
    }
}

/// On-disk matrix encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// `"<rows> <cols>"` header line then one whitespace-separated row per line.
    Text,
    /// `MDCRMAT1`, u64 LE rows, u64 LE cols, row-major f64 LE payload.
    Binary,
}

impl MatrixFormat {
    /// Sniffs the magic bytes; anything else is treated as text.
    pub fn detect(path: &Path) -> Result<Self> {
        let mut head = [0u8; 8];
        let mut file = File::open(path)?;
        let mut filled = 0;
        while filled < head.len() {
            let n = file.read(&mut head[filled..])?;
            if n == 0 {
                break;
            }
            filled += n;
        }
        Ok(if filled == 8 && &head == BINARY_MAGIC {
            MatrixFormat::Binary
        } else {
            MatrixFormat::Text
        })
    }
}

pub fn load_matrix<F: Scalar>(path: &Path, format: MatrixFormat) -> Result<FeatureMatrix<F>> {
    match format {
        MatrixFormat::Binary => read_binary(&mut BufReader::new(File::open(path)?)),
        MatrixFormat::Text => parse_text(&std::fs::read_to_string(path)?),
    }
}

pub fn save_matrix<F: Scalar>(
    path: &Path,
    matrix: &FeatureMatrix<F>,
    format: MatrixFormat,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        MatrixFormat::Binary => write_binary(&mut out, matrix.view())?,
        MatrixFormat::Text => out.write_all(format_text(matrix.view()).as_bytes())?,
    }
    out.flush()?;
    Ok(())
}

pub fn parse_text<F: Scalar>(text: &str) -> Result<FeatureMatrix<F>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| MdcrError::Format("missing \"<rows> <cols>\" header".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| MdcrError::Format(format!("invalid header dimension {s:?}")))
    };
    if dims.len() != 2 {
        return Err(MdcrError::Format(format!(
            "header must hold exactly two integers, got {header:?}"
        )));
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);

    let mut flat = Vec::with_capacity(rows.saturating_mul(cols));
    let mut seen = 0;
    for (line_no, line) in lines {
        if seen == rows {
            return Err(MdcrError::Format(format!(
                "line {}: more than the declared {rows} rows",
                line_no + 1
            )));
        }
        let mut count = 0;
        for (col, token) in line.split_whitespace().enumerate() {
            if col >= cols {
                return Err(MdcrError::Format(format!(
                    "row {seen}: more than the declared {cols} columns"
                )));
            }
            let value: f64 = token.parse().map_err(|_| {
                MdcrError::Format(format!("row {seen}, column {col}: invalid number {token:?}"))
            })?;
            if !value.is_finite() {
                return Err(MdcrError::NonFinite { row: seen, col });
            }
            flat.push(F::from_f64_lossy(value));
            count += 1;
        }
        if count != cols {
            return Err(MdcrError::Format(format!(
                "row {seen}: expected {cols} values, found {count}"
            )));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(MdcrError::Format(format!(
            "truncated: declared {rows} rows, found {seen}"
        )));
    }
    let values = Array2::from_shape_vec((rows, cols), flat)
        .map_err(|e| MdcrError::Format(e.to_string()))?;
    FeatureMatrix::new(values)
}

/// `{:?}` on f64 is the shortest representation that parses back exactly.
pub fn format_text<F: Scalar>(values: ArrayView2<'_, F>) -> String {
    let mut out = format!("{} {}\n", values.nrows(), values.ncols());
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{:?}", v.as_f64())).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_binary<F: Scalar, W: Write>(out: &mut W, values: ArrayView2<'_, F>) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(values.nrows() as u64).to_le_bytes())?;
    out.write_all(&(values.ncols() as u64).to_le_bytes())?;
    for v in values.iter() {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

/// Reads exactly one matrix, leaving the reader positioned after it.
pub fn read_binary<F: Scalar, R: Read>(input: &mut R) -> Result<FeatureMatrix<F>> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|_| MdcrError::Format("truncated: missing magic bytes".into()))?;
    if &magic != BINARY_MAGIC {
        return Err(MdcrError::Format(format!(
            "bad magic {:?}, expected \"MDCRMAT1\"",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut word = [0u8; 8];
    let mut read_dim = |what: &str| -> Result<usize> {
        input
            .read_exact(&mut word)
            .map_err(|_| MdcrError::Format(format!("truncated: missing {what} in header")))?;
        usize::try_from(u64::from_le_bytes(word))
            .map_err(|_| MdcrError::Format(format!("{what} does not fit in memory")))
    };
    let rows = read_dim("rows")?;
    let cols = read_dim("cols")?;
    let total = rows
        .checked_mul(cols)
        .ok_or_else(|| MdcrError::Format(format!("header {rows}x{cols} overflows")))?;

    let mut flat = Vec::with_capacity(total.min(1 << 24));
    for idx in 0..total {
        let (row, col) = (idx / cols, idx % cols);
        input.read_exact(&mut word).map_err(|_| {
            MdcrError::Format(format!(
                "truncated payload at row {row}, column {col} (header declares {rows}x{cols})"
            ))
        })?;
        let value = f64::from_le_bytes(word);
        if !value.is_finite() {
            return Err(MdcrError::NonFinite { row, col });
        }
        flat.push(F::from_f64_lossy(value));
    }
    let values = Array2::from_shape_vec((rows, cols), flat)
        .map_err(|e| MdcrError::Format(e.to_string()))?;
    FeatureMatrix::new(values)
}
