//! Matrix Market I/O.
//!
//! Matrices use the 1-based `coordinate real general` layout (`symmetric` is
//! accepted on read and expanded). Dense vectors use `array real general` with
//! a single column. Values are written with 17 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Result, SparseError, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_err(line: usize, message: impl Into<String>) -> SparseError {
    SparseError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(line_no: usize, line: &str) -> Result<(Layout, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(line_no, "expected '%%MatrixMarket matrix <layout> real <symmetry>'"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(line_no, format!("unsupported layout '{other}'"))),
    };
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(line_no, format!("unsupported field '{}'", tokens[3])));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_err(line_no, format!("unsupported symmetry '{other}'"))),
    };
    Ok((layout, symmetry))
}

/// Yields `(1-based line number, trimmed content)` for non-comment, non-blank lines.
fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(k, line)| match line {
            Err(e) => Some(Err(SparseError::Io(e))),
            Ok(l) => {
                let t = l.trim();
                (!t.is_empty() && !t.starts_with('%')).then(|| Ok((k + 2, t.to_string())))
            }
        })
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what}")))
}

/// Reads a coordinate-format matrix.
pub fn read_matrix<R: BufRead>(mut reader: R) -> Result<SparseMatrix> {
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let (layout, symmetry) = parse_header(1, &header)?;
    if layout != Layout::Coordinate {
        return Err(parse_err(1, "matrix files must use the coordinate layout"));
    }
    let mut lines = data_lines(reader);
    let (size_line, size) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing size line"))??;
    let mut it = size.split_whitespace();
    let nrows: usize = parse_num(size_line, it.next(), "row count")?;
    let ncols: usize = parse_num(size_line, it.next(), "column count")?;
    let nnz: usize = parse_num(size_line, it.next(), "entry count")?;
    if symmetry == Symmetry::Symmetric && nrows != ncols {
        return Err(parse_err(size_line, "symmetric matrix must be square"));
    }

    let mut triplets = Vec::with_capacity(if symmetry == Symmetry::Symmetric { 2 * nnz } else { nnz });
    let mut seen = 0;
    for entry in lines {
        let (line, text) = entry?;
        if seen == nnz {
            return Err(parse_err(line, "more entries than declared"));
        }
        let mut it = text.split_whitespace();
        let i: usize = parse_num(line, it.next(), "row index")?;
        let j: usize = parse_num(line, it.next(), "column index")?;
        let v: f64 = parse_num(line, it.next(), "value")?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(parse_err(line, format!("index ({i}, {j}) outside {nrows}x{ncols}")));
        }
        if !v.is_finite() {
            return Err(parse_err(line, "non-finite value"));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetry == Symmetry::Symmetric && i != j {
            if j > i {
                return Err(parse_err(line, "symmetric storage expects the lower triangle"));
            }
            triplets.push((j - 1, i - 1, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(size_line, format!("declared {nnz} entries, found {seen}")));
    }
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
}

/// Writes a matrix in coordinate general layout.
pub fn write_matrix<W: Write>(mut w: W, a: &SparseMatrix) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads a single-column `array` file (a `coordinate` n x 1 file is also accepted).
pub fn read_vector<R: BufRead>(mut reader: R) -> Result<Vec<f64>> {
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let (layout, _) = parse_header(1, &header)?;
    if layout == Layout::Coordinate {
        let rest: Vec<u8> = {
            let mut buf = Vec::new();
            reader.read_to_end(&mut buf)?;
            buf
        };
        let mut full = header.into_bytes();
        full.extend(rest);
        let m = read_matrix(full.as_slice())?;
        if m.ncols() != 1 {
            return Err(parse_err(2, "vector file must have one column"));
        }
        return Ok((0..m.nrows()).map(|i| m.get(i, 0)).collect());
    }
    let mut lines = data_lines(reader);
    let (size_line, size) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing size line"))??;
    let mut it = size.split_whitespace();
    let n: usize = parse_num(size_line, it.next(), "row count")?;
    let m: usize = parse_num(size_line, it.next(), "column count")?;
    if m != 1 {
        return Err(parse_err(size_line, "vector file must have one column"));
    }
    let mut out = Vec::with_capacity(n);
    for entry in lines {
        let (line, text) = entry?;
        if out.len() == n {
            return Err(parse_err(line, "more values than declared"));
        }
        let v: f64 = parse_num(line, text.split_whitespace().next(), "value")?;
        out.push(v);
    }
    if out.len() != n {
        return Err(parse_err(size_line, format!("declared {n} values, found {}", out.len())));
    }
    Ok(out)
}

pub fn write_vector<W: Write>(mut w: W, x: &[f64]) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", x.len())?;
    for v in x {
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}

pub fn mm_read(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    read_matrix(BufReader::new(File::open(path)?))
}

pub fn mm_write(path: impl AsRef<Path>, a: &SparseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(&mut w, a)?;
    w.flush()?;
    Ok(())
}

pub fn mm_read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_vector(BufReader::new(File::open(path)?))
}

pub fn mm_write_vector(path: impl AsRef<Path>, x: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vector(&mut w, x)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roundtrip(a: &SparseMatrix) -> SparseMatrix {
        let mut buf = Vec::new();
        write_matrix(&mut buf, a).unwrap();
        read_matrix(buf.as_slice()).unwrap()
    }

    #[test]
    fn identity_roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eye.mtx");
        mm_write(&path, &SparseMatrix::identity(3)).unwrap();
        assert_eq!(mm_read(&path).unwrap(), SparseMatrix::identity(3));
    }

    #[test]
    fn symmetric_lower_triangle_expands() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 3\n1 1 2\n2 1 1\n2 2 2\n";
        let a = read_matrix(text.as_bytes()).unwrap();
        let full = SparseMatrix::from_dense_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(a, full);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad_header = "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1\n";
        assert!(matches!(read_matrix(bad_header.as_bytes()), Err(SparseError::Parse { line: 1, .. })));
        let bad_entry = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n3 1 2.0\n";
        assert!(matches!(read_matrix(bad_entry.as_bytes()), Err(SparseError::Parse { line: 4, .. })));
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 x\n";
        assert!(matches!(read_matrix(short.as_bytes()), Err(SparseError::Parse { line: 3, .. })));
        let missing = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(matches!(read_matrix(missing.as_bytes()), Err(SparseError::Parse { .. })));
    }

    #[test]
    fn vector_roundtrip() {
        let x = vec![1.0, -2.5e-17, std::f64::consts::PI];
        let mut buf = Vec::new();
        write_vector(&mut buf, &x).unwrap();
        assert_eq!(read_vector(buf.as_slice()).unwrap(), x);
        let coo = "%%MatrixMarket matrix coordinate real general\n3 1 1\n2 1 4.0\n";
        assert_eq!(read_vector(coo.as_bytes()).unwrap(), vec![0.0, 4.0, 0.0]);
    }

    proptest! {
        #[test]
        fn seventeen_digits_roundtrip_bit_exactly(
            t in prop::collection::vec((0usize..6, 0usize..4, prop::num::f64::NORMAL), 0..20)
        ) {
            let a = SparseMatrix::from_triplets(6, 4, &t);
            prop_assume!(a.is_ok());
            let a = a.unwrap();
            let b = roundtrip(&a);
            prop_assert_eq!(a.pattern(), b.pattern());
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
