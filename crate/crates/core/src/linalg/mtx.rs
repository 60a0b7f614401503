//! Matrix Market text I/O for real general matrices, both the dense `array`
//! layout (column-major values) and the sparse `coordinate` layout (1-based
//! indices).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView2};

use super::SparseMatrix;
use crate::error::{Error, Result};

/// A matrix read from a Matrix Market stream, in the layout it was stored in.
#[derive(Debug, Clone, PartialEq)]
pub enum MarketMatrix {
    Dense(Array2<f64>),
    Sparse(SparseMatrix),
}

pub fn write_dense<W: Write>(out: &mut W, a: &ArrayView2<f64>) -> Result<()> {
    let mut buf = String::new();
    buf.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(buf, "{} {}", a.nrows(), a.ncols());
    for col in a.columns() {
        for v in col {
            let _ = writeln!(buf, "{v:e}");
        }
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn write_sparse<W: Write>(out: &mut W, a: &SparseMatrix) -> Result<()> {
    let mut buf = String::new();
    buf.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(buf, "{} {} {}", a.nrows(), a.ncols(), a.nnz());
    for (i, j, v) in a.triplets() {
        let _ = writeln!(buf, "{} {} {v:e}", i + 1, j + 1);
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::MatrixMarket(msg.into())
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| bad(format!("missing {what}")))?
        .parse()
        .map_err(|_| bad(format!("malformed {what}")))
}

pub fn read<R: BufRead>(input: R) -> Result<MarketMatrix> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad("empty stream"))??;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(bad(format!("bad header line: {header}")));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(bad(format!("unsupported field type {}", fields[3])));
    }
    if fields[4] != "general" {
        return Err(bad(format!("unsupported symmetry {}", fields[4])));
    }
    let dense = match fields[2].as_str() {
        "array" => true,
        "coordinate" => false,
        other => return Err(bad(format!("unsupported format {other}"))),
    };

    let mut body = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        body.push(t.to_string());
    }
    let mut rows_iter = body.iter();
    let size = rows_iter.next().ok_or_else(|| bad("missing size line"))?;
    let mut tok = size.split_whitespace();
    let rows: usize = parse_num(tok.next(), "row count")?;
    let cols: usize = parse_num(tok.next(), "column count")?;

    if dense {
        let mut a = Array2::zeros((rows, cols));
        let mut count = 0;
        for line in rows_iter {
            let v: f64 = parse_num(Some(line), "value")?;
            if count >= rows * cols {
                return Err(bad("too many values"));
            }
            a[[count % rows.max(1), count / rows.max(1)]] = v;
            count += 1;
        }
        if count != rows * cols {
            return Err(bad(format!("expected {} values, found {count}", rows * cols)));
        }
        if !a.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("matrix market array"));
        }
        Ok(MarketMatrix::Dense(a))
    } else {
        let nnz: usize = parse_num(tok.next(), "entry count")?;
        let mut triplets = Vec::with_capacity(nnz);
        for line in rows_iter {
            let mut t = line.split_whitespace();
            let i: usize = parse_num(t.next(), "row index")?;
            let j: usize = parse_num(t.next(), "column index")?;
            let v: f64 = parse_num(t.next(), "value")?;
            if i == 0 || j == 0 {
                return Err(bad("indices are 1-based"));
            }
            triplets.push((i - 1, j - 1, v));
        }
        if triplets.len() != nnz {
            return Err(bad(format!("expected {nnz} entries, found {}", triplets.len())));
        }
        Ok(MarketMatrix::Sparse(SparseMatrix::from_triplets(rows, cols, &triplets)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dense_layout_is_column_major() {
        let a = array![[1.0, 2.0], [3.0, 4.5]];
        let mut out = Vec::new();
        write_dense(&mut out, &a.view()).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert_eq!(text, "%%MatrixMarket matrix array real general\n2 2\n1e0\n3e0\n2e0\n4.5e0\n");
        assert_eq!(read(&out[..]).unwrap(), MarketMatrix::Dense(a));
    }

    #[test]
    fn sparse_round_trip_and_comments() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n3 2 2\n1 2 -0.25\n3 1 7\n";
        let m = read(text.as_bytes()).unwrap();
        let MarketMatrix::Sparse(s) = m else { panic!("expected sparse") };
        assert_eq!(s.triplets().collect::<Vec<_>>(), vec![(0, 1, -0.25), (2, 0, 7.0)]);
        let mut out = Vec::new();
        write_sparse(&mut out, &s).unwrap();
        assert_eq!(read(&out[..]).unwrap(), MarketMatrix::Sparse(s));
    }

    #[test]
    fn rejects_malformed_streams() {
        assert!(read("".as_bytes()).is_err());
        assert!(read("%%MatrixMarket matrix array complex general\n1 1\n1\n".as_bytes()).is_err());
        assert!(read("%%MatrixMarket matrix array real general\n2 1\n1\n".as_bytes()).is_err());
        assert!(read("%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1\n".as_bytes()).is_err());
    }
}
