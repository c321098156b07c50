//! Matrix Market coordinate I/O.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Writes `a` as `matrix coordinate real general` with 1-based indices.
pub fn write_matrix<W: Write>(a: &CsrMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows, a.ncols, a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Writes a dense vector as `matrix array real general` with one column.
pub fn write_vector<W: Write>(v: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{x:.17e}")?;
    }
    Ok(())
}

pub fn write_matrix_file(a: &CsrMatrix, path: impl AsRef<Path>) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(a, f)
}

pub fn write_vector_file(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vector(v, f)
}

/// Reads a real coordinate matrix. `symmetric` files are expanded to both
/// triangles.
pub fn read_matrix<R: Read>(r: R) -> Result<CsrMatrix> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().enumerate();
    let parse_err = |line: usize, msg: String| Error::Parse { line: line + 1, msg };

    let (l0, header) = lines.next().ok_or_else(|| parse_err(0, "empty file".into()))?;
    let header = header?.to_ascii_lowercase();
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(parse_err(l0, format!("unsupported header `{header}`")));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(l0, format!("unsupported field `{}`", tokens[3])));
    }
    let symmetric = match tokens[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(l0, format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (ln, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(parse_err(ln, "expected `rows cols nnz`".into()));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| parse_err(ln, e.to_string()));
                size = Some((p(parts[0])?, p(parts[1])?, p(parts[2])?));
            }
            Some((nr, nc, _)) => {
                if parts.len() != 3 {
                    return Err(parse_err(ln, "expected `i j value`".into()));
                }
                let i = parts[0].parse::<usize>().map_err(|e| parse_err(ln, e.to_string()))?;
                let j = parts[1].parse::<usize>().map_err(|e| parse_err(ln, e.to_string()))?;
                let v = parts[2].parse::<f64>().map_err(|e| parse_err(ln, e.to_string()))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(parse_err(ln, format!("index ({i}, {j}) out of range")));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| parse_err(0, "missing size line".into()))?;
    let stored = if symmetric {
        triplets.iter().filter(|(i, j, _)| i <= j).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(parse_err(0, format!("expected {nnz} entries, found {stored}")));
    }
    Ok(CsrMatrix::from_triplets(nr, nc, &triplets))
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    read_matrix(std::fs::File::open(path)?)
}
