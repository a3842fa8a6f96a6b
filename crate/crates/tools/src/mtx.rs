//! Matrix Market reader and writer for real matrices: sparse `coordinate`
//! (general or symmetric) and dense `array` (column-major).

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rom_core::linalg::SparseMatrix;

use crate::error::{ToolError, ToolResult};

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

struct Header {
    layout: Layout,
    symmetry: Symmetry,
}

fn parse_header(line: &str) -> ToolResult<Header> {
    let words: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(ToolError::format(1, format!("not a Matrix Market header: {line:?}")));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(ToolError::format(1, format!("unsupported layout {other:?}"))),
    };
    if words[3] != "real" && words[3] != "integer" {
        return Err(ToolError::format(1, format!("unsupported field {:?}", words[3])));
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(ToolError::format(1, format!("unsupported symmetry {other:?}"))),
    };
    Ok(Header { layout, symmetry })
}

/// Non-comment lines with their 1-based line numbers, after the header.
fn body<R: BufRead>(reader: R) -> ToolResult<(Header, Vec<(usize, String)>)> {
    let mut lines = reader.lines().enumerate();
    let first = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(ToolError::format(1, "empty file")),
    };
    let header = parse_header(&first)?;
    let mut rest = Vec::new();
    for (n, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        rest.push((n + 1, t.to_string()));
    }
    Ok((header, rest))
}

fn numbers<T: std::str::FromStr>(line: usize, text: &str, expected: usize) -> ToolResult<Vec<T>> {
    let out: Vec<T> = text
        .split_whitespace()
        .map(|w| {
            w.parse::<T>()
                .map_err(|_| ToolError::format(line, format!("cannot parse {w:?}")))
        })
        .collect::<ToolResult<_>>()?;
    if out.len() != expected {
        return Err(ToolError::format(
            line,
            format!("expected {expected} fields, found {}", out.len()),
        ));
    }
    Ok(out)
}

pub fn read_sparse<R: BufRead>(reader: R) -> ToolResult<SparseMatrix> {
    let (header, lines) = body(reader)?;
    if header.layout == Layout::Array {
        let dense = dense_from_lines(&header, &lines)?;
        return Ok(SparseMatrix::from_dense(&dense));
    }
    let mut it = lines.iter();
    let (ln, size) = it.next().ok_or_else(|| ToolError::format(1, "missing size line"))?;
    let size: Vec<usize> = numbers(*ln, size, 3)?;
    let (nrows, ncols, nnz) = (size[0], size[1], size[2]);
    if header.symmetry == Symmetry::Symmetric && nrows != ncols {
        return Err(ToolError::format(*ln, "symmetric matrix must be square"));
    }
    let mut triplets = Vec::with_capacity(nnz * 2);
    let mut count = 0;
    for (ln, text) in it {
        let words: Vec<&str> = text.split_whitespace().collect();
        if words.len() != 3 {
            return Err(ToolError::format(
                *ln,
                format!("expected 3 fields, found {}", words.len()),
            ));
        }
        let parse_idx = |w: &str, n: usize| -> ToolResult<usize> {
            let i: usize = w
                .parse()
                .map_err(|_| ToolError::format(*ln, format!("bad index {w:?}")))?;
            if i == 0 || i > n {
                return Err(ToolError::format(*ln, format!("index {i} outside 1..={n}")));
            }
            Ok(i - 1)
        };
        let i = parse_idx(words[0], nrows)?;
        let j = parse_idx(words[1], ncols)?;
        let v: f64 = words[2]
            .parse()
            .map_err(|_| ToolError::format(*ln, format!("bad value {:?}", words[2])))?;
        if header.symmetry == Symmetry::Symmetric {
            if j > i {
                return Err(ToolError::format(*ln, "symmetric storage expects the lower triangle"));
            }
            if i != j {
                triplets.push((j, i, v));
            }
        }
        triplets.push((i, j, v));
        count += 1;
    }
    if count != nnz {
        return Err(ToolError::format(
            lines.len(),
            format!("declared {nnz} entries, found {count}"),
        ));
    }
    SparseMatrix::from_triplets(nrows, ncols, triplets).map_err(|e| ToolError::format(0, e.to_string()))
}

fn dense_from_lines(header: &Header, lines: &[(usize, String)]) -> ToolResult<DMatrix<f64>> {
    let mut it = lines.iter();
    let (ln, size) = it.next().ok_or_else(|| ToolError::format(1, "missing size line"))?;
    let size: Vec<usize> = numbers(*ln, size, 2)?;
    let (nrows, ncols) = (size[0], size[1]);
    let values: Vec<f64> = it
        .map(|(ln, text)| numbers::<f64>(*ln, text, 1).map(|v| v[0]))
        .collect::<ToolResult<_>>()?;
    match header.symmetry {
        Symmetry::General => {
            if values.len() != nrows * ncols {
                return Err(ToolError::format(
                    *ln,
                    format!("expected {} values, found {}", nrows * ncols, values.len()),
                ));
            }
            Ok(DMatrix::from_column_slice(nrows, ncols, &values))
        }
        Symmetry::Symmetric => {
            if nrows != ncols || values.len() != nrows * (nrows + 1) / 2 {
                return Err(ToolError::format(
                    *ln,
                    "symmetric array needs the lower triangle of a square matrix",
                ));
            }
            let mut a = DMatrix::zeros(nrows, ncols);
            let mut k = 0;
            for j in 0..ncols {
                for i in j..nrows {
                    a[(i, j)] = values[k];
                    a[(j, i)] = values[k];
                    k += 1;
                }
            }
            Ok(a)
        }
    }
}

pub fn read_dense<R: BufRead>(reader: R) -> ToolResult<DMatrix<f64>> {
    let (header, lines) = body(reader)?;
    match header.layout {
        Layout::Array => dense_from_lines(&header, &lines),
        Layout::Coordinate => {
            let mut text = String::from("%%MatrixMarket matrix coordinate real ");
            text.push_str(if header.symmetry == Symmetry::Symmetric {
                "symmetric\n"
            } else {
                "general\n"
            });
            for (_, l) in &lines {
                text.push_str(l);
                text.push('\n');
            }
            Ok(read_sparse(text.as_bytes())?.to_dense())
        }
    }
}

/// Writes all stored entries in general coordinate form, row-major order.
pub fn write_sparse<W: Write>(mut w: W, a: &SparseMatrix) -> ToolResult<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Column-major array form.
pub fn write_dense<W: Write>(mut w: W, a: &DMatrix<f64>) -> ToolResult<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", a.nrows(), a.ncols())?;
    for v in a.iter() {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}
