//! Plain-text and binary file formats: sparse matrices, CSV vectors, 16-bit PGM images,
//! iterate traces and loss histories.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageVector;
use crate::linops::SparseMatrix;
use crate::scalar::Real;
use crate::solver::IterateTrace;

/// Column names of the trace CSV, in order.
pub const TRACE_COLUMNS: [&str; 8] = [
    "iter",
    "objective",
    "step_residual",
    "fixed_point_residual",
    "epsilon",
    "delta",
    "kappa",
    "wall_ms",
];

/// Largest sample value of the 16-bit PGM files written here.
pub const PGM_MAXVAL: u16 = 65535;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn is_comment(line: &str) -> bool {
    let t = line.trim_start();
    t.is_empty() || t.starts_with('%') || t.starts_with('#')
}

fn parse_num<T: Real>(tok: &str, line: usize) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| parse_err(line, format!("invalid number `{tok}`")))
}

fn parse_index(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| parse_err(line, format!("invalid index `{tok}`")))
}

/// Reads `rows cols nnz` followed by `nnz` lines of 0-based `row col value`.
/// Lines starting with `%` or `#` and blank lines are skipped.
pub fn read_sparse_matrix<T: Real>(reader: impl BufRead) -> Result<SparseMatrix<T>> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut last_line = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        last_line = lineno;
        if is_comment(&line) {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(lineno, format!("expected 3 fields, found {}", toks.len())));
        }
        match header {
            None => {
                header = Some((
                    parse_index(toks[0], lineno)?,
                    parse_index(toks[1], lineno)?,
                    parse_index(toks[2], lineno)?,
                ));
            }
            Some((rows, cols, _)) => {
                let r = parse_index(toks[0], lineno)?;
                let c = parse_index(toks[1], lineno)?;
                if r >= rows || c >= cols {
                    return Err(parse_err(lineno, format!("entry ({r}, {c}) outside {rows}×{cols}")));
                }
                let v: T = parse_num(toks[2], lineno)?;
                if !v.is_finite() {
                    return Err(parse_err(lineno, "non-finite matrix entry"));
                }
                triplets.push((r, c, v));
            }
        }
    }
    let (rows, cols, nnz) = header.ok_or_else(|| parse_err(last_line, "missing matrix header"))?;
    if triplets.len() != nnz {
        return Err(parse_err(
            last_line,
            format!("header declares {nnz} entries, found {}", triplets.len()),
        ));
    }
    SparseMatrix::from_triplets(rows, cols, &triplets)
}

pub fn write_sparse_matrix<T: Real>(m: &SparseMatrix<T>, mut w: impl Write) -> Result<()> {
    writeln!(w, "{} {} {}", m.rows(), m.cols(), m.nnz())?;
    for (r, c, v) in m.triplets() {
        writeln!(w, "{r} {c} {v:?}")?;
    }
    Ok(())
}

/// Reads numbers separated by commas, whitespace or newlines; `#`/`%` lines are skipped.
pub fn read_vector_csv<T: Real>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if is_comment(&line) {
            continue;
        }
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(parse_num(tok, i + 1)?);
        }
    }
    Ok(out)
}

/// One value per line, shortest round-trip formatting.
pub fn write_vector_csv<T: Real>(values: &[T], mut w: impl Write) -> Result<()> {
    for v in values {
        writeln!(w, "{v:?}")?;
    }
    Ok(())
}

/// Writes a binary 16-bit PGM (`P5 W H 65535`, big-endian samples). Values are mapped from
/// `[lo, hi]` onto `[0, 65535]` and clipped.
pub fn write_pgm<T: Real>(img: &ImageVector<T>, lo: f64, hi: f64, mut w: impl Write) -> Result<()> {
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("PGM range [{lo}, {hi}] is empty")));
    }
    writeln!(w, "P5 {} {} {}", img.width(), img.height(), PGM_MAXVAL)?;
    let scale = PGM_MAXVAL as f64 / (hi - lo);
    let mut buf = Vec::with_capacity(2 * img.len());
    for &v in img.as_slice() {
        let v = v.as_f64();
        let q = if v.is_nan() {
            0
        } else {
            ((v - lo) * scale).round().clamp(0.0, PGM_MAXVAL as f64) as u16
        };
        buf.extend_from_slice(&q.to_be_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn pgm_header_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(parse_err(1, "truncated PGM header"));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

/// Reads a binary PGM (8- or 16-bit) and maps samples back onto `[lo, hi]`.
pub fn read_pgm<T: Real>(mut reader: impl Read, lo: f64, hi: f64) -> Result<ImageVector<T>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut pos = 0;
    if pgm_header_token(&bytes, &mut pos)? != "P5" {
        return Err(parse_err(1, "not a binary PGM (missing P5 magic)"));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let tok = pgm_header_token(&bytes, &mut pos)?;
        *d = tok
            .parse()
            .map_err(|_| parse_err(1, format!("invalid PGM header field `{tok}`")))?;
    }
    let [width, height, maxval] = dims;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(parse_err(1, format!("unsupported PGM dimensions {width}×{height}, maxval {maxval}")));
    }
    pos += 1;
    let sample_bytes = if maxval > 255 { 2 } else { 1 };
    let needed = width * height * sample_bytes;
    if bytes.len() < pos + needed {
        return Err(parse_err(1, "truncated PGM pixel data"));
    }
    let data = &bytes[pos..pos + needed];
    let scale = (hi - lo) / maxval as f64;
    let pixels = (0..width * height)
        .map(|i| {
            let raw = if sample_bytes == 2 {
                u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as f64
            } else {
                data[i] as f64
            };
            T::lit(lo + raw * scale)
        })
        .collect();
    ImageVector::new(pixels, height, width)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Writes one row per executed iteration; absent diagnostics are empty cells. With
/// `include_timing = false` the `wall_ms` column is left empty so the file is reproducible.
pub fn write_trace_csv<T: Real>(trace: &IterateTrace<T>, include_timing: bool, mut w: impl Write) -> Result<()> {
    writeln!(w, "{}", TRACE_COLUMNS.join(","))?;
    for r in &trace.records {
        let wall = if include_timing { format!("{:?}", r.wall_ms) } else { String::new() };
        writeln!(
            w,
            "{},{:?},{:?},{},{},{},{},{}",
            r.iteration,
            r.objective,
            r.step_residual,
            opt(r.fixed_point_residual),
            opt(r.epsilon),
            opt(r.delta),
            opt(r.kappa),
            wall
        )?;
    }
    Ok(())
}

/// Parsed trace row (all columns except `iter` may be empty).
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub values: [Option<f64>; 7],
}

pub fn read_trace_csv(reader: impl BufRead) -> Result<Vec<TraceRow>> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty trace file"))??;
    if header.trim() != TRACE_COLUMNS.join(",") {
        return Err(parse_err(1, "unexpected trace header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != TRACE_COLUMNS.len() {
            return Err(parse_err(lineno, format!("expected {} fields", TRACE_COLUMNS.len())));
        }
        let iter = parse_index(fields[0], lineno)?;
        let mut values = [None; 7];
        for (v, f) in values.iter_mut().zip(&fields[1..]) {
            if !f.is_empty() {
                *v = Some(parse_num::<f64>(f, lineno)?);
            }
        }
        rows.push(TraceRow { iter, values });
    }
    Ok(rows)
}

/// `epoch,loss` rows, epochs counted from 1.
pub fn write_loss_csv(history: &[f64], mut w: impl Write) -> Result<()> {
    writeln!(w, "epoch,loss")?;
    for (e, l) in history.iter().enumerate() {
        writeln!(w, "{},{l:?}", e + 1)?;
    }
    Ok(())
}

pub fn open_reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::LinearOperator;

    #[test]
    fn sparse_matrix_round_trip() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.5), (1, 2, -0.1), (0, 2, 1e-300)]).unwrap();
        let mut buf = Vec::new();
        write_sparse_matrix(&m, &mut buf).unwrap();
        let back: SparseMatrix<f64> = read_sparse_matrix(buf.as_slice()).unwrap();
        assert_eq!(back.triplets().collect::<Vec<_>>(), m.triplets().collect::<Vec<_>>());
    }

    #[test]
    fn sparse_matrix_comments_and_errors() {
        let text = "% comment\n# another\n2 2 2\n\n0 0 1\n1 1 2\n";
        let m: SparseMatrix<f64> = read_sparse_matrix(text.as_bytes()).unwrap();
        assert_eq!(m.forward(&[1.0, 1.0]), vec![1.0, 2.0]);
        assert!(read_sparse_matrix::<f64>("2 2 3\n0 0 1\n".as_bytes()).is_err());
        assert!(read_sparse_matrix::<f64>("2 2 1\n2 0 1\n".as_bytes()).is_err());
        assert!(read_sparse_matrix::<f64>("2 2 1\n0 0 x\n".as_bytes()).is_err());
        assert!(read_sparse_matrix::<f64>("".as_bytes()).is_err());
        match read_sparse_matrix::<f64>("1 1 1\n0 0\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vector_csv_round_trip() {
        let v = vec![0.1, -2.5e-17, 3.0];
        let mut buf = Vec::new();
        write_vector_csv(&v, &mut buf).unwrap();
        assert_eq!(read_vector_csv::<f64>(buf.as_slice()).unwrap(), v);
        assert_eq!(read_vector_csv::<f64>("1, 2,3\n# c\n4".as_bytes()).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(read_vector_csv::<f64>("1,a".as_bytes()).is_err());
    }

    #[test]
    fn pgm_round_trip_and_header() {
        let img = ImageVector::from_fn(3, 4, |r, c| (r * 4 + c) as f64 / 11.0);
        let mut buf = Vec::new();
        write_pgm(&img, 0.0, 1.0, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5 4 3 65535\n"));
        assert_eq!(buf.len(), 13 + 24);
        let back: ImageVector<f64> = read_pgm(buf.as_slice(), 0.0, 1.0).unwrap();
        assert_eq!(back.shape(), (3, 4));
        for (a, b) in back.as_slice().iter().zip(img.as_slice()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-15);
        }
        let clipped = ImageVector::from_vec(vec![-1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&clipped, 0.0, 1.0, &mut buf).unwrap();
        assert_eq!(&buf[buf.len() - 4..], &[0, 0, 255, 255]);
        let eight = b"P5\n# c\n2 1\n255\n\x00\xff";
        let e: ImageVector<f64> = read_pgm(&eight[..], 0.0, 1.0).unwrap();
        assert_eq!(e.as_slice(), &[0.0, 1.0]);
        assert!(read_pgm::<f64>(&b"P2 1 1 255\n0"[..], 0.0, 1.0).is_err());
        assert!(read_pgm::<f64>(&b"P5 2 2 65535\n\x00"[..], 0.0, 1.0).is_err());
    }

    #[test]
    fn loss_csv_format() {
        let mut buf = Vec::new();
        write_loss_csv(&[0.5, 0.25], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,loss\n1,0.5\n2,0.25\n");
    }
}
