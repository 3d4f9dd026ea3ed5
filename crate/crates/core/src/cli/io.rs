//! Comma-separated numeric matrices, one observation per row.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matalg::Mat;

/// 17 significant digits, enough for an exact `f64` round trip.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Reads a rectangular numeric CSV file. Blank lines are skipped; with
/// `has_header` the first non-blank line is ignored.
pub fn load_matrix(path: &Path, has_header: bool) -> Result<Mat> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text, has_header, path)
}

pub(crate) fn parse_matrix(text: &str, has_header: bool, path: &Path) -> Result<Mat> {
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    if has_header {
        lines.next();
    }

    let mut width: Option<usize> = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(parse_err(
                    line_no,
                    cells.len().min(w) + 1,
                    format!("expected {w} fields, found {}", cells.len()),
                ))
            }
            _ => {}
        }
        for (c, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line_no, c + 1, format!("'{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, c + 1, format!("'{cell}' is not finite")));
            }
            data.push(v);
        }
        rows += 1;
    }
    match width {
        Some(w) if rows > 0 => Mat::new(rows, w, data),
        _ => Err(Error::EmptyFile(path.to_path_buf())),
    }
}

pub fn format_matrix(m: &Mat) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format_number(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    fs::write(path, format_matrix(m)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, header: bool) -> Result<Mat> {
        parse_matrix(text, header, Path::new("t.csv"))
    }

    #[test]
    fn basic_and_header() {
        let m = parse("1,2\n3,4\n", false).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let h = parse("a,b\n1,2\n3,4\n", true).unwrap();
        assert_eq!(h.rows(), 2);
        let h = parse("1,2\n3,4\n", true).unwrap();
        assert_eq!(h.rows(), 1);
    }

    #[test]
    fn ragged_row_names_line() {
        match parse("1,2\n3\n", false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_is_located() {
        match parse("1,2\n3,x\n", false) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("1,nan\n", false), Err(Error::Parse { .. })));
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(parse("", false), Err(Error::EmptyFile(_))));
        assert!(matches!(parse("a,b\n", true), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn crlf_and_spaces() {
        let m = parse(" 1 , 2\r\n3,4\r\n", false).unwrap();
        assert_eq!(m[(0, 1)], 2.0);
    }

    #[test]
    fn number_format_has_seventeen_digits() {
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(0.1f64, format_number(0.1).parse::<f64>().unwrap());
    }
}
