//! Plain-text numeric tables: an optional `key=value,...` header line
//! followed by comma-separated rows.

use std::collections::BTreeMap;
use std::io::BufRead;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::util::parse_f64;

#[derive(Clone, Debug)]
pub struct Table {
    pub header: BTreeMap<String, String>,
    pub matrix: DMatrix<f64>,
}

pub fn read_table<R: BufRead>(input: R) -> Result<Table> {
    let mut header = BTreeMap::new();
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 && line.contains('=') {
            for field in line.split(',') {
                let (k, v) = field
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| parse_f64(t).ok_or_else(|| Error::Parse(format!("line {}: bad number {t:?}", lineno + 1))))
            .collect::<Result<_>>()?;
        match ncols {
            None => ncols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Parse(format!(
                    "line {}: expected {c} columns, found {}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        nrows += 1;
    }
    let ncols = ncols.unwrap_or(0);
    Ok(Table {
        header,
        matrix: DMatrix::from_row_slice(nrows, ncols, &values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_and_rows() {
        let t = read_table(&b"dim=2,p=2,q=0,mu=0.25\n1,2\n3,inf\n"[..]).unwrap();
        assert_eq!(t.header["mu"], "0.25");
        assert_eq!(t.matrix.shape(), (2, 2));
        assert_eq!(t.matrix[(1, 1)], f64::INFINITY);
        assert!(read_table(&b"1,2\n3\n"[..]).is_err());
    }
}
