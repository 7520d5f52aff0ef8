//! `front.csv`: one row per sample, numbers with 17 significant digits.

use std::io::{Read, Write};

use homotopy_moo::driver::{Front, SampleStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrontCsvError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A front row as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontRow {
    pub id: usize,
    pub index: Vec<u32>,
    pub lambda: Vec<f64>,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub fnorm: Vec<f64>,
    pub status: SampleStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredFront {
    pub k: usize,
    pub n: usize,
    pub rows: Vec<FrontRow>,
}

impl StoredFront {
    pub fn converged_objectives(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .filter(|r| r.status.is_converged())
            .map(|r| r.f.clone())
            .collect()
    }
}

pub fn header(k: usize, n: usize) -> Vec<String> {
    let mut cols = vec!["id".to_string(), "index".to_string()];
    cols.extend((1..=k).map(|i| format!("lambda_{i}")));
    cols.extend((1..=n).map(|i| format!("x_{i}")));
    cols.extend((1..=k).map(|i| format!("f_{i}")));
    cols.extend((1..=k).map(|i| format!("fnorm_{i}")));
    cols.push("status".to_string());
    cols
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_front_csv<W: Write>(front: &Front, out: W) -> Result<(), FrontCsvError> {
    let k = front.anchors.k();
    let n = front.anchors.minimizers.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(k, n))?;
    for s in &front.samples {
        let index: Vec<String> = s.index.iter().map(u32::to_string).collect();
        let mut rec = vec![s.id.to_string(), index.join(" ")];
        rec.extend(s.lambda.iter().chain(&s.x).chain(&s.f).chain(&s.fnorm).map(|&v| num(v)));
        rec.push(s.status.label().to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_front_csv<R: Read>(input: R) -> Result<StoredFront, FrontCsvError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let head = rdr.headers()?.clone();
    let count = |prefix: &str| head.iter().filter(|h| h.starts_with(prefix)).count();
    let (k, n) = (count("lambda_"), count("x_"));
    let expected = header(k, n);
    if head.iter().ne(expected.iter().map(String::as_str)) {
        return Err(FrontCsvError::Parse {
            line: 1,
            message: format!("unexpected header, want `{}`", expected.join(",")),
        });
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| FrontCsvError::Parse { line, message };
        let field = |i: usize| record.get(i).unwrap_or_default();
        let float = |i: usize| -> Result<f64, FrontCsvError> {
            field(i)
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("column `{}`: {e}", expected[i])))
        };
        let floats = |start: usize, len: usize| (start..start + len).map(float).collect::<Result<Vec<_>, _>>();

        let id = field(0)
            .trim()
            .parse()
            .map_err(|e| bad(format!("column `id`: {e}")))?;
        let index = field(1)
            .split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|e| bad(format!("column `index`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let mut at = 2;
        let lambda = floats(at, k)?;
        at += k;
        let x = floats(at, n)?;
        at += n;
        let f = floats(at, k)?;
        at += k;
        let fnorm = floats(at, k)?;
        at += k;
        let status = field(at).trim().parse::<SampleStatus>().map_err(bad)?;
        rows.push(FrontRow {
            id,
            index,
            lambda,
            x,
            f,
            fnorm,
            status,
        });
    }
    Ok(StoredFront { k, n, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        assert_eq!(
            header(2, 1).join(","),
            "id,index,lambda_1,lambda_2,x_1,f_1,f_2,fnorm_1,fnorm_2,status"
        );
    }

    #[test]
    fn bad_number_names_the_line() {
        let text = "id,index,lambda_1,lambda_2,x_1,f_1,f_2,fnorm_1,fnorm_2,status\n\
                    0,0,1,0,0,0,4,0,1,anchor\n\
                    1,1,0.5,0.5,1,oops,1,0.25,0.25,converged\n";
        match read_front_csv(text.as_bytes()) {
            Err(FrontCsvError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("f_1"), "{message}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_status_is_rejected() {
        let text = "id,index,lambda_1,lambda_2,x_1,f_1,f_2,fnorm_1,fnorm_2,status\n\
                    0,0,1,0,0,0,4,0,1,done\n";
        assert!(matches!(read_front_csv(text.as_bytes()), Err(FrontCsvError::Parse { line: 2, .. })));
    }

    #[test]
    fn wrong_header_is_line_one() {
        let text = "id,lambda_1,status\n";
        assert!(matches!(read_front_csv(text.as_bytes()), Err(FrontCsvError::Parse { line: 1, .. })));
    }
}
