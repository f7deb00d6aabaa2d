//! Plain-text instance files.
//!
//! ```text
//! DBCD-SPARSE v1 <m> <N> <nnz> <lasso|svm>
//! <row> <col> <value>        nnz lines, zero-based, column-major order
//! <y_j>                      m lines (targets, or +-1 labels for svm)
//! lambda=<value>
//! labels=pm1                 svm only
//! ```
//!
//! Reals are written with 17 significant digits, so a file survives
//! read-then-write byte for byte. A planted solution can be stored in a
//! sidecar:
//!
//! ```text
//! DBCD-XSTAR v1 <N> <nnz>
//! <index> <value>            nnz lines
//! ```

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::problems::{LassoProblem, ProblemInstance, SvmDualProblem};
use crate::sparse::SparseMatrix;

const MAGIC: &str = "DBCD-SPARSE";
const XSTAR_MAGIC: &str = "DBCD-XSTAR";
const VERSION: &str = "v1";

/// 17-significant-digit decimal form used in every emitted file.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

pub fn write_instance(out: &mut impl Write, instance: &ProblemInstance) -> Result<()> {
    out.write_all(instance_to_string(instance).as_bytes())?;
    Ok(())
}

pub fn instance_to_string(instance: &ProblemInstance) -> String {
    let (a, y, lambda, kind) = match instance {
        ProblemInstance::Lasso(p) => (p.matrix(), p.targets(), p.lambda(), "lasso"),
        ProblemInstance::SvmDual(p) => (p.matrix(), p.labels(), p.lambda(), "svm"),
    };
    let mut s = String::new();
    writeln!(s, "{MAGIC} {VERSION} {} {} {} {kind}", a.rows(), a.cols(), a.nnz()).unwrap();
    for (r, c, v) in a.triplets() {
        writeln!(s, "{r} {c} {}", fmt_real(v)).unwrap();
    }
    for &v in y {
        writeln!(s, "{}", fmt_real(v)).unwrap();
    }
    writeln!(s, "lambda={}", fmt_real(lambda)).unwrap();
    if kind == "svm" {
        writeln!(s, "labels=pm1").unwrap();
    }
    s
}

pub fn read_instance(input: impl BufRead) -> Result<ProblemInstance> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(parse_err(0, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (ln, header) = next("header")?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some(MAGIC) {
        return Err(parse_err(ln, "missing DBCD-SPARSE magic"));
    }
    if tok.next() != Some(VERSION) {
        return Err(parse_err(ln, "unsupported version"));
    }
    let m: usize = parse_num(tok.next(), ln, "row count")?;
    let n: usize = parse_num(tok.next(), ln, "column count")?;
    let nnz: usize = parse_num(tok.next(), ln, "nonzero count")?;
    let kind = tok.next().ok_or_else(|| parse_err(ln, "missing problem kind"))?.to_string();
    if kind != "lasso" && kind != "svm" {
        return Err(parse_err(ln, format!("unknown problem kind '{kind}'")));
    }
    if tok.next().is_some() {
        return Err(parse_err(ln, "trailing tokens in header"));
    }

    let mut triplets = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (ln, l) = next("matrix entry")?;
        let mut t = l.split_whitespace();
        let r: usize = parse_num(t.next(), ln, "row index")?;
        let c: usize = parse_num(t.next(), ln, "column index")?;
        let v: f64 = parse_num(t.next(), ln, "value")?;
        if t.next().is_some() {
            return Err(parse_err(ln, "trailing tokens"));
        }
        if r >= m || c >= n {
            return Err(parse_err(ln, format!("entry ({r}, {c}) out of range")));
        }
        triplets.push((r, c, v));
    }
    let mut y = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, l) = next("y entry")?;
        y.push(parse_num(Some(l.trim()), ln, "y entry")?);
    }

    let mut lambda = None;
    let mut labels = false;
    for item in lines {
        let (ln, l) = (item.0, item.1?);
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        match l.split_once('=') {
            Some(("lambda", v)) => lambda = Some(parse_num::<f64>(Some(v), ln, "lambda")?),
            Some(("labels", "pm1")) => labels = true,
            _ => return Err(parse_err(ln, format!("unrecognised metadata '{l}'"))),
        }
    }
    let lambda = lambda.ok_or_else(|| parse_err(0, "missing lambda metadata"))?;
    if kind == "svm" && !labels {
        return Err(parse_err(0, "svm instance without labels=pm1"));
    }
    let a = SparseMatrix::from_triplets(m, n, triplets)?;
    if a.nnz() != nnz {
        return Err(parse_err(1, "duplicate or zero entries in matrix section"));
    }
    Ok(match kind.as_str() {
        "lasso" => ProblemInstance::Lasso(LassoProblem::new(a, y, lambda)?),
        _ => ProblemInstance::SvmDual(SvmDualProblem::new(a, y, lambda)?),
    })
}

pub fn instance_from_str(s: &str) -> Result<ProblemInstance> {
    read_instance(s.as_bytes())
}

pub fn xstar_to_string(x: &[f64]) -> String {
    let nz: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
    let mut s = String::new();
    writeln!(s, "{XSTAR_MAGIC} {VERSION} {} {}", x.len(), nz.len()).unwrap();
    for (i, v) in nz {
        writeln!(s, "{i} {}", fmt_real(v)).unwrap();
    }
    s
}

pub fn read_xstar(input: impl BufRead) -> Result<Vec<f64>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))??;
    let mut t = header.split_whitespace();
    if t.next() != Some(XSTAR_MAGIC) || t.next() != Some(VERSION) {
        return Err(parse_err(1, "missing DBCD-XSTAR v1 header"));
    }
    let n: usize = parse_num(t.next(), 1, "dimension")?;
    let nnz: usize = parse_num(t.next(), 1, "nonzero count")?;
    let mut x = vec![0.0; n];
    for k in 0..nnz {
        let ln = k + 2;
        let l = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of file"))??;
        let mut t = l.split_whitespace();
        let i: usize = parse_num(t.next(), ln, "index")?;
        if i >= n {
            return Err(parse_err(ln, format!("index {i} out of range")));
        }
        x[i] = parse_num(t.next(), ln, "value")?;
    }
    Ok(x)
}
