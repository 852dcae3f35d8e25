//! Frequency-flat channel records in a line-oriented text format.
//!
//! ```text
//! CIR v1 K=<k> L=<l> M=<m> N=<n>
//! D <k> <n> <re> <im>        direct BS→UE
//! G <l> <m> <n> <re> <im>    BS→RIS
//! R <l> <k> <m> <re> <im>    RIS→UE
//! ```
//!
//! Records may come in any order but every index combination must appear
//! exactly once. Floats are written in shortest round-trip form, so an
//! export/import cycle is bit-exact.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::{ChannelError, ChannelSet, Dims};
use crate::C64;

#[derive(Debug, Error)]
pub enum CirError {
    #[error("line {line}: malformed header (expected `CIR v1 K=<k> L=<l> M=<m> N=<n>`)")]
    MalformedHeader { line: usize },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: index out of range: {reason}")]
    DimensionMismatch { line: usize, reason: String },
    #[error("line {line}: non-finite value")]
    NonFinite { line: usize },
    #[error("line {line}: duplicate record")]
    Duplicate { line: usize },
    #[error("line {line}: expected {expected} records, found {found}")]
    RecordCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: invalid channel set")]
    Channel { line: usize, source: ChannelError },
    #[error("{path}")]
    Io { path: String, source: std::io::Error },
}

pub fn record_count(dims: Dims) -> usize {
    dims.k * dims.n + dims.l * dims.m * dims.n + dims.l * dims.k * dims.m
}

fn push_value(out: &mut String, c: C64) {
    let _ = writeln!(out, " {:e} {:e}", c.re, c.im);
}

/// Canonical serialisation: header, then D, G and R records in index order.
pub fn write_cir<W: Write>(set: &ChannelSet, mut w: W) -> std::io::Result<()> {
    let d = set.dims();
    let mut out = String::new();
    let _ = writeln!(out, "CIR v1 K={} L={} M={} N={}", d.k, d.l, d.m, d.n);
    for k in 0..d.k {
        for (n, &c) in set.direct(k).iter().enumerate() {
            let _ = write!(out, "D {k} {n}");
            push_value(&mut out, c);
        }
    }
    for l in 0..d.l {
        for ((m, n), &c) in set.bs_ris(l).indexed_iter() {
            let _ = write!(out, "G {l} {m} {n}");
            push_value(&mut out, c);
        }
    }
    for l in 0..d.l {
        for k in 0..d.k {
            for (m, &c) in set.ris_ue(l, k).iter().enumerate() {
                let _ = write!(out, "R {l} {k} {m}");
                push_value(&mut out, c);
            }
        }
    }
    w.write_all(out.as_bytes())
}

fn parse_header(line: &str) -> Option<Dims> {
    let mut parts = line.split_whitespace();
    if parts.next()? != "CIR" || parts.next()? != "v1" {
        return None;
    }
    let mut field = |name: &str| -> Option<usize> {
        let tok = parts.next()?;
        tok.strip_prefix(name)?.strip_prefix('=')?.parse().ok()
    };
    let dims = Dims {
        k: field("K")?,
        l: field("L")?,
        m: field("M")?,
        n: field("N")?,
    };
    if parts.next().is_some() {
        return None;
    }
    Some(dims)
}

struct Slots {
    values: Vec<C64>,
    filled: Vec<bool>,
    count: usize,
}

impl Slots {
    fn new(len: usize) -> Self {
        Self {
            values: vec![C64::new(0.0, 0.0); len],
            filled: vec![false; len],
            count: 0,
        }
    }

    fn set(&mut self, idx: usize, v: C64, line: usize) -> Result<(), CirError> {
        if self.filled[idx] {
            return Err(CirError::Duplicate { line });
        }
        self.filled[idx] = true;
        self.values[idx] = v;
        self.count += 1;
        Ok(())
    }
}

pub fn read_cir<R: BufRead>(reader: R) -> Result<ChannelSet, CirError> {
    let mut lines = reader.lines().enumerate();
    let io_err = |source| CirError::Io {
        path: "<input>".into(),
        source,
    };
    let header = match lines.next() {
        Some((_, l)) => l.map_err(io_err)?,
        None => return Err(CirError::MalformedHeader { line: 1 }),
    };
    let dims = parse_header(header.trim()).ok_or(CirError::MalformedHeader { line: 1 })?;
    let Dims { k, l, m, n } = dims;

    let mut direct = Slots::new(k * n);
    let mut bs_ris = Slots::new(l * m * n);
    let mut ris_ue = Slots::new(l * k * m);
    let mut last_line = 1;

    for (i, text) in lines {
        let line = i + 1;
        let text = text.map_err(io_err)?;
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        last_line = line;
        let toks: Vec<&str> = text.split_whitespace().collect();
        let malformed = |reason: &str| CirError::MalformedRecord {
            line,
            reason: reason.to_string(),
        };
        let (n_idx, kind) = match toks[0] {
            "D" => (2, 'D'),
            "G" | "R" => (3, toks[0].chars().next().unwrap()),
            other => return Err(malformed(&format!("unknown record tag `{other}`"))),
        };
        if toks.len() != 1 + n_idx + 2 {
            return Err(malformed(&format!("expected {} fields, found {}", 1 + n_idx + 2, toks.len())));
        }
        let idx: Vec<usize> = toks[1..=n_idx]
            .iter()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| malformed("indices must be nonnegative integers"))?;
        let re: f64 = toks[n_idx + 1].parse().map_err(|_| malformed("bad real part"))?;
        let im: f64 = toks[n_idx + 2].parse().map_err(|_| malformed("bad imaginary part"))?;
        if !re.is_finite() || !im.is_finite() {
            return Err(CirError::NonFinite { line });
        }
        let value = C64::new(re, im);
        let out_of_range = |what: &str, v: usize, bound: usize| CirError::DimensionMismatch {
            line,
            reason: format!("{what}={v} not below {bound}"),
        };
        let check = |names: &[(&'static str, usize)], vals: &[usize]| -> Result<(), CirError> {
            for (&(name, bound), &v) in names.iter().zip(vals) {
                if v >= bound {
                    return Err(out_of_range(name, v, bound));
                }
            }
            Ok(())
        };
        match kind {
            'D' => {
                check(&[("k", k), ("n", n)], &idx)?;
                direct.set(idx[0] * n + idx[1], value, line)?;
            }
            'G' => {
                check(&[("l", l), ("m", m), ("n", n)], &idx)?;
                bs_ris.set((idx[0] * m + idx[1]) * n + idx[2], value, line)?;
            }
            _ => {
                check(&[("l", l), ("k", k), ("m", m)], &idx)?;
                ris_ue.set((idx[0] * k + idx[1]) * m + idx[2], value, line)?;
            }
        }
    }

    let found = direct.count + bs_ris.count + ris_ue.count;
    let expected = record_count(dims);
    if found != expected {
        return Err(CirError::RecordCount {
            line: last_line,
            expected,
            found,
        });
    }

    let h = (0..k)
        .map(|ki| Array1::from(direct.values[ki * n..(ki + 1) * n].to_vec()))
        .collect();
    let g = (0..l)
        .map(|li| {
            Array2::from_shape_vec((m, n), bs_ris.values[li * m * n..(li + 1) * m * n].to_vec())
                .expect("slot layout matches shape")
        })
        .collect();
    let r = (0..l)
        .map(|li| {
            (0..k)
                .map(|ki| {
                    let start = (li * k + ki) * m;
                    Array1::from(ris_ue.values[start..start + m].to_vec())
                })
                .collect()
        })
        .collect();
    let mut set = ChannelSet::new(h, g, r).map_err(|source| CirError::Channel { line: last_line, source })?;
    // ChannelSet infers N from the first direct channel; keep the header's
    // dimensions when there are no UEs or no candidates.
    set.dims = dims;
    Ok(set)
}

pub fn import_cir(path: &Path) -> Result<ChannelSet, CirError> {
    let file = std::fs::File::open(path).map_err(|source| CirError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_cir(BufReader::new(file)).map_err(|e| match e {
        CirError::Io { source, .. } => CirError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn export_cir(set: &ChannelSet, path: &Path) -> Result<(), CirError> {
    let io = |source| CirError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    write_cir(set, &mut w).map_err(io)?;
    w.flush().map_err(io)
}
