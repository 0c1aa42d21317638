//! Plain-text model files.
//!
//! ```text
//! dpo-bcd-model 1
//! kind qubo                  # or: ising
//! n 48
//! coefficients real          # or: int8
//! scale 1234.5               # int8 only: integer units per model unit
//! degenerate false           # int8 only
//! offset -0.25
//! blocks 0..24 24..48        # or: blocks none
//! step {"coefficient":...}   # zero or more tuning records, int8 only
//! 0 0 -1.5
//! 0 1 0.25
//! ```
//!
//! Header lines come first in the order shown. The remaining lines are
//! `i j value` triplets with `i ≤ j`; missing entries are zero. For a QUBO an
//! off-diagonal triplet sets both `Q_ij` and `Q_ji`. For an Ising model the
//! triplet `i i v` is the field `h_i` and `i j v` with `i < j` is `J_ij`.
//! Reals are written in shortest round-trip form, so reading a written file
//! reproduces every coefficient bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::precision::{QuantizedIsing, TuningStep};
use crate::qubo::{BlockPartition, IsingModel, Qubo};

const MAGIC: &str = "dpo-bcd-model 1";

#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    Qubo(Qubo),
    Ising {
        model: IsingModel,
        partition: Option<BlockPartition>,
    },
    Quantized {
        model: QuantizedIsing,
        partition: Option<BlockPartition>,
    },
}

impl StoredModel {
    pub fn n(&self) -> usize {
        match self {
            StoredModel::Qubo(q) => q.n(),
            StoredModel::Ising { model, .. } => model.n(),
            StoredModel::Quantized { model, .. } => model.n(),
        }
    }

    /// The binary form, with the partition reattached.
    pub fn into_qubo(self) -> Result<Qubo> {
        let (q, partition) = match self {
            StoredModel::Qubo(q) => return Ok(q),
            StoredModel::Ising { model, partition } => (model.to_qubo(), partition),
            StoredModel::Quantized { model, partition } => (model.to_qubo(), partition),
        };
        match partition {
            Some(p) => q.with_partition(p),
            None => Ok(q),
        }
    }
}

fn blocks_line(partition: Option<&BlockPartition>) -> String {
    match partition {
        None => "blocks none".into(),
        Some(p) => {
            let mut s = String::from("blocks");
            for r in p.blocks() {
                let _ = write!(s, " {}..{}", r.start, r.end);
            }
            s
        }
    }
}

fn write_header<W: Write>(
    out: &mut W,
    kind: &str,
    n: usize,
    int8: Option<(f64, bool)>,
    offset: f64,
    partition: Option<&BlockPartition>,
) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "kind {kind}")?;
    writeln!(out, "n {n}")?;
    match int8 {
        Some((scale, degenerate)) => {
            writeln!(out, "coefficients int8")?;
            writeln!(out, "scale {scale}")?;
            writeln!(out, "degenerate {degenerate}")?;
        }
        None => writeln!(out, "coefficients real")?,
    }
    writeln!(out, "offset {offset}")?;
    writeln!(out, "{}", blocks_line(partition))?;
    Ok(())
}

pub fn write_qubo<W: Write>(q: &Qubo, mut out: W) -> Result<()> {
    write_header(&mut out, "qubo", q.n(), None, q.offset(), q.partition())?;
    let c = q.coeffs();
    for i in 0..q.n() {
        for j in i..q.n() {
            if c[[i, j]] != 0.0 {
                writeln!(out, "{i} {j} {}", c[[i, j]])?;
            }
        }
    }
    Ok(())
}

pub fn write_ising<W: Write>(
    model: &IsingModel,
    partition: Option<&BlockPartition>,
    mut out: W,
) -> Result<()> {
    write_header(&mut out, "ising", model.n(), None, model.offset(), partition)?;
    for i in 0..model.n() {
        if model.linear()[i] != 0.0 {
            writeln!(out, "{i} {i} {}", model.linear()[i])?;
        }
        for j in i + 1..model.n() {
            let v = model.quadratic()[[i, j]];
            if v != 0.0 {
                writeln!(out, "{i} {j} {v}")?;
            }
        }
    }
    Ok(())
}

pub fn write_quantized<W: Write>(
    model: &QuantizedIsing,
    partition: Option<&BlockPartition>,
    mut out: W,
) -> Result<()> {
    let header = Some((model.scale, model.degenerate));
    write_header(&mut out, "ising", model.n(), header, 0.0, partition)?;
    for step in &model.provenance {
        writeln!(out, "step {}", serde_json::to_string(step)?)?;
    }
    for i in 0..model.n() {
        if model.linear[i] != 0 {
            writeln!(out, "{i} {i} {}", model.linear[i])?;
        }
        for j in i + 1..model.n() {
            let v = model.quadratic[[i, j]];
            if v != 0 {
                writeln!(out, "{i} {j} {v}")?;
            }
        }
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    line: usize,
    peeked: Option<String>,
}

impl<R: Read> Lines<R> {
    fn next(&mut self) -> Result<Option<String>> {
        if let Some(l) = self.peeked.take() {
            return Ok(Some(l));
        }
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l?;
            let trimmed = l.split('#').next().unwrap_or("").trim();
            if !trimmed.is_empty() {
                return Ok(Some(trimmed.to_string()));
            }
        }
        Ok(None)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn field(&mut self, key: &str) -> Result<String> {
        let l = self.next()?.ok_or_else(|| self.err(format!("missing '{key}' line")))?;
        match l.split_once(char::is_whitespace) {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(self.err(format!("expected '{key} <value>', found '{l}'"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.parse().map_err(|_| self.err(format!("bad value for '{key}': '{v}'")))
    }
}

fn parse_blocks(text: &str, n: usize) -> Result<Option<BlockPartition>> {
    if text == "none" {
        return Ok(None);
    }
    let ranges = text
        .split_whitespace()
        .map(|tok| {
            let (a, b) = tok
                .split_once("..")
                .ok_or_else(|| Error::InvalidPartition(format!("bad range '{tok}'")))?;
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::InvalidPartition(format!("bad range '{tok}'")))
            };
            Ok(parse(a)?..parse(b)?)
        })
        .collect::<Result<Vec<Range<usize>>>>()?;
    let p = BlockPartition::new(ranges)?;
    if p.n() != n {
        return Err(Error::InvalidPartition(format!("blocks cover {} of {n} variables", p.n())));
    }
    Ok(Some(p))
}

pub fn read_model<R: Read>(input: R) -> Result<StoredModel> {
    let mut lines = Lines {
        inner: BufReader::new(input).lines(),
        line: 0,
        peeked: None,
    };
    match lines.next()? {
        Some(l) if l == MAGIC => {}
        other => {
            return Err(lines.err(format!(
                "expected '{MAGIC}', found '{}'",
                other.unwrap_or_default()
            )))
        }
    }
    let kind = lines.field("kind")?;
    let n: usize = lines.parsed("n")?;
    let coefficients = lines.field("coefficients")?;
    let int8 = match coefficients.as_str() {
        "real" => None,
        "int8" => {
            let scale: f64 = lines.parsed("scale")?;
            let degenerate: bool = lines.parsed("degenerate")?;
            Some((scale, degenerate))
        }
        other => return Err(lines.err(format!("unknown coefficient type '{other}'"))),
    };
    let offset: f64 = lines.parsed("offset")?;
    let blocks = lines.field("blocks")?;
    let partition = parse_blocks(&blocks, n).map_err(|e| lines.err(e.to_string()))?;

    let mut steps: Vec<TuningStep> = Vec::new();
    let mut entries = Vec::new();
    while let Some(l) = lines.next()? {
        if let Some(json) = l.strip_prefix("step ") {
            if int8.is_none() {
                return Err(lines.err("tuning records only belong to int8 models"));
            }
            steps.push(serde_json::from_str(json).map_err(|e| lines.err(e.to_string()))?);
            continue;
        }
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(lines.err(format!("expected 'i j value', found '{l}'")));
        }
        let i: usize = parts[0].parse().map_err(|_| lines.err("bad row index"))?;
        let j: usize = parts[1].parse().map_err(|_| lines.err("bad column index"))?;
        if i > j || j >= n {
            return Err(lines.err(format!("index pair ({i}, {j}) must satisfy i <= j < {n}")));
        }
        entries.push((i, j, parts[2].to_string(), lines.line));
    }

    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    match (kind.as_str(), int8) {
        ("qubo", None) => {
            let mut c = Array2::zeros((n, n));
            for (i, j, v, line) in entries {
                let v: f64 = v.parse().map_err(|_| parse_err(line, format!("bad value '{v}'")))?;
                c[[i, j]] = v;
                c[[j, i]] = v;
            }
            let q = Qubo::new(c, offset)?;
            match partition {
                Some(p) => Ok(StoredModel::Qubo(q.with_partition(p)?)),
                None => Ok(StoredModel::Qubo(q)),
            }
        }
        ("ising", None) => {
            let mut h = Array1::zeros(n);
            let mut jm = Array2::zeros((n, n));
            for (i, j, v, line) in entries {
                let v: f64 = v.parse().map_err(|_| parse_err(line, format!("bad value '{v}'")))?;
                if i == j {
                    h[i] = v;
                } else {
                    jm[[i, j]] = v;
                    jm[[j, i]] = v;
                }
            }
            Ok(StoredModel::Ising {
                model: IsingModel::new(h, jm, offset)?,
                partition,
            })
        }
        ("ising", Some((scale, degenerate))) => {
            let mut linear = vec![0i8; n];
            let mut quadratic = Array2::zeros((n, n));
            for (i, j, v, line) in entries {
                let v: i8 = v
                    .parse()
                    .map_err(|_| parse_err(line, format!("'{v}' is not a signed 8-bit integer")))?;
                if i == j {
                    linear[i] = v;
                } else {
                    quadratic[[i, j]] = v;
                    quadratic[[j, i]] = v;
                }
            }
            Ok(StoredModel::Quantized {
                model: QuantizedIsing {
                    linear,
                    quadratic,
                    scale,
                    degenerate,
                    provenance: steps,
                },
                partition,
            })
        }
        (other, _) => Err(Error::Parse {
            line: 2,
            message: format!("unsupported model kind '{other}' for these coefficients"),
        }),
    }
}
