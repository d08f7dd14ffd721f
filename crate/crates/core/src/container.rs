//! Plain-text tensor container shared by checkpoints, sketches and dataset
//! snapshots.
//!
//! A tensor record is a header line followed by one line per row of its last
//! axis:
//!
//! ```text
//! tensor <name> <rank> <dim_1> ... <dim_rank>
//! <v v v ...>
//! ```
//!
//! Values are written with Rust's shortest round-trip exponent formatting
//! (`{:e}`), so a save/load cycle is bit-exact. Blank lines and lines starting
//! with `#` are ignored by the reader.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numtensor::Tensor;

pub fn write_tensor(out: &mut String, name: &str, t: &Tensor) {
    let _ = write!(out, "tensor {name} {}", t.rank());
    for d in t.shape() {
        let _ = write!(out, " {d}");
    }
    out.push('\n');
    let cols = t.shape()[t.rank() - 1];
    for row in t.data().chunks(cols) {
        write_values(out, row.iter());
    }
}

pub(crate) fn write_values<T: std::fmt::LowerExp>(out: &mut String, values: impl Iterator<Item = T>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v:e}");
    }
    out.push('\n');
}

/// Line cursor over a container file that tracks 1-based line numbers.
pub struct LineReader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> LineReader<'a> {
    pub fn new(text: &'a str) -> Self {
        let lines: Vec<_> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let last_line = text.lines().count();
        Self {
            lines,
            pos: 0,
            last_line,
        }
    }

    pub fn is_done(&self) -> bool {
        self.pos >= self.lines.len()
    }

    /// Next significant line with its number; a parse error at end of input.
    pub fn next_line(&mut self) -> Result<(usize, &'a str)> {
        let item = self.lines.get(self.pos).copied().ok_or_else(|| {
            Error::parse(self.last_line + 1, "unexpected end of file")
        })?;
        self.pos += 1;
        Ok(item)
    }

    pub fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    /// Reads a line of exactly `n` whitespace-separated values.
    pub fn read_values<T: std::str::FromStr>(&mut self, n: usize) -> Result<Vec<T>> {
        let (line_no, line) = self.next_line()?;
        let values = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<T>()
                    .map_err(|_| Error::parse(line_no, format!("invalid number `{tok}`")))
            })
            .collect::<Result<Vec<T>>>()?;
        if values.len() != n {
            return Err(Error::parse(
                line_no,
                format!("expected {n} values, found {}", values.len()),
            ));
        }
        Ok(values)
    }

    pub fn read_tensor(&mut self) -> Result<(String, Tensor)> {
        let (line_no, header) = self.next_line()?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() < 3 || toks[0] != "tensor" {
            return Err(Error::parse(line_no, format!("expected tensor header, found `{header}`")));
        }
        let name = toks[1].to_string();
        let rank: usize = toks[2]
            .parse()
            .map_err(|_| Error::parse(line_no, "invalid tensor rank"))?;
        if rank == 0 || toks.len() != 3 + rank {
            return Err(Error::parse(line_no, "tensor header rank does not match its dimensions"));
        }
        let shape = toks[3..]
            .iter()
            .map(|t| match t.parse::<usize>() {
                Ok(d) if d > 0 => Ok(d),
                _ => Err(Error::parse(line_no, format!("invalid dimension `{t}`"))),
            })
            .collect::<Result<Vec<usize>>>()?;
        let cols = shape[rank - 1];
        let rows = shape[..rank - 1].iter().product::<usize>();
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.read_values::<f64>(cols)?);
        }
        Ok((name, Tensor::new(shape, data)?))
    }

    /// Reads a tensor and checks its name.
    pub fn expect_tensor(&mut self, name: &str) -> Result<Tensor> {
        let line_no = self.peek().map_or(self.last_line + 1, |(n, _)| n);
        let (found, t) = self.read_tensor()?;
        if found != name {
            return Err(Error::parse(line_no, format!("expected tensor `{name}`, found `{found}`")));
        }
        Ok(t)
    }
}
