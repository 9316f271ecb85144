//! Plain-text refiner container.
//!
//! ```text
//! momnet-refiner v1
//! type scnn
//! channels 4
//! size 9
//! layers 1
//! residual 1
//! filters 8
//! <one filter per line, taps row-major>
//! thresholds 4
//! <one line>
//! end
//! ```
//!
//! Values are written with the shortest representation that parses back to the same bits.

use std::io::{BufRead, Write};

use crate::conv::Filter2d;
use crate::error::{Error, Result};
use crate::prox::ThresholdVector;
use crate::scalar::Real;

use super::{ConvRefiner, DcnnRefiner, RefinerModel, ScnnRefiner, TiedCaolRefiner};

pub const FORMAT_HEADER: &str = "momnet-refiner v1";

fn join<T: Real>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn refiner_to_text<T: Real>(model: &RefinerModel<T>) -> String {
    let (channels, side, layers, residual, filters, thresholds): (usize, usize, usize, bool, Vec<&Filter2d<T>>, Vec<T>) =
        match model {
            RefinerModel::Scnn(r) => (
                r.channels(),
                r.filter_side(),
                1,
                r.residual(),
                r.encoder().iter().chain(r.decoder()).collect(),
                r.log_thresholds().to_vec(),
            ),
            RefinerModel::Dcnn(r) => (
                r.channels(),
                r.filter_side(),
                r.depth(),
                true,
                r.layers().iter().flatten().collect(),
                Vec::new(),
            ),
            RefinerModel::TiedCaol(r) => (
                r.filters().len(),
                r.filters()[0].side(),
                1,
                r.is_tight_frame(),
                r.filters().iter().collect(),
                r.thresholds().values().to_vec(),
            ),
            RefinerModel::Conv(r) => (1, r.filter().side(), 1, false, vec![r.filter()], Vec::new()),
        };
    let mut s = String::new();
    s.push_str(FORMAT_HEADER);
    s.push('\n');
    s.push_str(&format!("type {}\n", model.kind()));
    s.push_str(&format!("channels {channels}\n"));
    s.push_str(&format!("size {}\n", side * side));
    s.push_str(&format!("layers {layers}\n"));
    s.push_str(&format!("residual {}\n", u8::from(residual)));
    s.push_str(&format!("filters {}\n", filters.len()));
    for f in filters {
        s.push_str(&join(f.taps()));
        s.push('\n');
    }
    s.push_str(&format!("thresholds {}\n", thresholds.len()));
    s.push_str(&join(&thresholds));
    s.push('\n');
    s.push_str("end\n");
    s
}

pub fn write_refiner<T: Real, W: Write>(model: &RefinerModel<T>, mut out: W) -> Result<()> {
    out.write_all(refiner_to_text(model).as_bytes())?;
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l.trim())
            }
            None => Err(self.err("unexpected end of refiner file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.last,
            msg: msg.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ if line == key => Ok(""),
            _ => Err(self.err(format!("expected `{key}`, found `{line}`"))),
        }
    }

    fn keyed_usize(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        v.parse().map_err(|_| self.err(format!("`{key}` must be a count, found `{v}`")))
    }

    fn values<T: Real>(&mut self, expected: usize) -> Result<Vec<T>> {
        let line = self.next_line()?;
        let vals: Vec<T> = line
            .split_whitespace()
            .map(|t| t.parse::<T>().map_err(|_| self.err(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", vals.len())));
        }
        Ok(vals)
    }
}

pub fn refiner_from_text<T: Real>(text: &str) -> Result<RefinerModel<T>> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let header = lines.next_line()?;
    if header != FORMAT_HEADER {
        return Err(lines.err(format!("unsupported refiner header `{header}`")));
    }
    let kind = lines.keyed("type")?.to_string();
    let channels = lines.keyed_usize("channels")?;
    let size = lines.keyed_usize("size")?;
    let layers = lines.keyed_usize("layers")?;
    let residual = match lines.keyed("residual")? {
        "0" => false,
        "1" => true,
        other => return Err(lines.err(format!("residual flag must be 0 or 1, found `{other}`"))),
    };
    let side = (size as f64).sqrt().round() as usize;
    if side * side != size || size == 0 {
        return Err(lines.err(format!("filter size {size} is not a positive perfect square")));
    }
    let n_filters = lines.keyed_usize("filters")?;
    let mut filters = Vec::with_capacity(n_filters);
    for _ in 0..n_filters {
        filters.push(Filter2d::new(side, lines.values(size)?)?);
    }
    let n_thr = lines.keyed_usize("thresholds")?;
    let thresholds: Vec<T> = lines.values(n_thr)?;
    if lines.next_line()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    let count_err = |what: &str| Error::Parse {
        line: 0,
        msg: format!("{what} count inconsistent with header"),
    };
    match kind.as_str() {
        "scnn" => {
            if n_filters != 2 * channels {
                return Err(count_err("filter"));
            }
            let decoder = filters.split_off(channels);
            Ok(RefinerModel::Scnn(ScnnRefiner::new(filters, decoder, thresholds, residual)?))
        }
        "dcnn" => {
            if layers < 2 || n_filters != 2 * channels + (layers - 2) * channels * channels {
                return Err(count_err("filter"));
            }
            let mut rest = filters.into_iter();
            let mut stack = Vec::with_capacity(layers);
            for l in 0..layers {
                let n = if l == 0 || l + 1 == layers { channels } else { channels * channels };
                stack.push(rest.by_ref().take(n).collect());
            }
            Ok(RefinerModel::Dcnn(DcnnRefiner::new(stack)?))
        }
        "tied-caol" => {
            if n_filters != channels || n_thr != channels {
                return Err(count_err("filter or threshold"));
            }
            Ok(RefinerModel::TiedCaol(TiedCaolRefiner::new(
                filters,
                ThresholdVector::new(thresholds)?,
                residual,
            )?))
        }
        "conv" => {
            if n_filters != 1 {
                return Err(count_err("filter"));
            }
            Ok(RefinerModel::Conv(ConvRefiner::new(filters.remove(0))))
        }
        other => Err(Error::Parse {
            line: 2,
            msg: format!("unknown refiner type `{other}`"),
        }),
    }
}

pub fn read_refiner<T: Real, R: BufRead>(mut input: R) -> Result<RefinerModel<T>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    refiner_from_text(&text)
}
