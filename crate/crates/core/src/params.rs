//! Named parameter arrays and their text checkpoint format.
//!
//! ```text
//! reify-params 1
//! <name> <rank> <dim>...
//! <values, whitespace separated, shortest round-trip decimal>
//! ```
//!
//! One header line and one value line per array, in model order.

use std::io::{BufRead, Write};

use crate::{Error, Result, Tensor};

const MAGIC: &str = "reify-params 1";

/// A model whose trainable state is an ordered list of named tensors.
pub trait Parameterized {
    fn named_params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn params(&self) -> Vec<&Tensor> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    fn snapshot(&self) -> Vec<Tensor> {
        self.params().into_iter().cloned().collect()
    }

    /// Restores values captured by [`Parameterized::snapshot`].
    fn restore(&mut self, values: &[Tensor]) -> Result<()> {
        let mut slots = self.params_mut();
        if slots.len() != values.len() {
            return Err(Error::Format(format!(
                "expected {} arrays, got {}",
                slots.len(),
                values.len()
            )));
        }
        for (slot, v) in slots.iter_mut().zip(values) {
            if slot.shape() != v.shape() {
                return Err(Error::Format(format!(
                    "shape {:?} does not match {:?}",
                    v.shape(),
                    slot.shape()
                )));
            }
            slot.data_mut().copy_from_slice(v.data());
        }
        Ok(())
    }

    fn save<W: Write>(&self, out: W) -> Result<()>
    where
        Self: Sized,
    {
        let named: Vec<(String, Tensor)> = self
            .named_params()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        write_arrays(out, &named)
    }

    /// Loads arrays by position, checking names and shapes.
    fn load<R: BufRead>(&mut self, input: R) -> Result<()>
    where
        Self: Sized,
    {
        let arrays = read_arrays(input)?;
        let names: Vec<String> = self.named_params().into_iter().map(|(n, _)| n).collect();
        for ((expected, _), name) in arrays.iter().zip(&names) {
            if expected != name {
                return Err(Error::Format(format!("expected array {name}, found {expected}")));
            }
        }
        let values: Vec<Tensor> = arrays.into_iter().map(|(_, t)| t).collect();
        self.restore(&values)
    }
}

pub fn write_arrays<W: Write>(mut out: W, arrays: &[(String, Tensor)]) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    for (name, t) in arrays {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Format(format!("bad array name {name:?}")));
        }
        write!(out, "{name} {}", t.shape().len())?;
        for d in t.shape() {
            write!(out, " {d}")?;
        }
        writeln!(out)?;
        let line: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_arrays<R: BufRead>(input: R) -> Result<Vec<(String, Tensor)>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(l)) if l.trim() == MAGIC => {}
        _ => return Err(Error::Format("missing header".into())),
    }
    let mut out = Vec::new();
    while let Some(header) = lines.next() {
        let header = header?;
        if header.trim().is_empty() {
            continue;
        }
        let mut fields = header.split_whitespace();
        let name = fields.next().unwrap_or_default().to_string();
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad header line {header:?}")))
        };
        let rank = parse(fields.next())?;
        let shape = (0..rank)
            .map(|_| parse(fields.next()))
            .collect::<Result<Vec<_>>>()?;
        let values = lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing values for {name}")))??;
        let data = values
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad value {v:?} in {name}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let t = Tensor::new(shape, data).map_err(|e| Error::Format(format!("{name}: {e}")))?;
        out.push((name, t));
    }
    Ok(out)
}
