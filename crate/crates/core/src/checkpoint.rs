//! Plain-text parameter checkpoints.
//!
//! ```text
//! sharpkit-checkpoint 1
//! layer_widths 2 3 1
//! activation relu
//! layer dense0 4
//! filter 2 1.0000000000000000e0 -2.5000000000000000e-1
//! ...
//! end
//! ```
//!
//! Every value is written with 17 significant digits, which round-trips any
//! `f64` exactly.

use crate::error::{Error, Result};
use crate::model::{Activation, Mlp, MlpModel};
use crate::params::{Layer, ParamSet, ParamTensor};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "sharpkit-checkpoint";

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_string(model: &MlpModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("{MAGIC} {FORMAT_VERSION}\n"));
    let widths: Vec<String> = model.mlp.widths().iter().map(usize::to_string).collect();
    out.push_str(&format!("layer_widths {}\n", widths.join(" ")));
    out.push_str(&format!("activation {}\n", model.mlp.activation().name()));
    for layer in model.params.layers() {
        out.push_str(&format!("layer {} {}\n", layer.name, layer.filters.len()));
        for f in &layer.filters {
            let shape: Vec<String> = f.shape().iter().map(usize::to_string).collect();
            out.push_str("filter ");
            out.push_str(&shape.join("x"));
            for &v in f.values() {
                out.push(' ');
                out.push_str(&fmt_value(v));
            }
            out.push('\n');
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        for (i, raw) in self.inner.by_ref() {
            self.line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            return Ok(raw.split_whitespace().collect());
        }
        Err(self.err("unexpected end of checkpoint"))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Checkpoint { line: self.line, msg: msg.into() }
    }

    fn expect_key(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let toks = self.next_tokens()?;
        if toks.first() != Some(&key) {
            return Err(self.err(format!("expected '{key}', found '{}'", toks.join(" "))));
        }
        Ok(toks[1..].to_vec())
    }

    fn parse<T: std::str::FromStr>(&self, tok: &str, what: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(format!("invalid {what} '{tok}'")))
    }
}

pub fn from_str(text: &str) -> Result<MlpModel> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };

    let header = lines.expect_key(MAGIC)?;
    let version: u32 = match header.as_slice() {
        [v] => lines.parse(v, "format version")?,
        _ => return Err(lines.err("malformed header")),
    };
    if version != FORMAT_VERSION {
        return Err(lines.err(format!("unsupported format version {version}")));
    }

    let widths = lines
        .expect_key("layer_widths")?
        .iter()
        .map(|t| lines.parse::<usize>(t, "width"))
        .collect::<Result<Vec<_>>>()?;
    let act_toks = lines.expect_key("activation")?;
    let activation: Activation = match act_toks.as_slice() {
        [a] => a.parse().map_err(|e: Error| lines.err(e.to_string()))?,
        _ => return Err(lines.err("malformed activation line")),
    };
    let mlp = Mlp::new(widths, activation).map_err(|e| lines.err(e.to_string()))?;

    let mut layers = Vec::new();
    loop {
        let toks = lines.next_tokens()?;
        match toks.as_slice() {
            ["end"] => break,
            ["layer", name, count] => {
                let count: usize = lines.parse(count, "filter count")?;
                let mut filters = Vec::with_capacity(count);
                for _ in 0..count {
                    let ft = lines.expect_key("filter")?;
                    let (shape_tok, vals) =
                        ft.split_first().ok_or_else(|| lines.err("filter without shape"))?;
                    let shape = shape_tok
                        .split('x')
                        .map(|d| lines.parse::<usize>(d, "dimension"))
                        .collect::<Result<Vec<_>>>()?;
                    let values = vals
                        .iter()
                        .map(|v| lines.parse::<f64>(v, "value"))
                        .collect::<Result<Vec<_>>>()?;
                    filters.push(ParamTensor::new(shape, values).map_err(|e| lines.err(e.to_string()))?);
                }
                layers.push(Layer::new(*name, filters));
            }
            _ => return Err(lines.err(format!("unexpected line '{}'", toks.join(" ")))),
        }
    }
    let params = ParamSet::new(layers).map_err(|e| lines.err(e.to_string()))?;
    MlpModel::new(mlp, params).map_err(|e| lines.err(e.to_string()))
}
