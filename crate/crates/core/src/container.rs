//! Line-oriented text container for model and checkpoint files.
//!
//! ```text
//! # config_hash=<hex> seed=<n>
//! aa-container 1 <kind>
//! meta <key> <value...>
//! tensor <name> <rows> <cols>
//! <cols values>            (one line per row)
//! end
//! ```
//!
//! Values are written in shortest round-trip scientific notation, so a
//! parse/render cycle is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::nn::{Dense, Mlp};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "aa-container";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContainerError {
    #[error("line {0}: {1}")]
    Syntax(usize, String),
    #[error("unsupported container version {0}")]
    Version(u32),
    #[error("expected a `{expected}` container, found `{found}`")]
    Kind { expected: String, found: String },
    #[error("missing entry `{0}`")]
    Missing(String),
    #[error("entry `{0}` has an invalid value")]
    BadValue(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub kind: String,
    /// Rendered as the leading `#` comment line.
    pub header: Vec<(String, String)>,
    pub meta: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Container {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            ..Self::default()
        }
    }

    pub fn with_header(mut self, config_hash: &str, seed: u64) -> Self {
        self.header = vec![("config_hash".into(), config_hash.into()), ("seed".into(), seed.to_string())];
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let v = value.to_string();
        debug_assert!(!v.contains('\n') && !key.contains(char::is_whitespace));
        self.meta.insert(key.to_string(), v);
    }

    pub fn meta_str(&self, key: &str) -> Result<&str, ContainerError> {
        self.meta.get(key).map(String::as_str).ok_or_else(|| ContainerError::Missing(key.to_string()))
    }

    pub fn meta<T: FromStr>(&self, key: &str) -> Result<T, ContainerError> {
        self.meta_str(key)?.parse().map_err(|_| ContainerError::BadValue(key.to_string()))
    }

    pub fn set_tensor(&mut self, name: &str, rows: usize, cols: usize, data: Vec<f64>) {
        assert_eq!(rows * cols, data.len(), "tensor shape");
        self.tensors.insert(name.to_string(), Tensor { rows, cols, data });
    }

    pub fn set_vector(&mut self, name: &str, data: &[f64]) {
        self.set_tensor(name, 1, data.len(), data.to_vec());
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, ContainerError> {
        self.tensors.get(name).ok_or_else(|| ContainerError::Missing(name.to_string()))
    }

    pub fn vector(&self, name: &str) -> Result<Vec<f64>, ContainerError> {
        Ok(self.tensor(name)?.data.clone())
    }

    pub fn put_mlp(&mut self, prefix: &str, m: &Mlp) {
        self.set_meta(&format!("{prefix}.layers"), m.layers.len());
        for (i, l) in m.layers.iter().enumerate() {
            self.set_tensor(&format!("{prefix}.{i}.w"), l.inputs(), l.outputs(), l.w.iter().copied().collect());
            self.set_vector(&format!("{prefix}.{i}.b"), l.b.as_slice().expect("contiguous"));
        }
    }

    pub fn get_mlp(&self, prefix: &str) -> Result<Mlp, ContainerError> {
        let n: usize = self.meta(&format!("{prefix}.layers"))?;
        let mut layers = Vec::with_capacity(n);
        for i in 0..n {
            let wn = format!("{prefix}.{i}.w");
            let w = self.tensor(&wn)?;
            let b = self.tensor(&format!("{prefix}.{i}.b"))?;
            if b.data.len() != w.cols || layers.last().is_some_and(|p: &Dense| p.outputs() != w.rows) {
                return Err(ContainerError::BadValue(wn));
            }
            layers.push(Dense {
                w: Array2::from_shape_vec((w.rows, w.cols), w.data.clone()).map_err(|_| ContainerError::BadValue(wn))?,
                b: Array1::from(b.data.clone()),
            });
        }
        if layers.is_empty() {
            return Err(ContainerError::BadValue(format!("{prefix}.layers")));
        }
        Ok(Mlp { layers })
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), ContainerError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(ContainerError::Kind {
                expected: kind.to_string(),
                found: self.kind.clone(),
            })
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.header.is_empty() {
            let parts: Vec<String> = self.header.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "# {}", parts.join(" "));
        }
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION} {}", self.kind);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, t) in &self.tensors {
            let _ = writeln!(out, "tensor {name} {} {}", t.rows, t.cols);
            for row in t.data.chunks(t.cols.max(1)) {
                let vals: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(out, "{}", vals.join(" "));
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self, ContainerError> {
        let syntax = |i: usize, m: &str| ContainerError::Syntax(i + 1, m.to_string());
        let mut lines = text.lines().enumerate().peekable();
        let mut header = Vec::new();
        while let Some((_, l)) = lines.peek() {
            match l.strip_prefix('#') {
                Some(rest) => {
                    for tok in rest.split_whitespace() {
                        if let Some((k, v)) = tok.split_once('=') {
                            header.push((k.to_string(), v.to_string()));
                        }
                    }
                    lines.next();
                }
                None => break,
            }
        }
        let (i, first) = lines.next().ok_or_else(|| syntax(0, "empty container"))?;
        let mut parts = first.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(syntax(i, "missing container magic"));
        }
        let version: u32 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| syntax(i, "bad version"))?;
        if version != FORMAT_VERSION {
            return Err(ContainerError::Version(version));
        }
        let kind = parts.next().ok_or_else(|| syntax(i, "missing kind"))?.to_string();
        let mut c = Container {
            kind,
            header,
            ..Default::default()
        };
        let mut ended = false;
        while let Some((i, line)) = lines.next() {
            if line == "end" {
                ended = true;
                break;
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                c.meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let f: Vec<&str> = rest.split_whitespace().collect();
                let [name, rows, cols] = f[..] else {
                    return Err(syntax(i, "bad tensor line"));
                };
                let rows: usize = rows.parse().map_err(|_| syntax(i, "bad rows"))?;
                let cols: usize = cols.parse().map_err(|_| syntax(i, "bad cols"))?;
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (j, row) = lines.next().ok_or_else(|| syntax(i, "truncated tensor"))?;
                    let before = data.len();
                    for v in row.split_whitespace() {
                        data.push(v.parse::<f64>().map_err(|_| syntax(j, "bad number"))?);
                    }
                    if data.len() - before != cols {
                        return Err(syntax(j, "wrong row width"));
                    }
                }
                c.tensors.insert(name.to_string(), Tensor { rows, cols, data });
            } else {
                return Err(syntax(i, "unexpected line"));
            }
        }
        if !ended {
            return Err(syntax(text.lines().count(), "missing end"));
        }
        Ok(c)
    }
}
