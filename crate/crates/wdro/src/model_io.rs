//! `wdro-mlp 1` text model files.
//!
//! ```text
//! wdro-mlp 1
//! dims <n> <K> <H>
//! activation relu|gelu|silu
//! lo <n values>
//! hi <n values>
//! layer <rows> <cols>      (H + 1 times)
//! <cols values>            (rows lines)
//! bias <rows values>
//! ```
//!
//! Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::Path;

use wdro_core::network::Layer;
use wdro_core::{ActivationKind, BoxDomain, Mat, Mlp};

use crate::error::{Error, Result};
use crate::fmt::join;

pub const MODEL_HEADER: &str = "wdro-mlp 1";

pub fn write_model(net: &Mlp) -> String {
    let mut out = String::new();
    let dom = net.domain();
    writeln!(out, "{MODEL_HEADER}").unwrap();
    writeln!(out, "dims {} {} {}", net.input_dim(), net.output_dim(), net.hidden_layers()).unwrap();
    writeln!(out, "activation {}", net.activation()).unwrap();
    writeln!(out, "lo {}", join(dom.lo(), " ")).unwrap();
    writeln!(out, "hi {}", join(dom.hi(), " ")).unwrap();
    for layer in net.layers() {
        let w = &layer.weight;
        writeln!(out, "layer {} {}", w.rows(), w.cols()).unwrap();
        for i in 0..w.rows() {
            writeln!(out, "{}", join(w.row(i), " ")).unwrap();
        }
        writeln!(out, "bias {}", join(&layer.bias, " ")).unwrap();
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    path: &'a Path,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &'a Path) -> Self {
        Lines {
            inner: text.lines().enumerate().peekable(),
            path,
            last: 0,
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    /// Next meaningful line as (line number, tokens).
    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if !body.is_empty() {
                self.last = i + 1;
                return Ok((i + 1, body.split_whitespace().collect()));
            }
        }
        Err(self.err(self.last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, tokens) = self.next(key)?;
        if tokens[0] != key {
            return Err(self.err(line, format!("expected `{key}`, found `{}`", tokens[0])));
        }
        Ok((line, tokens[1..].to_vec()))
    }

    fn numbers(&self, line: usize, tokens: &[&str], count: usize) -> Result<Vec<f64>> {
        if tokens.len() != count {
            return Err(self.err(line, format!("expected {count} values, found {}", tokens.len())));
        }
        tokens
            .iter()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.err(line, format!("`{t}` is not a finite number"))),
            })
            .collect()
    }

    fn counts(&self, line: usize, tokens: &[&str], count: usize) -> Result<Vec<usize>> {
        if tokens.len() != count {
            return Err(self.err(line, format!("expected {count} integers, found {}", tokens.len())));
        }
        tokens
            .iter()
            .map(|t| t.parse::<usize>().map_err(|_| self.err(line, format!("`{t}` is not a count"))))
            .collect()
    }
}

pub fn parse_model(text: &str, path: &Path) -> Result<Mlp> {
    let mut lines = Lines::new(text, path);
    let (line, tokens) = lines.next("header")?;
    if tokens.join(" ") != MODEL_HEADER {
        return Err(lines.err(line, format!("expected header `{MODEL_HEADER}`")));
    }
    let (line, t) = lines.keyed("dims")?;
    let dims = lines.counts(line, &t, 3)?;
    let (n, k, h) = (dims[0], dims[1], dims[2]);
    if n == 0 || k == 0 {
        return Err(lines.err(line, "input and output dimensions must be positive"));
    }
    let (line, t) = lines.keyed("activation")?;
    if t.len() != 1 {
        return Err(lines.err(line, "expected one activation tag"));
    }
    let activation: ActivationKind = t[0]
        .parse()
        .map_err(|_| lines.err(line, format!("unknown activation `{}`", t[0])))?;
    let (line, t) = lines.keyed("lo")?;
    let lo = lines.numbers(line, &t, n)?;
    let (line, t) = lines.keyed("hi")?;
    let hi = lines.numbers(line, &t, n)?;
    let domain = BoxDomain::new(lo, hi).map_err(|e| lines.err(line, e.to_string()))?;

    let mut layers = Vec::with_capacity(h + 1);
    let mut prev = n;
    for index in 0..=h {
        let (line, t) = lines.keyed("layer")?;
        let shape = lines.counts(line, &t, 2)?;
        let (rows, cols) = (shape[0], shape[1]);
        if cols != prev {
            return Err(lines.err(line, format!("layer {index} has {cols} columns, expected {prev}")));
        }
        if index == h && rows != k {
            return Err(lines.err(line, format!("output layer has {rows} rows, expected {k}")));
        }
        if rows == 0 {
            return Err(lines.err(line, "layer needs at least one row"));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line, t) = lines.next("weight row")?;
            data.extend(lines.numbers(line, &t, cols)?);
        }
        let (line, t) = lines.keyed("bias")?;
        let bias = lines.numbers(line, &t, rows)?;
        let weight = Mat::new(rows, cols, data).map_err(|e| lines.err(line, e.to_string()))?;
        layers.push(Layer::new(weight, bias).map_err(|e| lines.err(line, e.to_string()))?);
        prev = rows;
    }
    if let Ok((line, _)) = lines.next("") {
        return Err(lines.err(line, "trailing content after the last layer"));
    }
    Mlp::new(layers, activation, domain).map_err(|e| lines.err(lines.last, e.to_string()))
}

pub fn load_model(path: &Path) -> Result<Mlp> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABS: &str = "wdro-mlp 1\n# |x|\ndims 1 1 1\nactivation relu\nlo -5\nhi 5\n\nlayer 2 1\n1\n-1\nbias 0 0\nlayer 1 2\n1 1\nbias 0\n";

    #[test]
    fn parses_and_round_trips() {
        let net = parse_model(ABS, Path::new("abs.txt")).unwrap();
        assert_eq!(net.forward(&[-3.0]).unwrap(), [3.0]);
        let text = write_model(&net);
        let again = parse_model(&text, Path::new("x")).unwrap();
        assert_eq!(net, again);
        assert_eq!(write_model(&again), text);
    }

    fn parse_err(text: &str) -> (usize, String) {
        match parse_model(text, Path::new("m")) {
            Err(Error::Parse { line, message, .. }) => (line, message),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn shape_errors_carry_line_numbers() {
        let bad = ABS.replace("layer 1 2", "layer 1 3");
        assert_eq!(parse_err(&bad).0, 12);
        let bad = ABS.replace("1 1\nbias 0\n", "1\nbias 0\n");
        assert_eq!(parse_err(&bad).0, 13);
        let bad = ABS.replace("dims 1 1 1", "dims 1 2 1");
        assert!(parse_err(&bad).1.contains("output layer"));
        let bad = ABS.replace("relu", "tanh");
        assert_eq!(parse_err(&bad).0, 4);
        let bad = ABS.replace("bias 0 0", "bias 0 nan");
        assert_eq!(parse_err(&bad).0, 11);
        assert_eq!(parse_err("wdro-mlp 2\n").0, 1);
        assert!(parse_err(&format!("{ABS}layer 1 1\n")).1.contains("trailing"));
        assert!(parse_err("wdro-mlp 1\ndims 1 1 0\n").1.contains("end of file"));
    }
}
