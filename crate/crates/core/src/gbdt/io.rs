//! Model text format, version 1.
//!
//! ```text
//! bathyedit-model 1
//! base_score <float>
//! learning_rate <float>
//! norm_constant <float>
//! features <F>
//! edges <count> <e_0> ... <e_{count-1}>      (F lines)
//! trees <T>
//! tree <node_count>                           (T blocks)
//! split <feature> <bin> <threshold>           (preorder: node, left subtree, right subtree)
//! leaf <value>
//! ```
//!
//! Floats are shortest round-trip decimals, fields are separated by one
//! space and lines end with LF. `norm_constant` is informational; it is
//! recomputed on load and must match.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::model::Model;
use super::tree::{Node, Tree};
use super::GbdtError;
use crate::fmt::f64_str;

pub const MODEL_FORMAT_VERSION: &str = "1";
const MAGIC: &str = "bathyedit-model";

pub fn write_model<W: Write>(model: &Model, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC} {MODEL_FORMAT_VERSION}")?;
    writeln!(out, "base_score {}", f64_str(model.base_score()))?;
    writeln!(out, "learning_rate {}", f64_str(model.learning_rate()))?;
    writeln!(out, "norm_constant {}", f64_str(model.norm_constant()))?;
    writeln!(out, "features {}", model.num_features())?;
    for edges in model.bin_edges() {
        let mut line = format!("edges {}", edges.len());
        for e in edges {
            line.push(' ');
            line.push_str(&f64_str(*e));
        }
        writeln!(out, "{line}")?;
    }
    writeln!(out, "trees {}", model.trees().len())?;
    for tree in model.trees() {
        writeln!(out, "tree {}", tree.nodes().len())?;
        // Trees are stored in preorder already.
        for node in tree.nodes() {
            match node {
                Node::Split {
                    feature,
                    bin,
                    threshold,
                    ..
                } => writeln!(out, "split {feature} {bin} {}", f64_str(*threshold))?,
                Node::Leaf { value } => writeln!(out, "leaf {}", f64_str(*value))?,
            }
        }
    }
    Ok(())
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), GbdtError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(model, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, GbdtError> {
    read_model(BufReader::new(File::open(path)?))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String, GbdtError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, message: impl Into<String>) -> GbdtError {
        GbdtError::Malformed {
            line: self.line,
            message: message.into(),
        }
    }

    /// Reads a line of the form `<key> <fields...>`.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>, GbdtError> {
        let text = self.next()?;
        let mut parts = text.split(' ');
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected {key:?}")));
        }
        Ok(parts.map(str::to_owned).collect())
    }

    fn single<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, GbdtError> {
        let fields = self.keyed(key)?;
        match fields.as_slice() {
            [v] => self.parse(v),
            _ => Err(self.err(format!("{key} takes one value"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T, GbdtError> {
        s.parse().map_err(|_| self.err(format!("cannot parse {s:?}")))
    }
}

pub fn read_model<R: BufRead>(reader: R) -> Result<Model, GbdtError> {
    let mut lines = Lines {
        inner: reader.lines(),
        line: 0,
    };
    let head = lines.next()?;
    match head.split_once(' ') {
        Some((MAGIC, MODEL_FORMAT_VERSION)) => {}
        Some((MAGIC, other)) => return Err(GbdtError::Version(other.to_owned())),
        _ => return Err(lines.err("not a model file")),
    }
    let base_score: f64 = lines.single("base_score")?;
    let learning_rate: f64 = lines.single("learning_rate")?;
    let norm_constant: f64 = lines.single("norm_constant")?;
    let features: usize = lines.single("features")?;
    let mut edges = Vec::with_capacity(features);
    for _ in 0..features {
        let fields = lines.keyed("edges")?;
        let count: usize = lines.parse(fields.first().ok_or_else(|| lines.err("missing count"))?)?;
        if fields.len() != count + 1 {
            return Err(lines.err(format!("expected {count} edges")));
        }
        let values = fields[1..]
            .iter()
            .map(|s| lines.parse::<f64>(s))
            .collect::<Result<Vec<_>, _>>()?;
        if !values.windows(2).all(|w| w[0] < w[1]) || values.iter().any(|v| !v.is_finite()) {
            return Err(lines.err("edges must be finite and strictly increasing"));
        }
        edges.push(values);
    }
    let tree_count: usize = lines.single("trees")?;
    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        let count: usize = lines.single("tree")?;
        let mut flat = Vec::with_capacity(count);
        for _ in 0..count {
            let text = lines.next()?;
            let parts: Vec<&str> = text.split(' ').collect();
            match parts.as_slice() {
                ["split", f, b, t] => flat.push((
                    true,
                    lines.parse::<usize>(f)?,
                    lines.parse::<usize>(b)?,
                    lines.parse::<f64>(t)?,
                )),
                ["leaf", v] => flat.push((false, 0, 0, lines.parse::<f64>(v)?)),
                _ => return Err(lines.err("expected split or leaf")),
            }
        }
        let mut nodes = Vec::with_capacity(count);
        let mut pos = 0;
        link_preorder(&flat, &mut pos, &mut nodes).map_err(|m| lines.err(m))?;
        if pos != flat.len() {
            return Err(lines.err("trailing nodes after a complete tree"));
        }
        trees.push(Tree::new(nodes)?);
    }
    if let Some(extra) = lines.inner.next() {
        lines.line += 1;
        if !extra?.is_empty() {
            return Err(lines.err("trailing content"));
        }
    }
    let model = Model::new(trees, learning_rate, base_score, edges)?;
    if model.norm_constant().to_bits() != norm_constant.to_bits() {
        return Err(GbdtError::Malformed {
            line: 4,
            message: "norm_constant does not match the trees".into(),
        });
    }
    Ok(model)
}

/// Converts a preorder `(is_split, feature, bin, value)` list into linked
/// nodes; returns the index of the subtree root.
fn link_preorder(
    flat: &[(bool, usize, usize, f64)],
    pos: &mut usize,
    nodes: &mut Vec<Node>,
) -> Result<usize, String> {
    let &(is_split, feature, bin, value) = flat.get(*pos).ok_or("tree ends inside a split")?;
    *pos += 1;
    let here = nodes.len();
    nodes.push(Node::Leaf { value });
    if is_split {
        let left = link_preorder(flat, pos, nodes)?;
        let right = link_preorder(flat, pos, nodes)?;
        nodes[here] = Node::Split {
            feature,
            bin,
            threshold: value,
            left,
            right,
        };
    }
    Ok(here)
}
