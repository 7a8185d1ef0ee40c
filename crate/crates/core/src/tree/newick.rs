//! Newick reading and writing.
//!
//! Trees are written with branch lengths in years; the root ancestor edge is
//! never written. Ages are recovered on input from branch lengths plus one
//! anchor: a per-leaf age table, a known root age, or (by default) the
//! youngest leaf sitting at age zero.

use std::collections::HashMap;
use std::fmt::Write;

use super::{DatedTree, NodeId, Subtree};
use crate::error::{Error, Result};

/// A parsed Newick node. Multifurcations are allowed at this level.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewickNode {
    pub name: Option<String>,
    pub length: Option<f64>,
    /// Text of a trailing `[...]` comment, without the brackets.
    pub comment: Option<String>,
    pub children: Vec<NewickNode>,
}

pub fn parse_newick(text: &str) -> Result<NewickNode> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let node = p.node()?;
    p.skip_ws();
    if p.peek() == Some(b';') {
        p.pos += 1;
    }
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.err("trailing characters after tree"));
    }
    Ok(node)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            line: 1,
            col: Some(self.pos + 1),
            msg: format!("newick: {msg}"),
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn node(&mut self) -> Result<NewickNode> {
        let mut node = NewickNode::default();
        self.skip_ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                node.children.push(self.node()?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ')'")),
                }
            }
        }
        self.skip_ws();
        node.name = self.label()?;
        self.skip_ws();
        node.comment = self.comment()?;
        self.skip_ws();
        if self.peek() == Some(b':') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E'))
            {
                self.pos += 1;
            }
            let txt = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
            let len: f64 = txt
                .parse()
                .map_err(|_| self.err(&format!("bad branch length '{txt}'")))?;
            node.length = Some(len);
            self.skip_ws();
            if node.comment.is_none() {
                node.comment = self.comment()?;
            }
        }
        Ok(node)
    }

    fn label(&mut self) -> Result<Option<String>> {
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.peek() {
                    None => return Err(self.err("unterminated quoted label")),
                    Some(b'\'') if self.s.get(self.pos + 1) == Some(&b'\'') => {
                        out.push(b'\'');
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            return Ok(Some(String::from_utf8_lossy(&out).into_owned()));
        }
        let start = self.pos;
        while matches!(self.peek(), Some(c) if !matches!(c, b'(' | b')' | b',' | b':' | b';' | b'[') && !c.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        if self.pos == start {
            Ok(None)
        } else {
            Ok(Some(
                String::from_utf8_lossy(&self.s[start..self.pos]).into_owned(),
            ))
        }
    }

    fn comment(&mut self) -> Result<Option<String>> {
        if self.peek() != Some(b'[') {
            return Ok(None);
        }
        let start = self.pos + 1;
        while self.peek() != Some(b']') {
            if self.peek().is_none() {
                return Err(self.err("unterminated comment"));
            }
            self.pos += 1;
        }
        let text = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(Some(text))
    }
}

/// Where absolute ages come from when reading branch lengths.
enum Anchor<'a> {
    YoungestLeafAtZero,
    RootAge(f64),
    LeafAges(&'a HashMap<String, f64>),
}

impl DatedTree {
    /// Reads a binary Newick tree; the leaf farthest from the root is placed at age 0.
    pub fn from_newick(text: &str) -> Result<Self> {
        build(&parse_newick(text)?, Anchor::YoungestLeafAtZero)
    }

    /// Reads a binary Newick tree whose root has the given age.
    pub fn from_newick_with_root_age(text: &str, root_age: f64) -> Result<Self> {
        build(&parse_newick(text)?, Anchor::RootAge(root_age))
    }

    /// Reads a binary Newick tree anchored by known leaf ages. Leaves missing
    /// from the table get the age implied by branch lengths.
    pub fn from_newick_with_leaf_ages(text: &str, ages: &HashMap<String, f64>) -> Result<Self> {
        build(&parse_newick(text)?, Anchor::LeafAges(ages))
    }

    /// Newick text with branch lengths in years.
    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.write_node(self.root(), &mut out);
        out.push(';');
        out
    }

    fn write_node(&self, v: NodeId, out: &mut String) {
        match self.children(v) {
            Some([a, b]) => {
                out.push('(');
                self.write_node(a, out);
                out.push(',');
                self.write_node(b, out);
                out.push(')');
            }
            None => out.push_str(&quote_label(self.leaf_name(v))),
        }
        if v != self.root() {
            let _ = write!(out, ":{}", self.branch_length(v));
        }
    }
}

/// Quotes a label when it contains Newick metacharacters.
pub(crate) fn quote_label(name: &str) -> String {
    if name.is_empty()
        || name.bytes().any(|c| {
            matches!(c, b'(' | b')' | b',' | b':' | b';' | b'[' | b']' | b'\'')
                || c.is_ascii_whitespace()
        })
    {
        format!("'{}'", name.replace('\'', "''"))
    } else {
        name.to_string()
    }
}

fn build(root: &NewickNode, anchor: Anchor) -> Result<DatedTree> {
    // distance from the root to every node, in pre-order
    fn walk(n: &NewickNode, depth: f64, out: &mut Vec<(f64, Option<String>)>) -> Result<()> {
        if !n.children.is_empty() && n.children.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "node with {} children; only binary trees are supported",
                n.children.len()
            )));
        }
        out.push((
            depth,
            if n.children.is_empty() {
                n.name.clone()
            } else {
                None
            },
        ));
        for c in &n.children {
            let len = c
                .length
                .ok_or_else(|| Error::InvalidInput("missing branch length".into()))?;
            if !(len >= 0.0) || !len.is_finite() {
                return Err(Error::InvalidInput(format!("invalid branch length {len}")));
            }
            walk(c, depth + len, out)?;
        }
        Ok(())
    }
    let mut flat = Vec::new();
    walk(root, 0.0, &mut flat)?;
    let leaves: Vec<(f64, String)> = flat
        .iter()
        .filter_map(|(d, name)| name.clone().map(|n| (*d, n)))
        .collect();
    if flat.iter().filter(|(_, n)| n.is_none()).count() + leaves.len() != flat.len() {
        return Err(Error::InvalidInput("unnamed leaf".into()));
    }
    let mut names: Vec<&str> = leaves.iter().map(|(_, n)| n.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("duplicate leaf name".into()));
    }
    let max_depth = leaves.iter().map(|(d, _)| *d).fold(0.0, f64::max);
    let root_age = match anchor {
        Anchor::YoungestLeafAtZero => max_depth,
        Anchor::RootAge(r) => r,
        Anchor::LeafAges(table) => leaves
            .iter()
            .find_map(|(d, n)| table.get(n).map(|a| a + d))
            .unwrap_or(max_depth),
    };
    let tol = 1e-9 * root_age.abs().max(1.0);
    let leaf_age = |d: f64, name: &str| -> Result<f64> {
        let implied = root_age - d;
        if let Anchor::LeafAges(table) = anchor {
            if let Some(&a) = table.get(name) {
                if (a - implied).abs() > 1e-6 * root_age.abs().max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "leaf '{name}' has tabulated age {a} but branch lengths imply {implied}"
                    )));
                }
                return Ok(a);
            }
        }
        if implied < -tol {
            return Err(Error::InvalidInput(format!(
                "leaf '{name}' would have negative age {implied}"
            )));
        }
        Ok(implied.max(0.0))
    };

    fn to_subtree(
        n: &NewickNode,
        depth: f64,
        root_age: f64,
        leaf_age: &dyn Fn(f64, &str) -> Result<f64>,
    ) -> Result<Subtree> {
        if n.children.is_empty() {
            let name = n.name.clone().unwrap_or_default();
            let age = leaf_age(depth, &name)?;
            return Ok(Subtree::leaf(name, age));
        }
        let mut kids = Vec::with_capacity(2);
        for c in &n.children {
            kids.push(to_subtree(
                c,
                depth + c.length.unwrap_or(0.0),
                root_age,
                leaf_age,
            )?);
        }
        let b = kids.pop().expect("binary");
        let a = kids.pop().expect("binary");
        let age = (root_age - depth).max(a.age()).max(b.age());
        Ok(Subtree::node(age, a, b))
    }
    let spec = to_subtree(root, 0.0, root_age, &leaf_age)?;
    DatedTree::from_subtree(&spec)
}

impl Subtree {
    fn age(&self) -> f64 {
        match self {
            Subtree::Leaf { age, .. } | Subtree::Node { age, .. } => *age,
        }
    }
}
