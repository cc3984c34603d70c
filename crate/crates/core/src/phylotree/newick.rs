use std::fmt::Write;

use super::{BranchLengths, Topology};
use crate::error::{Error, Result};

enum Node {
    Leaf {
        name: String,
        length: Option<f64>,
        at: usize,
    },
    Internal {
        children: Vec<Node>,
        length: Option<f64>,
        at: usize,
    },
}

impl Node {
    fn length(&self) -> (Option<f64>, usize) {
        match self {
            Node::Leaf { length, at, .. } | Node::Internal { length, at, .. } => (*length, *at),
        }
    }

    fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Internal { children, .. } => children.iter().map(Node::n_leaves).sum(),
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

impl Parser<'_> {
    fn skip_ws(&mut self) -> Result<()> {
        loop {
            match self.s.get(self.pos) {
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(b'[') => {
                    let start = self.pos;
                    while self.s.get(self.pos).is_some_and(|&c| c != b']') {
                        self.pos += 1;
                    }
                    if self.pos == self.s.len() {
                        return Err(err(start, "unterminated comment"));
                    }
                    self.pos += 1;
                }
                _ => return Ok(()),
            }
        }
    }

    fn peek(&mut self) -> Result<Option<u8>> {
        self.skip_ws()?;
        Ok(self.s.get(self.pos).copied())
    }

    fn label(&mut self) -> Result<String> {
        self.skip_ws()?;
        if self.s.get(self.pos) == Some(&b'\'') {
            let start = self.pos;
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.s.get(self.pos) {
                    None => return Err(err(start, "unterminated quoted label")),
                    Some(b'\'') if self.s.get(self.pos + 1) == Some(&b'\'') => {
                        out.push(b'\'');
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(&c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            return String::from_utf8(out).map_err(|_| err(start, "label is not valid UTF-8"));
        }
        let start = self.pos;
        while let Some(&c) = self.s.get(self.pos) {
            if c.is_ascii_whitespace() || b"(),:;[]'".contains(&c) {
                break;
            }
            self.pos += 1;
        }
        let raw = std::str::from_utf8(&self.s[start..self.pos])
            .map_err(|_| err(start, "label is not valid UTF-8"))?;
        Ok(raw.replace('_', " "))
    }

    fn length(&mut self) -> Result<Option<f64>> {
        if self.peek()? != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip_ws()?;
        let start = self.pos;
        while self
            .s
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit() || b"+-.eE".contains(c))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or_default();
        let v: f64 = text
            .parse()
            .map_err(|_| err(start, format!("invalid branch length {text:?}")))?;
        if !v.is_finite() {
            return Err(err(start, format!("branch length {text} is not finite")));
        }
        Ok(Some(v))
    }

    fn subtree(&mut self) -> Result<Node> {
        let at = self.pos;
        if self.peek()? == Some(b'(') {
            self.pos += 1;
            let mut children = vec![self.subtree()?];
            loop {
                match self.peek()? {
                    Some(b',') => {
                        self.pos += 1;
                        children.push(self.subtree()?);
                    }
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        return Err(err(
                            self.pos,
                            format!("expected ',' or ')', found {:?}", c as char),
                        ))
                    }
                    None => return Err(err(self.pos, "unexpected end of input, expected ')'")),
                }
            }
            // internal labels (e.g. support values) are ignored
            self.label()?;
            let length = self.length()?;
            Ok(Node::Internal {
                children,
                length,
                at,
            })
        } else {
            let name = self.label()?;
            if name.is_empty() {
                return Err(err(self.pos, "expected a taxon label or '('"));
            }
            let length = self.length()?;
            Ok(Node::Leaf { name, length, at })
        }
    }
}

struct Builder {
    names: Vec<String>,
    edges: Vec<(usize, usize)>,
    lengths: Vec<f64>,
    next_internal: usize,
}

impl Builder {
    fn length_of(node: &Node) -> Result<f64> {
        match node.length() {
            (Some(t), _) => Ok(t),
            (None, at) => Err(err(at, "missing branch length")),
        }
    }

    /// Returns the node id of `node` after wiring up its subtree.
    fn add(&mut self, node: &Node) -> Result<usize> {
        match node {
            Node::Leaf { name, .. } => {
                self.names.push(name.clone());
                Ok(self.names.len() - 1)
            }
            Node::Internal { children, at, .. } => {
                if children.len() != 2 {
                    return Err(Error::Unsupported(format!(
                        "non-binary internal node with {} children at byte {at}",
                        children.len()
                    )));
                }
                let id = self.next_internal;
                self.next_internal += 1;
                for c in children {
                    let t = Self::length_of(c)?;
                    let cid = self.add(c)?;
                    self.edges.push((id, cid));
                    self.lengths.push(t);
                }
                Ok(id)
            }
        }
    }
}

/// Parses a Newick tree with branch lengths. A bifurcating root is suppressed
/// by merging its two branches, so the result is unrooted.
pub fn parse_newick(text: &str) -> Result<(Topology, BranchLengths)> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
    };
    let root = p.subtree()?;
    match p.peek()? {
        Some(b';') => p.pos += 1,
        Some(c) => return Err(err(p.pos, format!("expected ';', found {:?}", c as char))),
        None => return Err(err(p.pos, "missing terminating ';'")),
    }
    if let Some(c) = p.peek()? {
        return Err(err(
            p.pos,
            format!("trailing input after ';': {:?}", c as char),
        ));
    }
    let children = match &root {
        Node::Leaf { at, .. } => return Err(err(*at, "a tree needs at least 2 leaves")),
        Node::Internal { children, .. } => children,
    };
    let n = root.n_leaves();
    let mut b = Builder {
        names: Vec::new(),
        edges: Vec::new(),
        lengths: Vec::new(),
        next_internal: n,
    };
    let traversal_root = match children.len() {
        2 => {
            let (t0, t1) = (
                Builder::length_of(&children[0])?,
                Builder::length_of(&children[1])?,
            );
            let a = b.add(&children[0])?;
            let c = b.add(&children[1])?;
            b.edges.push((a, c));
            b.lengths.push(t0 + t1);
            if n == 2 {
                0
            } else {
                n
            }
        }
        3 => {
            let id = b.next_internal;
            b.next_internal += 1;
            for c in children {
                let t = Builder::length_of(c)?;
                let cid = b.add(c)?;
                b.edges.push((id, cid));
                b.lengths.push(t);
            }
            id
        }
        k => {
            return Err(Error::Unsupported(format!(
                "root has {k} children; only binary trees are supported"
            )))
        }
    };
    let topo = Topology::new(b.names, b.edges, traversal_root)?;
    Ok((topo, BranchLengths::new(b.lengths)?))
}

fn quote(name: &str) -> String {
    if name.bytes().any(|c| b"(),:;[]'_".contains(&c)) || name.is_empty() {
        format!("'{}'", name.replace('\'', "''"))
    } else {
        name.replace(' ', "_")
    }
}

/// Writes Newick text with branch lengths in shortest round-trip form.
pub fn emit_newick(topo: &Topology, lengths: &BranchLengths) -> String {
    let bl = lengths.as_slice();
    let mut out = String::new();
    if topo.n_leaves() == 2 {
        let half = bl[0] / 2.0;
        let _ = write!(
            out,
            "({}:{half:?},{}:{:?});",
            quote(&topo.names()[0]),
            quote(&topo.names()[1]),
            bl[0] - half
        );
        return out;
    }
    let start = if topo.is_leaf(topo.root()) {
        topo.neighbors(topo.root())[0].0
    } else {
        topo.root()
    };
    fn rec(topo: &Topology, bl: &[f64], v: usize, parent: usize, out: &mut String) {
        if topo.is_leaf(v) {
            out.push_str(&quote(&topo.names()[v]));
            return;
        }
        out.push('(');
        let mut first = true;
        for &(u, e) in topo.neighbors(v) {
            if u == parent {
                continue;
            }
            if !first {
                out.push(',');
            }
            first = false;
            rec(topo, bl, u, v, out);
            let _ = write!(out, ":{:?}", bl[e]);
        }
        out.push(')');
    }
    rec(topo, bl, start, usize::MAX, &mut out);
    out.push(';');
    out
}
