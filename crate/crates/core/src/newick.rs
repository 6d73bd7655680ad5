//! Rooted binary Newick trees with branch lengths.
//!
//! Catastrophe counts are carried as a comment annotation directly after a
//! node's label, before its branch length: `taxon_1[&cat=2]:153.7`. Nodes
//! without an annotation have no catastrophes. Node ages are recovered from
//! branch lengths with the youngest leaf at age zero.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::tree::{Node, Tree};
use crate::{Error, Result};

struct RawNode {
    name: Option<String>,
    length: Option<f64>,
    cats: usize,
    children: Vec<usize>,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    nodes: Vec<RawNode>,
}

fn err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Newick {
        offset,
        msg: msg.into(),
    }
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn subtree(&mut self) -> Result<usize> {
        let mut children = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                children.push(self.subtree()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(err(self.pos, "expected ',' or ')'")),
                }
            }
        }
        let name = self.label();
        let mut cats = 0;
        let mut length = None;
        loop {
            match self.peek() {
                Some(b'[') => cats += self.comment()?,
                Some(b':') => {
                    self.pos += 1;
                    self.skip_ws();
                    let start = self.pos;
                    while self.pos < self.s.len()
                        && matches!(
                            self.s[self.pos],
                            b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E'
                        )
                    {
                        self.pos += 1;
                    }
                    let txt = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                    length = Some(
                        txt.parse::<f64>()
                            .map_err(|_| err(start, format!("bad branch length {txt:?}")))?,
                    );
                }
                _ => break,
            }
        }
        self.nodes.push(RawNode {
            name,
            length,
            cats,
            children,
        });
        Ok(self.nodes.len() - 1)
    }

    fn label(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len()
            && !matches!(self.s[self.pos], b'(' | b')' | b',' | b':' | b';' | b'[')
            && !self.s[self.pos].is_ascii_whitespace()
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }

    /// Parses a `[...]` comment; returns the catastrophe count it carries.
    fn comment(&mut self) -> Result<usize> {
        let start = self.pos;
        let end = self.s[start..]
            .iter()
            .position(|&c| c == b']')
            .ok_or_else(|| err(start, "unterminated comment"))?;
        let body = std::str::from_utf8(&self.s[start + 1..start + end]).unwrap_or("");
        self.pos = start + end + 1;
        if let Some(v) = body.strip_prefix("&cat=") {
            return v
                .trim()
                .parse::<usize>()
                .map_err(|_| err(start, format!("bad catastrophe count {v:?}")));
        }
        Ok(0)
    }
}

/// Parse a Newick tree. When `taxa` is given, leaf `i` of the tree is the
/// taxon `taxa[i]` and every taxon must appear exactly once; otherwise
/// leaves are numbered in order of appearance.
pub fn parse_newick(text: &str, taxa: Option<&[String]>) -> Result<Tree> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
        nodes: Vec::new(),
    };
    let root = p.subtree()?;
    match p.peek() {
        Some(b';') | None => {}
        Some(_) => {
            return Err(err(
                p.pos,
                "unexpected text after tree (unbalanced parentheses?)",
            ))
        }
    }
    let raw = p.nodes;
    for (i, n) in raw.iter().enumerate() {
        match n.children.len() {
            0 | 2 => {}
            k => {
                return Err(err(
                    0,
                    format!("node {i} has {k} children; trees must be binary"),
                ))
            }
        }
        if i != root && n.length.is_none() {
            return Err(err(0, "every non-root node needs a branch length"));
        }
        if n.length.is_some_and(|l| l < 0.0 || !l.is_finite()) {
            return Err(err(0, "negative or non-finite branch length"));
        }
    }
    let leaf_raw: Vec<usize> = (0..raw.len())
        .filter(|&i| raw[i].children.is_empty())
        .collect();
    let names: Vec<String> = leaf_raw
        .iter()
        .map(|&i| raw[i].name.clone().ok_or_else(|| err(0, "unnamed leaf")))
        .collect::<Result<_>>()?;
    let taxa: Arc<[String]> = match taxa {
        Some(t) => {
            if t.len() != names.len() {
                return Err(err(
                    0,
                    format!("tree has {} leaves, expected {}", names.len(), t.len()),
                ));
            }
            t.to_vec().into()
        }
        None => names.clone().into(),
    };
    let l = taxa.len();
    let mut index = vec![usize::MAX; raw.len()];
    for (&ri, name) in leaf_raw.iter().zip(&names) {
        let k = taxa
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| err(0, format!("unknown taxon {name}")))?;
        if index.contains(&k) {
            return Err(err(0, format!("taxon {name} appears twice")));
        }
        index[ri] = k;
    }
    let mut next = l;
    for (i, n) in raw.iter().enumerate() {
        if !n.children.is_empty() {
            index[i] = next;
            next += 1;
        }
    }
    // Depth from the root; the parser pushed children before parents, so a
    // reverse scan visits parents first.
    let mut depth = vec![0.0; raw.len()];
    for i in (0..raw.len()).rev() {
        for &c in &raw[i].children {
            depth[c] = depth[i] + raw[c].length.unwrap();
        }
    }
    let height = leaf_raw
        .iter()
        .map(|&i| depth[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut nodes = vec![
        Node {
            age: 0.0,
            parent: None,
            children: None,
            catastrophes: Vec::new(),
        };
        raw.len()
    ];
    for (i, n) in raw.iter().enumerate() {
        let v = index[i];
        nodes[v].age = (height - depth[i]).max(0.0);
        nodes[v].catastrophes = (0..n.cats)
            .map(|k| (k as f64 + 1.0) / (n.cats as f64 + 1.0))
            .collect();
        if let [a, b] = n.children[..] {
            nodes[v].children = Some([index[a], index[b]]);
            nodes[index[a]].parent = Some(v);
            nodes[index[b]].parent = Some(v);
        }
    }
    if raw[root].cats > 0 {
        nodes[index[root]].catastrophes.clear();
    }
    Tree::from_parts(taxa, nodes, index[root])
}

/// Newick text for a tree; with `catastrophes` set, nodes carry their
/// catastrophe counts as `[&cat=k]` annotations (zero counts are omitted).
pub fn write_newick(tree: &Tree, catastrophes: bool) -> String {
    write_newick_labeled(tree, catastrophes, |_| None)
}

/// As [`write_newick`], with an optional label for internal nodes.
pub fn write_newick_labeled(
    tree: &Tree,
    catastrophes: bool,
    internal_label: impl Fn(usize) -> Option<String>,
) -> String {
    fn rec(
        t: &Tree,
        v: usize,
        cats: bool,
        label: &dyn Fn(usize) -> Option<String>,
        out: &mut String,
    ) {
        match t.children(v) {
            None => out.push_str(&t.taxa()[v]),
            Some([a, b]) => {
                out.push('(');
                rec(t, a, cats, label, out);
                out.push(',');
                rec(t, b, cats, label, out);
                out.push(')');
                if let Some(l) = label(v) {
                    out.push_str(&l);
                }
            }
        }
        let k = t.catastrophe_count(v);
        if cats && k > 0 {
            let _ = write!(out, "[&cat={k}]");
        }
        if v != t.root() {
            let _ = write!(out, ":{}", t.branch_length(v));
        }
    }
    let mut s = String::new();
    rec(tree, tree.root(), catastrophes, &internal_label, &mut s);
    s.push(';');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn three_leaf_tree() {
        let t = parse_newick("((A:1,B:1):1,C:2);", None).unwrap();
        assert_eq!(t.n_leaves(), 3);
        assert_eq!(t.age(t.root()), 2.0);
        assert_eq!(t.taxa().as_ref(), ["A", "B", "C"]);
        assert_eq!(t.age(t.mrca(&[0, 1]).unwrap()), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_newick("(A:1,B:1,C:1);", None).is_err());
        assert!(parse_newick("((A:1,B:1):1,C:2;", None).is_err());
        assert!(parse_newick("((A:1,B:1):1,C:2));", None).is_err());
        assert!(parse_newick("((A:1):1,C:2);", None).is_err());
    }

    #[test]
    fn offset_leaves_and_taxon_order() {
        let taxa: Vec<String> = ["C", "B", "A"].iter().map(|s| s.to_string()).collect();
        let t = parse_newick("((A:1,B:3):2,C:5);", Some(&taxa)).unwrap();
        assert_eq!(t.age(2), 2.0); // A is sampled two years before B
        assert_eq!(t.age(1), 0.0);
        assert_eq!(t.age(t.root()), 5.0);
    }

    #[test]
    fn catastrophe_annotations() {
        let t = parse_newick("((A[&cat=2]:1,B:1)[&cat=1]:1,C:2);", None).unwrap();
        assert_eq!(t.catastrophe_count(0), 2);
        assert_eq!(t.catastrophe_count(t.mrca(&[0, 1]).unwrap()), 1);
        assert_eq!(t.total_catastrophes(), 3);
        let again = parse_newick(&write_newick(&t, true), None).unwrap();
        assert!(again.same_state(&t));
        let plain = parse_newick(&write_newick(&t, false), None).unwrap();
        assert_eq!(plain.total_catastrophes(), 0);
    }

    #[test]
    fn round_trip_random_trees() {
        let mut r = rng::from_seed(7);
        for _ in 0..100 {
            let t = crate::tree::Tree::random_exponential(
                crate::tree::testing::taxa(10),
                0.01,
                None,
                &mut r,
            )
            .unwrap();
            let back = parse_newick(&write_newick(&t, true), Some(t.taxa())).unwrap();
            assert_eq!(back.topology_key(), t.topology_key());
            let (sa, sb) = (t.leaf_sets(), back.leaf_sets());
            for v in t.internal_nodes() {
                let w = (0..back.n_nodes()).find(|&w| sb[w] == sa[v]).unwrap();
                let (x, y) = (t.age(v), back.age(w));
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }
}
