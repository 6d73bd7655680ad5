//! Nexus data files: the `Data` block matrix, the `Clades` block of clade
//! constraints, and the `Trees`/`Synthesize` blocks written for synthetic
//! data.
//!
//! Block names and keywords are matched case-insensitively; taxon labels are
//! kept exactly as written. Gaps are read as missing. Comments (`[...]`) may
//! appear anywhere except inside a matrix row.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cell {
    Absent,
    Present,
    Missing,
}

impl Cell {
    pub fn symbol(self) -> char {
        match self {
            Cell::Absent => '0',
            Cell::Present => '1',
            Cell::Missing => '?',
        }
    }
}

/// An `L x N` presence/absence/missing matrix with taxon names.
#[derive(Clone, Debug, PartialEq)]
pub struct TraitMatrix {
    pub taxa: Vec<String>,
    pub trait_labels: Option<Vec<String>>,
    cells: Vec<Cell>,
    n_traits: usize,
}

impl TraitMatrix {
    pub fn new(
        taxa: Vec<String>,
        rows: Vec<Vec<Cell>>,
        trait_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if taxa.len() != rows.len() {
            return Err(Error::Data(format!(
                "{} taxa but {} rows",
                taxa.len(),
                rows.len()
            )));
        }
        let n_traits = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_traits) {
            return Err(Error::Data("matrix rows have different lengths".into()));
        }
        let mut seen = HashSet::new();
        for t in &taxa {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Data(format!("invalid taxon name {t:?}")));
            }
            if !seen.insert(t.as_str()) {
                return Err(Error::Data(format!("duplicate taxon name {t}")));
            }
        }
        if let Some(labels) = &trait_labels {
            if labels.len() != n_traits {
                return Err(Error::Data(format!(
                    "{} trait labels for {n_traits} traits",
                    labels.len()
                )));
            }
        }
        Ok(TraitMatrix {
            taxa,
            trait_labels,
            cells: rows.into_iter().flatten().collect(),
            n_traits,
        })
    }

    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    pub fn n_traits(&self) -> usize {
        self.n_traits
    }

    pub fn get(&self, taxon: usize, trait_: usize) -> Cell {
        self.cells[taxon * self.n_traits + trait_]
    }

    pub fn row(&self, taxon: usize) -> &[Cell] {
        &self.cells[taxon * self.n_traits..(taxon + 1) * self.n_traits]
    }

    pub fn column(&self, trait_: usize) -> Vec<Cell> {
        (0..self.n_taxa()).map(|i| self.get(i, trait_)).collect()
    }

    pub fn taxon_index(&self, name: &str) -> Option<usize> {
        self.taxa.iter().position(|t| t == name)
    }

    /// Build a matrix from columns (one `Vec<Cell>` per trait).
    pub fn from_columns(taxa: Vec<String>, columns: &[Vec<Cell>]) -> Result<Self> {
        let rows = (0..taxa.len())
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        TraitMatrix::new(taxa, rows, None)
    }

    /// Keep only the listed taxa and traits, in the given order.
    pub fn select(&self, taxa: &[usize], traits: &[usize]) -> TraitMatrix {
        let rows = taxa
            .iter()
            .map(|&i| traits.iter().map(|&j| self.get(i, j)).collect())
            .collect();
        let labels = self
            .trait_labels
            .as_ref()
            .map(|l| traits.iter().map(|&j| l[j].clone()).collect());
        TraitMatrix::new(
            taxa.iter().map(|&i| self.taxa[i].clone()).collect(),
            rows,
            labels,
        )
        .expect("selection of a valid matrix")
    }
}

/// A clade constraint from the `Clades` block. Ages in years.
#[derive(Clone, Debug, PartialEq)]
pub struct CladeConstraint {
    pub name: String,
    pub taxa: Vec<String>,
    pub rootmin: Option<f64>,
    pub rootmax: Option<f64>,
    pub originatemin: Option<f64>,
    pub originatemax: Option<f64>,
}

impl CladeConstraint {
    pub fn new(name: impl Into<String>, taxa: Vec<String>) -> Self {
        CladeConstraint {
            name: name.into(),
            taxa,
            rootmin: None,
            rootmax: None,
            originatemin: None,
            originatemax: None,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.taxa.is_empty() {
            return Err(format!("clade {} has no taxa", self.name));
        }
        for (lo, hi, what) in [
            (self.rootmin, self.rootmax, "root"),
            (self.originatemin, self.originatemax, "originate"),
        ] {
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if lo > hi {
                    return Err(format!(
                        "clade {}: {what} min {lo} exceeds max {hi}",
                        self.name
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedNexus {
    pub matrix: TraitMatrix,
    pub clades: Vec<CladeConstraint>,
    /// Newick text of the first tree in a `Trees` block.
    pub embedded_tree: Option<String>,
    /// Key-value pairs from a `Synthesize` block.
    pub synthesize_params: Option<BTreeMap<String, String>>,
}

impl ParsedNexus {
    /// Files carrying a trees or synthesize block are treated as synthetic.
    pub fn is_synthetic(&self) -> bool {
        self.embedded_tree.is_some() || self.synthesize_params.is_some()
    }
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Nexus {
        line,
        msg: msg.into(),
    }
}

/// A block's body as `(line number, command text)` pairs, split on `;`
/// outside comments. Comments are removed except inside the matrix, which
/// is handled line by line.
struct Block {
    name: String,
    start_line: usize,
    body: String,
}

fn split_blocks(text: &str) -> Result<Vec<Block>> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .by_ref()
        .map(|(i, l)| (i, l.trim()))
        .find(|(_, l)| !l.is_empty());
    match header {
        Some((_, h)) if h.eq_ignore_ascii_case("#nexus") => {}
        Some((i, _)) => return Err(err(i + 1, "file must start with #NEXUS")),
        None => return Err(err(1, "empty file")),
    }
    let mut blocks = Vec::new();
    let mut current: Option<Block> = None;
    for (i, line) in lines {
        let trimmed = line.trim();
        let upper = trimmed.to_ascii_uppercase();
        if current.is_none() {
            if upper.starts_with("BEGIN") {
                let name = trimmed[5..]
                    .trim()
                    .trim_end_matches(';')
                    .trim()
                    .to_ascii_lowercase();
                current = Some(Block {
                    name,
                    start_line: i + 1,
                    body: String::new(),
                });
            }
            continue;
        }
        if upper == "END;" || upper == "ENDBLOCK;" || upper == "END" {
            blocks.push(current.take().unwrap());
            continue;
        }
        let b = current.as_mut().unwrap();
        b.body.push_str(line);
        b.body.push('\n');
    }
    if let Some(b) = current {
        return Err(err(b.start_line, format!("block {} has no END", b.name)));
    }
    Ok(blocks)
}

/// Remove `[...]` comments (not nested) from a piece of text.
fn strip_comments(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut depth = 0usize;
    for c in s.chars() {
        match c {
            '[' => depth += 1,
            ']' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(c),
            '\n' => out.push('\n'),
            _ => {}
        }
    }
    out
}

/// Split block text into `;`-terminated commands with their starting line.
fn commands(body: &str, start_line: usize) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut line = start_line + 1;
    let mut cmd_line = line;
    let mut depth = 0usize;
    for c in body.chars() {
        if c == '\n' {
            line += 1;
        }
        match c {
            '[' => depth += 1,
            ']' if depth > 0 => depth -= 1,
            _ => {}
        }
        if c == ';' && depth == 0 {
            out.push((cmd_line, std::mem::take(&mut cur)));
            cmd_line = line;
            continue;
        }
        if cur.trim().is_empty() && !c.is_whitespace() {
            cmd_line = line;
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push((cmd_line, cur));
    }
    out
}

fn first_word(cmd: &str) -> (String, &str) {
    let t = cmd.trim_start();
    let end = t.find(|c: char| c.is_whitespace()).unwrap_or(t.len());
    (t[..end].to_ascii_uppercase(), &t[end..])
}

/// `KEY=VALUE` pairs, tolerant of spaces around `=`.
fn key_values(s: &str) -> Vec<(String, String)> {
    let s = strip_comments(s).replace('=', " = ");
    let toks: Vec<&str> = s.split_whitespace().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if i + 2 < toks.len() && toks[i + 1] == "=" {
            out.push((toks[i].to_ascii_uppercase(), toks[i + 2].to_string()));
            i += 3;
        } else {
            out.push((toks[i].to_ascii_uppercase(), String::new()));
            i += 1;
        }
    }
    out
}

pub fn parse_nexus(text: &str) -> Result<ParsedNexus> {
    let blocks = split_blocks(text)?;
    let mut matrix = None;
    let mut clades = Vec::new();
    let mut embedded_tree = None;
    let mut synthesize = None;
    for b in &blocks {
        match b.name.as_str() {
            "data" => {
                if matrix.is_some() {
                    return Err(err(b.start_line, "more than one data block"));
                }
                matrix = Some(parse_data_block(b)?);
            }
            "clades" => clades = parse_clades_block(b)?,
            "trees" => {
                for (line, cmd) in commands(&b.body, b.start_line) {
                    let (kw, rest) = first_word(&cmd);
                    if kw == "TREE" && embedded_tree.is_none() {
                        let eq = rest
                            .find('=')
                            .ok_or_else(|| err(line, "TREE command without '='"))?;
                        let mut nwk = rest[eq + 1..].trim().to_string();
                        // Drop a leading rooting comment such as [&R].
                        while nwk.starts_with('[') && !nwk.starts_with("[&cat") {
                            match nwk.find(']') {
                                Some(e) => nwk = nwk[e + 1..].trim_start().to_string(),
                                None => break,
                            }
                        }
                        embedded_tree = Some(format!("{nwk};"));
                    }
                }
            }
            "synthesize" => {
                let mut map = BTreeMap::new();
                for (_, cmd) in commands(&b.body, b.start_line) {
                    let cmd = strip_comments(&cmd);
                    if let Some((k, v)) = cmd.split_once('=') {
                        map.insert(k.trim().to_string(), v.trim().to_string());
                    }
                }
                synthesize = Some(map);
            }
            _ => {}
        }
    }
    let matrix = matrix.ok_or_else(|| err(1, "no data block"))?;
    for c in &clades {
        for t in &c.taxa {
            if matrix.taxon_index(t).is_none() {
                return Err(err(
                    0,
                    format!("clade {} refers to unknown taxon {t}", c.name),
                ));
            }
        }
    }
    Ok(ParsedNexus {
        matrix,
        clades,
        embedded_tree,
        synthesize_params: synthesize,
    })
}

fn parse_data_block(b: &Block) -> Result<TraitMatrix> {
    let mut ntax = None;
    let mut nchar = None;
    let mut missing = '?';
    let mut gap = '-';
    let mut labels = None;
    let mut matrix_rows: Option<Vec<(String, Vec<Cell>)>> = None;
    for (idx, (line, cmd)) in commands(&b.body, b.start_line).into_iter().enumerate() {
        let (kw, rest) = first_word(&cmd);
        match kw.as_str() {
            "DIMENSIONS" => {
                for (k, v) in key_values(rest) {
                    let parse = |v: &str| {
                        v.parse::<usize>()
                            .map_err(|_| err(line, format!("bad {k} value {v:?}")))
                    };
                    match k.as_str() {
                        "NTAX" => ntax = Some(parse(&v)?),
                        "NCHAR" => nchar = Some(parse(&v)?),
                        _ => {}
                    }
                }
            }
            "FORMAT" => {
                for (k, v) in key_values(rest) {
                    match k.as_str() {
                        "MISSING" => missing = single_char(&v, line)?,
                        "GAP" => gap = single_char(&v, line)?,
                        _ => {}
                    }
                }
            }
            "CHARLABELS" => {
                labels = Some(
                    strip_comments(rest)
                        .split_whitespace()
                        .map(str::to_string)
                        .collect::<Vec<_>>(),
                );
            }
            "MATRIX" => {
                if ntax.is_none() || nchar.is_none() {
                    return Err(err(line, "MATRIX before DIMENSIONS"));
                }
                matrix_rows = Some(parse_matrix(rest, line, missing, gap)?);
            }
            "" => {}
            _ => {
                if idx == 0 {
                    return Err(err(line, "the data block must start with DIMENSIONS"));
                }
            }
        }
    }
    let ntax = ntax.ok_or_else(|| err(b.start_line, "missing DIMENSIONS NTAX"))?;
    let nchar = nchar.ok_or_else(|| err(b.start_line, "missing DIMENSIONS NCHAR"))?;
    let rows = matrix_rows.ok_or_else(|| err(b.start_line, "missing MATRIX"))?;
    if rows.len() != ntax {
        return Err(err(
            b.start_line,
            format!("NTAX={ntax} but the matrix has {} taxa", rows.len()),
        ));
    }
    for (name, cells) in &rows {
        if cells.len() != nchar {
            return Err(err(
                b.start_line,
                format!(
                    "NCHAR={nchar} but taxon {name} has {} characters",
                    cells.len()
                ),
            ));
        }
    }
    if let Some(l) = &labels {
        if l.len() != nchar {
            return Err(err(
                b.start_line,
                format!("CHARLABELS lists {} labels for NCHAR={nchar}", l.len()),
            ));
        }
    }
    let (taxa, cells): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    TraitMatrix::new(taxa, cells, labels).map_err(|e| err(b.start_line, e.to_string()))
}

fn single_char(v: &str, line: usize) -> Result<char> {
    let mut it = v.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(err(line, format!("expected a single symbol, got {v:?}"))),
    }
}

/// Matrix rows in standard or interleaved layout. Rows with the same label
/// are concatenated in order of appearance.
fn parse_matrix(
    body: &str,
    start_line: usize,
    missing: char,
    gap: char,
) -> Result<Vec<(String, Vec<Cell>)>> {
    let mut rows: Vec<(String, Vec<Cell>)> = Vec::new();
    let mut in_comment = false;
    for (k, raw) in body.lines().enumerate() {
        let line_no = start_line + k;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        // Whole-line comments between interleaved sections are allowed.
        if in_comment || line.starts_with('[') {
            let closes = line.rfind(']');
            let opens = line.rfind('[');
            in_comment = match (opens, closes) {
                (Some(o), Some(c)) => o > c,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => in_comment,
            };
            if !in_comment && closes.is_some_and(|c| c + 1 < line.len()) {
                return Err(err(line_no, "comment at the start of a matrix row"));
            }
            continue;
        }
        if line.contains('[') || line.contains(']') {
            return Err(err(line_no, "comment inside a matrix row"));
        }
        let mut parts = line.splitn(2, char::is_whitespace);
        let name = parts.next().unwrap().to_string();
        let data: String = parts.next().unwrap_or("").split_whitespace().collect();
        let mut cells = Vec::with_capacity(data.len());
        for c in data.chars() {
            cells.push(match c {
                '0' => Cell::Absent,
                '1' => Cell::Present,
                c if c == missing || c == gap || c == '?' || c == '-' => Cell::Missing,
                c => {
                    return Err(err(
                        line_no,
                        format!("illegal matrix symbol {c:?} for taxon {name}"),
                    ))
                }
            });
        }
        match rows.iter_mut().find(|(n, _)| *n == name) {
            Some((_, r)) => r.extend(cells),
            None => rows.push((name, cells)),
        }
    }
    Ok(rows)
}

const CLADE_KEYS: [&str; 6] = [
    "NAME",
    "TAXA",
    "ROOTMIN",
    "ROOTMAX",
    "ORIGINATEMIN",
    "ORIGINATEMAX",
];

fn parse_clades_block(b: &Block) -> Result<Vec<CladeConstraint>> {
    let mut out: Vec<CladeConstraint> = Vec::new();
    for (line, cmd) in commands(&b.body, b.start_line) {
        let cmd = strip_comments(&cmd).replace('=', " = ").replace(',', " ");
        let toks: Vec<&str> = cmd.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if !toks[0].eq_ignore_ascii_case("CLADE") {
            continue;
        }
        let mut clade = CladeConstraint::new(String::new(), Vec::new());
        let mut i = 1;
        let is_key = |i: usize| {
            i + 1 < toks.len()
                && toks[i + 1] == "="
                && CLADE_KEYS.iter().any(|k| toks[i].eq_ignore_ascii_case(k))
        };
        while i < toks.len() {
            if !is_key(i) {
                return Err(err(
                    line,
                    format!("unexpected token {:?} in clade", toks[i]),
                ));
            }
            let key = toks[i].to_ascii_uppercase();
            i += 2;
            let mut vals = Vec::new();
            while i < toks.len() && !is_key(i) {
                vals.push(toks[i]);
                i += 1;
            }
            let num = |vals: &[&str]| -> Result<f64> {
                match vals {
                    [v] => v
                        .parse::<f64>()
                        .map_err(|_| err(line, format!("bad {key} value {v:?}"))),
                    _ => Err(err(line, format!("{key} takes one value"))),
                }
            };
            match key.as_str() {
                "NAME" => clade.name = vals.join(" "),
                "TAXA" => clade.taxa = vals.iter().map(|s| s.to_string()).collect(),
                "ROOTMIN" => clade.rootmin = Some(num(&vals)?),
                "ROOTMAX" => clade.rootmax = Some(num(&vals)?),
                "ORIGINATEMIN" => clade.originatemin = Some(num(&vals)?),
                "ORIGINATEMAX" => clade.originatemax = Some(num(&vals)?),
                _ => unreachable!(),
            }
        }
        if clade.name.is_empty() {
            clade.name = format!("clade_{}", out.len() + 1);
        }
        clade.check().map_err(|m| err(line, m))?;
        out.push(clade);
    }
    Ok(out)
}

fn fmt_bound(x: f64) -> String {
    format!("{x}")
}

/// Nexus text with a data block, a clades block when there are clades, and
/// optional trees and synthesize blocks.
pub fn write_nexus(
    matrix: &TraitMatrix,
    clades: &[CladeConstraint],
    tree_newick: Option<&str>,
    synthesize: Option<&BTreeMap<String, String>>,
) -> String {
    let mut s = String::from("#NEXUS\n\nBEGIN DATA;\n\n");
    let _ = writeln!(
        s,
        "DIMENSIONS NTAX={} NCHAR={};",
        matrix.n_taxa(),
        matrix.n_traits()
    );
    s.push_str("FORMAT MISSING=? GAP=-;\n");
    if let Some(labels) = &matrix.trait_labels {
        let _ = writeln!(s, "CHARLABELS {};", labels.join(" "));
    }
    s.push_str("\nMATRIX\n\n");
    let width = matrix.taxa.iter().map(String::len).max().unwrap_or(0) + 2;
    for i in 0..matrix.n_taxa() {
        let row: String = matrix.row(i).iter().map(|c| c.symbol()).collect();
        let _ = writeln!(s, "{:<width$}{row}", matrix.taxa[i]);
    }
    s.push_str(";\nEND;\n");
    if !clades.is_empty() {
        s.push_str("\nBEGIN CLADES;\n");
        for c in clades {
            let _ = write!(s, "\nCLADE NAME = {}\n", c.name);
            for (key, v) in [
                ("ROOTMIN", c.rootmin),
                ("ROOTMAX", c.rootmax),
                ("ORIGINATEMIN", c.originatemin),
                ("ORIGINATEMAX", c.originatemax),
            ] {
                if let Some(v) = v {
                    let _ = writeln!(s, "{key} = {}", fmt_bound(v));
                }
            }
            let _ = writeln!(s, "TAXA = {};", c.taxa.join(", "));
        }
        s.push_str("\nEND;\n");
    }
    if let Some(t) = tree_newick {
        let _ = write!(s, "\nBEGIN TREES;\nTREE SYNTHETIC = {}\nEND;\n", t.trim());
    }
    if let Some(p) = synthesize {
        s.push_str("\nBEGIN SYNTHESIZE;\n");
        for (k, v) in p {
            let _ = writeln!(s, "{k} = {v};");
        }
        s.push_str("END;\n");
    }
    s
}
