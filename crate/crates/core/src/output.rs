//! Run output files.
//!
//! For an output stem `s` (with any replicate suffix already appended):
//!
//! * `s.nex`: a Nexus `TREES` block, one `TREE STATE_<iter> = ...;` line
//!   per saved sample, leaves labelled by taxon name.
//! * `scat.nex`: the same trees with per-branch catastrophe counts as
//!   `[&cat=k]` annotations after each node label.
//! * `s.txt`: a header row and one whitespace-separated row per sample:
//!   `Sample RootAge Mu Kappa Lambda Rho LogPrior LogLikelihood
//!   PoissonLogLikelihood`.
//! * `sXI.txt`: `Sample` followed by one recording probability per taxon,
//!   written only when missing data is modelled.
//! * `s.par`: the effective configuration.
//! * `s.tau`: for coupled runs, the meeting time divided by the sample
//!   interval, or `NaN` when the chains did not meet.
//!
//! Coupled runs use the stems `s_x` and `s_y` for the two chains. Trace
//! values are written with 12 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{write_par, RunConfig};
use crate::mcmc::{Chain, SampleSink, TraceRecord};
use crate::newick::{parse_newick, write_newick};
use crate::tree::Tree;
use crate::{Error, Result};

pub const TRACE_COLUMNS: [&str; 9] = [
    "Sample",
    "RootAge",
    "Mu",
    "Kappa",
    "Lambda",
    "Rho",
    "LogPrior",
    "LogLikelihood",
    "PoissonLogLikelihood",
];

/// `x` with 12 significant digits, in the style of C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `stem` with `extra` appended to its file name.
pub fn with_suffix(stem: &Path, extra: &str) -> PathBuf {
    let mut name = stem
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(extra);
    stem.with_file_name(name)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

pub fn write_par_file(stem: &Path, config: &RunConfig) -> Result<()> {
    write_text(&with_suffix(stem, ".par"), &write_par(config))
}

/// Writes `.tau`: the meeting time in units of the sample interval.
pub fn write_tau(stem: &Path, tau: Option<usize>, sample_interval: usize) -> Result<()> {
    let text = match tau {
        Some(t) => format!("{}\n", t / sample_interval),
        None => "NaN\n".into(),
    };
    write_text(&with_suffix(stem, ".tau"), &text)
}

/// Reads a `.tau` file as an iteration count.
pub fn read_tau(path: &Path, sample_interval: usize) -> Result<Option<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let t = text.trim();
    if t.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    t.parse::<usize>()
        .map(|v| Some(v * sample_interval))
        .map_err(|_| Error::Data(format!("{}: bad meeting time {t:?}", path.display())))
}

struct Stream {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Stream {
    fn open(path: PathBuf) -> Result<Self> {
        let out = create(&path)?;
        Ok(Stream { path, out })
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Streams saved samples to the tree, catastrophe, trace and ξ files.
pub struct FileSink {
    trees: Stream,
    cats: Stream,
    trace: Stream,
    xi: Option<Stream>,
    finished: bool,
}

impl FileSink {
    /// Create the files for `stem`. `taxa` labels the ξ columns, which are
    /// written only when `write_xi` is set.
    pub fn create(stem: &Path, taxa: &[String], write_xi: bool) -> Result<Self> {
        let mut trees = Stream::open(with_suffix(stem, ".nex"))?;
        let mut cats = Stream::open(with_suffix(stem, "cat.nex"))?;
        let mut trace = Stream::open(with_suffix(stem, ".txt"))?;
        for s in [&mut trees, &mut cats] {
            s.line("#NEXUS")?;
            s.line("BEGIN TREES;")?;
        }
        trace.line(&TRACE_COLUMNS.join(" "))?;
        let xi = if write_xi {
            let mut x = Stream::open(with_suffix(stem, "XI.txt"))?;
            x.line(&format!("Sample {}", taxa.join(" ")))?;
            Some(x)
        } else {
            None
        };
        Ok(FileSink {
            trees,
            cats,
            trace,
            xi,
            finished: false,
        })
    }

    /// Close the tree blocks and flush everything.
    pub fn finish(&mut self) -> Result<()> {
        if !self.finished {
            self.trees.line("END;")?;
            self.cats.line("END;")?;
            self.finished = true;
        }
        self.trees.flush()?;
        self.cats.flush()?;
        self.trace.flush()?;
        if let Some(x) = &mut self.xi {
            x.flush()?;
        }
        Ok(())
    }
}

impl Drop for FileSink {
    fn drop(&mut self) {
        let _ = self.finish();
    }
}

/// One trace row.
pub fn trace_line(r: &TraceRecord) -> String {
    let vals = [
        r.root_age,
        r.mu,
        r.kappa,
        r.lambda,
        r.rho,
        r.log_prior,
        r.log_likelihood,
        r.poisson_log_likelihood,
    ];
    let mut s = r.sample.to_string();
    for v in vals {
        s.push(' ');
        s.push_str(&fmt_sig(v));
    }
    s
}

impl SampleSink for FileSink {
    fn record(&mut self, chain: &Chain, r: &TraceRecord) -> Result<()> {
        let tree = &chain.state.tree;
        self.trees.line(&format!(
            "TREE STATE_{} = {}",
            r.sample,
            write_newick(tree, false)
        ))?;
        self.cats.line(&format!(
            "TREE STATE_{} = {}",
            r.sample,
            write_newick(tree, true)
        ))?;
        self.trace.line(&trace_line(r))?;
        if let Some(x) = &mut self.xi {
            let vals: Vec<String> = r.xi.iter().map(|&v| fmt_sig(v)).collect();
            x.line(&format!("{} {}", r.sample, vals.join(" ")))?;
        }
        Ok(())
    }
}

/// `(label, newick)` for each `TREE label = newick;` line of a tree file.
pub fn read_tree_lines(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| {
            let l = l.trim();
            let rest = l
                .get(..5)
                .filter(|h| h.eq_ignore_ascii_case("tree "))
                .map(|_| &l[5..])?;
            let (label, newick) = rest.split_once('=')?;
            Some((label.trim().to_string(), newick.trim().to_string()))
        })
        .collect()
}

/// All trees of a tree file, with leaves ordered as `taxa`.
pub fn read_trees(path: &Path, taxa: &[String]) -> Result<Vec<Tree>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_tree_lines(&text)
        .iter()
        .map(|(_, nw)| parse_newick(nw, Some(taxa)))
        .collect()
}

/// Rows of a trace or ξ file, keyed by the leading sample number.
pub fn read_table(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let mut it = line.split_whitespace();
        let Some(first) = it.next() else { continue };
        let sample = first
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad row {line:?}", path.display())))?;
        let vals: Result<Vec<f64>> = it
            .map(|v| {
                parse_value(v)
                    .ok_or_else(|| Error::Data(format!("{}: bad value {v:?}", path.display())))
            })
            .collect();
        rows.push((sample, vals?));
    }
    Ok(rows)
}

fn parse_value(v: &str) -> Option<f64> {
    match v {
        "NaN" => Some(f64::NAN),
        "Inf" => Some(f64::INFINITY),
        "-Inf" => Some(f64::NEG_INFINITY),
        _ => v.parse().ok(),
    }
}

/// A state read back from a run's output files.
#[derive(Clone, Debug)]
pub struct SavedSample {
    pub sample: usize,
    pub tree: Tree,
    pub mu: Option<f64>,
    pub kappa: Option<f64>,
    pub xi: Option<Vec<f64>>,
    pub log_prior: Option<f64>,
    pub log_likelihood: Option<f64>,
}

/// Sample `index` (1-based) of the run whose tree file is `tree_file`
/// (`<stem>.nex`). Catastrophe counts come from `<stem>cat.nex` and the
/// scalar parameters from `<stem>.txt` and `<stem>XI.txt` when present.
pub fn read_saved_sample(tree_file: &Path, index: usize, taxa: &[String]) -> Result<SavedSample> {
    let name = tree_file.to_string_lossy();
    let stem = PathBuf::from(name.strip_suffix(".nex").unwrap_or(&name));
    let cat_file = with_suffix(&stem, "cat.nex");
    let source = if cat_file.exists() {
        cat_file
    } else {
        tree_file.to_path_buf()
    };
    let text = std::fs::read_to_string(&source).map_err(|e| Error::io(&source, e))?;
    let lines = read_tree_lines(&text);
    if index == 0 || index > lines.len() {
        return Err(Error::InvalidArgument(format!(
            "{} holds {} trees; index {index} requested",
            source.display(),
            lines.len()
        )));
    }
    let (label, newick) = &lines[index - 1];
    let tree = parse_newick(newick, Some(taxa))?;
    let sample = label
        .rsplit('_')
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(index - 1);
    let mut out = SavedSample {
        sample,
        tree,
        mu: None,
        kappa: None,
        xi: None,
        log_prior: None,
        log_likelihood: None,
    };
    let trace = with_suffix(&stem, ".txt");
    if trace.exists() {
        if let Some((_, row)) = read_table(&trace)?.into_iter().find(|(s, _)| *s == sample) {
            out.mu = Some(row[1]);
            out.kappa = Some(row[2]);
            out.log_prior = Some(row[5]);
            out.log_likelihood = Some(row[6]);
        }
    }
    let xi = with_suffix(&stem, "XI.txt");
    if xi.exists() {
        out.xi = read_table(&xi)?
            .into_iter()
            .find(|(s, _)| *s == sample)
            .map(|(_, r)| r);
    }
    Ok(out)
}
