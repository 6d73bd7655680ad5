//! Run configuration and its `.par` text form.
//!
//! A `.par` file holds one `Key = value` setting per line. Blank lines and
//! lines starting with `%` or `#` are ignored, keys are matched without
//! regard to case, and unknown keys are reported and skipped. Index lists
//! are 1-based and may use Matlab-style ranges (`1 4:6` is 1, 4, 5, 6).
//!
//! | key | value | default |
//! |---|---|---|
//! | `Data_file` | path to the Nexus data | required |
//! | `Output_file` | output stem | required |
//! | `Omitted_taxa`, `Omitted_traits` | index list | empty |
//! | `Initial_tree` | `random`, `output` or `true` | `random` |
//! | `Initial_theta` | branching rate of a random start | `0.001` |
//! | `Initial_tree_file`, `Initial_tree_index` | saved `.nex` and 1-based sample | |
//! | `Tree_prior` | `uniform` or `exponential` | `uniform` |
//! | `Max_root_age` | T for the uniform prior | `16000` |
//! | `Topology_prior_uniform` | 0/1 | `0` |
//! | `Vary_topology` | 0/1 | `1` |
//! | `Account_rare_traits` | 0/1; 1 discards singleton traits | `0` |
//! | `Model_missing` | 0/1 | `0` |
//! | `Vary_loss_rate`, `Initial_loss_rate` | 0/1, ψ | `1`, `0.2` |
//! | `Include_catastrophes` | 0/1 | `0` |
//! | `Random_initial_cat_death_prob`, `Initial_cat_death_prob` | 0/1, κ | `1`, `0.5` |
//! | `Random_initial_cat_rate`, `Initial_cat_rate` | 0/1, ρ | `1`, `0.0003` |
//! | `Impose_clades` | 0/1 | `0` |
//! | `Ignored_clades`, `Age_ignored_clades` | index list | empty |
//! | `Run_length`, `Sample_interval` | iterations | required |
//! | `Seed_random_numbers`, `Seed` | 0/1, integer | `0` |
//! | `Coupled_markov_chains`, `Coupling_lag` | 0/1, iterations | `0` |
//! | `Coupling_max_iterations` | iteration cap | `100 * Run_length` |
//! | `Move_weights` | one weight per move id | all ones |
//! | `Multiplier_half_width` | δ of multiplier moves | `ln 2` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::mcmc::MOVE_IDS;
use crate::priors::RhoMode;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum InitialTree {
    /// Exponential branching tree with rate θ, adjusted to the constraints.
    Random { theta: f64 },
    /// Sample `index` (1-based) of a saved tree file.
    FromOutput { file: PathBuf, index: usize },
    /// The tree embedded in a synthetic data file.
    True,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TreePriorConfig {
    UniformRoot {
        max_root_age: f64,
        topology_weighted: bool,
    },
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRate {
    pub vary: bool,
    /// Initial (or fixed) ψ.
    pub psi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatastropheConfig {
    /// `None`: κ starts uniform on (0.25, 1) and varies.
    pub kappa: Option<f64>,
    pub rho: RhoMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data_file: PathBuf,
    pub output_file: PathBuf,
    /// 0-based.
    pub omitted_taxa: Vec<usize>,
    /// 0-based.
    pub omitted_traits: Vec<usize>,
    pub initial_tree: InitialTree,
    pub tree_prior: TreePriorConfig,
    pub vary_topology: bool,
    pub account_rare_traits: bool,
    pub model_missing: bool,
    pub loss_rate: LossRate,
    pub catastrophes: Option<CatastropheConfig>,
    pub impose_clades: bool,
    /// 0-based.
    pub ignored_clades: Vec<usize>,
    /// 0-based.
    pub age_ignored_clades: Vec<usize>,
    pub run_length: usize,
    pub sample_interval: usize,
    pub seed: Option<u64>,
    pub coupled: bool,
    pub coupling_lag: usize,
    pub coupling_max_iterations: usize,
    pub move_weights: Option<Vec<f64>>,
    pub multiplier_half_width: f64,
}

impl RunConfig {
    /// A configuration with every optional setting at its default.
    pub fn new(
        data_file: impl Into<PathBuf>,
        output_file: impl Into<PathBuf>,
        run_length: usize,
        sample_interval: usize,
    ) -> Self {
        RunConfig {
            data_file: data_file.into(),
            output_file: output_file.into(),
            omitted_taxa: Vec::new(),
            omitted_traits: Vec::new(),
            initial_tree: InitialTree::Random { theta: 0.001 },
            tree_prior: TreePriorConfig::UniformRoot {
                max_root_age: 16000.0,
                topology_weighted: false,
            },
            vary_topology: true,
            account_rare_traits: false,
            model_missing: false,
            loss_rate: LossRate {
                vary: true,
                psi: 0.2,
            },
            catastrophes: None,
            impose_clades: false,
            ignored_clades: Vec::new(),
            age_ignored_clades: Vec::new(),
            run_length,
            sample_interval,
            seed: None,
            coupled: false,
            coupling_lag: 0,
            coupling_max_iterations: run_length.saturating_mul(100),
            move_weights: None,
            multiplier_half_width: 2f64.ln(),
        }
    }

    /// Registration threshold: 2 when rare traits are accounted for.
    pub fn registration(&self) -> u8 {
        if self.account_rare_traits {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sample_interval == 0 || self.run_length < self.sample_interval {
            return bad(format!(
                "need Run_length ({}) >= Sample_interval ({}) >= 1",
                self.run_length, self.sample_interval
            ));
        }
        if self.coupled
            && (self.coupling_lag == 0 || !self.coupling_lag.is_multiple_of(self.sample_interval))
        {
            return bad(format!(
                "Coupling_lag ({}) must be a positive multiple of Sample_interval ({})",
                self.coupling_lag, self.sample_interval
            ));
        }
        if !(self.loss_rate.psi > 0.0 && self.loss_rate.psi < 1.0) {
            return bad(format!(
                "Initial_loss_rate must lie in (0, 1), got {}",
                self.loss_rate.psi
            ));
        }
        if let TreePriorConfig::UniformRoot { max_root_age, .. } = self.tree_prior {
            if !(max_root_age > 0.0 && max_root_age.is_finite()) {
                return bad(format!("Max_root_age must be positive, got {max_root_age}"));
            }
        }
        if let InitialTree::Random { theta } = self.initial_tree {
            if !(theta > 0.0 && theta.is_finite()) {
                return bad(format!("Initial_theta must be positive, got {theta}"));
            }
        }
        if let InitialTree::FromOutput { index, .. } = self.initial_tree {
            if index == 0 {
                return bad("Initial_tree_index is 1-based".into());
            }
        }
        if let Some(c) = self.catastrophes {
            if let Some(k) = c.kappa {
                if !(k > 0.0 && k <= 1.0) {
                    return bad(format!(
                        "Initial_cat_death_prob must lie in (0, 1], got {k}"
                    ));
                }
            }
            if let RhoMode::Fixed(r) = c.rho {
                if !(r > 0.0 && r.is_finite()) {
                    return bad(format!("Initial_cat_rate must be positive, got {r}"));
                }
            }
        }
        if let Some(w) = &self.move_weights {
            if w.len() != MOVE_IDS.len() {
                return bad(format!(
                    "Move_weights needs {} values, got {}",
                    MOVE_IDS.len(),
                    w.len()
                ));
            }
        }
        if !(self.multiplier_half_width > 0.0 && self.multiplier_half_width.is_finite()) {
            return bad("Multiplier_half_width must be positive".into());
        }
        Ok(())
    }

    /// Resolve relative paths against `base`, normally the directory of
    /// the `.par` file.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_file);
        fix(&mut self.output_file);
        if let InitialTree::FromOutput { file, .. } = &mut self.initial_tree {
            fix(file);
        }
    }
}

/// Parse `.par` text. Unknown keys are logged and ignored.
pub fn parse_par(text: &str) -> Result<RunConfig> {
    let mut kv: BTreeMap<String, (String, String)> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Par(format!(
                "line {}: expected Key = value, got {line:?}",
                n + 1
            )));
        };
        let key = k.trim();
        let value = v.trim().trim_end_matches(';').trim();
        kv.insert(
            key.to_ascii_lowercase(),
            (key.to_string(), value.to_string()),
        );
    }
    let mut p = Fields { kv };
    let data_file = PathBuf::from(p.required("Data_file")?);
    let output_file = PathBuf::from(p.required("Output_file")?);
    let run_length = p
        .parse::<usize>("Run_length")?
        .ok_or_else(|| missing("Run_length"))?;
    let sample_interval = p
        .parse::<usize>("Sample_interval")?
        .ok_or_else(|| missing("Sample_interval"))?;
    let mut c = RunConfig::new(data_file, output_file, run_length, sample_interval);

    if let Some(v) = p.take("Omitted_taxa") {
        c.omitted_taxa = parse_index_list(&v)?;
    }
    if let Some(v) = p.take("Omitted_traits") {
        c.omitted_traits = parse_index_list(&v)?;
    }

    let theta = p.parse::<f64>("Initial_theta")?.unwrap_or(0.001);
    let tree_file = p.take("Initial_tree_file");
    let tree_index = p.parse::<usize>("Initial_tree_index")?;
    let kind = p.take("Initial_tree").unwrap_or_else(|| "random".into());
    c.initial_tree = match kind.to_ascii_lowercase().as_str() {
        "random" => InitialTree::Random { theta },
        "output" => InitialTree::FromOutput {
            file: PathBuf::from(tree_file.ok_or_else(|| missing("Initial_tree_file"))?),
            index: tree_index.unwrap_or(1),
        },
        "true" => InitialTree::True,
        other => {
            return Err(Error::Par(format!(
                "Initial_tree must be random, output or true, got {other:?}"
            )))
        }
    };

    let max_root_age = p.parse::<f64>("Max_root_age")?.unwrap_or(16000.0);
    let topology_weighted = p.flag("Topology_prior_uniform")?.unwrap_or(false);
    let prior = p.take("Tree_prior").unwrap_or_else(|| "uniform".into());
    c.tree_prior = match prior.to_ascii_lowercase().as_str() {
        "uniform" => TreePriorConfig::UniformRoot {
            max_root_age,
            topology_weighted,
        },
        "exponential" => TreePriorConfig::Exponential,
        other => {
            return Err(Error::Par(format!(
                "Tree_prior must be uniform or exponential, got {other:?}"
            )))
        }
    };

    c.vary_topology = p.flag("Vary_topology")?.unwrap_or(true);
    c.account_rare_traits = p.flag("Account_rare_traits")?.unwrap_or(false);
    c.model_missing = p.flag("Model_missing")?.unwrap_or(false);
    c.loss_rate = LossRate {
        vary: p.flag("Vary_loss_rate")?.unwrap_or(true),
        psi: p.parse::<f64>("Initial_loss_rate")?.unwrap_or(0.2),
    };

    let cats = p.flag("Include_catastrophes")?.unwrap_or(false);
    let random_kappa = p.flag("Random_initial_cat_death_prob")?.unwrap_or(true);
    let kappa = p.parse::<f64>("Initial_cat_death_prob")?.unwrap_or(0.5);
    let random_rho = p.flag("Random_initial_cat_rate")?.unwrap_or(true);
    let rho = p.parse::<f64>("Initial_cat_rate")?.unwrap_or(0.0003);
    if cats {
        c.catastrophes = Some(CatastropheConfig {
            kappa: (!random_kappa).then_some(kappa),
            rho: if random_rho {
                RhoMode::Marginal
            } else {
                RhoMode::Fixed(rho)
            },
        });
    }

    c.impose_clades = p.flag("Impose_clades")?.unwrap_or(false);
    if let Some(v) = p.take("Ignored_clades") {
        c.ignored_clades = parse_index_list(&v)?;
    }
    if let Some(v) = p.take("Age_ignored_clades") {
        c.age_ignored_clades = parse_index_list(&v)?;
    }

    let seeded = p.flag("Seed_random_numbers")?.unwrap_or(false);
    let seed = p.parse::<u64>("Seed")?;
    if seeded {
        c.seed = Some(seed.ok_or_else(|| missing("Seed"))?);
    }
    c.coupled = p.flag("Coupled_markov_chains")?.unwrap_or(false);
    c.coupling_lag = p.parse::<usize>("Coupling_lag")?.unwrap_or(0);
    if let Some(m) = p.parse::<usize>("Coupling_max_iterations")? {
        c.coupling_max_iterations = m;
    }
    if let Some(v) = p.take("Move_weights") {
        let w: Result<Vec<f64>> = v
            .split(|ch: char| ch.is_whitespace() || ch == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Par(format!("Move_weights: bad number {s:?}")))
            })
            .collect();
        c.move_weights = Some(w?);
    }
    if let Some(d) = p.parse::<f64>("Multiplier_half_width")? {
        c.multiplier_half_width = d;
    }

    for (key, _) in p.kv.values() {
        log::warn!("unknown parameter file key {key:?} ignored");
    }
    c.validate()?;
    Ok(c)
}

/// `.par` text for a configuration. `parse_par(&write_par(c)) == c`.
pub fn write_par(c: &RunConfig) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    put("Data_file", c.data_file.display().to_string());
    put("Output_file", c.output_file.display().to_string());
    put("Omitted_taxa", format_index_list(&c.omitted_taxa));
    put("Omitted_traits", format_index_list(&c.omitted_traits));
    match &c.initial_tree {
        InitialTree::Random { theta } => {
            put("Initial_tree", "random".into());
            put("Initial_theta", theta.to_string());
        }
        InitialTree::FromOutput { file, index } => {
            put("Initial_tree", "output".into());
            put("Initial_tree_file", file.display().to_string());
            put("Initial_tree_index", index.to_string());
        }
        InitialTree::True => put("Initial_tree", "true".into()),
    }
    match c.tree_prior {
        TreePriorConfig::UniformRoot {
            max_root_age,
            topology_weighted,
        } => {
            put("Tree_prior", "uniform".into());
            put("Max_root_age", max_root_age.to_string());
            put("Topology_prior_uniform", flag(topology_weighted));
        }
        TreePriorConfig::Exponential => put("Tree_prior", "exponential".into()),
    }
    put("Vary_topology", flag(c.vary_topology));
    put("Account_rare_traits", flag(c.account_rare_traits));
    put("Model_missing", flag(c.model_missing));
    put("Vary_loss_rate", flag(c.loss_rate.vary));
    put("Initial_loss_rate", c.loss_rate.psi.to_string());
    put("Include_catastrophes", flag(c.catastrophes.is_some()));
    if let Some(cat) = c.catastrophes {
        put("Random_initial_cat_death_prob", flag(cat.kappa.is_none()));
        if let Some(k) = cat.kappa {
            put("Initial_cat_death_prob", k.to_string());
        }
        match cat.rho {
            RhoMode::Marginal => put("Random_initial_cat_rate", "1".into()),
            RhoMode::Fixed(r) => {
                put("Random_initial_cat_rate", "0".into());
                put("Initial_cat_rate", r.to_string());
            }
        }
    }
    put("Impose_clades", flag(c.impose_clades));
    put("Ignored_clades", format_index_list(&c.ignored_clades));
    put(
        "Age_ignored_clades",
        format_index_list(&c.age_ignored_clades),
    );
    put("Run_length", c.run_length.to_string());
    put("Sample_interval", c.sample_interval.to_string());
    put("Seed_random_numbers", flag(c.seed.is_some()));
    if let Some(seed) = c.seed {
        put("Seed", seed.to_string());
    }
    put("Coupled_markov_chains", flag(c.coupled));
    put("Coupling_lag", c.coupling_lag.to_string());
    put(
        "Coupling_max_iterations",
        c.coupling_max_iterations.to_string(),
    );
    if let Some(w) = &c.move_weights {
        put(
            "Move_weights",
            w.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(" "),
        );
    }
    put("Multiplier_half_width", c.multiplier_half_width.to_string());
    s
}

/// Parse a 1-based index list such as `1 4:6, 9` into sorted, distinct
/// 0-based indices.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    let bad = |t: &str| Error::Par(format!("bad index list entry {t:?}"));
    let mut out = Vec::new();
    let body = text.trim().trim_start_matches('[').trim_end_matches(']');
    for tok in body
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
    {
        let (a, b) = match tok.split_once(':') {
            Some((a, b)) => (a, b),
            None => (tok, tok),
        };
        let a: usize = a.parse().map_err(|_| bad(tok))?;
        let b: usize = b.parse().map_err(|_| bad(tok))?;
        if a == 0 || b < a {
            return Err(bad(tok));
        }
        out.extend(a - 1..b);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Inverse of [`parse_index_list`], using ranges for runs.
pub fn format_index_list(idx: &[usize]) -> String {
    let mut v = idx.to_vec();
    v.sort_unstable();
    v.dedup();
    let mut parts = Vec::new();
    let mut k = 0;
    while k < v.len() {
        let start = v[k];
        let mut end = start;
        while k + 1 < v.len() && v[k + 1] == end + 1 {
            k += 1;
            end += 1;
        }
        parts.push(if end > start {
            format!("{}:{}", start + 1, end + 1)
        } else {
            (start + 1).to_string()
        });
        k += 1;
    }
    parts.join(" ")
}

fn missing(key: &str) -> Error {
    Error::Par(format!("missing mandatory key {key}"))
}

struct Fields {
    kv: BTreeMap<String, (String, String)>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<String> {
        self.kv.remove(&key.to_ascii_lowercase()).map(|(_, v)| v)
    }

    fn required(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| missing(key))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) if v.is_empty() => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Par(format!("{key}: cannot parse {v:?}"))),
        }
    }

    fn flag(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => Ok(Some(true)),
                "0" | "false" | "no" | "off" | "" => Ok(Some(false)),
                _ => Err(Error::Par(format!("{key}: expected 0 or 1, got {v:?}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "Data_file = data.nex\nOutput_file = out/run\nRun_length = 5000\nSample_interval = 100\n";

    #[test]
    fn minimal_file_takes_defaults() {
        let c = parse_par(MINIMAL).unwrap();
        assert_eq!(c, RunConfig::new("data.nex", "out/run", 5000, 100));
    }

    #[test]
    fn coupling_keys() {
        let text = format!("{MINIMAL}Coupled_markov_chains=1\nCoupling_lag=5000\n");
        let c = parse_par(&text).unwrap();
        assert!(c.coupled);
        assert_eq!(c.coupling_lag, 5000);
        let text = format!("{MINIMAL}Coupled_markov_chains=1\nCoupling_lag=150\n");
        assert!(matches!(parse_par(&text), Err(Error::Config(_))));
    }

    #[test]
    fn mandatory_keys() {
        for drop in ["Data_file", "Output_file", "Run_length", "Sample_interval"] {
            let text: String = MINIMAL
                .lines()
                .filter(|l| !l.starts_with(drop))
                .map(|l| format!("{l}\n"))
                .collect();
            assert!(parse_par(&text).is_err(), "{drop}");
        }
    }

    #[test]
    fn catastrophe_modes() {
        let text = format!(
            "{MINIMAL}Include_catastrophes = 1\nRandom_initial_cat_death_prob = 0\nInitial_cat_death_prob = 0.8\nRandom_initial_cat_rate = 0\nInitial_cat_rate = 0.0002\n"
        );
        let c = parse_par(&text).unwrap();
        assert_eq!(
            c.catastrophes,
            Some(CatastropheConfig {
                kappa: Some(0.8),
                rho: RhoMode::Fixed(0.0002)
            })
        );
    }

    #[test]
    fn index_lists() {
        assert_eq!(parse_index_list("1 10:13").unwrap(), vec![0, 9, 10, 11, 12]);
        assert_eq!(parse_index_list("[3, 1]").unwrap(), vec![0, 2]);
        assert_eq!(parse_index_list("").unwrap(), Vec::<usize>::new());
        assert!(parse_index_list("0").is_err());
        assert!(parse_index_list("5:2").is_err());
        assert_eq!(format_index_list(&[0, 9, 10, 11, 12]), "1 10:13");
    }

    #[test]
    fn unknown_keys_and_comments_are_skipped() {
        let text = format!("% comment\n{MINIMAL}\nSome_future_key = 3\n");
        assert!(parse_par(&text).is_ok());
        assert!(parse_par("not a setting\n").is_err());
    }
}
