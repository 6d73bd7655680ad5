use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::Subcommand;
use dollo_core::analysis::{
    active_trait_counts, autocorrelation, consensus, credible_interval, data_histograms,
    distance_outputs, histogram, mrca_age_series, synthetic_comparison, trait_path, EdgeStatus,
    SampleParams,
};
use dollo_core::coupling::tv_bound;
use dollo_core::newick::parse_newick;
use dollo_core::nexus::TraitMatrix;
use dollo_core::output::{
    fmt_sig, read_saved_sample, read_table, read_tau, read_tree_lines, with_suffix, TRACE_COLUMNS,
};
use dollo_core::rng;
use dollo_core::runner::load_data;
use dollo_core::tree::Tree;

#[derive(Subcommand, Debug)]
pub enum Analysis {
    /// Majority-rule consensus tree in Newick form.
    Consensus {
        /// Tree file; use `<stem>cat.nex` to include catastrophe counts.
        trees: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Use every n-th tree after burn-in.
        #[arg(long, default_value_t = 1)]
        every: usize,
        /// Fraction of samples discarded as burn-in.
        #[arg(long, default_value_t = 0.1)]
        burn_in: f64,
    },
    /// Age of the most recent common ancestor of some taxa, per sample.
    Mrca {
        trees: PathBuf,
        /// Comma-separated taxon names.
        #[arg(long, value_delimiter = ',', required = true)]
        taxa: Vec<String>,
        #[arg(long, default_value_t = 0.1)]
        burn_in: f64,
    },
    /// Histograms of taxa per trait and traits per taxon.
    Histograms { data: PathBuf },
    /// Histograms of the data beside those of data simulated on a sample.
    Check {
        data: PathBuf,
        /// Output stem of a run.
        stem: PathBuf,
        /// 1-based sample index.
        #[arg(long)]
        index: usize,
        #[arg(long)]
        remove_rare: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pairwise divergence-time estimates from shared traits.
    Distances {
        data: PathBuf,
        /// Death rate per year.
        #[arg(long)]
        mu: f64,
        /// Tree file whose sample supplies MRCA ages for comparison.
        #[arg(long)]
        trees: Option<PathBuf>,
        /// 1-based sample index, the last by default.
        #[arg(long)]
        index: Option<usize>,
    },
    /// Traits found exclusively below each internal node of a sample.
    Active {
        data: PathBuf,
        trees: PathBuf,
        #[arg(long)]
        index: Option<usize>,
    },
    /// Where one trait can have been on a sampled tree.
    Path {
        data: PathBuf,
        trees: PathBuf,
        /// 1-based trait index.
        #[arg(long = "trait")]
        trait_index: usize,
        #[arg(long)]
        index: Option<usize>,
    },
    /// Posterior summaries and autocorrelations of a trace file.
    Trace {
        /// `<stem>.txt`.
        trace: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        burn_in: f64,
        /// Autocorrelation lags, in samples.
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,50")]
        lags: Vec<usize>,
    },
    /// Upper bound on the total variation distance to the posterior from
    /// the meeting times of coupled replicates.
    TvBound {
        /// `.tau` files, one per replicate.
        #[arg(required = true)]
        taus: Vec<PathBuf>,
        /// Coupling lag in iterations.
        #[arg(long)]
        lag: usize,
        #[arg(long)]
        sample_interval: usize,
        /// Largest iteration to report.
        #[arg(long)]
        until: Option<usize>,
        /// Spacing of reported iterations.
        #[arg(long)]
        step: Option<usize>,
    },
}

fn read_tree_file(path: &Path) -> Result<Vec<Tree>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let lines = read_tree_lines(&text);
    ensure!(!lines.is_empty(), "no trees in {}", path.display());
    let first = parse_newick(&lines[0].1, None)?;
    let taxa = first.taxa().to_vec();
    let mut trees = vec![first];
    for (_, nw) in &lines[1..] {
        trees.push(parse_newick(nw, Some(&taxa))?);
    }
    Ok(trees)
}

fn after_burn_in<T>(xs: &[T], burn_in: f64) -> Result<&[T]> {
    ensure!(
        (0.0..1.0).contains(&burn_in),
        "burn-in fraction must lie in [0, 1)"
    );
    Ok(&xs[(xs.len() as f64 * burn_in).floor() as usize..])
}

fn pick(trees: &[Tree], index: Option<usize>) -> Result<&Tree> {
    let i = index.unwrap_or(trees.len());
    ensure!(
        i >= 1 && i <= trees.len(),
        "sample index {i} out of range 1..={}",
        trees.len()
    );
    Ok(&trees[i - 1])
}

fn matrix(path: &Path) -> Result<TraitMatrix> {
    Ok(load_data(path)?.matrix)
}

fn histogram_table(columns: &[(&str, &[usize])]) -> String {
    let hs: Vec<Vec<usize>> = columns.iter().map(|(_, v)| histogram(v)).collect();
    let rows = hs.iter().map(Vec::len).max().unwrap_or(0);
    let mut s = String::from("count");
    for (name, _) in columns {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for k in 0..rows {
        let _ = write!(s, "{k}");
        for h in &hs {
            let _ = write!(s, ",{}", h.get(k).copied().unwrap_or(0));
        }
        s.push('\n');
    }
    s
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt_sig)
}

fn tv_table(
    taus: &[PathBuf],
    lag: usize,
    j: usize,
    until: Option<usize>,
    step: Option<usize>,
) -> Result<String> {
    let mut values = Vec::new();
    for p in taus {
        match read_tau(p, j)? {
            Some(t) => values.push(t),
            None => bail!(
                "{}: chains did not meet, so no bound is available",
                p.display()
            ),
        }
    }
    let max = *values.iter().max().unwrap_or(&0);
    let until = until.unwrap_or(max.saturating_sub(lag));
    let step = step.unwrap_or(lag).max(1);
    let mut s = String::from("iteration,tv_bound\n");
    let mut t = 0;
    loop {
        let _ = writeln!(s, "{t},{}", fmt_sig(tv_bound(&values, lag, t)?));
        if t >= until {
            break;
        }
        t = (t + step).min(until);
    }
    Ok(s)
}

pub fn run(a: &Analysis) -> Result<()> {
    let out = match a {
        Analysis::Consensus {
            trees,
            threshold,
            every,
            burn_in,
        } => {
            let all = read_tree_file(trees)?;
            let kept = after_burn_in(&all, *burn_in)?;
            let c = consensus(kept, *threshold, *every)?;
            format!("{}\n", c.to_newick())
        }
        Analysis::Mrca {
            trees,
            taxa,
            burn_in,
        } => {
            let all = read_tree_file(trees)?;
            let kept = after_burn_in(&all, *burn_in)?;
            let names: Vec<&str> = taxa.iter().map(String::as_str).collect();
            let series = mrca_age_series(kept, &names)?;
            let (lo, hi) = credible_interval(&series.ages, 0.95);
            let mean = series.ages.iter().sum::<f64>() / series.ages.len() as f64;
            let mut s = format!(
                "# mean {}, 95% interval [{}, {}], clade probability {}\nsample,age,is_clade\n",
                fmt_sig(mean),
                fmt_sig(lo),
                fmt_sig(hi),
                fmt_sig(series.clade_probability())
            );
            let offset = all.len() - kept.len();
            for (i, (age, clade)) in series.ages.iter().zip(&series.is_clade).enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    offset + i + 1,
                    fmt_sig(*age),
                    u8::from(*clade)
                );
            }
            s
        }
        Analysis::Histograms { data } => {
            let (per_trait, per_taxon) = data_histograms(&matrix(data)?);
            histogram_table(&[
                ("traits_with_count_taxa", &per_trait),
                ("taxa_with_count_traits", &per_taxon),
            ])
        }
        Analysis::Check {
            data,
            stem,
            index,
            remove_rare,
            seed,
        } => {
            let m = matrix(data)?;
            let saved = read_saved_sample(&with_suffix(stem, ".nex"), *index, &m.taxa)?;
            let trace = read_table(&with_suffix(stem, ".txt"))?;
            let lambda_col = TRACE_COLUMNS
                .iter()
                .position(|&c| c == "Lambda")
                .expect("column")
                - 1;
            let row = trace
                .iter()
                .find(|(s, _)| *s == saved.sample)
                .with_context(|| format!("sample {} missing from the trace", saved.sample))?;
            let params = SampleParams {
                mu: saved.mu.context("trace has no death rate")?,
                lambda: row.1[lambda_col],
                kappa: saved.kappa.unwrap_or(0.0),
                xi: saved.xi.unwrap_or_else(|| vec![1.0; m.n_taxa()]),
                remove_rare: *remove_rare,
            };
            let mut r = rng::from_seed(seed.unwrap_or_else(rng::clock_seed));
            let cmp = synthetic_comparison(&saved.tree, &params, &m, &mut r)?;
            histogram_table(&[
                ("data_traits_with_count_taxa", &cmp.data_per_trait),
                ("synthetic_traits_with_count_taxa", &cmp.synthetic_per_trait),
                ("data_taxa_with_count_traits", &cmp.data_per_taxon),
                ("synthetic_taxa_with_count_traits", &cmp.synthetic_per_taxon),
            ])
        }
        Analysis::Distances {
            data,
            mu,
            trees,
            index,
        } => {
            let m = matrix(data)?;
            let mut s = String::from("taxon");
            for t in &m.taxa {
                let _ = write!(s, ",{t}");
            }
            s.push('\n');
            match trees {
                Some(path) => {
                    let all = read_tree_file(path)?;
                    let d = distance_outputs(&m, pick(&all, *index)?, *mu)?;
                    for (t, row) in m.taxa.iter().zip(&d.matrix) {
                        let cells: Vec<String> = row.iter().map(|x| opt(*x)).collect();
                        let _ = writeln!(s, "{t},{}", cells.join(","));
                    }
                    s.push_str("\ntaxon_a,taxon_b,estimate,mrca_age\n");
                    for (i, j, est, depth) in d.pairs {
                        let _ = writeln!(
                            s,
                            "{},{},{},{}",
                            m.taxa[i],
                            m.taxa[j],
                            opt(est),
                            fmt_sig(depth)
                        );
                    }
                }
                None => {
                    for i in 0..m.n_taxa() {
                        let cells: Vec<String> = (0..m.n_taxa())
                            .map(|j| {
                                if i == j {
                                    "0".into()
                                } else {
                                    opt(dollo_core::analysis::map_pairwise_time(&m, i, j, *mu))
                                }
                            })
                            .collect();
                        let _ = writeln!(s, "{},{}", m.taxa[i], cells.join(","));
                    }
                }
            }
            s
        }
        Analysis::Active { data, trees, index } => {
            let m = matrix(data)?;
            let all = read_tree_file(trees)?;
            let t = pick(&all, *index)?;
            let counts = active_trait_counts(t, &m)?;
            let mut s = String::from("node,age,taxa,traits\n");
            for v in t.internal_nodes() {
                let names: Vec<&str> = t
                    .leaves_below(v)
                    .iter()
                    .map(|&i| t.taxa()[i].as_str())
                    .collect();
                let _ = writeln!(
                    s,
                    "{v},{},{},{}",
                    fmt_sig(t.age(v)),
                    names.join(" "),
                    counts[v]
                );
            }
            s
        }
        Analysis::Path {
            data,
            trees,
            trait_index,
            index,
        } => {
            let m = matrix(data)?;
            ensure!(*trait_index >= 1, "trait indices are 1-based");
            let all = read_tree_file(trees)?;
            let t = pick(&all, *index)?;
            let status = trait_path(t, &m, trait_index - 1)?;
            let mut s = String::from("node,taxa,edge_status\n");
            for (v, st) in status.iter().enumerate() {
                let names: Vec<&str> = t
                    .leaves_below(v)
                    .iter()
                    .map(|&i| t.taxa()[i].as_str())
                    .collect();
                let label = match st {
                    EdgeStatus::RequiredPresent => "present",
                    EdgeStatus::PossibleBirth => "possible_birth",
                    EdgeStatus::AbsentOrDied => "absent_or_died",
                };
                let _ = writeln!(s, "{v},{},{label}", names.join(" "));
            }
            s
        }
        Analysis::Trace {
            trace,
            burn_in,
            lags,
        } => {
            let rows = read_table(trace)?;
            let kept = after_burn_in(&rows, *burn_in)?;
            ensure!(!kept.is_empty(), "no samples after burn-in");
            let mut s = String::from("column,mean,lower95,upper95");
            for l in lags {
                let _ = write!(s, ",acf{l}");
            }
            s.push('\n');
            let max_lag = lags.iter().copied().max().unwrap_or(0);
            for (c, name) in TRACE_COLUMNS.iter().enumerate().skip(1) {
                let xs: Vec<f64> = kept
                    .iter()
                    .filter_map(|(_, r)| r.get(c - 1).copied())
                    .collect();
                if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
                    continue;
                }
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let (lo, hi) = credible_interval(&xs, 0.95);
                let acf = autocorrelation(&xs, max_lag);
                let _ = write!(
                    s,
                    "{name},{},{},{}",
                    fmt_sig(mean),
                    fmt_sig(lo),
                    fmt_sig(hi)
                );
                for &l in lags {
                    let _ = write!(s, ",{}", fmt_sig(acf[l]));
                }
                s.push('\n');
            }
            s
        }
        Analysis::TvBound {
            taus,
            lag,
            sample_interval,
            until,
            step,
        } => tv_table(taus, *lag, *sample_interval, *until, *step)?,
    };
    print!("{out}");
    Ok(())
}
