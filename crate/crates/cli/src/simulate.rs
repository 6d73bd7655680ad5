use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use dollo_core::newick::parse_newick;
use dollo_core::rng;
use dollo_core::simulate::{
    synthesize, write_synthetic, Borrowing, BorrowingMode, NoEmptyField, SynthCatastrophes,
    SynthConfig, SynthTree,
};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of taxa of a random tree.
    #[arg(long, default_value_t = 10)]
    pub leaves: usize,
    /// Branching rate per year of a random tree.
    #[arg(long, default_value_t = 0.001)]
    pub theta: f64,
    /// Newick file with the tree to simulate on, instead of a random one.
    #[arg(long, conflicts_with_all = ["leaves", "theta"])]
    pub tree: Option<PathBuf>,
    /// Mean number of traits per taxon.
    #[arg(long = "traits", default_value_t = 50.0)]
    pub traits_per_taxon: f64,
    /// Proportion of traits lost per 1000 years.
    #[arg(long, default_value_t = 0.2)]
    pub psi: f64,
    /// Catastrophe death probability; enables catastrophes.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Catastrophe rate per year. Without it, catastrophes come from the
    /// `[&cat=k]` annotations of the supplied tree.
    #[arg(long, requires = "kappa")]
    pub cat_rate: Option<f64>,
    /// Relative standard deviation of per-branch death rates.
    #[arg(long, default_value_t = 0.0)]
    pub branch_sd: f64,
    /// Number of observation classes that every taxon must fill.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Relative standard deviation of per-class rates.
    #[arg(long, default_value_t = 0.0, requires = "classes")]
    pub class_sd: f64,
    /// Borrowing rate relative to the death rate.
    #[arg(long)]
    pub borrow: Option<f64>,
    /// Restrict borrowing to lineages that split less than this many
    /// years ago.
    #[arg(long, requires = "borrow")]
    pub borrow_distance: Option<f64>,
    /// Hide cells at random with taxon-specific probabilities.
    #[arg(long)]
    pub missing: bool,
    /// Drop traits present at a single taxon.
    #[arg(long)]
    pub remove_rare: bool,
    /// Number of calibrated clades to add.
    #[arg(long)]
    pub clades: Option<usize>,
    /// Half-width of clade age windows, in percent of the true age.
    #[arg(long, default_value_t = 10.0)]
    pub clade_accuracy: f64,
    /// Attempts per class when enforcing filled classes.
    #[arg(long, default_value_t = 1000)]
    pub max_attempts: usize,
    #[arg(short, long, default_value = "synthdata.nex")]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn config(args: &SimulateArgs) -> Result<SynthConfig> {
    let tree = match &args.tree {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let newick = text
                .lines()
                .map(str::trim)
                .find(|l| l.starts_with('('))
                .with_context(|| format!("no Newick tree in {}", path.display()))?;
            SynthTree::Given(parse_newick(newick, None)?)
        }
        None => SynthTree::Random {
            n_leaves: args.leaves,
            theta: args.theta,
        },
    };
    let mut c = SynthConfig::new(tree, args.traits_per_taxon, args.psi);
    c.catastrophes = args.kappa.map(|kappa| SynthCatastrophes {
        kappa,
        rho: args.cat_rate,
    });
    if args.kappa.is_some() && args.cat_rate.is_none() && args.tree.is_none() {
        bail!("--kappa on a random tree needs --cat-rate");
    }
    c.branch_sd = args.branch_sd;
    c.nef = args.classes.map(|n_obs| NoEmptyField {
        n_obs,
        class_sd: args.class_sd,
    });
    c.borrowing = args.borrow.map(|rate| Borrowing {
        rate,
        mode: match args.borrow_distance {
            Some(distance) => BorrowingMode::Local { distance },
            None => BorrowingMode::Global,
        },
    });
    c.missing = args.missing;
    c.remove_rare = args.remove_rare;
    c.clades = args.clades.map(|n| (n, args.clade_accuracy));
    c.max_attempts = args.max_attempts;
    Ok(c)
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let c = config(args)?;
    let seed = args.seed.unwrap_or_else(rng::clock_seed);
    let data = synthesize(&c, &mut rng::from_seed(seed))?;
    write_synthetic(&args.output, &data)?;
    println!(
        "seed {seed}; {} taxa, {} traits, root age {:.1}; wrote {} and {}",
        data.matrix.n_taxa(),
        data.matrix.n_traits(),
        data.tree.age(data.tree.root()),
        args.output.display(),
        args.output.with_extension("par").display()
    );
    Ok(())
}
