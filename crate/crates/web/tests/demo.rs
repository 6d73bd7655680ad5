use dollo_web::{log_likelihood_of, sample_json, simulate_json};
use serde_json::Value;

fn simulated(kappa: f64, missing: bool) -> Value {
    serde_json::from_str(&simulate_json(6, 20.0, 0.2, kappa, 0.0003, missing, 3).unwrap()).unwrap()
}

#[test]
fn simulate_is_seeded_and_parseable() {
    let a = simulated(0.5, true);
    assert_eq!(a, simulated(0.5, true));
    let nexus = a["nexus"].as_str().unwrap();
    let data = dollo_core::nexus::parse_nexus(nexus).unwrap();
    assert_eq!(data.matrix.n_taxa(), 6);
    assert_eq!(data.matrix.n_traits() as u64, a["traits"].as_u64().unwrap());
    assert!(a["rootAge"].as_f64().unwrap() > 0.0);
}

#[test]
fn true_tree_scores_above_a_shuffled_one() {
    let s = simulate_json(8, 60.0, 0.2, 0.0, 0.0, false, 11).unwrap();
    let v: Value = serde_json::from_str(&s).unwrap();
    let (nexus, tree) = (v["nexus"].as_str().unwrap(), v["tree"].as_str().unwrap());
    let truth = log_likelihood_of(nexus, tree, 0.2, 0.0).unwrap();
    assert!(truth.is_finite() && truth < 0.0);
    let swapped = tree
        .replacen("taxon_1", "TMP", 1)
        .replacen("taxon_8", "taxon_1", 1)
        .replacen("TMP", "taxon_8", 1);
    assert!(log_likelihood_of(nexus, &swapped, 0.2, 0.0).unwrap() <= truth + 1e-9);
}

#[test]
fn likelihood_rejects_foreign_taxa() {
    let v = simulated(0.0, false);
    assert!(log_likelihood_of(v["nexus"].as_str().unwrap(), "(a:1,b:1);", 0.2, 0.0).is_err());
}

#[test]
fn sample_returns_traces_and_consensus() {
    let v = simulated(0.5, true);
    let out: Value = serde_json::from_str(
        &sample_json(v["nexus"].as_str().unwrap(), 2000, 100, true, 1).unwrap(),
    )
    .unwrap();
    for k in ["rootAge", "mu", "logLikelihood"] {
        assert_eq!(out[k].as_array().unwrap().len(), 21, "{k}");
    }
    let con = out["consensus"].as_str().unwrap();
    assert!(con.ends_with(';') && con.contains("taxon_6"));
    assert!(sample_json("#NEXUS", 100, 10, false, 1).is_err());
}
