use std::fs;

use oodlens_core::analysis::{analyze, AnalysisBundle, AnalysisConfig, ANALYSIS_FILE, COORDS_FILE, LABELS_FILE, SCORES_FILE};
use oodlens_core::fixtures::{scenario_spec, topical_corpus, SCENARIO_OOD_TOPIC, SPORTS_TERMS};
use oodlens_core::ingest::{load_dataset, Split};
use tempfile::TempDir;

fn config() -> AnalysisConfig {
    let mut c = AnalysisConfig::with_seed(42);
    c.clustering.n_max = 12;
    c
}

#[test]
fn cache_is_deterministic_and_reloads() {
    let corpus = topical_corpus(&scenario_spec(5));
    let data = TempDir::new().unwrap();
    corpus.dataset.write_to(data.path()).unwrap();

    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    analyze(load_dataset(data.path()).unwrap(), config()).unwrap().write_cache(a.path()).unwrap();
    analyze(load_dataset(data.path()).unwrap(), config()).unwrap().write_cache(b.path()).unwrap();
    for f in [ANALYSIS_FILE, SCORES_FILE, LABELS_FILE, COORDS_FILE] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }

    let fresh = analyze(load_dataset(data.path()).unwrap(), config()).unwrap();
    let cached = AnalysisBundle::load(data.path(), a.path()).unwrap();
    assert_eq!(cached.scores, fresh.scores);
    assert_eq!(cached.threshold, fresh.threshold);
    assert_eq!(cached.keywords, fresh.keywords);
    assert_eq!(cached.clustering.labels, fresh.clustering.labels);
    assert_eq!(cached.clustering.n_opt, fresh.clustering.n_opt);
    assert_eq!(cached.clustering.silhouette_trace, fresh.clustering.silhouette_trace);
    // Reloading a cache is itself stable.
    let c = TempDir::new().unwrap();
    cached.write_cache(c.path()).unwrap();
    for f in [ANALYSIS_FILE, SCORES_FILE, LABELS_FILE, COORDS_FILE] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(c.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn cache_for_another_dataset_is_rejected() {
    let data = TempDir::new().unwrap();
    topical_corpus(&scenario_spec(5)).dataset.write_to(data.path()).unwrap();
    let out = TempDir::new().unwrap();
    analyze(load_dataset(data.path()).unwrap(), config()).unwrap().write_cache(out.path()).unwrap();
    let mut other = topical_corpus(&scenario_spec(6)).dataset;
    other.name = "other".into();
    assert!(AnalysisBundle::from_cache(other, out.path()).is_err());
    assert!(AnalysisBundle::load(data.path(), data.path()).is_err());
}

#[test]
fn unseen_topic_surfaces_as_a_cluster() {
    let corpus = topical_corpus(&scenario_spec(5));
    let bundle = analyze(corpus.dataset.clone(), config()).unwrap();
    let r = &bundle.clustering;
    // The cluster holding most injected-topic instances.
    let mut votes = vec![0usize; r.n_opt];
    for (&pos, &l) in r.members.iter().zip(&r.labels) {
        if corpus.topic_of[pos] == SCENARIO_OOD_TOPIC {
            votes[l] += 1;
        }
    }
    let injected = (0..r.n_opt).max_by_key(|&c| votes[c]).unwrap();
    let terms: Vec<&str> = bundle.keywords[injected].keywords.iter().map(|k| k.term.as_str()).collect();
    assert!(terms.iter().all(|t| SPORTS_TERMS.contains(t)), "{terms:?}");
    assert!(terms.len() >= 10);

    let eps = bundle.epsilon() as f32;
    let scores = &bundle.scores.scores;
    let in_cluster: Vec<f32> = r.members.iter().zip(&r.labels).filter(|(_, &l)| l == injected).map(|(&p, _)| scores[p]).collect();
    let id_scores: Vec<f32> = r.members.iter().map(|&p| scores[p]).filter(|&s| s <= eps).collect();
    let mean = |v: &[f32]| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
    assert!(mean(&in_cluster) > mean(&id_scores));
    let (_, ood) = bundle.scores.counts(Split::Test, eps);
    assert!(ood > 0);
}
