use std::collections::{BTreeSet, HashMap};

use oodlens_core::clustering::{cluster_keywords, run_clustering, top_keywords, ClusteringConfig, ClusteringError};
use oodlens_core::fixtures::{blob_spec, topical_corpus};
use oodlens_core::ingest::Split;
use oodlens_core::metrics::adjusted_rand_index;
use oodlens_core::numerics::{pca_fit, pca_transform};
use oodlens_core::saliency::{extract_saliency, instance_saliency, is_special_token, InstanceSaliency, SaliencyConfig};
use oodlens_core::text::{is_stopword, stopwords, term_tokenize};
use oodlens_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blob_recovery(blobs: usize, seed: u64) {
    let corpus = topical_corpus(&blob_spec(blobs, 100, 10, 0.05, seed));
    let ds = &corpus.dataset;
    let cfg = ClusteringConfig { n_max: 10, ..Default::default() };
    let r = run_clustering(ds, &cfg).unwrap();
    let truth: Vec<usize> = r.members.iter().map(|&p| corpus.topic_of[p]).collect();
    assert_eq!(r.n_opt, blobs);
    assert_eq!(adjusted_rand_index(&r.labels, &truth), 1.0);
    assert_eq!(r.labels.len(), blobs * 100);
    let best = r.silhouette_trace[&r.n_opt];
    assert!(r.silhouette_trace.values().all(|&s| s <= best));
    assert_eq!(*r.silhouette_trace.keys().last().unwrap(), 10);
}

#[test]
fn four_blobs_recovered() {
    blob_recovery(4, 3);
}

#[test]
fn two_blobs_recovered() {
    blob_recovery(2, 3);
}

#[test]
fn coords_are_first_three_pca_components() {
    let corpus = topical_corpus(&blob_spec(3, 30, 6, 0.2, 9));
    let ds = &corpus.dataset;
    let cfg = ClusteringConfig { n_max: 6, p: 4, ..Default::default() };
    let r = run_clustering(ds, &cfg).unwrap();
    let test = ds.split_indices(Split::Test);
    let f = Matrix::from_fn(test.len(), ds.feature_dim(), |i, j| ds.features.get(test[i], j) as f64);
    let z = pca_transform(&pca_fit(&f, 4).unwrap(), &f).unwrap();
    for (i, c) in r.coords.iter().enumerate() {
        for (k, &v) in c.iter().enumerate() {
            assert_eq!(v.to_bits(), z.get(i, k).to_bits());
        }
    }
    assert_eq!(run_clustering(ds, &cfg).unwrap(), r);
}

#[test]
fn coords_zero_padded_and_sweep_clamped() {
    let mut corpus = topical_corpus(&blob_spec(2, 3, 2, 0.3, 1));
    // keep 5 test instances
    let ds = &mut corpus.dataset;
    let keep: Vec<usize> = ds.split_indices(Split::Test).into_iter().take(5).collect();
    ds.instances = keep.iter().map(|&p| ds.instances[p].clone()).collect();
    ds.features = Matrix::from_fn(5, 2, |i, j| ds.features.get(keep[i], j));
    ds.probs = Matrix::from_fn(5, 2, |i, j| ds.probs.get(keep[i], j));
    let r = run_clustering(ds, &ClusteringConfig::default()).unwrap();
    assert_eq!(r.silhouette_trace.keys().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
    assert!(r.coords.iter().all(|c| c[2] == 0.0));

    ds.instances.truncate(2);
    ds.features = Matrix::from_fn(2, 2, |i, j| ds.features.get(i, j));
    ds.probs = Matrix::from_fn(2, 2, |i, j| ds.probs.get(i, j));
    assert_eq!(run_clustering(ds, &ClusteringConfig::default()), Err(ClusteringError::TooFewInstances(2)));
}

#[test]
fn term_tokenize_examples() {
    assert_eq!(term_tokenize("COVID-19 spreads!"), ["covid", "19", "spreads"]);
    assert!(term_tokenize("a I x").is_empty());
    assert!(term_tokenize("").is_empty());
}

#[test]
fn stopword_list_is_the_canonical_one() {
    assert_eq!(stopwords().len(), 179);
    for w in ["i", "me", "the", "and", "wouldn't", "mustn", "ourselves"] {
        assert!(is_stopword(w), "{w}");
    }
    assert!(!is_stopword("hockey"));
}

#[test]
fn keyword_top_ten_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let vocab = ["puck", "goal", "the", "ice", "and", "coach", "season", "a", "zamboni", "rink", "of", "stick", "net", "save", "shot"];
    for _ in 0..50 {
        let texts: Vec<String> = (0..rng.random_range(1..8))
            .map(|_| (0..rng.random_range(1..20)).map(|_| vocab[rng.random_range(0..vocab.len())]).collect::<Vec<_>>().join(" "))
            .collect();
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in &texts {
            for w in t.split(' ') {
                if w.len() >= 2 && !is_stopword(w) {
                    *counts.entry(w.to_string()).or_default() += 1;
                }
            }
        }
        let mut want: Vec<(String, usize)> = counts.into_iter().collect();
        want.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        want.truncate(10);
        let got: Vec<(String, usize)> = top_keywords(texts.iter().map(String::as_str), 10).into_iter().map(|k| (k.term, k.count)).collect();
        assert_eq!(got, want);
    }
    let twelve = "mike lima kilo juliet india hotel golf foxtrot echo delta charlie bravo";
    let got: Vec<String> = top_keywords([twelve], 10).into_iter().map(|k| k.term).collect();
    let mut all: Vec<&str> = twelve.split(' ').collect();
    all.sort();
    assert_eq!(got, all[..10]);
}

#[test]
fn cluster_keywords_cover_members() {
    let corpus = topical_corpus(&blob_spec(3, 40, 8, 0.05, 2));
    let ds = &corpus.dataset;
    let r = run_clustering(ds, &ClusteringConfig { n_max: 6, ..Default::default() }).unwrap();
    for c in 0..r.n_opt {
        let kw = cluster_keywords(c, ds, &r).unwrap();
        assert!(kw.keywords.len() <= 10);
        assert!(kw.keywords.iter().all(|k| k.count > 0 && !is_stopword(&k.term)));
    }
    assert!(matches!(cluster_keywords(r.n_opt, ds, &r), Err(ClusteringError::UnknownCluster { .. })));
}

#[test]
fn block_activations_give_generator_groups() {
    let block_a = ["hockey", "the", "puck", "goalie", "season", "of"];
    let block_b = ["kernel", "driver", "and", "linux", "memory"];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut order: Vec<(usize, &str)> = block_a.iter().map(|&w| (0, w)).chain(block_b.iter().map(|&w| (1, w))).collect();
    // interleave the blocks
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let tokens: Vec<String> = order.iter().map(|(_, w)| w.to_string()).collect();
    let d_act = 20;
    let acts = Matrix::from_fn(d_act, tokens.len(), |i, j| {
        let driven = (i < 10) == (order[j].0 == 0);
        if driven { 1.0 + rng.random_range(0.0..0.5) } else { rng.random_range(0.0..0.01) }
    });
    let cfg = SaliencyConfig { n_factors: 2, ..Default::default() };
    let r = extract_saliency(&acts, &tokens, &cfg).unwrap();
    let got: BTreeSet<BTreeSet<String>> =
        r.groups.iter().map(|g| g.members.iter().map(|m| m.token.clone()).collect()).collect();
    let want: BTreeSet<BTreeSet<String>> = [&block_a[..], &block_b[..]]
        .iter()
        .map(|b| b.iter().filter(|w| !is_stopword(w)).map(|w| w.to_string()).collect())
        .collect();
    assert_eq!(got, want);
}

#[test]
fn top_words_keeps_largest_weights() {
    let words: Vec<String> = (0..25).map(|i| format!("term{i:02}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u: Vec<f64> = (0..12).map(|_| rng.random_range(0.5..1.5)).collect();
    let v: Vec<f64> = (0..25).map(|_| rng.random_range(0.1..2.0)).collect();
    let acts = Matrix::from_fn(12, 25, |i, j| u[i] * v[j]);
    let cfg = SaliencyConfig { n_factors: 1, top_words: 10, ..Default::default() };
    let r = extract_saliency(&acts, &words, &cfg).unwrap();
    assert_eq!(r.groups.len(), 1);
    let g = &r.groups[0];
    assert_eq!(g.members.len(), 10);
    let mut idx: Vec<usize> = (0..25).collect();
    idx.sort_by(|&a, &b| g.weight_series[b].total_cmp(&g.weight_series[a]).then(a.cmp(&b)));
    assert_eq!(g.members.iter().map(|m| m.token_index).collect::<Vec<_>>(), idx[..10]);
}

#[test]
fn random_fixtures_never_emit_filtered_tokens() {
    let pool = [
        "the", "and", "[CLS]", "[SEP]", "!!!", ",", "a", "x", "puck", "goalie", "kernel", "defensive", "power", "of", "is", "19",
        "covid", "[PAD]", "...", "linux", "I", "The", "play", "orbit",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..100 {
        let l = rng.random_range(1..40);
        let tokens: Vec<String> = (0..l).map(|_| pool[rng.random_range(0..pool.len())].to_string()).collect();
        let d_act = rng.random_range(1..24);
        let acts = Matrix::from_fn(d_act, l, |_, _| rng.random_range(-0.5..1.5f64));
        let cfg = SaliencyConfig {
            n_factors: rng.random_range(1..12),
            top_words: rng.random_range(1..12),
            seed: case,
            ..Default::default()
        };
        let r = extract_saliency(&acts, &tokens, &cfg).unwrap();
        assert!(r.groups.len() <= cfg.n_factors);
        assert_eq!(r.token_count, l);
        for g in &r.groups {
            assert!(!g.members.is_empty() && g.members.len() <= cfg.top_words);
            assert_eq!(g.weight_series.len(), l);
            assert!(g.weight_series.iter().all(|&w| w >= 0.0));
            for m in &g.members {
                assert!(!is_special_token(&m.token) && !is_stopword(&m.token), "case {case}: {}", m.token);
                assert_eq!(m.weight, g.weight_series[m.token_index]);
            }
            assert!(g.members.windows(2).all(|w| w[0].weight >= w[1].weight));
        }
        assert_eq!(extract_saliency(&acts, &tokens, &cfg).unwrap(), r);
    }
}

#[test]
fn instance_without_activations_is_typed() {
    let mut corpus = topical_corpus(&blob_spec(2, 4, 3, 0.1, 1));
    let ds = &mut corpus.dataset;
    let id = ds.instances[ds.split_indices(Split::Test)[0]].id;
    assert_eq!(instance_saliency(ds, id, &SaliencyConfig::default()).unwrap(), InstanceSaliency::NoActivations { id });
    let tokens = ds.instances[ds.position(id).unwrap()].tokens.clone();
    ds.activations.insert(id, oodlens_core::ingest::synth_activations(&tokens, 16, 1).unwrap());
    match instance_saliency(ds, id, &SaliencyConfig::default()).unwrap() {
        InstanceSaliency::Ok { id: got, result, .. } => {
            assert_eq!(got, id);
            assert_eq!(result.token_count, tokens.len());
        }
        other => panic!("{other:?}"),
    }
    assert!(instance_saliency(ds, 999_999, &SaliencyConfig::default()).is_err());
}
