//! Synthetic datasets standing in for an external model exporter: Gaussian
//! feature blobs, topical texts, softmax rows and synthesized activations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{synth_activations, Activations, Dataset, Instance, Split};
use crate::matrix::Matrix;

const FILLER: [&str; 12] = ["the", "of", "and", "to", "in", "is", "that", "with", "for", "on", "was", "by"];

/// `k` centers in `[-range, range]^dim`, pairwise at least `min_sep` apart.
pub fn separated_centers(k: usize, dim: usize, min_sep: f64, range: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while centers.len() < k {
        attempts += 1;
        assert!(attempts < 100_000, "cannot place {k} centers {min_sep} apart in {dim}-D");
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-range..range)).collect();
        let ok = centers.iter().all(|o| {
            let d2: f64 = o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() >= min_sep
        });
        if ok {
            centers.push(c);
        }
    }
    centers
}

/// Isotropic Gaussian blobs; returns the points and their generator labels.
pub fn gaussian_blobs(per_blob: usize, centers: &[Vec<f64>], sigma: f64, rng: &mut ChaCha8Rng) -> (Matrix<f64>, Vec<usize>) {
    let dim = centers[0].len();
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let mut data = Vec::with_capacity(per_blob * centers.len() * dim);
    let mut labels = Vec::with_capacity(per_blob * centers.len());
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            data.extend(c.iter().map(|&x| x + noise.sample(rng)));
            labels.push(b);
        }
    }
    (Matrix::from_vec(labels.len(), dim, data).expect("non-empty blobs"), labels)
}

/// A probability row with `max_p` on `pred` and the rest spread randomly.
pub fn softmax_row(n_classes: usize, pred: usize, max_p: f64, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let rest = 1.0 - max_p;
    // Keep every other entry below max_p so `pred` stays the argmax.
    let raw: Vec<f64> = (0..n_classes - 1).map(|_| rng.random_range(0.5..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut row = Vec::with_capacity(n_classes);
    let mut others = raw.iter().map(|r| r / total * rest);
    for k in 0..n_classes {
        if k == pred {
            row.push(max_p);
        } else {
            row.push(others.next().expect("n_classes - 1 others"));
        }
    }
    let mut row: Vec<f32> = row.into_iter().map(|p| p as f32).collect();
    // Absorb float32 rounding into the largest entry.
    let drift: f32 = 1.0 - row.iter().sum::<f32>();
    row[pred] += drift;
    row
}

fn sentence(vocab: &[&str], len: usize, rng: &mut ChaCha8Rng) -> String {
    let mut words = Vec::with_capacity(len);
    for i in 0..len {
        if i % 3 == 2 {
            words.push(FILLER[rng.random_range(0..FILLER.len())]);
        } else {
            words.push(vocab[rng.random_range(0..vocab.len())]);
        }
    }
    words.join(" ")
}

/// One topic of a synthetic corpus.
#[derive(Debug, Clone)]
pub struct Topic {
    pub vocab: Vec<&'static str>,
    /// Class the model predicts for this topic.
    pub predicted_class: usize,
    /// Range of the model's top probability on this topic.
    pub confidence: (f64, f64),
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub name: String,
    pub class_names: Vec<String>,
    pub topics: Vec<Topic>,
    pub feature_dim: usize,
    pub feature_sigma: f64,
    pub center_sep: f64,
    pub d_act: usize,
    /// Synthesize activations for test instances.
    pub activations: bool,
    pub seed: u64,
}

/// Generated dataset plus the topic each instance was drawn from.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub dataset: Dataset,
    pub topic_of: Vec<usize>,
}

pub fn topical_corpus(spec: &CorpusSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = separated_centers(spec.topics.len(), spec.feature_dim, spec.center_sep, spec.center_sep, &mut rng);
    let noise = Normal::new(0.0, spec.feature_sigma).expect("finite sigma");
    let n_classes = spec.class_names.len();
    let mut instances = Vec::new();
    let mut probs = Vec::new();
    let mut features = Vec::new();
    let mut topic_of = Vec::new();
    let mut activations = Activations::default();

    for split in [Split::Train, Split::Test] {
        for (t, topic) in spec.topics.iter().enumerate() {
            let count = if split == Split::Train { topic.n_train } else { topic.n_test };
            for _ in 0..count {
                let id = instances.len() as u64;
                let len = rng.random_range(9..18);
                let text = sentence(&topic.vocab, len, &mut rng);
                let tokens: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
                let max_p = rng.random_range(topic.confidence.0..topic.confidence.1);
                probs.extend(softmax_row(n_classes, topic.predicted_class, max_p, &mut rng));
                features.extend(centers[t].iter().map(|&c| (c + noise.sample(&mut rng)) as f32));
                if split == Split::Test && spec.activations {
                    let m = synth_activations(&tokens, spec.d_act, spec.seed).expect("non-empty tokens");
                    activations.insert(id, m);
                }
                let gold_label = (topic.predicted_class < n_classes && split == Split::Train).then_some(topic.predicted_class);
                instances.push(Instance { id, split, text, tokens, gold_label });
                topic_of.push(t);
            }
        }
    }
    let n = instances.len();
    Corpus {
        dataset: Dataset {
            name: spec.name.clone(),
            instances,
            probs: Matrix::from_vec(n, n_classes, probs).expect("probability rows"),
            features: Matrix::from_vec(n, spec.feature_dim, features).expect("feature rows"),
            activations,
            class_names: spec.class_names.clone(),
            d_act: spec.d_act,
            seed: spec.seed,
        },
        topic_of,
    }
}

pub const IT_TERMS: [&str; 12] =
    ["software", "server", "network", "windows", "driver", "linux", "graphics", "memory", "disk", "program", "file", "keyboard"];
pub const SCIENCE_TERMS: [&str; 12] =
    ["physics", "orbit", "energy", "particle", "theory", "nasa", "telescope", "quantum", "experiment", "space", "moon", "gravity"];
pub const SPORTS_TERMS: [&str; 12] =
    ["hockey", "defensive", "power", "play", "goalie", "season", "team", "puck", "playoffs", "coach", "score", "league"];

/// A two-class IT / science model meets new data where an unseen sports
/// topic makes up about half of the test split.
pub fn scenario_spec(seed: u64) -> CorpusSpec {
    let topic = |vocab: &[&'static str], class, confidence, n_train, n_test| Topic {
        vocab: vocab.to_vec(),
        predicted_class: class,
        confidence,
        n_train,
        n_test,
    };
    CorpusSpec {
        name: "topic-shift".into(),
        class_names: vec!["IT".into(), "Fundamental Science".into()],
        topics: vec![
            topic(&IT_TERMS, 0, (0.86, 0.99), 150, 104),
            topic(&SCIENCE_TERMS, 1, (0.86, 0.99), 150, 104),
            topic(&SPORTS_TERMS, 1, (0.50, 0.66), 0, 200),
        ],
        feature_dim: 32,
        feature_sigma: 0.3,
        center_sep: 4.0,
        d_act: 48,
        activations: true,
        seed,
    }
}

/// Index of the injected unseen topic in [`scenario_spec`].
pub const SCENARIO_OOD_TOPIC: usize = 2;

/// `blobs` well-separated topics of `per_blob` test instances each, with a
/// handful of training rows.
pub fn blob_spec(blobs: usize, per_blob: usize, dim: usize, sigma: f64, seed: u64) -> CorpusSpec {
    const VOCABS: [&[&str]; 6] = [&IT_TERMS, &SCIENCE_TERMS, &SPORTS_TERMS, &["bread", "flour", "oven", "yeast"], &["river", "valley", "glacier", "delta"], &["violin", "opera", "tempo", "chord"]];
    CorpusSpec {
        name: format!("{blobs}-blobs"),
        class_names: vec!["a".into(), "b".into()],
        topics: (0..blobs)
            .map(|b| Topic {
                vocab: VOCABS[b % VOCABS.len()].to_vec(),
                predicted_class: b % 2,
                confidence: if b % 3 == 2 { (0.5, 0.7) } else { (0.85, 0.99) },
                n_train: 5,
                n_test: per_blob,
            })
            .collect(),
        feature_dim: dim,
        feature_sigma: sigma,
        center_sep: 2.0,
        d_act: 16,
        activations: false,
        seed,
    }
}

/// Desk-scale corpus: 4,500 test instances with 128-dim features over
/// twelve topics, plus 500 training rows.
pub fn scale_spec(seed: u64) -> CorpusSpec {
    const EXTRA: [[&str; 4]; 9] = [
        ["bread", "flour", "oven", "yeast"],
        ["river", "valley", "glacier", "delta"],
        ["violin", "opera", "tempo", "chord"],
        ["tariff", "export", "market", "trade"],
        ["vaccine", "virus", "covid", "clinic"],
        ["senate", "ballot", "policy", "election"],
        ["actor", "premiere", "gossip", "studio"],
        ["harvest", "tractor", "soil", "wheat"],
        ["galaxy", "nebula", "comet", "star"],
    ];
    let mut topics = vec![
        Topic { vocab: IT_TERMS.to_vec(), predicted_class: 0, confidence: (0.85, 0.99), n_train: 250, n_test: 375 },
        Topic { vocab: SCIENCE_TERMS.to_vec(), predicted_class: 1, confidence: (0.85, 0.99), n_train: 250, n_test: 375 },
        Topic { vocab: SPORTS_TERMS.to_vec(), predicted_class: 1, confidence: (0.5, 0.7), n_train: 0, n_test: 375 },
    ];
    for (i, v) in EXTRA.iter().enumerate() {
        topics.push(Topic {
            vocab: v.to_vec(),
            predicted_class: i % 2,
            confidence: if i % 2 == 0 { (0.5, 0.75) } else { (0.8, 0.99) },
            n_train: 0,
            n_test: 375,
        });
    }
    CorpusSpec {
        name: "desk-scale".into(),
        class_names: vec!["IT".into(), "Fundamental Science".into()],
        topics,
        feature_dim: 128,
        feature_sigma: 0.5,
        center_sep: 3.0,
        d_act: 64,
        activations: false,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_is_valid() {
        let c = topical_corpus(&scenario_spec(3));
        assert!(c.dataset.violations().is_empty(), "{:?}", c.dataset.violations());
        let test = c.dataset.split_indices(Split::Test);
        assert_eq!(test.len(), 408);
        let ood = test.iter().filter(|&&i| c.topic_of[i] == SCENARIO_OOD_TOPIC).count();
        assert_eq!(ood, 200);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in 2..8 {
            let row = softmax_row(n, n - 1, 0.6, &mut rng);
            let s: f64 = row.iter().map(|&p| p as f64).sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&p| p <= row[n - 1]));
        }
    }
}
