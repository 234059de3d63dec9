use std::collections::HashMap;

use proptest::prelude::*;

use imgspec_core::analysis::spearman;
use imgspec_core::corpus::{
    load_dataset, split_pool, write_dataset, Dataset, DatasetFormat, Description, ImageRecord,
};
use imgspec_core::lexsim::{sentence_similarity, Lexicon, Synset, TfIdfModel};
use imgspec_core::retrieval::{build_training_pairs, negatives_per_sentence, RankedImage, Ranking};
use imgspec_core::specificity::automated_specificity;
use imgspec_core::synthetic::{vocabulary, Vocabulary};

fn vocab() -> &'static Vocabulary {
    static V: std::sync::OnceLock<Vocabulary> = std::sync::OnceLock::new();
    V.get_or_init(|| vocabulary(4, 5))
}

/// Words from the synthetic taxonomy plus a few it does not know.
fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        (0..4usize, 0..5usize).prop_map(|(g, k)| format!("g{g}w{k}")),
        prop::sample::select(vec!["zebra", "quilt", "marble", "a", "of"]).prop_map(String::from),
    ]
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..8).prop_map(|w| w.join(" "))
}

fn description(text: &str) -> Description {
    Description::new("img", text).unwrap()
}

fn tfidf_for(texts: &[&Description]) -> TfIdfModel {
    TfIdfModel::fit_iter(texts.iter().map(|d| d.tokens.as_slice())).unwrap()
}

proptest! {
    #[test]
    fn similarity_is_symmetric_bounded_and_reflexive(a in sentence(), b in sentence(), c in sentence()) {
        let (a, b, c) = (description(&a), description(&b), description(&c));
        let tfidf = tfidf_for(&[&a, &b, &c]);
        let lex = &vocab().lexicon;
        let ab = sentence_similarity(&a, &b, lex, &tfidf);
        prop_assert_eq!(ab.to_bits(), sentence_similarity(&b, &a, lex, &tfidf).to_bits());
        prop_assert!((0.0..=1.0).contains(&ab));
        if !a.tokens.is_empty() {
            prop_assert_eq!(sentence_similarity(&a, &a, lex, &tfidf), 1.0);
        }
    }

    #[test]
    fn duplicating_both_sentences_keeps_similarity(a in sentence(), b in sentence(), k in 2usize..6) {
        let (a, b) = (description(&a), description(&b));
        let rep = |d: &Description| description(&vec![d.text.as_str(); k].join(" "));
        let (ak, bk) = (rep(&a), rep(&b));
        let tfidf = tfidf_for(&[&a, &b]);
        let lex = &vocab().lexicon;
        let base = sentence_similarity(&a, &b, lex, &tfidf);
        let dup = sentence_similarity(&ak, &bk, lex, &tfidf);
        prop_assert!((base - dup).abs() <= 1e-12, "{} vs {}", base, dup);
    }

    #[test]
    fn specificity_ignores_pool_order(pool in prop::collection::vec(sentence(), 2..7), seed in any::<u64>()) {
        let pool: Vec<Description> = pool.iter().map(|t| description(t)).collect();
        let tfidf = tfidf_for(&pool.iter().collect::<Vec<_>>());
        let lex = &vocab().lexicon;
        let mut shuffled = pool.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut imgspec_core::seed::rng(seed, &[]));
        let a = automated_specificity(&pool, lex, &tfidf).unwrap().value;
        let b = automated_specificity(&shuffled, lex, &tfidf).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn copies_of_one_sentence_are_fully_specific(s in sentence(), n in 2usize..6) {
        let d = description(&s);
        prop_assume!(!d.tokens.is_empty());
        let pool = vec![d.clone(); n];
        let tfidf = tfidf_for(&[&d]);
        prop_assert_eq!(automated_specificity(&pool, &vocab().lexicon, &tfidf).unwrap().value, 1.0);
    }

    #[test]
    fn spearman_ignores_increasing_transforms(
        pairs in prop::collection::vec((-50i32..50, -50i32..50), 3..40)
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        prop_assume!(x.iter().any(|v| *v != x[0]) && y.iter().any(|v| *v != y[0]));
        let rho = spearman(&x, &y).unwrap();
        let tx: Vec<f64> = x.iter().map(|v| (v / 10.0).exp() + 3.0).collect();
        let ty: Vec<f64> = y.iter().map(|v| v * v * v - 7.0).collect();
        prop_assert_eq!(rho.to_bits(), spearman(&tx, &ty).unwrap().to_bits());
        prop_assert_eq!(spearman(&x, &x).unwrap(), 1.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(spearman(&x, &neg).unwrap(), -1.0);
    }

    #[test]
    fn split_pool_is_reproducible_and_complete(n in 2usize..30, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let n_train = 1 + ((n - 1) as f64 * frac) as usize;
        let texts: Vec<String> = (0..n).map(|i| format!("sentence number {i}")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let rec = ImageRecord::new("img", "ref", &refs).unwrap();
        let (train, test) = split_pool(&rec, n_train, seed).unwrap();
        prop_assert_eq!(split_pool(&rec, n_train, seed).unwrap(), (train.clone(), test.clone()));
        prop_assert_eq!(train.len(), n_train);
        let mut all: Vec<String> = train.iter().chain(&test).map(|d| d.text.clone()).collect();
        all.sort();
        let mut expected = texts.clone();
        expected.sort();
        prop_assert_eq!(all, expected);
    }

    #[test]
    fn rankings_are_permutations(scores in prop::collection::vec(-3i32..3, 1..30)) {
        let entries: Vec<RankedImage> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| RankedImage { image_id: format!("img{i:02}"), relevance: s as f64 })
            .collect();
        let r = Ranking::from_scores("q", entries);
        let mut ids: Vec<&str> = r.ids();
        for w in r.entries.windows(2) {
            prop_assert!(w[0].relevance > w[1].relevance
                || (w[0].relevance == w[1].relevance && w[0].image_id < w[1].image_id));
        }
        ids.sort();
        let expected: Vec<String> = (0..scores.len()).map(|i| format!("img{i:02}")).collect();
        prop_assert_eq!(ids, expected.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn dataset_files_round_trip(
        pools in prop::collection::vec(prop::collection::vec(sentence(), 3), 1..5),
        feats in prop::collection::vec(-1e6f64..1e6, 3),
    ) {
        let images: Vec<ImageRecord> = pools
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let refs: Vec<&str> = p.iter().map(String::as_str).collect();
                ImageRecord::new(&format!("im{i}"), &p[0], &refs)
                    .unwrap()
                    .with_features(feats.iter().map(|f| f * (i + 1) as f64).collect())
                    .with_annotation("memorability", 0.125 * i as f64)
            })
            .collect();
        let db = Dataset::new("prop", images, Some(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&db, &path).unwrap();
        prop_assert_eq!(load_dataset(&path, DatasetFormat::JsonLines).unwrap(), db);
    }
}

/// Pool of `n` distinct sentences for each of three images.
fn pair_count_db(n: usize) -> Dataset {
    let images = (0..3)
        .map(|i| {
            let texts: Vec<String> = (0..n)
                .map(|k| format!("g{i}w{} g{i}w{}", k % 5, (k / 5) % 5))
                .collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            ImageRecord::new(&format!("img{i}"), "g0w0", &refs).unwrap()
        })
        .collect();
    Dataset::new("pairs", images, None).unwrap()
}

#[test]
fn pair_counts_follow_the_closed_form() {
    let lex = &vocab().lexicon;
    for n in 2..=60 {
        let db = pair_count_db(n);
        let tfidf = TfIdfModel::fit_iter(
            db.images
                .iter()
                .flat_map(|i| i.pool.iter().map(|d| d.tokens.as_slice())),
        )
        .unwrap();
        let pairs = build_training_pairs(&db.images[1], &db, lex, &tfidf, n as u64).unwrap();
        let pos = pairs.iter().filter(|p| p.label).count();
        let neg = pairs.len() - pos;
        assert_eq!(pos, n * (n - 1) / 2, "N = {n}");
        assert_eq!(neg, n * (n - 1).div_ceil(2), "N = {n}");
        assert_eq!(neg, n * negatives_per_sentence(n));
    }
    assert_eq!(
        (negatives_per_sentence(5), negatives_per_sentence(50)),
        (2, 25)
    );
}

/// Floyd-Warshall over a random graph versus the lexicon's search.
#[test]
fn lexicon_distances_match_all_pairs_oracle() {
    use rand::Rng;
    for trial in 0..20u64 {
        let mut rng = imgspec_core::seed::rng(trial, &[]);
        let n = rng.random_range(2..25);
        let mut edges = vec![Vec::new(); n];
        let mut dist = vec![vec![u32::MAX; n]; n];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = 0;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(0.1) {
                    edges[i].push(format!("s{j}"));
                    dist[i][j] = 1;
                    dist[j][i] = 1;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if dist[i][k] != u32::MAX && dist[k][j] != u32::MAX {
                        dist[i][j] = dist[i][j].min(dist[i][k] + dist[k][j]);
                    }
                }
            }
        }
        // lemma `w{i}` names synset i; lemma `shared` names every third synset
        let records = (0..n)
            .map(|i| {
                let mut lemmas = vec![format!("w{i}")];
                if i % 3 == 0 {
                    lemmas.push("shared".into());
                }
                Synset::new(&format!("s{i}"), lemmas, &edges[i])
            })
            .collect();
        let lex = Lexicon::from_records(records).unwrap();
        let sim = |d: u32| {
            if d == u32::MAX {
                0.0
            } else {
                1.0 / (1.0 + d as f64)
            }
        };
        let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
        for i in 0..n {
            for j in 0..n {
                let expected = sim(dist[i][j]);
                assert_eq!(
                    lex.sense_similarity(&format!("s{i}"), &format!("s{j}"))
                        .unwrap(),
                    expected
                );
                assert_eq!(
                    lex.word_similarity(&format!("w{i}"), &format!("w{j}")),
                    expected
                );
                cache.insert((i, j), expected);
            }
            let best = (0..n)
                .step_by(3)
                .map(|j| cache[&(i, j)])
                .fold(0.0, f64::max);
            assert_eq!(
                lex.word_similarity(&format!("w{i}"), "shared"),
                best,
                "trial {trial}, word {i}"
            );
        }
    }
}
