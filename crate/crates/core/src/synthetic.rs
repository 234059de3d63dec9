//! Seeded synthetic corpora for tests, demos and benchmarks.
//!
//! Words are named `g{group}w{index}`. The taxonomy gives every word its own
//! synset under a per-group hub, with all hubs under one root, so two words
//! of a group are at distance 2 (similarity 1/3) and two words of different
//! groups at distance 4 (similarity 1/5).

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, ImageRecord};
use crate::lexsim::{Lexicon, Synset};
use crate::{seed, Result};

/// Word groups and their taxonomy.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    pub groups: Vec<Vec<String>>,
    pub lexicon: Lexicon,
}

pub fn word(group: usize, index: usize) -> String {
    format!("g{group}w{index}")
}

pub fn vocabulary(n_groups: usize, words_per_group: usize) -> Vocabulary {
    let mut records = vec![Synset::new("root", Vec::<&str>::new(), Vec::<&str>::new())];
    let mut groups = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        let hub = format!("hub{g}");
        records.push(Synset::new(&hub, Vec::<&str>::new(), ["root"]));
        let words: Vec<String> = (0..words_per_group).map(|k| word(g, k)).collect();
        for w in &words {
            records.push(Synset::new(&format!("{w}.n"), [w], [&hub]));
        }
        groups.push(words);
    }
    let lexicon = Lexicon::from_records(records).expect("generated taxonomy is valid");
    Vocabulary { groups, lexicon }
}

pub fn sentence(rng: &mut ChaCha8Rng, words: &[String], len: usize) -> String {
    (0..len)
        .map(|_| words.choose(rng).expect("non-empty word list").as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Shape of [`retrieval_dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalDesign {
    pub n_specific: usize,
    pub n_ambiguous: usize,
    pub pool_size: usize,
    /// Words per sentence.
    pub sentence_len: usize,
    /// Probability that a word of a specific image's sentence is replaced
    /// by a random word of its group.
    pub perturbation: f64,
    /// Words of an ambiguous sentence drawn from the image's own group; the
    /// rest come from a vocabulary shared by all ambiguous images.
    pub own_words: usize,
}

impl Default for RetrievalDesign {
    fn default() -> Self {
        RetrievalDesign {
            n_specific: 20,
            n_ambiguous: 20,
            pool_size: 20,
            sentence_len: 6,
            perturbation: 0.15,
            own_words: 2,
        }
    }
}

/// A database where half of the images are described consistently and half
/// inconsistently. Specific image `i` has a fixed core sentence that every
/// description repeats up to small perturbations; ambiguous image `i` is
/// described by a few words of its own group mixed with random words of a
/// shared vocabulary. Each image's reference is drawn like its pool
/// sentences. Image ids are `spec{i}` and `amb{i}`; the specific images
/// carry the annotation `specific = 1`.
pub fn retrieval_dataset(design: &RetrievalDesign, seed: u64) -> Result<(Dataset, Lexicon)> {
    let n_images = design.n_specific + design.n_ambiguous;
    let vocab = vocabulary(n_images + 1, 12);
    let shared = &vocab.groups[n_images];
    let mut images = Vec::with_capacity(n_images);
    for i in 0..n_images {
        let mut rng = seed::rng(seed, &[i as u64]);
        let own = &vocab.groups[i];
        let specific = i < design.n_specific;
        let core: Vec<&String> = (0..design.sentence_len)
            .map(|k| &own[k % own.len()])
            .collect();
        let draw = |rng: &mut ChaCha8Rng| -> String {
            if specific {
                core.iter()
                    .map(|w| {
                        if rng.random_bool(design.perturbation) {
                            own.choose(rng).expect("non-empty group").as_str()
                        } else {
                            w.as_str()
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            } else {
                let mut parts = vec![sentence(rng, own, design.own_words)];
                if design.sentence_len > design.own_words {
                    parts.push(sentence(
                        rng,
                        shared,
                        design.sentence_len - design.own_words,
                    ));
                }
                parts.join(" ")
            }
        };
        let reference = draw(&mut rng);
        let pool: Vec<String> = (0..design.pool_size).map(|_| draw(&mut rng)).collect();
        let pool: Vec<&str> = pool.iter().map(String::as_str).collect();
        let id = if specific {
            format!("spec{i}")
        } else {
            format!("amb{}", i - design.n_specific)
        };
        images.push(
            ImageRecord::new(&id, &reference, &pool)?
                .with_annotation("specific", if specific { 1.0 } else { 0.0 }),
        );
    }
    Ok((
        Dataset::new("synthetic-retrieval", images, None)?,
        vocab.lexicon,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taxonomy_distances() {
        let v = vocabulary(3, 4);
        assert_eq!(v.lexicon.word_similarity("g0w1", "g0w2"), 1.0 / 3.0);
        assert_eq!(v.lexicon.word_similarity("g0w1", "g2w3"), 0.2);
    }

    #[test]
    fn dataset_shape_is_reproducible() {
        let design = RetrievalDesign::default();
        let (a, _) = retrieval_dataset(&design, 4).unwrap();
        let (b, _) = retrieval_dataset(&design, 4).unwrap();
        assert_eq!(a.len(), 40);
        assert_eq!(a.pool_size(), 20);
        assert_eq!(a.images[0].pool, b.images[0].pool);
        assert_eq!(a.images[25].reference, b.images[25].reference);
    }
}
