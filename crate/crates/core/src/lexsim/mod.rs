//! Lexical similarity between sentences.
//!
//! Sentences are tokenized into lowercase words of at least three
//! characters. Each word contributes its best match against the other
//! sentence: 1 for a verbatim match, otherwise the best shortest-path
//! similarity between any of its senses and any sense of a word on the other
//! side. Contributions are averaged with TF-IDF weights, so the result lies in
//! `[0, 1]` regardless of sentence length.

mod lexicon;
mod tfidf;

pub use lexicon::{load_lexicon, write_lexicon, Lexicon, Synset};
pub use tfidf::TfIdfModel;

use crate::corpus::Description;

/// Minimum token length kept by [`tokenize`].
pub const MIN_TOKEN_LEN: usize = 3;

/// Lowercases `text`, splits on runs of non-alphanumeric characters and keeps
/// tokens of at least [`MIN_TOKEN_LEN`] characters, in order.
pub fn tokenize(text: &str) -> Vec<String> {
    words(text)
        .filter(|w| w.chars().count() >= MIN_TOKEN_LEN)
        .collect()
}

/// All lowercase alphanumeric words of `text`, without the length filter.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    text: String,
    lemma: Option<u32>,
    weight: f64,
}

/// A sentence prepared for repeated similarity computations: its distinct
/// terms, their lexicon entries and their TF-IDF weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceProfile {
    terms: Vec<Term>,
    total_weight: f64,
}

impl SentenceProfile {
    pub fn new(tokens: &[String], lexicon: &Lexicon, tfidf: &TfIdfModel) -> Self {
        let terms: Vec<Term> = tfidf
            .weights(tokens)
            .into_iter()
            .map(|(text, weight)| Term {
                lemma: lexicon.lemma_id(&text),
                text,
                weight,
            })
            .collect();
        let total_weight = terms.iter().map(|t| t.weight).sum();
        SentenceProfile {
            terms,
            total_weight,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn contribution(term: &Term, other: &SentenceProfile, lexicon: &Lexicon) -> f64 {
        let mut best = 0.0_f64;
        for v in &other.terms {
            if term.text == v.text {
                return 1.0;
            }
            if let (Some(a), Some(b)) = (term.lemma, v.lemma) {
                best = best.max(lexicon.lemma_similarity(a, b));
            }
        }
        best
    }

    fn weighted_contributions(&self, other: &SentenceProfile, lexicon: &Lexicon) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * Self::contribution(t, other, lexicon))
            .sum()
    }

    /// Weighted average of all word contributions from both sentences.
    /// Zero when both sentences are empty.
    pub fn similarity(&self, other: &SentenceProfile, lexicon: &Lexicon) -> f64 {
        let denominator = self.total_weight + other.total_weight;
        if denominator <= 0.0 {
            return 0.0;
        }
        let numerator = self.weighted_contributions(other, lexicon)
            + other.weighted_contributions(self, lexicon);
        numerator / denominator
    }
}

/// Contribution of word `word` to its sentence's similarity with `other`.
pub fn word_contribution(word: &str, other: &Description, lexicon: &Lexicon) -> f64 {
    let lemma = lexicon.lemma_id(word);
    let mut best = 0.0_f64;
    for v in &other.tokens {
        if v == word {
            return 1.0;
        }
        if let (Some(a), Some(b)) = (lemma, lexicon.lemma_id(v)) {
            best = best.max(lexicon.lemma_similarity(a, b));
        }
    }
    best
}

/// Automatic similarity between two sentences.
pub fn sentence_similarity(
    a: &Description,
    b: &Description,
    lexicon: &Lexicon,
    tfidf: &TfIdfModel,
) -> f64 {
    token_similarity(&a.tokens, &b.tokens, lexicon, tfidf)
}

pub fn token_similarity(a: &[String], b: &[String], lexicon: &Lexicon, tfidf: &TfIdfModel) -> f64 {
    let pa = SentenceProfile::new(a, lexicon, tfidf);
    let pb = SentenceProfile::new(b, lexicon, tfidf);
    pa.similarity(&pb, lexicon)
}

/// Borrowed lexicon and TF-IDF model, bundled for the retrieval code paths.
#[derive(Debug, Clone, Copy)]
pub struct Similarity<'a> {
    pub lexicon: &'a Lexicon,
    pub tfidf: &'a TfIdfModel,
}

impl<'a> Similarity<'a> {
    pub fn new(lexicon: &'a Lexicon, tfidf: &'a TfIdfModel) -> Self {
        Similarity { lexicon, tfidf }
    }

    pub fn profile(&self, d: &Description) -> SentenceProfile {
        SentenceProfile::new(&d.tokens, self.lexicon, self.tfidf)
    }

    pub fn sentences(&self, a: &Description, b: &Description) -> f64 {
        sentence_similarity(a, b, self.lexicon, self.tfidf)
    }

    pub fn profiles(&self, a: &SentenceProfile, b: &SentenceProfile) -> f64 {
        a.similarity(b, self.lexicon)
    }
}
