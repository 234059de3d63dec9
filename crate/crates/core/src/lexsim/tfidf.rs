use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Document frequencies over a fitted corpus and the smoothed inverse
/// document frequency `ln((1 + |D|) / (1 + df)) + 1`.
///
/// Terms never seen while fitting get `df = 0` under the same formula, so
/// every term has a positive weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    doc_count: usize,
    df: HashMap<String, usize>,
    idf: HashMap<String, f64>,
}

impl TfIdfModel {
    pub fn fit<D: AsRef<[String]>>(documents: &[D]) -> Result<Self> {
        Self::fit_iter(documents.iter().map(|d| d.as_ref()))
    }

    pub fn fit_iter<'a, I>(documents: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut doc_count = 0;
        for doc in documents {
            doc_count += 1;
            let distinct: HashSet<&String> = doc.iter().collect();
            for term in distinct {
                *df.entry(term.clone()).or_insert(0) += 1;
            }
        }
        if doc_count == 0 {
            return Err(Error::EmptyCorpus);
        }
        let idf = df
            .iter()
            .map(|(t, &n)| (t.clone(), smoothed_idf(doc_count, n)))
            .collect();
        Ok(TfIdfModel { doc_count, df, idf })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        self.idf
            .get(term)
            .copied()
            .unwrap_or_else(|| smoothed_idf(self.doc_count, 0))
    }

    pub fn vocabulary_len(&self) -> usize {
        self.df.len()
    }

    /// Distinct terms of `tokens` in first-occurrence order, each weighted by
    /// `count × idf`.
    pub fn weights(&self, tokens: &[String]) -> Vec<(String, f64)> {
        let mut order: Vec<&String> = Vec::new();
        let mut counts: HashMap<&String, usize> = HashMap::new();
        for t in tokens {
            let c = counts.entry(t).or_insert(0);
            if *c == 0 {
                order.push(t);
            }
            *c += 1;
        }
        order
            .into_iter()
            .map(|t| (t.clone(), counts[t] as f64 * self.idf(t)))
            .collect()
    }
}

fn smoothed_idf(doc_count: usize, df: usize) -> f64 {
    ((1.0 + doc_count as f64) / (1.0 + df as f64)).ln() + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn idf_formula_cases() {
        let m =
            TfIdfModel::fit(&[doc(&["dog", "cat"]), doc(&["dog"]), doc(&["dog", "dog"])]).unwrap();
        assert_eq!(m.idf("dog"), 1.0);
        assert_eq!(m.df("dog"), 3);
        assert!((m.idf("horse") - 2.386_294_361_119_890_6).abs() < 1e-12);
        assert!((m.idf("cat") - ((4.0_f64 / 2.0).ln() + 1.0)).abs() < 1e-15);

        let single = TfIdfModel::fit(&[doc(&["dog"])]).unwrap();
        assert_eq!(single.idf("dog"), 1.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let empty: Vec<Vec<String>> = Vec::new();
        assert!(matches!(TfIdfModel::fit(&empty), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn weights_count_terms() {
        let m = TfIdfModel::fit(&[doc(&["dog"])]).unwrap();
        let w = m.weights(&doc(&["dog", "cat", "dog"]));
        assert_eq!(w[0], ("dog".to_string(), 2.0));
        assert_eq!(w[1].0, "cat");
        assert!((w[1].1 - (2.0_f64.ln() + 1.0)).abs() < 1e-15);
    }
}
