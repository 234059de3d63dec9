//! Per-image specificity: the mean similarity over all pairs of an image's
//! descriptions, judged either by people or by [`crate::lexsim`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Description, HumanRating, MAX_RATING, MIN_RATING};
use crate::lexsim::{Lexicon, SentenceProfile, TfIdfModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    Human,
    Automated,
}

impl fmt::Display for ScoreSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreSource::Human => "human",
            ScoreSource::Automated => "automated",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecificityScore {
    pub image_id: String,
    pub value: f64,
    pub source: ScoreSource,
    pub n_sentences: usize,
    /// Number of human ratings averaged; 0 for automated scores.
    pub n_ratings: usize,
}

/// Mean sentence similarity over all `C(N, 2)` unordered pairs of `pool`.
pub fn automated_specificity(
    pool: &[Description],
    lexicon: &Lexicon,
    tfidf: &TfIdfModel,
) -> Result<SpecificityScore> {
    if pool.len() < 2 {
        return Err(Error::PoolTooSmall {
            image: pool.first().map(|d| d.image_id.clone()).unwrap_or_default(),
            size: pool.len(),
        });
    }
    let profiles: Vec<SentenceProfile> = pool
        .iter()
        .map(|d| SentenceProfile::new(&d.tokens, lexicon, tfidf))
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..profiles.len() {
        for b in (a + 1)..profiles.len() {
            total += profiles[a].similarity(&profiles[b], lexicon);
            pairs += 1;
        }
    }
    Ok(SpecificityScore {
        image_id: pool[0].image_id.clone(),
        value: total / pairs as f64,
        source: ScoreSource::Automated,
        n_sentences: pool.len(),
        n_ratings: 0,
    })
}

/// Rescales a 1-10 rating onto `[0, 1]`.
pub fn rescale_rating(rating: u8) -> f64 {
    (rating - MIN_RATING) as f64 / (MAX_RATING - MIN_RATING) as f64
}

/// Average rescaled rating over every pair and subject of one image.
///
/// Incomplete designs are averaged over the ratings that exist.
pub fn human_specificity(ratings: &[HumanRating]) -> Result<SpecificityScore> {
    let first = ratings
        .first()
        .ok_or_else(|| Error::InvalidArgument("no ratings given".into()))?;
    if let Some(other) = ratings.iter().find(|r| r.image_id != first.image_id) {
        return Err(Error::InvalidArgument(format!(
            "ratings mix images `{}` and `{}`",
            first.image_id, other.image_id
        )));
    }
    let sum: f64 = ratings.iter().map(|r| rescale_rating(r.rating)).sum();
    let sentences = ratings
        .iter()
        .flat_map(|r| [r.idx_a, r.idx_b])
        .max()
        .map_or(0, |m| m + 1);
    Ok(SpecificityScore {
        image_id: first.image_id.clone(),
        value: sum / ratings.len() as f64,
        source: ScoreSource::Human,
        n_sentences: sentences.max(2),
        n_ratings: ratings.len(),
    })
}

/// Human specificity for every image that has ratings, in first-seen order.
pub fn human_specificity_by_image(ratings: &[HumanRating]) -> Result<Vec<SpecificityScore>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: std::collections::HashMap<&str, Vec<HumanRating>> = Default::default();
    for r in ratings {
        let g = groups.entry(r.image_id.as_str()).or_default();
        if g.is_empty() {
            order.push(&r.image_id);
        }
        g.push(r.clone());
    }
    order
        .into_iter()
        .map(|id| human_specificity(&groups[id]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram over `[0, 1]`; the last bin includes 1.
pub fn specificity_histogram(
    scores: &[SpecificityScore],
    n_bins: usize,
) -> Result<Vec<HistogramBin>> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be at least 1".into()));
    }
    let width = 1.0 / n_bins as f64;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin {
            lo: i as f64 * width,
            hi: if i + 1 == n_bins {
                1.0
            } else {
                (i + 1) as f64 * width
            },
            count: 0,
        })
        .collect();
    for s in scores {
        let v = s.value.clamp(0.0, 1.0);
        let i = ((v * n_bins as f64) as usize).min(n_bins - 1);
        bins[i].count += 1;
    }
    Ok(bins)
}

pub fn write_scores(scores: &[SpecificityScore], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for s in scores {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<SpecificityScore>> {
    let mut rdr = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for (n, row) in rdr.deserialize::<SpecificityScore>().enumerate() {
        out.push(row.map_err(|e| Error::Malformed {
            line: n + 2,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexsim::{sentence_similarity, Synset};

    fn rating(a: usize, b: usize, subject: &str, rating: u8) -> HumanRating {
        HumanRating {
            image_id: "i".into(),
            idx_a: a,
            idx_b: b,
            subject: subject.into(),
            rating,
        }
    }

    fn lexicon() -> Lexicon {
        Lexicon::from_records(vec![
            Synset::new("canine", ["dog", "hound"], ["animal"]),
            Synset::new("animal", ["animal"], ["feline"]),
            Synset::new("feline", ["cat"], Vec::<&str>::new()),
        ])
        .unwrap()
    }

    fn pool(texts: &[&str]) -> Vec<Description> {
        texts
            .iter()
            .map(|t| Description::new("i", *t).unwrap())
            .collect()
    }

    #[test]
    fn human_examples() {
        let all10: Vec<_> = (0..3).map(|s| rating(0, 1, &s.to_string(), 10)).collect();
        assert_eq!(human_specificity(&all10).unwrap().value, 1.0);
        let all1: Vec<_> = (0..3).map(|s| rating(0, 1, &s.to_string(), 1)).collect();
        assert_eq!(human_specificity(&all1).unwrap().value, 0.0);
        let mixed = vec![rating(0, 1, "a", 10), rating(0, 1, "b", 1)];
        let s = human_specificity(&mixed).unwrap();
        assert_eq!(s.value, 0.5);
        assert_eq!(s.n_ratings, 2);
        assert_eq!(s.source, ScoreSource::Human);
    }

    #[test]
    fn human_errors() {
        assert!(human_specificity(&[]).is_err());
        let mut other = rating(0, 1, "a", 3);
        other.image_id = "j".into();
        assert!(human_specificity(&[rating(0, 1, "a", 3), other]).is_err());
    }

    #[test]
    fn automated_examples() {
        let lex = lexicon();
        let p = pool(&["the dog barks", "the dog barks", "the dog barks"]);
        let tfidf = TfIdfModel::fit_iter(p.iter().map(|d| d.tokens.as_slice())).unwrap();
        assert_eq!(automated_specificity(&p, &lex, &tfidf).unwrap().value, 1.0);

        let two = pool(&["big dog", "small cat"]);
        let s = automated_specificity(&two, &lex, &tfidf).unwrap();
        assert_eq!(s.value, sentence_similarity(&two[0], &two[1], &lex, &tfidf));
        assert_eq!(s.n_sentences, 2);

        assert!(automated_specificity(&two[..1], &lex, &tfidf).is_err());
    }

    #[test]
    fn histogram_cases() {
        let score = |v: f64| SpecificityScore {
            image_id: String::new(),
            value: v,
            source: ScoreSource::Automated,
            n_sentences: 2,
            n_ratings: 0,
        };
        let bins = specificity_histogram(&[score(0.25), score(0.75)], 2).unwrap();
        assert_eq!(bins.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 1]);
        let edges = specificity_histogram(&[score(0.0), score(0.5), score(1.0)], 2).unwrap();
        assert_eq!(
            edges.iter().map(|b| b.count).collect::<Vec<_>>(),
            vec![1, 2]
        );
        let empty = specificity_histogram(&[], 4).unwrap();
        assert!(empty.iter().all(|b| b.count == 0));
        assert!(specificity_histogram(&[], 0).is_err());
    }

    #[test]
    fn scores_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let scores = vec![SpecificityScore {
            image_id: "a".into(),
            value: 0.123456789,
            source: ScoreSource::Human,
            n_sentences: 5,
            n_ratings: 30,
        }];
        write_scores(&scores, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("image_id,value,source,n_sentences,n_ratings\n"));
        assert_eq!(read_scores(&p).unwrap(), scores);
    }
}
