//! Ranking a database of described images against a query sentence.
//!
//! The baseline sorts images by the similarity between the query and each
//! image's reference description. The specificity-aware rankings pass that
//! similarity through a per-image logistic model, so that a specific image
//! needs a close match to rank high while an ambiguous one does not.

mod logistic;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Description, ImageRecord};
use crate::lexsim::{Lexicon, SentenceProfile, Similarity, TfIdfModel};
use crate::{seed, Error, Result};

pub use logistic::{fit_logistic, sigmoid, LogisticFit, GRADIENT_TOLERANCE, L2_PENALTY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    GroundTruth,
    Predicted,
    Constant,
}

impl fmt::Display for ParamSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamSource::GroundTruth => "ground_truth",
            ParamSource::Predicted => "predicted",
            ParamSource::Constant => "constant",
        })
    }
}

/// Intercept and slope of one image's logistic relevance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LRParams {
    pub image_id: String,
    pub beta0: f64,
    pub beta1: f64,
    pub source: ParamSource,
}

impl LRParams {
    pub fn new(image_id: impl Into<String>, beta0: f64, beta1: f64, source: ParamSource) -> Self {
        LRParams {
            image_id: image_id.into(),
            beta0,
            beta1,
            source,
        }
    }

    pub fn relevance(&self, sim: f64) -> f64 {
        sigmoid(self.beta0 + self.beta1 * sim)
    }
}

pub type ParamMap = HashMap<String, LRParams>;

pub fn param_map(params: impl IntoIterator<Item = LRParams>) -> ParamMap {
    params
        .into_iter()
        .map(|p| (p.image_id.clone(), p))
        .collect()
}

/// Same parameters for every image of `db`.
pub fn constant_params(db: &Dataset, beta0: f64, beta1: f64) -> ParamMap {
    param_map(
        db.images
            .iter()
            .map(|i| LRParams::new(&i.id, beta0, beta1, ParamSource::Constant)),
    )
}

/// A similarity with its label: `true` when both sentences describe the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPair {
    pub sim: f64,
    pub label: bool,
}

impl LabeledPair {
    pub(crate) fn sign(&self) -> f64 {
        if self.label {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedImage {
    pub image_id: String,
    pub relevance: f64,
}

/// Database images by descending relevance, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub query_id: String,
    pub entries: Vec<RankedImage>,
}

impl Ranking {
    pub fn from_scores(query_id: impl Into<String>, scores: Vec<RankedImage>) -> Self {
        let ties = vec![0.0; scores.len()];
        Self::from_scores_with_ties(query_id, scores, &ties)
    }

    /// Like [`Ranking::from_scores`], but equal relevances are ordered by
    /// descending `ties[i]` before falling back to the id.
    pub fn from_scores_with_ties(
        query_id: impl Into<String>,
        scores: Vec<RankedImage>,
        ties: &[f64],
    ) -> Self {
        assert_eq!(scores.len(), ties.len(), "one tie-break value per entry");
        let mut keyed: Vec<(RankedImage, f64)> =
            scores.into_iter().zip(ties.iter().copied()).collect();
        keyed.sort_by(|(a, ta), (b, tb)| {
            b.relevance
                .total_cmp(&a.relevance)
                .then_with(|| tb.total_cmp(ta))
                .then_with(|| a.image_id.cmp(&b.image_id))
        });
        Ranking {
            query_id: query_id.into(),
            entries: keyed.into_iter().map(|(e, _)| e).collect(),
        }
    }

    /// 1-indexed position of `image_id`.
    pub fn rank_of(&self, image_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.image_id == image_id)
            .map(|p| p + 1)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.image_id.as_str()).collect()
    }
}

/// Reference descriptions of a database, profiled once for many queries.
pub struct Retriever<'a> {
    db: &'a Dataset,
    sim: Similarity<'a>,
    references: Vec<SentenceProfile>,
}

impl<'a> Retriever<'a> {
    pub fn new(db: &'a Dataset, lexicon: &'a Lexicon, tfidf: &'a TfIdfModel) -> Result<Self> {
        if db.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        let sim = Similarity::new(lexicon, tfidf);
        let references = db
            .images
            .iter()
            .map(|i| sim.profile(&i.reference))
            .collect();
        Ok(Retriever {
            db,
            sim,
            references,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        self.db
    }

    /// Query-to-reference similarity for every image, in database order.
    pub fn similarities(&self, query: &Description) -> Vec<f64> {
        let q = self.sim.profile(query);
        self.references
            .iter()
            .map(|r| self.sim.profiles(&q, r))
            .collect()
    }

    pub fn baseline(&self, query_id: &str, query: &Description) -> Ranking {
        let sims = self.similarities(query);
        self.rank_scores(query_id, sims)
    }

    pub fn with_params(
        &self,
        query_id: &str,
        query: &Description,
        params: &ParamMap,
    ) -> Result<Ranking> {
        let table = self.param_table(params)?;
        Ok(self.with_param_table(query_id, query, &table))
    }

    /// Params in database order; fails on the first image without params.
    pub fn param_table(&self, params: &ParamMap) -> Result<Vec<LRParams>> {
        self.db
            .images
            .iter()
            .map(|i| {
                params
                    .get(&i.id)
                    .cloned()
                    .ok_or_else(|| Error::MissingParams(i.id.clone()))
            })
            .collect()
    }

    /// Relevances that coincide in floating point are ordered by similarity.
    pub fn with_param_table(
        &self,
        query_id: &str,
        query: &Description,
        table: &[LRParams],
    ) -> Ranking {
        let sims = self.similarities(query);
        let rel = sims
            .iter()
            .zip(table)
            .map(|(&s, p)| p.relevance(s))
            .collect();
        self.rank_scores_with_ties(query_id, rel, &sims)
    }

    fn rank_scores(&self, query_id: &str, scores: Vec<f64>) -> Ranking {
        let ties = vec![0.0; scores.len()];
        self.rank_scores_with_ties(query_id, scores, &ties)
    }

    fn rank_scores_with_ties(&self, query_id: &str, scores: Vec<f64>, ties: &[f64]) -> Ranking {
        let entries = self
            .db
            .images
            .iter()
            .zip(scores)
            .map(|(img, relevance)| RankedImage {
                image_id: img.id.clone(),
                relevance,
            })
            .collect();
        Ranking::from_scores_with_ties(query_id, entries, ties)
    }
}

/// Ranks `db` by raw query-to-reference similarity.
pub fn rank_baseline(
    q: &Description,
    db: &Dataset,
    lexicon: &Lexicon,
    tfidf: &TfIdfModel,
) -> Result<Ranking> {
    Ok(Retriever::new(db, lexicon, tfidf)?.baseline(&q.text, q))
}

/// Ranks `db` by `sigmoid(β0 + β1 · sim(q, r_i))` with per-image params.
pub fn rank_with_params(
    q: &Description,
    db: &Dataset,
    params: &ParamMap,
    lexicon: &Lexicon,
    tfidf: &TfIdfModel,
) -> Result<Ranking> {
    Retriever::new(db, lexicon, tfidf)?.with_params(&q.text, q, params)
}

/// Number of negatives each pool sentence is paired with: `ceil((N − 1) / 2)`.
pub fn negatives_per_sentence(n: usize) -> usize {
    n.saturating_sub(1).div_ceil(2)
}

/// Labeled similarities for image `target` of `pools`.
///
/// Positives are all `C(N, 2)` within-pool pairs. Each pool sentence is then
/// paired with [`negatives_per_sentence`] sentences of other images: an
/// image drawn uniformly among the others, then one of its sentences drawn
/// uniformly, never reusing a partner for the same sentence.
pub fn pairs_from_pools(
    target: usize,
    pools: &[Vec<SentenceProfile>],
    lexicon: &Lexicon,
    seed: u64,
) -> Result<Vec<LabeledPair>> {
    if pools.len() < 2 {
        return Err(Error::TooFewImages {
            required: 2,
            found: pools.len(),
        });
    }
    let own = &pools[target];
    let n = own.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "image {target} has {n} training sentence(s); at least 2 are required"
        )));
    }
    let per_sentence = negatives_per_sentence(n);
    let available: usize = pools
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target)
        .map(|(_, p)| p.len())
        .sum();
    if available < per_sentence {
        return Err(Error::Degenerate(format!(
            "only {available} foreign sentences for {per_sentence} negatives per sentence"
        )));
    }

    let mut pairs = Vec::with_capacity(n * (n - 1) / 2 + n * per_sentence);
    for a in 0..n {
        for b in (a + 1)..n {
            pairs.push(LabeledPair {
                sim: own[a].similarity(&own[b], lexicon),
                label: true,
            });
        }
    }

    let mut rng = seed::rng(seed, &[]);
    let others = pools.len() - 1;
    for sentence in own {
        let mut used: HashSet<(usize, usize)> = HashSet::with_capacity(per_sentence);
        while used.len() < per_sentence {
            let mut j = rng.random_range(0..others);
            if j >= target {
                j += 1;
            }
            if pools[j].is_empty() {
                continue;
            }
            let k = rng.random_range(0..pools[j].len());
            if used.insert((j, k)) {
                pairs.push(LabeledPair {
                    sim: sentence.similarity(&pools[j][k], lexicon),
                    label: false,
                });
            }
        }
    }
    Ok(pairs)
}

/// Training pairs for `record` from the full pools of `db`.
pub fn build_training_pairs(
    record: &ImageRecord,
    db: &Dataset,
    lexicon: &Lexicon,
    tfidf: &TfIdfModel,
    seed: u64,
) -> Result<Vec<LabeledPair>> {
    let target = db
        .images
        .iter()
        .position(|i| i.id == record.id)
        .ok_or_else(|| Error::UnknownImage(record.id.clone()))?;
    let sim = Similarity::new(lexicon, tfidf);
    let pools: Vec<Vec<SentenceProfile>> = db
        .images
        .iter()
        .map(|i| i.pool.iter().map(|d| sim.profile(d)).collect())
        .collect();
    pairs_from_pools(target, &pools, lexicon, seed)
}

/// Fits one image's relevance model to its labeled pairs.
pub fn train_image_lr(image_id: &str, pairs: &[LabeledPair]) -> Result<LRParams> {
    let fit = fit_logistic(pairs, L2_PENALTY)?;
    Ok(LRParams::new(
        image_id,
        fit.beta0,
        fit.beta1,
        ParamSource::GroundTruth,
    ))
}

/// Ground-truth params for every image, from the given per-image training
/// sentences (`pools[i]` belongs to `ids[i]`). Image `i` samples its
/// negatives with `seed::derive(seed, [i])`.
pub fn train_params_from_pools(
    ids: &[&str],
    pools: &[Vec<SentenceProfile>],
    lexicon: &Lexicon,
    seed: u64,
) -> Result<Vec<LRParams>> {
    (0..pools.len())
        .into_par_iter()
        .map(|i| {
            let pairs = pairs_from_pools(i, pools, lexicon, seed::derive(seed, &[i as u64]))?;
            train_image_lr(ids[i], &pairs)
        })
        .collect()
}

/// Ground-truth params for every image of `db`, trained on the full pools.
pub fn train_all_params(
    db: &Dataset,
    lexicon: &Lexicon,
    tfidf: &TfIdfModel,
    seed: u64,
) -> Result<Vec<LRParams>> {
    let sim = Similarity::new(lexicon, tfidf);
    let pools: Vec<Vec<SentenceProfile>> = db
        .images
        .iter()
        .map(|i| i.pool.iter().map(|d| sim.profile(d)).collect())
        .collect();
    let ids: Vec<&str> = db.images.iter().map(|i| i.id.as_str()).collect();
    train_params_from_pools(&ids, &pools, lexicon, seed)
}

pub fn write_params(params: &[LRParams], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for p in params {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_params(path: impl AsRef<Path>) -> Result<Vec<LRParams>> {
    let mut rdr = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for (n, row) in rdr.deserialize::<LRParams>().enumerate() {
        let p = row.map_err(|e| Error::Malformed {
            line: n + 2,
            message: e.to_string(),
        })?;
        if !p.beta0.is_finite() || !p.beta1.is_finite() {
            return Err(Error::Malformed {
                line: n + 2,
                message: format!("non-finite parameters for `{}`", p.image_id),
            });
        }
        out.push(p);
    }
    Ok(out)
}
