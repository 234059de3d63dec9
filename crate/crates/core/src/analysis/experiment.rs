//! Held-out retrieval experiments: queries are pool sentences kept out of
//! every LR and TF-IDF fit, and the target of each query is its own image.

use rand::seq::index::sample;
use rayon::prelude::*;

use super::{
    evaluate_ranks, target_rank, target_rank_with_ties, CurvePoint, EvalReport, Method, TargetRank,
};
use crate::corpus::{held_out_indices, Dataset, Description};
use crate::lexsim::{Lexicon, SentenceProfile, Similarity, TfIdfModel};
use crate::predict::{loocv_predict_params_isolated, SvrHyper};
use crate::retrieval::{train_params_from_pools, LRParams, Retriever};
use crate::{seed, Error, Result};

/// Path component used to derive the LR negative-sampling seed from a
/// master seed, shared by [`run_retrieval`] and [`training_sentence_curve`].
pub const PAIR_SEED_TAG: u64 = 0x5041_4952;

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub target: String,
    pub description: Description,
}

/// Each image's pool split into training sentences and held-out queries.
#[derive(Debug, Clone)]
pub struct HeldOutSplit {
    pub n_train: usize,
    pub train_pools: Vec<Vec<Description>>,
    pub queries: Vec<Query>,
}

impl HeldOutSplit {
    /// Image `i` keeps `n_train` sentences, chosen with `derive(seed, [i])`;
    /// the rest become queries `"{id}#{k}"` targeting it.
    pub fn new(db: &Dataset, n_train: usize, seed: u64) -> Result<Self> {
        let mut train_pools = Vec::with_capacity(db.len());
        let mut queries = Vec::new();
        for (i, img) in db.images.iter().enumerate() {
            let held = held_out_indices(img.pool.len(), n_train, seed::derive(seed, &[i as u64]))?;
            let mut train = Vec::with_capacity(n_train);
            for (k, d) in img.pool.iter().enumerate() {
                if held.binary_search(&k).is_ok() {
                    queries.push(Query {
                        id: format!("{}#{k}", img.id),
                        target: img.id.clone(),
                        description: d.clone(),
                    });
                } else {
                    train.push(d.clone());
                }
            }
            train_pools.push(train);
        }
        Ok(HeldOutSplit {
            n_train,
            train_pools,
            queries,
        })
    }

    /// TF-IDF over the training sentences only.
    pub fn fit_tfidf(&self) -> Result<TfIdfModel> {
        TfIdfModel::fit_iter(
            self.train_pools
                .iter()
                .flat_map(|p| p.iter().map(|d| d.tokens.as_slice())),
        )
    }

    fn profiles(&self, sim: Similarity<'_>) -> Vec<Vec<SentenceProfile>> {
        self.train_pools
            .iter()
            .map(|p| p.iter().map(|d| sim.profile(d)).collect())
            .collect()
    }
}

fn ranks_for(
    retriever: &Retriever<'_>,
    queries: &[Query],
    target_index: &std::collections::HashMap<&str, usize>,
    tables: &[Option<&[LRParams]>],
) -> Vec<Vec<TargetRank>> {
    let ids: Vec<&str> = retriever
        .dataset()
        .images
        .iter()
        .map(|i| i.id.as_str())
        .collect();
    let per_query: Vec<Vec<TargetRank>> = queries
        .par_iter()
        .map(|q| {
            let sims = retriever.similarities(&q.description);
            let t = target_index[q.target.as_str()];
            tables
                .iter()
                .map(|table| {
                    let rank = match table {
                        None => target_rank(&sims, &ids, t),
                        Some(params) => {
                            let rel: Vec<f64> = sims
                                .iter()
                                .zip(*params)
                                .map(|(&s, p)| p.relevance(s))
                                .collect();
                            target_rank_with_ties(&rel, &sims, &ids, t)
                        }
                    };
                    TargetRank {
                        query_id: q.id.clone(),
                        target: q.target.clone(),
                        rank,
                    }
                })
                .collect()
        })
        .collect();
    (0..tables.len())
        .map(|m| per_query.iter().map(|r| r[m].clone()).collect())
        .collect()
}

#[derive(Debug, Clone)]
pub struct RetrievalRun {
    pub baseline: EvalReport,
    pub gt_spec: EvalReport,
    pub pred_spec: Option<EvalReport>,
    pub baseline_ranks: Vec<TargetRank>,
    pub gt_ranks: Vec<TargetRank>,
    pub pred_ranks: Option<Vec<TargetRank>>,
    pub gt_params: Vec<LRParams>,
    pub pred_params: Option<Vec<LRParams>>,
}

/// Baseline and GT-Spec retrieval on `split`, plus P-Spec with
/// leave-one-out predicted params when `predict` is given.
pub fn run_retrieval(
    db: &Dataset,
    lexicon: &Lexicon,
    split: &HeldOutSplit,
    predict: Option<&SvrHyper>,
    seed: u64,
) -> Result<RetrievalRun> {
    if split.queries.is_empty() {
        return Err(Error::InvalidArgument(
            "no held-out queries: n_train must be smaller than the pool".into(),
        ));
    }
    let tfidf = split.fit_tfidf()?;
    let sim = Similarity::new(lexicon, &tfidf);
    let ids: Vec<&str> = db.images.iter().map(|i| i.id.as_str()).collect();
    let pair_seed = seed::derive(seed, &[PAIR_SEED_TAG]);
    let gt_params = train_params_from_pools(&ids, &split.profiles(sim), lexicon, pair_seed)?;
    let pred_params = predict
        .map(|hyper| {
            loocv_predict_params_isolated(db, &split.train_pools, lexicon, hyper, pair_seed)
        })
        .transpose()?;

    let retriever = Retriever::new(db, lexicon, &tfidf)?;
    let target_index = db.index_by_id();
    let mut tables: Vec<Option<&[LRParams]>> = vec![None, Some(&gt_params)];
    if let Some(p) = &pred_params {
        tables.push(Some(p));
    }
    let mut ranks = ranks_for(&retriever, &split.queries, &target_index, &tables).into_iter();
    let baseline_ranks = ranks.next().expect("baseline column");
    let gt_ranks = ranks.next().expect("gt column");
    let pred_ranks = ranks.next();

    let baseline = evaluate_ranks(Method::Baseline, &baseline_ranks, &baseline_ranks)?;
    let gt_spec = evaluate_ranks(Method::GtSpec, &gt_ranks, &baseline_ranks)?;
    let pred_spec = pred_ranks
        .as_ref()
        .map(|r| evaluate_ranks(Method::PredSpec, r, &baseline_ranks))
        .transpose()?;
    Ok(RetrievalRun {
        baseline,
        gt_spec,
        pred_spec,
        baseline_ranks,
        gt_ranks,
        pred_ranks,
        gt_params,
        pred_params,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingCurve {
    pub baseline_mean_rank: f64,
    pub points: Vec<CurvePoint>,
}

impl TrainingCurve {
    /// Smallest sentence count whose mean rank beats the baseline.
    pub fn crossover(&self) -> Option<usize> {
        self.points
            .iter()
            .find(|p| p.mean < self.baseline_mean_rank)
            .map(|p| p.x)
    }
}

/// GT-Spec mean target rank when each image's LR is trained on only
/// `count` of its training sentences, averaged over `n_repeats` random
/// subsets. Subsets keep pool order, so a count equal to the training pool
/// size reproduces [`run_retrieval`]'s GT-Spec result for the same seed.
pub fn training_sentence_curve(
    db: &Dataset,
    lexicon: &Lexicon,
    split: &HeldOutSplit,
    sentence_counts: &[usize],
    n_repeats: usize,
    seed: u64,
) -> Result<TrainingCurve> {
    if let Some(&c) = sentence_counts
        .iter()
        .find(|&&c| c > split.n_train || c < 2)
    {
        return Err(Error::InvalidArgument(format!(
            "sentence count {c} is outside 2..={}",
            split.n_train
        )));
    }
    if n_repeats == 0 || split.queries.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one repeat and one query".into(),
        ));
    }
    let tfidf = split.fit_tfidf()?;
    let sim = Similarity::new(lexicon, &tfidf);
    let full = split.profiles(sim);
    let ids: Vec<&str> = db.images.iter().map(|i| i.id.as_str()).collect();
    let retriever = Retriever::new(db, lexicon, &tfidf)?;
    let target_index = db.index_by_id();
    let pair_seed = seed::derive(seed, &[PAIR_SEED_TAG]);

    let baseline = ranks_for(&retriever, &split.queries, &target_index, &[None]).remove(0);
    let baseline_mean_rank =
        baseline.iter().map(|r| r.rank as f64).sum::<f64>() / baseline.len() as f64;

    let mut points = Vec::with_capacity(sentence_counts.len());
    for (ci, &count) in sentence_counts.iter().enumerate() {
        let mut means = Vec::with_capacity(n_repeats);
        for repeat in 0..n_repeats {
            let pools: Vec<Vec<SentenceProfile>> = full
                .iter()
                .enumerate()
                .map(|(i, pool)| {
                    if count == pool.len() {
                        return pool.clone();
                    }
                    let mut rng = seed::rng(seed, &[repeat as u64, ci as u64, i as u64]);
                    let mut keep = sample(&mut rng, pool.len(), count).into_vec();
                    keep.sort_unstable();
                    keep.into_iter().map(|k| pool[k].clone()).collect()
                })
                .collect();
            let params = train_params_from_pools(&ids, &pools, lexicon, pair_seed)?;
            let ranks =
                ranks_for(&retriever, &split.queries, &target_index, &[Some(&params)]).remove(0);
            means.push(ranks.iter().map(|r| r.rank as f64).sum::<f64>() / ranks.len() as f64);
        }
        points.push(CurvePoint::from_samples(count, means));
    }
    Ok(TrainingCurve {
        baseline_mean_rank,
        points,
    })
}
