use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::retrieval::Ranking;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    GtSpec,
    PredSpec,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Baseline => "baseline",
            Method::GtSpec => "gt_spec",
            Method::PredSpec => "pred_spec",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" | "bl" => Ok(Method::Baseline),
            "gt" | "gt_spec" | "gt-spec" => Ok(Method::GtSpec),
            "pred" | "pred_spec" | "p-spec" | "p_spec" => Ok(Method::PredSpec),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Target rank of one query under one method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRank {
    pub query_id: String,
    pub target: String,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub n_queries: usize,
    pub mean_rank: f64,
    /// Share of queries, in percent, where the method's target rank is no
    /// worse than the baseline's.
    pub pct_meet_or_beat_baseline: f64,
    /// `(K, pct)`: share of queries beating the baseline by at least `K` ranks.
    pub margin_curve: Vec<(usize, f64)>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method: {}", self.method)?;
        writeln!(f, "queries: {}", self.n_queries)?;
        writeln!(f, "mean_rank: {:.4}", self.mean_rank)?;
        writeln!(
            f,
            "pct_meet_or_beat_baseline: {:.2}",
            self.pct_meet_or_beat_baseline
        )?;
        write!(f, "margin_curve:")?;
        for (k, pct) in &self.margin_curve {
            write!(f, " {k}:{pct:.2}")?;
        }
        writeln!(f)
    }
}

/// 1-indexed rank of `target` under descending `scores` with ascending-id
/// tie-break, without sorting.
pub fn target_rank(scores: &[f64], ids: &[&str], target: usize) -> usize {
    let (ts, tid) = (scores[target], ids[target]);
    1 + scores
        .iter()
        .zip(ids)
        .filter(|&(&s, &id)| s.total_cmp(&ts).then_with(|| tid.cmp(id)).is_gt())
        .count()
}

/// [`target_rank`] with equal scores ordered by descending `ties`, matching
/// [`Ranking::from_scores_with_ties`].
pub fn target_rank_with_ties(scores: &[f64], ties: &[f64], ids: &[&str], target: usize) -> usize {
    let (ts, tt, tid) = (scores[target], ties[target], ids[target]);
    1 + scores
        .iter()
        .zip(ties)
        .zip(ids)
        .filter(|&((&s, &t), &id)| {
            s.total_cmp(&ts)
                .then_with(|| t.total_cmp(&tt))
                .then_with(|| tid.cmp(id))
                .is_gt()
        })
        .count()
}

/// Report from per-query target ranks, compared with the baseline's ranks
/// for the same queries.
pub fn evaluate_ranks(
    method: Method,
    ranks: &[TargetRank],
    baseline: &[TargetRank],
) -> Result<EvalReport> {
    if ranks.is_empty() {
        return Err(Error::InvalidArgument("no queries to evaluate".into()));
    }
    let base: HashMap<&str, usize> = baseline
        .iter()
        .map(|r| (r.query_id.as_str(), r.rank))
        .collect();
    let mut margins = Vec::with_capacity(ranks.len());
    for r in ranks {
        let b = *base.get(r.query_id.as_str()).ok_or_else(|| {
            Error::InvalidArgument(format!("query `{}` has no baseline rank", r.query_id))
        })?;
        margins.push(b as i64 - r.rank as i64);
    }
    let n = ranks.len() as f64;
    let mean_rank = ranks.iter().map(|r| r.rank as f64).sum::<f64>() / n;
    let meet = margins.iter().filter(|&&m| m >= 0).count() as f64;
    let max_margin = margins.iter().copied().max().unwrap_or(0).max(1) as usize;
    let margin_curve = (1..=max_margin)
        .map(|k| {
            let beat = margins.iter().filter(|&&m| m >= k as i64).count() as f64;
            (k, 100.0 * beat / n)
        })
        .collect();
    Ok(EvalReport {
        method,
        n_queries: ranks.len(),
        mean_rank,
        pct_meet_or_beat_baseline: 100.0 * meet / n,
        margin_curve,
    })
}

fn ranks_of(rankings: &[Ranking], targets: &HashMap<String, String>) -> Result<Vec<TargetRank>> {
    rankings
        .iter()
        .map(|r| {
            let target = targets.get(&r.query_id).ok_or_else(|| {
                Error::InvalidArgument(format!("query `{}` has no target", r.query_id))
            })?;
            let rank = r.rank_of(target).ok_or_else(|| Error::TargetMissing {
                query: r.query_id.clone(),
                target: target.clone(),
            })?;
            Ok(TargetRank {
                query_id: r.query_id.clone(),
                target: target.clone(),
                rank,
            })
        })
        .collect()
}

pub fn evaluate_retrieval(
    method: Method,
    rankings: &[Ranking],
    targets: &HashMap<String, String>,
    baseline_rankings: &[Ranking],
) -> Result<EvalReport> {
    let ranks = ranks_of(rankings, targets)?;
    let base = ranks_of(baseline_rankings, targets)?;
    evaluate_ranks(method, &ranks, &base)
}

pub fn write_target_ranks(ranks: &[TargetRank], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in ranks {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_target_ranks(path: impl AsRef<Path>) -> Result<Vec<TargetRank>> {
    let mut rdr = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for (n, row) in rdr.deserialize::<TargetRank>().enumerate() {
        out.push(row.map_err(|e| Error::Malformed {
            line: n + 2,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
