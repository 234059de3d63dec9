//! Evaluation and correlation analyses.

mod annotations;
mod consistency;
mod correlation;
mod evaluation;
mod experiment;
mod importance;

pub use annotations::{correlate_annotations, AnnotationCorrelation, LENGTH_STD, MEAN_LENGTH};
pub use consistency::{split_half_consistency, SplitHalf};
pub use correlation::{average_ranks, pearson, spearman, spearman_test, Correlation};
pub use evaluation::{
    evaluate_ranks, evaluate_retrieval, read_target_ranks, target_rank, target_rank_with_ties,
    write_target_ranks, EvalReport, Method, TargetRank,
};
pub use experiment::{
    run_retrieval, training_sentence_curve, HeldOutSplit, Query, RetrievalRun, TrainingCurve,
    PAIR_SEED_TAG,
};
pub use importance::{
    category_importance, category_importance_analysis, CategoryImportance, ImportanceAnalysis,
    MIN_CATEGORY_IMAGES,
};

use serde::{Deserialize, Serialize};

/// Mean and standard error of one x position of a repeated experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl CurvePoint {
    pub fn from_samples(x: usize, samples: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = samples.into_iter().collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let stderr = if v.len() > 1 {
            let var = v.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        CurvePoint { x, mean, stderr }
    }
}

/// Writes `x,mean,stderr` rows for external plotting.
pub fn write_curve(points: &[CurvePoint], path: impl AsRef<std::path::Path>) -> crate::Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| crate::Error::io(path, e))
}
