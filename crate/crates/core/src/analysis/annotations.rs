use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::spearman_test;
use crate::corpus::{Dataset, ImageRecord};
use crate::lexsim::words;
use crate::specificity::SpecificityScore;
use crate::Error;

/// Derived covariate: mean word count of an image's pool sentences.
pub const MEAN_LENGTH: &str = "mean_sentence_length";
/// Derived covariate: population standard deviation of those word counts.
pub const LENGTH_STD: &str = "sentence_length_std";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationCorrelation {
    pub annotation: String,
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

fn length_stats(img: &ImageRecord) -> (f64, f64) {
    let counts: Vec<f64> = img
        .pool
        .iter()
        .map(|d| words(&d.text).count() as f64)
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Spearman correlation of specificity with every annotation and with the
/// two sentence-length covariates, sorted by rho descending.
///
/// Each correlation uses the images that have both a score and the
/// annotation. Annotations that are constant over those images, or that
/// cover fewer than two of them, are skipped with a warning.
pub fn correlate_annotations(
    db: &Dataset,
    scores: &[SpecificityScore],
) -> Vec<AnnotationCorrelation> {
    let spec: HashMap<&str, f64> = scores
        .iter()
        .map(|s| (s.image_id.as_str(), s.value))
        .collect();
    let scored: Vec<(&ImageRecord, f64)> = db
        .images
        .iter()
        .filter_map(|img| spec.get(img.id.as_str()).map(|&v| (img, v)))
        .collect();

    let mut columns: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    let names: BTreeSet<&String> = scored
        .iter()
        .flat_map(|(img, _)| img.annotations.keys())
        .collect();
    for name in names {
        let (a, s): (Vec<f64>, Vec<f64>) = scored
            .iter()
            .filter_map(|(img, v)| img.annotations.get(name).map(|&a| (a, *v)))
            .unzip();
        columns.push((name.clone(), a, s));
    }
    let stats: Vec<(f64, f64)> = scored.iter().map(|(img, _)| length_stats(img)).collect();
    let s: Vec<f64> = scored.iter().map(|(_, v)| *v).collect();
    columns.push((
        MEAN_LENGTH.into(),
        stats.iter().map(|p| p.0).collect(),
        s.clone(),
    ));
    columns.push((LENGTH_STD.into(), stats.iter().map(|p| p.1).collect(), s));

    let mut out: Vec<AnnotationCorrelation> = columns
        .into_iter()
        .filter_map(|(name, a, s)| match spearman_test(&a, &s) {
            Ok(c) => Some(AnnotationCorrelation {
                annotation: name,
                rho: c.rho,
                p_value: c.p_value,
                n: c.n,
            }),
            Err(Error::ZeroVariance) => {
                log::warn!("skipping `{name}`: constant over the scored images");
                None
            }
            Err(e) => {
                log::warn!("skipping `{name}`: {e}");
                None
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.rho
            .total_cmp(&a.rho)
            .then_with(|| a.annotation.cmp(&b.annotation))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specificity::ScoreSource;

    #[test]
    fn specificity_itself_sorts_first() {
        let values = [0.1, 0.5, 0.3, 0.9, 0.7];
        let mut images = Vec::new();
        let mut scores = Vec::new();
        for (i, &v) in values.iter().enumerate() {
            let long = "word ".repeat(i + 2);
            images.push(
                ImageRecord::new(&format!("i{i}"), "ref", &["two words", &long])
                    .unwrap()
                    .with_annotation("self", v)
                    .with_annotation("flat", 1.0)
                    .with_annotation("anti", -v),
            );
            scores.push(SpecificityScore {
                image_id: format!("i{i}"),
                value: v,
                source: ScoreSource::Human,
                n_sentences: 2,
                n_ratings: 1,
            });
        }
        let db = Dataset::new("t", images, None).unwrap();
        let out = correlate_annotations(&db, &scores);
        assert_eq!(out[0].annotation, "self");
        assert!((out[0].rho - 1.0).abs() < 1e-12);
        assert_eq!(out.last().unwrap().annotation, "anti");
        assert!(out.iter().all(|c| c.annotation != "flat"));
        assert!(out.iter().any(|c| c.annotation == MEAN_LENGTH));
    }
}
