use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::spearman;
use crate::corpus::HumanRating;
use crate::specificity::human_specificity;
use crate::{seed, Error, Result};

/// Correlation of per-image specificity between two disjoint groups of
/// subjects, for each split and on average.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitHalf {
    pub mean_rho: f64,
    pub per_split: Vec<f64>,
    pub n_images: usize,
}

/// Split `k` puts one subject of every image in one part and the remaining
/// subjects in the other, then correlates the two per-image specificities
/// across images.
///
/// Each image's subjects are sorted by name and shuffled once with
/// `seed::rng(seed, [image])`, where images are indexed in id order; split
/// `k` singles out subject `k mod m` of that order. With 3 subjects and 3
/// splits every subject is singled out exactly once.
pub fn split_half_consistency(
    ratings: &[HumanRating],
    n_splits: usize,
    seed: u64,
) -> Result<SplitHalf> {
    if n_splits == 0 {
        return Err(Error::InvalidArgument("n_splits must be at least 1".into()));
    }
    let mut by_image: BTreeMap<&str, BTreeMap<&str, Vec<HumanRating>>> = BTreeMap::new();
    for r in ratings {
        by_image
            .entry(&r.image_id)
            .or_default()
            .entry(&r.subject)
            .or_default()
            .push(r.clone());
    }
    if by_image.len() < 2 {
        return Err(Error::TooFewImages {
            required: 2,
            found: by_image.len(),
        });
    }
    let mut orders: Vec<Vec<&Vec<HumanRating>>> = Vec::with_capacity(by_image.len());
    for (i, (image, subjects)) in by_image.iter().enumerate() {
        if subjects.len() < 2 {
            return Err(Error::InsufficientSubjects {
                image: image.to_string(),
                found: subjects.len(),
            });
        }
        let mut order: Vec<&Vec<HumanRating>> = subjects.values().collect();
        order.shuffle(&mut seed::rng(seed, &[i as u64]));
        orders.push(order);
    }

    let mut per_split = Vec::with_capacity(n_splits);
    for k in 0..n_splits {
        let mut one = Vec::with_capacity(orders.len());
        let mut rest = Vec::with_capacity(orders.len());
        for order in &orders {
            let single = k % order.len();
            one.push(human_specificity(order[single])?.value);
            let others: Vec<HumanRating> = order
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != single)
                .flat_map(|(_, r)| r.iter().cloned())
                .collect();
            rest.push(human_specificity(&others)?.value);
        }
        per_split.push(spearman(&one, &rest)?);
    }
    Ok(SplitHalf {
        mean_rho: per_split.iter().sum::<f64>() / n_splits as f64,
        per_split,
        n_images: orders.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rating(image: &str, subject: &str, a: usize, b: usize, r: u8) -> HumanRating {
        HumanRating {
            image_id: image.into(),
            idx_a: a,
            idx_b: b,
            subject: subject.into(),
            rating: r,
        }
    }

    #[test]
    fn identical_subjects_agree_perfectly() {
        let mut ratings = Vec::new();
        for (i, level) in [2u8, 5, 9, 4].iter().enumerate() {
            let image = format!("img{i}");
            for s in ["s1", "s2", "s3"] {
                ratings.push(rating(&image, s, 0, 1, *level));
                ratings.push(rating(&image, s, 0, 2, level + 1));
                ratings.push(rating(&image, s, 1, 2, *level));
            }
        }
        let out = split_half_consistency(&ratings, 3, 11).unwrap();
        assert_eq!(out.per_split.len(), 3);
        assert!((out.mean_rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_subject_image_is_rejected() {
        let ratings = vec![
            rating("a", "s1", 0, 1, 3),
            rating("a", "s2", 0, 1, 4),
            rating("b", "s1", 0, 1, 5),
        ];
        assert!(matches!(
            split_half_consistency(&ratings, 1, 0),
            Err(Error::InsufficientSubjects { found: 1, .. })
        ));
    }
}
