use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;

use super::{spearman_test, Correlation};
use crate::corpus::{Dataset, Description};
use crate::lexsim::Lexicon;
use crate::specificity::SpecificityScore;
use crate::{seed, Error, Result};

/// A category must be annotated on more than this many images.
pub const MIN_CATEGORY_IMAGES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryImportance {
    pub category: String,
    pub n_images: usize,
    /// Mean best match over sentences of images showing the category.
    pub mention_score: f64,
    /// The same statistic over sampled sentences of other images.
    pub background_score: f64,
    pub importance: f64,
}

struct Matcher<'a> {
    lemma: String,
    lexicon: &'a Lexicon,
    cache: HashMap<String, f64>,
}

impl Matcher<'_> {
    fn word(&mut self, w: &str) -> f64 {
        if w == self.lemma {
            return 1.0;
        }
        if let Some(&s) = self.cache.get(w) {
            return s;
        }
        let s = self.lexicon.word_similarity(w, &self.lemma);
        self.cache.insert(w.to_string(), s);
        s
    }

    fn sentence(&mut self, d: &Description) -> f64 {
        d.tokens.iter().map(|t| self.word(t)).fold(0.0, f64::max)
    }
}

/// Images whose annotation for `category` is positive.
fn category_images(db: &Dataset, category: &str) -> Vec<bool> {
    db.images
        .iter()
        .map(|img| img.annotations.get(category).is_some_and(|&v| v > 0.0))
        .collect()
}

/// How much more strongly descriptions of images showing `category` mention
/// it than descriptions of other images do.
///
/// Every sentence scores its best word match to the category name (1 for
/// the name itself, otherwise the lexicon's word similarity). The
/// background term averages an equal number of sentences drawn from the
/// other images by `seed`, without replacement whenever enough exist.
pub fn category_importance(
    db: &Dataset,
    category: &str,
    lexicon: &Lexicon,
    seed: u64,
) -> Result<CategoryImportance> {
    let present = category_images(db, category);
    let n_images = present.iter().filter(|&&p| p).count();
    if n_images <= MIN_CATEGORY_IMAGES {
        return Err(Error::RareCategory {
            category: category.to_string(),
            found: n_images,
            threshold: MIN_CATEGORY_IMAGES,
        });
    }
    let (inside, outside): (Vec<_>, Vec<_>) = db.images.iter().zip(&present).partition(|(_, &p)| p);
    let inside: Vec<&Description> = inside.iter().flat_map(|(img, _)| img.pool.iter()).collect();
    let outside: Vec<&Description> = outside
        .iter()
        .flat_map(|(img, _)| img.pool.iter())
        .collect();
    if outside.is_empty() {
        return Err(Error::Degenerate(format!(
            "every image is annotated with `{category}`; no background sentences"
        )));
    }

    let mut m = Matcher {
        lemma: category.to_lowercase(),
        lexicon,
        cache: HashMap::new(),
    };
    let mention_score = inside.iter().map(|d| m.sentence(d)).sum::<f64>() / inside.len() as f64;

    let mut rng = seed::rng(seed, &[]);
    let drawn: Vec<usize> = if outside.len() >= inside.len() {
        sample(&mut rng, outside.len(), inside.len()).into_vec()
    } else {
        (0..inside.len())
            .map(|_| rng.random_range(0..outside.len()))
            .collect()
    };
    let background_score =
        drawn.iter().map(|&k| m.sentence(outside[k])).sum::<f64>() / drawn.len() as f64;

    Ok(CategoryImportance {
        category: category.to_string(),
        n_images,
        mention_score,
        background_score,
        importance: mention_score - background_score,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceAnalysis {
    /// Each category with the mean specificity of the images showing it.
    pub categories: Vec<(CategoryImportance, f64)>,
    /// Spearman correlation of importance with mean category specificity,
    /// when at least two categories qualify and neither side is constant.
    pub correlation: Option<Correlation>,
}

/// Runs [`category_importance`] for every category with enough images and
/// correlates importance with mean specificity. Category `k` of
/// `categories` uses the seed `derive(seed, [k])`; rare categories are
/// skipped with a warning.
pub fn category_importance_analysis(
    db: &Dataset,
    categories: &[String],
    scores: &[SpecificityScore],
    lexicon: &Lexicon,
    seed: u64,
) -> Result<ImportanceAnalysis> {
    let spec: HashMap<&str, f64> = scores
        .iter()
        .map(|s| (s.image_id.as_str(), s.value))
        .collect();
    let mut out = Vec::new();
    for (k, category) in categories.iter().enumerate() {
        let imp = match category_importance(db, category, lexicon, seed::derive(seed, &[k as u64]))
        {
            Ok(imp) => imp,
            Err(Error::RareCategory { found, .. }) => {
                log::warn!("skipping category `{category}`: only {found} images");
                continue;
            }
            Err(e) => return Err(e),
        };
        let present = category_images(db, category);
        let values: Vec<f64> = db
            .images
            .iter()
            .zip(&present)
            .filter(|(_, &p)| p)
            .map(|(img, _)| {
                spec.get(img.id.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownImage(img.id.clone()))
            })
            .collect::<Result<_>>()?;
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        out.push((imp, mean));
    }
    let correlation = if out.len() >= 2 {
        let a: Vec<f64> = out.iter().map(|(c, _)| c.importance).collect();
        let b: Vec<f64> = out.iter().map(|(_, s)| *s).collect();
        match spearman_test(&a, &b) {
            Ok(c) => Some(c),
            Err(Error::ZeroVariance) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(ImportanceAnalysis {
        categories: out,
        correlation,
    })
}
