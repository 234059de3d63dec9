//! Datasets of described images, human similarity ratings, and their files.
//!
//! A dataset file holds one JSON object per line:
//!
//! ```text
//! {"dataset": {"name": "toy", "feature_dim": 3}}          optional header
//! {"id": "img1", "reference": "...", "descriptions": ["...", "..."],
//!  "features": [0.1, 0.2, 0.3], "annotations": {"person": 1.0}}
//! ```
//!
//! Ratings are CSV with the header `image_id,idx_a,idx_b,subject,rating`,
//! where the indices point into the image's description pool.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::lexsim::tokenize;
use crate::{seed, Error, Result};

/// One human sentence about an image, with its cached tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Description {
    pub image_id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Description {
    pub fn new(image_id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidArgument("description text is empty".into()));
        }
        Ok(Description {
            image_id: image_id.into(),
            tokens: tokenize(&text),
            text,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub reference: Description,
    pub pool: Vec<Description>,
    pub features: Option<Vec<f64>>,
    pub annotations: BTreeMap<String, f64>,
}

impl ImageRecord {
    pub fn new(id: &str, reference: &str, pool: &[&str]) -> Result<Self> {
        Ok(ImageRecord {
            id: id.to_string(),
            reference: Description::new(id, reference)?,
            pool: pool
                .iter()
                .map(|t| Description::new(id, *t))
                .collect::<Result<_>>()?,
            features: None,
            annotations: BTreeMap::new(),
        })
    }

    pub fn with_features(mut self, features: Vec<f64>) -> Self {
        self.features = Some(features);
        self
    }

    pub fn with_annotation(mut self, name: &str, value: f64) -> Self {
        self.annotations.insert(name.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub images: Vec<ImageRecord>,
    pub feature_dim: Option<usize>,
}

impl Dataset {
    /// Validates ids, pool sizes and feature lengths.
    pub fn new(
        name: impl Into<String>,
        images: Vec<ImageRecord>,
        feature_dim: Option<usize>,
    ) -> Result<Self> {
        let mut ds = Dataset {
            name: name.into(),
            images,
            feature_dim,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&mut self) -> Result<()> {
        let mut seen = HashSet::new();
        let mut pool_size = None;
        for img in &self.images {
            if !seen.insert(img.id.as_str()) {
                return Err(Error::DuplicateImage(img.id.clone()));
            }
            let n = img.pool.len();
            if n < 2 {
                return Err(Error::PoolTooSmall {
                    image: img.id.clone(),
                    size: n,
                });
            }
            match pool_size {
                None => pool_size = Some(n),
                Some(expected) if expected != n => {
                    return Err(Error::InconsistentPoolSize {
                        image: img.id.clone(),
                        expected,
                        found: n,
                    })
                }
                _ => {}
            }
            if let Some(f) = &img.features {
                match self.feature_dim {
                    None => self.feature_dim = Some(f.len()),
                    Some(d) if d != f.len() => {
                        return Err(Error::InconsistentFeatures {
                            image: img.id.clone(),
                            expected: d,
                            found: f.len(),
                        })
                    }
                    _ => {}
                }
            }
            let foreign = std::iter::once(&img.reference)
                .chain(&img.pool)
                .any(|d| d.image_id != img.id);
            if foreign {
                return Err(Error::InvalidArgument(format!(
                    "image `{}` holds a description of another image",
                    img.id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Descriptions per image (`N`); 0 for an empty dataset.
    pub fn pool_size(&self) -> usize {
        self.images.first().map_or(0, |i| i.pool.len())
    }

    pub fn image(&self, id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == id)
    }

    pub fn index_by_id(&self) -> HashMap<&str, usize> {
        self.images
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect()
    }

    /// Names of every annotation present on at least one image.
    pub fn annotation_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .images
            .iter()
            .flat_map(|i| i.annotations.keys().cloned())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        names.sort();
        names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    /// One JSON record per line.
    #[default]
    JsonLines,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" | "json-lines" | "ndjson" => Ok(DatasetFormat::JsonLines),
            other => Err(Error::InvalidArgument(format!(
                "unknown dataset format `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    dataset: Header,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_dim: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: Option<String>,
    reference: Option<String>,
    descriptions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    annotations: BTreeMap<String, f64>,
}

fn parse_record(line: usize, raw: RecordLine) -> Result<ImageRecord> {
    let malformed = |message: String| Error::Malformed { line, message };
    let id = raw
        .id
        .ok_or_else(|| malformed("record is missing field `id`".into()))?;
    let reference = raw
        .reference
        .ok_or_else(|| malformed(format!("record `{id}` is missing field `reference`")))?;
    let descriptions = raw
        .descriptions
        .ok_or_else(|| malformed(format!("record `{id}` is missing field `descriptions`")))?;
    let describe = |text: String| {
        Description::new(id.clone(), text)
            .map_err(|_| malformed(format!("record `{id}` contains an empty description")))
    };
    Ok(ImageRecord {
        reference: describe(reference)?,
        pool: descriptions
            .into_iter()
            .map(describe)
            .collect::<Result<_>>()?,
        features: raw.features,
        annotations: raw.annotations,
        id,
    })
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let DatasetFormat::JsonLines = format;
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header: Option<Header> = None;
    let mut images = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        if value.get("dataset").is_some() {
            if header.is_some() || !images.is_empty() {
                return Err(Error::Malformed {
                    line: lineno,
                    message: "dataset header must be the first record".into(),
                });
            }
            let h: HeaderLine = serde_json::from_value(value).map_err(|e| Error::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
            header = Some(h.dataset);
            continue;
        }
        let raw: RecordLine = serde_json::from_value(value).map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        images.push(parse_record(lineno, raw)?);
    }
    let (name, feature_dim) = match header {
        Some(h) => (h.name, h.feature_dim),
        None => (
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            None,
        ),
    };
    Dataset::new(name, images, feature_dim)
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header = HeaderLine {
        dataset: Header {
            name: dataset.name.clone(),
            feature_dim: dataset.feature_dim,
        },
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(io)?;
    for img in &dataset.images {
        let record = RecordLine {
            id: Some(img.id.clone()),
            reference: Some(img.reference.text.clone()),
            descriptions: Some(img.pool.iter().map(|d| d.text.clone()).collect()),
            features: img.features.clone(),
            annotations: img.annotations.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// One subject's 1-10 judgement of a pair of pool sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanRating {
    pub image_id: String,
    pub idx_a: usize,
    pub idx_b: usize,
    pub subject: String,
    pub rating: u8,
}

pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 10;

impl HumanRating {
    pub fn check(&self, pool_size: usize) -> std::result::Result<(), String> {
        if !(MIN_RATING..=MAX_RATING).contains(&self.rating) {
            return Err(format!(
                "rating {} is outside [{MIN_RATING}, {MAX_RATING}]",
                self.rating
            ));
        }
        if self.idx_a == self.idx_b {
            return Err(format!(
                "pair ({}, {}) rates a sentence against itself",
                self.idx_a, self.idx_b
            ));
        }
        if self.idx_a >= pool_size || self.idx_b >= pool_size {
            return Err(format!(
                "pair ({}, {}) is out of bounds for a pool of {pool_size}",
                self.idx_a, self.idx_b
            ));
        }
        Ok(())
    }
}

/// Reads a ratings CSV and validates each row against `dataset`.
pub fn load_ratings(path: impl AsRef<Path>, dataset: &Dataset) -> Result<Vec<HumanRating>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ratings(file, dataset)
}

pub fn read_ratings(reader: impl std::io::Read, dataset: &Dataset) -> Result<Vec<HumanRating>> {
    let index = dataset.index_by_id();
    let mut rdr = csv::Reader::from_reader(reader);
    let mut ratings = Vec::new();
    for (n, row) in rdr.deserialize::<HumanRating>().enumerate() {
        // header is line 1
        let line = n + 2;
        let r = row.map_err(|e| Error::Malformed {
            line,
            message: e.to_string(),
        })?;
        let &img = index
            .get(r.image_id.as_str())
            .ok_or_else(|| Error::Malformed {
                line,
                message: format!("unknown image id `{}`", r.image_id),
            })?;
        r.check(dataset.images[img].pool.len())
            .map_err(|message| Error::Malformed { line, message })?;
        ratings.push(r);
    }
    Ok(ratings)
}

pub fn write_ratings(ratings: &[HumanRating], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in ratings {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Indices of the held-out part for a pool of `n`, chosen by `seed`, sorted.
pub fn held_out_indices(n: usize, n_train: usize, seed: u64) -> Result<Vec<usize>> {
    if n_train == 0 || n_train > n {
        return Err(Error::InvalidArgument(format!(
            "n_train must be in 1..={n}, got {n_train}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed, &[]));
    let mut held: Vec<usize> = idx.into_iter().take(n - n_train).collect();
    held.sort_unstable();
    Ok(held)
}

/// Splits an image's pool into `n_train` training sentences and the rest.
/// Both parts keep the pool's original order, so `n_train = N` returns the
/// pool unchanged.
pub fn split_pool(
    record: &ImageRecord,
    n_train: usize,
    seed: u64,
) -> Result<(Vec<Description>, Vec<Description>)> {
    let held = held_out_indices(record.pool.len(), n_train, seed)?;
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(held.len()));
    for (i, d) in record.pool.iter().enumerate() {
        if held.binary_search(&i).is_ok() {
            test.push(d.clone());
        } else {
            train.push(d.clone());
        }
    }
    Ok((train, test))
}
