//! Request types shared by the HTTP API and the CLI.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use imgspec_core::corpus::ImageRecord;
use imgspec_core::lexsim::words;
use serde::{Deserialize, Serialize};

/// Most search words a browse filter may combine.
pub const MAX_FILTER_WORDS: usize = 6;
pub const DEFAULT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Baseline,
    Gt,
    Pred,
}

impl SearchMethod {
    pub const ALL: [SearchMethod; 3] =
        [SearchMethod::Baseline, SearchMethod::Gt, SearchMethod::Pred];

    pub fn as_str(self) -> &'static str {
        match self {
            SearchMethod::Baseline => "baseline",
            SearchMethod::Gt => "gt",
            SearchMethod::Pred => "pred",
        }
    }
}

impl fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SearchMethod {
    type Err = RequestError;
    fn from_str(s: &str) -> Result<Self, RequestError> {
        match s {
            "baseline" => Ok(SearchMethod::Baseline),
            "gt" => Ok(SearchMethod::Gt),
            "pred" => Ok(SearchMethod::Pred),
            other => Err(RequestError(format!(
                "unknown method `{other}`; expected baseline, gt or pred"
            ))),
        }
    }
}

/// A rejected request; the message is returned to the client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestError(pub String);

impl fmt::Display for RequestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for RequestError {}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRequest {
    pub text: String,
    pub method: SearchMethod,
    pub limit: usize,
}

impl QueryRequest {
    pub fn new(text: &str, method: SearchMethod, limit: usize) -> Result<Self, RequestError> {
        if text.trim().is_empty() {
            return Err(RequestError("query text is empty".into()));
        }
        if limit == 0 {
            return Err(RequestError("limit must be at least 1".into()));
        }
        Ok(QueryRequest {
            text: text.to_string(),
            method,
            limit,
        })
    }

    /// From `q`, `method` (default baseline) and `limit` parameters.
    pub fn from_params(params: &HashMap<String, String>) -> Result<Self, RequestError> {
        for key in params.keys() {
            if !matches!(key.as_str(), "q" | "method" | "limit") {
                return Err(RequestError(format!("unknown parameter `{key}`")));
            }
        }
        let text = params.get("q").map(String::as_str).unwrap_or("");
        let method = params
            .get("method")
            .map(|m| m.parse())
            .transpose()?
            .unwrap_or(SearchMethod::Baseline);
        let limit = params
            .get("limit")
            .map(|l| {
                l.parse::<usize>()
                    .map_err(|_| RequestError(format!("limit `{l}` is not a positive integer")))
            })
            .transpose()?
            .unwrap_or(DEFAULT_LIMIT);
        QueryRequest::new(text, method, limit)
    }
}

/// Whole-word search terms and inclusive score ranges, all combined with AND.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BrowseFilter {
    pub words: Vec<String>,
    pub score_ranges: BTreeMap<String, (f64, f64)>,
}

impl BrowseFilter {
    pub fn new(
        words: Vec<String>,
        score_ranges: BTreeMap<String, (f64, f64)>,
    ) -> Result<Self, RequestError> {
        let words: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
        if words.len() > MAX_FILTER_WORDS {
            return Err(RequestError(format!(
                "{} search words given; at most {MAX_FILTER_WORDS} are allowed",
                words.len()
            )));
        }
        if let Some(bad) = words
            .iter()
            .find(|w| w.is_empty() || w.chars().any(|c| !c.is_alphanumeric()))
        {
            return Err(RequestError(format!("`{bad}` is not a single word")));
        }
        for (name, (lo, hi)) in &score_ranges {
            if lo.is_nan() || hi.is_nan() {
                return Err(RequestError(format!("range for `{name}` is not a number")));
            }
            if lo > hi {
                return Err(RequestError(format!(
                    "range for `{name}` is inverted: {lo} > {hi}"
                )));
            }
        }
        Ok(BrowseFilter {
            words,
            score_ranges,
        })
    }

    /// From `words` (separated by commas or whitespace) and
    /// `{score}_min` / `{score}_max` parameters; `known_scores` lists the
    /// score names that may be filtered on. A missing bound is unbounded.
    pub fn from_params(
        params: &HashMap<String, String>,
        known_scores: &[String],
    ) -> Result<Self, RequestError> {
        let words: Vec<String> = params
            .get("words")
            .map(|w| {
                w.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();
        let mut ranges: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for (key, value) in params {
            if key == "words" {
                continue;
            }
            let (name, is_min) = if let Some(n) = key.strip_suffix("_min") {
                (n, true)
            } else if let Some(n) = key.strip_suffix("_max") {
                (n, false)
            } else {
                return Err(RequestError(format!("unknown parameter `{key}`")));
            };
            if !known_scores.iter().any(|s| s == name) {
                return Err(RequestError(format!("unknown score `{name}`")));
            }
            let v: f64 = value
                .parse()
                .map_err(|_| RequestError(format!("`{key}` value `{value}` is not a number")))?;
            let entry = ranges
                .entry(name.to_string())
                .or_insert((f64::NEG_INFINITY, f64::INFINITY));
            if is_min {
                entry.0 = v;
            } else {
                entry.1 = v;
            }
        }
        BrowseFilter::new(words, ranges)
    }

    /// Every word occurs as a whole word in some description (reference or
    /// pool) and every filtered score is present and within its range.
    pub fn matches(&self, record: &ImageRecord, scores: &BTreeMap<String, f64>) -> bool {
        let in_range = self
            .score_ranges
            .iter()
            .all(|(name, &(lo, hi))| scores.get(name).is_some_and(|&v| lo <= v && v <= hi));
        if !in_range {
            return false;
        }
        if self.words.is_empty() {
            return true;
        }
        let vocabulary: std::collections::HashSet<String> = std::iter::once(&record.reference)
            .chain(&record.pool)
            .flat_map(|d| words(&d.text).collect::<Vec<_>>())
            .collect();
        self.words.iter().all(|w| vocabulary.contains(w))
    }
}
