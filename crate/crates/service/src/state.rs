use std::collections::{BTreeMap, HashMap};

use imgspec_core::corpus::{Dataset, ImageRecord};
use imgspec_core::lexsim::{Lexicon, TfIdfModel};
use imgspec_core::retrieval::{param_map, LRParams, Ranking, Retriever};
use imgspec_core::specificity::{ScoreSource, SpecificityScore};

use crate::query::{BrowseFilter, QueryRequest, RequestError, SearchMethod};

/// Name under which automated specificity scores are exposed.
pub const AUTOMATED_SCORE: &str = "automated_specificity";
/// Name under which human specificity scores are exposed.
pub const HUMAN_SCORE: &str = "human_specificity";

pub fn score_name(source: ScoreSource) -> &'static str {
    match source {
        ScoreSource::Automated => AUTOMATED_SCORE,
        ScoreSource::Human => HUMAN_SCORE,
    }
}

/// Everything the server answers from, loaded once and never mutated.
#[derive(Debug)]
pub struct AppState {
    pub dataset: Dataset,
    pub lexicon: Lexicon,
    pub tfidf: TfIdfModel,
    gt: Option<Vec<LRParams>>,
    pred: Option<Vec<LRParams>>,
    /// Per image id: specificity scores and numeric annotations by name.
    scores: HashMap<String, BTreeMap<String, f64>>,
    score_names: Vec<String>,
}

impl AppState {
    /// `gt` and `pred` are matched to images by id and must cover every
    /// image.
    pub fn new(
        dataset: Dataset,
        lexicon: Lexicon,
        tfidf: TfIdfModel,
        gt: Option<Vec<LRParams>>,
        pred: Option<Vec<LRParams>>,
        specificity: Vec<SpecificityScore>,
    ) -> imgspec_core::Result<Self> {
        let table = |params: Option<Vec<LRParams>>| -> imgspec_core::Result<Option<Vec<LRParams>>> {
            params
                .map(|p| Retriever::new(&dataset, &lexicon, &tfidf)?.param_table(&param_map(p)))
                .transpose()
        };
        let gt = table(gt)?;
        let pred = table(pred)?;

        let mut scores: HashMap<String, BTreeMap<String, f64>> = dataset
            .images
            .iter()
            .map(|img| (img.id.clone(), img.annotations.clone()))
            .collect();
        let mut names: Vec<String> = dataset.annotation_names();
        for s in &specificity {
            let entry = scores
                .get_mut(&s.image_id)
                .ok_or_else(|| imgspec_core::Error::UnknownImage(s.image_id.clone()))?;
            entry.insert(score_name(s.source).to_string(), s.value);
            if !names.iter().any(|n| n == score_name(s.source)) {
                names.push(score_name(s.source).to_string());
            }
        }
        names.sort();
        Ok(AppState {
            dataset,
            lexicon,
            tfidf,
            gt,
            pred,
            scores,
            score_names: names,
        })
    }

    pub fn score_names(&self) -> &[String] {
        &self.score_names
    }

    pub fn scores(&self, image_id: &str) -> Option<&BTreeMap<String, f64>> {
        self.scores.get(image_id)
    }

    pub fn methods(&self) -> Vec<SearchMethod> {
        SearchMethod::ALL
            .into_iter()
            .filter(|m| self.params(*m).is_ok())
            .collect()
    }

    /// Params for `method` in dataset order; `None` for the baseline.
    pub fn params(&self, method: SearchMethod) -> Result<Option<&[LRParams]>, RequestError> {
        let missing = || {
            RequestError(format!(
                "method `{method}` is not available: no params were loaded"
            ))
        };
        match method {
            SearchMethod::Baseline => Ok(None),
            SearchMethod::Gt => self.gt.as_deref().map(Some).ok_or_else(missing),
            SearchMethod::Pred => self.pred.as_deref().map(Some).ok_or_else(missing),
        }
    }

    pub fn param_for(&self, method: SearchMethod, image_id: &str) -> Option<&LRParams> {
        let table = self.params(method).ok().flatten()?;
        table.iter().find(|p| p.image_id == image_id)
    }

    /// The full ranking, computed by the same retrieval calls as the library.
    pub fn rank(&self, request: &QueryRequest) -> Result<Ranking, RequestError> {
        let query = imgspec_core::corpus::Description::new("query", request.text.as_str())
            .map_err(|e| RequestError(e.to_string()))?;
        let retriever = Retriever::new(&self.dataset, &self.lexicon, &self.tfidf)
            .map_err(|e| RequestError(e.to_string()))?;
        Ok(match self.params(request.method)? {
            None => retriever.baseline(&request.text, &query),
            Some(table) => retriever.with_param_table(&request.text, &query, table),
        })
    }

    pub fn browse(&self, filter: &BrowseFilter) -> Vec<&ImageRecord> {
        let empty = BTreeMap::new();
        self.dataset
            .images
            .iter()
            .filter(|img| filter.matches(img, self.scores.get(&img.id).unwrap_or(&empty)))
            .collect()
    }
}
