use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;

use imgspec_core::corpus::Description;
use imgspec_core::lexsim::TfIdfModel;
use imgspec_core::retrieval::{constant_params, rank_baseline, rank_with_params, train_all_params};
use imgspec_core::specificity::automated_specificity;
use imgspec_core::synthetic::{retrieval_dataset, RetrievalDesign};
use imgspec_service::api::{router, BrowseResponse, ImageDetail, Meta, SearchResponse};
use imgspec_service::state::AUTOMATED_SCORE;
use imgspec_service::AppState;

fn state() -> Arc<AppState> {
    let design = RetrievalDesign {
        n_specific: 6,
        n_ambiguous: 6,
        pool_size: 6,
        ..RetrievalDesign::default()
    };
    let (db, lex) = retrieval_dataset(&design, 3).unwrap();
    let tfidf = TfIdfModel::fit_iter(
        db.images
            .iter()
            .flat_map(|i| i.pool.iter().map(|d| d.tokens.as_slice())),
    )
    .unwrap();
    let gt = train_all_params(&db, &lex, &tfidf, 1).unwrap();
    let scores = db
        .images
        .iter()
        .map(|i| automated_specificity(&i.pool, &lex, &tfidf).unwrap())
        .collect();
    Arc::new(AppState::new(db, lex, tfidf, Some(gt), None, scores).unwrap())
}

async fn get(state: &Arc<AppState>, uri: &str) -> (StatusCode, serde_json::Value) {
    let response = router(state.clone())
        .oneshot(Request::builder().uri(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn search_matches_library_rankings() {
    let s = state();
    let text = "g0w0 g0w1 g12w3";
    let q = Description::new("query", text).unwrap();
    let (status, body) = get(
        &s,
        "/api/search?q=g0w0%20g0w1%20g12w3&method=baseline&limit=100",
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let resp: SearchResponse = serde_json::from_value(body).unwrap();
    let lib = rank_baseline(&q, &s.dataset, &s.lexicon, &s.tfidf).unwrap();
    assert_eq!(resp.total, 12);
    assert_eq!(
        resp.results
            .iter()
            .map(|h| h.image_id.as_str())
            .collect::<Vec<_>>(),
        lib.ids()
    );
    for (hit, e) in resp.results.iter().zip(&lib.entries) {
        assert_eq!(hit.relevance.to_bits(), e.relevance.to_bits());
        assert_eq!(
            hit.specificity,
            s.scores(&e.image_id).unwrap().get(AUTOMATED_SCORE).copied()
        );
    }

    let (_, body) = get(&s, "/api/search?q=g0w0%20g0w1%20g12w3&method=gt").await;
    let resp: SearchResponse = serde_json::from_value(body).unwrap();
    let gt = imgspec_core::retrieval::param_map(
        s.params(imgspec_service::SearchMethod::Gt)
            .unwrap()
            .unwrap()
            .to_vec(),
    );
    let lib = rank_with_params(&q, &s.dataset, &gt, &s.lexicon, &s.tfidf).unwrap();
    assert_eq!(
        resp.results
            .iter()
            .map(|h| h.image_id.as_str())
            .collect::<Vec<_>>(),
        lib.ids()
    );

    let (_, body) = get(&s, "/api/search?q=g0w0&limit=1").await;
    let resp: SearchResponse = serde_json::from_value(body).unwrap();
    assert_eq!(resp.results.len(), 1);
    assert_eq!(resp.results[0].rank, 1);
}

#[tokio::test]
async fn constant_params_reproduce_the_baseline_order() {
    let design = RetrievalDesign {
        n_specific: 5,
        n_ambiguous: 5,
        pool_size: 4,
        ..RetrievalDesign::default()
    };
    let (db, lex) = retrieval_dataset(&design, 9).unwrap();
    let tfidf = TfIdfModel::fit_iter(
        db.images
            .iter()
            .flat_map(|i| i.pool.iter().map(|d| d.tokens.as_slice())),
    )
    .unwrap();
    let constant: Vec<_> = constant_params(&db, -2.0, 5.0).into_values().collect();
    let s = Arc::new(AppState::new(db, lex, tfidf, Some(constant), None, vec![]).unwrap());
    for q in ["g1w2%20g3w4", "g6w0%20g10w1%20g2w2", "g9w9"] {
        let (_, a) = get(&s, &format!("/api/search?q={q}&method=baseline")).await;
        let (_, b) = get(&s, &format!("/api/search?q={q}&method=gt")).await;
        let hits = |v: &serde_json::Value| -> Vec<(String, f64)> {
            v["results"]
                .as_array()
                .unwrap()
                .iter()
                .map(|h| {
                    (
                        h["image_id"].as_str().unwrap().to_string(),
                        h["relevance"].as_f64().unwrap(),
                    )
                })
                .collect()
        };
        let sims: std::collections::HashMap<String, f64> = hits(&a).into_iter().collect();
        let gt = hits(&b);
        assert_eq!(gt.len(), sims.len());
        for (id, rel) in &gt {
            assert_eq!(
                *rel,
                imgspec_core::retrieval::sigmoid(-2.0 + 5.0 * sims[id])
            );
        }
        let order = |h: &[(String, f64)]| h.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>();
        assert_eq!(order(&hits(&a)), order(&gt));
    }
}

#[tokio::test]
async fn search_rejects_bad_requests() {
    let s = state();
    for uri in [
        "/api/search?q=",
        "/api/search?method=gt",
        "/api/search?q=dog&method=best",
        "/api/search?q=dog&method=pred",
        "/api/search?q=dog&limit=0",
        "/api/search?q=dog&limit=ten",
        "/api/search?q=dog&page=2",
    ] {
        let (status, body) = get(&s, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert!(body["error"].is_string());
    }
}

#[tokio::test]
async fn browse_filters_with_and_semantics() {
    let s = state();
    let (status, body) = get(&s, "/api/images").await;
    assert_eq!(status, StatusCode::OK);
    let all: BrowseResponse = serde_json::from_value(body).unwrap();
    assert_eq!(all.total, 12);

    // specific image 0 repeats g0w0..g0w5 in nearly every sentence
    let (_, body) = get(&s, "/api/images?words=g0w0,g0w1").await;
    let hits: BrowseResponse = serde_json::from_value(body).unwrap();
    assert!(hits.images.iter().any(|i| i.id == "spec0"));
    for img in &hits.images {
        let rec = s.dataset.image(&img.id).unwrap();
        let text: Vec<String> = std::iter::once(&rec.reference)
            .chain(&rec.pool)
            .map(|d| d.text.clone())
            .collect();
        let contains = |w: &str| text.iter().any(|t| t.split(' ').any(|x| x == w));
        assert!(contains("g0w0") && contains("g0w1"));
    }

    let (_, body) = get(&s, "/api/images?words=g0w0%20nosuchword").await;
    assert_eq!(body["total"], 0);

    let (_, body) = get(&s, &format!("/api/images?{AUTOMATED_SCORE}_min=0.9")).await;
    let high: BrowseResponse = serde_json::from_value(body).unwrap();
    assert!(high.images.iter().all(|i| i.scores[AUTOMATED_SCORE] >= 0.9));
    let (_, body) = get(&s, "/api/images?specific_min=1&specific_max=1").await;
    assert_eq!(body["total"], 6);

    for uri in [
        "/api/images?words=a,b,c,d,e,f,g".to_string(),
        format!("/api/images?{AUTOMATED_SCORE}_min=0.8&{AUTOMATED_SCORE}_max=0.2"),
        "/api/images?unknown_min=0".to_string(),
        "/api/images?colour=red".to_string(),
    ] {
        let (status, _) = get(&s, &uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
    }
}

#[tokio::test]
async fn image_and_meta() {
    let s = state();
    let (status, body) = get(&s, "/api/image/amb2").await;
    assert_eq!(status, StatusCode::OK);
    let detail: ImageDetail = serde_json::from_value(body).unwrap();
    assert_eq!(detail.descriptions.len(), 6);
    assert!(detail.params.contains_key("gt"));
    assert!(!detail.params.contains_key("pred"));
    assert!(detail.scores.contains_key(AUTOMATED_SCORE));

    let (status, _) = get(&s, "/api/image/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(&s, "/api/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, body) = get(&s, "/api/meta").await;
    let meta: Meta = serde_json::from_value(body).unwrap();
    assert_eq!((meta.size, meta.pool_size), (12, 6));
    assert_eq!(
        meta.score_names,
        vec![AUTOMATED_SCORE.to_string(), "specific".to_string()]
    );
    assert_eq!(meta.methods.len(), 2);
}

#[tokio::test]
async fn repeated_requests_return_identical_bodies() {
    let s = state();
    let uri = "/api/search?q=g4w1%20g12w0&method=gt&limit=5";
    let (_, a) = get(&s, uri).await;
    let (_, b) = get(&s, uri).await;
    assert_eq!(a, b);
}
