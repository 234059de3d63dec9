use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use imgspec_core::analysis::{
    evaluate_ranks, read_target_ranks, run_retrieval, training_sentence_curve, write_curve,
    write_target_ranks, HeldOutSplit, Method,
};
use imgspec_core::corpus::{
    load_dataset, load_ratings, write_dataset, Dataset, DatasetFormat, Description,
};
use imgspec_core::lexsim::{load_lexicon, Lexicon, TfIdfModel};
use imgspec_core::predict::{
    fit_param_regressors, loocv_predict_params, loocv_predict_params_isolated, SvrHyper,
};
use imgspec_core::retrieval::{param_map, read_params, train_all_params, write_params, Retriever};
use imgspec_core::specificity::{
    automated_specificity, human_specificity_by_image, read_scores, specificity_histogram,
    write_scores,
};

use crate::query::SearchMethod;
use crate::state::AppState;

/// Environment variable holding the server's bind address.
pub const BIND_ENV: &str = "IMGSPEC_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Parser)]
#[command(
    name = "imgspec",
    version,
    about = "Image specificity scoring and specificity-aware retrieval"
)]
pub struct Cli {
    /// Master seed for every sampled step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset (and optionally ratings) and rewrite it normalized.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every image; human scores are added when ratings are given.
    Specificity {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// Print a histogram of the automated scores with this many bins.
        #[arg(long)]
        histogram: Option<usize>,
    },
    /// Fit every image's ground-truth relevance model.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// Train on this many sentences per image, the same split `evaluate` uses.
        #[arg(long)]
        n_train: Option<usize>,
    },
    /// Predict relevance params from image features, leaving each image out.
    Predict {
        #[arg(long)]
        dataset: PathBuf,
        /// Ground-truth params used as regression targets.
        #[arg(long, required_unless_present = "isolated")]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also fit on all images and save the regressors here.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Retrain each fold's targets without the held-out image's descriptions.
        #[arg(long, requires = "lexicon")]
        isolated: bool,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        n_train: Option<usize>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Rank the database against one query.
    Rank {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        query: String,
        #[arg(long, default_value = "baseline")]
        method: SearchMethod,
        /// Params for `gt` (trained on the fly when absent) or `pred` (required).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Report target-rank statistics, from rank files or a held-out run.
    Evaluate(EvaluateArgs),
    /// Serve the read-only HTTP API.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        gt_params: Option<PathBuf>,
        #[arg(long)]
        pred_params: Option<PathBuf>,
        /// Score files as written by `specificity`.
        #[arg(long)]
        scores: Vec<PathBuf>,
        #[arg(long, env = BIND_ENV, default_value = DEFAULT_BIND)]
        bind: SocketAddr,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 0.5)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// RBF width; defaults to 1 / (d · mean feature variance).
    #[arg(long)]
    pub gamma: Option<f64>,
}

impl From<&HyperArgs> for SvrHyper {
    fn from(h: &HyperArgs) -> Self {
        SvrHyper {
            nu: h.nu,
            c: h.c,
            gamma: h.gamma,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub method: Method,
    /// Baseline target ranks to compare against.
    #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset")]
    pub baseline: Option<PathBuf>,
    /// Target ranks of `method`.
    #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset")]
    pub ranks: Option<PathBuf>,
    /// Run the held-out experiment on this dataset instead of reading ranks.
    #[arg(long, requires = "lexicon")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Training sentences per image; the rest become queries. Defaults to N − 1.
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Write every method's target ranks into this directory.
    #[arg(long)]
    pub ranks_out: Option<PathBuf>,
    /// Sentence counts for a training-sentence curve.
    #[arg(long, value_delimiter = ',')]
    pub curve: Vec<usize>,
    #[arg(long, default_value_t = 25)]
    pub repeats: usize,
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

fn dataset(path: &Path) -> Result<Dataset> {
    load_dataset(path, DatasetFormat::JsonLines)
        .with_context(|| format!("loading dataset {}", path.display()))
}

fn lexicon(path: &Path) -> Result<Lexicon> {
    load_lexicon(path).with_context(|| format!("loading lexicon {}", path.display()))
}

/// TF-IDF over every pool sentence of `db`.
pub fn pool_tfidf(db: &Dataset) -> Result<TfIdfModel> {
    Ok(TfIdfModel::fit_iter(
        db.images
            .iter()
            .flat_map(|i| i.pool.iter().map(|d| d.tokens.as_slice())),
    )?)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Ingest {
            input,
            ratings,
            out: dest,
        } => {
            let db = dataset(&input)?;
            writeln!(
                out,
                "{}: {} images, {} descriptions each, features: {}",
                db.name,
                db.len(),
                db.pool_size(),
                db.feature_dim.map_or("none".to_string(), |d| d.to_string())
            )?;
            if let Some(r) = ratings {
                let ratings = load_ratings(&r, &db)?;
                writeln!(out, "{} ratings", ratings.len())?;
            }
            if let Some(dest) = dest {
                write_dataset(&db, &dest)?;
            }
        }
        Command::Specificity {
            data,
            out: dest,
            ratings,
            histogram,
        } => {
            let (db, lex) = (dataset(&data.dataset)?, lexicon(&data.lexicon)?);
            let tfidf = pool_tfidf(&db)?;
            let mut scores = db
                .images
                .iter()
                .map(|img| automated_specificity(&img.pool, &lex, &tfidf))
                .collect::<imgspec_core::Result<Vec<_>>>()?;
            if let Some(bins) = histogram {
                for b in specificity_histogram(&scores, bins)? {
                    writeln!(out, "[{:.3}, {:.3}) {}", b.lo, b.hi, b.count)?;
                }
            }
            if let Some(r) = ratings {
                scores.extend(human_specificity_by_image(&load_ratings(&r, &db)?)?);
            }
            write_scores(&scores, &dest)?;
        }
        Command::Train {
            data,
            out: dest,
            n_train,
        } => {
            let (db, lex) = (dataset(&data.dataset)?, lexicon(&data.lexicon)?);
            let params = match n_train {
                None => train_all_params(&db, &lex, &pool_tfidf(&db)?, seed)?,
                Some(n) => train_on_split(&db, &lex, n, seed)?,
            };
            write_params(&params, &dest)?;
        }
        Command::Predict {
            dataset: path,
            params,
            out: dest,
            model,
            isolated,
            lexicon: lex_path,
            n_train,
            hyper,
        } => {
            let db = dataset(&path)?;
            let hyper = SvrHyper::from(&hyper);
            let predicted = if isolated {
                let lex = lexicon(lex_path.as_deref().expect("clap enforces --lexicon"))?;
                let split = HeldOutSplit::new(&db, n_train.unwrap_or(db.pool_size()), seed)?;
                loocv_predict_params_isolated(&db, &split.train_pools, &lex, &hyper, seed)?
            } else {
                let gt = param_map(read_params(
                    params.as_deref().expect("clap enforces --params"),
                )?);
                if let Some(m) = &model {
                    fit_param_regressors(&db, &gt, &hyper)?.save(m)?;
                }
                loocv_predict_params(&db, &gt, &hyper)?
            };
            write_params(&predicted, &dest)?;
        }
        Command::Rank {
            data,
            query,
            method,
            params,
            limit,
        } => {
            let (db, lex) = (dataset(&data.dataset)?, lexicon(&data.lexicon)?);
            let tfidf = pool_tfidf(&db)?;
            let q = Description::new("query", query.as_str())?;
            let retriever = Retriever::new(&db, &lex, &tfidf)?;
            let ranking = match (method, params) {
                (SearchMethod::Baseline, _) => retriever.baseline(&query, &q),
                (_, Some(p)) => retriever.with_params(&query, &q, &param_map(read_params(&p)?))?,
                (SearchMethod::Gt, None) => {
                    let table = train_all_params(&db, &lex, &tfidf, seed)?;
                    retriever.with_param_table(&query, &q, &table)
                }
                (SearchMethod::Pred, None) => bail!("--method pred needs --params"),
            };
            for (i, e) in ranking
                .entries
                .iter()
                .take(limit.unwrap_or(usize::MAX))
                .enumerate()
            {
                writeln!(out, "{}\t{}\t{:.6}", i + 1, e.image_id, e.relevance)?;
            }
        }
        Command::Evaluate(args) => evaluate(args, seed, out)?,
        Command::Serve {
            data,
            gt_params,
            pred_params,
            scores,
            bind,
        } => {
            let (db, lex) = (dataset(&data.dataset)?, lexicon(&data.lexicon)?);
            let tfidf = pool_tfidf(&db)?;
            let gt = match gt_params {
                Some(p) => read_params(&p)?,
                None => train_all_params(&db, &lex, &tfidf, seed)?,
            };
            let pred = pred_params.map(|p| read_params(&p)).transpose()?;
            let mut all_scores = Vec::new();
            for s in &scores {
                all_scores.extend(read_scores(s)?);
            }
            let state = Arc::new(AppState::new(db, lex, tfidf, Some(gt), pred, all_scores)?);
            serve(state, bind)?;
        }
    }
    Ok(())
}

fn train_on_split(
    db: &Dataset,
    lex: &Lexicon,
    n_train: usize,
    seed: u64,
) -> Result<Vec<imgspec_core::retrieval::LRParams>> {
    let split = HeldOutSplit::new(db, n_train, seed)?;
    let tfidf = split.fit_tfidf()?;
    let sim = imgspec_core::lexsim::Similarity::new(lex, &tfidf);
    let pools: Vec<Vec<_>> = split
        .train_pools
        .iter()
        .map(|p| p.iter().map(|d| sim.profile(d)).collect())
        .collect();
    let ids: Vec<&str> = db.images.iter().map(|i| i.id.as_str()).collect();
    Ok(imgspec_core::retrieval::train_params_from_pools(
        &ids,
        &pools,
        lex,
        imgspec_core::seed::derive(seed, &[imgspec_core::analysis::PAIR_SEED_TAG]),
    )?)
}

fn evaluate(args: EvaluateArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let Some(path) = &args.dataset else {
        let baseline =
            read_target_ranks(args.baseline.as_deref().expect("clap enforces --baseline"))?;
        let ranks = read_target_ranks(args.ranks.as_deref().expect("clap enforces --ranks"))?;
        write!(out, "{}", evaluate_ranks(args.method, &ranks, &baseline)?)?;
        return Ok(());
    };
    let db = dataset(path)?;
    let lex = lexicon(args.lexicon.as_deref().expect("clap enforces --lexicon"))?;
    let split = HeldOutSplit::new(&db, args.n_train.unwrap_or(db.pool_size() - 1), seed)?;
    let hyper = SvrHyper::from(&args.hyper);
    let predict = (args.method == Method::PredSpec).then_some(&hyper);
    let run = run_retrieval(&db, &lex, &split, predict, seed)?;
    let report = match args.method {
        Method::Baseline => &run.baseline,
        Method::GtSpec => &run.gt_spec,
        Method::PredSpec => run.pred_spec.as_ref().expect("requested above"),
    };
    write!(out, "{report}")?;
    if let Some(dir) = &args.ranks_out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_target_ranks(&run.baseline_ranks, dir.join("baseline.csv"))?;
        write_target_ranks(&run.gt_ranks, dir.join("gt_spec.csv"))?;
        if let Some(p) = &run.pred_ranks {
            write_target_ranks(p, dir.join("pred_spec.csv"))?;
        }
    }
    if !args.curve.is_empty() {
        let curve = training_sentence_curve(&db, &lex, &split, &args.curve, args.repeats, seed)?;
        writeln!(
            out,
            "training curve (baseline {:.3}):",
            curve.baseline_mean_rank
        )?;
        for p in &curve.points {
            writeln!(
                out,
                "  {:>3} sentences: {:.3} ± {:.3}",
                p.x, p.mean, p.stderr
            )?;
        }
        if let Some(dest) = &args.curve_out {
            write_curve(&curve.points, dest)?;
        }
    }
    Ok(())
}

fn serve(state: Arc<AppState>, bind: SocketAddr) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        log::info!("serving {} images on http://{bind}", state.dataset.len());
        axum::serve(listener, crate::api::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
