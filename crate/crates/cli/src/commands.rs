use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use hgml_client::Client;
use hgml_core::annotator::{propose_model, propose_rectangles, AnnotatorBudget};
use hgml_core::api::SubmitResponse;
use hgml_core::dataset::{balance_classes, load_csv, load_schema, synth_clusters};
use hgml_core::features::build_feature_matrix;
use hgml_core::learner::compare::{render_csv, render_table, ComparisonConfig, ComparisonReport};
use hgml_core::learner::gbdt::{full_grid, reduced_grid};
use hgml_core::learner::{evaluate_accuracy, run_comparison, train_gbdt, GbdtParams};
use hgml_core::pairing::{correlation_table, select_pairs};
use hgml_core::polygon::{accept_model, Gate};
use hgml_core::rng::derive_seed;
use hgml_core::store::ModelRecord;
use hgml_core::{DimensionPair, FeatureMatrix, Matrix, SelectMode, SplitSizes};
use hgml_service::{AppState, ServiceConfig, Settings};
use rayon::ThreadPoolBuilder;

use crate::args::*;
use crate::error::{io, CliError, Result};
use crate::run::*;

fn sizes(args: &SplitArgs, m: usize) -> SplitSizes {
    let d = SplitSizes::default_for(m);
    SplitSizes::new(
        args.annotation_train.unwrap_or(d.annotation_train),
        args.annotation_valid.unwrap_or(d.annotation_valid),
        args.annotation_test.unwrap_or(d.annotation_test),
        args.m_prime.unwrap_or(d.learner_train),
    )
}

fn open(args: &RunArgs) -> Result<Run> {
    let run = Run::open(&args.run)?;
    run.check_seed_flag(args.seed)?;
    Ok(run)
}

pub fn synth(args: &SynthArgs) -> Result<Run> {
    let ds = synth_clusters(args.d, args.informative, args.n, args.spread, args.seed)?;
    let sizes = sizes(&args.split, ds.len());
    Run::create(&args.runs, ds, args.seed, Some(sizes))
}

pub fn ingest(args: &IngestArgs) -> Result<Run> {
    let schema = load_schema(&args.schema)?;
    let mut ds = load_csv(&args.csv, &schema, &args.label_column)?;
    if !args.no_balance {
        ds = balance_classes(&ds, derive_seed(args.seed, "balance"))?;
    }
    let sizes = sizes(&args.split, ds.len());
    Run::create(&args.runs, ds, args.seed, Some(sizes))
}

pub fn pairs(args: &PairsArgs) -> Result<String> {
    let run = open(&args.run)?;
    let table = correlation_table(&run.dataset, &run.split)?;
    let picked = select_pairs(&table, args.k, args.mode, derive_seed(run.seed, "pairs"))?;
    let entries: Vec<PairEntry> = picked
        .iter()
        .map(|&pair| PairEntry {
            pair,
            rho: table.get(pair).unwrap_or(0.0),
        })
        .collect();
    let mut out = String::new();
    let cols = run.dataset.columns();
    for e in &entries {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}",
            e.pair.dim_a(),
            e.pair.dim_b(),
            cols[e.pair.dim_a()].name,
            cols[e.pair.dim_b()].name,
            e.rho
        );
    }
    write_json(
        &run.path(PAIRS_FILE),
        &PairsArtifact {
            v: ARTIFACT_VERSION,
            dataset_hash: run.hash.clone(),
            seed: run.seed,
            mode: args.mode,
            k: args.k,
            pairs: entries,
        },
    )?;
    Ok(out)
}

/// The run's chosen pairs, or a fresh sample of up to `k` when none were chosen.
fn annotation_pairs(run: &Run, k: usize) -> Result<Vec<DimensionPair>> {
    if let Some(art) = run.pairs()? {
        return Ok(art.pairs.into_iter().map(|e| e.pair).collect());
    }
    let table = correlation_table(&run.dataset, &run.split)?;
    Ok(select_pairs(&table, k, SelectMode::Sample, derive_seed(run.seed, "pairs"))?)
}

pub async fn serve(args: &ServeArgs) -> Result<()> {
    let (state, static_dir, listen) = match (&args.run, &args.config) {
        (_, Some(path)) => {
            let cfg = ServiceConfig::load(path)?;
            let state = hgml_service::state_from_config(&cfg)?;
            (state, cfg.static_dir.clone(), cfg.listen)
        }
        (Some(dir), None) => {
            let run = Run::open(dir)?;
            let settings = Settings {
                gate: Gate {
                    threshold: args.threshold,
                    min_coverage: args.min_coverage,
                },
                pair_pool_size: args.pool,
                tasks_per_pair: args.tasks_per_pair,
                idle_timeout: Duration::from_secs(args.idle_timeout_secs),
                seed: run.seed,
            };
            let store = run.store();
            let state = match run.pairs()? {
                Some(art) => {
                    let mut pool = VecDeque::new();
                    for _ in 0..args.tasks_per_pair {
                        pool.extend(art.pairs.iter().map(|e| e.pair));
                    }
                    AppState::with_pool(run.dataset, run.split, store, settings, pool)
                }
                None => AppState::new(run.dataset, run.split, store, settings)?,
            };
            (state, args.static_dir.clone(), args.listen)
        }
        (None, None) => return Err(CliError::Usage("serve needs --run or --config".into())),
    };
    let listener = tokio::net::TcpListener::bind(listen).await.map_err(io(listen.to_string()))?;
    println!("listening on http://{}", listener.local_addr().map_err(io(listen.to_string()))?);
    hgml_service::serve(listener, Arc::new(state), static_dir.as_deref())
        .await
        .map_err(io(listen.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateSummary {
    pub attempts: usize,
    pub accepted: usize,
}

fn budget(args: &AutoAnnotateArgs) -> Result<AnnotatorBudget> {
    let budget = AnnotatorBudget {
        max_rectangles: args.max_rectangles,
        grid_resolution: args.grid_resolution,
        target_accuracy: args.target_accuracy,
    };
    budget.validate()?;
    Ok(budget)
}

/// Cycles through the run's pairs, one annotator seed per attempt, keeping
/// the models that pass the gate.
pub fn auto_annotate(args: &AutoAnnotateArgs) -> Result<AnnotateSummary> {
    if let Some(url) = &args.server {
        return auto_annotate_remote(args, url);
    }
    let dir = args.run.as_deref().ok_or_else(|| CliError::Usage("--run is required".into()))?;
    let run = Run::open(dir)?;
    run.check_seed_flag(args.seed)?;
    let budget = budget(args)?;
    let gate = Gate {
        threshold: args.threshold,
        min_coverage: args.min_coverage,
    };
    let pairs = annotation_pairs(&run, args.pairs)?;
    let store = run.store();
    if !args.append && store.path().exists() {
        fs::remove_file(store.path()).map_err(io(store.path()))?;
    }
    let max_attempts = pairs.len() * args.per_pair;
    let mut summary = AnnotateSummary {
        attempts: 0,
        accepted: 0,
    };
    while summary.accepted < args.models && summary.attempts < max_attempts {
        let i = summary.attempts;
        summary.attempts += 1;
        let pair = pairs[i % pairs.len()];
        let seed = derive_seed(run.seed, &format!("annotate/{i}"));
        let mut model = match propose_model(&run.dataset, &run.split, pair, &budget, seed) {
            Ok(m) => m,
            Err(e) => {
                tracing::debug!(%pair, "no proposal: {e}");
                continue;
            }
        };
        if accept_model(&mut model, &run.dataset, &run.split, gate) {
            store.append(&ModelRecord::new(run.hash.clone(), model))?;
            summary.accepted += 1;
        }
    }
    Ok(summary)
}

fn auto_annotate_remote(args: &AutoAnnotateArgs, url: &str) -> Result<AnnotateSummary> {
    let budget = budget(args)?;
    let seed = args.seed.unwrap_or(0);
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(io(url))?;
    let client = Client::new(url);
    let max_attempts = args.pairs * args.per_pair;
    let mut summary = AnnotateSummary {
        attempts: 0,
        accepted: 0,
    };
    while summary.accepted < args.models && summary.attempts < max_attempts {
        let task = match rt.block_on(client.task(Some(&args.worker))) {
            Ok(t) => t,
            Err(e) if e.status() == Some(hgml_client::StatusCode::SERVICE_UNAVAILABLE) => break,
            Err(e) => return Err(e.into()),
        };
        let i = summary.attempts;
        summary.attempts += 1;
        let sid = task.session_id.clone();
        let proposal = propose_rectangles(&task.points, &budget, derive_seed(seed, &format!("remote/{i}")), |rects| {
            rt.block_on(client.score(&sid, rects))
                .map(|s| s.validation_accuracy.accuracy())
                .map_err(|e| hgml_core::Error::Readout(e.to_string()))
        });
        let rects = match proposal {
            Ok(r) => r,
            Err(hgml_core::Error::Readout(msg)) => return Err(CliError::Usage(msg)),
            Err(e) => {
                tracing::debug!("no proposal: {e}");
                continue;
            }
        };
        if let SubmitResponse::Accepted { code, model_id, .. } = rt.block_on(client.submit(&sid, &rects))? {
            tracing::info!(%model_id, %code, "accepted");
            summary.accepted += 1;
        }
    }
    Ok(summary)
}

pub fn featurize(args: &FeaturizeArgs) -> Result<FeatureMeta> {
    let run = open(&args.run)?;
    let models = run.models(args.models.as_deref())?;
    let train = build_feature_matrix(&run.dataset, &run.split.learner_train, &models, args.mode)?;
    let test = build_feature_matrix(&run.dataset, &run.split.learner_test, &models, args.mode)?;
    train.write_csv(&run.path(FEATURES_TRAIN_FILE))?;
    test.write_csv(&run.path(FEATURES_TEST_FILE))?;
    let meta = FeatureMeta {
        v: ARTIFACT_VERSION,
        dataset_hash: run.hash.clone(),
        seed: run.seed,
        mode: args.mode,
        model_ids: models.iter().map(|m| m.id.clone()).collect(),
        train_rows: train.nrows(),
        test_rows: test.nrows(),
    };
    write_json(&run.path(FEATURES_META_FILE), &meta)?;
    Ok(meta)
}

fn stored_features(run: &Run) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let meta: FeatureMeta = read_json(&run.path(FEATURES_META_FILE))?;
    check_hash(FEATURES_META_FILE, &run.hash, &meta.dataset_hash)?;
    check_seed(FEATURES_META_FILE, run.seed, meta.seed)?;
    let train = FeatureMatrix::read_csv(&run.path(FEATURES_TRAIN_FILE))?;
    let test = FeatureMatrix::read_csv(&run.path(FEATURES_TEST_FILE))?;
    if train.sample_ids != run.split.learner_train
        || test.sample_ids != run.split.learner_test
        || train.column_ids != meta.model_ids
    {
        return Err(CliError::Usage(format!(
            "feature files in {} do not match their metadata; rerun featurize",
            run.dir.display()
        )));
    }
    Ok((train, test))
}

pub fn train(args: &TrainArgs) -> Result<TrainArtifact> {
    let run = open(&args.run)?;
    let params = GbdtParams::new(args.learning_rate, args.max_depth, args.rounds);
    let labels = |rows: &[usize]| -> Vec<u8> { rows.iter().map(|&i| run.dataset.labels()[i]).collect() };
    let (xt, yt, xv, yv): (Matrix, Vec<u8>, Matrix, Vec<u8>) = match args.arm {
        Arm::Features => {
            let (train, test) = stored_features(&run)?;
            (train.values, train.labels, test.values, test.labels)
        }
        Arm::Raw => {
            let models = run.models(None)?;
            let used = hgml_core::features::used_dimensions(&models);
            let dims = used.as_slice();
            (
                run.dataset.features().select(&run.split.learner_train, dims),
                labels(&run.split.learner_train),
                run.dataset.features().select(&run.split.learner_test, dims),
                labels(&run.split.learner_test),
            )
        }
    };
    let model = train_gbdt(&xt, &yt, &params)?;
    let arm = match args.arm {
        Arm::Raw => "raw",
        Arm::Features => "features",
    };
    let artifact = TrainArtifact {
        v: ARTIFACT_VERSION,
        dataset_hash: run.hash.clone(),
        seed: run.seed,
        arm: arm.to_owned(),
        params,
        train_accuracy: evaluate_accuracy(&model, &xt, &yt)?,
        test_accuracy: evaluate_accuracy(&model, &xv, &yv)?,
        loss_curve: model.loss_curve,
    };
    write_json(&run.path(&format!("train-{arm}.json")), &artifact)?;
    Ok(artifact)
}

pub fn compare(args: &CompareArgs) -> Result<ComparisonReport> {
    let run = open(&args.run)?;
    if run.path(FEATURES_META_FILE).exists() {
        let meta: FeatureMeta = read_json(&run.path(FEATURES_META_FILE))?;
        check_hash(FEATURES_META_FILE, &run.hash, &meta.dataset_hash)?;
        check_seed(FEATURES_META_FILE, run.seed, meta.seed)?;
    }
    run.pairs()?;
    let models = run.models(args.models.as_deref())?;
    let cfg = ComparisonConfig {
        mode: args.mode,
        grid: match args.grid {
            GridChoice::Full => full_grid(),
            GridChoice::Reduced => reduced_grid(),
        },
        folds: args.folds,
        seed: run.seed,
    };
    let mut builder = ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let report = pool.install(|| run_comparison(&run.dataset, &run.split, &models, &cfg))?;
    write_json(&run.path(REPORT_JSON), &report)?;
    let rows = [report.row.clone()];
    fs::write(run.path(REPORT_CSV), render_csv(&rows)).map_err(io(run.path(REPORT_CSV)))?;
    fs::write(run.path(REPORT_TXT), render_table(&rows)).map_err(io(run.path(REPORT_TXT)))?;
    Ok(report)
}

pub fn load_report(dir: &Path) -> Result<ComparisonReport> {
    let report: ComparisonReport = read_json(&dir.join(REPORT_JSON))?;
    let data: DatasetArtifact = read_json(&dir.join(DATASET_FILE))?;
    check_hash(REPORT_JSON, &data.hash, &report.dataset_hash)?;
    check_seed(REPORT_JSON, data.seed, report.seed)?;
    Ok(report)
}

pub fn report(args: &ReportArgs) -> Result<String> {
    let rows = args
        .runs
        .iter()
        .map(|dir| load_report(dir).map(|r| r.row))
        .collect::<Result<Vec<_>>>()?;
    Ok(if args.csv {
        render_csv(&rows)
    } else {
        render_table(&rows)
    })
}
