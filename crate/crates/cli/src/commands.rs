//! Command implementations. Each returns the machine-readable value the
//! binary prints on stdout; progress goes to stderr.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use elr_gnn::attacks::{perturbation_report, run_attack as apply_attack, AttackKind, AttackSpec};
use elr_gnn::dataio::{
    load_checkpoint, load_dataset, load_graph, load_labels, save_checkpoint, save_dataset,
    write_edges, DatasetManifest, FileEntry,
};
use elr_gnn::estimator::{
    ablation_variant, forward_probabilities, train_method, Method, TrainConfig, Variant,
};
use elr_gnn::gnn::{accuracy, CeMode};
use elr_gnn::graph::{DenseMatrix, Features, NodeSplit, SparseGraph};
use elr_gnn::oracle::mean_std;
use elr_gnn::synth::{sbm, SbmConfig};

/// Training knobs shared by `train` and `sweep`.
#[derive(Args, Debug, Clone)]
pub struct CommonTrainArgs {
    /// Rank of the adjacency estimate.
    #[arg(long, default_value_t = 50)]
    pub d: usize,
    /// Weak-edge prune threshold.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long = "lambda-sim", default_value_t = 1e-3)]
    pub lambda_sim: f64,
    #[arg(long = "lambda-fr", default_value_t = 1e-4)]
    pub lambda_fr: f64,
    /// Learning rate of the factor optimizer.
    #[arg(long = "u-lr", default_value_t = 1e-2)]
    pub u_lr: f64,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long = "gnn-lr", default_value_t = 1e-2)]
    pub gnn_lr: f64,
    #[arg(long = "weight-decay", default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Sum the labeled-node cross-entropy instead of averaging it.
    #[arg(long = "ce-sum", default_value_t = false)]
    pub ce_sum: bool,
    /// Disable row L1 normalization of dense features.
    #[arg(long = "no-feature-norm", default_value_t = false)]
    pub no_feature_norm: bool,
    /// Override the per-method self-loop convention (true/false).
    #[arg(long = "self-loops")]
    pub self_loops: Option<bool>,
    /// Similarity target: "normalized" (default) or "pruned".
    #[arg(long = "sim-target", default_value = "normalized")]
    pub sim_target: String,
    #[arg(long = "svd-oversample", default_value_t = 10)]
    pub svd_oversample: usize,
    #[arg(long = "svd-power-iters", default_value_t = 8)]
    pub svd_power_iters: usize,
    /// Ablation variant: none|no_sim|no_fr|eps_zero|rand_init|joint_update.
    #[arg(long, default_value = "none")]
    pub variant: String,
    /// Checkpoint selection: "best" (validation) or "final".
    #[arg(long, default_value = "best")]
    pub select: String,
}

impl CommonTrainArgs {
    /// Build the training configuration, collecting every failure.
    pub fn to_config(&self, seed: u64) -> Result<(TrainConfig, Variant), Vec<String>> {
        let mut errors = Vec::new();
        let variant = match Variant::from_str(&self.variant) {
            Ok(v) => v,
            Err(e) => {
                errors.push(e);
                Variant::None
            }
        };
        let select_best_val = match self.select.as_str() {
            "best" => true,
            "final" => false,
            other => {
                errors.push(format!("unknown select mode '{other}' (expected best|final)"));
                true
            }
        };
        let sim_on_normalized = match self.sim_target.as_str() {
            "normalized" => true,
            "pruned" => false,
            other => {
                errors.push(format!(
                    "unknown sim target '{other}' (expected normalized|pruned)"
                ));
                true
            }
        };
        if !errors.is_empty() {
            return Err(errors);
        }
        let cfg = TrainConfig {
            d: self.d,
            epsilon: self.epsilon,
            lambda_sim: self.lambda_sim,
            lambda_fr: self.lambda_fr,
            epochs: self.epochs,
            gnn_lr: self.gnn_lr,
            gnn_weight_decay: self.weight_decay,
            u_lr: self.u_lr,
            momentum: self.momentum,
            hidden: self.hidden,
            seed,
            ce_mode: if self.ce_sum { CeMode::Sum } else { CeMode::Mean },
            select_best_val,
            feature_row_normalize: !self.no_feature_norm,
            self_loops: self.self_loops,
            sim_on_normalized,
            svd_oversample: self.svd_oversample,
            svd_power_iters: self.svd_power_iters,
            rand_init: false,
            joint_update: false,
        };
        Ok((ablation_variant(&cfg, variant), variant))
    }
}

/// One persisted training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub method: Method,
    pub variant: Variant,
    pub config: TrainConfig,
    pub seed: u64,
    pub preprocess_s: f64,
    pub training_s: f64,
    pub total_s: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub output_paths: Vec<PathBuf>,
}

fn split_accuracy(
    p: &DenseMatrix,
    graph: &SparseGraph,
    ids: &[usize],
) -> Result<f64> {
    if ids.is_empty() {
        return Ok(0.0);
    }
    Ok(accuracy(p, &graph.labels, ids)?)
}

/// Train a model from a dataset manifest and persist the checkpoint.
pub fn train_run(
    manifest: &Path,
    method: Method,
    common: &CommonTrainArgs,
    seed: u64,
    out: &Path,
) -> Result<RunRecord> {
    let (cfg, variant) = common
        .to_config(seed)
        .map_err(|errs| anyhow!("invalid configuration:\n  - {}", errs.join("\n  - ")))?;
    let (graph, split) = load_dataset(manifest)?;
    let precheck = cfg.validation_errors(&graph, &split);
    if !precheck.is_empty() {
        bail!("invalid configuration:\n  - {}", precheck.join("\n  - "));
    }
    eprintln!(
        "training {method} on '{}' ({} nodes, {} edges), seed {seed}",
        manifest.display(),
        graph.n_nodes,
        graph.adjacency.undirected_edge_count()
    );
    let trained = train_method(method, &graph, &split, &cfg)?;
    let p = forward_probabilities(&graph, &trained.model, &trained.a_tilde, cfg.feature_row_normalize)?;
    let train_accuracy = split_accuracy(&p, &graph, &split.train_ids)?;
    let val_accuracy = split_accuracy(&p, &graph, &split.val_ids)?;
    let test_accuracy = split_accuracy(&p, &graph, &split.test_ids)?;
    save_checkpoint(out, method, &cfg, &trained)?;
    fs::write(
        out.join("history.json"),
        serde_json::to_string(&trained.history).expect("history serializes"),
    )
    .with_context(|| format!("writing {}", out.join("history.json").display()))?;
    let record = RunRecord {
        command: "train".into(),
        method,
        variant,
        config: cfg,
        seed,
        preprocess_s: trained.timing.preprocess_s,
        training_s: trained.timing.training_s,
        total_s: trained.timing.total_s(),
        train_accuracy,
        val_accuracy,
        test_accuracy,
        output_paths: vec![out.to_path_buf(), out.join("run.json")],
    };
    fs::write(
        out.join("run.json"),
        serde_json::to_string_pretty(&record).expect("record serializes"),
    )
    .with_context(|| format!("writing {}", out.join("run.json").display()))?;
    Ok(record)
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// elr | gcn | gcn-svd
    #[arg(long)]
    pub method: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonTrainArgs,
}

pub fn run_train(args: &TrainArgs) -> Result<RunRecord> {
    let method = Method::from_str(&args.method).map_err(|e| anyhow!(e))?;
    train_run(&args.manifest, method, &args.common, args.seed, &args.out)
}

#[derive(Args, Debug, Clone)]
pub struct AttackArgs {
    /// Input edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
    /// Node count of the graph.
    #[arg(long)]
    pub n: usize,
    /// random | dice
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output edge-list file.
    #[arg(long)]
    pub out: PathBuf,
    /// Label TSV; required by the label-aware kind.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackOutput {
    pub kind: AttackKind,
    pub rate: f64,
    pub seed: u64,
    pub edges_before: usize,
    pub edges_after: usize,
    pub added: usize,
    pub removed: usize,
    pub effective_rate: f64,
    pub out: PathBuf,
}

pub fn run_attack(args: &AttackArgs) -> Result<AttackOutput> {
    let kind = AttackKind::from_str(&args.kind).map_err(|e| anyhow!(e))?;
    let a = load_graph(&args.graph, args.n)?;
    let labels = match (&args.labels, kind) {
        (Some(path), _) => load_labels(path, args.n)?,
        (None, AttackKind::Dice) => bail!("--labels is required for the dice attack"),
        (None, AttackKind::Random) => vec![None; args.n],
    };
    let spec = AttackSpec {
        kind,
        rate: args.rate,
        seed: args.seed,
    };
    let attacked = apply_attack(&a, &labels, &spec)?;
    write_edges(&args.out, &attacked)?;
    let report = perturbation_report(&a, &attacked);
    Ok(AttackOutput {
        kind,
        rate: args.rate,
        seed: args.seed,
        edges_before: a.undirected_edge_count(),
        edges_after: attacked.undirected_edge_count(),
        added: report.added,
        removed: report.removed,
        effective_rate: report.rate,
        out: args.out.clone(),
    })
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Checkpoint directory.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// train | val | test
    #[arg(long = "split-part")]
    pub split_part: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutput {
    pub split_part: String,
    pub n_nodes: usize,
    pub accuracy: f64,
}

pub fn run_eval(args: &EvalArgs) -> Result<EvalOutput> {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let (graph, split) = load_dataset(&args.manifest)?;
    if checkpoint.model.in_dim() != graph.feature_dim() {
        bail!(
            "checkpoint expects {} input features, dataset has {}",
            checkpoint.model.in_dim(),
            graph.feature_dim()
        );
    }
    if checkpoint.model.n_classes() != graph.n_classes {
        bail!(
            "checkpoint has {} classes, dataset has {}",
            checkpoint.model.n_classes(),
            graph.n_classes
        );
    }
    if checkpoint.factor.d() > 0 && checkpoint.factor.n() != graph.n_nodes {
        bail!(
            "checkpoint factor covers {} nodes, dataset has {}",
            checkpoint.factor.n(),
            graph.n_nodes
        );
    }
    let ids = match args.split_part.as_str() {
        "train" => &split.train_ids,
        "val" => &split.val_ids,
        "test" => &split.test_ids,
        other => bail!("unknown split part '{other}' (expected train|val|test)"),
    };
    if ids.is_empty() {
        bail!("split part '{}' is empty", args.split_part);
    }
    if ids.iter().any(|&i| graph.labels[i].is_none()) {
        bail!("split part '{}' contains unlabeled nodes", args.split_part);
    }
    let a = checkpoint.rebuild_adjacency(&graph)?;
    let p = forward_probabilities(
        &graph,
        &checkpoint.model,
        &a,
        checkpoint.config.feature_row_normalize,
    )?;
    let acc = accuracy(&p, &graph.labels, ids)?;
    Ok(EvalOutput {
        split_part: args.split_part.clone(),
        n_nodes: ids.len(),
        accuracy: acc,
    })
}

#[derive(Args, Debug, Clone)]
pub struct GenSbmArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long = "p-in")]
    pub p_in: f64,
    #[arg(long = "p-out")]
    pub p_out: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "train-frac", default_value_t = 0.1)]
    pub train_frac: f64,
    #[arg(long = "val-frac", default_value_t = 0.1)]
    pub val_frac: f64,
    #[arg(long = "split-seed")]
    pub split_seed: Option<u64>,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "sbm")]
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSbmOutput {
    pub manifest: PathBuf,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_classes: usize,
}

pub fn run_gen_sbm(args: &GenSbmArgs) -> Result<GenSbmOutput> {
    let graph = sbm(&SbmConfig {
        n_nodes: args.n,
        n_blocks: args.blocks,
        p_in: args.p_in,
        p_out: args.p_out,
        seed: args.seed,
    });
    let split = NodeSplit::random(
        args.n,
        args.train_frac,
        args.val_frac,
        args.split_seed.unwrap_or(args.seed),
    );
    let manifest = save_dataset(&args.out_dir, &args.name, &graph, &split)?;
    Ok(GenSbmOutput {
        manifest,
        n_nodes: graph.n_nodes,
        n_edges: graph.adjacency.undirected_edge_count(),
        n_classes: graph.n_classes,
    })
}

#[derive(Args, Debug, Clone)]
pub struct ImportArgs {
    /// Node file: `<id> <TAB> <features...> <TAB> <class>` per line.
    #[arg(long)]
    pub content: PathBuf,
    /// Edge file: `<cited> <TAB> <citing>` per line.
    #[arg(long)]
    pub cites: PathBuf,
    #[arg(long)]
    pub name: String,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[arg(long = "train-frac", default_value_t = 0.1)]
    pub train_frac: f64,
    #[arg(long = "val-frac", default_value_t = 0.1)]
    pub val_frac: f64,
    #[arg(long = "split-seed", default_value_t = 15)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportOutput {
    pub manifest: PathBuf,
    pub n_nodes: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_edges: usize,
    /// Citation lines referencing unknown ids, skipped.
    pub skipped_edges: usize,
}

/// Convert a classic citation dataset (content + cites files) into the
/// native dataset layout.
pub fn run_import(args: &ImportArgs) -> Result<ImportOutput> {
    let content = fs::read_to_string(&args.content)
        .with_context(|| format!("reading {}", args.content.display()))?;
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            bail!(
                "{}:{}: expected '<id>\\t<features...>\\t<class>'",
                args.content.display(),
                idx + 1
            );
        }
        let id = fields[0].to_string();
        if ids.insert(id.clone(), rows.len()).is_some() {
            bail!("{}:{}: duplicate node id '{id}'", args.content.display(), idx + 1);
        }
        let feats: Result<Vec<f64>, _> = fields[1..fields.len() - 1]
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect();
        let feats = feats
            .map_err(|e| anyhow!("{}:{}: bad feature: {e}", args.content.display(), idx + 1))?;
        rows.push(feats);
        raw_labels.push(fields[fields.len() - 1].to_string());
    }
    if rows.is_empty() {
        bail!("{}: no nodes found", args.content.display());
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        bail!("{}: inconsistent feature widths", args.content.display());
    }
    let mut sorted_names: Vec<String> = raw_labels.clone();
    sorted_names.sort();
    sorted_names.dedup();
    label_names.extend(sorted_names);
    let labels: Vec<Option<usize>> = raw_labels
        .iter()
        .map(|name| Some(label_names.iter().position(|l| l == name).unwrap()))
        .collect();

    let cites = fs::read_to_string(&args.cites)
        .with_context(|| format!("reading {}", args.cites.display()))?;
    let mut edges = Vec::new();
    let mut skipped = 0usize;
    for (idx, line) in cites.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            bail!(
                "{}:{}: expected '<cited>\\t<citing>'",
                args.cites.display(),
                idx + 1
            );
        }
        match (ids.get(fields[0]), ids.get(fields[1])) {
            (Some(&a), Some(&b)) => edges.push((a, b, 1.0)),
            _ => skipped += 1,
        }
    }

    let n = rows.len();
    let adjacency = elr_gnn::graph::build_symmetric(n, edges)?;
    let n_edges = adjacency.undirected_edge_count();
    let features = DenseMatrix::from_vec(n, width, rows.into_iter().flatten().collect())?;
    let graph = SparseGraph::new(adjacency, Features::Dense(features), labels, label_names.len())?;
    let split = NodeSplit::random(n, args.train_frac, args.val_frac, args.split_seed);
    let manifest = save_dataset(&args.out_dir, &args.name, &graph, &split)?;
    eprintln!(
        "imported '{}': {} nodes, {} edges, {} classes ({} dangling citation lines skipped)",
        args.name, n, n_edges, label_names.len(), skipped
    );
    Ok(ImportOutput {
        manifest,
        n_nodes: n,
        n_features: width,
        n_classes: label_names.len(),
        n_edges,
        skipped_edges: skipped,
    })
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated: e.g. "gcn,gcn-svd,elr".
    #[arg(long)]
    pub methods: String,
    /// Comma-separated perturbation rates, e.g. "0,0.25,0.5".
    #[arg(long)]
    pub rates: String,
    /// Comma-separated seeds, e.g. "0,1,2,3,4".
    #[arg(long)]
    pub seeds: String,
    /// Attack kind applied at nonzero rates: random | dice.
    #[arg(long, default_value = "random")]
    pub kind: String,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: CommonTrainArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub rate: f64,
    pub n_runs: usize,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub mean_train_s: f64,
    pub mean_total_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub method: Method,
    pub rate: f64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<CellFailure>,
    pub csv: PathBuf,
}

/// Write a derived dataset that shares every file with the base dataset
/// except the (attacked) edge list.
fn write_attacked_dataset(
    base_manifest_path: &Path,
    base: &DatasetManifest,
    attacked: &elr_gnn::graph::SparseMatrix,
    dir: &Path,
    tag: &str,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let edges_path = dir.join("edges.tsv");
    write_edges(&edges_path, attacked)?;
    let base_dir = base_manifest_path.parent().unwrap_or(Path::new("."));
    let absolute = |entry: &FileEntry| FileEntry {
        path: base_dir.join(&entry.path).canonicalize().unwrap_or_else(|_| base_dir.join(&entry.path)),
        sha256: entry.sha256.clone(),
    };
    let manifest = DatasetManifest {
        name: format!("{}-{tag}", base.name),
        n_nodes: base.n_nodes,
        n_features: base.n_features,
        n_classes: base.n_classes,
        edges: FileEntry {
            path: PathBuf::from("edges.tsv"),
            sha256: elr_gnn::dataio::sha256_file(&edges_path)?,
        },
        features: base.features.as_ref().map(absolute),
        labels: absolute(&base.labels),
        split: absolute(&base.split),
    };
    let manifest_path = dir.join("manifest.json");
    manifest.write(&manifest_path)?;
    Ok(manifest_path)
}

struct Cell {
    method: Method,
    rate: f64,
    seed: u64,
}

/// Orchestrate attack + train + eval over the (method x rate x seed) grid.
/// Per-cell failures are recorded and the sweep continues.
pub fn run_sweep(args: &SweepArgs) -> Result<SweepOutput> {
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .map(|s| Method::from_str(s.trim()).map_err(|e| anyhow!(e)))
        .collect::<Result<_>>()?;
    let rates: Vec<f64> = args
        .rates
        .split(',')
        .map(|s| s.trim().parse::<f64>().context("bad rate"))
        .collect::<Result<_>>()?;
    let seeds: Vec<u64> = args
        .seeds
        .split(',')
        .map(|s| s.trim().parse::<u64>().context("bad seed"))
        .collect::<Result<_>>()?;
    let kind = AttackKind::from_str(&args.kind).map_err(|e| anyhow!(e))?;
    let base_manifest = DatasetManifest::read(&args.manifest)?;
    let (graph, _) = load_dataset(&args.manifest)?;
    fs::create_dir_all(&args.out_dir)?;

    let mut cells = Vec::new();
    for &rate in &rates {
        for &seed in &seeds {
            for &method in &methods {
                cells.push(Cell { method, rate, seed });
            }
        }
    }

    let threads: usize = std::env::var("ELR_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
        .max(1);

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<std::result::Result<RunRecord, CellFailure>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());

    let run_cell = |cell: &Cell| -> Result<RunRecord> {
        let tag = format!("{}_{:?}_r{}_s{}", cell.method, kind, cell.rate, cell.seed);
        let cell_dir = args.out_dir.join(tag.replace([':', ' '], "_").to_lowercase());
        let manifest_path = if cell.rate == 0.0 {
            args.manifest.clone()
        } else {
            let spec = AttackSpec {
                kind,
                rate: cell.rate,
                seed: cell.seed,
            };
            let attacked = apply_attack(&graph.adjacency, &graph.labels, &spec)?;
            write_attacked_dataset(
                &args.manifest,
                &base_manifest,
                &attacked,
                &cell_dir.join("data"),
                &format!("r{}_s{}", cell.rate, cell.seed),
            )?
        };
        train_run(
            &manifest_path,
            cell.method,
            &args.common,
            cell.seed,
            &cell_dir.join("ckpt"),
        )
    };

    std::thread::scope(|scope| {
        for _ in 0..threads.min(cells.len().max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= cells.len() {
                    break;
                }
                let cell = &cells[idx];
                eprintln!(
                    "sweep cell {}/{}: {} rate {} seed {}",
                    idx + 1,
                    cells.len(),
                    cell.method,
                    cell.rate,
                    cell.seed
                );
                let outcome = run_cell(cell).map_err(|e| CellFailure {
                    method: cell.method,
                    rate: cell.rate,
                    seed: cell.seed,
                    error: format!("{e:#}"),
                });
                results.lock().expect("no poisoned lock")[idx] = Some(outcome);
            });
        }
    });

    let results = results.into_inner().expect("no poisoned lock");
    let mut failures = Vec::new();
    // Group successful runs by (method order, rate order), preserving the
    // grid ordering for the output table.
    let mut grouped: BTreeMap<(usize, usize), Vec<RunRecord>> = BTreeMap::new();
    let method_index = |m: Method| methods.iter().position(|&x| x == m).unwrap();
    let rate_index = |r: f64| rates.iter().position(|&x| x == r).unwrap();
    for (cell, outcome) in cells.iter().zip(results) {
        match outcome.expect("every cell ran") {
            Ok(record) => grouped
                .entry((method_index(cell.method), rate_index(cell.rate)))
                .or_default()
                .push(record),
            Err(failure) => failures.push(failure),
        }
    }

    let mut rows = Vec::new();
    let mut csv = String::from("method,rate,mean_acc,std_acc,mean_train_s,mean_total_s\n");
    for ((method_idx, rate_idx), records) in &grouped {
        let method = methods[*method_idx];
        let rate = rates[*rate_idx];
        let accs: Vec<f64> = records.iter().map(|r| r.test_accuracy).collect();
        let (mean_acc, std_acc) = mean_std(&accs);
        let (mean_train_s, _) = mean_std(&records.iter().map(|r| r.training_s).collect::<Vec<_>>());
        let (mean_total_s, _) = mean_std(&records.iter().map(|r| r.total_s).collect::<Vec<_>>());
        rows.push(SweepRow {
            method,
            rate,
            n_runs: records.len(),
            mean_acc,
            std_acc,
            mean_train_s,
            mean_total_s,
        });
        csv.push_str(&format!(
            "{method},{rate},{mean_acc:.6},{std_acc:.6},{mean_train_s:.3},{mean_total_s:.3}\n"
        ));
    }

    let csv_path = args.out_dir.join("summary.csv");
    fs::write(&csv_path, csv)?;
    Ok(SweepOutput {
        rows,
        failures,
        csv: csv_path,
    })
}
