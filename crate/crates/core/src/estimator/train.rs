//! Joint training of the classifier and the low-rank factor, plus the two
//! reference pipelines (plain GCN and one-shot SVD preprocessing).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{coarse_init, fr_loss, normalized_estimate, sim_loss, LowRankFactor, TrainError};
use crate::gnn::{
    accuracy, adam_step, cross_entropy, gcn_backward, gcn_forward, sgd_momentum_step, AdamState,
    CeMode, GcnModel, MomentumState,
};
use crate::graph::{sym_normalize, DenseMatrix, NodeSplit, SparseGraph, SparseMatrix};
use crate::linalg::SvdConfig;

/// Seed-stream tags so independent random draws never alias.
const SEED_SVD: u64 = 1;
const SEED_WEIGHTS: u64 = 2;
const SEED_XAVIER: u64 = 3;

fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Which pipeline trains the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Elr,
    Gcn,
    GcnSvd,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Elr => "elr",
            Method::Gcn => "gcn",
            Method::GcnSvd => "gcn-svd",
        };
        f.write_str(name)
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "elr" => Ok(Method::Elr),
            "gcn" => Ok(Method::Gcn),
            "gcn-svd" => Ok(Method::GcnSvd),
            other => Err(format!("unknown method '{other}' (expected elr|gcn|gcn-svd)")),
        }
    }
}

/// Ablation variants of the full method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    None,
    NoSim,
    NoFr,
    EpsZero,
    RandInit,
    JointUpdate,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Variant::None => "none",
            Variant::NoSim => "no_sim",
            Variant::NoFr => "no_fr",
            Variant::EpsZero => "eps_zero",
            Variant::RandInit => "rand_init",
            Variant::JointUpdate => "joint_update",
        };
        f.write_str(name)
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Variant::None),
            "no_sim" => Ok(Variant::NoSim),
            "no_fr" => Ok(Variant::NoFr),
            "eps_zero" => Ok(Variant::EpsZero),
            "rand_init" => Ok(Variant::RandInit),
            "joint_update" => Ok(Variant::JointUpdate),
            other => Err(format!(
                "unknown variant '{other}' (expected none|no_sim|no_fr|eps_zero|rand_init|joint_update)"
            )),
        }
    }
}

/// Apply an ablation to a base configuration.
pub fn ablation_variant(cfg: &TrainConfig, variant: Variant) -> TrainConfig {
    let mut out = cfg.clone();
    match variant {
        Variant::None => {}
        Variant::NoSim => out.lambda_sim = 0.0,
        Variant::NoFr => out.lambda_fr = 0.0,
        Variant::EpsZero => out.epsilon = 0.0,
        Variant::RandInit => out.rand_init = true,
        Variant::JointUpdate => out.joint_update = true,
    }
    out
}

/// Every knob of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Rank of the adjacency estimate.
    pub d: usize,
    /// Weak-edge prune threshold.
    pub epsilon: f64,
    pub lambda_sim: f64,
    pub lambda_fr: f64,
    pub epochs: usize,
    pub gnn_lr: f64,
    pub gnn_weight_decay: f64,
    /// Learning rate of the factor's SGD optimizer.
    pub u_lr: f64,
    pub momentum: f64,
    pub hidden: usize,
    pub seed: u64,
    pub ce_mode: CeMode,
    /// Keep the best-validation checkpoint instead of the final epoch.
    pub select_best_val: bool,
    /// Scale feature rows to unit L1 mass.
    pub feature_row_normalize: bool,
    /// Self-loop handling in the normalization; `None` keeps the per-method
    /// default (plain GCN renormalizes A + I, the estimate path does not).
    pub self_loops: Option<bool>,
    /// Similarity target: the normalized estimate (default) or the raw
    /// pruned reconstruction.
    pub sim_on_normalized: bool,
    pub svd_oversample: usize,
    pub svd_power_iters: usize,
    /// Random Xavier-normal factor init instead of the truncated SVD.
    pub rand_init: bool,
    /// Update the classifier and the factor from the same forward trace.
    pub joint_update: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d: 50,
            epsilon: 0.01,
            lambda_sim: 1e-3,
            lambda_fr: 1e-4,
            epochs: 1000,
            gnn_lr: 1e-2,
            gnn_weight_decay: 5e-4,
            u_lr: 1e-2,
            momentum: 0.9,
            hidden: 16,
            seed: 0,
            ce_mode: CeMode::Mean,
            select_best_val: true,
            feature_row_normalize: true,
            self_loops: None,
            sim_on_normalized: true,
            svd_oversample: 10,
            svd_power_iters: 8,
            rand_init: false,
            joint_update: false,
        }
    }
}

impl TrainConfig {
    /// Collect every validation failure at once.
    pub fn validation_errors(&self, graph: &SparseGraph, split: &NodeSplit) -> Vec<String> {
        let mut errors = Vec::new();
        if self.d == 0 {
            errors.push("rank d must be at least 1".into());
        }
        if self.d > graph.n_nodes {
            errors.push(format!(
                "rank d = {} exceeds node count {}",
                self.d, graph.n_nodes
            ));
        }
        if self.epsilon < 0.0 || !self.epsilon.is_finite() {
            errors.push("epsilon must be finite and >= 0".into());
        }
        for (name, v) in [
            ("lambda_sim", self.lambda_sim),
            ("lambda_fr", self.lambda_fr),
            ("gnn_lr", self.gnn_lr),
            ("gnn_weight_decay", self.gnn_weight_decay),
            ("u_lr", self.u_lr),
            ("momentum", self.momentum),
        ] {
            if v < 0.0 || !v.is_finite() {
                errors.push(format!("{name} must be finite and >= 0"));
            }
        }
        if self.hidden == 0 {
            errors.push("hidden width must be at least 1".into());
        }
        if split.train_ids.is_empty() {
            errors.push("train split is empty".into());
        }
        for &node in &split.train_ids {
            if graph.labels.get(node).copied().flatten().is_none() {
                errors.push(format!("train node {node} is unlabeled"));
                break;
            }
        }
        errors
    }

    fn validate(&self, graph: &SparseGraph, split: &NodeSplit) -> Result<(), TrainError> {
        let errors = self.validation_errors(graph, split);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(TrainError::InvalidConfig(errors.join("; ")))
        }
    }

    fn svd_config(&self, n: usize) -> SvdConfig {
        SvdConfig {
            d: self.d,
            oversample: self.svd_oversample.min(n.saturating_sub(self.d)),
            power_iters: self.svd_power_iters,
            seed: derive_seed(self.seed, SEED_SVD),
        }
    }
}

/// Per-epoch bookkeeping. Entry `e` describes the model state entering
/// epoch `e`; the last entry describes the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub ce: f64,
    pub sim: f64,
    pub fr: f64,
    pub total: f64,
    pub val_accuracy: f64,
}

/// Wall-clock split mirroring the preprocessing/training distinction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainTiming {
    pub preprocess_s: f64,
    pub training_s: f64,
}

impl TrainTiming {
    pub fn total_s(&self) -> f64 {
        self.preprocess_s + self.training_s
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: GcnModel,
    pub factor: LowRankFactor,
    /// Normalized adjacency the selected model classifies with.
    pub a_tilde: SparseMatrix,
    pub history: Vec<EpochStats>,
    pub timing: TrainTiming,
    /// Epoch whose state was selected (equals `epochs` for final-select).
    pub selected_epoch: usize,
    /// Validation accuracy at the selected epoch.
    pub val_accuracy: f64,
}

/// Forward the graph through a model against a given normalized adjacency
/// and return the class probabilities.
pub fn forward_probabilities(
    graph: &SparseGraph,
    model: &GcnModel,
    a_norm: &SparseMatrix,
    feature_row_normalize: bool,
) -> Result<DenseMatrix, TrainError> {
    let x = graph.features.to_csr(graph.n_nodes, feature_row_normalize);
    let trace = gcn_forward(&x, a_norm, model)?;
    Ok(trace.probabilities)
}

fn epoch_val_accuracy(
    p: &DenseMatrix,
    labels: &[Option<usize>],
    val_ids: &[usize],
) -> Result<f64, TrainError> {
    if val_ids.is_empty() {
        return Ok(0.0);
    }
    Ok(accuracy(p, labels, val_ids)?)
}

struct Selection {
    best_val: f64,
    best_epoch: usize,
    model: GcnModel,
    factor: LowRankFactor,
}

impl Selection {
    fn new(model: &GcnModel, factor: &LowRankFactor) -> Self {
        Self {
            best_val: f64::NEG_INFINITY,
            best_epoch: 0,
            model: model.clone(),
            factor: factor.clone(),
        }
    }

    fn offer(&mut self, epoch: usize, val: f64, model: &GcnModel, factor: &LowRankFactor) {
        if val > self.best_val {
            self.best_val = val;
            self.best_epoch = epoch;
            self.model = model.clone();
            self.factor = factor.clone();
        }
    }
}

/// Train the full method: alternating updates of the classifier (Adam on the
/// cross-entropy) and the factor (SGD with momentum on the joint objective).
pub fn train(
    graph: &SparseGraph,
    split: &NodeSplit,
    cfg: &TrainConfig,
) -> Result<TrainedModel, TrainError> {
    cfg.validate(graph, split)?;
    let n = graph.n_nodes;
    let self_loops = cfg.self_loops.unwrap_or(false);

    let t_pre = Instant::now();
    let x = graph.features.to_csr(n, cfg.feature_row_normalize);
    let mut factor = if cfg.rand_init {
        LowRankFactor::xavier_normal(n, cfg.d, derive_seed(cfg.seed, SEED_XAVIER))
    } else {
        coarse_init(&graph.adjacency, cfg.d, &cfg.svd_config(n))?
    };
    let preprocess_s = t_pre.elapsed().as_secs_f64();

    let t_train = Instant::now();
    let mut model = GcnModel::glorot(
        graph.feature_dim(),
        cfg.hidden,
        graph.n_classes,
        derive_seed(cfg.seed, SEED_WEIGHTS),
    );
    let mut adam_w1 = AdamState::new(model.w1.n_rows(), model.w1.n_cols());
    let mut adam_w2 = AdamState::new(model.w2.n_rows(), model.w2.n_cols());
    let mut sgd_u = MomentumState::new(n, cfg.d);
    let mut selection = Selection::new(&model, &factor);
    let mut history = Vec::with_capacity(cfg.epochs + 1);

    for epoch in 0..=cfg.epochs {
        let est = normalized_estimate(&factor, cfg.epsilon, self_loops)?;
        let trace = gcn_forward(&x, &est.a_tilde, &model)?;
        let ce = cross_entropy(&trace.probabilities, &graph.labels, &split.train_ids, cfg.ce_mode)?;
        let sim = if cfg.sim_on_normalized {
            sim_loss(&graph.adjacency, &est.a_tilde)
        } else {
            sim_loss(&graph.adjacency, &est.pruned)
        };
        let fr = fr_loss(&factor);
        let total = ce + cfg.lambda_sim * sim + cfg.lambda_fr * fr;
        if !total.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let val = epoch_val_accuracy(&trace.probabilities, &graph.labels, &split.val_ids)?;
        history.push(EpochStats {
            epoch,
            ce,
            sim,
            fr,
            total,
            val_accuracy: val,
        });
        selection.offer(epoch, val, &model, &factor);
        if epoch == cfg.epochs {
            break;
        }

        let back = gcn_backward(
            &trace,
            &x,
            &est.a_tilde,
            &model,
            &graph.labels,
            &split.train_ids,
            cfg.ce_mode,
        )?;

        if cfg.joint_update {
            // Both updates from the same trace.
            let u_grad = super::grad::u_gradient_from_parts(
                &graph.adjacency,
                &factor,
                &est,
                &trace,
                &back,
                cfg.lambda_sim,
                cfg.lambda_fr,
                cfg.sim_on_normalized,
            );
            adam_step(&mut model.w1, &back.grad_w1, &mut adam_w1, cfg.gnn_lr, cfg.gnn_weight_decay);
            adam_step(&mut model.w2, &back.grad_w2, &mut adam_w2, cfg.gnn_lr, cfg.gnn_weight_decay);
            sgd_momentum_step(factor.u_mut(), &u_grad, &mut sgd_u, cfg.u_lr, cfg.momentum);
        } else {
            // Classifier step on the cross-entropy with the factor held fixed.
            adam_step(&mut model.w1, &back.grad_w1, &mut adam_w1, cfg.gnn_lr, cfg.gnn_weight_decay);
            adam_step(&mut model.w2, &back.grad_w2, &mut adam_w2, cfg.gnn_lr, cfg.gnn_weight_decay);
            // Factor step on the joint objective with the updated classifier
            // held fixed; same estimate, fresh trace.
            let trace2 = gcn_forward(&x, &est.a_tilde, &model)?;
            let back2 = gcn_backward(
                &trace2,
                &x,
                &est.a_tilde,
                &model,
                &graph.labels,
                &split.train_ids,
                cfg.ce_mode,
            )?;
            let u_grad = super::grad::u_gradient_from_parts(
                &graph.adjacency,
                &factor,
                &est,
                &trace2,
                &back2,
                cfg.lambda_sim,
                cfg.lambda_fr,
                cfg.sim_on_normalized,
            );
            sgd_momentum_step(factor.u_mut(), &u_grad, &mut sgd_u, cfg.u_lr, cfg.momentum);
        }
    }

    let use_best = cfg.select_best_val && !split.val_ids.is_empty();
    let (sel_model, sel_factor, selected_epoch) = if use_best {
        (selection.model, selection.factor, selection.best_epoch)
    } else {
        (model, factor, cfg.epochs)
    };
    let a_tilde = normalized_estimate(&sel_factor, cfg.epsilon, self_loops)?.a_tilde;
    let val_accuracy = history[selected_epoch].val_accuracy;
    let training_s = t_train.elapsed().as_secs_f64();

    Ok(TrainedModel {
        model: sel_model,
        factor: sel_factor,
        a_tilde,
        history,
        timing: TrainTiming {
            preprocess_s,
            training_s,
        },
        selected_epoch,
        val_accuracy,
    })
}

/// Classifier-only loop shared by the plain-GCN and SVD baselines; the
/// adjacency is fixed for the whole run.
fn train_theta_only(
    graph: &SparseGraph,
    split: &NodeSplit,
    cfg: &TrainConfig,
    x: &SparseMatrix,
    a_norm: &SparseMatrix,
    factor: LowRankFactor,
    preprocess_s: f64,
) -> Result<TrainedModel, TrainError> {
    let t_train = Instant::now();
    let mut model = GcnModel::glorot(
        graph.feature_dim(),
        cfg.hidden,
        graph.n_classes,
        derive_seed(cfg.seed, SEED_WEIGHTS),
    );
    let mut adam_w1 = AdamState::new(model.w1.n_rows(), model.w1.n_cols());
    let mut adam_w2 = AdamState::new(model.w2.n_rows(), model.w2.n_cols());
    let mut selection = Selection::new(&model, &factor);
    let mut history = Vec::with_capacity(cfg.epochs + 1);

    for epoch in 0..=cfg.epochs {
        let trace = gcn_forward(x, a_norm, &model)?;
        let ce = cross_entropy(&trace.probabilities, &graph.labels, &split.train_ids, cfg.ce_mode)?;
        if !ce.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let val = epoch_val_accuracy(&trace.probabilities, &graph.labels, &split.val_ids)?;
        history.push(EpochStats {
            epoch,
            ce,
            sim: 0.0,
            fr: 0.0,
            total: ce,
            val_accuracy: val,
        });
        selection.offer(epoch, val, &model, &factor);
        if epoch == cfg.epochs {
            break;
        }
        let back = gcn_backward(
            &trace,
            x,
            a_norm,
            &model,
            &graph.labels,
            &split.train_ids,
            cfg.ce_mode,
        )?;
        adam_step(&mut model.w1, &back.grad_w1, &mut adam_w1, cfg.gnn_lr, cfg.gnn_weight_decay);
        adam_step(&mut model.w2, &back.grad_w2, &mut adam_w2, cfg.gnn_lr, cfg.gnn_weight_decay);
    }

    let use_best = cfg.select_best_val && !split.val_ids.is_empty();
    let (sel_model, selected_epoch) = if use_best {
        (selection.model, selection.best_epoch)
    } else {
        (model, cfg.epochs)
    };
    let val_accuracy = history[selected_epoch].val_accuracy;
    let training_s = t_train.elapsed().as_secs_f64();
    Ok(TrainedModel {
        model: sel_model,
        factor,
        a_tilde: a_norm.clone(),
        history,
        timing: TrainTiming {
            preprocess_s,
            training_s,
        },
        selected_epoch,
        val_accuracy,
    })
}

/// Plain GCN baseline on the input adjacency (conventional A + I
/// renormalization unless overridden).
pub fn gcn_train(
    graph: &SparseGraph,
    split: &NodeSplit,
    cfg: &TrainConfig,
) -> Result<TrainedModel, TrainError> {
    let mut relaxed = cfg.clone();
    relaxed.d = relaxed.d.clamp(1, graph.n_nodes.max(1));
    relaxed.validate(graph, split)?;
    let t_pre = Instant::now();
    let x = graph.features.to_csr(graph.n_nodes, cfg.feature_row_normalize);
    let a_norm = sym_normalize(&graph.adjacency, cfg.self_loops.unwrap_or(true));
    let preprocess_s = t_pre.elapsed().as_secs_f64();
    train_theta_only(
        graph,
        split,
        cfg,
        &x,
        &a_norm,
        LowRankFactor::empty(graph.n_nodes),
        preprocess_s,
    )
}

/// One-shot SVD preprocessing baseline: reconstruct at rank d, prune at
/// epsilon = 0, normalize, then train only the classifier.
pub fn svd_baseline_train(
    graph: &SparseGraph,
    split: &NodeSplit,
    cfg: &TrainConfig,
) -> Result<TrainedModel, TrainError> {
    cfg.validate(graph, split)?;
    let n = graph.n_nodes;
    let self_loops = cfg.self_loops.unwrap_or(false);
    let t_pre = Instant::now();
    let x = graph.features.to_csr(n, cfg.feature_row_normalize);
    let factor = coarse_init(&graph.adjacency, cfg.d, &cfg.svd_config(n))?;
    let est = normalized_estimate(&factor, 0.0, self_loops)?;
    let preprocess_s = t_pre.elapsed().as_secs_f64();
    train_theta_only(graph, split, cfg, &x, &est.a_tilde, factor, preprocess_s)
}

/// Dispatch by method name.
pub fn train_method(
    method: Method,
    graph: &SparseGraph,
    split: &NodeSplit,
    cfg: &TrainConfig,
) -> Result<TrainedModel, TrainError> {
    match method {
        Method::Elr => train(graph, split, cfg),
        Method::Gcn => gcn_train(graph, split, cfg),
        Method::GcnSvd => svd_baseline_train(graph, split, cfg),
    }
}
