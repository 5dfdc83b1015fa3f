//! The multi-view classifier.
//!
//! Each enabled view runs a graph convolution over its node graph with
//! features `[I | E]` (one-hot identity plus pretrained vectors, the
//! identity never materialized). Node states are pooled into question
//! embeddings through the incidence matrix, the per-view embeddings are
//! concatenated, and a thresholded cosine graph over questions feeds the
//! final convolution that produces class logits.

mod ablate;
mod checkpoint;
mod train;

pub use ablate::{ablate, ablation_to_tsv, AblationRow};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use train::{predict, train, EpochRecord, Prediction, TrainReport};

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graphs::{normalize_adjacency, GraphBundle, ViewKind};
use crate::nn::{dropout_mask, glorot_uniform, FrozenPattern, GradCheckReport, SparseOperand, Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub enabled_views: Vec<ViewKind>,
    pub hidden_dim: usize,
    /// Cosine threshold of the question graph.
    pub threshold: f64,
    pub dropout: f64,
    pub lr: f64,
    /// L2 penalty on the first-layer view weights.
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Graph convolutions per view (1 or 2).
    pub view_depth: usize,
    /// Width of an optional hidden convolution over the question graph.
    pub final_hidden: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            enabled_views: ViewKind::ALL.to_vec(),
            hidden_dim: 200,
            threshold: 0.5,
            dropout: 0.5,
            lr: 0.001,
            weight_decay: 5e-4,
            max_epochs: 1000,
            patience: 100,
            seed: 42,
            validation_fraction: 0.1,
            view_depth: 1,
            final_hidden: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.enabled_views.is_empty() {
            return bad("at least one view must be enabled".into());
        }
        let mut seen = self.enabled_views.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.enabled_views.len() {
            return bad("enabled_views lists a view twice".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.hidden_dim == 0 || self.final_hidden == Some(0) {
            return bad("layer widths must be positive".into());
        }
        if !(1..=2).contains(&self.view_depth) {
            return bad(format!("view_depth must be 1 or 2, got {}", self.view_depth));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return bad("lr must be positive and weight_decay non-negative".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            ));
        }
        Ok(())
    }

    /// Enabled views in canonical order, which fixes the column layout of
    /// the question embedding.
    pub fn views(&self) -> Vec<ViewKind> {
        ViewKind::ALL.iter().copied().filter(|v| self.enabled_views.contains(v)).collect()
    }
}

/// Named weight tensors in a fixed order. Immutable once trained.
#[derive(Debug, Clone, PartialEq)]
pub struct PqGcnParams {
    pub names: Vec<String>,
    pub values: Vec<Tensor>,
}

impl PqGcnParams {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }
}

/// Sparse operators and features of one view, ready for the forward pass.
#[derive(Debug, Clone)]
pub struct ViewInput {
    pub view: ViewKind,
    pub num_nodes: usize,
    pub adjacency: SparseOperand,
    pub incidence: SparseOperand,
    pub pretrained: Option<Tensor>,
}

impl ViewInput {
    pub fn feature_dim(&self) -> usize {
        self.num_nodes + self.pretrained.as_ref().map_or(0, Tensor::cols)
    }
}

/// Everything the forward pass reads from a bundle.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub views: Vec<ViewInput>,
    pub num_questions: usize,
    pub num_classes: usize,
}

impl ModelInputs {
    pub fn new(bundle: &GraphBundle, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut views = Vec::new();
        for kind in config.views() {
            let data = bundle.view(kind).ok_or_else(|| {
                Error::Validation(format!("view {kind} is enabled but missing from the bundle"))
            })?;
            views.push(ViewInput {
                view: kind,
                num_nodes: data.graph.vocab.len(),
                adjacency: SparseOperand::new(normalize_adjacency(&data.graph)),
                incidence: SparseOperand::new(data.incidence.matrix.clone()),
                pretrained: data.graph.pretrained.clone(),
            });
        }
        if bundle.num_classes() == 0 {
            return Err(Error::Validation("bundle has no labels".into()));
        }
        Ok(ModelInputs {
            views,
            num_questions: bundle.num_questions(),
            num_classes: bundle.num_classes(),
        })
    }
}

fn layer_names(inputs: &ModelInputs, config: &ModelConfig) -> Vec<(String, usize, usize)> {
    let h = config.hidden_dim;
    let mut out = Vec::new();
    for v in &inputs.views {
        out.push((format!("{}.w1", v.view), v.feature_dim(), h));
        if config.view_depth == 2 {
            out.push((format!("{}.w2", v.view), h, h));
        }
    }
    let q = h * inputs.views.len();
    match config.final_hidden {
        Some(fh) => {
            out.push(("question.hidden".into(), q, fh));
            out.push(("question.out".into(), fh, inputs.num_classes));
        }
        None => out.push(("question.out".into(), q, inputs.num_classes)),
    }
    out
}

/// Glorot-initialized parameters, deterministic in `config.seed`.
pub fn init_params(inputs: &ModelInputs, config: &ModelConfig) -> PqGcnParams {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (names, values) = layer_names(inputs, config)
        .into_iter()
        .map(|(name, r, c)| (name, glorot_uniform(r, c, &mut rng)))
        .unzip();
    PqGcnParams { names, values }
}

/// Check that `params` has the names and shapes the model expects.
pub fn check_params(inputs: &ModelInputs, config: &ModelConfig, params: &PqGcnParams) -> Result<()> {
    let want = layer_names(inputs, config);
    if want.len() != params.values.len() || params.names.len() != params.values.len() {
        return Err(Error::Model(format!(
            "expected {} parameter tensors, found {}",
            want.len(),
            params.values.len()
        )));
    }
    for ((name, r, c), (have, t)) in want.iter().zip(params.names.iter().zip(&params.values)) {
        if name != have || t.shape() != (*r, *c) {
            return Err(Error::Model(format!(
                "parameter {have} {:?} does not match expected {name} ({r}, {c})",
                t.shape()
            )));
        }
        if !t.is_finite() {
            return Err(Error::Model(format!("parameter {have} has non-finite entries")));
        }
    }
    Ok(())
}

/// First-layer view weights, the ones that receive weight decay.
pub(crate) fn is_first_layer(name: &str) -> bool {
    name.ends_with(".w1")
}

/// Stochastic choices of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardOptions<'a> {
    /// Dropout mask over the question embedding; `None` is evaluation mode.
    pub dropout: Option<Arc<Tensor>>,
    /// Question-graph pattern to reuse instead of thresholding afresh.
    pub frozen: Option<&'a FrozenPattern>,
}

/// Training-mode dropout mask for one epoch.
pub fn epoch_dropout(inputs: &ModelInputs, config: &ModelConfig, epoch: usize) -> Result<Option<Arc<Tensor>>> {
    if config.dropout == 0.0 {
        return Ok(None);
    }
    let cols = config.hidden_dim * inputs.views.len();
    let seed = config
        .seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(epoch as u64 + 1);
    Ok(Some(Arc::new(dropout_mask(inputs.num_questions, cols, config.dropout, seed)?)))
}

pub(crate) struct Traced {
    pub params: Vec<Var>,
    pub logits: Var,
    pub pattern: FrozenPattern,
    pub question_embedding: Var,
}

/// Record the forward pass on `tape`.
pub(crate) fn trace(
    tape: &mut Tape,
    inputs: &ModelInputs,
    config: &ModelConfig,
    values: &[Tensor],
    opts: &ForwardOptions<'_>,
) -> Result<Traced> {
    let vars = values.iter().map(|v| tape.param(v.clone())).collect::<Result<Vec<_>>>()?;
    let mut next = 0;
    let mut take = || {
        let v = vars[next];
        next += 1;
        v
    };
    let mut pooled = Vec::with_capacity(inputs.views.len());
    for view in &inputs.views {
        let w = take();
        let n = view.num_nodes;
        // [I | E] W = W[..n] + E W[n..]
        let xw = match &view.pretrained {
            Some(e) => {
                let top = tape.slice_rows(w, 0, n)?;
                let bottom = tape.slice_rows(w, n, view.feature_dim())?;
                let e = tape.constant(e.clone())?;
                let ew = tape.matmul(e, bottom)?;
                tape.add(top, ew)?
            }
            None => w,
        };
        let conv = tape.spmm(&view.adjacency, xw)?;
        let mut h = tape.relu(conv)?;
        if config.view_depth == 2 {
            let w2 = take();
            let hw = tape.matmul(h, w2)?;
            let conv = tape.spmm(&view.adjacency, hw)?;
            h = tape.relu(conv)?;
        }
        pooled.push(tape.spmm(&view.incidence, h)?);
    }
    let q = tape.concat_cols(&pooled)?;
    let q = tape.dropout(q, opts.dropout.clone())?;
    let unit = tape.row_l2_normalize(q)?;
    let (graph, pattern) = tape.threshold_graph(unit, config.threshold, opts.frozen)?;
    let mut x = q;
    if config.final_hidden.is_some() {
        let wh = take();
        let xw = tape.matmul(x, wh)?;
        let conv = tape.spmm_var(graph, xw)?;
        x = tape.relu(conv)?;
    }
    let w_out = take();
    let xw = tape.matmul(x, w_out)?;
    let logits = tape.spmm_var(graph, xw)?;
    Ok(Traced {
        params: vars,
        logits,
        pattern,
        question_embedding: q,
    })
}

/// Logits for every question (rows) over all classes (columns).
pub fn forward(inputs: &ModelInputs, config: &ModelConfig, params: &PqGcnParams, opts: &ForwardOptions<'_>) -> Result<Tensor> {
    check_params(inputs, config, params)?;
    let mut tape = Tape::new();
    let t = trace(&mut tape, inputs, config, &params.values, opts)?;
    Ok(tape.value(t.logits)?.clone())
}

/// The concatenated question embedding `Q` before dropout.
pub fn question_embedding(inputs: &ModelInputs, config: &ModelConfig, params: &PqGcnParams) -> Result<Tensor> {
    check_params(inputs, config, params)?;
    let mut tape = Tape::new();
    let t = trace(&mut tape, inputs, config, &params.values, &ForwardOptions::default())?;
    Ok(tape.value(t.question_embedding)?.clone())
}

/// Labelled rows of `ids` with their labels.
pub(crate) fn labelled(bundle: &GraphBundle, ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
    ids.iter()
        .filter_map(|&i| bundle.questions[i].label.map(|l| (i, l)))
        .unzip()
}

/// Finite-difference check of the training loss over every parameter.
///
/// Dropout uses the first epoch's mask and the question-graph pattern is
/// frozen at the unperturbed parameters, so the loss is a smooth function of
/// the weights away from ReLU kinks.
pub fn model_gradient_check(
    bundle: &GraphBundle,
    config: &ModelConfig,
    params: &PqGcnParams,
    epsilon: f64,
    coords_per_param: usize,
) -> Result<GradCheckReport> {
    let inputs = ModelInputs::new(bundle, config)?;
    check_params(&inputs, config, params)?;
    let (rows, labels) = labelled(bundle, &bundle.train_ids());
    if rows.is_empty() {
        return Err(Error::Validation("no labelled training questions".into()));
    }
    let dropout = epoch_dropout(&inputs, config, 0)?;
    let pattern = {
        let mut tape = Tape::new();
        let opts = ForwardOptions {
            dropout: dropout.clone(),
            frozen: None,
        };
        trace(&mut tape, &inputs, config, &params.values, &opts)?.pattern
    };
    let opts = ForwardOptions {
        dropout,
        frozen: Some(&pattern),
    };
    crate::nn::gradient_check(&params.values, epsilon, coords_per_param, config.seed, |values| {
        let mut tape = Tape::new();
        let t = trace(&mut tape, &inputs, config, values, &opts)?;
        let loss = tape.masked_softmax_cross_entropy(t.logits, &labels, &rows)?;
        let value = tape.value(loss)?.item();
        let grads = tape.backward(loss)?;
        let out = t
            .params
            .iter()
            .zip(values)
            .map(|(&v, x)| grads.get_or_zeros(v, x.shape()))
            .collect();
        Ok((value, out))
    })
}
