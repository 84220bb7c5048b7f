//! Two-step evidence-transfer training and the evidence screening step.
//!
//! The initialization step trains the autoencoder on corrupted-input to
//! clean-target pairs under the SSIM loss and never consults evidence. The
//! transfer step continues from an initialized model and jointly minimizes
//! the reconstruction loss plus the lambda-weighted mean cross-entropy of
//! the evidence heads. Both steps share one loop, so with lambda = 0 the
//! transfer step reproduces the initialization trajectory bitwise.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::adam::{AdamConfig, AdamState};
use crate::error::{CoreError, Result};
use crate::layer::{Activation, DenseLayer, LayerGrads};
use crate::loss::{softmax_cross_entropy, ssim_loss, SsimConfig, TransferConfig, LOG_CLIP};
use crate::matrix::Matrix;
use crate::model::{AutoencoderModel, EvidenceSet};
use crate::rng::{derive_seed, Rng};

/// Budget and optimizer settings for one training call.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// 0 trains full-batch; otherwise per-epoch shuffled minibatches.
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub ssim: SsimConfig,
    /// Apply zero-masking corruption to the inputs (targets stay clean).
    pub corrupt: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size: 0,
            optimizer: AdamConfig::default(),
            ssim: SsimConfig::default(),
            corrupt: true,
            seed,
        }
    }
}

/// Loss trajectory of an initialization run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Mean reconstruction loss per epoch.
    pub loss_curve: Vec<f64>,
}

/// Loss trajectories of a transfer run, with the objective terms separated.
#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub total_curve: Vec<f64>,
    pub ae_curve: Vec<f64>,
    /// One cross-entropy curve per evidence source.
    pub ce_curves: Vec<Vec<f64>>,
}

/// Zero-masks each entry independently with probability `rate`.
pub fn corrupt_input(batch: &Matrix, rate: f64, seed: u64) -> Result<Matrix> {
    validate_rate(rate)?;
    let mut rng = Rng::new(seed);
    Ok(corrupt_with_rng(batch, rate, &mut rng))
}

fn validate_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(CoreError::Config(format!(
            "corruption rate must lie in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

fn corrupt_with_rng(batch: &Matrix, rate: f64, rng: &mut Rng) -> Matrix {
    let mut out = batch.clone();
    for v in out.as_mut_slice() {
        if rng.uniform() < rate {
            *v = 0.0;
        }
    }
    out
}

/// Initialization step: unsupervised reconstruction training. No evidence
/// is consulted.
pub fn train_init(
    model: &mut AutoencoderModel,
    data: &Matrix,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let curves = run_training(model, data, None, cfg)?;
    Ok(TrainOutcome {
        loss_curve: curves.ae,
    })
}

/// Transfer step: joint optimization of reconstruction and the per-source
/// evidence cross-entropies. Requires heads attached for every source.
pub fn train_transfer(
    model: &mut AutoencoderModel,
    data: &Matrix,
    evidence: &EvidenceSet,
    transfer: &TransferConfig,
    cfg: &TrainConfig,
) -> Result<TransferOutcome> {
    if evidence.row_count() != data.rows() {
        return Err(CoreError::Alignment(format!(
            "evidence has {} rows but data has {}",
            evidence.row_count(),
            data.rows()
        )));
    }
    if transfer.evidence_count != evidence.len() {
        return Err(CoreError::Config(format!(
            "transfer config declares {} sources, evidence set has {}",
            transfer.evidence_count,
            evidence.len()
        )));
    }
    if model.heads().len() != evidence.len() {
        return Err(CoreError::Config(format!(
            "model has {} heads for {} evidence sources; attach heads first",
            model.heads().len(),
            evidence.len()
        )));
    }
    for (head, (name, source)) in model
        .heads()
        .iter()
        .zip(evidence.names().iter().zip(evidence.sources()))
    {
        if head.name != *name || head.layer.output_width() != source.cols() {
            return Err(CoreError::Config(format!(
                "head '{}' ({} classes) does not match source '{}' ({} classes)",
                head.name,
                head.layer.output_width(),
                name,
                source.cols()
            )));
        }
    }
    let curves = run_training(model, data, Some((evidence, transfer)), cfg)?;
    Ok(TransferOutcome {
        total_curve: curves.total,
        ae_curve: curves.ae,
        ce_curves: curves.ce,
    })
}

struct Curves {
    total: Vec<f64>,
    ae: Vec<f64>,
    ce: Vec<Vec<f64>>,
}

/// Flattened gradient blocks in model parameter order.
struct GradAccumulator {
    blocks: Vec<Vec<f64>>,
}

impl GradAccumulator {
    fn store(&mut self, slot: usize, grads: &LayerGrads) {
        self.blocks[2 * slot].copy_from_slice(grads.weights.as_slice());
        self.blocks[2 * slot + 1].copy_from_slice(&grads.bias);
    }
}

fn block_names(model: &AutoencoderModel) -> Vec<String> {
    let mut names = Vec::new();
    for (i, _) in model.encoder_layers().iter().enumerate() {
        names.push(format!("encoder.{i}.weights"));
        names.push(format!("encoder.{i}.bias"));
    }
    for (i, _) in model.decoder_layers().iter().enumerate() {
        names.push(format!("decoder.{i}.weights"));
        names.push(format!("decoder.{i}.bias"));
    }
    for head in model.heads() {
        names.push(format!("head.{}.weights", head.name));
        names.push(format!("head.{}.bias", head.name));
    }
    names
}

fn block_sizes(model: &AutoencoderModel) -> Vec<usize> {
    let mut sizes = Vec::new();
    for l in model
        .encoder_layers()
        .iter()
        .chain(model.decoder_layers())
        .chain(model.heads().iter().map(|h| &h.layer))
    {
        sizes.push(l.weights.as_slice().len());
        sizes.push(l.bias.len());
    }
    sizes
}

fn param_blocks_mut(model: &mut AutoencoderModel) -> Vec<&mut [f64]> {
    let mut blocks: Vec<&mut [f64]> = Vec::new();
    let (encoder, decoder, heads) = model.parts_mut();
    for layer in encoder.iter_mut().chain(decoder.iter_mut()) {
        let DenseLayer { weights, bias, .. } = layer;
        blocks.push(weights.as_mut_slice());
        blocks.push(bias.as_mut_slice());
    }
    for head in heads.iter_mut() {
        let DenseLayer { weights, bias, .. } = &mut head.layer;
        blocks.push(weights.as_mut_slice());
        blocks.push(bias.as_mut_slice());
    }
    blocks
}

fn run_training(
    model: &mut AutoencoderModel,
    data: &Matrix,
    evidence: Option<(&EvidenceSet, &TransferConfig)>,
    cfg: &TrainConfig,
) -> Result<Curves> {
    if data.rows() == 0 {
        return Err(CoreError::Count("empty training data".into()));
    }
    if data.cols() != model.input_dim() {
        return Err(CoreError::Shape(format!(
            "data has {} columns but the model expects {}",
            data.cols(),
            model.input_dim()
        )));
    }
    validate_rate(model.corruption_rate())?;

    let source_count = evidence.map(|(e, _)| e.len()).unwrap_or(0);
    let mut curves = Curves {
        total: Vec::with_capacity(cfg.epochs),
        ae: Vec::with_capacity(cfg.epochs),
        ce: vec![Vec::with_capacity(cfg.epochs); source_count],
    };
    if cfg.epochs == 0 {
        return Ok(curves);
    }

    let names = block_names(model);
    let mut adam = AdamState::new(&block_sizes(model), cfg.optimizer)?;
    let n = data.rows();
    let batch = if cfg.batch_size == 0 || cfg.batch_size >= n {
        n
    } else {
        cfg.batch_size
    };

    for epoch in 0..cfg.epochs {
        let mut rng = Rng::new(derive_seed(cfg.seed, epoch as u64));
        let order: Vec<usize> = if batch == n {
            (0..n).collect()
        } else {
            let mut idx: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut idx);
            idx
        };

        let mut epoch_total = 0.0;
        let mut epoch_ae = 0.0;
        let mut epoch_ce = vec![0.0; source_count];
        for chunk in order.chunks(batch) {
            let clean = data.select_rows(chunk)?;
            let input = if cfg.corrupt {
                corrupt_with_rng(&clean, model.corruption_rate(), &mut rng)
            } else {
                clean.clone()
            };
            let step = train_step(model, &clean, &input, chunk, evidence, cfg, &mut adam, &names)
                .map_err(|e| match e {
                    CoreError::Numeric(msg) => CoreError::Diverged {
                        epoch,
                        detail: msg,
                    },
                    other => other,
                })?;
            let weight = chunk.len() as f64 / n as f64;
            epoch_total += step.total * weight;
            epoch_ae += step.ae * weight;
            for (acc, ce) in epoch_ce.iter_mut().zip(&step.ce) {
                *acc += ce * weight;
            }
        }
        if !epoch_total.is_finite() {
            return Err(CoreError::Diverged {
                epoch,
                detail: format!("epoch loss {epoch_total}"),
            });
        }
        curves.total.push(epoch_total);
        curves.ae.push(epoch_ae);
        for (curve, ce) in curves.ce.iter_mut().zip(&epoch_ce) {
            curve.push(*ce);
        }
    }
    Ok(curves)
}

struct StepLosses {
    total: f64,
    ae: f64,
    ce: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn train_step(
    model: &mut AutoencoderModel,
    clean: &Matrix,
    input: &Matrix,
    row_indices: &[usize],
    evidence: Option<(&EvidenceSet, &TransferConfig)>,
    cfg: &TrainConfig,
    adam: &mut AdamState,
    names: &[String],
) -> Result<StepLosses> {
    // Forward pass, caching every layer input and output.
    let enc_count = model.encoder_layers().len();
    let dec_count = model.decoder_layers().len();
    let mut activations: Vec<Matrix> = Vec::with_capacity(enc_count + dec_count + 1);
    activations.push(input.clone());
    for layer in model.encoder_layers() {
        let out = layer.forward(activations.last().expect("non-empty"))?;
        activations.push(out);
    }
    let latent_index = enc_count;
    for layer in model.decoder_layers() {
        let out = layer.forward(activations.last().expect("non-empty"))?;
        activations.push(out);
    }

    let reconstruction = activations.last().expect("non-empty");
    let (ae_loss, d_reconstruction) = ssim_loss(clean, reconstruction, &cfg.ssim)?;
    if !ae_loss.is_finite() {
        return Err(CoreError::Numeric(format!(
            "reconstruction loss is {ae_loss}"
        )));
    }

    let mut grads = GradAccumulator {
        blocks: block_sizes(model).iter().map(|&s| vec![0.0; s]).collect(),
    };

    // Decoder backward.
    let mut upstream = d_reconstruction;
    for (i, layer) in model.decoder_layers().iter().enumerate().rev() {
        let layer_input = &activations[latent_index + i];
        let layer_output = &activations[latent_index + i + 1];
        let (layer_grads, input_grad) =
            layer.backward_with_output(layer_input, layer_output, &upstream)?;
        grads.store(enc_count + i, &layer_grads);
        upstream = input_grad;
    }

    // Evidence heads: fused softmax cross-entropy on the latent.
    let mut ce_losses = Vec::new();
    let mut total = ae_loss;
    if let Some((evidence_set, transfer)) = evidence {
        let latent = &activations[latent_index];
        let scale = transfer.lambda / transfer.evidence_count as f64;
        for (j, (head, source)) in model
            .heads()
            .iter()
            .zip(evidence_set.sources())
            .enumerate()
        {
            let target = source.select_rows(row_indices)?;
            let probabilities = head.layer.forward(latent)?;
            let (ce, d_logits) = softmax_cross_entropy(&target, &probabilities)?;
            ce_losses.push(ce);
            if transfer.lambda != 0.0 {
                let scaled = d_logits.scale(scale);
                let (head_grads, d_latent) =
                    head.layer.backward_from_preactivation(latent, &scaled)?;
                grads.store(enc_count + dec_count + j, &head_grads);
                upstream = upstream.add(&d_latent)?;
            }
        }
        total = ae_loss
            + transfer.lambda * ce_losses.iter().sum::<f64>() / transfer.evidence_count as f64;
    }

    // Encoder backward.
    for (i, layer) in model.encoder_layers().iter().enumerate().rev() {
        let layer_input = &activations[i];
        let layer_output = &activations[i + 1];
        let (layer_grads, input_grad) =
            layer.backward_with_output(layer_input, layer_output, &upstream)?;
        grads.store(i, &layer_grads);
        upstream = input_grad;
    }

    // Named non-finite check before the optimizer touches anything.
    for (name, block) in names.iter().zip(&grads.blocks) {
        if block.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Numeric(format!(
                "non-finite gradient in {name}"
            )));
        }
    }
    let grad_slices: Vec<&[f64]> = grads.blocks.iter().map(|b| b.as_slice()).collect();
    let mut params = param_blocks_mut(model);
    adam.step(&mut params, &grad_slices)?;

    Ok(StepLosses {
        total,
        ae: ae_loss,
        ce: ce_losses,
    })
}

/// Screening settings for the small biased evidence model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningConfig {
    /// Deliberately small budget; meaningful evidence converges within it.
    pub budget_epochs: usize,
    /// Accept when the mean-entropy ratio is below this value.
    pub threshold: f64,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self {
            budget_epochs: 50,
            threshold: 0.9,
            hidden_width: 8,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

/// Outcome of screening one evidence source.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningVerdict {
    pub source_name: String,
    pub mean_entropy: f64,
    /// Mean prediction entropy relative to `ln(class_count)`.
    pub entropy_ratio: f64,
    pub accepted: bool,
}

/// Trains a small, iteration-limited classifier from the data to one
/// evidence source and measures how uniform its predictions stay.
///
/// Non-corresponding evidence cannot generalize within the budget and keeps
/// a near-uniform prediction distribution (entropy ratio close to 1);
/// meaningful evidence converges and drives the ratio down.
pub fn screen_evidence(
    source_name: &str,
    evidence: &Matrix,
    data: &Matrix,
    cfg: &ScreeningConfig,
) -> Result<ScreeningVerdict> {
    if cfg.budget_epochs == 0 {
        return Err(CoreError::Inconclusive(
            "screening budget is zero epochs".into(),
        ));
    }
    if evidence.rows() != data.rows() {
        return Err(CoreError::Alignment(format!(
            "evidence has {} rows but data has {}",
            evidence.rows(),
            data.rows()
        )));
    }
    if data.rows() == 0 {
        return Err(CoreError::Count("empty screening data".into()));
    }
    let classes = evidence.cols();
    if classes < 2 {
        return Err(CoreError::DegenerateEvidence(format!(
            "source '{source_name}' has fewer than two classes"
        )));
    }
    // All rows one-hot, and at least two classes actually present.
    let mut seen = vec![false; classes];
    for i in 0..evidence.rows() {
        let row = evidence.row(i);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(CoreError::DegenerateEvidence(format!(
                "source '{source_name}' row {i} is not one-hot"
            )));
        }
        seen[row.iter().position(|&v| v == 1.0).expect("one-hot")] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(CoreError::DegenerateEvidence(format!(
            "source '{source_name}' uses a single class"
        )));
    }

    let mut rng = Rng::new(cfg.seed);
    let mut hidden = DenseLayer::glorot(data.cols(), cfg.hidden_width, Activation::Relu, &mut rng);
    let mut output = DenseLayer::glorot(cfg.hidden_width, classes, Activation::Softmax, &mut rng);
    let mut adam = AdamState::new(
        &[
            hidden.weights.as_slice().len(),
            hidden.bias.len(),
            output.weights.as_slice().len(),
            output.bias.len(),
        ],
        AdamConfig::with_learning_rate(cfg.learning_rate),
    )?;

    for epoch in 0..cfg.budget_epochs {
        let h = hidden.forward(data)?;
        let q = output.forward(&h)?;
        let (ce, d_logits) = softmax_cross_entropy(evidence, &q)?;
        if !ce.is_finite() {
            return Err(CoreError::Diverged {
                epoch,
                detail: format!("screening loss {ce}"),
            });
        }
        let (out_grads, d_hidden) = output.backward_from_preactivation(&h, &d_logits)?;
        let (hid_grads, _) = hidden.backward_with_output(data, &h, &d_hidden)?;
        let grad_blocks = [
            hid_grads.weights.as_slice(),
            hid_grads.bias.as_slice(),
            out_grads.weights.as_slice(),
            out_grads.bias.as_slice(),
        ];
        let mut params = [
            hidden.weights.as_mut_slice(),
            hidden.bias.as_mut_slice(),
            output.weights.as_mut_slice(),
            output.bias.as_mut_slice(),
        ];
        let mut param_refs: Vec<&mut [f64]> = params.iter_mut().map(|p| &mut **p).collect();
        adam.step(&mut param_refs, &grad_blocks)?;
    }

    let predictions = output.forward(&hidden.forward(data)?)?;
    let mut entropy_sum = 0.0;
    for i in 0..predictions.rows() {
        let mut h = 0.0;
        for &q in predictions.row(i) {
            if q > 0.0 {
                h -= q * libm::log(q + LOG_CLIP);
            }
        }
        entropy_sum += h;
    }
    let mean_entropy = entropy_sum / predictions.rows() as f64;
    let entropy_ratio = mean_entropy / libm::log(classes as f64);
    Ok(ScreeningVerdict {
        source_name: String::from(source_name),
        mean_entropy,
        entropy_ratio,
        accepted: entropy_ratio < cfg.threshold,
    })
}
