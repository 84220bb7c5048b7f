//! Denoising stacked autoencoder with softmax evidence heads.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::layer::{Activation, DenseLayer};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, Rng};

/// Architecture of the autoencoder.
///
/// Encoder widths run `input -> hidden[..] -> latent` with ReLU hidden
/// activations and a linear latent; the decoder mirrors them in reverse and
/// finishes with `output_activation` (sigmoid by default, matching inputs
/// normalized to `[0, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub latent_dim: usize,
    pub corruption_rate: f64,
    pub output_activation: Activation,
}

impl AutoencoderConfig {
    /// Paper-scale defaults: hidden 512 and 256, latent width 10,
    /// zero-masking corruption rate 0.2.
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_widths: alloc::vec![512, 256],
            latent_dim: 10,
            corruption_rate: 0.2,
            output_activation: Activation::Sigmoid,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.latent_dim == 0 {
            return Err(CoreError::Config(
                "input and latent dimensions must be positive".into(),
            ));
        }
        if self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(CoreError::Config("hidden widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.corruption_rate) {
            return Err(CoreError::Config(format!(
                "corruption rate must lie in [0, 1), got {}",
                self.corruption_rate
            )));
        }
        if self.output_activation == Activation::Softmax {
            return Err(CoreError::Config(
                "softmax is reserved for evidence heads".into(),
            ));
        }
        Ok(())
    }
}

/// Softmax layer attached to the latent space, one per evidence source.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceHead {
    pub name: String,
    pub layer: DenseLayer,
}

/// A set of per-sample one-hot evidence sources.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceSet {
    names: Vec<String>,
    sources: Vec<Matrix>,
}

impl EvidenceSet {
    pub fn new(names: Vec<String>, sources: Vec<Matrix>) -> Result<Self> {
        if names.len() != sources.len() {
            return Err(CoreError::Config(format!(
                "{} names for {} sources",
                names.len(),
                sources.len()
            )));
        }
        if sources.is_empty() {
            return Err(CoreError::Config(
                "at least one evidence source is required".into(),
            ));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(CoreError::Config(format!(
                    "duplicate evidence source name '{a}'"
                )));
            }
        }
        let rows = sources[0].rows();
        for (name, source) in names.iter().zip(&sources) {
            if source.rows() != rows {
                return Err(CoreError::Alignment(format!(
                    "source '{name}' has {} rows, expected {rows}",
                    source.rows()
                )));
            }
            if source.cols() < 2 {
                return Err(CoreError::DegenerateEvidence(format!(
                    "source '{name}' has fewer than two classes"
                )));
            }
            for r in 0..source.rows() {
                let row = source.row(r);
                let ones = row.iter().filter(|&&v| v == 1.0).count();
                if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(CoreError::DegenerateEvidence(format!(
                        "source '{name}' row {r} is not one-hot"
                    )));
                }
            }
        }
        Ok(Self { names, sources })
    }

    /// Builds a single-source set from integer class labels.
    pub fn from_labels(name: &str, labels: &[usize], class_count: usize) -> Result<Self> {
        Self::new(
            alloc::vec![String::from(name)],
            alloc::vec![one_hot(labels, class_count)?],
        )
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn row_count(&self) -> usize {
        self.sources[0].rows()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn sources(&self) -> &[Matrix] {
        &self.sources
    }

    /// The same evidence restricted to (and reordered by) the given rows.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let sources = self
            .sources
            .iter()
            .map(|s| s.select_rows(indices))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            names: self.names.clone(),
            sources,
        })
    }
}

/// Encodes class labels as a one-hot matrix.
pub fn one_hot(labels: &[usize], class_count: usize) -> Result<Matrix> {
    if class_count < 2 {
        return Err(CoreError::DegenerateEvidence(
            "one-hot encoding needs at least two classes".into(),
        ));
    }
    let mut m = Matrix::zeros(labels.len(), class_count);
    for (i, &label) in labels.iter().enumerate() {
        if label >= class_count {
            return Err(CoreError::Config(format!(
                "label {label} out of range for {class_count} classes (row {i})"
            )));
        }
        m.set(i, label, 1.0);
    }
    Ok(m)
}

/// Denoising stacked autoencoder plus any attached evidence heads.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    encoder: Vec<DenseLayer>,
    decoder: Vec<DenseLayer>,
    heads: Vec<EvidenceHead>,
    corruption_rate: f64,
}

impl AutoencoderModel {
    /// Fresh model with seeded Glorot weights.
    pub fn init(cfg: &AutoencoderConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Rng::new(seed);
        let mut encoder = Vec::new();
        let mut widths = alloc::vec![cfg.input_dim];
        widths.extend_from_slice(&cfg.hidden_widths);
        widths.push(cfg.latent_dim);
        for w in widths.windows(2) {
            // Hidden layers are ReLU; the latent layer is linear.
            let activation = if encoder.len() == cfg.hidden_widths.len() {
                Activation::Linear
            } else {
                Activation::Relu
            };
            encoder.push(DenseLayer::glorot(w[0], w[1], activation, &mut rng));
        }
        let mut decoder = Vec::new();
        let rev: Vec<usize> = widths.iter().rev().cloned().collect();
        for (i, w) in rev.windows(2).enumerate() {
            let activation = if i + 1 == rev.len() - 1 {
                cfg.output_activation
            } else {
                Activation::Relu
            };
            decoder.push(DenseLayer::glorot(w[0], w[1], activation, &mut rng));
        }
        Ok(Self {
            encoder,
            decoder,
            heads: Vec::new(),
            corruption_rate: cfg.corruption_rate,
        })
    }

    /// Rebuilds a model from explicit layers (checkpoint loading).
    pub fn from_parts(
        encoder: Vec<DenseLayer>,
        decoder: Vec<DenseLayer>,
        heads: Vec<EvidenceHead>,
        corruption_rate: f64,
    ) -> Result<Self> {
        if encoder.is_empty() || decoder.is_empty() {
            return Err(CoreError::Config("encoder and decoder must be non-empty".into()));
        }
        if !(0.0..1.0).contains(&corruption_rate) {
            return Err(CoreError::Config(format!(
                "corruption rate must lie in [0, 1), got {corruption_rate}"
            )));
        }
        for l in encoder.iter().chain(&decoder) {
            if l.activation == Activation::Softmax {
                return Err(CoreError::Config(
                    "softmax is only permitted on evidence heads".into(),
                ));
            }
        }
        // The decoder must mirror the encoder widths in reverse.
        let enc_widths: Vec<usize> = core::iter::once(encoder[0].input_width())
            .chain(encoder.iter().map(|l| l.output_width()))
            .collect();
        let dec_widths: Vec<usize> = core::iter::once(decoder[0].input_width())
            .chain(decoder.iter().map(|l| l.output_width()))
            .collect();
        let mirrored: Vec<usize> = enc_widths.iter().rev().cloned().collect();
        if dec_widths != mirrored {
            return Err(CoreError::Shape(format!(
                "decoder widths {dec_widths:?} do not mirror encoder widths {enc_widths:?}"
            )));
        }
        for w in enc_widths.windows(2) {
            if w[1] == 0 {
                return Err(CoreError::Config("zero-width layer".into()));
            }
        }
        let latent = *enc_widths.last().expect("non-empty");
        for head in &heads {
            if head.layer.input_width() != latent {
                return Err(CoreError::Shape(format!(
                    "head '{}' reads {} inputs but the latent width is {latent}",
                    head.name,
                    head.layer.input_width()
                )));
            }
            if head.layer.activation != Activation::Softmax {
                return Err(CoreError::Config(format!(
                    "head '{}' must use softmax",
                    head.name
                )));
            }
        }
        Ok(Self {
            encoder,
            decoder,
            heads,
            corruption_rate,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].input_width()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().expect("non-empty").output_width()
    }

    pub fn corruption_rate(&self) -> f64 {
        self.corruption_rate
    }

    pub fn encoder_layers(&self) -> &[DenseLayer] {
        &self.encoder
    }

    pub fn decoder_layers(&self) -> &[DenseLayer] {
        &self.decoder
    }

    pub fn heads(&self) -> &[EvidenceHead] {
        &self.heads
    }

    /// Simultaneous mutable access to all parameter-bearing parts.
    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&mut [DenseLayer], &mut [DenseLayer], &mut [EvidenceHead]) {
        (&mut self.encoder, &mut self.decoder, &mut self.heads)
    }

    /// Deterministic forward pass through the encoder only.
    pub fn encode(&self, data: &Matrix) -> Result<Matrix> {
        let mut activation = data.clone();
        for layer in &self.encoder {
            activation = layer.forward(&activation)?;
        }
        Ok(activation)
    }

    /// Full encoder/decoder pass (no corruption).
    pub fn reconstruct(&self, data: &Matrix) -> Result<Matrix> {
        let mut activation = self.encode(data)?;
        for layer in &self.decoder {
            activation = layer.forward(&activation)?;
        }
        Ok(activation)
    }

    /// Per-source head probabilities for the given data.
    pub fn predict_heads(&self, data: &Matrix) -> Result<Vec<Matrix>> {
        let latent = self.encode(data)?;
        self.heads
            .iter()
            .map(|head| head.layer.forward(&latent))
            .collect()
    }

    /// Attaches one freshly initialized softmax head per evidence source,
    /// reading the latent layer directly.
    pub fn attach_evidence_heads(&mut self, evidence: &EvidenceSet, seed: u64) -> Result<()> {
        if !self.heads.is_empty() {
            return Err(CoreError::Config(
                "evidence heads are already attached".into(),
            ));
        }
        let latent = self.latent_dim();
        let mut heads = Vec::with_capacity(evidence.len());
        for (idx, (name, source)) in evidence.names().iter().zip(evidence.sources()).enumerate() {
            let mut rng = Rng::new(derive_seed(seed, idx as u64));
            heads.push(EvidenceHead {
                name: name.clone(),
                layer: DenseLayer::glorot(latent, source.cols(), Activation::Softmax, &mut rng),
            });
        }
        self.heads = heads;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn small_cfg(input_dim: usize) -> AutoencoderConfig {
        AutoencoderConfig {
            input_dim,
            hidden_widths: vec![6],
            latent_dim: 3,
            corruption_rate: 0.2,
            output_activation: Activation::Sigmoid,
        }
    }

    #[test]
    fn default_architecture_has_latent_width_ten() {
        let model = AutoencoderModel::init(&AutoencoderConfig::new(20), 1).unwrap();
        assert_eq!(model.latent_dim(), 10);
        let widths: Vec<usize> = model
            .encoder_layers()
            .iter()
            .map(|l| l.output_width())
            .collect();
        assert_eq!(widths, vec![512, 256, 10]);
        let dec: Vec<usize> = model
            .decoder_layers()
            .iter()
            .map(|l| l.output_width())
            .collect();
        assert_eq!(dec, vec![256, 512, 20]);
    }

    #[test]
    fn encode_output_shape_and_single_row() {
        let model = AutoencoderModel::init(&small_cfg(5), 2).unwrap();
        let data = Matrix::from_fn(7, 5, |i, j| ((i + j) % 10) as f64 / 10.0);
        let z = model.encode(&data).unwrap();
        assert_eq!(z.shape(), (7, 3));
        let single = model.encode(&data.select_rows(&[4]).unwrap()).unwrap();
        assert_eq!(single.shape(), (1, 3));
    }

    #[test]
    fn encode_is_row_partition_invariant() {
        let model = AutoencoderModel::init(&small_cfg(4), 3).unwrap();
        let data = Matrix::from_fn(6, 4, |i, j| (i * 4 + j) as f64 / 24.0);
        let joint = model.encode(&data).unwrap();
        for i in 0..6 {
            let solo = model.encode(&data.select_rows(&[i]).unwrap()).unwrap();
            assert_eq!(joint.row(i), solo.row(0), "row {i}");
        }
    }

    #[test]
    fn attach_heads_builds_one_softmax_per_source() {
        let mut model = AutoencoderModel::init(&AutoencoderConfig::new(12), 4).unwrap();
        let ev = EvidenceSet::new(
            vec!["a".to_string(), "b".to_string()],
            vec![
                one_hot(&[0, 1, 0], 2).unwrap(),
                one_hot(&[2, 1, 0], 3).unwrap(),
            ],
        )
        .unwrap();
        model.attach_evidence_heads(&ev, 9).unwrap();
        assert_eq!(model.heads().len(), 2);
        assert_eq!(model.heads()[0].layer.weights.shape(), (10, 2));
        assert_eq!(model.heads()[1].layer.weights.shape(), (10, 3));
        assert!(model
            .heads()
            .iter()
            .all(|h| h.layer.activation == Activation::Softmax));
    }

    #[test]
    fn head_probabilities_sum_to_one() {
        let mut model = AutoencoderModel::init(&small_cfg(4), 4).unwrap();
        let ev = EvidenceSet::from_labels("m", &[0, 1, 1, 0], 2).unwrap();
        model.attach_evidence_heads(&ev, 5).unwrap();
        let data = Matrix::from_fn(4, 4, |i, j| (i + j) as f64 / 8.0);
        let qs = model.predict_heads(&data).unwrap();
        for q in &qs {
            for i in 0..q.rows() {
                let sum: f64 = q.row(i).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn duplicate_source_names_are_rejected() {
        let err = EvidenceSet::new(
            vec!["same".to_string(), "same".to_string()],
            vec![one_hot(&[0, 1], 2).unwrap(), one_hot(&[1, 0], 2).unwrap()],
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::Config(_)));
    }

    #[test]
    fn evidence_must_be_one_hot_and_aligned() {
        let bad = Matrix::from_vec(2, 2, vec![0.5, 0.5, 1.0, 0.0]).unwrap();
        assert!(matches!(
            EvidenceSet::new(vec!["x".to_string()], vec![bad]),
            Err(CoreError::DegenerateEvidence(_))
        ));
        let err = EvidenceSet::new(
            vec!["a".to_string(), "b".to_string()],
            vec![one_hot(&[0, 1], 2).unwrap(), one_hot(&[0, 1, 0], 2).unwrap()],
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::Alignment(_)));
    }

    #[test]
    fn from_parts_requires_mirrored_decoder() {
        let model = AutoencoderModel::init(&small_cfg(5), 6).unwrap();
        let err = AutoencoderModel::from_parts(
            model.encoder_layers().to_vec(),
            model.encoder_layers().to_vec(), // not a mirror
            vec![],
            0.2,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::Shape(_)));

        let ok = AutoencoderModel::from_parts(
            model.encoder_layers().to_vec(),
            model.decoder_layers().to_vec(),
            vec![],
            0.2,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn softmax_inside_the_stack_is_rejected() {
        let model = AutoencoderModel::init(&small_cfg(5), 7).unwrap();
        let mut enc = model.encoder_layers().to_vec();
        enc[0].activation = Activation::Softmax;
        let err = AutoencoderModel::from_parts(
            enc,
            model.decoder_layers().to_vec(),
            vec![],
            0.2,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::Config(_)));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small_cfg(5);
        cfg.corruption_rate = 1.0;
        assert!(AutoencoderModel::init(&cfg, 0).is_err());
        let mut cfg = small_cfg(5);
        cfg.latent_dim = 0;
        assert!(AutoencoderModel::init(&cfg, 0).is_err());
    }
}
