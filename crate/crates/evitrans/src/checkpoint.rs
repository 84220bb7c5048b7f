//! Versioned binary model checkpoints with bit-exact round trips.
//!
//! Layout (little endian): magic `EVCK`, version u16, corruption rate f64,
//! training seed u64, then the encoder layers, decoder layers and evidence
//! heads. Each layer is `in u64, out u64, activation u8, weights, bias`;
//! heads additionally carry a length-prefixed UTF-8 name.

use std::fs;
use std::path::Path;

use evitrans_core::layer::{Activation, DenseLayer};
use evitrans_core::model::{AutoencoderModel, EvidenceHead};
use evitrans_core::Matrix;

use crate::error::{AppError, Result};

const MAGIC: &[u8; 4] = b"EVCK";
const VERSION: u16 = 1;

fn activation_tag(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Sigmoid => 1,
        Activation::Linear => 2,
        Activation::Softmax => 3,
    }
}

fn activation_from_tag(tag: u8) -> Result<Activation> {
    Ok(match tag {
        0 => Activation::Relu,
        1 => Activation::Sigmoid,
        2 => Activation::Linear,
        3 => Activation::Softmax,
        other => {
            return Err(AppError::Data(format!(
                "unknown activation tag {other} in checkpoint"
            )))
        }
    })
}

fn write_layer(bytes: &mut Vec<u8>, layer: &DenseLayer) {
    bytes.extend_from_slice(&(layer.input_width() as u64).to_le_bytes());
    bytes.extend_from_slice(&(layer.output_width() as u64).to_le_bytes());
    bytes.push(activation_tag(layer.activation));
    for v in layer.weights.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for v in &layer.bias {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(AppError::Data("truncated checkpoint".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("sized")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("sized")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("sized")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("sized")))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn layer(&mut self) -> Result<DenseLayer> {
        let input = self.u64()? as usize;
        let output = self.u64()? as usize;
        let activation = activation_from_tag(self.u8()?)?;
        let weights = self.f64_vec(input.checked_mul(output).ok_or_else(|| {
            AppError::Data("absurd layer size in checkpoint".into())
        })?)?;
        let bias = self.f64_vec(output)?;
        let weights = Matrix::from_vec(input, output, weights)
            .map_err(|e| AppError::Data(format!("checkpoint weights: {e}")))?;
        DenseLayer::new(weights, bias, activation)
            .map_err(|e| AppError::Data(format!("checkpoint layer: {e}")))
    }
}

/// Serializes the model and its training seed to checkpoint bytes.
pub fn model_to_bytes(model: &AutoencoderModel, seed: u64) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&model.corruption_rate().to_le_bytes());
    bytes.extend_from_slice(&seed.to_le_bytes());
    bytes.extend_from_slice(&(model.encoder_layers().len() as u32).to_le_bytes());
    for layer in model.encoder_layers() {
        write_layer(&mut bytes, layer);
    }
    bytes.extend_from_slice(&(model.decoder_layers().len() as u32).to_le_bytes());
    for layer in model.decoder_layers() {
        write_layer(&mut bytes, layer);
    }
    bytes.extend_from_slice(&(model.heads().len() as u32).to_le_bytes());
    for head in model.heads() {
        let name = head.name.as_bytes();
        bytes.extend_from_slice(&(name.len() as u32).to_le_bytes());
        bytes.extend_from_slice(name);
        write_layer(&mut bytes, &head.layer);
    }
    bytes
}

/// Restores a model and its recorded training seed from checkpoint bytes.
pub fn model_from_bytes(bytes: &[u8]) -> Result<(AutoencoderModel, u64)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(AppError::Data("not a model checkpoint".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(AppError::Data(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let corruption_rate = r.f64()?;
    let seed = r.u64()?;
    let encoder_count = r.u32()? as usize;
    let mut encoder = Vec::with_capacity(encoder_count);
    for _ in 0..encoder_count {
        encoder.push(r.layer()?);
    }
    let decoder_count = r.u32()? as usize;
    let mut decoder = Vec::with_capacity(decoder_count);
    for _ in 0..decoder_count {
        decoder.push(r.layer()?);
    }
    let head_count = r.u32()? as usize;
    let mut heads = Vec::with_capacity(head_count);
    for _ in 0..head_count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| AppError::Data("checkpoint head name is not UTF-8".into()))?;
        heads.push(EvidenceHead {
            name,
            layer: r.layer()?,
        });
    }
    if r.pos != bytes.len() {
        return Err(AppError::Data(format!(
            "{} trailing bytes in checkpoint",
            bytes.len() - r.pos
        )));
    }
    let model = AutoencoderModel::from_parts(encoder, decoder, heads, corruption_rate)
        .map_err(|e| AppError::Data(format!("checkpoint: {e}")))?;
    Ok((model, seed))
}

/// Writes a checkpoint file.
pub fn save_model(model: &AutoencoderModel, seed: u64, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(model, seed))?;
    Ok(())
}

/// Reads a checkpoint file.
pub fn load_model(path: &Path) -> Result<(AutoencoderModel, u64)> {
    let bytes = fs::read(path)?;
    model_from_bytes(&bytes).map_err(|e| match e {
        AppError::Data(msg) => AppError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use evitrans_core::layer::Activation;
    use evitrans_core::model::{AutoencoderConfig, EvidenceSet};
    use tempfile::tempdir;

    fn trained_like_model() -> AutoencoderModel {
        let cfg = AutoencoderConfig {
            input_dim: 7,
            hidden_widths: vec![5],
            latent_dim: 3,
            corruption_rate: 0.15,
            output_activation: Activation::Sigmoid,
        };
        let mut model = AutoencoderModel::init(&cfg, 13).unwrap();
        let labels = vec![0, 1, 1, 0, 1];
        let evidence = EvidenceSet::from_labels("flood", &labels, 2).unwrap();
        model.attach_evidence_heads(&evidence, 17).unwrap();
        model
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.evck");
        let model = trained_like_model();
        save_model(&model, 42, &path).unwrap();
        let (loaded, seed) = load_model(&path).unwrap();
        assert_eq!(seed, 42);
        assert_eq!(loaded, model);
        // Saving the loaded model reproduces the same bytes.
        let path2 = dir.path().join("model2.evck");
        save_model(&loaded, seed, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn corrupted_checkpoints_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.evck");
        let model = trained_like_model();
        save_model(&model, 1, &path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        // Bad magic.
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(load_model(&path).is_err());
        // Truncation.
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_model(&path).is_err());
        // Trailing garbage.
        let mut long = bytes.clone();
        long.push(0);
        std::fs::write(&path, &long).unwrap();
        assert!(load_model(&path).is_err());
    }
}
