use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masking::TargetNorm;
use crate::render::PATCH_PIXELS;

/// Transformer widths and depths of the masked patch autoencoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub hidden: usize,
    pub mlp: usize,
    pub heads: usize,
    pub decoder_hidden: usize,
    pub decoder_mlp: usize,
    pub decoder_heads: usize,
    pub patch_dim: usize,
    /// Layer norms in blocks and after each stack. Off only for the
    /// linear ablation used in gradient tests.
    pub layer_norm: bool,
    pub target_norm: TargetNorm,
}

impl ModelConfig {
    /// Decoder widths mirror the encoder.
    fn preset(enc_layers: usize, dec_layers: usize, hidden: usize, mlp: usize, heads: usize) -> Self {
        ModelConfig {
            enc_layers,
            dec_layers,
            hidden,
            mlp,
            heads,
            decoder_hidden: hidden,
            decoder_mlp: mlp,
            decoder_heads: heads,
            patch_dim: PATCH_PIXELS,
            layer_norm: true,
            target_norm: TargetNorm::PerPatch,
        }
    }

    pub fn base() -> Self {
        Self::preset(12, 8, 768, 3072, 12)
    }

    pub fn small() -> Self {
        Self::preset(12, 4, 384, 1536, 6)
    }

    pub fn tiny() -> Self {
        Self::preset(12, 2, 192, 768, 3)
    }

    /// Laptop-sized model for tests and short training runs.
    pub fn desk() -> Self {
        Self::preset(2, 1, 32, 64, 2)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "base" => Ok(Self::base()),
            "small" => Ok(Self::small()),
            "tiny" => Ok(Self::tiny()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::precondition(format!("unknown model preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::precondition(msg.to_string())) };
        check(self.patch_dim == PATCH_PIXELS, "patch_dim must be 256")?;
        check(self.heads > 0 && self.hidden.is_multiple_of(self.heads), "hidden must be divisible by heads")?;
        check(
            self.decoder_heads > 0 && self.decoder_hidden.is_multiple_of(self.decoder_heads),
            "decoder_hidden must be divisible by decoder_heads",
        )?;
        check(self.hidden.is_multiple_of(2) && self.hidden > 0, "hidden must be even")?;
        check(self.decoder_hidden.is_multiple_of(2) && self.decoder_hidden > 0, "decoder_hidden must be even")?;
        check(self.mlp > 0 && self.decoder_mlp > 0, "mlp widths must be positive")?;
        Ok(())
    }

    /// Closed-form encoder-side parameter count: patch projection, CLS,
    /// `enc_layers` pre-norm blocks and the final encoder norm.
    ///
    /// `256h + h + h + L(4h² + 4h + 2hm + m + h + 4h) + 2h`
    pub fn encoder_param_formula(&self) -> usize {
        let (h, m, p) = (self.hidden, self.mlp, self.patch_dim);
        let block = 4 * h * h + 4 * h + 2 * h * m + m + h + 4 * h;
        p * h + h + h + self.enc_layers * block + 2 * h
    }
}
