//! Deep model backbones: the CNN (with attention) used by SDLM and S-SDLM,
//! the feature MLP used by U-SDLM, learned per-class center generators, and
//! the two-branch robust model that combines them.
//!
//! All forward passes come in a train mode (batch statistics, activation
//! caches for backprop) and an eval mode (running statistics, no caches,
//! streaming attention for long inputs).

pub mod center;
pub mod checkpoint;
pub mod mlp;
pub mod sdlm;

pub use center::CenterGenerator;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use mlp::{MlpModel, MLP_WIDTHS};
pub use sdlm::{CnnConfig, CnnModel, CnnOutput};

use ndarray::Array2;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::MbfdError;
use crate::features::FEATURE_COUNT;
use crate::nn::{Mode, Params, Tensor};

/// Which of the four deep models a [`ModelState`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    Sdlm,
    SSdlm,
    USdlm,
    RobustMbfd,
}

impl std::str::FromStr for Architecture {
    type Err = MbfdError;
    fn from_str(s: &str) -> Result<Self, MbfdError> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "SDLM" => Ok(Self::Sdlm),
            "S_SDLM" => Ok(Self::SSdlm),
            "U_SDLM" => Ok(Self::USdlm),
            "ROBUST_MBFD" | "ROBUST" => Ok(Self::RobustMbfd),
            other => Err(MbfdError::InvalidConfig(format!("unknown architecture {other:?}"))),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sdlm => "SDLM",
            Self::SSdlm => "S_SDLM",
            Self::USdlm => "U_SDLM",
            Self::RobustMbfd => "ROBUST_MBFD",
        })
    }
}

/// Which branch an embedding came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Cnn,
    Mlp,
    Concat,
}

/// A high-level feature vector with its source metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub branch: Branch,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Two-branch model: raw-signal CNN and feature MLP, with a learned center
/// generator per branch. Class probabilities come from the CNN head.
#[derive(Debug, Clone)]
pub struct RobustModel {
    pub cnn: CnnModel,
    pub mlp: MlpModel,
    pub center_cnn: CenterGenerator,
    pub center_mlp: CenterGenerator,
}

#[derive(Debug, Clone)]
pub struct RobustOutput {
    pub cnn: Array2<f64>,
    pub mlp: Array2<f64>,
    pub concat: Array2<f64>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
}

impl RobustModel {
    pub fn forward(&mut self, windows: &Array2<f64>, features: &Array2<f64>, mode: Mode) -> RobustOutput {
        let c = self.cnn.forward(windows, mode);
        let m = self.mlp.forward(features, mode == Mode::Train);
        let b = c.embeddings.dim().0;
        let (dc, dm) = (c.embeddings.dim().1, m.dim().1);
        let mut concat = Array2::zeros((b, dc + dm));
        concat.slice_mut(ndarray::s![.., ..dc]).assign(&c.embeddings);
        concat.slice_mut(ndarray::s![.., dc..]).assign(&m);
        RobustOutput { cnn: c.embeddings, mlp: m, concat, logits: c.logits, probs: c.probs }
    }
}

impl Params for RobustModel {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.cnn.visit_params(&format!("{prefix}cnn."), f);
        self.mlp.visit_params(&format!("{prefix}mlp."), f);
        self.center_cnn.visit_params(&format!("{prefix}center_cnn."), f);
        self.center_mlp.visit_params(&format!("{prefix}center_mlp."), f);
    }
}

#[derive(Debug, Clone)]
pub enum Network {
    Cnn(CnnModel),
    Mlp(MlpModel),
    Robust(RobustModel),
}

/// A deep model plus the metadata needed to rebuild it from a checkpoint.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub arch: Architecture,
    pub seed: u64,
    pub classes: usize,
    pub input_len: usize,
    pub net: Network,
}

impl ModelState {
    /// Published configuration for the given architecture.
    pub fn new(arch: Architecture, classes: usize, input_len: usize, seed: u64) -> Self {
        Self::with_config(arch, CnnConfig::full(input_len, classes), FEATURE_COUNT, &MLP_WIDTHS, seed)
    }

    /// Scaled-down configuration for gradient-check tests.
    pub fn tiny(arch: Architecture, classes: usize, seed: u64) -> Self {
        Self::with_config(arch, CnnConfig::tiny(classes), 5, &[12, 6, 8], seed)
    }

    pub fn with_config(
        arch: Architecture,
        cnn_cfg: CnnConfig,
        mlp_input: usize,
        mlp_widths: &[usize],
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = cnn_cfg.classes;
        let input_len = cnn_cfg.input_len;
        let net = match arch {
            Architecture::Sdlm | Architecture::SSdlm => Network::Cnn(CnnModel::new(cnn_cfg, &mut rng)),
            Architecture::USdlm => {
                Network::Mlp(MlpModel::with_widths(mlp_input, mlp_widths, &mut rng))
            }
            Architecture::RobustMbfd => {
                let cnn = CnnModel::new(cnn_cfg, &mut rng);
                let mlp = MlpModel::with_widths(mlp_input, mlp_widths, &mut rng);
                let cnn_dim = cnn.embedding_dim();
                let mlp_dim = mlp.embedding_dim();
                Network::Robust(RobustModel {
                    cnn,
                    mlp,
                    center_cnn: CenterGenerator::new(classes, cnn_dim, &mut rng),
                    center_mlp: CenterGenerator::new(classes, mlp_dim, &mut rng),
                })
            }
        };
        Self { arch, seed, classes, input_len, net }
    }

    /// Dimension of the embeddings this model hands to the back-end.
    pub fn embedding_dim(&self) -> usize {
        match &self.net {
            Network::Cnn(m) => m.embedding_dim(),
            Network::Mlp(m) => m.embedding_dim(),
            Network::Robust(r) => r.cnn.embedding_dim() + r.mlp.embedding_dim(),
        }
    }

    pub fn branch(&self) -> Branch {
        match self.arch {
            Architecture::Sdlm | Architecture::SSdlm => Branch::Cnn,
            Architecture::USdlm => Branch::Mlp,
            Architecture::RobustMbfd => Branch::Concat,
        }
    }
}

impl Params for ModelState {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        match &mut self.net {
            Network::Cnn(m) => m.visit_params(prefix, f),
            Network::Mlp(m) => m.visit_params(prefix, f),
            Network::Robust(m) => m.visit_params(prefix, f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;
    use rand::Rng as _;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_config_embedding_dims() {
        let sdlm = ModelState::new(Architecture::Sdlm, 3, 4800, 1);
        assert_eq!(sdlm.embedding_dim(), 96);
        let usdlm = ModelState::new(Architecture::USdlm, 3, 4800, 1);
        assert_eq!(usdlm.embedding_dim(), 256);
        let robust = ModelState::new(Architecture::RobustMbfd, 3, 4800, 1);
        assert_eq!(robust.embedding_dim(), 352);
    }

    #[test]
    fn robust_concat_prefix_is_cnn_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mut state = ModelState::tiny(Architecture::RobustMbfd, 2, 51);
        let Network::Robust(r) = &mut state.net else { panic!() };
        let w = Array::from_shape_fn((2, 64), |_| rng.gen_range(-1.0..1.0));
        let f = Array::from_shape_fn((2, 5), |_| rng.gen_range(-1.0..1.0));
        let out = r.forward(&w, &f, Mode::Eval);
        let dc = out.cnn.dim().1;
        assert_eq!(out.concat.dim().1, dc + out.mlp.dim().1);
        for s in 0..2 {
            for j in 0..dc {
                assert_eq!(out.concat[[s, j]], out.cnn[[s, j]]);
            }
            for j in 0..out.mlp.dim().1 {
                assert_eq!(out.concat[[s, dc + j]], out.mlp[[s, j]]);
            }
        }
        for row in out.probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn architecture_round_trips_through_strings() {
        for a in [Architecture::Sdlm, Architecture::SSdlm, Architecture::USdlm, Architecture::RobustMbfd] {
            assert_eq!(a.to_string().parse::<Architecture>().unwrap(), a);
        }
        assert!("VGG".parse::<Architecture>().is_err());
    }
}
