use std::path::Path;

use ndarray::Array2;

use super::model::{one_hot, Posterior, Vae};
use super::train::TrainConfig;
use crate::container::{Container, Tensor};
use crate::corpus::{faces_from_tensor, FeatureNormalizer};
use crate::error::{Error, Result};
use crate::mesh::{ConnectivityKey, Mesh, Vec3};
use crate::rimd::{FrameCodec, RimdFeature};

pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with everything needed to turn latent codes into meshes.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Vae,
    pub normalizer: FeatureNormalizer,
    /// Base mesh the features are relative to.
    pub reference: Mesh,
    pub training: TrainConfig,
    /// Completed epochs.
    pub epochs: usize,
    /// Label vocabulary per condition family; empty when unconditional.
    pub vocabularies: Vec<Vec<String>>,
}

impl Checkpoint {
    pub fn key(&self) -> ConnectivityKey {
        self.reference.connectivity_key()
    }

    pub fn latent_dim(&self) -> usize {
        self.model.config.latent_dim
    }

    pub fn feature_len(&self) -> usize {
        self.model.config.feature_len
    }

    pub fn sigma_object(&self) -> &[f64] {
        &self.model.config.sigma_object
    }

    pub fn is_conditional(&self) -> bool {
        !self.vocabularies.is_empty()
    }

    pub fn codec(&self) -> Result<FrameCodec> {
        FrameCodec::new(&self.reference)
    }

    /// One-hot condition row for the given labels, one per family. Must be
    /// `None` exactly when the model is unconditional.
    pub fn condition(&self, labels: Option<&[String]>) -> Result<Array2<f64>> {
        match (labels, self.is_conditional()) {
            (None, false) => Ok(Array2::zeros((1, 0))),
            (Some(_), false) => Err(Error::Condition(
                "model is unconditional but a condition was given".into(),
            )),
            (None, true) => Err(Error::Condition(format!(
                "model is conditional; give one label per family from {:?}",
                self.vocabularies
            ))),
            (Some(labels), true) => {
                if labels.len() != self.vocabularies.len() {
                    return Err(Error::Condition(format!(
                        "{} labels given, model has {} condition families",
                        labels.len(),
                        self.vocabularies.len()
                    )));
                }
                let idx = labels
                    .iter()
                    .zip(&self.vocabularies)
                    .map(|(l, v)| {
                        v.iter().position(|x| x == l).ok_or_else(|| {
                            Error::Condition(format!("unknown label `{l}`, expected one of {v:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let sizes: Vec<usize> = self.vocabularies.iter().map(Vec::len).collect();
                one_hot(&[idx], &sizes)
            }
        }
    }

    fn repeat_condition(cond: &Array2<f64>, rows: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cond.ncols()), |(_, j)| cond[[0, j]])
    }

    /// Posterior of a mesh sharing the reference connectivity.
    pub fn encode_mesh(
        &self,
        codec: &FrameCodec,
        mesh: &Mesh,
        cond: &Array2<f64>,
    ) -> Result<Posterior> {
        if mesh.connectivity_key() != self.key() {
            return Err(Error::ConnectivityMismatch(
                "mesh does not share the checkpoint's connectivity".into(),
            ));
        }
        let f = self.normalizer.normalize(codec.encode(mesh)?.as_slice())?;
        let x = Array2::from_shape_vec((1, f.len()), f).unwrap();
        self.model.encode(&x, cond)
    }

    /// Decoded, denormalized features for each row of `codes`.
    pub fn decode_features(
        &self,
        codes: &Array2<f64>,
        cond: &Array2<f64>,
    ) -> Result<Vec<Vec<f64>>> {
        let cond = Self::repeat_condition(cond, codes.nrows());
        let out = self.model.decode(codes, &cond)?;
        out.rows()
            .into_iter()
            .map(|r| self.normalizer.denormalize(r.as_slice().unwrap()))
            .collect()
    }

    pub fn decode_mesh(
        &self,
        codec: &FrameCodec,
        code: &[f64],
        cond: &Array2<f64>,
    ) -> Result<Mesh> {
        if code.len() != self.latent_dim() {
            return Err(Error::LengthMismatch {
                expected: self.latent_dim(),
                actual: code.len(),
            });
        }
        let z = Array2::from_shape_vec((1, code.len()), code.to_vec()).unwrap();
        let f = self.decode_features(&z, cond)?.pop().unwrap();
        let topo = codec.topology();
        let feature = RimdFeature::from_vec(topo.vertex_count(), topo.directed_edge_count(), f)?;
        codec.reconstruct(&feature)
    }

    pub fn to_container(&self) -> Container {
        let cfg = &self.model.config;
        let mut c = Container::new("checkpoint");
        c.set("version", CHECKPOINT_VERSION);
        c.set("K", cfg.feature_len);
        c.set("d", cfg.latent_dim);
        c.set("C", cfg.condition_width());
        c.set_list("condition_sizes", &cfg.condition_sizes);
        c.set_list("hidden", &cfg.hidden);
        c.set("sigma_max", cfg.sigma_max);
        c.set_list("sigma_object", &cfg.sigma_object);
        c.set("epoch", self.epochs);
        c.set("connectivity", self.key().to_hex());
        for (f, vocab) in self.vocabularies.iter().enumerate() {
            c.set_list(&format!("labels.{f}"), vocab);
        }
        c.set("train.alpha", self.training.alpha);
        c.set("train.learning_rate", self.training.learning_rate);
        c.set("train.batch_size", self.training.batch_size);
        c.set("train.epochs", self.training.epochs);
        c.set("train.seed", self.training.seed);
        c.set("normalizer.a", self.normalizer.range());
        c.set("normalizer.eps", self.normalizer.eps());
        for (name, t) in self.model.named_tensors() {
            c.put(&format!("model.{name}"), t);
        }
        c.put(
            "normalizer.min",
            Tensor::vector(self.normalizer.min().to_vec()),
        );
        c.put(
            "normalizer.max",
            Tensor::vector(self.normalizer.max().to_vec()),
        );
        let p = self.reference.vertices();
        c.put(
            "reference.vertices",
            Tensor::new(
                vec![p.len(), 3],
                p.iter().flat_map(|v| [v.x, v.y, v.z]).collect(),
            ),
        );
        let f = self.reference.faces();
        c.put(
            "reference.faces",
            Tensor::new(
                vec![f.len(), 3],
                f.iter().flat_map(|t| t.map(|v| v as f64)).collect(),
            ),
        );
        c
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_container().to_bytes()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_container(&Container::load(path)?, path)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let path = Path::new("<memory>");
        Self::from_container(&Container::from_bytes(bytes, path)?, path)
    }

    fn from_container(c: &Container, path: &Path) -> Result<Self> {
        if c.kind != "checkpoint" {
            return Err(Error::corrupt(
                path,
                format!("expected a checkpoint, found `{}`", c.kind),
            ));
        }
        let version: u32 = c.parse("version", path)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let condition_sizes: Vec<usize> = c.parse_list("condition_sizes", path)?;
        let training = TrainConfig {
            alpha: c.parse("train.alpha", path)?,
            learning_rate: c.parse("train.learning_rate", path)?,
            batch_size: c.parse("train.batch_size", path)?,
            epochs: c.parse("train.epochs", path)?,
            seed: c.parse("train.seed", path)?,
            latent_dim: c.parse("d", path)?,
            hidden: c.parse_list("hidden", path)?,
            sigma_max: c.parse("sigma_max", path)?,
            sigma_object: Some(c.parse_list("sigma_object", path)?),
        };
        let k: usize = c.parse("K", path)?;
        let config = training.vae_config(k, condition_sizes.clone());
        if c.parse::<usize>("C", path)? != config.condition_width() {
            return Err(Error::corrupt(
                path,
                "condition width disagrees with condition sizes",
            ));
        }
        let model = Vae::from_named_tensors(config, |name| {
            c.tensor(&format!("model.{name}"), path).cloned()
        })
        .map_err(|e| match e {
            Error::Corrupt { .. } => e,
            other => Error::corrupt(path, other.to_string()),
        })?;
        let vocabularies = (0..condition_sizes.len())
            .map(|f| c.parse_list::<String>(&format!("labels.{f}"), path))
            .collect::<Result<Vec<_>>>()?;
        if vocabularies
            .iter()
            .map(Vec::len)
            .ne(condition_sizes.iter().copied())
        {
            return Err(Error::corrupt(
                path,
                "label vocabulary sizes disagree with the model",
            ));
        }
        let normalizer = FeatureNormalizer::from_parts(
            c.tensor("normalizer.min", path)?.data.clone(),
            c.tensor("normalizer.max", path)?.data.clone(),
            c.parse("normalizer.a", path)?,
            c.parse("normalizer.eps", path)?,
        )?;
        if normalizer.len() != k {
            return Err(Error::corrupt(path, "normalizer length differs from K"));
        }
        let verts = c.tensor("reference.vertices", path)?;
        if verts.shape.len() != 2 || verts.shape[1] != 3 {
            return Err(Error::corrupt(path, "reference vertices must be n×3"));
        }
        let reference = Mesh::new(
            verts
                .data
                .chunks_exact(3)
                .map(|p| Vec3::new(p[0], p[1], p[2]))
                .collect(),
            faces_from_tensor(c.tensor("reference.faces", path)?, path)?,
        )?;
        if reference.connectivity_key().to_hex() != c.get("connectivity", path)? {
            return Err(Error::corrupt(
                path,
                "connectivity digest does not match reference faces",
            ));
        }
        Ok(Checkpoint {
            model,
            normalizer,
            reference,
            training,
            epochs: c.parse("epoch", path)?,
            vocabularies,
        })
    }
}
