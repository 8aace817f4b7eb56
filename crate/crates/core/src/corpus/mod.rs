//! Mesh collections: ingestion, feature normalization, splits, caching and
//! reconstruction metrics.

mod normalizer;
pub mod synth;

pub use normalizer::{FeatureNormalizer, DEFAULT_EPS, DEFAULT_RANGE};
pub use synth::{
    fitted_bend_angle, synthesize, synthesize_corpus, write_corpus, SynthKind, SyntheticShape,
    TubeDeformation, TubeSpec,
};

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align::aligned;
use crate::container::{Container, Tensor};
use crate::error::{Error, Result};
use crate::mesh::{ConnectivityKey, Mesh, Vec3};
use crate::obj::load_obj;
use crate::rimd::{FrameCodec, RimdFeature};

pub const CORPUS_VERSION: u32 = 1;

/// Condition labels: one vocabulary per label family, and per model one
/// index into each vocabulary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labels {
    pub vocabularies: Vec<Vec<String>>,
    /// `indices[model][family]`
    pub indices: Vec<Vec<usize>>,
}

impl Labels {
    /// Builds sorted vocabularies from per-family token lists.
    pub fn from_tokens(families: &[Vec<String>]) -> Result<Self> {
        let models = families.first().map_or(0, Vec::len);
        if families.iter().any(|f| f.len() != models) {
            return Err(Error::Condition(
                "label families have different lengths".into(),
            ));
        }
        let vocabularies: Vec<Vec<String>> = families
            .iter()
            .map(|f| {
                let mut v = f.clone();
                v.sort();
                v.dedup();
                v
            })
            .collect();
        let indices = (0..models)
            .map(|m| {
                families
                    .iter()
                    .zip(&vocabularies)
                    .map(|(f, v)| v.binary_search(&f[m]).unwrap())
                    .collect()
            })
            .collect();
        Ok(Labels {
            vocabularies,
            indices,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.vocabularies.is_empty()
    }

    pub fn label(&self, model: usize, family: usize) -> &str {
        &self.vocabularies[family][self.indices[model][family]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    pub base: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            base: 0,
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

/// An encoded collection sharing one connectivity.
#[derive(Debug, Clone)]
pub struct ShapeCorpus {
    pub names: Vec<String>,
    pub meshes: Vec<Mesh>,
    pub base: usize,
    pub features: Vec<RimdFeature>,
    pub labels: Labels,
    pub key: ConnectivityKey,
    pub train: Vec<usize>,
    pub held_out: Vec<usize>,
    /// Fitted on the train split only.
    pub normalizer: FeatureNormalizer,
}

impl ShapeCorpus {
    pub fn from_meshes(
        names: Vec<String>,
        meshes: Vec<Mesh>,
        labels: Labels,
        options: IngestOptions,
    ) -> Result<Self> {
        let m = meshes.len();
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "a corpus needs at least 2 models, got {m}"
            )));
        }
        if names.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                actual: names.len(),
            });
        }
        if !labels.is_empty() && labels.indices.len() != m {
            return Err(Error::Condition(format!(
                "{} labels for {m} models",
                labels.indices.len()
            )));
        }
        if options.base >= m {
            return Err(Error::InvalidArgument(format!(
                "base index {} out of range for {m} models",
                options.base
            )));
        }
        if !(options.train_fraction > 0.0 && options.train_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction must lie in (0, 1], got {}",
                options.train_fraction
            )));
        }
        let key = meshes[options.base].connectivity_key();
        for (name, mesh) in names.iter().zip(&meshes) {
            if mesh.connectivity_key() != key {
                return Err(Error::ConnectivityMismatch(format!(
                    "{name} does not share the base mesh connectivity"
                )));
            }
        }
        let codec = FrameCodec::new(&meshes[options.base])?;
        let features = meshes
            .iter()
            .map(|mesh| codec.encode(mesh))
            .collect::<Result<Vec<_>>>()?;

        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(options.seed));
        let n_train = ((m as f64 * options.train_fraction).round() as usize).clamp(1, m);
        let mut train = order[..n_train].to_vec();
        let mut held_out = order[n_train..].to_vec();
        train.sort_unstable();
        held_out.sort_unstable();

        let normalizer = FeatureNormalizer::fit(train.iter().map(|&i| features[i].as_slice()))?;
        Ok(ShapeCorpus {
            names,
            meshes,
            base: options.base,
            features,
            labels,
            key,
            train,
            held_out,
            normalizer,
        })
    }

    pub fn len(&self) -> usize {
        self.meshes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meshes.is_empty()
    }

    pub fn base_mesh(&self) -> &Mesh {
        &self.meshes[self.base]
    }

    pub fn feature_len(&self) -> usize {
        self.features[0].len()
    }

    pub fn normalized(&self, model: usize) -> Result<Vec<f64>> {
        self.normalizer.normalize(self.features[model].as_slice())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let n = self.meshes[0].vertex_count();
        let mut c = Container::new("corpus");
        c.set("version", CORPUS_VERSION);
        c.set("models", self.len());
        c.set("base", self.base);
        c.set("connectivity", self.key.to_hex());
        c.set("normalizer.a", self.normalizer.range());
        c.set("normalizer.eps", self.normalizer.eps());
        for name in &self.names {
            if name.contains(['\t', '\n']) {
                return Err(Error::InvalidArgument(format!(
                    "model name {name:?} contains a tab or newline"
                )));
            }
        }
        c.set_list("names", &self.names);
        c.set_list("train", &self.train);
        c.set_list("held_out", &self.held_out);
        c.set("label_families", self.labels.vocabularies.len());
        for (f, vocab) in self.labels.vocabularies.iter().enumerate() {
            c.set_list(&format!("labels.{f}.vocabulary"), vocab);
            let idx: Vec<usize> = self.labels.indices.iter().map(|i| i[f]).collect();
            c.set_list(&format!("labels.{f}.indices"), &idx);
        }
        let faces = self.meshes[0].faces();
        c.put(
            "faces",
            Tensor::new(
                vec![faces.len(), 3],
                faces
                    .iter()
                    .flat_map(|f| f.iter().map(|&v| v as f64))
                    .collect(),
            ),
        );
        c.put(
            "vertices",
            Tensor::new(
                vec![self.len(), n, 3],
                self.meshes
                    .iter()
                    .flat_map(|m| m.vertices().iter().flat_map(|p| [p.x, p.y, p.z]))
                    .collect(),
            ),
        );
        c.put(
            "normalizer.min",
            Tensor::vector(self.normalizer.min().to_vec()),
        );
        c.put(
            "normalizer.max",
            Tensor::vector(self.normalizer.max().to_vec()),
        );
        c.save(path)
    }

    /// Loads a cache written by [`ShapeCorpus::save`]. Features are re-encoded
    /// from the stored meshes, which reproduces them bit for bit.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let c = Container::load(path)?;
        if c.kind != "corpus" {
            return Err(Error::corrupt(
                path,
                format!("expected a corpus cache, found `{}`", c.kind),
            ));
        }
        let version: u32 = c.parse("version", path)?;
        if version != CORPUS_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CORPUS_VERSION,
            });
        }
        let models: usize = c.parse("models", path)?;
        let base: usize = c.parse("base", path)?;
        let names: Vec<String> = c.parse_list("names", path)?;
        let faces = faces_from_tensor(c.tensor("faces", path)?, path)?;
        let verts = c.tensor("vertices", path)?;
        if verts.shape.len() != 3
            || verts.shape[0] != models
            || verts.shape[2] != 3
            || names.len() != models
        {
            return Err(Error::corrupt(
                path,
                "vertex tensor does not match the model count",
            ));
        }
        let n = verts.shape[1];
        let meshes = verts
            .data
            .chunks_exact(3 * n)
            .map(|chunk| {
                Mesh::new(
                    chunk
                        .chunks_exact(3)
                        .map(|p| Vec3::new(p[0], p[1], p[2]))
                        .collect(),
                    faces.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let families: usize = c.parse("label_families", path)?;
        let mut labels = Labels::default();
        if families > 0 {
            labels.indices = vec![Vec::new(); models];
            for f in 0..families {
                labels
                    .vocabularies
                    .push(c.parse_list(&format!("labels.{f}.vocabulary"), path)?);
                let idx: Vec<usize> = c.parse_list(&format!("labels.{f}.indices"), path)?;
                if idx.len() != models {
                    return Err(Error::corrupt(path, "label index count mismatch"));
                }
                for (m, i) in idx.into_iter().enumerate() {
                    labels.indices[m].push(i);
                }
            }
        }
        let normalizer = FeatureNormalizer::from_parts(
            c.tensor("normalizer.min", path)?.data.clone(),
            c.tensor("normalizer.max", path)?.data.clone(),
            c.parse("normalizer.a", path)?,
            c.parse("normalizer.eps", path)?,
        )?;
        let codec = FrameCodec::new(
            meshes
                .get(base)
                .ok_or_else(|| Error::corrupt(path, "base index out of range"))?,
        )?;
        let features = meshes
            .iter()
            .map(|m| codec.encode(m))
            .collect::<Result<Vec<_>>>()?;
        let key = meshes[base].connectivity_key();
        let stored = c.get("connectivity", path)?;
        if stored != key.to_hex() {
            return Err(Error::corrupt(
                path,
                "connectivity digest does not match stored faces",
            ));
        }
        Ok(ShapeCorpus {
            names,
            meshes,
            base,
            features,
            labels,
            key,
            train: c.parse_list("train", path)?,
            held_out: c.parse_list("held_out", path)?,
            normalizer,
        })
    }
}

pub(crate) fn faces_from_tensor(t: &Tensor, path: &Path) -> Result<Vec<[usize; 3]>> {
    if t.shape.len() != 2 || t.shape[1] != 3 {
        return Err(Error::corrupt(path, "face tensor must be F×3"));
    }
    Ok(t.data
        .chunks_exact(3)
        .map(|f| [f[0] as usize, f[1] as usize, f[2] as usize])
        .collect())
}

fn read_labels(path: &Path, expected: usize) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let tokens: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if tokens.len() != expected {
        return Err(Error::Condition(format!(
            "{} has {} labels for {expected} models",
            path.display(),
            tokens.len()
        )));
    }
    Ok(tokens)
}

/// Sorted `*.obj` paths in `dir`.
pub fn list_obj_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Loads every OBJ in `dir` (sorted by file name) plus optional
/// `labels.txt` / `labels2.txt`, and encodes them against the base model.
pub fn ingest(dir: &Path, options: IngestOptions) -> Result<ShapeCorpus> {
    let paths = list_obj_files(dir)?;
    if paths.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{} contains {} OBJ files, need at least 2",
            dir.display(),
            paths.len()
        )));
    }
    let meshes = paths.iter().map(load_obj).collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    if let Some(base) = meshes.get(options.base) {
        let key = base.connectivity_key();
        if let Some(k) = meshes.iter().position(|m| m.connectivity_key() != key) {
            return Err(Error::ConnectivityMismatch(format!(
                "{} does not share the connectivity of {}",
                paths[k].display(),
                paths[options.base].display()
            )));
        }
    }
    let mut families = Vec::new();
    for file in ["labels.txt", "labels2.txt"] {
        let path = dir.join(file);
        if path.exists() {
            families.push(read_labels(&path, meshes.len())?);
        }
    }
    let labels = Labels::from_tokens(&families)?;
    ShapeCorpus::from_meshes(names, meshes, labels, options)
}

/// Mean per-vertex distance after rigidly aligning `reconstructed` to `truth`.
pub fn per_vertex_error(reconstructed: &Mesh, truth: &Mesh) -> Result<f64> {
    if reconstructed.connectivity_key() != truth.connectivity_key() {
        return Err(Error::ConnectivityMismatch(
            "per-vertex error needs meshes with identical connectivity".into(),
        ));
    }
    let moved = aligned(reconstructed.vertices(), truth.vertices())?;
    Ok(moved
        .iter()
        .zip(truth.vertices())
        .map(|(a, b)| (a - b).norm())
        .sum::<f64>()
        / truth.vertex_count() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rimd::so3_exp;

    fn small_spec() -> TubeSpec {
        TubeSpec {
            rings: 6,
            segments: 8,
            ..Default::default()
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let shapes = synthesize(SynthKind::CylinderBend, 10, 2, &small_spec()).unwrap();
        let names = shapes.iter().map(|s| s.name.clone()).collect::<Vec<_>>();
        let meshes = shapes.iter().map(|s| s.mesh.clone()).collect::<Vec<_>>();
        let opts = IngestOptions {
            train_fraction: 0.8,
            seed: 4,
            ..Default::default()
        };
        let a = ShapeCorpus::from_meshes(names.clone(), meshes.clone(), Labels::default(), opts)
            .unwrap();
        let b = ShapeCorpus::from_meshes(names, meshes, Labels::default(), opts).unwrap();
        assert_eq!(a.train.len(), 8);
        assert_eq!(a.held_out.len(), 2);
        assert_eq!(a.train, b.train);
        assert_eq!(a.features, b.features);
        // Train features map into [-0.9, 0.9].
        for &i in &a.train {
            assert!(a
                .normalized(i)
                .unwrap()
                .iter()
                .all(|v| v.abs() <= 0.9 + 1e-12));
        }
    }

    #[test]
    fn per_vertex_error_rules() {
        let m = small_spec().mesh();
        assert!(per_vertex_error(&m, &m).unwrap() < 1e-12);
        let moved = m.transformed(
            &so3_exp(&Vec3::new(0.2, 0.5, -1.0)),
            &Vec3::new(3.0, 0.0, 1.0),
        );
        assert!(per_vertex_error(&moved, &m).unwrap() < 1e-12);
        assert!(per_vertex_error(&m, &moved).unwrap() < 1e-12);
    }

    #[test]
    fn single_vertex_offset_error() {
        let m = TubeSpec::default().mesh();
        let n = m.vertex_count() as f64;
        let delta = 1e-3;
        let mut v = m.vertices().to_vec();
        v[57] += Vec3::new(0.0, 0.0, delta);
        let bumped = m.with_vertices(v).unwrap();
        // Centroid-only alignment: the bumped vertex keeps δ(1 - 1/n), every
        // other vertex moves by δ/n. The rotation part only shaves a little more.
        let centroid_only = 2.0 * delta * (n - 1.0) / (n * n);
        let err = per_vertex_error(&bumped, &m).unwrap();
        assert!(err > delta / n && err < 3.0 * delta / n, "{err}");
        assert!(
            (err - centroid_only).abs() < 0.15 * centroid_only,
            "{err} vs {centroid_only}"
        );
    }

    #[test]
    fn labels_vocabulary() {
        let labels = Labels::from_tokens(&[vec!["b".into(), "a".into(), "b".into()]]).unwrap();
        assert_eq!(
            labels.vocabularies,
            vec![vec!["a".to_string(), "b".to_string()]]
        );
        assert_eq!(labels.indices, vec![vec![1], vec![0], vec![1]]);
        assert_eq!(labels.label(1, 0), "a");
    }
}
