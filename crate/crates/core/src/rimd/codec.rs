use std::collections::VecDeque;

use nalgebra::Matrix3;

use super::polar::polar_decompose;
use super::so3::{project_so3, rotation_angle_between, so3_exp, so3_log};
use super::RimdFeature;
use crate::error::{Error, Result};
use crate::linalg::NormalEquations;
use crate::mesh::{cotan_weights, CotanWeights, Mesh, Topology, Vec3};

/// Relative conditioning above which a one-ring Gram matrix is regularized.
const MAX_RING_CONDITION: f64 = 1e12;
const RING_REGULARIZATION: f64 = 1e-8;

const MAX_AVERAGING_SWEEPS: usize = 20;
const AVERAGING_TOLERANCE: f64 = 1e-6;

/// How positions are recovered from per-vertex deformation gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReconstructionMethod {
    /// Positions whose own local gradient fits reproduce the target
    /// gradients, in the least-squares sense. Exact for encoder output.
    #[default]
    GradientMatching,
    /// Stationary point of the edge energy with the gradients held fixed,
    /// solved as weighted least squares over directed edges with `|c_ij|`.
    EdgeEnergy,
}

impl std::str::FromStr for ReconstructionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient-matching" => Ok(Self::GradientMatching),
            "edge-energy" => Ok(Self::EdgeEnergy),
            other => Err(Error::InvalidArgument(format!(
                "unknown reconstruction method `{other}` (expected gradient-matching or edge-energy)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeformGradients {
    pub gradients: Vec<Matrix3<f64>>,
    pub rotations: Vec<Matrix3<f64>>,
    pub scales: Vec<Matrix3<f64>>,
}

#[derive(Debug, Clone)]
pub struct RotationIntegration {
    pub rotations: Vec<Matrix3<f64>>,
    /// Averaging sweeps performed after tree propagation.
    pub sweeps: usize,
    /// Largest per-vertex rotation change in the last sweep, radians.
    pub max_change: f64,
}

#[derive(Debug, Clone)]
struct RingFrame {
    /// `Σ c_ij e_ij e_ijᵀ + μ I`
    gram: Matrix3<f64>,
    gram_inv: Matrix3<f64>,
    mu: f64,
}

/// Encoder/decoder bound to one reference mesh.
///
/// Construction precomputes the connectivity layout, cotangent weights and
/// the per-vertex reference Gram matrices so that encoding or decoding a
/// whole collection does not repeat that work.
#[derive(Debug, Clone)]
pub struct FrameCodec {
    reference: Mesh,
    topology: Topology,
    weights: CotanWeights,
    frames: Vec<RingFrame>,
    method: ReconstructionMethod,
}

impl FrameCodec {
    pub fn new(reference: &Mesh) -> Result<Self> {
        let topology = Topology::new(reference)?;
        let weights = cotan_weights(reference, &topology)?;
        let p = reference.vertices();
        let mut frames = Vec::with_capacity(p.len());
        for i in 0..p.len() {
            let mut b = Matrix3::zeros();
            for &j in topology.ring(i) {
                let e = p[i] - p[j];
                b += e * e.transpose() * weights.as_slice()[topology.edge_index(i, j).unwrap()];
            }
            let eig = b.symmetric_eigenvalues();
            let max = eig.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let min = eig.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
            let mu = if !(max > 0.0) {
                return Err(Error::DegenerateRing(i));
            } else if min * MAX_RING_CONDITION < max {
                RING_REGULARIZATION * b.trace().abs().max(max)
            } else {
                0.0
            };
            let gram = b + Matrix3::identity() * mu;
            let gram_inv = gram.try_inverse().ok_or(Error::DegenerateRing(i))?;
            frames.push(RingFrame { gram, gram_inv, mu });
        }
        Ok(FrameCodec {
            reference: reference.clone(),
            topology,
            weights,
            frames,
            method: ReconstructionMethod::default(),
        })
    }

    pub fn with_method(mut self, method: ReconstructionMethod) -> Self {
        self.method = method;
        self
    }

    pub fn method(&self) -> ReconstructionMethod {
        self.method
    }

    pub fn reference(&self) -> &Mesh {
        &self.reference
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn weights(&self) -> &CotanWeights {
        &self.weights
    }

    pub fn feature_len(&self) -> usize {
        RimdFeature::len_for(
            self.topology.vertex_count(),
            self.topology.directed_edge_count(),
        )
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights.as_slice()[self.topology.edge_index(i, j).unwrap()]
    }

    /// Per-vertex least-squares deformation gradients and their polar factors.
    pub fn deformation_gradients(&self, deformed: &Mesh) -> Result<DeformGradients> {
        self.topology.check(deformed)?;
        let p = self.reference.vertices();
        let q = deformed.vertices();
        let n = p.len();
        let mut gradients = Vec::with_capacity(n);
        let mut rotations = Vec::with_capacity(n);
        let mut scales = Vec::with_capacity(n);
        for i in 0..n {
            let frame = &self.frames[i];
            let mut a = Matrix3::identity() * frame.mu;
            for &j in self.topology.ring(i) {
                a += (q[i] - q[j]) * (p[i] - p[j]).transpose() * self.weight(i, j);
            }
            let t = a * frame.gram_inv;
            let (r, s) = polar_decompose(&t).map_err(|_| Error::DegenerateRing(i))?;
            gradients.push(t);
            rotations.push(r);
            scales.push(s);
        }
        Ok(DeformGradients {
            gradients,
            rotations,
            scales,
        })
    }

    pub fn encode(&self, deformed: &Mesh) -> Result<RimdFeature> {
        let grads = self.deformation_gradients(deformed)?;
        let n = self.topology.vertex_count();
        let mut feature = RimdFeature::identity(n, self.topology.directed_edge_count());
        for (i, s) in grads.scales.iter().enumerate() {
            feature.set_scale(i, s);
        }
        for (e, (i, j)) in self.topology.directed_edges().enumerate() {
            let dr = grads.rotations[i].transpose() * grads.rotations[j];
            feature.set_logdr(e, &so3_log(&dr)?);
        }
        Ok(feature)
    }

    fn check_feature(&self, feature: &RimdFeature) -> Result<()> {
        if feature.vertex_count() != self.topology.vertex_count()
            || feature.edge_count() != self.topology.directed_edge_count()
        {
            return Err(Error::LengthMismatch {
                expected: self.feature_len(),
                actual: feature.len(),
            });
        }
        Ok(())
    }

    /// Absolute per-vertex rotations from the relative edge rotations.
    ///
    /// Rotations are propagated breadth-first from vertex 0 (fixed to the
    /// identity), then refined by cotangent-weighted rotation averaging. Both
    /// stored directions of each edge contribute to the average.
    pub fn integrate_rotations(&self, feature: &RimdFeature) -> Result<RotationIntegration> {
        self.check_feature(feature)?;
        let topo = &self.topology;
        let n = topo.vertex_count();
        let mut rotations: Vec<Option<Matrix3<f64>>> = vec![None; n];
        rotations[0] = Some(Matrix3::identity());
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            let ri = rotations[i].unwrap();
            for &j in topo.ring(i) {
                if rotations[j].is_none() {
                    let e = topo.edge_index(i, j).unwrap();
                    rotations[j] = Some(ri * so3_exp(&feature.logdr(e)));
                    queue.push_back(j);
                }
            }
        }
        let mut rotations: Vec<Matrix3<f64>> = rotations
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or(Error::Disconnected(i)))
            .collect::<Result<_>>()?;

        // R_i ≈ R_j·dR_ijᵀ ≈ R_j·dR_ji
        let to_neighbor: Vec<Matrix3<f64>> = topo
            .directed_edges()
            .map(|(i, j)| {
                let fwd = so3_exp(&feature.logdr(topo.edge_index(i, j).unwrap()));
                let back = so3_exp(&feature.logdr(topo.edge_index(j, i).unwrap()));
                (fwd.transpose() + back) * 0.5
            })
            .collect();

        let mut sweeps = 0;
        let mut max_change = 0.0;
        while sweeps < MAX_AVERAGING_SWEEPS {
            sweeps += 1;
            max_change = 0.0f64;
            for i in 0..n {
                let mut acc = Matrix3::zeros();
                for &j in topo.ring(i) {
                    let e = topo.edge_index(i, j).unwrap();
                    acc += rotations[j] * to_neighbor[e] * self.weights.as_slice()[e];
                }
                if acc.norm() == 0.0 {
                    continue;
                }
                let updated = project_so3(&acc);
                max_change = max_change.max(rotation_angle_between(&rotations[i], &updated));
                rotations[i] = updated;
            }
            if max_change < AVERAGING_TOLERANCE {
                break;
            }
        }
        Ok(RotationIntegration {
            rotations,
            sweeps,
            max_change,
        })
    }

    pub fn reconstruct(&self, feature: &RimdFeature) -> Result<Mesh> {
        let rotations = self.integrate_rotations(feature)?.rotations;
        let gradients: Vec<Matrix3<f64>> = rotations
            .iter()
            .enumerate()
            .map(|(i, r)| r * feature.scale(i))
            .collect();
        self.positions_from_gradients(&gradients)
    }

    /// Solves for vertex positions given per-vertex deformation gradients,
    /// with the centroid fixed to the reference centroid.
    pub fn positions_from_gradients(&self, gradients: &[Matrix3<f64>]) -> Result<Mesh> {
        let topo = &self.topology;
        let p = self.reference.vertices();
        let n = topo.vertex_count();
        if gradients.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: gradients.len(),
            });
        }
        let mut ne = NormalEquations::new(n);
        match self.method {
            ReconstructionMethod::GradientMatching => {
                for i in 0..n {
                    let frame = &self.frames[i];
                    let target = gradients[i] * frame.gram - Matrix3::identity() * frame.mu;
                    for m in 0..3 {
                        let mut row = Vec::with_capacity(topo.ring(i).len() + 1);
                        let mut diag = 0.0;
                        for &j in topo.ring(i) {
                            let coef = self.weight(i, j) * (p[i] - p[j])[m];
                            diag += coef;
                            row.push((j, -coef));
                        }
                        row.push((i, diag));
                        ne.add_row(&row, [target[(0, m)], target[(1, m)], target[(2, m)]]);
                    }
                }
            }
            ReconstructionMethod::EdgeEnergy => {
                for (i, j) in topo.directed_edges() {
                    let w = self.weight(i, j).abs().sqrt();
                    if w == 0.0 {
                        continue;
                    }
                    let rhs: Vec3 = gradients[i] * (p[i] - p[j]) * w;
                    ne.add_row(&[(i, w), (j, -w)], [rhs.x, rhs.y, rhs.z]);
                }
            }
        }
        let [x, y, z] = ne.solve(Some(0))?;
        let mut vertices: Vec<Vec3> = (0..n).map(|i| Vec3::new(x[i], y[i], z[i])).collect();
        let shift = self.reference.centroid() - vertices.iter().sum::<Vec3>() / n as f64;
        for v in &mut vertices {
            *v += shift;
        }
        self.reference.with_vertices(vertices)
    }
}

pub fn deformation_gradients(reference: &Mesh, deformed: &Mesh) -> Result<DeformGradients> {
    FrameCodec::new(reference)?.deformation_gradients(deformed)
}

pub fn encode(reference: &Mesh, deformed: &Mesh) -> Result<RimdFeature> {
    FrameCodec::new(reference)?.encode(deformed)
}

pub fn integrate_rotations(feature: &RimdFeature, reference: &Mesh) -> Result<RotationIntegration> {
    FrameCodec::new(reference)?.integrate_rotations(feature)
}

pub fn reconstruct(feature: &RimdFeature, reference: &Mesh) -> Result<Mesh> {
    FrameCodec::new(reference)?.reconstruct(feature)
}

pub fn reconstruct_with(
    feature: &RimdFeature,
    reference: &Mesh,
    method: ReconstructionMethod,
) -> Result<Mesh> {
    FrameCodec::new(reference)?
        .with_method(method)
        .reconstruct(feature)
}
