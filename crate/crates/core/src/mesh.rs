//! Shared-connectivity triangle meshes and the connectivity-derived
//! quantities the feature codec needs: one-rings, the canonical directed
//! edge order, and cotangent edge weights.

use std::collections::HashMap;
use std::fmt;

use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Triangle mesh with 0-based vertex indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if n < 4 {
            return Err(Error::InvalidMesh(format!(
                "at least 4 vertices required, got {n}"
            )));
        }
        if faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        let mut edge_faces: HashMap<(usize, usize), u8> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(Error::InvalidMesh(format!(
                        "face {fi}: index {v} out of range (n = {n})"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let count = edge_faces.entry((a.min(b), a.max(b))).or_insert(0);
                *count += 1;
                if *count > 2 {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is shared by more than two faces",
                        a.min(b),
                        a.max(b)
                    )));
                }
            }
        }
        if let Some((i, v)) = vertices
            .iter()
            .enumerate()
            .find(|(_, v)| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidMesh(format!(
                "vertex {i} has a non-finite coordinate: {:?}",
                v.as_slice()
            )));
        }
        Ok(Mesh { vertices, faces })
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::LengthMismatch {
                expected: self.vertices.len(),
                actual: vertices.len(),
            });
        }
        if let Some(i) = vertices
            .iter()
            .position(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidMesh(format!(
                "vertex {i} has a non-finite coordinate"
            )));
        }
        Ok(Mesh {
            vertices,
            faces: self.faces.clone(),
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn connectivity_key(&self) -> ConnectivityKey {
        ConnectivityKey::of_faces(&self.faces)
    }

    /// Applies `p -> rotation * p + translation` to every vertex.
    pub fn transformed(&self, rotation: &nalgebra::Matrix3<f64>, translation: &Vec3) -> Mesh {
        Mesh {
            vertices: self
                .vertices
                .iter()
                .map(|p| rotation * p + translation)
                .collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }
}

/// SHA-256 over the canonicalized face list.
///
/// Each face is rotated so its smallest index comes first (winding is kept),
/// then the face list is sorted.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConnectivityKey(pub [u8; 32]);

impl ConnectivityKey {
    pub fn of_faces(faces: &[[usize; 3]]) -> Self {
        let mut canon: Vec<[usize; 3]> = faces
            .iter()
            .map(|f| {
                let k = (0..3).min_by_key(|&k| f[k]).unwrap();
                [f[k], f[(k + 1) % 3], f[(k + 2) % 3]]
            })
            .collect();
        canon.sort_unstable();
        let mut hasher = Sha256::new();
        hasher.update((canon.len() as u64).to_le_bytes());
        for f in &canon {
            for &v in f {
                hasher.update((v as u64).to_le_bytes());
            }
        }
        ConnectivityKey(hasher.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 64 || !s.is_ascii() {
            return None;
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
        }
        Some(ConnectivityKey(out))
    }
}

impl fmt::Debug for ConnectivityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConnectivityKey({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for ConnectivityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Per-vertex neighbor lists sorted ascending.
pub fn one_rings(mesh: &Mesh) -> Result<Vec<Vec<usize>>> {
    let mut rings = vec![Vec::new(); mesh.vertex_count()];
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            rings[a].push(b);
            rings[b].push(a);
        }
    }
    for (i, ring) in rings.iter_mut().enumerate() {
        ring.sort_unstable();
        ring.dedup();
        if ring.is_empty() {
            return Err(Error::IsolatedVertex(i));
        }
    }
    Ok(rings)
}

/// Connectivity-derived layout shared by every mesh in a collection.
///
/// Directed edges are ordered by source vertex, then ascending target; this
/// order fixes the feature layout.
#[derive(Debug, Clone)]
pub struct Topology {
    rings: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    key: ConnectivityKey,
}

impl Topology {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let rings = one_rings(mesh)?;
        let mut offsets = Vec::with_capacity(rings.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for ring in &rings {
            acc += ring.len();
            offsets.push(acc);
        }
        Ok(Topology {
            rings,
            offsets,
            key: mesh.connectivity_key(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.rings.len()
    }

    pub fn directed_edge_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn ring(&self, i: usize) -> &[usize] {
        &self.rings[i]
    }

    pub fn rings(&self) -> &[Vec<usize>] {
        &self.rings
    }

    pub fn key(&self) -> ConnectivityKey {
        self.key
    }

    /// Index of directed edge `(i, j)` in canonical order.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.rings[i]
            .binary_search(&j)
            .ok()
            .map(|pos| self.offsets[i] + pos)
    }

    /// First directed-edge index of vertex `i`'s ring.
    pub fn ring_offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rings
            .iter()
            .enumerate()
            .flat_map(|(i, ring)| ring.iter().map(move |&j| (i, j)))
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        let key = mesh.connectivity_key();
        if key != self.key {
            return Err(Error::ConnectivityMismatch(format!(
                "expected connectivity {}, got {}",
                &self.key.to_hex()[..16],
                &key.to_hex()[..16]
            )));
        }
        Ok(())
    }
}

/// Cotangent weights laid out per directed edge in [`Topology`] order.
/// Both directions of an undirected edge hold the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct CotanWeights {
    weights: Vec<f64>,
}

impl CotanWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, topology: &Topology, i: usize, j: usize) -> Option<f64> {
        topology.edge_index(i, j).map(|e| self.weights[e])
    }
}

/// `c_ij = cot α_ij + cot β_ij` on interior edges, the single available
/// cotangent on boundary edges. Negative values (obtuse angles) are kept.
pub fn cotan_weights(mesh: &Mesh, topology: &Topology) -> Result<CotanWeights> {
    let mut undirected: HashMap<(usize, usize), f64> = HashMap::new();
    let p = mesh.vertices();
    for (fi, f) in mesh.faces().iter().enumerate() {
        let area2 = (p[f[1]] - p[f[0]]).cross(&(p[f[2]] - p[f[0]])).norm();
        let scale = (p[f[1]] - p[f[0]]).norm_squared()
            + (p[f[2]] - p[f[1]]).norm_squared()
            + (p[f[0]] - p[f[2]]).norm_squared();
        if !(area2 > 1e-14 * scale) {
            return Err(Error::DegenerateFace {
                face: fi,
                a: f[0],
                b: f[1],
                c: f[2],
            });
        }
        for k in 0..3 {
            let (a, b, opp) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let u = p[a] - p[opp];
            let v = p[b] - p[opp];
            let cot = u.dot(&v) / u.cross(&v).norm();
            *undirected.entry((a.min(b), a.max(b))).or_insert(0.0) += cot;
        }
    }
    let weights = topology
        .directed_edges()
        .map(|(i, j)| undirected[&(i.min(j), i.max(j))])
        .collect();
    Ok(CotanWeights { weights })
}
