//! JSON mesh specifications and seeded quasi-uniform random meshes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QiError, Result};
use crate::mesh::{CrissCrossMesh, Partition1D};

/// Rejection-sampling budget when enforcing the global `h / delta <= gamma`.
const MAX_DRAWS: usize = 10_000;

pub const UNIT_SQUARE: [f64; 4] = [0.0, 1.0, 0.0, 1.0];

fn unit_square() -> [f64; 4] {
    UNIT_SQUARE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformSpec {
    pub m: usize,
    pub n: usize,
    #[serde(default = "unit_square")]
    pub domain: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub m: usize,
    pub n: usize,
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "unit_square")]
    pub domain: [f64; 4],
}

/// One of `{"x": [...], "y": [...]}`, `{"uniform": {...}}` or `{"random": {...}}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<UniformSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSpec>,
}

impl MeshSpec {
    pub fn uniform(m: usize, n: usize, domain: [f64; 4]) -> Self {
        MeshSpec { uniform: Some(UniformSpec { m, n, domain }), ..Default::default() }
    }

    pub fn random(m: usize, n: usize, gamma: f64, seed: u64) -> Self {
        MeshSpec {
            random: Some(RandomSpec { m, n, gamma, seed, domain: UNIT_SQUARE }),
            ..Default::default()
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| QiError::Config(format!("invalid mesh spec: {e}")))
    }

    /// Inline JSON when the argument starts with `{`, otherwise a file path.
    pub fn from_arg(arg: &str) -> Result<Self> {
        if arg.trim_start().starts_with('{') {
            return MeshSpec::from_json(arg);
        }
        let text = std::fs::read_to_string(Path::new(arg))
            .map_err(|e| QiError::Config(format!("cannot read mesh file {arg}: {e}")))?;
        MeshSpec::from_json(&text)
    }

    pub fn build(&self) -> Result<CrissCrossMesh> {
        match (&self.x, &self.y, &self.uniform, &self.random) {
            (Some(x), Some(y), None, None) => {
                CrissCrossMesh::new(Partition1D::new(x.clone())?, Partition1D::new(y.clone())?)
            }
            (None, None, Some(u), None) => CrissCrossMesh::uniform(u.m, u.n, u.domain),
            (None, None, None, Some(r)) => random_mesh(r.m, r.n, r.gamma, r.seed, r.domain),
            _ => Err(QiError::Config(
                "mesh spec needs exactly one of {x, y}, uniform or random".into(),
            )),
        }
    }
}

fn random_partition(rng: &mut ChaCha8Rng, a: f64, b: f64, cells: usize, gamma: f64) -> Result<Partition1D> {
    let steps: Vec<f64> = (0..cells).map(|_| rng.gen_range(1.0..=gamma)).collect();
    let total: f64 = steps.iter().sum();
    let mut knots = Vec::with_capacity(cells + 1);
    let mut acc = 0.0;
    knots.push(a);
    for s in &steps[..cells - 1] {
        acc += s;
        knots.push(a + (b - a) * acc / total);
    }
    knots.push(b);
    Partition1D::new(knots)
}

/// Random criss-cross mesh: steps i.i.d. uniform on `[1, gamma]`, rescaled to
/// the domain; redrawn until the global ratio `h / delta` is at most `gamma`.
pub fn random_mesh(m: usize, n: usize, gamma: f64, seed: u64, domain: [f64; 4]) -> Result<CrissCrossMesh> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(QiError::Config(format!("gamma must be a finite number >= 1, got {gamma}")));
    }
    if m < 2 || n < 2 {
        return Err(QiError::UnsupportedMesh { m, n });
    }
    let [a, b, c, d] = domain;
    // equal steps give the smallest attainable global ratio
    let (sx, sy) = ((b - a) / m as f64, (d - c) / n as f64);
    let best = sx.max(sy) / sx.min(sy);
    if best > gamma * (1.0 + 1e-12) {
        return Err(QiError::Config(format!(
            "h/delta <= {gamma} is unattainable for a {m}x{n} mesh on {domain:?} (at least {best:.4})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRAWS {
        let px = random_partition(&mut rng, a, b, m, gamma)?;
        let py = random_partition(&mut rng, c, d, n, gamma)?;
        let mesh = CrissCrossMesh::new(px, py)?;
        if mesh.ratios().gamma <= gamma * (1.0 + 1e-12) {
            return Ok(mesh);
        }
    }
    Err(QiError::Config(format!(
        "no {m}x{n} mesh with h/delta <= {gamma} on {domain:?} after {MAX_DRAWS} draws"
    )))
}
