//! Deterministic synthetic multimodal data with a known cross-modality map.
//!
//! Each sample has a hidden latent `z ∈ R^k`. Modality `m` observes
//! `U_m = A_m·z + b_m + σ_m·noise`, and the label is a function of `z` (the
//! class whose center generated it, or a noisy linear readout). Because every
//! `A_m` has full column rank, the noise-free correspondence between two
//! modalities is available in closed form through [`oracle_transport`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, Dense};
use crate::modality::{Label, Modality, Task};
use crate::numkit::SeededRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    fn stream(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

/// Affine observation model of one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityMap {
    /// `[d_m × k]`, rows are output coordinates.
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub noise: f64,
}

impl ModalityMap {
    pub fn dim(&self) -> usize {
        self.matrix.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityMaps {
    pub a: ModalityMap,
    pub v: ModalityMap,
    pub l: ModalityMap,
}

impl ModalityMaps {
    pub fn get(&self, m: Modality) -> &ModalityMap {
        match m {
            Modality::Acoustic => &self.a,
            Modality::Visual => &self.v,
            Modality::Language => &self.l,
        }
    }
}

/// Full description of a synthetic dataset. Every field is serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub task: Task,
    pub latent_dim: usize,
    /// Class centers `[C × k]` (classification).
    pub centers: Vec<Vec<f64>>,
    /// Standard deviation of `z` around its class center.
    pub latent_std: f64,
    /// Regression latents are uniform on `[-latent_range, latent_range]^k`.
    pub latent_range: f64,
    /// Regression readout `y = w·z + label_noise·noise`.
    pub regression_weights: Vec<f64>,
    pub label_noise: f64,
    /// Regression labels are clamped to this interval; also fixes metric bins.
    pub label_range: [f64; 2],
    pub samples: SplitSizes,
    pub modalities: ModalityMaps,
    pub seed: u64,
}

/// One labeled multimodal instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Raw features indexed by [`Modality::index`].
    pub u: [Vec<f64>; 3],
    pub y: Label,
    /// Hidden latent, kept for oracles only.
    pub z: Vec<f64>,
}

impl Sample {
    pub fn features(&self, m: Modality) -> &[f64] {
        &self.u[m.index()]
    }
}

fn rotation_scale(angle_deg: f64, scale: f64) -> Dense {
    let (s, c) = (angle_deg * PI / 180.0).sin_cos();
    vec![vec![scale * c, -scale * s], vec![scale * s, scale * c]]
}

/// `dim` orthonormal columns spanning a random plane, as a `[dim × 2]` matrix.
fn random_frame(dim: usize, rng: &mut SeededRng) -> Dense {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < 2 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        for c in &cols {
            let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            cols.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    (0..dim).map(|r| vec![cols[0][r], cols[1][r]]).collect()
}

impl DatasetSpec {
    /// The `shifted-mixture` benchmark: four Gaussian classes in a 2-D latent
    /// plane, observed by three modalities that differ by rotation, scale and
    /// shift. `dim` is the raw width of every modality (2 or more).
    pub fn shifted_mixture(dim: usize) -> Self {
        // (rotation in degrees, scale, shift)
        let params = [(35.0, 1.4, [2.5, -1.5]), (-60.0, 0.8, [-2.0, -2.5]), (0.0, 1.0, [0.0, 0.0])];
        let mut frame_rng = SeededRng::with_stream(0x5eed, 99);
        let maps: Vec<ModalityMap> = params
            .iter()
            .map(|&(angle, scale, shift)| {
                let rs = rotation_scale(angle, scale);
                if dim == 2 {
                    ModalityMap {
                        matrix: rs,
                        offset: shift.to_vec(),
                        noise: 0.1,
                    }
                } else {
                    let frame = random_frame(dim, &mut frame_rng);
                    let offset_dir = random_frame(dim, &mut frame_rng);
                    ModalityMap {
                        matrix: linalg::matmul(&frame, &rs),
                        offset: linalg::matvec(&offset_dir, &shift),
                        noise: 0.1,
                    }
                }
            })
            .collect();
        let [a, v, l]: [ModalityMap; 3] = maps.try_into().expect("three modalities");
        Self {
            name: format!("shifted-mixture-{dim}d"),
            task: Task::Classification,
            latent_dim: 2,
            centers: vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0]],
            latent_std: 0.6,
            latent_range: 1.5,
            regression_weights: vec![1.0, 0.5],
            label_noise: 0.1,
            label_range: [-3.0, 3.0],
            samples: SplitSizes {
                train: 800,
                val: 200,
                test: 400,
            },
            modalities: ModalityMaps { a, v, l },
            seed: 17,
        }
    }

    /// Same geometry with a continuous label `y = w·z + noise`.
    pub fn shifted_regression(dim: usize) -> Self {
        Self {
            name: format!("shifted-regression-{dim}d"),
            task: Task::Regression,
            ..Self::shifted_mixture(dim)
        }
    }

    pub fn classes(&self) -> usize {
        match self.task {
            Task::Classification => self.centers.len(),
            Task::Regression => 0,
        }
    }

    pub fn modality_dim(&self, m: Modality) -> usize {
        self.modalities.get(m).dim()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.latent_dim;
        if k == 0 {
            return Err(Error::Spec("latent_dim must be positive".into()));
        }
        match self.task {
            Task::Classification => {
                if self.centers.is_empty() {
                    return Err(Error::Spec("classification needs at least one center".into()));
                }
                if self.centers.iter().any(|c| c.len() != k) {
                    return Err(Error::Spec(format!("centers must have {k} coordinates")));
                }
            }
            Task::Regression => {
                if self.regression_weights.len() != k {
                    return Err(Error::Spec(format!("regression_weights must have {k} entries")));
                }
                if self.label_range[0].partial_cmp(&self.label_range[1]) != Some(std::cmp::Ordering::Less) {
                    return Err(Error::Spec("label_range must be increasing".into()));
                }
            }
        }
        let nonneg = [self.latent_std, self.latent_range, self.label_noise];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Spec("spreads and noise levels must be finite and >= 0".into()));
        }
        for m in Modality::ALL {
            let map = self.modalities.get(m);
            if map.matrix.is_empty() || map.matrix.iter().any(|r| r.len() != k) {
                return Err(Error::Spec(format!("modality {m}: matrix must be [d_m x {k}]")));
            }
            if map.offset.len() != map.dim() {
                return Err(Error::Spec(format!("modality {m}: offset must have {} entries", map.dim())));
            }
            if !(map.noise.is_finite() && map.noise >= 0.0) {
                return Err(Error::Spec(format!("modality {m}: noise must be >= 0")));
            }
            if map.dim() < k {
                return Err(Error::Spec(format!("modality {m}: matrix cannot have full column rank")));
            }
            linalg::pinv(&map.matrix).map_err(|_| Error::Spec(format!("modality {m}: matrix is rank deficient")))?;
        }
        Ok(())
    }

    /// Raw, noise-free observation of latent `z` in modality `m`.
    pub fn observe(&self, m: Modality, z: &[f64]) -> Vec<f64> {
        let map = self.modalities.get(m);
        linalg::matvec(&map.matrix, z)
            .into_iter()
            .zip(&map.offset)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Samples of one split. Splits draw from disjoint random streams.
pub fn generate(spec: &DatasetSpec, split: Split) -> Result<Vec<Sample>> {
    spec.validate()?;
    let mut rng = SeededRng::with_stream(spec.seed, split.stream());
    let n = spec.samples.get(split);
    let k = spec.latent_dim;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (z, y) = match spec.task {
            Task::Classification => {
                let class = i % spec.centers.len();
                let z: Vec<f64> = spec.centers[class].iter().map(|c| c + spec.latent_std * rng.normal()).collect();
                (z, Label::Class(class))
            }
            Task::Regression => {
                let z: Vec<f64> = (0..k).map(|_| rng.uniform_range(-spec.latent_range, spec.latent_range)).collect();
                let clean: f64 = z.iter().zip(&spec.regression_weights).map(|(a, b)| a * b).sum();
                let y = (clean + spec.label_noise * rng.normal()).clamp(spec.label_range[0], spec.label_range[1]);
                (z, Label::Value(y))
            }
        };
        let u = Modality::ALL.map(|m| {
            let sigma = spec.modalities.get(m).noise;
            spec.observe(m, &z).into_iter().map(|v| v + sigma * rng.normal()).collect()
        });
        out.push(Sample { u, y, z });
    }
    Ok(out)
}

/// Noise-free correspondence `A_tgt·pinv(A_src)·(u − b_src) + b_tgt`.
///
/// Exact for noise-free data; with noise it returns the image of the
/// least-squares latent estimate.
pub fn oracle_transport(spec: &DatasetSpec, u_src: &[f64], src: Modality, tgt: Modality) -> Result<Vec<f64>> {
    let from = spec.modalities.get(src);
    if u_src.len() != from.dim() {
        return Err(Error::shape("oracle_transport", from.dim(), u_src.len()));
    }
    if src == tgt {
        return Ok(u_src.to_vec());
    }
    let centered: Vec<f64> = u_src.iter().zip(&from.offset).map(|(u, b)| u - b).collect();
    let z = linalg::matvec(&linalg::pinv(&from.matrix)?, &centered);
    Ok(spec.observe(tgt, &z))
}
