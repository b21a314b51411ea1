//! Gray-level co-occurrence matrices and the 20-slot texture feature vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rxplot::GrayImage;

/// Largest gray alphabet accepted by [`compute_glcm`].
pub const MAX_GLCM_LEVELS: u16 = 64;

/// Normalized co-occurrence matrix for one pixel offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub levels: usize,
    /// Row-major `levels × levels` joint probabilities.
    pub p: Vec<f64>,
    pub offset: (i32, i32),
    pub symmetric: bool,
}

impl Glcm {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }
}

/// Raw pair counts for `offset = (dr, dc)` over all in-bounds positions.
pub fn cooccurrence_counts(
    img: &GrayImage,
    offset: (i32, i32),
    symmetric: bool,
) -> Result<Vec<u64>> {
    let levels = usize::from(img.levels);
    let (dr, dc) = offset;
    let (h, w) = (img.height as i64, img.width as i64);
    let rows = 0.max(-i64::from(dr))..h.min(h - i64::from(dr));
    let cols = 0.max(-i64::from(dc))..w.min(w - i64::from(dc));
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Domain(format!(
            "offset {offset:?} leaves no pixel pairs in a {}x{} image",
            img.width, img.height
        )));
    }
    let mut counts = vec![0u64; levels * levels];
    for r in rows {
        let base = (r * w) as usize;
        let nbase = ((r + i64::from(dr)) * w) as usize;
        for c in cols.clone() {
            let i = usize::from(img.pixels[base + c as usize]);
            let j = usize::from(img.pixels[nbase + (c + i64::from(dc)) as usize]);
            counts[i * levels + j] += 1;
            if symmetric {
                counts[j * levels + i] += 1;
            }
        }
    }
    Ok(counts)
}

pub fn compute_glcm(img: &GrayImage, offset: (i32, i32), symmetric: bool) -> Result<Glcm> {
    if img.levels > MAX_GLCM_LEVELS {
        return Err(Error::Domain(format!(
            "GLCM needs at most {MAX_GLCM_LEVELS} levels, image has {}",
            img.levels
        )));
    }
    let counts = cooccurrence_counts(img, offset, symmetric)?;
    let total: u64 = counts.iter().sum();
    let p = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(Glcm {
        levels: usize::from(img.levels),
        p,
        offset,
        symmetric,
    })
}

/// The fourteen co-occurrence statistics, in feature-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GlcmStatistics {
    pub mean: f64,
    pub entropy: f64,
    pub variance: f64,
    /// Σ |i − j|·p, reported as "difference".
    pub dissimilarity: f64,
    pub contrast: f64,
    pub inverse_difference_moment: f64,
    pub energy: f64,
    pub correlation: f64,
    pub cluster_shade: f64,
    pub cluster_prominence: f64,
    pub sum_entropy: f64,
    pub sum_mean: f64,
    pub difference_entropy: f64,
    pub sum_variance: f64,
}

impl GlcmStatistics {
    pub fn to_array(&self) -> [f64; 14] {
        [
            self.mean,
            self.entropy,
            self.variance,
            self.dissimilarity,
            self.contrast,
            self.inverse_difference_moment,
            self.energy,
            self.correlation,
            self.cluster_shade,
            self.cluster_prominence,
            self.sum_entropy,
            self.sum_mean,
            self.difference_entropy,
            self.sum_variance,
        ]
    }
}

/// −Σ p·log2 p over positive entries.
fn entropy_bits(ps: impl IntoIterator<Item = f64>) -> f64 {
    -ps.into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

pub fn glcm_statistics(g: &Glcm) -> GlcmStatistics {
    let n = g.levels;
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut p_sum = vec![0.0; 2 * n - 1];
    let mut p_diff = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let p = g.at(i, j);
            px[i] += p;
            py[j] += p;
            p_sum[i + j] += p;
            p_diff[i.abs_diff(j)] += p;
        }
    }
    let mu_x: f64 = px.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    let mu_y: f64 = py.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    let var_x: f64 = px
        .iter()
        .enumerate()
        .map(|(i, p)| (i as f64 - mu_x).powi(2) * p)
        .sum();
    let var_y: f64 = py
        .iter()
        .enumerate()
        .map(|(j, p)| (j as f64 - mu_y).powi(2) * p)
        .sum();
    let (sd_x, sd_y) = (var_x.sqrt(), var_y.sqrt());

    let mut s = GlcmStatistics {
        mean: mu_x,
        variance: var_x,
        ..Default::default()
    };
    let mut cov = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = g.at(i, j);
            if p == 0.0 {
                continue;
            }
            let (fi, fj) = (i as f64, j as f64);
            let d = fi - fj;
            s.dissimilarity += d.abs() * p;
            s.contrast += d * d * p;
            s.inverse_difference_moment += p / (1.0 + d * d);
            s.energy += p * p;
            cov += (fi - mu_x) * (fj - mu_y) * p;
            let cl = fi + fj - mu_x - mu_y;
            s.cluster_shade += cl.powi(3) * p;
            s.cluster_prominence += cl.powi(4) * p;
        }
    }
    s.entropy = entropy_bits(g.p.iter().copied());
    s.correlation = if sd_x > 0.0 && sd_y > 0.0 {
        (cov / (sd_x * sd_y)).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    s.sum_mean = p_sum.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    s.sum_variance = p_sum
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 - s.sum_mean).powi(2) * p)
        .sum();
    s.sum_entropy = entropy_bits(p_sum.iter().copied());
    s.difference_entropy = entropy_bits(p_diff.iter().copied());
    s
}

pub const FEATURE_LEN: usize = 20;

pub const FEATURE_NAMES: [&str; FEATURE_LEN] = [
    "glcm_mean",
    "glcm_entropy",
    "glcm_variance",
    "glcm_difference",
    "glcm_contrast",
    "glcm_inverse_difference_moment",
    "glcm_energy",
    "glcm_correlation",
    "glcm_cluster_shade",
    "glcm_cluster_prominence",
    "glcm_sum_entropy",
    "glcm_sum_mean",
    "glcm_difference_entropy",
    "glcm_sum_variance",
    "intensity_mean",
    "intensity_std",
    "intensity_skewness",
    "intensity_kurtosis",
    "histogram_energy",
    "histogram_entropy",
];

/// Offsets (dr, dc) for 0°, 45°, 90° and 135° at unit distance.
pub const UNIT_OFFSETS: [(i32, i32); 4] = [(0, 1), (-1, 1), (-1, 0), (-1, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_LEN],
}

impl FeatureVector {
    pub fn names() -> &'static [&'static str; FEATURE_LEN] {
        &FEATURE_NAMES
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Gray levels the image must already be quantized to.
    pub levels: u16,
    pub offsets: Vec<(i32, i32)>,
    pub symmetric: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            levels: 8,
            offsets: UNIT_OFFSETS.to_vec(),
            symmetric: true,
        }
    }
}

/// Global intensity statistics: mean, std, skewness, kurtosis, histogram
/// energy and histogram entropy. Higher moments are 0 for a flat image.
pub fn intensity_statistics(img: &GrayImage) -> [f64; 6] {
    let n = img.pixels.len() as f64;
    let mut hist = vec![0u64; usize::from(img.levels)];
    for &p in &img.pixels {
        hist[usize::from(p)] += 1;
    }
    let probs: Vec<f64> = hist.iter().map(|&c| c as f64 / n).collect();
    let mean: f64 = probs.iter().enumerate().map(|(v, p)| v as f64 * p).sum();
    let moment = |k: i32| -> f64 {
        probs
            .iter()
            .enumerate()
            .map(|(v, p)| (v as f64 - mean).powi(k) * p)
            .sum()
    };
    let var = moment(2);
    let std = var.sqrt();
    let (skew, kurt) = if std > 0.0 {
        (moment(3) / std.powi(3), moment(4) / (var * var))
    } else {
        (0.0, 0.0)
    };
    let energy = probs.iter().map(|p| p * p).sum();
    [
        mean,
        std,
        skew,
        kurt,
        energy,
        entropy_bits(probs.iter().copied()),
    ]
}

/// Offset-averaged GLCM statistics (slots 1–14) followed by global intensity
/// statistics (slots 15–20).
pub fn extract_features(img: &GrayImage, cfg: &FeatureConfig) -> Result<FeatureVector> {
    if img.levels != cfg.levels {
        return Err(Error::Domain(format!(
            "image has {} levels, features expect {}",
            img.levels, cfg.levels
        )));
    }
    if cfg.offsets.is_empty() {
        return Err(Error::Config("no GLCM offsets configured".into()));
    }
    let mut values = [0.0; FEATURE_LEN];
    for &offset in &cfg.offsets {
        let stats = glcm_statistics(&compute_glcm(img, offset, cfg.symmetric)?).to_array();
        for (slot, v) in values.iter_mut().zip(stats) {
            *slot += v;
        }
    }
    let k = cfg.offsets.len() as f64;
    for v in &mut values[..14] {
        *v /= k;
    }
    values[14..].copy_from_slice(&intensity_statistics(img));
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "feature {} is not finite",
            FEATURE_NAMES[i]
        )));
    }
    Ok(FeatureVector { values })
}
