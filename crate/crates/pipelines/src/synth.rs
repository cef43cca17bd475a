//! Seeded synthetic descriptor tables standing in for real feature files.
//!
//! Rows follow a latent-factor model: `latent` Gaussian factors, shifted by
//! `±shift/2` along a random unit direction depending on the class, drive all
//! 39 columns through random loadings plus independent noise. Each column is
//! then given its own offset and scale so the raw table has the
//! heterogeneous units of real descriptors.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{write_features, Sample, N_FEATURES};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub name: &'static str,
    pub n_pos: usize,
    pub n_neg: usize,
    pub latent: usize,
    pub shift: f64,
    pub noise: f64,
    pub seed: u64,
}

/// 34 activators and 89 inhibitors with a moderate class signal.
pub const COVID_LIKE: SynthSpec = SynthSpec {
    name: "covid_like",
    n_pos: 34,
    n_neg: 89,
    latent: 4,
    shift: 1.0,
    noise: 0.5,
    seed: 19,
};

/// Classes far apart relative to their spread.
pub const SEPARABLE: SynthSpec = SynthSpec {
    name: "separable",
    n_pos: 60,
    n_neg: 60,
    latent: 4,
    shift: 8.0,
    noise: 0.3,
    seed: 7,
};

/// Imbalanced screening target with enough inactivators for 1:6 sampling.
pub const SCREENING_LIKE: SynthSpec = SynthSpec {
    name: "screening_like",
    n_pos: 40,
    n_neg: 400,
    latent: 4,
    shift: 1.0,
    noise: 0.5,
    seed: 23,
};

pub const FIXTURES: [SynthSpec; 3] = [COVID_LIKE, SEPARABLE, SCREENING_LIKE];

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Activators first, then inactivators; ids `<name>_0000`, ….
pub fn descriptor_like(spec: &SynthSpec) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let loadings: Vec<Vec<f64>> = (0..N_FEATURES)
        .map(|_| (0..spec.latent).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let mut direction: Vec<f64> = (0..spec.latent).map(|_| normal.sample(&mut rng)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);
    let scales: Vec<f64> = (0..N_FEATURES).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect();
    let offsets: Vec<f64> = scales.iter().map(|s| s * rng.random_range(2.0..6.0)).collect();

    (0..spec.n_pos + spec.n_neg)
        .map(|i| {
            let label: i8 = if i < spec.n_pos { 1 } else { -1 };
            let t: Vec<f64> = direction
                .iter()
                .map(|u| normal.sample(&mut rng) + 0.5 * spec.shift * label as f64 * u)
                .collect();
            let features = (0..N_FEATURES)
                .map(|c| {
                    let f: f64 = loadings[c].iter().zip(&t).map(|(l, v)| l * v).sum::<f64>()
                        + spec.noise * normal.sample(&mut rng);
                    round6(offsets[c] + scales[c] * f)
                })
                .collect();
            Sample {
                id: format!("{}_{i:04}", spec.name),
                features,
                label,
                target_name: spec.name.to_owned(),
            }
        })
        .collect()
}

/// Two isotropic unit Gaussians in 39 dimensions whose means differ by
/// `shift` along every axis; labels alternate starting with +1.
pub fn gaussian_pair(n: usize, shift: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let y: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let x = y
        .iter()
        .map(|&l| (0..N_FEATURES).map(|_| normal.sample(&mut rng) + 0.5 * shift * l as f64).collect())
        .collect();
    (x, y)
}

/// Writes `<dir>/<name>.csv`; returns the path.
pub fn write_fixture(spec: &SynthSpec, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.csv", spec.name));
    qembed_core::write_atomic(&path, &write_features(&descriptor_like(spec))?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{class_counts, read_features};

    #[test]
    fn class_counts_and_determinism() {
        let a = descriptor_like(&COVID_LIKE);
        assert_eq!(class_counts(&a), (34, 89));
        assert_eq!(a, descriptor_like(&COVID_LIKE));
        assert!(a.iter().all(|s| s.features.len() == N_FEATURES && s.features.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn survives_csv_round_trip() {
        let a = descriptor_like(&SEPARABLE);
        let back = read_features(write_features(&a).unwrap().as_slice(), "separable").unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn gaussian_pair_means() {
        let (x, y) = gaussian_pair(2000, 1.0, 3);
        let mean = |label: i8| {
            let rows: Vec<&Vec<f64>> = x.iter().zip(&y).filter(|(_, &l)| l == label).map(|(r, _)| r).collect();
            rows.iter().map(|r| r.iter().sum::<f64>() / N_FEATURES as f64).sum::<f64>() / rows.len() as f64
        };
        assert!((mean(1) - 0.5).abs() < 0.05);
        assert!((mean(-1) + 0.5).abs() < 0.05);
    }
}
