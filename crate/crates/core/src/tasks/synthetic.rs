//! Attractor-capacity targets and 2-D Gaussian blobs.

use rand_distr::{Distribution, Normal, Uniform};

use super::{Dataset, DatasetMeta, Split};
use crate::attractor::AttractorTargets;
use crate::{derive_seed, rng_from_seed, Error, Result};

/// Per-coordinate std of each blob.
pub const BLOB_STD: f64 = 1.0;

/// `a` vectors drawn uniformly from the open cube `(-1, 1)^m`, each to be
/// presented with `kappa` noisy instances.
pub fn gen_attractor_targets(a: usize, m: usize, kappa: usize, seed: u64) -> Result<AttractorTargets> {
    if a == 0 || m == 0 || kappa == 0 {
        return Err(Error::Config(format!(
            "attractor targets need a, m, kappa >= 1 (got {a}, {m}, {kappa})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let dist = Uniform::new(-1.0, 1.0).expect("finite bounds");
    let xi = (0..a)
        .map(|_| {
            (0..m)
                .map(|_| loop {
                    let v: f64 = dist.sample(&mut rng);
                    if v > -1.0 {
                        break v;
                    }
                })
                .collect()
        })
        .collect();
    AttractorTargets::new(xi, kappa)
}

fn blob_set(n_per_class: usize, separation: f64, seed: u64, meta: DatasetMeta) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, BLOB_STD).expect("finite std");
    let mut inputs = Vec::with_capacity(2 * n_per_class);
    let mut targets = Vec::with_capacity(2 * n_per_class);
    for i in 0..2 * n_per_class {
        let label = (i % 2) as f64;
        let cx = if label == 1.0 { separation / 2.0 } else { -separation / 2.0 };
        let x = cx + noise.sample(&mut rng);
        let y = noise.sample(&mut rng);
        inputs.push(vec![vec![x, y]]);
        targets.push(label);
    }
    Dataset {
        inputs,
        targets,
        alphabet: None,
        meta,
    }
}

/// Two isotropic clusters centred at `(±separation/2, 0)`, label 1 on the
/// positive side. Each example is a length-1 sequence of a 2-vector.
pub fn gen_blobs(n_per_class: usize, separation: f64, seed: u64) -> Result<Split> {
    if !(separation > 0.0) {
        return Err(Error::Config(format!("separation must be > 0, got {separation}")));
    }
    let meta = |part: &str| {
        DatasetMeta::new(
            "blobs",
            &[
                ("part", part.into()),
                ("n_per_class", n_per_class.to_string()),
                ("separation", separation.to_string()),
            ],
            seed,
        )
    };
    Ok(Split {
        train: blob_set(n_per_class, separation, derive_seed(seed, 0), meta("train")),
        test: blob_set(n_per_class, separation, derive_seed(seed, 1), meta("test")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_lie_in_open_cube_with_uniform_moments() {
        let t = gen_attractor_targets(250, 50, 1, 3).unwrap();
        assert_eq!((t.count(), t.dim()), (250, 50));
        let all: Vec<f64> = t.xi.iter().flatten().copied().collect();
        assert!(all.iter().all(|v| v.abs() < 1.0));
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        // Standard error of the mean is sqrt(1/3 / 12500) ≈ 0.005.
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((var - 1.0 / 3.0).abs() < 0.01, "{var}");
        for i in 0..t.count() {
            for j in 0..i {
                assert_ne!(t.xi[i], t.xi[j]);
            }
        }
        assert!(gen_attractor_targets(0, 5, 1, 0).is_err());
    }

    #[test]
    fn blob_means_and_balance() {
        let split = gen_blobs(2000, 10.0, 7).unwrap();
        let d = &split.train;
        assert_eq!(d.positives(), 2000);
        for label in [0.0, 1.0] {
            let pts: Vec<&Vec<f64>> = d
                .inputs
                .iter()
                .zip(&d.targets)
                .filter(|(_, &t)| t == label)
                .map(|(s, _)| &s[0])
                .collect();
            let mx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
            let my = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
            let expected = if label == 1.0 { 5.0 } else { -5.0 };
            assert!((mx - expected).abs() < 0.1);
            assert!(my.abs() < 0.1);
        }
        assert_eq!(gen_blobs(5, 1.0, 1).unwrap(), gen_blobs(5, 1.0, 1).unwrap());
        assert!(gen_blobs(5, 0.0, 1).is_err());
    }
}
