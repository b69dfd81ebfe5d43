//! Detrended fluctuation and detrended cross-correlation analysis.
//!
//! A series is integrated into its profile `X_t = Σ_{i≤t}(x_i − ⟨x⟩)`, the
//! profile is cut into boxes of `s` points, and a least-squares line is
//! removed from every box. The detrended covariance `F²_DCCA(s)` is the mean
//! over boxes of `Σ X̃ Ỹ / (s − 1)`, and
//!
//! ```text
//! ρ_DCCA(s) = F²_DCCA(s) / (F_DFA,x(s) · F_DFA,y(s))
//! ```
//!
//! with `F_DFA,x(s)² = F²_DCCA` of `x` with itself.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible box length.
pub const MIN_SCALE: usize = 4;

/// Residual energy below this fraction of the profile energy counts as a
/// perfectly detrendable (degenerate) series.
const DEGENERATE_REL_ENERGY: f64 = 1e-24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DccaError {
    #[error("box length {0} is below the minimum of {MIN_SCALE}")]
    ScaleTooSmall(usize),
    #[error("no scales given")]
    NoScales,
    #[error("series of length {len} is too short for box length {scale} (need at least {})", 2 * scale)]
    TooShort { len: usize, scale: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{which} has zero detrended fluctuation at scale {scale}")]
    Degenerate { which: String, scale: usize },
}

pub type Result<T> = std::result::Result<T, DccaError>;

/// How a profile is partitioned into boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxScheme {
    /// Non-overlapping boxes from the first observation; the remainder is dropped.
    #[default]
    Forward,
    /// Forward boxes plus the same number of boxes laid from the end, so the
    /// remainder is covered too.
    ForwardBackward,
}

/// Validated list of box lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleSpec(Vec<usize>);

impl ScaleSpec {
    pub fn new(scales: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut out: Vec<usize> = Vec::new();
        for s in scales {
            if s < MIN_SCALE {
                return Err(DccaError::ScaleTooSmall(s));
            }
            if !out.contains(&s) {
                out.push(s);
            }
        }
        if out.is_empty() {
            return Err(DccaError::NoScales);
        }
        Ok(Self(out))
    }

    pub fn scales(&self) -> &[usize] {
        &self.0
    }

    pub fn max(&self) -> usize {
        *self.0.iter().max().expect("non-empty")
    }

    /// Every scale must fit at least two boxes into `len` observations.
    pub fn check_length(&self, len: usize) -> Result<()> {
        match self.0.iter().find(|&&s| 2 * s > len) {
            Some(&scale) => Err(DccaError::TooShort { len, scale }),
            None => Ok(()),
        }
    }
}

/// Cumulative sum of deviations from the mean.
pub fn integrate_profile(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter()
        .scan(0.0, |acc, v| {
            *acc += v - mean;
            Some(*acc)
        })
        .collect()
}

/// Box-wise linearly detrended profile of one series at one scale.
///
/// Residuals of all boxes are stored back to back, so cross products between
/// two series reduce to a dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct DetrendedProfile {
    scale: usize,
    n_boxes: usize,
    residuals: Vec<f64>,
    profile_energy: f64,
}

impl DetrendedProfile {
    pub fn new(x: &[f64], scale: usize, scheme: BoxScheme) -> Result<Self> {
        if scale < MIN_SCALE {
            return Err(DccaError::ScaleTooSmall(scale));
        }
        if x.len() < 2 * scale {
            return Err(DccaError::TooShort {
                len: x.len(),
                scale,
            });
        }
        let profile = integrate_profile(x);
        let forward = profile.len() / scale;
        let mut starts: Vec<usize> = (0..forward).map(|b| b * scale).collect();
        if scheme == BoxScheme::ForwardBackward {
            let end = profile.len();
            starts.extend((1..=forward).map(|b| end - b * scale));
        }

        // Abscissa 1..s; its mean and centered sum of squares are fixed per scale.
        let sf = scale as f64;
        let t_mean = (sf + 1.0) / 2.0;
        let t_ss = sf * (sf * sf - 1.0) / 12.0;

        let mut residuals = Vec::with_capacity(starts.len() * scale);
        let mut profile_energy = 0.0;
        for &start in &starts {
            let segment = &profile[start..start + scale];
            let y_mean = segment.iter().sum::<f64>() / sf;
            let sxy: f64 = segment
                .iter()
                .enumerate()
                .map(|(k, y)| (k as f64 + 1.0 - t_mean) * (y - y_mean))
                .sum();
            let slope = sxy / t_ss;
            for (k, y) in segment.iter().enumerate() {
                profile_energy += y * y;
                residuals.push(y - y_mean - slope * (k as f64 + 1.0 - t_mean));
            }
        }
        Ok(Self {
            scale,
            n_boxes: starts.len(),
            residuals,
            profile_energy,
        })
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn n_boxes(&self) -> usize {
        self.n_boxes
    }

    /// Mean over boxes of the per-box covariance with denominator `s − 1`.
    pub fn covariance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.residuals.len(), other.residuals.len());
        let cross: f64 = self
            .residuals
            .iter()
            .zip(&other.residuals)
            .map(|(a, b)| a * b)
            .sum();
        cross / ((self.scale - 1) as f64 * self.n_boxes as f64)
    }

    pub fn variance(&self) -> f64 {
        self.covariance(self)
    }

    pub fn is_degenerate(&self) -> bool {
        let energy: f64 = self.residuals.iter().map(|r| r * r).sum();
        energy <= DEGENERATE_REL_ENERGY * self.profile_energy
    }

    fn checked(self, which: &str) -> Result<Self> {
        if self.is_degenerate() {
            Err(DccaError::Degenerate {
                which: which.to_string(),
                scale: self.scale,
            })
        } else {
            Ok(self)
        }
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(DccaError::LengthMismatch(x.len(), y.len()));
    }
    Ok(())
}

/// Signed detrended covariance `F²_DCCA(s)`.
pub fn detrended_covariance(x: &[f64], y: &[f64], s: usize) -> Result<f64> {
    check_pair(x, y)?;
    let px = DetrendedProfile::new(x, s, BoxScheme::Forward)?;
    let py = DetrendedProfile::new(y, s, BoxScheme::Forward)?;
    Ok(px.covariance(&py))
}

/// Detrended fluctuation `F_DFA(s)`.
pub fn dfa(x: &[f64], s: usize) -> Result<f64> {
    Ok(DetrendedProfile::new(x, s, BoxScheme::Forward)?
        .variance()
        .sqrt())
}

/// A DCCA coefficient together with its unclamped value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DccaCoefficient {
    pub rho: f64,
    pub raw: f64,
}

impl DccaCoefficient {
    fn from_raw(raw: f64) -> Self {
        Self {
            rho: raw.clamp(-1.0, 1.0),
            raw,
        }
    }

    pub fn clamped(&self) -> bool {
        self.rho != self.raw
    }

    /// How far the raw value fell outside [−1, 1].
    pub fn clamp_excess(&self) -> f64 {
        (self.raw.abs() - 1.0).max(0.0)
    }
}

fn coefficient(px: &DetrendedProfile, py: &DetrendedProfile) -> DccaCoefficient {
    let fx = px.variance().sqrt();
    let fy = py.variance().sqrt();
    DccaCoefficient::from_raw(px.covariance(py) / (fx * fy))
}

pub fn rho_dcca(x: &[f64], y: &[f64], s: usize) -> Result<f64> {
    Ok(rho_dcca_detailed(x, y, s, BoxScheme::Forward)?.rho)
}

pub fn rho_dcca_detailed(
    x: &[f64],
    y: &[f64],
    s: usize,
    scheme: BoxScheme,
) -> Result<DccaCoefficient> {
    check_pair(x, y)?;
    let px = DetrendedProfile::new(x, s, scheme)?.checked("first series")?;
    let py = DetrendedProfile::new(y, s, scheme)?.checked("second series")?;
    Ok(coefficient(&px, &py))
}

/// Symmetric matrix of DCCA coefficients at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DccaMatrix {
    pub scale: usize,
    pub rho: Array2<f64>,
    /// Number of off-diagonal pairs whose raw ratio left [−1, 1].
    pub clamp_count: usize,
    pub max_clamp_excess: f64,
}

impl DccaMatrix {
    pub fn n(&self) -> usize {
        self.rho.nrows()
    }
}

/// All pairwise coefficients between the columns of a T×N return matrix.
///
/// `names` labels columns in the degenerate-input error.
pub fn dcca_matrix(
    returns: ArrayView2<'_, f64>,
    s: usize,
    scheme: BoxScheme,
    names: Option<&[String]>,
) -> Result<DccaMatrix> {
    let n = returns.ncols();
    let label = |j: usize| match names {
        Some(names) => format!("column `{}`", names[j]),
        None => format!("column {j}"),
    };
    let profiles: Vec<DetrendedProfile> = (0..n)
        .map(|j| {
            let col = returns.column(j).to_vec();
            DetrendedProfile::new(&col, s, scheme)?.checked(&label(j))
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let coefs: Vec<DccaCoefficient> = pairs
        .par_iter()
        .map(|&(i, j)| coefficient(&profiles[i], &profiles[j]))
        .collect();

    let mut rho = Array2::<f64>::eye(n);
    let mut clamp_count = 0;
    let mut max_clamp_excess: f64 = 0.0;
    for (&(i, j), c) in pairs.iter().zip(&coefs) {
        rho[[i, j]] = c.rho;
        rho[[j, i]] = c.rho;
        if c.clamped() {
            clamp_count += 1;
            max_clamp_excess = max_clamp_excess.max(c.clamp_excess());
        }
    }
    Ok(DccaMatrix {
        scale: s,
        rho,
        clamp_count,
        max_clamp_excess,
    })
}

/// `d = √(2(1 − ρ²))`.
pub fn distance(rho: f64) -> f64 {
    (2.0 * (1.0 - rho * rho)).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub scale: usize,
    pub d: Array2<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.d.nrows()
    }
}

pub fn to_distance(m: &DccaMatrix) -> DistanceMatrix {
    let mut d = m.rho.mapv(distance);
    d.diag_mut().fill(0.0);
    DistanceMatrix { scale: m.scale, d }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::sim;

    #[test]
    fn profile_examples() {
        assert_eq!(
            integrate_profile(&[1.0, -1.0, 1.0, -1.0]),
            vec![1.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(integrate_profile(&[2.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(integrate_profile(&[1.0, 2.0, 3.0]), vec![-1.0, -1.0, 0.0]);
    }

    #[test]
    fn scale_spec_validation() {
        assert_eq!(ScaleSpec::new([3]), Err(DccaError::ScaleTooSmall(3)));
        assert_eq!(ScaleSpec::new([]), Err(DccaError::NoScales));
        let spec = ScaleSpec::new([21, 84, 21]).unwrap();
        assert_eq!(spec.scales(), &[21, 84]);
        assert!(spec.check_length(168).is_ok());
        assert!(spec.check_length(167).is_err());
    }

    #[test]
    fn too_short_rejected() {
        let x = vec![0.0; 15];
        assert!(matches!(
            detrended_covariance(&x, &x, 8),
            Err(DccaError::TooShort { len: 15, scale: 8 })
        ));
        assert!(matches!(
            rho_dcca(&x, &x[..14], 4),
            Err(DccaError::LengthMismatch(15, 14))
        ));
    }

    #[test]
    fn self_covariance_nonnegative_and_bilinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sim::gaussian_noise(500, &mut rng);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let c = detrended_covariance(&x, &x, 16).unwrap();
        assert!(c >= 0.0);
        assert_eq!(detrended_covariance(&x, &neg, 16).unwrap(), -c);
    }

    #[test]
    fn linear_profile_has_zero_fluctuation() {
        // constant within each box of 4 ⇒ profile is linear in each box
        let x = [
            1.0, 1.0, 1.0, 1.0, 3.0, 3.0, 3.0, 3.0, -2.0, -2.0, -2.0, -2.0,
        ];
        assert!(dfa(&x, 4).unwrap() < 1e-12);
        assert!(matches!(
            rho_dcca(&x, &x, 4),
            Err(DccaError::Degenerate { .. })
        ));
        let constant = [5.0; 16];
        assert!(matches!(
            rho_dcca(&constant, &constant, 4),
            Err(DccaError::Degenerate { .. })
        ));
    }

    #[test]
    fn dfa_is_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = sim::gaussian_noise(400, &mut rng);
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let (a, b) = (dfa(&x, 10).unwrap(), dfa(&x2, 10).unwrap());
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn self_and_anti_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = sim::gaussian_noise(1000, &mut rng);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        for s in [8, 21, 84] {
            assert!((rho_dcca(&x, &x, s).unwrap() - 1.0).abs() < 1e-12);
            assert!((rho_dcca(&x, &neg, s).unwrap() + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_pearson_correlation_of_gaussian_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (x, y) = sim::correlated_pair(10_000, 0.6, &mut rng);
        let rho = rho_dcca(&x, &y, 10).unwrap();
        assert!((0.55..=0.65).contains(&rho), "{rho}");
    }

    #[test]
    fn independent_random_walks_mostly_uncorrelated() {
        let mut inside = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let a: Vec<f64> = sim::gaussian_noise(4096, &mut rng)
                .iter()
                .scan(0.0, |s, v| {
                    *s += v;
                    Some(*s)
                })
                .collect();
            let b: Vec<f64> = sim::gaussian_noise(4096, &mut rng)
                .iter()
                .scan(0.0, |s, v| {
                    *s += v;
                    Some(*s)
                })
                .collect();
            if rho_dcca(&a, &b, 32).unwrap().abs() < 0.15 {
                inside += 1;
            }
        }
        assert!(inside >= 18, "{inside}/20");
    }

    #[test]
    fn dfa_scaling_of_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = sim::gaussian_noise(8192, &mut rng);
        let pts: Vec<(f64, f64)> = [8usize, 16, 32, 64, 128]
            .iter()
            .map(|&s| ((s as f64).ln(), dfa(&x, s).unwrap().ln()))
            .collect();
        let slope = ols_slope(&pts);
        assert!((0.4..=0.6).contains(&slope), "{slope}");
    }

    fn ols_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn matrix_with_duplicated_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = sim::equicorrelated_returns(300, 3, 0.3, 0.3, 0, &mut rng);
        let mut dup = r.clone();
        let c0 = dup.column(0).to_owned();
        dup.column_mut(2).assign(&c0);
        let m = dcca_matrix(dup.view(), 21, BoxScheme::Forward, None).unwrap();
        assert!((m.rho[[0, 2]] - 1.0).abs() < 1e-12);
        assert_eq!(m.rho, m.rho.t());
        assert!(m.rho.diag().iter().all(|&v| v == 1.0));

        let two =
            dcca_matrix(r.slice(ndarray::s![.., 0..2]), 21, BoxScheme::Forward, None).unwrap();
        assert_eq!(two.n(), 2);
        assert_eq!(
            two.rho[[0, 1]],
            rho_dcca(&r.column(0).to_vec(), &r.column(1).to_vec(), 21).unwrap()
        );
    }

    #[test]
    fn matrix_reports_degenerate_column_by_name() {
        let mut r = Array2::<f64>::zeros((100, 2));
        for t in 0..100 {
            r[[t, 0]] = (t as f64 * 0.7).sin();
            r[[t, 1]] = 1.0;
        }
        let names = vec!["AAA".to_string(), "BBB".to_string()];
        let err = dcca_matrix(r.view(), 10, BoxScheme::Forward, Some(&names)).unwrap_err();
        assert!(err.to_string().contains("BBB"), "{err}");
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(1.0), 0.0);
        assert_eq!(distance(-1.0), 0.0);
        assert_eq!(distance(0.0), std::f64::consts::SQRT_2);
        // 1 − 0.828² = 0.314416, × 2 = 0.628832, √ = 0.7929893
        assert!((distance(0.8280) - 0.7929893).abs() < 5e-7);
    }

    #[test]
    fn distance_matrix_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = sim::equicorrelated_returns(400, 4, 0.5, 0.5, 0, &mut rng);
        let m = dcca_matrix(r.view(), 20, BoxScheme::Forward, None).unwrap();
        let d = to_distance(&m);
        for i in 0..4 {
            assert_eq!(d.d[[i, i]], 0.0);
            for j in 0..4 {
                assert_eq!(d.d[[i, j]], d.d[[j, i]]);
                assert!((0.0..=std::f64::consts::SQRT_2).contains(&d.d[[i, j]]));
                if i != j {
                    assert_eq!(d.d[[i, j]], distance(m.rho[[i, j]]));
                }
            }
        }
    }

    #[test]
    fn forward_backward_covers_remainder() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = sim::gaussian_noise(105, &mut rng);
        let fw = DetrendedProfile::new(&x, 10, BoxScheme::Forward).unwrap();
        let fb = DetrendedProfile::new(&x, 10, BoxScheme::ForwardBackward).unwrap();
        assert_eq!(fw.n_boxes(), 10);
        assert_eq!(fb.n_boxes(), 20);
        let c = rho_dcca_detailed(&x, &x, 10, BoxScheme::ForwardBackward).unwrap();
        assert!((c.rho - 1.0).abs() < 1e-12);
    }

    fn series_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (64usize..300).prop_flat_map(|n| {
            (
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(-3.0f64..3.0, n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetric_bit_exact((x, y) in series_strategy(), s in 4usize..30) {
            prop_assert_eq!(rho_dcca(&x, &y, s).unwrap(), rho_dcca(&y, &x, s).unwrap());
        }

        #[test]
        fn affine_invariance(
            (x, y) in series_strategy(),
            s in 4usize..30,
            a in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
            b in -100.0f64..100.0,
        ) {
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let base = rho_dcca(&x, &y, s).unwrap();
            let scaled = rho_dcca(&ax, &y, s).unwrap();
            prop_assert!((scaled - a.signum() * base).abs() < 1e-10);
        }

        #[test]
        fn remainder_is_discarded((x, y) in series_strategy(), s in 4usize..30) {
            let keep = (x.len() / s) * s;
            let full = rho_dcca(&x, &y, s).unwrap();
            let cut = rho_dcca(&x[..keep], &y[..keep], s).unwrap();
            prop_assert!((full - cut).abs() < 1e-12);
        }

        #[test]
        fn distance_monotone_in_abs_rho(a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
            if a.abs() < b.abs() {
                prop_assert!(distance(a) >= distance(b));
            }
            prop_assert!((0.0..=std::f64::consts::SQRT_2).contains(&distance(a)));
        }
    }
}
