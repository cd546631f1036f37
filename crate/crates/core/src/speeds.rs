//! Curvature speed functions.
//!
//! A speed is a symmetric, non-decreasing, positive function of the principal
//! curvatures, defined on the open positive cone. Every speed built here is
//! scaled so that `F(1, ..., 1) = n`.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step used for central finite-difference gradients.
pub const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredShape {
    Convex,
    Concave,
    Linear,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeVerdict {
    Convex,
    Concave,
    Indefinite,
    Linear,
}

/// Built-in speed families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// `H = sum kappa_i`.
    MeanCurvature,
    /// `n^(1-p) H^p`.
    PowerOfMean { p: f64 },
    /// `sqrt(n) |A|`.
    NormOfA,
    /// `n M_q(kappa)`, the power mean of order `q` (geometric mean for `q = 0`).
    PowerMean { q: f64 },
    /// Normalized `sigma_k^(1/k)`.
    SigmaKRoot { k: usize },
}

impl Family {
    pub fn parse(name: &str, params: &[f64], n: usize) -> Result<Self> {
        let expect = |count: usize| -> Result<()> {
            if params.len() != count {
                return Err(Error::InvalidParameter {
                    family: name.to_string(),
                    reason: format!("expected {count} parameter(s), got {}", params.len()),
                });
            }
            Ok(())
        };
        let family = match name {
            "H" | "mean_curvature" => {
                expect(0)?;
                Family::MeanCurvature
            }
            "H^p" | "power_of_mean" => {
                expect(1)?;
                Family::PowerOfMean { p: params[0] }
            }
            "norm_of_A" | "sqrt_n_norm_A" => {
                expect(0)?;
                Family::NormOfA
            }
            "power_mean" => {
                expect(1)?;
                Family::PowerMean { q: params[0] }
            }
            "sigma_k_root" => {
                expect(1)?;
                let k = params[0];
                if k.fract() != 0.0 || k < 1.0 {
                    return Err(Error::InvalidParameter {
                        family: name.to_string(),
                        reason: format!("k must be a positive integer, got {k}"),
                    });
                }
                Family::SigmaKRoot { k: k as usize }
            }
            other => return Err(Error::UnknownFamily(other.to_string())),
        };
        family.validate(n)?;
        Ok(family)
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InvalidParameter {
                family: self.name().to_string(),
                reason,
            })
        };
        if n == 0 {
            return bad("dimension n must be positive".into());
        }
        match *self {
            Family::PowerOfMean { p } if !(p.is_finite() && p > 0.0) => {
                bad(format!("exponent p must be positive, got {p}"))
            }
            Family::PowerMean { q } if !q.is_finite() => bad(format!("order q must be finite, got {q}")),
            Family::SigmaKRoot { k } if k == 0 || k > n => {
                bad(format!("k must lie in 1..={n}, got {k}"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::MeanCurvature => "H",
            Family::PowerOfMean { .. } => "H^p",
            Family::NormOfA => "norm_of_A",
            Family::PowerMean { .. } => "power_mean",
            Family::SigmaKRoot { .. } => "sigma_k_root",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Family::MeanCurvature | Family::NormOfA => vec![],
            Family::PowerOfMean { p } => vec![p],
            Family::PowerMean { q } => vec![q],
            Family::SigmaKRoot { k } => vec![k as f64],
        }
    }

    fn homogeneity(&self) -> f64 {
        match *self {
            Family::PowerOfMean { p } => p,
            _ => 1.0,
        }
    }

    fn shape(&self) -> DeclaredShape {
        match *self {
            Family::MeanCurvature => DeclaredShape::Linear,
            Family::PowerOfMean { p } | Family::PowerMean { q: p } => {
                if p == 1.0 {
                    DeclaredShape::Linear
                } else if p > 1.0 {
                    DeclaredShape::Convex
                } else {
                    DeclaredShape::Concave
                }
            }
            Family::NormOfA => DeclaredShape::Convex,
            Family::SigmaKRoot { k } => {
                if k == 1 {
                    DeclaredShape::Linear
                } else {
                    DeclaredShape::Concave
                }
            }
        }
    }

    fn boundary_continuous(&self) -> bool {
        match *self {
            Family::MeanCurvature => true,
            Family::PowerOfMean { p } => p >= 1.0,
            _ => false,
        }
    }

    /// Unnormalized value.
    fn raw(&self, kappa: &[f64]) -> f64 {
        let n = kappa.len() as f64;
        match *self {
            Family::MeanCurvature => kappa.iter().sum(),
            Family::PowerOfMean { p } => signed_pow(kappa.iter().sum(), p),
            Family::NormOfA => kappa.iter().map(|k| k * k).sum::<f64>().sqrt(),
            Family::PowerMean { q } => power_mean(kappa, q),
            Family::SigmaKRoot { k } => {
                let s = elementary_symmetric(kappa, k);
                let _ = n;
                s.powf(1.0 / k as f64)
            }
        }
    }

    /// Unnormalized gradient.
    fn raw_gradient(&self, kappa: &[f64]) -> Vec<f64> {
        let n = kappa.len();
        match *self {
            Family::MeanCurvature => vec![1.0; n],
            Family::PowerOfMean { p } => {
                let h: f64 = kappa.iter().sum();
                vec![p * h.abs().powf(p - 1.0); n]
            }
            Family::NormOfA => {
                let norm = kappa.iter().map(|k| k * k).sum::<f64>().sqrt();
                if norm == 0.0 {
                    vec![1.0 / (n as f64).sqrt(); n]
                } else {
                    kappa.iter().map(|k| k / norm).collect()
                }
            }
            Family::PowerMean { q } => {
                let m = power_mean(kappa, q);
                let nf = n as f64;
                if q == 0.0 {
                    kappa.iter().map(|k| m / (nf * k)).collect()
                } else {
                    kappa
                        .iter()
                        .map(|k| m.powf(1.0 - q) * k.powf(q - 1.0) / nf)
                        .collect()
                }
            }
            Family::SigmaKRoot { k } => {
                let s = elementary_symmetric(kappa, k);
                let outer = s.powf(1.0 / k as f64 - 1.0) / k as f64;
                (0..n)
                    .map(|i| {
                        let rest: Vec<f64> = kappa
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(_, &v)| v)
                            .collect();
                        outer * elementary_symmetric(&rest, k - 1)
                    })
                    .collect()
            }
        }
    }
}

fn signed_pow(x: f64, p: f64) -> f64 {
    x.signum() * x.abs().powf(p)
}

fn power_mean(kappa: &[f64], q: f64) -> f64 {
    let n = kappa.len() as f64;
    if q == 0.0 {
        (kappa.iter().map(|k| k.ln()).sum::<f64>() / n).exp()
    } else {
        (kappa.iter().map(|k| k.powf(q)).sum::<f64>() / n).powf(1.0 / q)
    }
}

/// `sigma_k` by the usual one-pass recurrence.
fn elementary_symmetric(values: &[f64], k: usize) -> f64 {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &v in values {
        for j in (1..=k).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[k]
}

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Builtin(Family),
    Custom(CustomFn),
}

/// A normalized curvature speed. Immutable once built; cheap to clone.
#[derive(Clone)]
pub struct SpeedFunction {
    name: String,
    n: usize,
    kind: Kind,
    scale: f64,
    declared_homogeneity: Option<f64>,
    declared_shape: DeclaredShape,
    boundary_continuous: bool,
}

impl fmt::Debug for SpeedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpeedFunction")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("scale", &self.scale)
            .field("declared_homogeneity", &self.declared_homogeneity)
            .field("declared_shape", &self.declared_shape)
            .field("boundary_continuous", &self.boundary_continuous)
            .finish()
    }
}

impl SpeedFunction {
    /// Builds one of the built-in families by name.
    pub fn builtin(family: &str, params: &[f64], n: usize) -> Result<Self> {
        Ok(Self::from_family(Family::parse(family, params, n)?, n))
    }

    /// Panics if the family parameters are invalid for `n`; use [`Self::builtin`]
    /// for unchecked input.
    pub fn from_family(family: Family, n: usize) -> Self {
        family.validate(n).expect("invalid built-in speed");
        let ones = vec![1.0; n];
        let scale = n as f64 / family.raw(&ones);
        Self {
            name: family.name().to_string(),
            n,
            kind: Kind::Builtin(family),
            scale,
            declared_homogeneity: Some(family.homogeneity()),
            declared_shape: family.shape(),
            boundary_continuous: family.boundary_continuous(),
        }
    }

    pub fn mean_curvature(n: usize) -> Self {
        Self::from_family(Family::MeanCurvature, n)
    }

    /// A user-supplied speed. It is rescaled so that `F(1, ..., 1) = n`; its
    /// gradient is taken by central differences.
    pub fn custom<F>(name: &str, n: usize, f: F, boundary_continuous: bool) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if n == 0 {
            return Err(Error::InvalidSpeed("dimension n must be positive".into()));
        }
        let at_one = f(&vec![1.0; n]);
        if !(at_one.is_finite() && at_one > 0.0) {
            return Err(Error::InvalidSpeed(format!(
                "F(1,...,1) = {at_one} cannot be normalized"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            n,
            kind: Kind::Custom(Arc::new(f)),
            scale: n as f64 / at_one,
            declared_homogeneity: None,
            declared_shape: DeclaredShape::None,
            boundary_continuous,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> Option<Family> {
        match self.kind {
            Kind::Builtin(f) => Some(f),
            Kind::Custom(_) => None,
        }
    }

    pub fn declared_homogeneity(&self) -> Option<f64> {
        self.declared_homogeneity
    }

    pub fn declared_shape(&self) -> DeclaredShape {
        self.declared_shape
    }

    pub fn is_boundary_continuous(&self) -> bool {
        self.boundary_continuous
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self.kind, Kind::Builtin(_))
    }

    /// The constant the raw formula is multiplied by.
    pub fn normalization_constant(&self) -> f64 {
        self.scale
    }

    pub fn spec(&self) -> Option<SpeedSpec> {
        self.family().map(|f| SpeedSpec {
            family: f.name().to_string(),
            params: f.params(),
            n: self.n,
        })
    }

    /// `F(k)` and, when `want_slope`, `F'(k)` for a speed of one curvature.
    /// Same domain rules as [`SpeedFunction::evaluate`], without allocation.
    pub fn evaluate_1d(&self, k: f64, want_slope: bool) -> Result<(f64, f64)> {
        if self.n != 1 {
            return Err(Error::Precondition(format!(
                "speed `{}` expects {} curvatures, got 1",
                self.name, self.n
            )));
        }
        if !self.boundary_continuous && !(k > 0.0) {
            return Err(Error::OutsideCone(vec![k]));
        }
        let (value, slope) = match &self.kind {
            Kind::Builtin(Family::PowerOfMean { p }) => (
                signed_pow(k, *p),
                if want_slope { p * k.abs().powf(p - 1.0) } else { 0.0 },
            ),
            Kind::Builtin(Family::NormOfA) => (k.abs(), k.signum()),
            // Every other family reduces to the identity with one curvature.
            Kind::Builtin(_) => (k, 1.0),
            Kind::Custom(f) => {
                let v = f(&[k]);
                let d = if want_slope { self.fd_gradient(&[k])[0] / self.scale } else { 0.0 };
                (v, d)
            }
        };
        let (value, slope) = (self.scale * value, self.scale * slope);
        if !value.is_finite() || !slope.is_finite() {
            return Err(Error::NonFinite(vec![k]));
        }
        Ok((value, slope))
    }

    fn raw(&self, kappa: &[f64]) -> f64 {
        match &self.kind {
            Kind::Builtin(f) => self.scale * f.raw(kappa),
            Kind::Custom(f) => self.scale * f(kappa),
        }
    }

    fn check_domain(&self, kappa: &[f64]) -> Result<()> {
        if kappa.len() != self.n {
            return Err(Error::Precondition(format!(
                "speed `{}` expects {} curvatures, got {}",
                self.name,
                self.n,
                kappa.len()
            )));
        }
        if !self.boundary_continuous && kappa.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::OutsideCone(kappa.to_vec()));
        }
        Ok(())
    }

    pub fn evaluate(&self, kappa: &[f64]) -> Result<f64> {
        self.check_domain(kappa)?;
        let value = self.raw(kappa);
        if !value.is_finite() {
            return Err(Error::NonFinite(kappa.to_vec()));
        }
        Ok(value)
    }

    /// `F(x, ..., x)`.
    pub fn on_diagonal(&self, x: f64) -> Result<f64> {
        self.evaluate(&vec![x; self.n])
    }

    pub fn gradient(&self, kappa: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(kappa)?;
        let grad = match &self.kind {
            Kind::Builtin(f) => f
                .raw_gradient(kappa)
                .into_iter()
                .map(|g| self.scale * g)
                .collect::<Vec<_>>(),
            Kind::Custom(_) => self.fd_gradient(kappa),
        };
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(kappa.to_vec()));
        }
        Ok(grad)
    }

    fn fd_gradient(&self, kappa: &[f64]) -> Vec<f64> {
        let mut probe = kappa.to_vec();
        (0..self.n)
            .map(|i| {
                let k = kappa[i];
                if !self.boundary_continuous && k <= FD_STEP {
                    probe[i] = k + FD_STEP;
                    let up = self.raw(&probe);
                    probe[i] = k;
                    (up - self.raw(&probe)) / FD_STEP
                } else {
                    probe[i] = k + FD_STEP;
                    let up = self.raw(&probe);
                    probe[i] = k - FD_STEP;
                    let down = self.raw(&probe);
                    probe[i] = k;
                    (up - down) / (2.0 * FD_STEP)
                }
            })
            .collect()
    }
}

/// Speed specification as it appears in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedSpec {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub n: usize,
}

impl SpeedSpec {
    pub fn build(&self) -> Result<SpeedFunction> {
        SpeedFunction::builtin(&self.family, &self.params, self.n)
    }
}

/// Numerical evidence that a speed satisfies the structural assumptions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedCertificate {
    pub samples: usize,
    pub homogeneity_estimate: f64,
    /// Largest deviation of a single log-ratio estimate from the mean.
    pub homogeneity_spread: f64,
    pub is_symmetric: bool,
    pub is_monotone: bool,
    pub shape_verdict: ShapeVerdict,
    /// Infimum of `n F / H` over the samples.
    pub comparison_bound: f64,
}

fn sample_cone(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.gen_range(-10f64.ln()..10f64.ln()).exp())
        .collect()
}

fn finite_at(f: &SpeedFunction, kappa: &[f64]) -> Result<f64> {
    let v = f.evaluate(kappa)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(kappa.to_vec()))
    }
}

/// Samples the speed on the positive cone and reports homogeneity, symmetry,
/// monotonicity and convexity evidence. Deterministic in `seed`.
pub fn certify(f: &SpeedFunction, samples: usize, seed: u64) -> Result<SpeedCertificate> {
    if samples < 100 {
        return Err(Error::Precondition(format!(
            "certification needs at least 100 samples, got {samples}"
        )));
    }
    let n = f.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut ratios = Vec::with_capacity(samples);
    let mut is_symmetric = true;
    let mut is_monotone = true;
    let mut comparison_bound = f64::INFINITY;

    for _ in 0..samples {
        let kappa = sample_cone(&mut rng, n);
        let value = finite_at(f, &kappa)?;

        let mut lambda: f64 = 1.0;
        while lambda.ln().abs() < 0.1 {
            lambda = rng.gen_range(-10f64.ln()..10f64.ln()).exp();
        }
        let scaled: Vec<f64> = kappa.iter().map(|k| lambda * k).collect();
        let scaled_value = finite_at(f, &scaled)?;
        ratios.push((scaled_value.ln() - value.ln()) / lambda.ln());

        let mut permuted = kappa.clone();
        permuted.shuffle(&mut rng);
        let permuted_value = finite_at(f, &permuted)?;
        if (permuted_value - value).abs() > 1e-12 * value.abs() {
            is_symmetric = false;
        }

        if f.gradient(&kappa)?.iter().any(|&g| g < -1e-10) {
            is_monotone = false;
        }

        let h: f64 = kappa.iter().sum();
        comparison_bound = comparison_bound.min(n as f64 * value / h);
    }

    let homogeneity_estimate = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let homogeneity_spread = ratios
        .iter()
        .map(|r| (r - homogeneity_estimate).abs())
        .fold(0.0, f64::max);

    let mut convex_ok = true;
    let mut concave_ok = true;
    for _ in 0..samples {
        let a = sample_cone(&mut rng, n);
        let b = sample_cone(&mut rng, n);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let fa = finite_at(f, &a)?;
        let fb = finite_at(f, &b)?;
        let gap = finite_at(f, &mid)? - 0.5 * (fa + fb);
        let tol = 1e-12 * (fa.abs() + fb.abs());
        if gap > tol {
            convex_ok = false;
        }
        if gap < -tol {
            concave_ok = false;
        }
    }
    let shape_verdict = match (convex_ok, concave_ok) {
        (true, true) => ShapeVerdict::Linear,
        (true, false) => ShapeVerdict::Convex,
        (false, true) => ShapeVerdict::Concave,
        (false, false) => ShapeVerdict::Indefinite,
    };

    Ok(SpeedCertificate {
        samples,
        homogeneity_estimate,
        homogeneity_spread,
        is_symmetric,
        is_monotone,
        shape_verdict,
        comparison_bound,
    })
}

/// Largest discrepancy between the attached gradient and central differences
/// with step [`FD_STEP`].
pub fn gradient_check(f: &SpeedFunction, point: &[f64]) -> Result<f64> {
    if point.len() != f.n() || point.iter().any(|&k| !(k > FD_STEP)) {
        return Err(Error::OutsideCone(point.to_vec()));
    }
    let grad = f.gradient(point)?;
    let mut probe = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..point.len() {
        probe[i] = point[i] + FD_STEP;
        let up = f.evaluate(&probe)?;
        probe[i] = point[i] - FD_STEP;
        let down = f.evaluate(&probe)?;
        probe[i] = point[i];
        worst = worst.max((grad[i] - (up - down) / (2.0 * FD_STEP)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn all_builtins(n: usize) -> Vec<SpeedFunction> {
        let mut out = vec![
            SpeedFunction::builtin("H", &[], n).unwrap(),
            SpeedFunction::builtin("H^p", &[0.5], n).unwrap(),
            SpeedFunction::builtin("H^p", &[2.0], n).unwrap(),
            SpeedFunction::builtin("norm_of_A", &[], n).unwrap(),
            SpeedFunction::builtin("power_mean", &[3.0], n).unwrap(),
            SpeedFunction::builtin("power_mean", &[0.0], n).unwrap(),
            SpeedFunction::builtin("power_mean", &[-1.0], n).unwrap(),
        ];
        for k in 1..=n {
            out.push(SpeedFunction::builtin("sigma_k_root", &[k as f64], n).unwrap());
        }
        out
    }

    #[test]
    fn scalar_path_matches_general_path() {
        for f in all_builtins(1) {
            for &k in &[0.3, 1.0, 7.5] {
                let (v, d) = f.evaluate_1d(k, true).unwrap();
                assert_relative_eq!(v, f.evaluate(&[k]).unwrap(), max_relative = 1e-14);
                assert_relative_eq!(d, f.gradient(&[k]).unwrap()[0], max_relative = 1e-14);
            }
        }
        let h = SpeedFunction::mean_curvature(2);
        assert!(h.evaluate_1d(1.0, false).is_err());
    }

    #[test]
    fn builtin_examples() {
        let h = SpeedFunction::builtin("H", &[], 2).unwrap();
        assert_eq!(h.evaluate(&[1.0, 1.0]).unwrap(), 2.0);

        let sqrt_h = SpeedFunction::builtin("H^p", &[0.5], 1).unwrap();
        assert_relative_eq!(sqrt_h.evaluate(&[4.0]).unwrap(), 2.0, epsilon = 1e-15);

        let norm = SpeedFunction::builtin("norm_of_A", &[], 2).unwrap();
        assert_relative_eq!(
            norm.evaluate(&[3.0, 4.0]).unwrap(),
            2f64.sqrt() * 5.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(norm.evaluate(&[3.0, 4.0]).unwrap(), 7.0710678, epsilon = 1e-7);
    }

    #[test]
    fn normalization_holds_for_every_builtin() {
        for n in 1..=4 {
            for f in all_builtins(n) {
                let v = f.on_diagonal(1.0).unwrap();
                assert_relative_eq!(v, n as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_families_and_parameters() {
        assert!(matches!(
            SpeedFunction::builtin("gauss", &[], 2),
            Err(Error::UnknownFamily(_))
        ));
        assert!(matches!(
            SpeedFunction::builtin("H^p", &[0.0], 2),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            SpeedFunction::builtin("H^p", &[-1.0], 2),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            SpeedFunction::builtin("sigma_k_root", &[3.0], 2),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(SpeedFunction::builtin("H", &[1.0], 2).is_err());
    }

    #[test]
    fn cone_boundary_policy() {
        let h = SpeedFunction::builtin("H", &[], 2).unwrap();
        assert_eq!(h.evaluate(&[0.0, 1.0]).unwrap(), 1.0);
        let cube = SpeedFunction::builtin("H^p", &[3.0], 1).unwrap();
        assert_relative_eq!(cube.evaluate(&[-2.0]).unwrap(), -8.0);
        let sqrt_h = SpeedFunction::builtin("H^p", &[0.5], 1).unwrap();
        assert!(matches!(sqrt_h.evaluate(&[0.0]), Err(Error::OutsideCone(_))));
        let norm = SpeedFunction::builtin("norm_of_A", &[], 2).unwrap();
        assert!(matches!(norm.evaluate(&[1.0, -0.1]), Err(Error::OutsideCone(_))));
    }

    #[test]
    fn custom_speeds_are_normalized() {
        let f = SpeedFunction::custom("twice_max", 3, |k| 2.0 * k.iter().cloned().fold(0.0, f64::max), false)
            .unwrap();
        assert_relative_eq!(f.on_diagonal(1.0).unwrap(), 3.0, epsilon = 1e-15);
        assert!(!f.is_boundary_continuous());
        assert!(SpeedFunction::custom("zero", 2, |_| 0.0, false).is_err());
    }

    #[test]
    fn gradient_check_examples() {
        let h = SpeedFunction::builtin("H", &[], 2).unwrap();
        assert_eq!(h.gradient(&[2.0, 3.0]).unwrap(), vec![1.0, 1.0]);
        assert!(gradient_check(&h, &[2.0, 3.0]).unwrap() < 1e-9);

        let sqrt_h = SpeedFunction::builtin("H^p", &[0.5], 1).unwrap();
        assert_relative_eq!(sqrt_h.gradient(&[4.0]).unwrap()[0], 0.25, epsilon = 1e-15);
        assert!(gradient_check(&sqrt_h, &[4.0]).unwrap() < 1e-7);

        let norm = SpeedFunction::builtin("norm_of_A", &[], 2).unwrap();
        let g = norm.gradient(&[3.0, 4.0]).unwrap();
        assert_relative_eq!(g[0], 2f64.sqrt() * 0.6, epsilon = 1e-12);
        assert_relative_eq!(g[1], 2f64.sqrt() * 0.8, epsilon = 1e-12);
        assert!(gradient_check(&norm, &[3.0, 4.0]).unwrap() < 1e-7);

        assert!(matches!(
            gradient_check(&h, &[1e-7, 1.0]),
            Err(Error::OutsideCone(_))
        ));
    }

    #[test]
    fn analytic_gradients_match_differences_for_all_builtins() {
        for n in 1..=4 {
            for f in all_builtins(n) {
                let point: Vec<f64> = (0..n).map(|i| 0.7 + 0.45 * i as f64).collect();
                let err = gradient_check(&f, &point).unwrap();
                assert!(err < 1e-7, "{} n={n}: {err}", f.name());
            }
        }
    }

    #[test]
    fn certificates() {
        let h = SpeedFunction::builtin("H", &[], 3).unwrap();
        let c = certify(&h, 500, 7).unwrap();
        assert!((c.homogeneity_estimate - 1.0).abs() < 1e-10);
        assert_eq!(c.shape_verdict, ShapeVerdict::Linear);
        assert!(c.is_monotone && c.is_symmetric);

        let sqrt_h = SpeedFunction::builtin("H^p", &[0.5], 2).unwrap();
        let c = certify(&sqrt_h, 500, 7).unwrap();
        assert!((c.homogeneity_estimate - 0.5).abs() < 1e-8);
        assert_eq!(c.shape_verdict, ShapeVerdict::Concave);

        let norm = SpeedFunction::builtin("norm_of_A", &[], 2).unwrap();
        let c = certify(&norm, 1000, 7).unwrap();
        assert!((c.homogeneity_estimate - 1.0).abs() < 1e-10);
        assert_eq!(c.shape_verdict, ShapeVerdict::Convex);
        assert!(c.comparison_bound >= norm.on_diagonal(1.0).unwrap() * (1.0 - 1e-10));

        assert!(matches!(certify(&h, 10, 0), Err(Error::Precondition(_))));
        assert_eq!(certify(&h, 200, 3).unwrap(), certify(&h, 200, 3).unwrap());
    }

    #[test]
    fn certify_reports_non_finite_input() {
        let f = SpeedFunction::custom("blows_up", 1, |k| if k[0] > 5.0 { f64::NAN } else { k[0] }, false)
            .unwrap();
        assert!(matches!(certify(&f, 200, 1), Err(Error::NonFinite(_))));
    }

    #[test]
    fn convex_builtins_dominate_mean_curvature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            for f in all_builtins(n) {
                let cert = certify(&f, 300, 5).unwrap();
                if cert.shape_verdict == ShapeVerdict::Convex
                    && (cert.homogeneity_estimate - 1.0).abs() < 1e-9
                {
                    for _ in 0..200 {
                        let k = sample_cone(&mut rng, n);
                        let h: f64 = k.iter().sum();
                        let ratio = n as f64 * f.evaluate(&k).unwrap() / h;
                        assert!(ratio >= n as f64 * (1.0 - 1e-10));
                    }
                }
            }
        }
    }

    fn cone_vector() -> impl Strategy<Value = Vec<f64>> {
        (1usize..=4).prop_flat_map(|n| proptest::collection::vec(0.05f64..20.0, n))
    }

    proptest! {
        #[test]
        fn builtins_are_symmetric(kappa in cone_vector(), rot in 0usize..4) {
            let n = kappa.len();
            for f in all_builtins(n) {
                let mut permuted = kappa.clone();
                permuted.rotate_left(rot % n);
                permuted.reverse();
                let a = f.evaluate(&kappa).unwrap();
                let b = f.evaluate(&permuted).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs());
            }
        }

        #[test]
        fn builtins_are_monotone(kappa in cone_vector()) {
            for f in all_builtins(kappa.len()) {
                prop_assert!(f.gradient(&kappa).unwrap().iter().all(|&g| g >= -1e-10));
            }
        }

        #[test]
        fn builtins_are_homogeneous(kappa in cone_vector(), lambda in 0.1f64..10.0) {
            for f in all_builtins(kappa.len()) {
                let p = f.declared_homogeneity().unwrap();
                let scaled: Vec<f64> = kappa.iter().map(|k| lambda * k).collect();
                let lhs = f.evaluate(&scaled).unwrap();
                let rhs = lambda.powf(p) * f.evaluate(&kappa).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
            }
        }

        #[test]
        fn speeds_vanish_along_shrinking_rays(kappa in cone_vector()) {
            for f in all_builtins(kappa.len()) {
                let tiny: Vec<f64> = kappa.iter().map(|k| k * 1e-12).collect();
                let v = f.evaluate(&tiny).unwrap();
                prop_assert!(v > 0.0 && v < 1e-4);
            }
        }
    }
}
