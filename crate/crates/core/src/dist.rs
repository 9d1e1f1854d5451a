//! Patience-level and service-requirement distribution models.
//!
//! A patience model exposes the joining probability `H~(x) = P(Y >= x)`
//! (the chance that a customer facing virtual waiting time `x` joins),
//! its exact partial integral `int_0^a H~(v - u) du`, and sampling. The
//! joining probability is 1 for `x <= 0` for every family: a customer who
//! finds a free server always joins.

use crate::numeric::{adaptive_quad, geomspace};
use rand::Rng;
use rand_distr::Distribution;
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::ContinuousCDF;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: alpha has length {alpha}, beta has length {beta}")]
    DimensionMismatch { alpha: usize, beta: usize },
    #[error("{0} does not admit latent patience sampling; use decide_join")]
    NoLatentSample(String),
}

/// Grid slack allowed when checking that a GHE survival stays nonnegative.
pub const GHE_GRID_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum PatienceModel {
    /// Every customer has the same threshold; `theta` may be infinite
    /// (nobody ever balks). A customer seeing exactly `theta` joins.
    Deterministic { theta: f64 },
    /// Exponential patience with the given rate.
    Exponential { rate: f64 },
    /// Generalized hyperexponential survival `sum_k alpha_k exp(-beta_k x)`
    /// with weights summing to one (possibly negative) and positive rates,
    /// ordered by decreasing weight. Plain hyperexponential is the
    /// all-positive special case.
    Ghe { alpha: Vec<f64>, beta: Vec<f64> },
    /// Fraction `theta` of customers balk above the threshold `w`; the
    /// rest are infinitely patient.
    ScaledStep { theta: f64, w: f64 },
    /// Threshold `theta`, but customers act on the delay plus independent
    /// N(0, sigma^2) noise.
    NoisyAdditive { theta: f64, sigma: f64 },
    /// Threshold `theta`, but customers act on the delay times an
    /// independent unit-mean lognormal factor with log-space sd `sigma`.
    NoisyMultiplicative { theta: f64, sigma: f64 },
    /// Lognormal patience; simulation-only truth model.
    Lognormal { mu: f64, sigma: f64 },
    /// Gamma patience (shape, rate); simulation-only truth model.
    Gamma { shape: f64, rate: f64 },
}

impl PatienceModel {
    pub fn deterministic(theta: f64) -> Result<Self, DistError> {
        if theta.is_nan() || theta < 0.0 {
            return Err(DistError::InvalidParameter(format!(
                "deterministic patience needs theta >= 0, got {theta}"
            )));
        }
        Ok(Self::Deterministic { theta })
    }

    pub fn exponential(rate: f64) -> Result<Self, DistError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(DistError::InvalidParameter(format!(
                "exponential patience needs rate > 0, got {rate}"
            )));
        }
        Ok(Self::Exponential { rate })
    }

    /// Validates the simplex constraint, rate positivity, decreasing weight
    /// order, and that the survival is a proper (nonnegative,
    /// non-increasing) function on a validation grid.
    pub fn ghe(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self, DistError> {
        if alpha.len() != beta.len() || alpha.is_empty() {
            return Err(DistError::DimensionMismatch {
                alpha: alpha.len(),
                beta: beta.len(),
            });
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DistError::InvalidParameter(format!(
                "GHE weights must sum to 1 within 1e-12, got {total}"
            )));
        }
        if beta.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(DistError::InvalidParameter(
                "GHE rates must be positive and finite".into(),
            ));
        }
        for w in alpha.windows(2) {
            if w[0] < w[1] {
                return Err(DistError::InvalidParameter(
                    "GHE weights must be ordered decreasingly".into(),
                ));
            }
        }
        if !ghe_feasible(&alpha, &beta)? {
            return Err(DistError::InvalidParameter(
                "GHE parameters do not yield a proper survival function".into(),
            ));
        }
        // Non-increasing survival on the validation grid.
        let grid = ghe_grid(&beta);
        let mut prev = 1.0 + GHE_GRID_SLACK;
        for &x in &grid {
            let s = ghe_survival(&alpha, &beta, x);
            if s > prev + GHE_GRID_SLACK {
                return Err(DistError::InvalidParameter(
                    "GHE survival is not non-increasing".into(),
                ));
            }
            prev = s;
        }
        Ok(Self::Ghe { alpha, beta })
    }

    pub fn scaled_step(theta: f64, w: f64) -> Result<Self, DistError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(DistError::InvalidParameter(format!(
                "scaled-step proportion must lie in (0,1), got {theta}"
            )));
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(DistError::InvalidParameter(format!(
                "scaled-step threshold must be positive, got {w}"
            )));
        }
        Ok(Self::ScaledStep { theta, w })
    }

    pub fn noisy_additive(theta: f64, sigma: f64) -> Result<Self, DistError> {
        if !theta.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(DistError::InvalidParameter(format!(
                "noisy-additive needs finite theta and sigma > 0, got ({theta}, {sigma})"
            )));
        }
        Ok(Self::NoisyAdditive { theta, sigma })
    }

    pub fn noisy_multiplicative(theta: f64, sigma: f64) -> Result<Self, DistError> {
        if !(theta > 0.0) || !theta.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(DistError::InvalidParameter(format!(
                "noisy-multiplicative needs theta > 0 and sigma > 0, got ({theta}, {sigma})"
            )));
        }
        Ok(Self::NoisyMultiplicative { theta, sigma })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self, DistError> {
        if !mu.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(DistError::InvalidParameter(format!(
                "lognormal needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(Self::Lognormal { mu, sigma })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self, DistError> {
        if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
            return Err(DistError::InvalidParameter(format!(
                "gamma needs shape > 0 and rate > 0, got ({shape}, {rate})"
            )));
        }
        Ok(Self::Gamma { shape, rate })
    }

    /// Joining probability `H~(x) = P(Y >= x)`; exactly 1 for `x <= 0`.
    pub fn joining_prob(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            Self::Deterministic { theta } => {
                if x <= *theta {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Exponential { rate } => (-rate * x).exp(),
            Self::Ghe { alpha, beta } => ghe_survival(alpha, beta, x).clamp(0.0, 1.0),
            Self::ScaledStep { theta, w } => {
                if x <= *w {
                    1.0
                } else {
                    1.0 - theta
                }
            }
            Self::NoisyAdditive { theta, sigma } => std_normal_cdf((theta - x) / sigma),
            Self::NoisyMultiplicative { theta, sigma } => {
                // P(G <= theta/x) with G lognormal(-sigma^2/2, sigma).
                std_normal_cdf(((theta / x).ln() + 0.5 * sigma * sigma) / sigma)
            }
            Self::Lognormal { mu, sigma } => 1.0 - std_normal_cdf((x.ln() - mu) / sigma),
            Self::Gamma { shape, rate } => {
                let g = statrs::distribution::Gamma::new(*shape, *rate).unwrap();
                (1.0 - g.cdf(x)).clamp(0.0, 1.0)
            }
        }
    }

    /// Strict survival `P(Y > x)`; differs from `joining_prob` only at the
    /// atoms of the discrete families. Used for tail-curve comparisons.
    pub fn survival(&self, x: f64) -> f64 {
        match self {
            Self::Deterministic { theta } => {
                if x < *theta {
                    1.0
                } else {
                    0.0
                }
            }
            Self::ScaledStep { theta, w } => {
                if x < *w {
                    1.0
                } else {
                    1.0 - theta
                }
            }
            _ => {
                if x < 0.0 {
                    1.0
                } else if x == 0.0 {
                    1.0
                } else {
                    self.joining_prob(x)
                }
            }
        }
    }

    /// Exact `int_0^a H~(v - u) du`; adaptive quadrature for the families
    /// without a closed form (noisy, lognormal, gamma).
    pub fn partial_integral(&self, v: f64, a: f64) -> f64 {
        debug_assert!(a >= 0.0);
        if a <= 0.0 {
            return 0.0;
        }
        if v <= 0.0 {
            return a;
        }
        // Portion of [0, a] where the argument v - u is nonpositive.
        let tail = (a - v).max(0.0);
        let m = a.min(v);
        match self {
            Self::Deterministic { theta } => {
                if theta.is_infinite() {
                    a
                } else {
                    a - a.min((v - theta).max(0.0))
                }
            }
            Self::Exponential { rate } => (-rate * v).exp() * (rate * m).exp_m1() / rate + tail,
            Self::Ghe { alpha, beta } => {
                let mut s = tail;
                for (&ak, &bk) in alpha.iter().zip(beta) {
                    s += ak * (-bk * v).exp() * (bk * m).exp_m1() / bk;
                }
                s
            }
            Self::ScaledStep { theta, w } => a - theta * a.min((v - w).max(0.0)),
            _ => {
                // int_0^m H~(v-u) du = int_{v-m}^{v} H~(y) dy.
                let splits = match self {
                    Self::NoisyAdditive { theta, .. } | Self::NoisyMultiplicative { theta, .. } => {
                        vec![*theta]
                    }
                    _ => vec![],
                };
                adaptive_quad(|y| self.joining_prob(y), v - m, v, 1e-10, &splits) + tail
            }
        }
    }

    /// P(Y = infinity): the customer mass that never balks.
    pub fn infinite_mass(&self) -> f64 {
        match self {
            Self::Deterministic { theta } if theta.is_infinite() => 1.0,
            Self::ScaledStep { theta, .. } => 1.0 - theta,
            _ => 0.0,
        }
    }

    /// Draw a latent patience level. The noisy families have no latent
    /// threshold independent of the observed delay; use [`Self::decide_join`].
    pub fn sample_patience<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, DistError> {
        match self {
            Self::Deterministic { theta } => Ok(*theta),
            Self::Exponential { rate } => {
                Ok(rand_distr::Exp::new(*rate).unwrap().sample(rng))
            }
            Self::Ghe { alpha, beta } => Ok(sample_ghe(alpha, beta, rng)),
            Self::ScaledStep { theta, w } => {
                if rng.random::<f64>() < *theta {
                    Ok(*w)
                } else {
                    Ok(f64::INFINITY)
                }
            }
            Self::Lognormal { mu, sigma } => {
                Ok(rand_distr::LogNormal::new(*mu, *sigma).unwrap().sample(rng))
            }
            Self::Gamma { shape, rate } => Ok(rand_distr::Gamma::new(*shape, 1.0 / rate)
                .unwrap()
                .sample(rng)),
            Self::NoisyAdditive { .. } => Err(DistError::NoLatentSample("noisy_additive".into())),
            Self::NoisyMultiplicative { .. } => {
                Err(DistError::NoLatentSample("noisy_multiplicative".into()))
            }
        }
    }

    /// Join/no-join decision for a customer facing virtual waiting time `v`.
    /// Threshold comparison `Y >= v` where a latent level exists, Bernoulli
    /// with the joining probability for the noisy families.
    pub fn decide_join<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> bool {
        if v <= 0.0 {
            // Consumes no randomness: joining is certain at an idle server.
            return true;
        }
        match self {
            Self::NoisyAdditive { .. } | Self::NoisyMultiplicative { .. } => {
                rng.random::<f64>() < self.joining_prob(v)
            }
            _ => self.sample_patience(rng).expect("latent families only") >= v,
        }
    }
}

fn ghe_survival(alpha: &[f64], beta: &[f64], x: f64) -> f64 {
    alpha
        .iter()
        .zip(beta)
        .map(|(&a, &b)| a * (-b * x).exp())
        .sum()
}

fn ghe_grid(beta: &[f64]) -> Vec<f64> {
    let bmin = beta.iter().cloned().fold(f64::INFINITY, f64::min);
    let bmax = beta.iter().cloned().fold(0.0f64, f64::max);
    let mut grid = vec![0.0];
    grid.extend(geomspace(1e-4 / bmax, 20.0 / bmin, 240));
    grid
}

/// Sufficient feasibility test for a GHE candidate: after ordering by
/// decreasing weight, the largest weight is positive, the weighted rate sum
/// (the density at zero) is positive, and the survival is nonnegative on a
/// geometric validation grid. Invariant under simultaneous permutations.
pub fn ghe_feasible(alpha: &[f64], beta: &[f64]) -> Result<bool, DistError> {
    if alpha.len() != beta.len() || alpha.is_empty() {
        return Err(DistError::DimensionMismatch {
            alpha: alpha.len(),
            beta: beta.len(),
        });
    }
    let total: f64 = alpha.iter().sum();
    if (total - 1.0).abs() > 1e-9 || beta.iter().any(|&b| !(b > 0.0)) {
        return Ok(false);
    }
    let mut pairs: Vec<(f64, f64)> = alpha.iter().cloned().zip(beta.iter().cloned()).collect();
    pairs.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap());
    if !(pairs[0].0 > 0.0) {
        return Ok(false);
    }
    let density_at_zero: f64 = pairs.iter().map(|(a, b)| a * b).sum();
    if !(density_at_zero > 0.0) {
        return Ok(false);
    }
    let grid = ghe_grid(beta);
    for &x in &grid {
        if ghe_survival(alpha, beta, x) < -GHE_GRID_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

/// GHE sampling: mixture draw when all weights are nonnegative, otherwise
/// numeric inversion of the cdf by bisection.
fn sample_ghe<R: Rng + ?Sized>(alpha: &[f64], beta: &[f64], rng: &mut R) -> f64 {
    if alpha.iter().all(|&a| a >= 0.0) {
        let mut u = rng.random::<f64>();
        for (i, &a) in alpha.iter().enumerate() {
            if u < a || i + 1 == alpha.len() {
                return rand_distr::Exp::new(beta[i]).unwrap().sample(rng);
            }
            u -= a;
        }
        unreachable!()
    }
    let u: f64 = rng.random();
    let target = 1.0 - u; // solve survival(x) = target
    let mut hi = 1.0 / beta.iter().cloned().fold(f64::INFINITY, f64::min);
    while ghe_survival(alpha, beta, hi) > target && hi < 1e12 {
        hi *= 2.0;
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ghe_survival(alpha, beta, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + hi) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn std_normal_cdf(z: f64) -> f64 {
    statrs::distribution::Normal::new(0.0, 1.0).unwrap().cdf(z)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ServiceModel {
    /// Gamma(shape, rate); mean shape/rate.
    Gamma { shape: f64, rate: f64 },
    Exponential { rate: f64 },
    Deterministic { b: f64 },
}

impl ServiceModel {
    pub fn gamma(shape: f64, rate: f64) -> Result<Self, DistError> {
        if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
            return Err(DistError::InvalidParameter(format!(
                "gamma service needs shape > 0 and rate > 0, got ({shape}, {rate})"
            )));
        }
        Ok(Self::Gamma { shape, rate })
    }

    pub fn exponential(rate: f64) -> Result<Self, DistError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(DistError::InvalidParameter(format!(
                "exponential service needs rate > 0, got {rate}"
            )));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn deterministic(b: f64) -> Result<Self, DistError> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(DistError::InvalidParameter(format!(
                "deterministic service needs b > 0, got {b}"
            )));
        }
        Ok(Self::Deterministic { b })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Gamma { shape, rate } => shape / rate,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Deterministic { b } => *b,
        }
    }

    /// Complementary cdf of the service requirement.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            Self::Gamma { shape, rate } => {
                let g = statrs::distribution::Gamma::new(*shape, *rate).unwrap();
                (1.0 - g.cdf(x)).clamp(0.0, 1.0)
            }
            Self::Exponential { rate } => (-rate * x).exp(),
            Self::Deterministic { b } => {
                if x < *b {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Equilibrium (residual-lifetime) density survival(x)/mean.
    pub fn equilibrium_density(&self, x: f64) -> f64 {
        self.survival(x) / self.mean()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gamma { shape, rate } => rand_distr::Gamma::new(*shape, 1.0 / rate)
                .unwrap()
                .sample(rng),
            Self::Exponential { rate } => rand_distr::Exp::new(*rate).unwrap().sample(rng),
            Self::Deterministic { b } => *b,
        }
    }
}

// ---------------------------------------------------------------------------
// JSON wire format: {"family": <name>, "params": [...]}, with infinities
// encoded as the string "inf".

#[derive(Serialize, Deserialize)]
struct ModelJson {
    family: String,
    params: Vec<serde_json::Value>,
}

fn param_to_json(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::String("inf".into())
    }
}

fn param_from_json(v: &serde_json::Value) -> Result<f64, String> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| "bad number".into()),
        serde_json::Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        other => Err(format!("expected number or \"inf\", got {other}")),
    }
}

impl Serialize for PatienceModel {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let (family, params): (&str, Vec<f64>) = match self {
            Self::Deterministic { theta } => ("deterministic", vec![*theta]),
            Self::Exponential { rate } => ("exponential", vec![*rate]),
            Self::Ghe { alpha, beta } => (
                "ghe",
                alpha.iter().chain(beta.iter()).cloned().collect(),
            ),
            Self::ScaledStep { theta, w } => ("scaled_step", vec![*theta, *w]),
            Self::NoisyAdditive { theta, sigma } => ("noisy_additive", vec![*theta, *sigma]),
            Self::NoisyMultiplicative { theta, sigma } => {
                ("noisy_multiplicative", vec![*theta, *sigma])
            }
            Self::Lognormal { mu, sigma } => ("lognormal", vec![*mu, *sigma]),
            Self::Gamma { shape, rate } => ("gamma", vec![*shape, *rate]),
        };
        ModelJson {
            family: family.into(),
            params: params.into_iter().map(param_to_json).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PatienceModel {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = ModelJson::deserialize(de)?;
        let ps: Result<Vec<f64>, String> = raw.params.iter().map(param_from_json).collect();
        let ps = ps.map_err(D::Error::custom)?;
        let need = |n: usize| -> Result<(), D::Error> {
            if ps.len() == n {
                Ok(())
            } else {
                Err(D::Error::custom(format!(
                    "{} expects {n} params, got {}",
                    raw.family,
                    ps.len()
                )))
            }
        };
        let model = match raw.family.as_str() {
            "deterministic" => {
                need(1)?;
                PatienceModel::deterministic(ps[0])
            }
            "exponential" => {
                need(1)?;
                PatienceModel::exponential(ps[0])
            }
            "ghe" => {
                if ps.len() % 2 != 0 || ps.is_empty() {
                    return Err(D::Error::custom("ghe expects an even parameter count"));
                }
                let p = ps.len() / 2;
                PatienceModel::ghe(ps[..p].to_vec(), ps[p..].to_vec())
            }
            "scaled_step" => {
                need(2)?;
                PatienceModel::scaled_step(ps[0], ps[1])
            }
            "noisy_additive" => {
                need(2)?;
                PatienceModel::noisy_additive(ps[0], ps[1])
            }
            "noisy_multiplicative" => {
                need(2)?;
                PatienceModel::noisy_multiplicative(ps[0], ps[1])
            }
            "lognormal" => {
                need(2)?;
                PatienceModel::lognormal(ps[0], ps[1])
            }
            "gamma" => {
                need(2)?;
                PatienceModel::gamma(ps[0], ps[1])
            }
            other => return Err(D::Error::custom(format!("unknown patience family {other}"))),
        };
        model.map_err(D::Error::custom)
    }
}

impl Serialize for ServiceModel {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let (family, params): (&str, Vec<f64>) = match self {
            Self::Gamma { shape, rate } => ("gamma", vec![*shape, *rate]),
            Self::Exponential { rate } => ("exponential", vec![*rate]),
            Self::Deterministic { b } => ("deterministic", vec![*b]),
        };
        ModelJson {
            family: family.into(),
            params: params.into_iter().map(param_to_json).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ServiceModel {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = ModelJson::deserialize(de)?;
        let ps: Result<Vec<f64>, String> = raw.params.iter().map(param_from_json).collect();
        let ps = ps.map_err(D::Error::custom)?;
        let model = match (raw.family.as_str(), ps.len()) {
            ("gamma", 2) => ServiceModel::gamma(ps[0], ps[1]),
            ("exponential", 1) => ServiceModel::exponential(ps[0]),
            ("deterministic", 1) => ServiceModel::deterministic(ps[0]),
            (other, n) => {
                return Err(D::Error::custom(format!(
                    "unknown service family {other} with {n} params"
                )))
            }
        };
        model.map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn all_families() -> Vec<PatienceModel> {
        vec![
            PatienceModel::deterministic(3.0).unwrap(),
            PatienceModel::exponential(0.5).unwrap(),
            PatienceModel::ghe(vec![0.7, 0.3], vec![0.25, 1.0]).unwrap(),
            PatienceModel::ghe(vec![1.5, -0.5], vec![1.0, 2.0]).unwrap(),
            PatienceModel::scaled_step(0.4, 1.0).unwrap(),
            PatienceModel::noisy_additive(2.0, 1.0).unwrap(),
            PatienceModel::noisy_multiplicative(2.0, 0.5).unwrap(),
            PatienceModel::lognormal(0.5, 1.0).unwrap(),
            PatienceModel::gamma(1.5, 0.5).unwrap(),
        ]
    }

    #[test]
    fn joining_prob_examples() {
        let exp = PatienceModel::exponential(0.5).unwrap();
        assert_eq!(exp.joining_prob(0.0), 1.0);

        let det = PatienceModel::deterministic(3.0).unwrap();
        assert_eq!(det.joining_prob(3.0), 1.0);
        assert_eq!(det.joining_prob(3.0 + 1e-9), 0.0);

        let ghe = PatienceModel::ghe(vec![0.7, 0.3], vec![0.25, 1.0]).unwrap();
        let expect = 0.7 * (-0.5f64).exp() + 0.3 * (-2.0f64).exp();
        assert_relative_eq!(ghe.joining_prob(2.0), expect, epsilon = 1e-12);
        assert_relative_eq!(ghe.joining_prob(2.0), 0.465173, epsilon = 1e-6);

        let noisy = PatienceModel::noisy_additive(2.0, 1.0).unwrap();
        assert_relative_eq!(noisy.joining_prob(2.0), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn joining_prob_non_increasing_on_grid() {
        for model in all_families() {
            let mut prev = f64::INFINITY;
            for i in 0..1000 {
                let x = 25.0 * i as f64 / 999.0;
                let p = model.joining_prob(x);
                assert!(p >= -1e-12 && p <= 1.0 + 1e-12, "{model:?} at {x}: {p}");
                assert!(p <= prev + 1e-12, "{model:?} not monotone at {x}");
                prev = p;
            }
        }
    }

    #[test]
    fn partial_integral_examples() {
        for model in all_families() {
            assert_eq!(model.partial_integral(1.7, 0.0), 0.0);
            assert_relative_eq!(model.partial_integral(0.0, 2.0), 2.0);
        }
        let exp = PatienceModel::exponential(1.0).unwrap();
        let expect = (-1.0f64).exp() - (-2.0f64).exp();
        assert_relative_eq!(exp.partial_integral(2.0, 1.0), expect, epsilon = 1e-12);
        assert_relative_eq!(exp.partial_integral(2.0, 1.0), 0.232544, epsilon = 1e-6);

        let step = PatienceModel::scaled_step(0.4, 1.0).unwrap();
        assert_relative_eq!(step.partial_integral(3.0, 1.0), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn partial_integral_matches_quadrature() {
        // Closed forms against the quadrature oracle on a deterministic
        // sweep of (v, a) pairs per family.
        for model in all_families() {
            for iv in 0..12 {
                let v = 0.37 * iv as f64;
                for ia in 1..8 {
                    let a = 0.53 * ia as f64;
                    let closed = model.partial_integral(v, a);
                    let splits = [v, v - 1.0, v - 3.0];
                    let quad =
                        adaptive_quad(|u| model.joining_prob(v - u), 0.0, a, 1e-11, &splits);
                    assert_relative_eq!(closed, quad, epsilon = 1e-8, max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn partial_integral_derivative_matches_joining_prob() {
        // d/da int_0^a H~(v-u) du = H~(v-a) at interior points.
        let h = 1e-6;
        for model in all_families() {
            for &(v, a) in &[(2.0, 0.7), (1.5, 1.2), (4.0, 3.1)] {
                let d = (model.partial_integral(v, a + h) - model.partial_integral(v, a - h))
                    / (2.0 * h);
                let expect = model.joining_prob(v - a);
                assert_relative_eq!(d, expect, epsilon = 1e-5, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn ghe_feasibility_examples() {
        assert!(ghe_feasible(&[1.5, -0.5], &[1.0, 2.0]).unwrap());
        assert!(!ghe_feasible(&[2.0, -1.0], &[1.0, 3.0]).unwrap());
        assert!(ghe_feasible(&[1.0], &[0.7]).unwrap());
        assert!(ghe_feasible(&[], &[]).is_err());
        assert!(ghe_feasible(&[1.0], &[0.7, 0.2]).is_err());
    }

    #[test]
    fn ghe_feasibility_permutation_invariant() {
        let alpha = [-0.3, 0.5, 0.8];
        let beta = [2.0, 1.0, 0.4];
        let base = ghe_feasible(&alpha, &beta).unwrap();
        // All 6 permutations.
        let idx: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for perm in idx {
            let a: Vec<f64> = perm.iter().map(|&i| alpha[i]).collect();
            let b: Vec<f64> = perm.iter().map(|&i| beta[i]).collect();
            assert_eq!(ghe_feasible(&a, &b).unwrap(), base);
        }
    }

    #[test]
    fn sampler_moments() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let det = PatienceModel::deterministic(3.0).unwrap();
        assert_eq!(det.sample_patience(&mut rng).unwrap(), 3.0);

        let exp = PatienceModel::exponential(0.5).unwrap();
        let n = 1_000_000;
        let mean: f64 = (0..n)
            .map(|_| exp.sample_patience(&mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0).abs() < 0.01, "exp mean {mean}");

        let svc = ServiceModel::gamma(5.0, 1.5).unwrap();
        let mean: f64 = (0..n).map(|_| svc.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 5.0 / 1.5).abs() < 0.02, "gamma mean {mean}");
    }

    #[test]
    fn ghe_inversion_sampler_matches_cdf() {
        let model = PatienceModel::ghe(vec![1.5, -0.5], vec![1.0, 2.0]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 200_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| model.sample_patience(&mut rng).unwrap())
            .collect();
        let sorted = crate::numeric::sorted(draws);
        let d = crate::numeric::ks_statistic(&sorted, |x| 1.0 - model.joining_prob(x));
        assert!(d < 0.005, "KS distance {d}");
    }

    #[test]
    fn noisy_models_refuse_latent_sampling() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let m = PatienceModel::noisy_additive(2.0, 1.0).unwrap();
        assert!(m.sample_patience(&mut rng).is_err());
        assert!(m.decide_join(0.0, &mut rng));
    }

    #[test]
    fn model_json_round_trip() {
        for model in all_families() {
            let s = serde_json::to_string(&model).unwrap();
            let back: PatienceModel = serde_json::from_str(&s).unwrap();
            assert_eq!(model, back);
        }
        let inf = PatienceModel::deterministic(f64::INFINITY).unwrap();
        let s = serde_json::to_string(&inf).unwrap();
        assert!(s.contains("inf"));
        let back: PatienceModel = serde_json::from_str(&s).unwrap();
        assert_eq!(inf, back);

        let svc = ServiceModel::gamma(5.0, 1.5).unwrap();
        let s = serde_json::to_string(&svc).unwrap();
        let back: ServiceModel = serde_json::from_str(&s).unwrap();
        assert_eq!(svc, back);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(PatienceModel::exponential(0.0).is_err());
        assert!(PatienceModel::exponential(-1.0).is_err());
        assert!(PatienceModel::deterministic(-0.1).is_err());
        assert!(PatienceModel::ghe(vec![0.5, 0.4], vec![1.0, 2.0]).is_err()); // sum != 1
        assert!(PatienceModel::ghe(vec![2.0, -1.0], vec![1.0, 3.0]).is_err()); // infeasible
        assert!(PatienceModel::scaled_step(1.5, 1.0).is_err());
        assert!(ServiceModel::gamma(1.0, 0.0).is_err());
    }
}
