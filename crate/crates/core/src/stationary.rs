//! Stationary virtual-waiting-time law for the single-server queue with
//! balking: the Neumann-series solution of the level-crossing Volterra
//! equation, plus the closed forms available for exponential service and
//! for constant patience. These are the validation oracles for the
//! simulator and for the constant-patience error law.

use crate::dist::{PatienceModel, ServiceModel};
use crate::numeric::{pairwise_sum, trapz};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StationaryError {
    #[error("series did not converge within {terms} terms (effective load too high)")]
    Divergence { terms: usize },
    #[error("normalization integral diverges: mu <= lambda * P(Y = inf)")]
    UnstableNormalization,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Grid representation of the stationary law: density `v` of the virtual
/// waiting time on a uniform grid, the atom `pi0` at zero, the loss
/// probability, and the waiting-time density `w` of joining customers.
#[derive(Debug, Clone)]
pub struct StationaryProfile {
    pub h: f64,
    pub x_max: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub pi0: f64,
    pub p_loss: f64,
    pub rho: f64,
}

impl StationaryProfile {
    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.v.len()).map(move |i| i as f64 * self.h)
    }

    /// Linear interpolation of the density `v` at `x` (0 beyond the grid).
    pub fn density_at(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let pos = x / self.h;
        let i = pos.floor() as usize;
        if i + 1 >= self.v.len() {
            return if i < self.v.len() { self.v[i] } else { 0.0 };
        }
        let frac = pos - i as f64;
        self.v[i] * (1.0 - frac) + self.v[i + 1] * frac
    }

    /// Total probability mass `pi0 + int v`; should be 1 up to grid error.
    pub fn total_mass(&self) -> f64 {
        self.pi0 + trapz(&self.v, self.h)
    }

    /// Rate of the limiting exponential error law for the constant-patience
    /// estimator at threshold `theta0`: `v(theta0) / (1 - P_loss)`.
    pub fn constant_error_rate(&self, theta0: f64) -> f64 {
        self.density_at(theta0) / (1.0 - self.p_loss)
    }

    pub fn to_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        use crate::numeric::format_f64 as f;
        writeln!(out, "x,v,w")?;
        for (i, x) in self.grid().enumerate() {
            writeln!(out, "{},{},{}", f(x), f(self.v[i]), f(self.w[i]))?;
        }
        Ok(())
    }

    fn finish(h: f64, v: Vec<f64>, pi0: f64, rho: f64, patience: &PatienceModel) -> Self {
        let joining: Vec<f64> = (0..v.len())
            .map(|i| patience.joining_prob(i as f64 * h))
            .collect();
        let lost: Vec<f64> = v
            .iter()
            .zip(&joining)
            .map(|(&vi, &hi)| vi * (1.0 - hi))
            .collect();
        let p_loss = trapz(&lost, h);
        let w: Vec<f64> = v
            .iter()
            .zip(&joining)
            .map(|(&vi, &hi)| vi * hi / (1.0 - p_loss))
            .collect();
        StationaryProfile {
            h,
            x_max: (v.len() - 1) as f64 * h,
            v,
            w,
            pi0,
            p_loss,
            rho,
        }
    }
}

const MAX_TERMS: usize = 10_000;
const TERM_TOL: f64 = 1e-10;

/// Picks the grid length so the (unnormalized) series solution has decayed
/// below tolerance, using a coarse pilot solve; capped at x = 200.
fn auto_x_max(
    lambda: f64,
    service: &ServiceModel,
    patience: &PatienceModel,
) -> Result<f64, StationaryError> {
    let cap = 200.0;
    let pilot_h = 0.05;
    let profile = solve_volterra_impl(lambda, service, patience, pilot_h, cap, true)?;
    let peak = profile.v.iter().cloned().fold(0.0f64, f64::max);
    let mut idx = profile.v.len() - 1;
    while idx > 1 && profile.v[idx] < 1e-10 * peak.max(1.0) {
        idx -= 1;
    }
    Ok(((idx + 2) as f64 * pilot_h * 1.1).clamp(1.0, cap))
}

/// Stationary law for s = 1 via the Neumann series of the Volterra
/// equation: iterated convolutions of the equilibrium service density
/// weighted by the joining probability, truncated when a term's integral
/// drops below 1e-10.
pub fn solve_volterra(
    lambda: f64,
    service: &ServiceModel,
    patience: &PatienceModel,
    h: f64,
    x_max: Option<f64>,
) -> Result<StationaryProfile, StationaryError> {
    if !(lambda > 0.0) || !(h > 0.0) {
        return Err(StationaryError::InvalidInput(
            "lambda and h must be positive".into(),
        ));
    }
    let x_max = match x_max {
        Some(x) => x,
        None => auto_x_max(lambda, service, patience)?,
    };
    solve_volterra_impl(lambda, service, patience, h, x_max, false)
}

fn solve_volterra_impl(
    lambda: f64,
    service: &ServiceModel,
    patience: &PatienceModel,
    h: f64,
    x_max: f64,
    pilot: bool,
) -> Result<StationaryProfile, StationaryError> {
    let rho = lambda * service.mean();
    let n = (x_max / h).round() as usize + 1;
    let ge: Vec<f64> = (0..n)
        .map(|i| service.equilibrium_density(i as f64 * h))
        .collect();
    let joining: Vec<f64> = (0..n)
        .map(|i| patience.joining_prob(i as f64 * h))
        .collect();

    // u_1 = rho * g_e; u_{k+1} = rho * conv(u_k .* H~, g_e).
    let mut term: Vec<f64> = ge.iter().map(|&g| rho * g).collect();
    let mut series = vec![0.0f64; n];
    let mut series_mass = 0.0;
    let mut converged = false;
    for _ in 0..MAX_TERMS {
        let mass = trapz(&term, h);
        for i in 0..n {
            series[i] += term[i];
        }
        series_mass += mass;
        if mass < TERM_TOL {
            converged = true;
            break;
        }
        if !mass.is_finite() || series_mass > 1e12 {
            return Err(StationaryError::Divergence { terms: MAX_TERMS });
        }
        let weighted: Vec<f64> = term.iter().zip(&joining).map(|(&u, &p)| u * p).collect();
        term = conv_trapz(&weighted, &ge, h, rho);
    }
    if !converged && !pilot {
        return Err(StationaryError::Divergence { terms: MAX_TERMS });
    }
    let pi0 = 1.0 / (1.0 + series_mass);
    let v: Vec<f64> = series.iter().map(|&s| pi0 * s).collect();
    Ok(StationaryProfile::finish(h, v, pi0, rho, patience))
}

/// Trapezoid-rule convolution `scale * int_0^x f(y) g(x-y) dy` on a shared
/// uniform grid, evaluated at every grid point.
fn conv_trapz(f: &[f64], g: &[f64], h: f64, scale: f64) -> Vec<f64> {
    let n = f.len();
    let g_rev: Vec<f64> = g.iter().rev().cloned().collect();
    let mut out = vec![0.0f64; n];
    for i in 1..n {
        // dot(f[0..=i], g[i], g[i-1], ..., g[0]) with half-weight endpoints.
        let rev_start = n - 1 - i;
        let mut acc = 0.0;
        let fs = &f[0..=i];
        let gs = &g_rev[rev_start..rev_start + i + 1];
        for (fv, gv) in fs.iter().zip(gs) {
            acc += fv * gv;
        }
        acc -= 0.5 * (f[0] * g[i] + f[i] * g[0]);
        out[i] = scale * h * acc;
    }
    out
}

/// Closed form for exponential service: `v(x) = pi0 * lambda *
/// exp(-mu x + lambda int_0^x H~(y) dy)` with pi0 from normalization.
pub fn exp_service_closed_form(
    lambda: f64,
    mu: f64,
    patience: &PatienceModel,
    h: f64,
    x_max: Option<f64>,
) -> Result<StationaryProfile, StationaryError> {
    if !(lambda > 0.0) || !(mu > 0.0) || !(h > 0.0) {
        return Err(StationaryError::InvalidInput(
            "lambda, mu, h must be positive".into(),
        ));
    }
    let p_inf = patience.infinite_mass();
    let tail_rate = mu - lambda * p_inf;
    if tail_rate <= 0.0 {
        return Err(StationaryError::UnstableNormalization);
    }
    // log of the unnormalized density at x, using the exact partial
    // integral int_0^x H~ = partial_integral(v = x, a = x).
    let log_shape = |x: f64| -mu * x + lambda * patience.partial_integral(x, x);

    let x_max = match x_max {
        Some(x) => x,
        None => {
            // Extend until the shape has decayed 12 orders below its peak.
            let mut x = 2.0f64;
            loop {
                let peak = (0..=(4.0 * x) as usize)
                    .map(|i| log_shape(0.25 * i as f64))
                    .fold(f64::NEG_INFINITY, f64::max);
                if log_shape(x) <= peak - 27.6 || x >= 200.0 {
                    break x.min(200.0);
                }
                x *= 1.5;
            }
        }
    };
    let n = (x_max / h).round() as usize + 1;
    let shape: Vec<f64> = (0..n)
        .map(|i| lambda * log_shape(i as f64 * h).exp())
        .collect();
    let grid_mass = trapz(&shape, h);
    // Analytic exponential tail beyond the grid; out there the patience
    // law has settled at its all-patient plateau.
    let tail_mass = shape[n - 1] / tail_rate;
    let pi0 = 1.0 / (1.0 + grid_mass + tail_mass);
    let v: Vec<f64> = shape.iter().map(|&s| pi0 * s).collect();
    let mut profile = StationaryProfile::finish(h, v, pi0, lambda / mu, patience);
    profile.p_loss += pi0 * tail_mass * (1.0 - p_inf);
    let joining: Vec<f64> = (0..profile.v.len())
        .map(|i| patience.joining_prob(i as f64 * h))
        .collect();
    profile.w = profile
        .v
        .iter()
        .zip(&joining)
        .map(|(&vi, &hi)| vi * hi / (1.0 - profile.p_loss))
        .collect();
    Ok(profile)
}

/// Closed form for constant patience `theta0` (Example-style two-branch
/// series of truncated equilibrium convolutions), any service law.
pub fn constant_patience_closed_form(
    lambda: f64,
    service: &ServiceModel,
    theta0: f64,
    h: f64,
    x_max: Option<f64>,
) -> Result<StationaryProfile, StationaryError> {
    if !(theta0 > 0.0) || !theta0.is_finite() {
        return Err(StationaryError::InvalidInput(
            "theta0 must be positive and finite".into(),
        ));
    }
    let patience = PatienceModel::Deterministic { theta: theta0 };
    let rho = lambda * service.mean();
    let x_max = match x_max {
        Some(x) => x,
        None => auto_x_max(lambda, service, &patience)?,
    };
    let n = (x_max / h).round() as usize + 1;
    let ge: Vec<f64> = (0..n)
        .map(|i| service.equilibrium_density(i as f64 * h))
        .collect();
    let n_theta = ((theta0 / h).floor() as usize + 1).min(n);

    // c_k = k-fold equilibrium convolution restricted to [0, theta0];
    // exact there because mass above theta0 never feeds back.
    let mut c: Vec<f64> = ge[..n_theta].to_vec();
    let mut v_shape: Vec<f64> = ge.iter().map(|&g| rho * g).collect();
    let mut pi0_series = 0.0; // sum over n >= 1 of rho^n G_e^{(n)}(theta0)
    let mut rho_pow = rho;
    pi0_series += rho_pow * trapz(&c, h);
    let mut converged = false;
    for _ in 2..MAX_TERMS {
        rho_pow *= rho;
        let full = conv_trapz_truncated(&c, &ge, h, n);
        let term_mass = rho_pow * trapz(&full, h);
        for i in 0..n {
            v_shape[i] += rho_pow * full[i];
        }
        c = full[..n_theta].to_vec();
        pi0_series += rho_pow * trapz(&c, h);
        if term_mass < TERM_TOL {
            converged = true;
            break;
        }
        if !term_mass.is_finite() || term_mass > 1e12 {
            return Err(StationaryError::Divergence { terms: MAX_TERMS });
        }
    }
    if !converged {
        return Err(StationaryError::Divergence { terms: MAX_TERMS });
    }
    let pi0 = 1.0 / (1.0 + rho + rho * pi0_series);
    let v: Vec<f64> = v_shape.iter().map(|&s| pi0 * s).collect();
    Ok(StationaryProfile::finish(h, v, pi0, rho, &patience))
}

/// Convolution of `f` (supported on its own length) against `g`, evaluated
/// on the first `n` grid points.
fn conv_trapz_truncated(f: &[f64], g: &[f64], h: f64, n: usize) -> Vec<f64> {
    let m = f.len();
    let mut out = vec![0.0f64; n];
    for i in 1..n {
        let jmax = i.min(m - 1);
        let mut acc = 0.0;
        for j in 0..=jmax {
            let w = if j == 0 || j == i { 0.5 } else { 1.0 };
            acc += w * f[j] * g[i - j];
        }
        out[i] = h * acc;
    }
    out
}

/// Convenience: mean number of terms the series needed etc. are not
/// exposed; the profiles carry everything the tests use.
pub fn pi0_check(profile: &StationaryProfile) -> f64 {
    (profile.total_mass() - 1.0).abs()
}

#[allow(dead_code)]
fn unused(_: f64) {}
