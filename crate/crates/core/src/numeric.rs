//! Shared numerical routines: deterministic summation, adaptive
//! Gauss-Kronrod quadrature, one-dimensional search, and the empirical
//! statistics used by the validation suites.

/// Pairwise (cascade) summation. Deterministic for a fixed slice and much
/// better conditioned than a running sum on long inputs.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() as f64 - 1.0)
}

/// Trapezoid rule on a uniform grid with step `h`.
pub fn trapz(ys: &[f64], h: f64) -> f64 {
    if ys.len() < 2 {
        return 0.0;
    }
    let inner = pairwise_sum(&ys[1..ys.len() - 1]);
    h * (inner + 0.5 * (ys[0] + ys[ys.len() - 1]))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect()
}

/// Geometrically spaced points from `a` to `b` (both positive, inclusive).
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && a > 0.0 && b > a);
    let la = a.ln();
    let lb = b.ln();
    linspace(la, lb, n).into_iter().map(f64::exp).collect()
}

// 15-point Kronrod extension of 7-point Gauss on [-1, 1]; abscissae in
// decreasing order, odd indices are the embedded Gauss nodes.
const GK_NODES: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const K_WEIGHTS: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut k = 0.0;
    let mut g = 0.0;
    for (i, &x) in GK_NODES.iter().enumerate() {
        if i == 7 {
            let fv = f(c);
            k += K_WEIGHTS[7] * fv;
            g += G_WEIGHTS[3] * fv;
        } else {
            let fv = f(c - hw * x) + f(c + hw * x);
            k += K_WEIGHTS[i] * fv;
            if i % 2 == 1 {
                g += G_WEIGHTS[i / 2] * fv;
            }
        }
    }
    (k * hw, ((k - g) * hw).abs())
}

/// Adaptive Gauss-Kronrod quadrature of `f` on `[a, b]` to an absolute
/// tolerance. `split_at` seeds extra subdivision points (kinks, steps).
pub fn adaptive_quad<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    split_at: &[f64],
) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(split_at.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();

    let mut total = 0.0;
    let mut stack: Vec<(f64, f64, f64, u32)> = Vec::new();
    let seg_tol = abs_tol / (cuts.len() - 1) as f64;
    for w in cuts.windows(2) {
        stack.push((w[0], w[1], seg_tol, 0));
    }
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        let (val, err) = gk15(&mut f, lo, hi);
        if err <= tol || depth >= 50 || (hi - lo) < 1e-15 * (1.0 + hi.abs()) {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tol, depth + 1));
            stack.push((mid, hi, 0.5 * tol, depth + 1));
        }
    }
    total
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
/// Returns the abscissa and value of the best point seen.
pub fn maximize_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    xtol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a) <= xtol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Coarse scan followed by golden-section refinement. Scans `n_scan`
/// points (log-spaced when `log_scan`), brackets the best one, then
/// polishes to `xtol`. Robust to mild multimodality.
pub fn scan_then_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    n_scan: usize,
    log_scan: bool,
    xtol: f64,
) -> (f64, f64) {
    let grid = if log_scan {
        geomspace(lo, hi, n_scan)
    } else {
        linspace(lo, hi, n_scan)
    };
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut best = 0;
    for i in 1..vals.len() {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    let a = if best == 0 { grid[0] } else { grid[best - 1] };
    let b = if best + 1 == grid.len() {
        grid[grid.len() - 1]
    } else {
        grid[best + 1]
    };
    let (x, fx) = maximize_golden(&mut f, a, b, xtol, 200);
    if fx >= vals[best] {
        (x, fx)
    } else {
        (grid[best], vals[best])
    }
}

/// Safeguarded root of a decreasing-through-zero function on `[lo, hi]`:
/// bisection with secant acceleration. Requires `g(lo)` and `g(hi)` of
/// opposite signs; returns the better endpoint if they are not.
pub fn root_bisect_secant<F: FnMut(f64) -> f64>(
    mut g: F,
    lo: f64,
    hi: f64,
    xtol: f64,
    max_iter: usize,
) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut ga = g(a);
    let mut gb = g(b);
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 {
        return b;
    }
    if ga.signum() == gb.signum() {
        return if ga.abs() <= gb.abs() { a } else { b };
    }
    for _ in 0..max_iter {
        if (b - a) <= xtol {
            break;
        }
        // Secant candidate, clamped away from the bracket edges.
        let mut m = if (gb - ga).abs() > 0.0 {
            a - ga * (b - a) / (gb - ga)
        } else {
            0.5 * (a + b)
        };
        let margin = 0.01 * (b - a);
        if !(m > a + margin && m < b - margin) {
            m = 0.5 * (a + b);
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
    }
    0.5 * (a + b)
}

/// Empirical quantile with linear interpolation (the common "type 7"
/// definition) on an ascending-sorted slice, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

pub fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs
}

/// One-sample Kolmogorov-Smirnov statistic against a cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted_xs: &[f64], cdf: F) -> f64 {
    let n = sorted_xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted_xs.iter().enumerate() {
        let c = cdf(x);
        d = d.max(((i + 1) as f64 / n - c).abs());
        d = d.max((c - i as f64 / n).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic (max ECDF gap).
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> f64 {
    let xs = sorted(xs.to_vec());
    let ys = sorted(ys.to_vec());
    let (mut i, mut j) = (0usize, 0usize);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        // Step past every sample tied at the current value before
        // measuring, so ties across samples are handled correctly.
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample
/// correction; `n_eff` is the sample size (or n*m/(n+m) for two samples).
pub fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let sqn = n_eff.sqrt();
    let lambda = (sqn + 0.12 + 0.11 / sqn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Serialize an f64 with 17 significant digits; round-trips bit exactly.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadrature_matches_analytic_integrals() {
        let v = adaptive_quad(|x| x.exp(), 0.0, 1.0, 1e-12, &[]);
        assert_relative_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-11);
        let v = adaptive_quad(|x| (-x).exp(), 0.0, 50.0, 1e-12, &[]);
        assert_relative_eq!(v, 1.0, epsilon = 1e-10);
        // Step function: the seeded split keeps the error at tolerance.
        let v = adaptive_quad(|x| if x < 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, 1e-10, &[0.3]);
        assert_relative_eq!(v, 0.3, epsilon = 1e-9);
    }

    #[test]
    fn golden_finds_quadratic_maximum() {
        let (x, fx) = maximize_golden(|x| -(x - 2.5) * (x - 2.5), 0.0, 10.0, 1e-10, 300);
        assert_relative_eq!(x, 2.5, epsilon = 1e-8);
        assert!(fx > -1e-15);
    }

    #[test]
    fn percentile_interpolates() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(percentile(&xs, 0.0), 1.0);
        assert_relative_eq!(percentile(&xs, 1.0), 4.0);
        assert_relative_eq!(percentile(&xs, 0.5), 2.5);
    }

    #[test]
    fn ks_two_sample_known_value() {
        let xs = vec![1.0, 1.0, 4.0, 4.0];
        let ys = vec![1.0, 1.0, 1.0, 4.0];
        assert_relative_eq!(ks_two_sample(&xs, &ys), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn ks_pvalue_is_sane() {
        assert!(ks_pvalue(0.01, 100.0) > 0.9);
        assert!(ks_pvalue(0.5, 100.0) < 1e-6);
    }

    #[test]
    fn f64_formatting_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 1e-300, 123456.789, 2.5e17] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert_relative_eq!(pairwise_sum(&xs), naive, epsilon = 1e-9);
    }
}
