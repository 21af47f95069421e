//! Studentized range distribution, by numerical integration.
//!
//! For `k` means and `ν` error degrees of freedom,
//!
//! ```text
//! P(Q ≤ q) = ∫₀^∞ f_ν(s) · W(q·s) ds
//! W(w)     = k ∫ φ(z) [Φ(z) − Φ(z − w)]^{k−1} dz
//! ```
//!
//! where `f_ν` is the density of `√(χ²_ν/ν)`. Both integrals use fixed-order
//! Gauss–Legendre panels over truncated supports.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use super::distributions::normal_cdf;

const GL_ORDER: usize = 16;
const INNER_LIMIT: f64 = 8.5;
const INNER_PANELS: usize = 34;
const OUTER_PANELS: usize = 48;
/// Above this ν the outer integral is skipped (ν = ∞).
const DF_INFINITE: f64 = 1e5;

struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Nodes and weights on [-1, 1] via Newton iteration on P_n.
fn gauss_legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    })
}

fn integrate_panels<F: Fn(f64) -> f64>(lo: f64, hi: f64, panels: usize, f: F) -> f64 {
    let rule = gauss_legendre();
    let width = (hi - lo) / panels as f64;
    let half = 0.5 * width;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * f(mid + half * x);
        }
        total += acc * half;
    }
    total
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Range distribution of `k` standard normals: `P(range ≤ w)`.
fn range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let v = integrate_panels(-INNER_LIMIT, INNER_LIMIT, INNER_PANELS, |z| {
        let d = normal_cdf(z) - normal_cdf(z - w);
        std_normal_pdf(z) * d.max(0.0).powi(km1)
    });
    (k as f64 * v).clamp(0.0, 1.0)
}

/// `P(Q ≤ q)` for the studentized range with `k ≥ 2` groups and `df ≥ 1`.
pub fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs k >= 2");
    assert!(df >= 1.0, "studentized range needs df >= 1");
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    if df > DF_INFINITE {
        return range_cdf(q, k);
    }
    let half_nu = 0.5 * df;
    let log_norm = half_nu * df.ln() - ln_gamma(half_nu) - (half_nu - 1.0) * std::f64::consts::LN_2;
    let spread = 10.0 / (2.0 * df).sqrt();
    let lo = (1.0 - spread).max(0.0);
    let hi = 1.0 + spread.max(4.0 / df.sqrt());
    let v = integrate_panels(lo, hi, OUTER_PANELS, |s| {
        if s <= 0.0 {
            return 0.0;
        }
        let log_density = log_norm + (df - 1.0) * s.ln() - half_nu * s * s;
        log_density.exp() * range_cdf(q * s, k)
    });
    v.clamp(0.0, 1.0)
}

/// Upper tail `P(Q > q)`.
pub fn tukey_sf(q: f64, k: usize, df: f64) -> f64 {
    (1.0 - ptukey(q, k, df)).clamp(0.0, 1.0)
}

/// Critical value `q` with `P(Q ≤ q) = 1 − alpha`.
pub fn qtukey(alpha: f64, k: usize, df: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let target = 1.0 - alpha;
    let f = |q: f64| ptukey(q, k, df) - target;
    let (mut a, mut b) = (0.0f64, 2.0f64);
    let (mut fa, mut fb) = (f(a), f(b));
    while fb < 0.0 {
        a = b;
        fa = fb;
        b *= 2.0;
        fb = f(b);
    }
    // Illinois variant of regula falsi
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc.abs() < 1e-13 || (b - a).abs() < 1e-12 {
            return c;
        }
        if fc * fb > 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}
