//! Test-local numerics, kept separate from the crate's own quadrature so
//! the oracles do not share code with what they check.
#![allow(dead_code)]

use std::f64::consts::PI;

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Composite five-point Gauss-Legendre on `n` equal panels.
pub fn gl5<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for p in 0..n {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * acc
}

/// Integral over `[a, b]` of a function that is smooth between `breaks`.
pub fn gl5_piecewise<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], n: usize) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2).map(|w| gl5(&f, w[0], w[1], n)).sum()
}

pub fn phi_exp(t: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        5.0 * (-5.0 * t).exp()
    }
}

pub fn phi_cos(t: f64) -> f64 {
    if (0.0..=1.0).contains(&t) {
        (3.0 * PI * t).cos() + 1.0
    } else {
        0.0
    }
}

/// The cosine basis written out directly.
pub fn basis_fn(k: usize, t: f64) -> f64 {
    if k == 0 {
        (1.0 / PI).sqrt()
    } else {
        (2.0 / PI).sqrt() * (k as f64 * t).cos()
    }
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Upper tail of the chi-square distribution by series/continued fraction
/// of the regularized incomplete gamma function.
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    let a = 0.5 * dof;
    let z = 0.5 * x;
    if z <= 0.0 {
        return 1.0;
    }
    let ln_gamma_a = ln_gamma(a);
    if z < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        for n in 1..1000 {
            term *= z / (a + n as f64);
            sum += term;
            if term < sum * 1e-16 {
                break;
            }
        }
        1.0 - sum * (-z + a * z.ln() - ln_gamma_a).exp()
    } else {
        // Lentz continued fraction for Q(a, z)
        let tiny = 1e-300;
        let mut b = z + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-z + a * z.ln() - ln_gamma_a).exp() * h
    }
}

/// Lanczos approximation.
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}
