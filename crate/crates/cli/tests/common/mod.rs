//! Independent oracles for the acceptance suite. Nothing here calls into
//! the implementation paths it checks: tail probabilities come from
//! adaptive quadrature of the densities (with exact half-integer gamma
//! constants), the regression oracle solves the normal equations by
//! Gauss-Jordan elimination, and the statistics oracle is sort-and-sum.

#![allow(dead_code, clippy::too_many_arguments, clippy::needless_range_loop)]

use rand::rngs::StdRng;
use rand::Rng;

// ---------------------------------------------------------------- quadrature

/// ln Gamma(half / 2) for positive half-integers, by the recursion
/// Gamma(x + 1) = x Gamma(x) from Gamma(1/2) = sqrt(pi) and Gamma(1) = 1.
fn ln_gamma_half(half: usize) -> f64 {
    assert!(half >= 1);
    let target = half as f64 / 2.0;
    let mut x = if half % 2 == 1 { 0.5 } else { 1.0 };
    let mut acc = if half % 2 == 1 { 0.5 * std::f64::consts::PI.ln() } else { 0.0 };
    while x < target {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson integral of `f` over [a, b].
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Two-sided t tail by quadrature of the density over [0, |t|].
pub fn t_two_sided_quadrature(t: f64, df: usize) -> f64 {
    let v = df as f64;
    let ln_c = ln_gamma_half(df + 1) - ln_gamma_half(df) - 0.5 * (v * std::f64::consts::PI).ln();
    let density = move |u: f64| (ln_c - 0.5 * (v + 1.0) * (1.0 + u * u / v).ln()).exp();
    1.0 - 2.0 * integrate(density, 0.0, t.abs(), 1e-11)
}

/// Upper F tail by quadrature: P(F_{d1,d2} > x) = P(F_{d2,d1} < 1/x),
/// integrated with the substitution t = u^2 to remove the endpoint
/// singularity at zero.
pub fn f_upper_quadrature(x: f64, df1: usize, df2: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let (a1, a2) = (df2 as f64, df1 as f64); // swapped pair
    let ln_c = 0.5 * a1 * (a1 / a2).ln() + ln_gamma_half(df1 + df2) - ln_gamma_half(df2)
        - ln_gamma_half(df1);
    let integrand = move |u: f64| {
        if u == 0.0 && a1 >= 2.0 {
            // u^(a1-1) with a1 >= 2 vanishes; avoid 0^0 edge for a1 == 1
            return 0.0;
        }
        let t = u * u;
        let ln_f = ln_c + (0.5 * a1 - 1.0) * t.ln() - 0.5 * (a1 + a2) * (1.0 + a1 * t / a2).ln();
        2.0 * u * ln_f.exp()
    };
    integrate(integrand, 0.0, (1.0 / x).sqrt(), 1e-11)
}

/// Upper chi-squared tail by quadrature of the density over [0, x] with
/// the same u^2 substitution.
pub fn chi_squared_upper_quadrature(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let v = df as f64;
    let ln_c = -0.5 * v * 2.0_f64.ln() - ln_gamma_half(df);
    let integrand = move |u: f64| {
        if u == 0.0 {
            return if df == 1 { (ln_c).exp() * 2.0 } else { 0.0 };
        }
        let t = u * u;
        let ln_f = ln_c + (0.5 * v - 1.0) * t.ln() - 0.5 * t;
        2.0 * u * ln_f.exp()
    };
    1.0 - integrate(integrand, 0.0, x.sqrt(), 1e-11)
}

// ------------------------------------------------------- normal equations OLS

pub struct NormalEquationsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// OLS through the normal equations: form X^T X and invert it by
/// Gauss-Jordan elimination with partial pivoting. Independent of the QR
/// path used by the implementation.
pub fn normal_equations_fit(xs: &[Vec<f64>], y: &[f64]) -> NormalEquationsFit {
    let n = y.len();
    let m = xs.len() + 1;
    // gram matrix and rhs
    let col = |j: usize, i: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            xs[j - 1][i]
        }
    };
    let mut g = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for r in 0..m {
        for c in 0..m {
            g[r * m + c] = (0..n).map(|i| col(r, i) * col(c, i)).sum();
        }
        b[r] = (0..n).map(|i| col(r, i) * y[i]).sum();
    }
    // gauss-jordan on [G | I]
    let mut aug = vec![0.0; m * 2 * m];
    for r in 0..m {
        for c in 0..m {
            aug[r * 2 * m + c] = g[r * m + c];
        }
        aug[r * 2 * m + m + r] = 1.0;
    }
    for p in 0..m {
        let pivot_row = (p..m)
            .max_by(|&a, &bb| {
                aug[a * 2 * m + p].abs().total_cmp(&aug[bb * 2 * m + p].abs())
            })
            .unwrap();
        if pivot_row != p {
            for c in 0..2 * m {
                aug.swap(p * 2 * m + c, pivot_row * 2 * m + c);
            }
        }
        let pivot = aug[p * 2 * m + p];
        for c in 0..2 * m {
            aug[p * 2 * m + c] /= pivot;
        }
        for r in 0..m {
            if r != p {
                let factor = aug[r * 2 * m + p];
                for c in 0..2 * m {
                    aug[r * 2 * m + c] -= factor * aug[p * 2 * m + c];
                }
            }
        }
    }
    let ginv = |r: usize, c: usize| aug[r * 2 * m + m + c];
    let mut beta = vec![0.0; m];
    for r in 0..m {
        beta[r] = (0..m).map(|c| ginv(r, c) * b[c]).sum();
    }
    let mut residuals = vec![0.0; n];
    for i in 0..n {
        let pred: f64 = (0..m).map(|j| col(j, i) * beta[j]).sum();
        residuals[i] = y[i] - pred;
    }
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let s2 = ssr / (n - m) as f64;
    let std_errors: Vec<f64> = (0..m).map(|j| (s2 * ginv(j, j)).sqrt()).collect();
    NormalEquationsFit { coefficients: beta, std_errors, r_squared: 1.0 - ssr / sst, residuals }
}

// ------------------------------------------------------- brute-force stats

pub struct BruteStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
    pub range: f64,
}

pub fn brute_stats(values: &[f64]) -> BruteStats {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let variance = if n > 1 {
        sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    BruteStats { n, mean, median, variance, range: sorted[n - 1] - sorted[0] }
}

// ------------------------------------------------------- random inventories

use cellgate_core::inventory::{
    EmissionFactorTable, ExchangeKind, ExchangeRef, FactorKey, InventoryGraph, ProcessInventory,
    ReferenceFlow,
};

pub const DAG_REGIONS: [&str; 3] = ["AA", "BB", "GLO"];
pub const DAG_MATERIALS: usize = 12;

/// Random DAG inventory: process i only references j > i, so the result is
/// acyclic by construction. The factor table covers every material in
/// every region.
pub fn random_dag(rng: &mut StdRng, max_processes: usize) -> (InventoryGraph, EmissionFactorTable) {
    let n = rng.gen_range(1..=max_processes);
    let mut processes = Vec::with_capacity(n);
    for i in 0..n {
        let n_ex = rng.gen_range(0..=10);
        let mut exchanges = Vec::with_capacity(n_ex);
        for _ in 0..n_ex {
            if i + 1 < n && rng.gen_bool(0.3) {
                let target = rng.gen_range(i + 1..n);
                exchanges.push(ExchangeRef {
                    input_name: format!("p{target}"),
                    origin: "GLO".to_string(),
                    amount: rng.gen_range(0.0..2.0),
                    unit: "kg".to_string(),
                    kind: ExchangeKind::Process,
                });
            } else {
                exchanges.push(ExchangeRef {
                    input_name: format!("material_{}", rng.gen_range(0..DAG_MATERIALS)),
                    origin: DAG_REGIONS[rng.gen_range(0..DAG_REGIONS.len())].to_string(),
                    amount: rng.gen_range(0.0..8.0),
                    unit: "kg".to_string(),
                    kind: ExchangeKind::Leaf,
                });
            }
        }
        processes.push(ProcessInventory {
            id: format!("p{i}"),
            reference_flow: ReferenceFlow { quantity: 1.0, unit: "kg".to_string() },
            exchanges,
        });
    }
    let mut table = EmissionFactorTable::default();
    for mat in 0..DAG_MATERIALS {
        for region in DAG_REGIONS {
            table.insert(
                FactorKey {
                    input_name: format!("material_{mat}"),
                    origin: region.to_string(),
                    unit: "kg".to_string(),
                },
                rng.gen_range(0.01..50.0),
            );
        }
    }
    (InventoryGraph { processes }, table)
}

/// Total GWP by an iterative topological dynamic program; an independent
/// check on the recursive memoized engine.
pub fn topological_total(graph: &InventoryGraph, table: &EmissionFactorTable, root: &str) -> f64 {
    use std::collections::HashMap;
    // processes were generated so that references point to higher indices;
    // evaluate back to front
    let mut totals: HashMap<&str, f64> = HashMap::new();
    for p in graph.processes.iter().rev() {
        let total = p
            .exchanges
            .iter()
            .map(|e| match e.kind {
                ExchangeKind::Leaf => {
                    e.amount * table.lookup(&e.input_name, &e.origin, &e.unit).unwrap()
                }
                ExchangeKind::Process => e.amount * totals[e.input_name.as_str()],
            })
            .sum();
        totals.insert(p.id.as_str(), total);
    }
    totals[root]
}
