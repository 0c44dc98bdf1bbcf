//! Fit results against a reference least-squares solver written from scratch.

use entrain::scaling::{fit_power_law, SeriesPoint};
use entrain::stats::student_t_two_sided_p;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Reference {
    slope: f64,
    intercept: f64,
    se_slope: f64,
    r2: f64,
}

/// Gaussian elimination on the 2×2 normal equations XᵀX β = Xᵀy.
fn reference_ols(x: &[f64], y: &[f64]) -> Reference {
    let mut m = [[0.0f64; 3]; 2];
    for (&xi, &yi) in x.iter().zip(y) {
        let row = [1.0, xi];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += row[i] * row[j];
            }
            m[i][2] += row[i] * yi;
        }
    }
    let xtx = [[m[0][0], m[0][1]], [m[1][0], m[1][1]]];
    let f = m[1][0] / m[0][0];
    let top = m[0];
    for (cell, t) in m[1].iter_mut().zip(top) {
        *cell -= f * t;
    }
    let slope = m[1][2] / m[1][1];
    let intercept = (m[0][2] - m[0][1] * slope) / m[0][0];
    let n = x.len() as f64;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum();
    let mean = y.iter().sum::<f64>() / n;
    let tss: f64 = y.iter().map(|yi| (yi - mean).powi(2)).sum();
    let sigma2 = rss / (n - 2.0);
    // Var(slope) = σ² · [(XᵀX)⁻¹]₁₁
    let det = xtx[0][0] * xtx[1][1] - xtx[0][1] * xtx[1][0];
    let se_slope = (sigma2 * xtx[0][0] / det).sqrt();
    Reference {
        slope,
        intercept,
        se_slope,
        r2: 1.0 - rss / tss,
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[test]
fn fifty_noisy_points_match_reference() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let series: Vec<SeriesPoint> = (0..50)
            .map(|i| {
                let n = 10_000_000u64 + i * 137_000_003 + rng.random_range(0..1000);
                let log_e = 0.3 - 0.12 * (n as f64).log10() + 0.05 * gaussian(&mut rng);
                SeriesPoint::new(n, 10f64.powf(log_e))
            })
            .collect();
        let x: Vec<f64> = series.iter().map(|p| (p.n as f64).log10()).collect();
        let y: Vec<f64> = series.iter().map(|p| p.value.log10()).collect();
        let r = reference_ols(&x, &y);
        let f = fit_power_law(&series).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(f.b, r.slope) < 1e-9, "seed {seed}: {} vs {}", f.b, r.slope);
        assert!(rel(f.a.log10(), r.intercept) < 1e-9);
        assert!(rel(f.se_b, r.se_slope) < 1e-9);
        assert!(rel(f.r_squared, r.r2) < 1e-9);
        let p = student_t_two_sided_p(r.slope / r.se_slope, 48);
        assert!(rel(f.p_value, p) < 1e-9);
    }
}

#[test]
fn published_counterfactual_series() {
    // Distractor shift for counterfactual contexts across seven Cerebras-GPT sizes.
    let pts = [
        (111_000_000u64, 9.70),
        (256_000_000, 7.99),
        (590_000_000, 6.50),
        (1_300_000_000, 4.54),
        (2_700_000_000, 2.46),
        (6_700_000_000, 2.77),
        (13_000_000_000, 2.30),
    ];
    let series: Vec<SeriesPoint> = pts.iter().map(|&(n, v)| SeriesPoint::new(n, v)).collect();
    let f = fit_power_law(&series).unwrap();
    let x: Vec<f64> = pts.iter().map(|p| (p.0 as f64).log10()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
    let r = reference_ols(&x, &y);
    assert!((f.b - r.slope).abs() < 1e-12);
    assert!((f.b - -0.330).abs() < 0.005);
    assert!((f.r_squared - 0.926).abs() < 0.005);
    assert!((f.p_value - 5.2e-4).abs() < 0.2e-4, "p = {}", f.p_value);
    // t(0.975, 5) = 2.5706 from tables
    assert!((f.ci95.0 - (r.slope - 2.570_581_836 * r.se_slope)).abs() < 1e-8);
    assert!((f.ci95.0 - -0.438).abs() < 0.005 && (f.ci95.1 - -0.223).abs() < 0.005);
}

#[test]
fn t_table_values() {
    use entrain::stats::student_t_quantile;
    assert!((student_t_quantile(0.975, 5) - 2.571).abs() < 1e-3);
    assert!((student_t_two_sided_p(2.571, 5) - 0.05).abs() < 1e-3);
    assert!((student_t_quantile(0.975, 30) - 2.042_272_456).abs() < 1e-8);
}
