//! Student-t distribution functions for integer degrees of freedom.
//!
//! Built on the regularized incomplete beta function:
//! `P(|T| > t) = I_x(df/2, 1/2)` with `x = df / (df + t²)`.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

/// ln Γ(z) for z > 0.
pub fn ln_gamma(z: f64) -> f64 {
    if z < 0.5 {
        // Reflection keeps the series in its accurate range.
        return (PI / (PI * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for I_x(a, b), modified Lentz.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) || a <= 0.0 || b <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 || x == 1.0 {
        return x;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b
    }
}

/// Upper tail P(T > t) for t ≥ 0, computed without cancellation.
fn upper_tail(t: f64, df: f64) -> f64 {
    let t2 = t * t;
    // For large t, x is tiny and I_x is evaluated directly in the tail.
    let x = df / (df + t2);
    0.5 * inc_beta(x, 0.5 * df, 0.5)
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: u32) -> f64 {
    if df == 0 || t.is_nan() {
        return f64::NAN;
    }
    let df = df as f64;
    if t >= 0.0 {
        1.0 - upper_tail(t, df)
    } else {
        upper_tail(-t, df)
    }
}

/// Two-sided p-value `2·(1 − CDF(|t|))`, clamped into (0, 1].
pub fn student_t_two_sided_p(t: f64, df: u32) -> f64 {
    if df == 0 || t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return f64::MIN_POSITIVE;
    }
    let p = 2.0 * upper_tail(t.abs(), df as f64);
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Inverse CDF. Bracketing plus bisection on the upper tail, then one Newton polish.
pub fn student_t_quantile(prob: f64, df: u32) -> f64 {
    if df == 0 || !(prob > 0.0 && prob < 1.0) {
        return f64::NAN;
    }
    if prob == 0.5 {
        return 0.0;
    }
    let (tail, sign) = if prob > 0.5 { (1.0 - prob, 1.0) } else { (prob, -1.0) };
    let dff = df as f64;

    let mut lo = 0.0;
    let mut hi = 1.0;
    while upper_tail(hi, dff) > tail {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return sign * f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if upper_tail(mid, dff) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    let density = student_t_pdf(t, df);
    if density > 0.0 {
        let step = (upper_tail(t, dff) - tail) / density;
        let polished = t + step;
        if polished.is_finite() && polished > 0.0 {
            t = polished;
        }
    }
    sign * t
}

pub fn student_t_pdf(t: f64, df: u32) -> f64 {
    let v = df as f64;
    let ln_norm = ln_gamma(0.5 * (v + 1.0)) - ln_gamma(0.5 * v) - 0.5 * (v * PI).ln();
    (ln_norm - 0.5 * (v + 1.0) * (1.0 + t * t / v).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(1.0)).abs() < 1e-14);
    }

    #[test]
    fn p_is_one_at_zero() {
        for df in 1..40 {
            assert_eq!(student_t_two_sided_p(0.0, df), 1.0);
        }
    }

    #[test]
    fn p_is_symmetric_and_monotone() {
        assert_eq!(student_t_two_sided_p(2.0, 5), student_t_two_sided_p(-2.0, 5));
        assert!(student_t_two_sided_p(12.4, 5) < student_t_two_sided_p(12.3, 5));
    }

    #[test]
    fn cauchy_closed_form() {
        // df = 1: CDF(t) = 1/2 + atan(t)/π
        for t in [-20.0, -3.0, -0.5, 0.0, 0.7, 4.0, 100.0] {
            let exact = 0.5 + f64::atan(t) / PI;
            assert!((student_t_cdf(t, 1) - exact).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn df2_closed_form() {
        // df = 2: CDF(t) = 1/2 + t / (2·sqrt(2 + t²))
        for t in [-5.0f64, -1.0, 0.3, 2.0, 9.0] {
            let exact = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
            assert!((student_t_cdf(t, 2) - exact).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn quantile_median_and_symmetry() {
        assert_eq!(student_t_quantile(0.5, 3), 0.0);
        let q = student_t_quantile(0.975, 5);
        assert!((q + student_t_quantile(0.025, 5)).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for df in [1, 2, 5, 7, 30] {
            for p in [1e-6, 0.01, 0.1, 0.3, 0.9, 0.975, 0.999_999] {
                let q = student_t_quantile(p, df);
                assert!((student_t_cdf(q, df) - p).abs() < 1e-12, "df={df} p={p}");
            }
        }
    }

    #[test]
    fn out_of_domain_is_nan() {
        assert!(student_t_quantile(0.0, 3).is_nan());
        assert!(student_t_quantile(1.0, 3).is_nan());
        assert!(student_t_cdf(1.0, 0).is_nan());
    }
}
