//! Distribution helpers for the statistical tests and the concentration
//! bound. The zeta function is the only one computed here; the rest wrap
//! statrs.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

/// Two-tailed p-value `P(|T| >= |t|)` for Student's t with `df` degrees of
/// freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    ChiSquared::new(df).expect("positive degrees of freedom").sf(x)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Riemann zeta `ζ(s)` for real `s > 1`, by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta diverges for s <= 1");
    // B_2k / (2k)! for k = 1..7.
    const B_OVER_FACT: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30_240.0,
        -1.0 / 1_209_600.0,
        1.0 / 47_900_160.0,
        -691.0 / 1_307_674_368_000.0,
        1.0 / 74_724_249_600.0,
    ];
    let n: u32 = 20;
    let nf = n as f64;
    let mut sum: f64 = (1..n).map(|k| (k as f64).powf(-s)).sum();
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // Rising factorial s (s+1) ... (s+2k-2) times N^{-s-2k+1}.
    let mut rising = s;
    let mut power = nf.powf(-s - 1.0);
    for (k, coeff) in B_OVER_FACT.iter().enumerate() {
        sum += coeff * rising * power;
        let j = 2.0 * k as f64;
        rising *= (s + j + 1.0) * (s + j + 2.0);
        power /= nf * nf;
    }
    sum
}
