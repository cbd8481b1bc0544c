//! Independent numerical checks of the closed-form link probabilities:
//! adaptive Gauss-Kronrod quadrature of the defining integrals and raw-SINR
//! Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::linkprob::{gamma_diff_pdf, GammaDiffParams};
use crate::model::SystemConfig;
use crate::stats::SimEstimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Absolute error target per integration piece.
    pub abs_tol: f64,
    /// Semi-infinite pieces stop once a panel adds less than this fraction
    /// of the accumulated mass.
    pub tail_cut: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            tail_cut: 1e-16,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.tail_cut > 0.0) {
            return Err(Error::OutOfRange(
                "quadrature tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;
const MAX_TAIL_PANELS: usize = 200;

/// 15-point Kronrod estimate and |K15 − G7| on `[a, b]`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive bisection until the summed error estimate meets `tol`.
fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= tol {
            return Ok(parts.iter().map(|p| p.2).sum());
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} above {tol:e} on [{a}, {b}]"
            )));
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// `∫_a^∞ f` by doubling panels; `scale` is a width over which `f` has
/// decayed appreciably.
fn integrate_tail<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = a;
    let mut width = scale;
    for _ in 0..MAX_TAIL_PANELS {
        let hi = lo + width;
        let part = integrate(f, lo, hi, spec.abs_tol)?;
        total += part;
        if part.abs() <= spec.tail_cut * total.abs() || (part == 0.0 && f(hi) == 0.0) {
            return Ok(total);
        }
        lo = hi;
        width *= 2.0;
    }
    Err(Error::Quadrature(format!("tail from {a} did not converge")))
}

fn gamma_pdf(x: f64, shape: u32, rate: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let k = f64::from(shape);
    let log_fact: f64 = (1..shape).map(|i| f64::from(i).ln()).sum();
    if x == 0.0 {
        return if shape == 1 { rate } else { 0.0 };
    }
    ((k - 1.0) * x.ln() + k * rate.ln() - rate * x - log_fact).exp()
}

/// Density of `X − Y` with `X ~ Gamma(m, β₁)`, `Y ~ Gamma(n, β₂)`, allowing
/// either shape to be zero (a point mass at the origin for that term).
fn difference_pdf(m: u32, beta1: f64, n: u32, beta2: f64) -> impl Fn(f64) -> f64 {
    move |z: f64| match (m, n) {
        (0, 0) => 0.0,
        (0, _) => gamma_pdf(-z, n, beta2),
        (_, 0) => gamma_pdf(z, m, beta1),
        _ => gamma_diff_pdf(z, &GammaDiffParams { m, beta1, n, beta2 }),
    }
}

/// `U_a(n, m) = Pr[W > c + X − Y]` integrated directly: `X` is scaled
/// interference `Gamma(m, 1/(βP_Sσ_SD²))`, `Y` the assisting power
/// `Gamma(n, 1/(P_Sσ_SD²))` and `W ~ Exp(1/(P_Pσ_PD²))` the direct signal.
/// The success kernel `min(1, e^(−β₃(c+z)))` is integrated against the
/// density of `Z = X − Y` over `(−∞, −c]`, `[−c, 0]` and `[0, ∞)`.
pub fn ua_quadrature(
    n: usize,
    m: usize,
    cfg: &SystemConfig<f64>,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    let ch = &cfg.channels;
    let beta1 = 1.0 / (cfg.beta * cfg.su_power * ch.sigma_sd2);
    let beta2 = 1.0 / (cfg.su_power * ch.sigma_sd2);
    let beta3 = 1.0 / (cfg.pu_power * ch.sigma_pd2);
    let c = cfg.beta * cfg.noise_power;
    if n == 0 && m == 0 {
        return Ok((-beta3 * c).exp());
    }
    let (m32, n32) = (m as u32, n as u32);
    let f = difference_pdf(m32, beta1, n32, beta2);
    let kernel = |z: f64| (-beta3 * (c + z)).exp() * f(z);

    // Z < −c: success whatever W is. Mirror onto u = −z ≥ c.
    let left_scale = (f64::from(n32) + 10.0) / beta2;
    let left = if n == 0 {
        0.0
    } else {
        integrate_tail(&|u: f64| f(-u), c, left_scale, spec)?
    };
    let middle = integrate(&kernel, -c, 0.0, spec.abs_tol)?;
    let right_scale = (f64::from(m32) + 10.0) / (beta1 + beta3);
    let right = if m == 0 {
        0.0
    } else {
        integrate_tail(&kernel, 0.0, right_scale, spec)?
    };
    Ok(left + middle + right)
}

/// `U_b(n, m) = 1 − ∫_{−c}^{∞} (1 − e^(−β₃(c+z)))ⁿ f_Z(z) dz`, where the
/// strongest of `n` holder links (rate `β₃ = 1/(P_Sσ_SD²)`) must exceed
/// `c + Z` and `Z = X − W` is scaled interference minus the direct PU power
/// (rate `β₂ = 1/(P_Pσ_PD²)`).
pub fn ub_quadrature(
    n: usize,
    m: usize,
    cfg: &SystemConfig<f64>,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::OutOfRange(
            "best-relay quadrature needs n >= 1".into(),
        ));
    }
    let ch = &cfg.channels;
    let beta1 = 1.0 / (cfg.beta * cfg.su_power * ch.sigma_sd2);
    let beta2 = 1.0 / (cfg.pu_power * ch.sigma_pd2);
    let beta3 = 1.0 / (cfg.su_power * ch.sigma_sd2);
    let c = cfg.beta * cfg.noise_power;
    let f = difference_pdf(m as u32, beta1, 1, beta2);
    let n = n as i32;
    let kernel = |z: f64| (-(-beta3 * (c + z)).exp_m1()).powi(n) * f(z);
    let middle = integrate(&kernel, -c, 0.0, spec.abs_tol)?;
    let right = if m == 0 {
        0.0
    } else {
        integrate_tail(&kernel, 0.0, (m as f64 + 10.0) / beta1, spec)?
    };
    Ok(1.0 - middle - right)
}

/// How the assisting SUs' received power enters the SINR numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combining {
    /// Space-time coded: powers add.
    Ostbc,
    /// Only the strongest holder transmits.
    BestRelay,
}

/// Empirical `Pr[SINR > β]` for `n` assisting and `m` interfering SUs.
pub fn sinr_monte_carlo(
    n: usize,
    m: usize,
    cfg: &SystemConfig<f64>,
    samples: u64,
    seed: u64,
    combining: Combining,
) -> Result<SimEstimate> {
    if samples < 10_000 {
        return Err(Error::OutOfRange(
            "at least 10^4 samples are required".into(),
        ));
    }
    let ch = &cfg.channels;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |mean: f64| -> f64 {
        let e: f64 = Exp1.sample(&mut rng);
        e * mean
    };
    let mut hits = 0u64;
    for _ in 0..samples {
        let direct = cfg.pu_power * draw(ch.sigma_pd2);
        let mut assist = 0.0f64;
        for _ in 0..n {
            let p = cfg.su_power * draw(ch.sigma_sd2);
            assist = match combining {
                Combining::Ostbc => assist + p,
                Combining::BestRelay => assist.max(p),
            };
        }
        let mut interference = cfg.noise_power;
        for _ in 0..m {
            interference += cfg.su_power * draw(ch.sigma_sd2);
        }
        if direct + assist > cfg.beta * interference {
            hits += 1;
        }
    }
    Ok(SimEstimate::from_bernoulli(hits, samples))
}
