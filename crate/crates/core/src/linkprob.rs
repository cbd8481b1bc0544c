//! Per-slot success probabilities of the individual links.
//!
//! * `U_a(n, m)`: PU packet reaches D when the PU and `n` SUs transmit it
//!   jointly (received powers add) while `m` other SUs interfere.
//! * `U_b(n, m)`: as above, but only the strongest of the `n` holders joins.
//! * `W(m)`: an SU source decodes the PU packet under `m` SU interferers.
//! * `V(m)`: an SU packet reaches its destination under `m` SU interferers
//!   while the PU is silent.
//!
//! All channels are Rayleigh, so received powers are exponential and sums of
//! them are Gamma distributed. The closed forms below are arranged in terms
//! of rate ratios (`β₁/(β₁+β₂)` and friends) so that no term carries
//! `β^m`-sized intermediates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::scalar::Real;
use crate::specfun::{binomial, factorial, lower_gamma_ratio, upper_gamma_regularized};

/// Relative tolerance under which two exponential rates are treated as equal.
pub const RATE_EQ_RTOL: f64 = 1e-9;

/// Values outside `[−PROB_SLACK, 1 + PROB_SLACK]` are reported as errors.
const PROB_SLACK: f64 = 1e-9;

/// Shapes and rates of the two Gamma variables in `Z = X − Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaDiffParams<T> {
    /// Shape of `X`.
    pub m: u32,
    /// Rate of `X`.
    pub beta1: T,
    /// Shape of `Y`.
    pub n: u32,
    /// Rate of `Y`.
    pub beta2: T,
}

impl<T: Real> GammaDiffParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::OutOfRange("Gamma shapes must be >= 1".into()));
        }
        if !(self.beta1 > T::zero() && self.beta2 > T::zero()) {
            return Err(Error::OutOfRange("Gamma rates must be positive".into()));
        }
        Ok(())
    }
}

/// Threshold constant and the rate of the remaining exponential term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectLinkParams<T> {
    /// `c = β·σ_N²`.
    pub c: T,
    pub beta3: T,
}

fn rates_equal<T: Real>(a: T, b: T) -> bool {
    (a - b).abs() <= T::lit(RATE_EQ_RTOL) * a.abs().max(b.abs())
}

/// Density of `Z = X − Y`, `X ~ Gamma(m, β₁)`, `Y ~ Gamma(n, β₂)` independent.
///
/// ```text
/// z ≥ 0:  β₁^m β₂^n/(Γ(m)Γ(n)) e^(−β₁z) Σ_{j<m} C(m−1,j) z^j Γ(m+n−1−j)/(β₁+β₂)^(m+n−1−j)
/// z < 0:  β₁^m β₂^n/(Γ(m)Γ(n)) e^(β₂z)  Σ_{j<n} C(n−1,j) |z|^j Γ(m+n−1−j)/(β₁+β₂)^(m+n−1−j)
/// ```
///
/// evaluated as `r₁^m r₂^n s Σ C(m+n−2−j, ·) (s|z|)^j / j!` with
/// `s = β₁+β₂`, `rᵢ = βᵢ/s`.
pub fn gamma_diff_pdf<T: Real>(z: T, p: &GammaDiffParams<T>) -> T {
    let s = p.beta1 + p.beta2;
    let r1 = p.beta1 / s;
    let r2 = p.beta2 / s;
    let (shape, other, decay) = if z >= T::zero() {
        (p.m, p.n, (-p.beta1 * z).exp())
    } else {
        (p.n, p.m, (p.beta2 * z).exp())
    };
    let u = s * z.abs();
    let mut power = T::one(); // u^j / j!
    let mut sum = T::zero();
    for j in 0..shape {
        if j > 0 {
            power = power * u / T::lit(f64::from(j));
        }
        let coeff = binomial::<T>((shape + other - 2 - j) as usize, (other - 1) as usize);
        sum = sum + coeff * power;
    }
    r1.powi(p.m as i32) * r2.powi(p.n as i32) * s * decay * sum
}

/// Rates of the assisted-transmission problem `Pr[W > c + X − Y]` where `X`
/// collects interference, `Y` the assisting SUs and `W` the direct PU signal.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OstbcRates<T> {
    /// `1/(β P_S σ_SD²)`, interference rate.
    pub beta1: T,
    /// `1/(P_S σ_SD²)`, assisting-SU rate.
    pub beta2: T,
    /// `1/(P_P σ_PD²)`, direct PU rate.
    pub beta3: T,
    pub c: T,
}

impl<T: Real> OstbcRates<T> {
    pub fn from_config(cfg: &SystemConfig<T>) -> Self {
        let ch = &cfg.channels;
        Self {
            beta1: T::one() / (cfg.beta * cfg.su_power * ch.sigma_sd2),
            beta2: T::one() / (cfg.su_power * ch.sigma_sd2),
            beta3: T::one() / (cfg.pu_power * ch.sigma_pd2),
            c: cfg.noise_threshold(),
        }
    }
}

/// Rates of the best-relay problem `Pr[max Xᵢ > c + Z]`, where now `Z`
/// contains the direct PU signal and `Xᵢ` are the holders' links.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BestRelayRates<T> {
    /// `1/(β P_S σ_SD²)`, interference rate.
    pub beta1: T,
    /// `1/(P_P σ_PD²)`, direct PU rate.
    pub beta2: T,
    /// `1/(P_S σ_SD²)`, holder-link rate.
    pub beta3: T,
    pub c: T,
}

impl<T: Real> BestRelayRates<T> {
    pub fn from_config(cfg: &SystemConfig<T>) -> Self {
        let ch = &cfg.channels;
        Self {
            beta1: T::one() / (cfg.beta * cfg.su_power * ch.sigma_sd2),
            beta2: T::one() / (cfg.pu_power * ch.sigma_pd2),
            beta3: T::one() / (cfg.su_power * ch.sigma_sd2),
            c: cfg.noise_threshold(),
        }
    }
}

fn check_prob<T: Real>(what: &str, v: T) -> Result<T> {
    let slack = T::lit(PROB_SLACK);
    if v.is_finite() && v >= -slack && v <= T::one() + slack {
        Ok(v)
    } else {
        Err(Error::GainInvariant(format!(
            "{what} = {v} is not a probability"
        )))
    }
}

fn check_counts(n: usize, m: usize, l: usize) -> Result<()> {
    if n + m > l {
        Err(Error::OutOfRange(format!(
            "n + m = {} exceeds L = {l}",
            n + m
        )))
    } else {
        Ok(())
    }
}

/// The three pieces `(I_A1, I_A2, I_A3)` of `U_a(n, m)` for `n, m ≥ 1`:
/// `Z < −c` (success regardless of `W`), `−c ≤ Z < 0` and `Z ≥ 0`.
pub fn ostbc_pieces<T: Real>(n: usize, m: usize, cfg: &SystemConfig<T>) -> Result<(T, T, T)> {
    if n == 0 || m == 0 {
        return Err(Error::OutOfRange(
            "ostbc_pieces needs n >= 1 and m >= 1".into(),
        ));
    }
    let r = OstbcRates::from_config(cfg);
    let (n, m) = (n as u32, m as u32);
    let s = r.beta1 + r.beta2;
    let r1 = r.beta1 / s;
    let r2 = r.beta2 / s;
    let direct = (-r.beta3 * r.c).exp();
    let b2c = r.beta2 * r.c;
    let x = (r.beta2 - r.beta3) * r.c;
    let equal = rates_equal(r.beta2, r.beta3);

    let r1m = r1.powi(m as i32);
    let mut i1 = T::zero();
    let mut i2 = T::zero();
    for j in 0..n {
        let coeff = binomial::<T>((m + n - 2 - j) as usize, (m - 1) as usize);
        let weight = coeff * r1m * r2.powi((n - 1 - j) as i32);
        i1 = i1 + weight * upper_gamma_regularized(j + 1, b2c)?;
        // γ(j+1, x)/(β₂−β₃)^(j+1) = c^(j+1) · γ(j+1, x)/x^(j+1)
        let ratio = if equal {
            T::one() / T::lit(f64::from(j + 1))
        } else {
            lower_gamma_ratio(j + 1, x)?
        };
        i2 = i2 + weight * b2c.powi((j + 1) as i32) * ratio / factorial::<T>(j);
    }
    i2 = i2 * direct;

    let t = r.beta1 / (r.beta1 + r.beta3);
    let r2n = r2.powi(n as i32);
    let mut i3 = T::zero();
    for j in 0..m {
        let coeff = binomial::<T>((m + n - 2 - j) as usize, (n - 1) as usize);
        i3 = i3 + coeff * r2n * r1.powi((m - 1 - j) as i32) * t.powi((j + 1) as i32);
    }
    i3 = i3 * direct;
    Ok((i1, i2, i3))
}

/// `U_a(n, m)`: success probability of the D-OSTBC transmission of the PU and
/// `n` assisting SUs with `m` interfering SUs.
pub fn success_ostbc<T: Real>(n: usize, m: usize, cfg: &SystemConfig<T>) -> Result<T> {
    check_counts(n, m, cfg.su_count)?;
    ostbc_unchecked(n, m, cfg)
}

pub(crate) fn ostbc_unchecked<T: Real>(n: usize, m: usize, cfg: &SystemConfig<T>) -> Result<T> {
    let r = OstbcRates::from_config(cfg);
    let direct = (-r.beta3 * r.c).exp();
    let v = if n == 0 {
        // Only the direct link: e^(−β₃c) (1 + β₃/β₁)^(−m).
        direct * (T::one() + r.beta3 / r.beta1).powi(-(m as i32))
    } else if m == 0 {
        let n32 = n as u32;
        let b2c = r.beta2 * r.c;
        let ratio = if rates_equal(r.beta2, r.beta3) {
            T::one() / T::count(n)
        } else {
            lower_gamma_ratio(n32, (r.beta2 - r.beta3) * r.c)?
        };
        upper_gamma_regularized(n32, b2c)?
            + direct * b2c.powi(n as i32) * ratio / factorial::<T>(n32 - 1)
    } else {
        let (a, b, c) = ostbc_pieces(n, m, cfg)?;
        a + b + c
    };
    check_prob("U_a", v)
}

/// Which transcription of the best-relay integrals to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BestRelayForm {
    /// Integrals carried out from the density: `I_B1` keeps the
    /// `(β₁/(β₁+β₂))^m` factor and `I_B2` has `(β₁ + jβ₃)` in its denominator.
    Corrected,
    /// The integrals exactly as typeset in the source derivation, kept only to
    /// demonstrate that the validator catches them.
    AsPrinted,
}

/// Largest holder count for which the alternating sum in `U_b` stays accurate
/// (about 1e-9 at the limit; cancellation grows quickly beyond it).
pub const MAX_BEST_RELAY_HOLDERS: usize = 30;

/// `U_b(n, m)`: success probability when the PU and the strongest of `n`
/// holders transmit while `m` SUs interfere. `n` is limited to
/// [`MAX_BEST_RELAY_HOLDERS`].
pub fn success_best_relay<T: Real>(n: usize, m: usize, cfg: &SystemConfig<T>) -> Result<T> {
    best_relay_with_form(n, m, cfg, BestRelayForm::Corrected)
}

/// `U_b(n, m)` under a chosen transcription of the integrals. With
/// [`BestRelayForm::AsPrinted`] the result is not range-checked.
pub fn best_relay_with_form<T: Real>(
    n: usize,
    m: usize,
    cfg: &SystemConfig<T>,
    form: BestRelayForm,
) -> Result<T> {
    if n == 0 {
        return Err(Error::OutOfRange("best-relay success needs n >= 1".into()));
    }
    if n > MAX_BEST_RELAY_HOLDERS {
        return Err(Error::OutOfRange(format!(
            "best-relay success is limited to n <= {MAX_BEST_RELAY_HOLDERS}"
        )));
    }
    check_counts(n, m, cfg.su_count)?;
    best_relay_unchecked(n, m, cfg, form)
}

pub(crate) fn best_relay_unchecked<T: Real>(
    n: usize,
    m: usize,
    cfg: &SystemConfig<T>,
    form: BestRelayForm,
) -> Result<T> {
    let r = BestRelayRates::from_config(cfg);
    let s = r.beta1 + r.beta2;
    let r1 = r.beta1 / s;
    let m32 = m as u32;

    // Ū_b = Σ_j C(n,j) (−1)^j e^(−jβ₃c) [I_B1(j) + I_B2(j)]
    let mut complement = T::zero();
    for j in 0..=n {
        let jt = T::count(j);
        let rate = r.beta2 - jt * r.beta3;
        // C_j = (1 − e^(−(β₂−jβ₃)c)) / (β₂−jβ₃) = c · γ(1, y)/y
        let c_j = if rates_equal(r.beta2, jt * r.beta3) {
            r.c
        } else {
            r.c * lower_gamma_ratio(1, rate * r.c)?
        };
        let (ib1, ib2) = match form {
            BestRelayForm::Corrected => {
                let ib1 = r1.powi(m32 as i32) * r.beta2 * c_j;
                let mut ib2 = T::zero();
                if m32 > 0 {
                    let denom = r.beta1 + jt * r.beta3;
                    let tj = r.beta1 / denom;
                    for i in 0..m32 {
                        ib2 = ib2 + r1.powi((m32 - i) as i32) * tj.powi(i as i32);
                    }
                    ib2 = ib2 * r.beta2 / denom;
                }
                (ib1, ib2)
            }
            BestRelayForm::AsPrinted => {
                let b1m = r.beta1.powi(m32 as i32);
                let ib1 = b1m * r.beta2 * c_j;
                let mut ib2 = T::zero();
                if m32 > 0 {
                    let gm = factorial::<T>(m32 - 1);
                    for i in 0..m32 {
                        ib2 = ib2
                            + binomial::<T>((m32 - 1) as usize, i as usize)
                                * factorial::<T>(m32 - i - 1)
                                / s.powi((m32 - i) as i32)
                                * factorial::<T>(i)
                                / (r.beta2 + jt * r.beta3).powi((i + 1) as i32);
                    }
                    ib2 = ib2 * b1m * r.beta2 / gm;
                }
                (ib1, ib2)
            }
        };
        let sign = if j % 2 == 0 { T::one() } else { -T::one() };
        complement =
            complement + sign * binomial::<T>(n, j) * (-jt * r.beta3 * r.c).exp() * (ib1 + ib2);
    }
    let v = T::one() - complement;
    match form {
        BestRelayForm::Corrected => check_prob("U_b", v),
        BestRelayForm::AsPrinted => Ok(v),
    }
}

/// `W(m)`: an SU source decodes the PU packet while `m` SUs interfere over
/// SU-to-SU links.
pub fn su_reception_prob<T: Real>(m: usize, cfg: &SystemConfig<T>) -> Result<T> {
    if m + 1 > cfg.su_count {
        return Err(Error::OutOfRange(format!(
            "W(m) needs m <= L - 1, got m = {m} with L = {}",
            cfg.su_count
        )));
    }
    Ok(su_reception_unchecked(m, cfg))
}

pub(crate) fn su_reception_unchecked<T: Real>(m: usize, cfg: &SystemConfig<T>) -> T {
    let ch = &cfg.channels;
    let snr_term = cfg.noise_power * cfg.beta / (cfg.pu_power * ch.sigma_ps2);
    let interference = cfg.beta * cfg.su_power * ch.sigma_ss2 / (cfg.pu_power * ch.sigma_ps2);
    (-snr_term).exp() * (T::one() + interference).powi(-(m as i32))
}

/// `V(m)`: an SU packet reaches its destination while the PU is silent and
/// `m` other SUs transmit.
pub fn su_success_prob<T: Real>(m: usize, cfg: &SystemConfig<T>) -> Result<T> {
    if m + 1 > cfg.su_count {
        return Err(Error::OutOfRange(format!(
            "V(m) needs m <= L - 1, got m = {m} with L = {}",
            cfg.su_count
        )));
    }
    Ok(su_success_unchecked(m, cfg))
}

pub(crate) fn su_success_unchecked<T: Real>(m: usize, cfg: &SystemConfig<T>) -> T {
    let snr_term = cfg.noise_power * cfg.beta / (cfg.su_power * cfg.channels.sigma_sr2);
    (-snr_term).exp() * (T::one() + cfg.beta).powi(-(m as i32))
}

/// All link probabilities needed for one physical configuration, indexed by
/// assisting/interfering counts. None of them depend on `q`, `p_d`, `p_f` or
/// `λ_P`, so a table can be reused across sweeps of those parameters.
#[derive(Debug, Clone)]
pub struct LinkTable<T> {
    l: usize,
    /// `ua[n][m]`, `n + m ≤ L`.
    ua: Vec<Vec<T>>,
    /// `ub[n][m]`, `1 ≤ n ≤ MAX_BEST_RELAY_HOLDERS`, `n + m ≤ L`; other rows
    /// empty.
    ub: Vec<Vec<T>>,
    w: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> LinkTable<T> {
    pub fn new(cfg: &SystemConfig<T>) -> Result<Self> {
        let l = cfg.su_count;
        let mut ua = Vec::with_capacity(l + 1);
        let mut ub = Vec::with_capacity(l + 1);
        for n in 0..=l {
            let row: Result<Vec<T>> = (0..=l - n).map(|m| ostbc_unchecked(n, m, cfg)).collect();
            ua.push(row?);
            if n == 0 || n > MAX_BEST_RELAY_HOLDERS {
                ub.push(Vec::new());
            } else {
                let row: Result<Vec<T>> = (0..=l - n)
                    .map(|m| best_relay_unchecked(n, m, cfg, BestRelayForm::Corrected))
                    .collect();
                ub.push(row?);
            }
        }
        // W and V are also tabulated at m = L so interferer counts up to L
        // (all other SUs) can be looked up without bounds juggling.
        let w = (0..=l).map(|m| su_reception_unchecked(m, cfg)).collect();
        let v = (0..=l).map(|m| su_success_unchecked(m, cfg)).collect();
        Ok(Self { l, ua, ub, w, v })
    }

    pub fn su_count(&self) -> usize {
        self.l
    }

    pub fn ua(&self, n: usize, m: usize) -> T {
        self.ua[n][m]
    }

    pub fn ub(&self, n: usize, m: usize) -> T {
        assert!(n >= 1, "U_b needs n >= 1");
        self.ub[n][m]
    }

    pub fn w(&self, m: usize) -> T {
        self.w[m]
    }

    pub fn v(&self, m: usize) -> T {
        self.v[m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{db_to_linear, default_config};

    /// Baseline with σ_SD² at −10 dB (the default).
    fn cfg() -> SystemConfig<f64> {
        default_config::<f64>().with_su_count(8)
    }

    #[test]
    fn pdf_single_shape_is_difference_of_exponentials() {
        let p = GammaDiffParams {
            m: 1,
            beta1: 2.0_f64,
            n: 1,
            beta2: 3.0,
        };
        for z in [0.0_f64, 0.4, 2.0] {
            let expect = 2.0 * 3.0 / 5.0 * (-2.0 * z).exp();
            assert!((gamma_diff_pdf(z, &p) - expect).abs() < 1e-14);
        }
        for z in [-0.1_f64, -1.5] {
            let expect = 2.0 * 3.0 / 5.0 * (3.0 * z).exp();
            assert!((gamma_diff_pdf(z, &p) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn pdf_hand_value_at_origin() {
        let p = GammaDiffParams {
            m: 2,
            beta1: 1.0_f64,
            n: 2,
            beta2: 1.0,
        };
        assert!((gamma_diff_pdf(0.0, &p) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pdf_matches_literal_formula() {
        // Literal transcription with factorials, for moderate rates.
        let p = GammaDiffParams {
            m: 3,
            beta1: 1.7_f64,
            n: 4,
            beta2: 0.6,
        };
        let lit = |z: f64| {
            let (m, n) = (3u32, 4u32);
            let pre = p.beta1.powi(3) * p.beta2.powi(4)
                / (factorial::<f64>(m - 1) * factorial::<f64>(n - 1));
            let s = p.beta1 + p.beta2;
            if z >= 0.0 {
                pre * (-p.beta1 * z).exp()
                    * (0..m)
                        .map(|j| {
                            binomial::<f64>((m - 1) as usize, j as usize)
                                * z.powi(j as i32)
                                * factorial::<f64>(m + n - 2 - j)
                                / s.powi((m + n - 1 - j) as i32)
                        })
                        .sum::<f64>()
            } else {
                pre * (p.beta2 * z).exp()
                    * (0..n)
                        .map(|j| {
                            binomial::<f64>((n - 1) as usize, j as usize)
                                * z.abs().powi(j as i32)
                                * factorial::<f64>(m + n - 2 - j)
                                / s.powi((m + n - 1 - j) as i32)
                        })
                        .sum::<f64>()
            }
        };
        for i in -30..30 {
            let z = f64::from(i) * 0.23;
            let a = gamma_diff_pdf(z, &p);
            assert!((a - lit(z)).abs() < 1e-13 * (1.0 + a), "z={z}");
        }
    }

    #[test]
    fn ua_no_assist_examples() {
        let c = cfg();
        let v0 = success_ostbc(0, 0, &c).unwrap();
        assert!((v0 - (-1.995_262_314_968_879_5_f64).exp()).abs() < 1e-12);
        assert!((v0 - 0.135_98).abs() < 1e-5);
        let v1 = success_ostbc(0, 1, &c).unwrap();
        assert!((v1 - v0 / 1.199_526_231_496_888).abs() < 1e-12);
        assert!((v1 - 0.113_36).abs() < 1e-5);
    }

    #[test]
    fn ua_one_one_pieces() {
        let (a, b, c3) = ostbc_pieces(1, 1, &cfg()).unwrap();
        assert!((a - 0.334_43).abs() < 1e-5, "{a}");
        assert!((b - 0.211_84).abs() < 1e-4, "{b}");
        assert!((c3 - 0.010_31).abs() < 1e-5, "{c3}");
        let total = success_ostbc(1, 1, &cfg()).unwrap();
        assert!((total - 0.5566).abs() < 1e-4, "{total}");
    }

    #[test]
    fn ua_zero_threshold_is_certain() {
        let mut c = cfg();
        c.noise_power = 1e-300;
        let v = success_ostbc(3, 0, &c).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ua_one_zero_hand_value() {
        let v = success_ostbc(1, 0, &cfg()).unwrap();
        let g = 1.0 - 0.995_262_314_968_879_5_f64.exp();
        let hand = (-1.0_f64).exp()
            + (-1.995_262_314_968_879_5_f64).exp() * 100.0 * g / (-99.526_231_496_887_95);
        assert!((v - hand).abs() < 1e-12);
        assert!((v - 0.600_90).abs() < 5e-5);
    }

    #[test]
    fn ua_monotone_in_counts() {
        let c = cfg();
        for n in 0..=5 {
            for m in 0..=5 {
                if n + 1 + m <= c.su_count {
                    assert!(
                        success_ostbc(n + 1, m, &c).unwrap()
                            >= success_ostbc(n, m, &c).unwrap() - 1e-15
                    );
                }
                if n + m < c.su_count {
                    assert!(
                        success_ostbc(n, m + 1, &c).unwrap()
                            <= success_ostbc(n, m, &c).unwrap() + 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn ub_single_holder_equals_ua() {
        let c = cfg();
        for m in 0..c.su_count {
            let a = success_ostbc(1, m, &c).unwrap();
            let b = success_best_relay(1, m, &c).unwrap();
            assert!((a - b).abs() < 1e-12, "m={m}: {a} vs {b}");
        }
        assert!((success_best_relay(1, 0, &c).unwrap() - 0.600_90).abs() < 5e-5);
    }

    #[test]
    fn ub_bracketed_by_ua() {
        let c = cfg();
        for n in 1..=5 {
            for m in 1..=3 {
                let ub = success_best_relay(n, m, &c).unwrap();
                assert!(ub <= success_ostbc(n, m, &c).unwrap() + 1e-12);
                assert!(ub >= success_ostbc(1, m, &c).unwrap() - 1e-12);
            }
        }
    }

    #[test]
    fn ub_monotone_to_one() {
        let c = default_config::<f64>().with_su_count(30);
        let mut prev = 0.0;
        for n in 1..=25 {
            let v = success_best_relay(n, 0, &c).unwrap();
            assert!(v >= prev - 1e-9, "n={n}: {v} < {prev}");
            prev = v;
        }
        assert!(prev > 0.95);
    }

    #[test]
    fn best_relay_holder_limit() {
        let c = default_config::<f64>().with_su_count(40);
        assert!(success_best_relay(MAX_BEST_RELAY_HOLDERS, 0, &c).is_ok());
        assert!(success_best_relay(MAX_BEST_RELAY_HOLDERS + 1, 0, &c).is_err());
        // The table still serves ARC lookups at this size.
        let t = LinkTable::new(&c).unwrap();
        assert!(t.ua(40, 0) > 0.99);
    }

    #[test]
    fn printed_best_relay_integrals_are_off() {
        let c = cfg();
        let good = success_best_relay(2, 2, &c).unwrap();
        let printed = best_relay_with_form(2, 2, &c, BestRelayForm::AsPrinted).unwrap();
        assert!((good - printed).abs() > 1e-3);
        // With no interferers both transcriptions coincide.
        let good = success_best_relay(3, 0, &c).unwrap();
        let printed = best_relay_with_form(3, 0, &c, BestRelayForm::AsPrinted).unwrap();
        assert!((good - printed).abs() < 1e-12);
    }

    #[test]
    fn reception_and_delivery_examples() {
        let c = cfg();
        let e1 = (-1.0_f64).exp();
        assert!((su_reception_prob(0, &c).unwrap() - e1).abs() < 1e-12);
        assert!((su_success_prob(0, &c).unwrap() - e1).abs() < 1e-12);
        let w2 = su_reception_prob(2, &c).unwrap();
        assert!((w2 - e1 / 1.21).abs() < 1e-12);
        assert!((w2 - 0.304_03).abs() < 1e-5);
        let mut quiet = c;
        quiet.noise_power = 0.0;
        assert_eq!(su_reception_prob(0, &quiet).unwrap(), 1.0);
        assert_eq!(su_success_prob(0, &quiet).unwrap(), 1.0);
        assert!(su_reception_prob(8, &c).is_err());
    }

    #[test]
    fn delivery_mixture_identity() {
        let c = cfg();
        let l = c.su_count;
        for a in [0.0, 0.2, 0.63, 1.0] {
            let pmf = crate::specfun::binomial_pmf(l - 1, a);
            let mix: f64 = (0..l)
                .map(|m| pmf[m] * su_success_prob(m, &c).unwrap())
                .sum();
            let closed =
                (-1.0_f64).exp() * (1.0 - a * c.beta / (1.0 + c.beta)).powi((l - 1) as i32);
            assert!((mix - closed).abs() < 1e-13);
        }
    }

    #[test]
    fn equal_rate_branch_is_continuous() {
        // Choose P_P σ_PD² = P_S σ_SD² so that β₂ = β₃ in the assisted problem.
        let mut c = cfg();
        c.channels.sigma_pd2 = c.su_power * c.channels.sigma_sd2 / c.pu_power;
        let exact_2 = success_ostbc(2, 0, &c).unwrap();
        let exact_22 = success_ostbc(2, 2, &c).unwrap();
        for sgn in [-1.0, 1.0] {
            let mut near = c;
            near.channels.sigma_pd2 *= 1.0 + sgn * 1e-9;
            assert!((success_ostbc(2, 0, &near).unwrap() - exact_2).abs() < 1e-6);
            assert!((success_ostbc(2, 2, &near).unwrap() - exact_22).abs() < 1e-6);
        }
        // Best-relay branch β₂ = jβ₃ (j = 1 here).
        let exact_b = success_best_relay(2, 1, &c).unwrap();
        let mut near = c;
        near.channels.sigma_pd2 *= 1.0 + 1e-9;
        assert!((success_best_relay(2, 1, &near).unwrap() - exact_b).abs() < 1e-6);
    }

    #[test]
    fn probabilities_in_unit_interval_across_configs() {
        let mut c = cfg();
        for pd_db in [-20.0, -13.0, -5.0, 3.0] {
            for sd_db in [-20.0, -10.0, 0.0] {
                c.channels.sigma_pd2 = db_to_linear(pd_db);
                c.channels.sigma_sd2 = db_to_linear(sd_db);
                let t = LinkTable::new(&c).unwrap();
                for n in 0..=c.su_count {
                    for m in 0..=c.su_count - n {
                        let a = t.ua(n, m);
                        assert!((0.0..=1.0 + 1e-12).contains(&a));
                        if n >= 1 {
                            let b = t.ub(n, m);
                            assert!((-1e-12..=1.0 + 1e-12).contains(&b), "n={n} m={m} b={b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn count_guards() {
        let c = default_config::<f64>().with_su_count(3);
        assert!(success_ostbc(2, 2, &c).is_err());
        assert!(success_best_relay(0, 1, &c).is_err());
    }
}
