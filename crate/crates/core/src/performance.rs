//! System-level metrics built on the PU throughput: SU throughput, stability,
//! transmission-probability optimization, the stable-throughput region and
//! PU packet delay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkprob::LinkTable;
use crate::model::{Sensing, SystemConfig, ThroughputReport};
use crate::protocols::{branch_gains_with, build_flow_graph, pu_throughput_with};
use crate::scalar::Real;
use crate::sfg::{transfer_linear_solve, transfer_second_derivative};

/// Default resolution of the transmission-probability grid.
pub const DEFAULT_Q_STEP: f64 = 1e-3;

/// Loynes: the PU queue is stable iff `λ_P < μ_P`.
pub fn stability_check<T: PartialOrd>(lambda_p: T, mu_p: T) -> bool {
    lambda_p < mu_p
}

/// Throughput of one SU counted only in slots where the PU is idle:
/// `(1 − λ_P/μ_P) · q(1 − p_f) · e^(−σ_N²β/(P_S σ_SR²)) · [1 − a β/(1+β)]^(L−1)`,
/// where `a` is `q(1−p_f)` with individual sensing and `q` with cooperative
/// sensing (a shared decision means every SU that may transmit saw no alarm).
/// Zero when the PU queue is unstable.
pub fn su_throughput_bound<T: Real>(cfg: &SystemConfig<T>, mu_p: T) -> T {
    if !stability_check(cfg.lambda_p, mu_p) {
        return T::zero();
    }
    let (_, pf) = cfg.effective_sensing();
    let idle = T::one() - cfg.lambda_p / mu_p;
    let active = cfg.q * (T::one() - pf);
    let others = match cfg.sensing {
        Sensing::Cooperative => cfg.q,
        Sensing::Individual | Sensing::Perfect => active,
    };
    let clear = (-cfg.noise_power * cfg.beta / (cfg.su_power * cfg.channels.sigma_sr2)).exp();
    let collide = T::one() - others * cfg.beta / (T::one() + cfg.beta);
    idle * active * clear * collide.powi(cfg.su_count as i32 - 1)
}

/// `μ̂_S`: the SU throughput bound where `μ_P(q) ≥ λ_P`, zero elsewhere.
pub fn su_throughput_aux<T: Real>(cfg: &SystemConfig<T>) -> Result<T> {
    let links = LinkTable::new(cfg)?;
    aux_with(cfg, &links)
}

fn aux_with<T: Real>(cfg: &SystemConfig<T>, links: &LinkTable<T>) -> Result<T> {
    let mu_p = pu_throughput_with(cfg, links)?;
    Ok(if mu_p >= cfg.lambda_p {
        su_throughput_bound(cfg, mu_p)
    } else {
        T::zero()
    })
}

/// Grid points `0, step, 2·step, …, 1`.
pub fn q_grid<T: Real>(step: T) -> Result<Vec<T>> {
    if !(step > T::zero() && step <= T::lit(0.01)) {
        return Err(Error::OutOfRange(format!(
            "grid step {step} not in (0, 0.01]"
        )));
    }
    let k = (T::one() / step).round().to_usize().unwrap_or(0);
    let mut grid: Vec<T> = (0..k).map(|i| T::count(i) * step).collect();
    grid.push(T::one());
    Ok(grid)
}

/// Maximizes `μ̂_S` over a uniform `q` grid. Ties go to the smaller `q`.
/// Returns `(q*, μ̂_S(q*))`.
pub fn optimal_q<T: Real>(cfg: &SystemConfig<T>, grid_step: T) -> Result<(T, T)> {
    let links = LinkTable::new(cfg)?;
    optimal_q_with(cfg, &links, grid_step)
}

fn optimal_q_with<T: Real>(
    cfg: &SystemConfig<T>,
    links: &LinkTable<T>,
    grid_step: T,
) -> Result<(T, T)> {
    let mut best = (T::zero(), T::neg_infinity());
    for q in q_grid(grid_step)? {
        let v = aux_with(&(*cfg).with_q(q), links)?;
        if v > best.1 {
            best = (q, v);
        }
    }
    Ok(best)
}

/// Closed-form maximizer of the SU bound when the PU is never misdetected:
/// `min[(1+β)/((1−p_f)βL), 1]` (individual) or `min[(1+β)/(βL), 1]`
/// (cooperative). Ignores the stability constraint.
pub fn q_star_ideal<T: Real>(cfg: &SystemConfig<T>) -> T {
    let (_, pf) = cfg.effective_sensing();
    let l = T::count(cfg.su_count);
    let scale = match cfg.sensing {
        Sensing::Cooperative => T::one(),
        Sensing::Individual | Sensing::Perfect => T::one() - pf,
    };
    ((T::one() + cfg.beta) / (scale * cfg.beta * l)).min(T::one())
}

/// One point of the stable-throughput region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint<T> {
    #[serde(rename = "lambda_P")]
    pub lambda_p: T,
    #[serde(rename = "mu_S")]
    pub mu_s: T,
}

/// For each arrival rate, the SU throughput at the optimal `q`.
pub fn stable_region<T: Real>(
    cfg: &SystemConfig<T>,
    lambda_grid: &[T],
    grid_step: T,
) -> Result<Vec<RegionPoint<T>>> {
    let links = LinkTable::new(cfg)?;
    lambda_grid
        .iter()
        .map(|&lambda_p| {
            if !(lambda_p >= T::zero() && lambda_p <= T::one()) {
                return Err(Error::OutOfRange(format!(
                    "lambda_P = {lambda_p} not in [0, 1]"
                )));
            }
            let (_, mu_s) = optimal_q_with(&(*cfg).with_lambda(lambda_p), &links, grid_step)?;
            Ok(RegionPoint {
                lambda_p,
                mu_s: mu_s.max(T::zero()),
            })
        })
        .collect()
}

/// Mean PU packet delay in slots, `(1 − λ_P)/(μ_P − λ_P)`.
pub fn pu_delay<T: Real>(lambda_p: T, mu_p: T) -> Result<T> {
    if !stability_check(lambda_p, mu_p) {
        return Err(Error::Unstable {
            lambda: lambda_p.to_f64().unwrap_or(f64::NAN),
            mu: mu_p.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok((T::one() - lambda_p) / (mu_p - lambda_p))
}

/// Mean PU delay without assuming geometric service: the discrete-time
/// Geo/G/1 value `E[S] + λ_P E[S(S−1)] / (2(1 − λ_P E[S]))`, with the
/// service-time moments `H'(1)` and `H''(1)` taken from the flow graph.
/// Equals [`pu_delay`] when service is geometric (as under NC).
pub fn pu_delay_geo_g1<T: Real>(cfg: &SystemConfig<T>) -> Result<T> {
    cfg.validate()?;
    let links = LinkTable::new(cfg)?;
    let gains = branch_gains_with(cfg, &links)?;
    let g = build_flow_graph(&gains, cfg.protocol)?;
    let mean = transfer_linear_solve(&g, T::one())?.dh;
    let second = transfer_second_derivative(&g, T::one())?;
    let lambda_p = cfg.lambda_p;
    if !stability_check(lambda_p, T::one() / mean) {
        return Err(Error::Unstable {
            lambda: lambda_p.to_f64().unwrap_or(f64::NAN),
            mu: (T::one() / mean).to_f64().unwrap_or(f64::NAN),
        });
    }
    let two = T::one() + T::one();
    Ok(mean + lambda_p * second / (two * (T::one() - lambda_p * mean)))
}

/// PU throughput, SU bound, stability verdict and delay for one configuration.
pub fn analyze<T: Real>(cfg: &SystemConfig<T>) -> Result<ThroughputReport<T>> {
    cfg.validate()?;
    let links = LinkTable::new(cfg)?;
    report_with(cfg, &links, None)
}

/// As [`analyze`] after replacing `q` by its optimum on the given grid.
pub fn analyze_optimized<T: Real>(
    cfg: &SystemConfig<T>,
    grid_step: T,
) -> Result<ThroughputReport<T>> {
    cfg.validate()?;
    let links = LinkTable::new(cfg)?;
    let (q, _) = optimal_q_with(cfg, &links, grid_step)?;
    report_with(&(*cfg).with_q(q), &links, Some(q))
}

fn report_with<T: Real>(
    cfg: &SystemConfig<T>,
    links: &LinkTable<T>,
    q_star: Option<T>,
) -> Result<ThroughputReport<T>> {
    let mu_p = pu_throughput_with(cfg, links)?;
    let stable = stability_check(cfg.lambda_p, mu_p);
    Ok(ThroughputReport {
        mu_p,
        mu_s_bound: su_throughput_bound(cfg, mu_p),
        stable,
        d_p: if stable {
            Some(pu_delay(cfg.lambda_p, mu_p)?)
        } else {
            None
        },
        q_star,
    })
}
