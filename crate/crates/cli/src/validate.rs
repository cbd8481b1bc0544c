//! Validation battery: quick self-checks and the full acceptance criteria.
//!
//! Every check produces rows `group,check,item,value,reference,error,tolerance,status`.
//! `error` is an absolute difference for deterministic checks and `|z|` for
//! statistical ones. Rows with status `INFO` are diagnostics and never fail.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cocrn_core::linkprob::{success_best_relay, success_ostbc};
use cocrn_core::model::{db_to_linear, render_config, Protocol, Sensing};
use cocrn_core::oracle::{ua_quadrature, ub_quadrature, QuadratureSpec};
use cocrn_core::performance::{
    optimal_q, pu_delay, pu_delay_geo_g1, q_grid, q_star_ideal, su_throughput_aux, DEFAULT_Q_STEP,
};
use cocrn_core::protocols::{
    branch_gains, build_flow_graph, fuse_majority, pu_throughput, pu_throughput_closed_form,
    BranchGains,
};
use cocrn_core::sfg::{throughput, transfer_linear_solve, transfer_mason};
use cocrn_core::{default_config, SimEstimate, SystemConfig};
use cocrn_sim::{simulate, SimConfig};

use crate::commands::{cmd_simulate, cmd_sweep, SimFlags};
use crate::format::sig12;

pub const CSV_HEADER: &str = "group,check,item,value,reference,error,tolerance,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CheckRow {
    pub check: String,
    pub item: String,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
    pub tolerance: f64,
    pub status: Status,
}

impl CheckRow {
    /// `|value − reference| ≤ tol`.
    pub fn close(
        check: &str,
        item: impl Into<String>,
        value: f64,
        reference: f64,
        tol: f64,
    ) -> Self {
        let error = (value - reference).abs();
        Self::judged(check, item, value, reference, error, tol)
    }

    /// `|z| ≤ sigmas` for an estimate against an analytic reference.
    pub fn z(
        check: &str,
        item: impl Into<String>,
        est: &SimEstimate,
        reference: f64,
        sigmas: f64,
    ) -> Self {
        let error = est.z_score(reference).abs();
        Self::judged(check, item, est.mean, reference, error, sigmas)
    }

    /// `value ≤ limit`.
    pub fn at_most(check: &str, item: impl Into<String>, value: f64, limit: f64) -> Self {
        let error = (value - limit).max(0.0);
        let mut row = Self::judged(check, item, value, limit, error, 0.0);
        row.status = if value <= limit {
            Status::Pass
        } else {
            Status::Fail
        };
        row
    }

    /// `lhs ≥ rhs − tol`; `error` is the shortfall.
    pub fn at_least(check: &str, item: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self::judged(check, item, lhs, rhs, (rhs - lhs).max(0.0), tol)
    }

    pub fn flag(check: &str, item: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self::judged(check, item, v, 1.0, 1.0 - v, 0.0)
    }

    pub fn info(mut self) -> Self {
        self.status = Status::Info;
        self
    }

    fn judged(
        check: &str,
        item: impl Into<String>,
        value: f64,
        reference: f64,
        error: f64,
        tol: f64,
    ) -> Self {
        Self {
            check: check.into(),
            item: item.into(),
            value,
            reference,
            error,
            tolerance: tol,
            status: if error <= tol {
                Status::Pass
            } else {
                Status::Fail
            },
        }
    }
}

/// A named set of rows, e.g. one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Group {
    pub name: String,
    pub title: String,
    pub rows: Vec<CheckRow>,
    /// Seconds spent producing the rows.
    pub elapsed: f64,
}

impl Group {
    pub fn passed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.status != Status::Fail)
    }

    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.status == Status::Fail)
            .count()
    }

    /// One human-readable verdict line.
    pub fn summary(&self) -> String {
        let checks = self
            .rows
            .iter()
            .filter(|r| r.status != Status::Info)
            .count();
        format!(
            "{} {}: {} ({} checks, {} failed, {:.1} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.title,
            checks,
            self.failures(),
            self.elapsed
        )
    }
}

fn timed(name: &str, title: &str, f: impl FnOnce() -> Vec<CheckRow>) -> Group {
    let start = Instant::now();
    let rows = f();
    Group {
        name: name.into(),
        title: title.into(),
        rows,
        elapsed: start.elapsed().as_secs_f64(),
    }
}

pub fn to_csv(groups: &[Group]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for g in groups {
        for r in &g.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                g.name,
                r.check,
                r.item,
                sig12(r.value),
                sig12(r.reference),
                sig12(r.error),
                sig12(r.tolerance),
                r.status
            ));
        }
    }
    out
}

/// Runs a fallible check, turning a library error into one failed row.
fn or_fail(
    check: &str,
    item: &str,
    f: impl FnOnce() -> cocrn_core::Result<Vec<CheckRow>>,
) -> Vec<CheckRow> {
    f().unwrap_or_else(|e| {
        let mut row = CheckRow::flag(check, format!("{item}: {e}"), false);
        row.item = row.item.replace(',', ";");
        vec![row]
    })
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

/// Default parameters with enough SUs for `n + m ≤ 8`.
fn link_config() -> SystemConfig {
    default_config::<f64>().with_su_count(8)
}

/// Three randomized parameter sets (fixed seed).
pub fn random_link_configs() -> Vec<SystemConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..3)
        .map(|_| {
            let mut c = link_config();
            c.beta = rng.random_range(0.05..0.5);
            c.pu_power = rng.random_range(0.05..1.0);
            c.su_power = rng.random_range(0.02..1.0);
            c.noise_power = rng.random_range(0.01..0.5);
            c.channels.sigma_pd2 = db_to_linear(rng.random_range(-16.0..-4.0));
            c.channels.sigma_sd2 = db_to_linear(rng.random_range(-16.0..-4.0));
            c
        })
        .collect()
}

fn describe(c: &SystemConfig) -> String {
    format!(
        "beta={:.4} P_P={:.4} P_S={:.4} sigma_N2={:.4} sigma_PD2={:.4} sigma_SD2={:.4}",
        c.beta, c.pu_power, c.su_power, c.noise_power, c.channels.sigma_pd2, c.channels.sigma_sd2
    )
}

/// Uniformly random gains satisfying the invariants, `L ∈ 1..=8`.
pub fn random_gains(rng: &mut ChaCha8Rng, fresh: bool) -> BranchGains<f64> {
    let l = rng.random_range(1..=8usize);
    let s_na: f64 = rng.random_range(0.001..1.0);
    let used: f64 = rng.random();
    let weights: Vec<f64> = (0..l).map(|_| rng.random_range(0.001..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let s_ps = weights
        .iter()
        .map(|w| (1.0 - s_na) * used * w / total)
        .collect();
    let s_a = (0..l).map(|_| rng.random_range(0.001..=1.0)).collect();
    let s_f = fresh.then(|| rng.random_range(0.001..=1.0));
    BranchGains::from_parts(s_na, s_ps, s_a, s_f)
}

fn trend_config(l: usize) -> SystemConfig {
    let mut c = default_config::<f64>().with_su_count(l).with_q(0.7);
    c.channels.sigma_sd2 = db_to_linear(-13.0);
    c
}

fn is_unimodal(ys: &[f64], tol: f64) -> (bool, usize) {
    let peak = ys
        .iter()
        .enumerate()
        .fold(0, |best, (i, &y)| if y > ys[best] { i } else { best });
    let rises = ys[..=peak].windows(2).all(|w| w[1] >= w[0] - tol);
    let falls = ys[peak..].windows(2).all(|w| w[1] <= w[0] + tol);
    (rises && falls, peak)
}

// ---------------------------------------------------------------------------
// Quick level
// ---------------------------------------------------------------------------

pub fn quick() -> Vec<Group> {
    let spec = QuadratureSpec::default();
    let quad = timed(
        "quick.quadrature",
        "closed forms vs quadrature, n,m <= 2",
        || {
            let c = link_config();
            or_fail("quadrature", "grid", || {
                let mut rows = Vec::new();
                for n in 0..=2 {
                    for m in 0..=2 {
                        let item = format!("n={n} m={m}");
                        rows.push(CheckRow::close(
                            "U_a",
                            &item,
                            success_ostbc(n, m, &c)?,
                            ua_quadrature(n, m, &c, &spec)?,
                            1e-6,
                        ));
                        if n >= 1 {
                            rows.push(CheckRow::close(
                                "U_b",
                                &item,
                                success_best_relay(n, m, &c)?,
                                ub_quadrature(n, m, &c, &spec)?,
                                1e-6,
                            ));
                        }
                    }
                }
                Ok(rows)
            })
        },
    );
    let sfg = timed(
        "quick.sfg",
        "flow-graph identities at default parameters",
        || {
            let mut rows = Vec::new();
            for protocol in Protocol::ALL {
                for sensing in Sensing::ALL {
                    let cfg = default_config::<f64>()
                        .with_protocol(protocol)
                        .with_sensing(sensing);
                    let item = format!("{protocol} {sensing}");
                    rows.extend(or_fail("sfg", &item, || {
                        let g = branch_gains(&cfg)?;
                        let graph = build_flow_graph(&g, protocol)?;
                        let lin = transfer_linear_solve(&graph, 1.0)?;
                        let mason = transfer_mason(&graph, 1.0)?;
                        Ok(vec![
                            CheckRow::close("H(1)", &item, lin.h, 1.0, 1e-10),
                            CheckRow::close(
                                "mason_dh",
                                &item,
                                mason.dh,
                                lin.dh,
                                1e-10 * lin.dh.max(1.0),
                            ),
                            CheckRow::close(
                                "throughput",
                                &item,
                                throughput(&graph)?,
                                pu_throughput(&cfg)?,
                                1e-10,
                            ),
                        ])
                    }));
                }
            }
            rows
        },
    );
    let fusion = timed(
        "quick.fusion",
        "majority fusion in exact arithmetic",
        fusion_rows,
    );
    vec![quad, sfg, fusion]
}

// ---------------------------------------------------------------------------
// Full level: acceptance criteria
// ---------------------------------------------------------------------------

pub fn criterion_1() -> Group {
    timed(
        "criterion-1",
        "U_a closed form vs quadrature, n,m in 0..4, four parameter sets",
        || {
            let spec = QuadratureSpec::default();
            let start = Instant::now();
            let mut cfgs = vec![("defaults".to_string(), link_config())];
            for (i, c) in random_link_configs().into_iter().enumerate() {
                cfgs.push((format!("random{} [{}]", i + 1, describe(&c)), c));
            }
            let mut rows = Vec::new();
            for (name, c) in &cfgs {
                rows.extend(or_fail("U_a", name, || {
                    let mut rows = Vec::new();
                    for n in 0..=4 {
                        for m in 0..=4 {
                            rows.push(CheckRow::close(
                                "U_a",
                                format!("{name} n={n} m={m}"),
                                success_ostbc(n, m, c)?,
                                ua_quadrature(n, m, c, &spec)?,
                                1e-6,
                            ));
                        }
                    }
                    Ok(rows)
                }));
            }
            rows.push(CheckRow::at_most(
                "runtime_s",
                "total",
                start.elapsed().as_secs_f64(),
                30.0,
            ));
            rows
        },
    )
}

pub fn criterion_2() -> Group {
    timed(
        "criterion-2",
        "corrected U_b vs quadrature and U_b(1,m) = U_a(1,m)",
        || {
            let spec = QuadratureSpec::default();
            let c = link_config();
            let mut rows = or_fail("U_b", "defaults", || {
                let mut rows = Vec::new();
                for n in 1..=4 {
                    for m in 0..=4 {
                        rows.push(CheckRow::close(
                            "U_b",
                            format!("n={n} m={m}"),
                            success_best_relay(n, m, &c)?,
                            ub_quadrature(n, m, &c, &spec)?,
                            1e-6,
                        ));
                    }
                }
                Ok(rows)
            });
            let mut sets = vec![("defaults".to_string(), c)];
            for (i, r) in random_link_configs().into_iter().enumerate() {
                sets.push((format!("random{}", i + 1), r));
            }
            for (name, c) in &sets {
                rows.extend(or_fail("identity", name, || {
                    (0..=4)
                        .map(|m| {
                            Ok(CheckRow::close(
                                "U_b(1;m)=U_a(1;m)",
                                format!("{name} m={m}"),
                                success_best_relay(1, m, c)?,
                                success_ostbc(1, m, c)?,
                                1e-12,
                            ))
                        })
                        .collect()
                }));
            }
            rows
        },
    )
}

pub fn criterion_3() -> Group {
    timed(
        "criterion-3",
        "flow graph vs closed forms, 100 random gain sets per protocol",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(0xf10);
            let mut rows = Vec::new();
            for protocol in [
                Protocol::AllRelay,
                Protocol::RecurrentBestRelay,
                Protocol::NonRecurrentBestRelay,
            ] {
                for k in 0..100 {
                    let g = random_gains(&mut rng, protocol == Protocol::NonRecurrentBestRelay);
                    let item = format!("{protocol}#{k} L={}", g.su_count());
                    rows.extend(or_fail("sfg", &item, || {
                        let graph = build_flow_graph(&g, protocol)?;
                        let lin = transfer_linear_solve(&graph, 1.0)?;
                        let mason = transfer_mason(&graph, 1.0)?;
                        let closed = pu_throughput_closed_form(&g, protocol)?;
                        Ok(vec![
                            CheckRow::close("H(1)", &item, lin.h, 1.0, 1e-10),
                            CheckRow::close(
                                "throughput_vs_closed_form",
                                &item,
                                throughput(&graph)?,
                                closed,
                                1e-10,
                            ),
                            CheckRow::close("mason_H(1)", &item, mason.h, lin.h, 1e-10),
                            CheckRow::close(
                                "mason_dH(1)_rel",
                                &item,
                                mason.dh / lin.dh,
                                1.0,
                                1e-10,
                            ),
                        ])
                    }));
                }
            }
            rows
        },
    )
}

pub fn criterion_4() -> Group {
    timed(
        "criterion-4",
        "saturated simulation vs analytic mu_P, L=4, 12 cells",
        || {
            let sim = SimConfig::default();
            let mut rows = Vec::new();
            for protocol in Protocol::ALL {
                for sensing in Sensing::ALL {
                    let cfg = default_config::<f64>()
                        .with_su_count(4)
                        .with_q(0.7)
                        .with_protocol(protocol)
                        .with_sensing(sensing);
                    let item = format!("{protocol} {sensing}");
                    let start = Instant::now();
                    rows.extend(or_fail("mu_P_hat", &item, || {
                        let mu = pu_throughput(&cfg)?;
                        let r = simulate(&cfg, &sim)?;
                        Ok(vec![
                            CheckRow::z("mu_P_hat", &item, &r.mu_p_hat, mu, 3.0),
                            CheckRow::at_most(
                                "runtime_s",
                                &item,
                                start.elapsed().as_secs_f64(),
                                120.0,
                            ),
                        ])
                    }));
                }
            }
            rows
        },
    )
}

pub fn criterion_5() -> Group {
    timed(
        "criterion-5",
        "unsaturated queue: idle fraction and mean delay, ARC IS L=4 lambda=0.1",
        || {
            let cfg = default_config::<f64>()
                .with_su_count(4)
                .with_q(0.7)
                .with_lambda(0.1);
            let sim = SimConfig {
                saturated_pu: false,
                ..SimConfig::default()
            };
            or_fail("queue", "ARC IS", || {
                let mu = pu_throughput(&cfg)?;
                let r = simulate(&cfg, &sim)?;
                Ok(vec![
                    CheckRow::z(
                        "idle_frac",
                        "1-lambda/mu_P",
                        &r.idle_frac,
                        1.0 - 0.1 / mu,
                        3.0,
                    ),
                    CheckRow::z(
                        "delay_hat",
                        "D_P=(1-lambda)/(mu_P-lambda)",
                        &r.delay_hat,
                        pu_delay(0.1, mu)?,
                        3.0,
                    ),
                    CheckRow::z(
                        "delay_hat",
                        "Geo/G/1 mean delay",
                        &r.delay_hat,
                        pu_delay_geo_g1(&cfg)?,
                        3.0,
                    )
                    .info(),
                ])
            })
        },
    )
}

pub fn criterion_6() -> Group {
    timed(
        "criterion-6",
        "protocol ordering and growth in L, q=0.7, sigma_SD2=-13 dB",
        || {
            const TOL: f64 = 1e-12;
            or_fail("ordering", "L=1..15", || {
                let mut rows = Vec::new();
                let mut curves = std::collections::BTreeMap::new();
                for l in 1..=15 {
                    for sensing in Sensing::ALL {
                        for protocol in Protocol::ALL {
                            let cfg = trend_config(l)
                                .with_protocol(protocol)
                                .with_sensing(sensing);
                            curves.insert(
                                (sensing.label(), protocol.label(), l),
                                pu_throughput(&cfg)?,
                            );
                        }
                    }
                }
                let mu = |s: Sensing, p: Protocol, l: usize| curves[&(s.label(), p.label(), l)];
                for sensing in Sensing::ALL {
                    for l in 1..=15 {
                        for pair in Protocol::ALL.windows(2) {
                            rows.push(CheckRow::at_least(
                                "order",
                                format!("{sensing} L={l} {}>={}", pair[0], pair[1]),
                                mu(sensing, pair[0], l),
                                mu(sensing, pair[1], l),
                                TOL,
                            ));
                        }
                    }
                    for protocol in &Protocol::ALL[..3] {
                        for l in 2..=15 {
                            rows.push(CheckRow::at_least(
                                "nondecreasing_in_L",
                                format!("{sensing} {protocol} L={l}"),
                                mu(sensing, *protocol, l),
                                mu(sensing, *protocol, l - 1),
                                TOL,
                            ));
                        }
                    }
                }
                for l in 1..=15 {
                    let arc = |s| mu(s, Protocol::AllRelay, l);
                    rows.push(CheckRow::at_least(
                        "CS_ARC_above_IS_ARC",
                        format!("L={l}"),
                        arc(Sensing::Cooperative),
                        arc(Sensing::Individual),
                        TOL,
                    ));
                    rows.push(CheckRow::at_least(
                        "CS_ARC_below_perfect_ARC",
                        format!("L={l}"),
                        arc(Sensing::Perfect),
                        arc(Sensing::Cooperative),
                        TOL,
                    ));
                }
                Ok(rows)
            })
        },
    )
}

pub fn criterion_7() -> Group {
    timed(
        "criterion-7",
        "IS-ARC mu_P unimodal in P_S over [0.01, 10] W, L=8",
        || {
            or_fail("unimodal", "P_S grid", || {
                let n = 61;
                let grid: Vec<f64> = (0..n)
                    .map(|i| 10f64.powf(-2.0 + 3.0 * i as f64 / (n - 1) as f64))
                    .collect();
                let mut ys = Vec::new();
                for &p_s in &grid {
                    let mut cfg = default_config::<f64>().with_su_count(8).with_q(0.7);
                    cfg.su_power = p_s;
                    ys.push(pu_throughput(&cfg)?);
                }
                let (ok, peak) = is_unimodal(&ys, 1e-12);
                let mut rows = vec![
                    CheckRow::flag("unimodal", "rises then falls", ok),
                    CheckRow::flag(
                        "interior_peak",
                        format!("peak at P_S={}", sig12(grid[peak])),
                        peak > 0 && peak + 1 < n,
                    ),
                ];
                for (&p, &y) in grid.iter().zip(&ys) {
                    rows.push(
                        CheckRow::close(
                            "mu_P_vs_peak",
                            format!("P_S={}", sig12(p)),
                            y,
                            ys[peak],
                            0.0,
                        )
                        .info(),
                    );
                }
                Ok(rows)
            })
        },
    )
}

pub fn criterion_8() -> Group {
    timed(
        "criterion-8",
        "SU throughput vs q at lambda=0.1, L=15: unimodal, zero when unstable, argmax",
        || {
            let mut rows = Vec::new();
            for protocol in Protocol::ALL {
                let base = default_config::<f64>()
                    .with_su_count(15)
                    .with_lambda(0.1)
                    .with_protocol(protocol);
                let item = protocol.to_string();
                rows.extend(or_fail("mu_S_aux", &item, || {
                    let grid = q_grid(DEFAULT_Q_STEP)?;
                    let mut aux = Vec::with_capacity(grid.len());
                    let mut zero_ok = true;
                    for &q in &grid {
                        let cfg = base.with_q(q);
                        let a = su_throughput_aux(&cfg)?;
                        if pu_throughput(&cfg)? < cfg.lambda_p && a != 0.0 {
                            zero_ok = false;
                        }
                        aux.push(a);
                    }
                    let support: Vec<usize> = (0..aux.len()).filter(|&i| aux[i] > 0.0).collect();
                    let contiguous = support.windows(2).all(|w| w[1] == w[0] + 1);
                    let values: Vec<f64> = support.iter().map(|&i| aux[i]).collect();
                    let (unimodal, _) = is_unimodal(&values, 1e-15);
                    let best = (0..aux.len()).fold(0, |b, i| if aux[i] > aux[b] { i } else { b });
                    let (q_star, v_star) = optimal_q(&base, DEFAULT_Q_STEP)?;
                    Ok(vec![
                        CheckRow::flag("zero_when_unstable", &item, zero_ok),
                        CheckRow::flag(
                            "support_is_interval",
                            &item,
                            contiguous && !support.is_empty(),
                        ),
                        CheckRow::flag("unimodal_on_support", &item, unimodal),
                        CheckRow::close("optimal_q_is_argmax", &item, q_star, grid[best], 0.0),
                        CheckRow::close("optimal_value", &item, v_star, aux[best], 0.0),
                    ])
                }));
            }
            rows
        },
    )
}

pub fn criterion_9() -> Group {
    timed(
        "criterion-9",
        "grid-searched q* vs closed form with error-free detection",
        || {
            let mut rows = Vec::new();
            for l in [2usize, 5, 15] {
                let mut is = default_config::<f64>().with_su_count(l).with_lambda(0.1);
                is.p_d = 1.0;
                let mut cs = is.with_sensing(Sensing::Cooperative);
                cs.p_d = 0.8;
                cs.p_d_star = Some(1.0);
                let beta = is.beta;
                let lf = l as f64;
                for (cfg, closed, name) in [
                    (is, ((1.0 + beta) / (0.9 * beta * lf)).min(1.0), "IS p_d=1"),
                    (cs, ((1.0 + beta) / (beta * lf)).min(1.0), "CS p_d*=1"),
                ] {
                    let item = format!("{name} L={l}");
                    rows.extend(or_fail("q_star", &item, || {
                        let (q, _) = optimal_q(&cfg, DEFAULT_Q_STEP)?;
                        let mut rows = vec![
                            CheckRow::close(
                                "grid_vs_closed_form",
                                &item,
                                q,
                                closed,
                                DEFAULT_Q_STEP + 1e-12,
                            ),
                            CheckRow::close(
                                "library_closed_form",
                                &item,
                                q_star_ideal(&cfg),
                                closed,
                                1e-15,
                            ),
                        ];
                        if l == 15 {
                            let anchor = if cfg.sensing == Sensing::Individual {
                                0.81481
                            } else {
                                0.73333
                            };
                            rows.push(CheckRow::close(
                                "anchor",
                                &item,
                                q,
                                anchor,
                                DEFAULT_Q_STEP + 1e-12,
                            ));
                            rows.push(CheckRow::close(
                                "anchor_closed_form",
                                &item,
                                closed,
                                anchor,
                                5e-6,
                            ));
                        }
                        Ok(rows)
                    }));
                }
            }
            rows
        },
    )
}

fn fusion_rows() -> Vec<CheckRow> {
    type Q = Ratio<i64>;
    [
        (Q::new(4, 5), Q::new(896, 1000), "p=0.8 L=3"),
        (Q::new(1, 10), Q::new(28, 1000), "p=0.1 L=3"),
    ]
    .into_iter()
    .map(|(p, expect, item)| {
        let got = fuse_majority(p, 3);
        let f = |r: Q| *r.numer() as f64 / *r.denom() as f64;
        let mut row = CheckRow::flag("fuse_majority_exact", item, got == expect);
        row.value = f(got);
        row.reference = f(expect);
        row
    })
    .collect()
}

pub fn criterion_10() -> Group {
    timed(
        "criterion-10",
        "majority fusion, exact rational arithmetic",
        fusion_rows,
    )
}

pub fn criterion_11() -> Group {
    timed(
        "criterion-11",
        "repeated simulate and sweep runs are byte-identical",
        || {
            let dir = std::env::temp_dir().join(format!("cocrn-validate-{}", std::process::id()));
            let rows = determinism_rows(&dir);
            let _ = std::fs::remove_dir_all(&dir);
            rows
        },
    )
}

fn determinism_rows(dir: &Path) -> Vec<CheckRow> {
    let fail = |what: &str, e: String| {
        vec![CheckRow::flag(
            "determinism",
            format!("{what}: {e}").replace(',', ";"),
            false,
        )]
    };
    if let Err(e) = std::fs::create_dir_all(dir) {
        return fail("temp dir", e.to_string());
    }
    let config = dir.join("system.cfg");
    let spec = dir.join("sweep.cfg");
    let cfg = default_config::<f64>().with_protocol(Protocol::NonRecurrentBestRelay);
    let mut spec_text = render_config(&cfg);
    spec_text = spec_text
        .lines()
        .filter(|l| {
            !l.starts_with("L =") && !l.starts_with("protocol =") && !l.starts_with("sensing =")
        })
        .collect::<Vec<_>>()
        .join("\n");
    spec_text.push_str("\nsweep.variable = L\nsweep.values = 1:6:6\nsweep.protocols = ARC,RBRC,NRBRC,NC\nsweep.sensing = IS,CS,perfect\n");
    if let Err(e) =
        std::fs::write(&config, render_config(&cfg)).and_then(|_| std::fs::write(&spec, spec_text))
    {
        return fail("write inputs", e.to_string());
    }
    let flags = SimFlags {
        slots: 50_000,
        seed: 7,
        saturated: true,
        replications: 2,
        ..SimFlags::default()
    };
    let sims: Vec<_> = (0..2).map(|_| cmd_simulate(&config, &flags)).collect();
    let mut rows = Vec::new();
    match (&sims[0], &sims[1]) {
        (Ok(a), Ok(b)) => rows.push(CheckRow::flag(
            "simulate_stdout",
            "2 runs",
            a.stdout == b.stdout && !a.stdout.is_empty(),
        )),
        (Err(e), _) | (_, Err(e)) => return fail("simulate", e.to_string()),
    }
    let outs = [dir.join("a.csv"), dir.join("b.csv")];
    for out in &outs {
        if let Err(e) = cmd_sweep(&spec, Some(out)) {
            return fail("sweep", e.to_string());
        }
    }
    let same = match (std::fs::read(&outs[0]), std::fs::read(&outs[1])) {
        (Ok(a), Ok(b)) => a == b && !a.is_empty(),
        _ => false,
    };
    rows.push(CheckRow::flag("sweep_csv_bytes", "2 runs", same));
    rows
}

pub fn full() -> Vec<Group> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ]
}
