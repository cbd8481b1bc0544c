use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;

use cocrn_core::model::{Protocol, Sensing, SystemConfig};
use cocrn_core::{Error, Result, SimEstimate};

use crate::streams::{SlotDraws, SlotStreams};
use crate::{SimConfig, SimReport};

/// Largest supported SU count (holder sets are bitmasks).
pub const MAX_SUS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Direct,
    Assist,
    Fresh,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Direct => "P",
            Phase::Assist => "A",
            Phase::Fresh => "F",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Silent,
    Listen,
    Own,
    Relay,
}

#[derive(Debug, Clone, Copy, Default)]
struct Batch {
    slots: u64,
    idle: u64,
    departures: u64,
    delay_sum: u64,
    su_success: u64,
    su_bound: u64,
}

/// Precomputed mean received powers.
struct Powers {
    pd: f64,
    sd: f64,
    ps: f64,
    ss: f64,
    sr: f64,
    pr: f64,
}

impl Powers {
    fn new(cfg: &SystemConfig<f64>) -> Self {
        let ch = &cfg.channels;
        Self {
            pd: cfg.pu_power * ch.sigma_pd2,
            sd: cfg.su_power * ch.sigma_sd2,
            ps: cfg.pu_power * ch.sigma_ps2,
            ss: cfg.su_power * ch.sigma_ss2,
            sr: cfg.su_power * ch.sigma_sr2,
            pr: cfg.pu_power * ch.sigma_pr2,
        }
    }
}

fn bit(i: usize) -> u64 {
    1u64 << i
}

/// State machine of one replication.
struct Run<'a> {
    cfg: &'a SystemConfig<f64>,
    sim: &'a SimConfig,
    powers: Powers,
    l: usize,
    queue: VecDeque<u64>,
    phase: Phase,
    holders: u64,
    entry_holders: u64,
    roles: Vec<Role>,
}

struct SlotOutcome {
    pu_active: bool,
    departed: Option<u64>,
    su_success: bool,
    busy_bits: u64,
    pu_ok: Option<bool>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a SystemConfig<f64>, sim: &'a SimConfig) -> Self {
        let l = cfg.su_count;
        Self {
            cfg,
            sim,
            powers: Powers::new(cfg),
            l,
            queue: VecDeque::new(),
            phase: Phase::Direct,
            holders: 0,
            entry_holders: 0,
            roles: vec![Role::Silent; l],
        }
    }

    /// Per-SU "PU present" verdicts for the current sensing mode.
    fn sensed_busy(&self, pu_active: bool, d: &SlotDraws) -> u64 {
        let cfg = self.cfg;
        let individual = (0..self.l).fold(0u64, |acc, i| {
            let p = if pu_active { cfg.p_d } else { cfg.p_f };
            if d.sense[i] < p {
                acc | bit(i)
            } else {
                acc
            }
        });
        let all = if self.l == 64 {
            u64::MAX
        } else {
            bit(self.l) - 1
        };
        match cfg.sensing {
            Sensing::Individual => individual,
            Sensing::Perfect => {
                if pu_active {
                    all
                } else {
                    0
                }
            }
            Sensing::Cooperative => {
                let forced = if pu_active {
                    cfg.p_d_star
                } else {
                    cfg.p_f_star
                };
                let busy = match forced {
                    Some(p) => d.sense[0] < p,
                    None => individual.count_ones() as usize >= self.l.div_ceil(2),
                };
                if busy {
                    all
                } else {
                    0
                }
            }
        }
    }

    fn best_holder(&self, d: &SlotDraws) -> usize {
        (0..self.l)
            .filter(|&i| self.holders & bit(i) != 0)
            .max_by(|&a, &b| d.sd[a].total_cmp(&d.sd[b]))
            .expect("assist phase with no holders")
    }

    fn step(&mut self, t: u64, d: &SlotDraws) -> SlotOutcome {
        let cfg = self.cfg;
        let protocol = cfg.protocol;
        if self.sim.saturated_pu {
            if self.queue.is_empty() {
                self.queue.push_back(t);
            }
        } else if d.arrival < cfg.lambda_p {
            self.queue.push_back(t);
        }
        let pu_active = !self.queue.is_empty();
        debug_assert!(pu_active || self.phase == Phase::Direct);

        let busy = self.sensed_busy(pu_active, d);
        let relay_set = match self.phase {
            Phase::Direct => 0,
            Phase::Assist if protocol == Protocol::AllRelay => self.holders,
            Phase::Assist | Phase::Fresh => bit(self.best_holder(d)),
        };
        let cooperating = pu_active && self.phase != Phase::Direct;
        let may_listen = pu_active
            && protocol != Protocol::NoCooperation
            && (self.phase == Phase::Direct
                || (self.sim.join_mid_packet && protocol != Protocol::NonRecurrentBestRelay));
        for i in 0..self.l {
            self.roles[i] = if relay_set & bit(i) != 0 {
                Role::Relay
            } else if self.holders & bit(i) != 0
                || (cooperating && cfg.sensing == Sensing::Cooperative && !may_listen)
            {
                Role::Silent
            } else if busy & bit(i) != 0 {
                if may_listen {
                    Role::Listen
                } else {
                    Role::Silent
                }
            } else if d.transmit[i] < cfg.q {
                Role::Own
            } else {
                Role::Silent
            };
        }

        let noise = cfg.noise_power;
        let beta = cfg.beta;
        let p = &self.powers;
        let mut pu_ok = None;
        let mut departed = None;
        if pu_active {
            let mut signal = p.pd * d.pd;
            let mut interference = 0.0;
            for i in 0..self.l {
                match self.roles[i] {
                    Role::Relay => signal += p.sd * d.sd[i],
                    Role::Own => interference += p.sd * d.sd[i],
                    _ => {}
                }
            }
            let ok = signal > beta * (noise + interference);
            pu_ok = Some(ok);

            let mut decoders = 0u64;
            for i in 0..self.l {
                if self.roles[i] != Role::Listen {
                    continue;
                }
                let mut s = p.ps * d.ps[i];
                let mut intf = 0.0;
                for j in 0..self.l {
                    let g = d.ss[j * self.l + i];
                    match self.roles[j] {
                        Role::Own => intf += p.ss * g,
                        Role::Relay => s += p.ss * g,
                        _ => {}
                    }
                }
                if s > beta * (noise + intf) {
                    decoders |= bit(i);
                }
            }

            if ok {
                let arrived = self.queue.pop_front().expect("active PU has a packet");
                departed = Some(t - arrived + 1);
                if self.phase == Phase::Assist
                    && protocol != Protocol::NonRecurrentBestRelay
                    && !self.sim.join_mid_packet
                {
                    assert_eq!(
                        self.holders, self.entry_holders,
                        "assist set changed mid-packet"
                    );
                }
                self.phase = Phase::Direct;
                self.holders = 0;
            } else {
                match self.phase {
                    Phase::Direct => {
                        if decoders != 0 {
                            self.phase = Phase::Assist;
                            self.holders = decoders;
                            self.entry_holders = decoders;
                        }
                    }
                    Phase::Assist => {
                        if protocol == Protocol::NonRecurrentBestRelay {
                            self.phase = Phase::Fresh;
                            self.holders = relay_set;
                        } else {
                            self.holders |= decoders;
                        }
                    }
                    Phase::Fresh => {}
                }
            }
        }
        // Each SU holds at most the one PU packet in service.
        assert!(self.holders.count_ones() as usize <= self.l);
        assert!(self.phase == Phase::Direct || self.holders != 0);

        let mut su_success = false;
        if self.roles[0] == Role::Own {
            let mut intf = if pu_active { p.pr * d.pr } else { 0.0 };
            for j in 1..self.l {
                if matches!(self.roles[j], Role::Own | Role::Relay) {
                    intf += p.sr * d.sr[j];
                }
            }
            su_success = p.sr * d.sr[0] > beta * (noise + intf);
        }
        SlotOutcome {
            pu_active,
            departed,
            su_success,
            busy_bits: busy,
            pu_ok,
        }
    }

    fn trace_line(&self, t: u64, o: &SlotOutcome) -> String {
        let sense: String = (0..self.l)
            .map(|i| if o.busy_bits & bit(i) != 0 { '1' } else { '0' })
            .collect();
        let roles: String = self
            .roles
            .iter()
            .map(|r| match r {
                Role::Silent => '.',
                Role::Listen => 'L',
                Role::Own => 'T',
                Role::Relay => 'R',
            })
            .collect();
        let pu = match o.pu_ok {
            None => "-",
            Some(true) => "ok",
            Some(false) => "fail",
        };
        format!(
            "{t} queue={} sense={sense} roles={roles} pu={pu} su0={} next={}{}",
            self.queue.len() + usize::from(o.departed.is_some()),
            u8::from(o.su_success),
            self.phase,
            if self.holders != 0 {
                format!(" holders={:0width$b}", self.holders, width = self.l)
            } else {
                String::new()
            }
        )
    }
}

fn check(cfg: &SystemConfig<f64>, sim: &SimConfig) -> Result<()> {
    cfg.validate()?;
    sim.validate().map_err(Error::InvalidConfig)?;
    if cfg.su_count > MAX_SUS {
        return Err(Error::InvalidConfig(format!(
            "the simulator supports at most {MAX_SUS} SUs"
        )));
    }
    Ok(())
}

fn run_replication(cfg: &SystemConfig<f64>, sim: &SimConfig, rep: u32) -> Vec<Batch> {
    let mut run = Run::new(cfg, sim);
    let mut streams = SlotStreams::new(sim.seed, rep, cfg.su_count);
    let mut draws = SlotDraws::default();
    let measured = sim.slots - sim.warmup;
    let nb = u64::from(sim.batches);
    let mut batches = vec![Batch::default(); sim.batches as usize];
    for t in 0..sim.slots {
        streams.draw(&mut draws);
        let o = run.step(t, &draws);
        if t < sim.warmup {
            continue;
        }
        let s = t - sim.warmup;
        let b = &mut batches[(s * nb / measured) as usize];
        b.slots += 1;
        if !o.pu_active {
            b.idle += 1;
        }
        if let Some(delay) = o.departed {
            b.departures += 1;
            b.delay_sum += delay;
        }
        if o.su_success {
            b.su_success += 1;
            if !o.pu_active {
                b.su_bound += 1;
            }
        }
    }
    batches
}

/// Runs all replications (in parallel) and pools their batch means.
pub fn simulate(cfg: &SystemConfig<f64>, sim: &SimConfig) -> Result<SimReport> {
    check(cfg, sim)?;
    let per_rep: Vec<Vec<Batch>> = (0..sim.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, sim, rep))
        .collect();
    let batches: Vec<Batch> = per_rep.into_iter().flatten().collect();

    let slots: u64 = batches.iter().map(|b| b.slots).sum();
    let departures: u64 = batches.iter().map(|b| b.departures).sum();
    let rate = |f: fn(&Batch) -> u64| -> SimEstimate {
        let xs: Vec<f64> = batches
            .iter()
            .map(|b| f(b) as f64 / b.slots as f64)
            .collect();
        SimEstimate::from_samples(&xs, slots)
    };
    let delay_num: Vec<f64> = batches.iter().map(|b| b.delay_sum as f64).collect();
    let delay_den: Vec<f64> = batches.iter().map(|b| b.departures as f64).collect();
    Ok(SimReport {
        mu_p_hat: rate(|b| b.departures),
        idle_frac: rate(|b| b.idle),
        mu_s_hat: rate(|b| b.su_success),
        mu_s_bound_hat: rate(|b| b.su_bound),
        delay_hat: SimEstimate::from_ratio(&delay_num, &delay_den, departures),
        slots,
        departures,
    })
}

/// Per-slot trace of the first `limit` slots of replication 0: slot, queue
/// length, sensing verdicts, SU roles (`.` silent, `L` listening, `T` own
/// packet, `R` relaying), PU and tagged-SU outcomes, next phase and holders.
pub fn trace(cfg: &SystemConfig<f64>, sim: &SimConfig, limit: u64) -> Result<Vec<String>> {
    check(cfg, sim)?;
    let mut run = Run::new(cfg, sim);
    let mut streams = SlotStreams::new(sim.seed, 0, cfg.su_count);
    let mut draws = SlotDraws::default();
    let mut lines = Vec::new();
    for t in 0..limit.min(sim.slots) {
        streams.draw(&mut draws);
        let o = run.step(t, &draws);
        lines.push(run.trace_line(t, &o));
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cocrn_core::default_config;

    fn short() -> SimConfig {
        SimConfig {
            slots: 20_000,
            warmup: 100,
            seed: 11,
            replications: 2,
            ..SimConfig::default()
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let cfg = default_config::<f64>();
        let mut sim = short();
        sim.warmup = sim.slots;
        assert!(simulate(&cfg, &sim).is_err());
        assert!(simulate(&cfg.with_su_count(65), &short()).is_err());
    }

    #[test]
    fn trace_lines() {
        let cfg = default_config::<f64>().with_su_count(3);
        let lines = trace(&cfg, &short(), 5).unwrap();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("0 queue=1 sense="));
    }

    #[test]
    fn saturated_pu_is_never_idle() {
        let cfg = default_config::<f64>();
        let r = simulate(&cfg, &short()).unwrap();
        assert_eq!(r.idle_frac.mean, 0.0);
        assert_eq!(r.mu_s_bound_hat.mean, 0.0);
        assert!(r.delay_hat.mean >= 1.0);
    }
}
