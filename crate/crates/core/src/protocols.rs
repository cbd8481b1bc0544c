//! Branch gains of the cooperation protocols and their flow graphs.

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkprob::{LinkTable, MAX_BEST_RELAY_HOLDERS};
use crate::model::{Protocol, Sensing, SystemConfig};
use crate::scalar::{Field, Real};
use crate::sfg::{FlowGraph, FlowGraphBuilder};
use crate::specfun::binomial_pmf;

/// Probability that at least `⌈L/2⌉` of `L` independent detectors fire.
///
/// Generic over any numeric field so the tail can be evaluated exactly over
/// rationals.
pub fn fuse_majority<T: Num + Copy>(p: T, l: usize) -> T {
    let threshold = l.div_ceil(2);
    // Pascal's triangle row L, built by additions only.
    let mut row = vec![T::one()];
    for _ in 0..l {
        let mut next = vec![T::one(); row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    let q = T::one() - p;
    let pow = |x: T, k: usize| (0..k).fold(T::one(), |acc, _| acc * x);
    (threshold..=l).fold(T::zero(), |acc, n| acc + row[n] * pow(p, n) * pow(q, l - n))
}

/// Edge probabilities of the protocol flow graph. Vectors are indexed by
/// `n − 1` for `n = 1..=L` assisting SUs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchGains<T> {
    pub s_na: T,
    pub s_bar_na: T,
    pub s_ps: Vec<T>,
    pub s_a: Vec<T>,
    pub s_bar_a: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s_f: Option<T>,
}

impl<T: Field> BranchGains<T> {
    pub fn su_count(&self) -> usize {
        self.s_ps.len()
    }

    /// Conservation at every state and range of every entry.
    pub fn check(&self, tol: T) -> Result<()> {
        let l = self.s_ps.len();
        if self.s_a.len() != l || self.s_bar_a.len() != l {
            return Err(Error::GainInvariant("gain vectors differ in length".into()));
        }
        let in_range = |name: &str, v: T| {
            if v < -tol || v > T::one() + tol {
                Err(Error::GainInvariant(format!(
                    "{name} = {v:?} outside [0, 1]"
                )))
            } else {
                Ok(())
            }
        };
        in_range("s_na", self.s_na)?;
        in_range("s_bar_na", self.s_bar_na)?;
        let mut total = self.s_na + self.s_bar_na;
        for n in 0..l {
            in_range("s_ps", self.s_ps[n])?;
            in_range("s_a", self.s_a[n])?;
            in_range("s_bar_a", self.s_bar_a[n])?;
            total = total + self.s_ps[n];
            if (self.s_a[n] + self.s_bar_a[n] - T::one()).abs() > tol {
                return Err(Error::GainInvariant(format!(
                    "s_a + s_bar_a != 1 at n = {}",
                    n + 1
                )));
            }
        }
        if (total - T::one()).abs() > tol {
            return Err(Error::GainInvariant(format!(
                "s_na + s_bar_na + sum s_ps = {total:?}"
            )));
        }
        if let Some(f) = self.s_f {
            in_range("s_f", f)?;
        }
        Ok(())
    }

    /// `s̄_f = 1 − s_f`.
    pub fn s_bar_f(&self) -> Option<T> {
        self.s_f.map(|f| T::one() - f)
    }

    /// Fills `s̄_na` and `s̄_a` from conservation, given the other gains.
    pub fn from_parts(s_na: T, s_ps: Vec<T>, s_a: Vec<T>, s_f: Option<T>) -> Self {
        let mut s_bar_na = s_ps.iter().fold(T::one() - s_na, |acc, &v| acc - v);
        if s_bar_na < T::zero() && s_bar_na > -T::identity_tol() {
            s_bar_na = T::zero();
        }
        let s_bar_a = s_a.iter().map(|&a| T::one() - a).collect();
        Self {
            s_na,
            s_bar_na,
            s_ps,
            s_a,
            s_bar_a,
            s_f,
        }
    }
}

fn check_gains<T: Real>(g: BranchGains<T>) -> Result<BranchGains<T>> {
    g.check(T::lit(1e-12).max(T::epsilon() * T::lit(64.0)))?;
    Ok(g)
}

/// `e^(−σ_N²β/(P_P σ_PD²))`, the interference-free direct success probability.
fn direct_clear<T: Real>(cfg: &SystemConfig<T>) -> T {
    (-cfg.noise_power * cfg.beta / (cfg.pu_power * cfg.channels.sigma_pd2)).exp()
}

/// Probability that the PU packet gets through on the direct link alone.
pub fn s_na<T: Real>(cfg: &SystemConfig<T>) -> T {
    let b = cfg.interference_scale();
    let shrink = b / (T::one() + b);
    let l = cfg.su_count as i32;
    match cfg.sensing {
        Sensing::Individual => {
            direct_clear(cfg) * (T::one() - shrink * (T::one() - cfg.p_d) * cfg.q).powi(l)
        }
        Sensing::Cooperative => {
            let (pd, _) = cfg.effective_sensing();
            direct_clear(cfg) * (pd + (T::one() - pd) * (T::one() - shrink * cfg.q).powi(l))
        }
        Sensing::Perfect => direct_clear(cfg),
    }
}

fn check_holder_limit<T>(cfg: &SystemConfig<T>) -> Result<()> {
    if cfg.protocol.uses_best_relay() && cfg.su_count > MAX_BEST_RELAY_HOLDERS {
        return Err(Error::OutOfRange(format!(
            "best-relay protocols support at most {MAX_BEST_RELAY_HOLDERS} SUs"
        )));
    }
    Ok(())
}

fn assist_success<T: Real>(links: &LinkTable<T>, protocol: Protocol, n: usize, m: usize) -> T {
    if protocol.uses_best_relay() {
        links.ub(n, m)
    } else {
        links.ua(n, m)
    }
}

/// Individual-sensing gains. Perfect sensing is the special case
/// `p_d = 1` of these expressions.
pub fn branch_gains_is<T: Real>(
    cfg: &SystemConfig<T>,
    links: &LinkTable<T>,
) -> Result<BranchGains<T>> {
    check_holder_limit(cfg)?;
    let l = cfg.su_count;
    let pd = cfg.p_d;
    let miss = (T::one() - pd) * cfg.q;

    let detect = binomial_pmf(l, pd);
    let mut s_ps = vec![T::zero(); l];
    for (li, &p_l) in detect.iter().enumerate().skip(1) {
        if p_l == T::zero() {
            continue;
        }
        let interf = binomial_pmf(l - li, cfg.q);
        for (m, &p_m) in interf.iter().enumerate() {
            let fail = T::one() - links.ua(0, m);
            let recv = binomial_pmf(li, links.w(m));
            for n in 1..=li {
                s_ps[n - 1] = s_ps[n - 1] + p_l * p_m * fail * recv[n];
            }
        }
    }

    let protocol = cfg.protocol;
    let s_a = (1..=l)
        .map(|n| {
            binomial_pmf(l - n, miss)
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (m, &w)| {
                    acc + w * assist_success(links, protocol, n, m)
                })
        })
        .collect();
    let s_f = (protocol == Protocol::NonRecurrentBestRelay).then(|| {
        binomial_pmf(l - 1, miss)
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (m, &w)| acc + w * links.ub(1, m))
    });
    finish(cfg, s_na(cfg), s_ps, s_a, s_f)
}

/// Cooperative-sensing gains: the fused decision is shared, so either all
/// SUs listen or none do, and the cooperation phase is interference free.
pub fn branch_gains_cs<T: Real>(
    cfg: &SystemConfig<T>,
    links: &LinkTable<T>,
) -> Result<BranchGains<T>> {
    check_holder_limit(cfg)?;
    let l = cfg.su_count;
    let (pd, _) = cfg.effective_sensing();
    let fail = T::one() - links.ua(0, 0);
    let recv = binomial_pmf(l, links.w(0));
    let s_ps = (1..=l).map(|n| pd * fail * recv[n]).collect();
    let protocol = cfg.protocol;
    let s_a = (1..=l)
        .map(|n| assist_success(links, protocol, n, 0))
        .collect();
    let s_f = (protocol == Protocol::NonRecurrentBestRelay).then(|| links.ub(1, 0));
    finish(cfg, s_na(cfg), s_ps, s_a, s_f)
}

fn finish<T: Real>(
    cfg: &SystemConfig<T>,
    s_na: T,
    s_ps: Vec<T>,
    s_a: Vec<T>,
    s_f: Option<T>,
) -> Result<BranchGains<T>> {
    let l = cfg.su_count;
    let g = if cfg.protocol == Protocol::NoCooperation {
        BranchGains::from_parts(s_na, vec![T::zero(); l], vec![T::one(); l], None)
    } else {
        BranchGains::from_parts(s_na, s_ps, s_a, s_f)
    };
    check_gains(g)
}

/// Gains for the configured protocol and sensing mode.
pub fn branch_gains<T: Real>(cfg: &SystemConfig<T>) -> Result<BranchGains<T>> {
    let links = LinkTable::new(cfg)?;
    branch_gains_with(cfg, &links)
}

/// As [`branch_gains`] with precomputed link probabilities (which depend only
/// on powers, channels, `β` and `L`).
pub fn branch_gains_with<T: Real>(
    cfg: &SystemConfig<T>,
    links: &LinkTable<T>,
) -> Result<BranchGains<T>> {
    if links.su_count() != cfg.su_count {
        return Err(Error::InvalidConfig(
            "link table built for a different L".into(),
        ));
    }
    match cfg.sensing {
        Sensing::Individual => branch_gains_is(cfg, links),
        Sensing::Cooperative => branch_gains_cs(cfg, links),
        Sensing::Perfect => {
            let mut ideal = *cfg;
            ideal.sensing = Sensing::Individual;
            ideal.p_d = T::one();
            ideal.p_f = T::zero();
            branch_gains_is(&ideal, links)
        }
    }
}

/// Flow graph of one PU packet: `P`, assist states `A1..AL`, fresh-attempt
/// state `F` (non-recurrent best relay only) and `D`. Every edge costs one slot.
pub fn build_flow_graph<T: Field>(g: &BranchGains<T>, protocol: Protocol) -> Result<FlowGraph<T>> {
    let l = g.su_count();
    let mut b = FlowGraphBuilder::new();
    let p = b.node("P");
    let assist: Vec<_> = (1..=l).map(|n| b.node(&format!("A{n}"))).collect();
    let fresh = (protocol == Protocol::NonRecurrentBestRelay).then(|| b.node("F"));
    let d = b.node("D");

    b.edge(p, d, g.s_na, 1).edge(p, p, g.s_bar_na, 1);
    for (n, &a) in assist.iter().enumerate() {
        b.edge(p, a, g.s_ps[n], 1);
    }
    for (n, &a) in assist.iter().enumerate() {
        b.edge(a, d, g.s_a[n], 1);
        match fresh {
            Some(f) => b.edge(a, f, g.s_bar_a[n], 1),
            None => b.edge(a, a, g.s_bar_a[n], 1),
        };
    }
    if let Some(f) = fresh {
        let s_f = g.s_f.ok_or_else(|| {
            Error::GainInvariant("s_f missing for the fresh-attempt state".into())
        })?;
        b.edge(f, d, s_f, 1).edge(f, f, T::one() - s_f, 1);
    }
    b.build(p, d)
}

/// PU packet throughput from the reduced transfer function:
/// `(1 − s̄_na)/(1 + Σ s_ps,n/s_a,n)` when assist states retry in place, and
/// `(1 − s̄_na)/(1 + Σ s_ps,n + Σ s_ps,n s̄_a,n/s_f)` when failures fall
/// through to the fresh-attempt state.
pub fn pu_throughput_closed_form<T: Field>(g: &BranchGains<T>, protocol: Protocol) -> Result<T> {
    let num = T::one() - g.s_bar_na;
    let mut den = T::one();
    if protocol == Protocol::NonRecurrentBestRelay {
        let s_f = g.s_f.ok_or_else(|| {
            Error::GainInvariant("s_f missing for the fresh-attempt state".into())
        })?;
        for n in 0..g.su_count() {
            den = den + g.s_ps[n];
            let tail = g.s_ps[n] * g.s_bar_a[n];
            if tail.is_zero() {
                continue;
            }
            if s_f.is_zero() {
                return Err(Error::DeadAssistState("F".into()));
            }
            den = den + tail / s_f;
        }
    } else {
        for n in 0..g.su_count() {
            if g.s_ps[n].is_zero() {
                continue;
            }
            if g.s_a[n].is_zero() {
                return Err(Error::DeadAssistState(format!("A{}", n + 1)));
            }
            den = den + g.s_ps[n] / g.s_a[n];
        }
    }
    Ok(num / den)
}

/// Throughput without cooperation: every slot is an independent direct attempt.
pub fn pu_throughput_nc<T: Real>(cfg: &SystemConfig<T>) -> T {
    s_na(cfg)
}

/// PU packet throughput of the configured protocol.
pub fn pu_throughput<T: Real>(cfg: &SystemConfig<T>) -> Result<T> {
    let links = LinkTable::new(cfg)?;
    pu_throughput_with(cfg, &links)
}

pub fn pu_throughput_with<T: Real>(cfg: &SystemConfig<T>, links: &LinkTable<T>) -> Result<T> {
    if cfg.protocol == Protocol::NoCooperation {
        return Ok(pu_throughput_nc(cfg));
    }
    let g = branch_gains_with(cfg, links)?;
    pu_throughput_closed_form(&g, cfg.protocol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkprob::{su_reception_prob, success_ostbc};
    use crate::model::{db_to_linear, default_config};
    use crate::sfg::throughput;
    use num_rational::Ratio;

    fn base() -> SystemConfig<f64> {
        default_config()
    }

    #[test]
    fn majority_examples() {
        type Q = Ratio<i64>;
        assert_eq!(fuse_majority(Q::new(4, 5), 3), Q::new(112, 125));
        assert_eq!(fuse_majority(Q::new(1, 10), 3), Q::new(28, 1000));
        for l in [1, 3, 5, 7, 9] {
            assert_eq!(fuse_majority(Q::new(1, 2), l), Q::new(1, 2));
        }
        // Ties count as detections for even L.
        assert_eq!(fuse_majority(Q::new(1, 2), 2), Q::new(3, 4));
        assert!((fuse_majority(0.8_f64, 3) - 0.896).abs() < 1e-15);
    }

    #[test]
    fn single_su_s_na() {
        let cfg = base().with_su_count(1);
        let g = branch_gains(&cfg).unwrap();
        let expected =
            (-1.99526231496888_f64).exp() * (1.0 - 0.199526231496888 * 0.14 / 1.199526231496888);
        assert!((g.s_na - expected).abs() < 1e-12, "{}", g.s_na);
        assert!((g.s_na - 0.13281).abs() < 5e-6);
    }

    #[test]
    fn s_na_matches_binomial_mixture() {
        for l in [1, 4, 9] {
            let cfg = base().with_su_count(l);
            let links = LinkTable::new(&cfg).unwrap();
            let mix = binomial_pmf(l, (1.0 - cfg.p_d) * cfg.q)
                .iter()
                .enumerate()
                .fold(0.0, |acc, (m, w)| acc + w * links.ua(0, m));
            assert!((s_na(&cfg) - mix).abs() < 1e-14);
        }
    }

    #[test]
    fn perfect_detection_removes_interference() {
        let mut cfg = base();
        cfg.p_d = 1.0;
        let g = branch_gains(&cfg).unwrap();
        let clear = (-0.1f64 * 0.1 / (0.1 * db_to_linear(-13.0))).exp();
        assert!((g.s_na - clear).abs() < 1e-14);
        for n in 1..=cfg.su_count {
            let links = LinkTable::new(&cfg).unwrap();
            assert!((g.s_a[n - 1] - links.ua(n, 0)).abs() < 1e-14);
        }
    }

    #[test]
    fn silent_sus_collapse_to_m_zero() {
        let cfg = base().with_q(0.0).with_su_count(3);
        let g = branch_gains(&cfg).unwrap();
        let w0 = su_reception_prob(0, &cfg).unwrap();
        let u00 = success_ostbc(0, 0, &cfg).unwrap();
        let detect = binomial_pmf(3, cfg.p_d);
        for n in 1..=3 {
            let expected: f64 = (n..=3)
                .map(|l| detect[l] * (1.0 - u00) * binomial_pmf(l, w0)[n])
                .sum();
            assert!((g.s_ps[n - 1] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn cooperative_examples() {
        let cfg = base().with_su_count(2).with_sensing(Sensing::Cooperative);
        let g = branch_gains(&cfg).unwrap();
        let pd = fuse_majority(0.8, 2);
        let w0 = (-1.0f64).exp();
        let u00 = success_ostbc(0, 0, &cfg).unwrap();
        let expected = pd * (1.0 - u00) * 2.0 * w0 * (1.0 - w0);
        assert!((g.s_ps[0] - expected).abs() < 1e-14);

        let mut blind = cfg;
        blind.p_d_star = Some(0.0);
        let g = branch_gains(&blind).unwrap();
        assert!(g.s_ps.iter().all(|&v| v == 0.0));

        let mut sure = cfg.with_q(0.9);
        sure.p_d_star = Some(1.0);
        let a = branch_gains(&sure).unwrap().s_na;
        let b = branch_gains(&sure.with_q(0.1)).unwrap().s_na;
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn graph_shapes() {
        let cfg = base().with_su_count(2);
        let arc = branch_gains(&cfg).unwrap();
        let g = build_flow_graph(&arc, Protocol::AllRelay).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (4, 8));
        let cfg = cfg.with_protocol(Protocol::NonRecurrentBestRelay);
        let nr = branch_gains(&cfg).unwrap();
        let g = build_flow_graph(&nr, Protocol::NonRecurrentBestRelay).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (5, 10));
        let f = g.node_id("F").unwrap();
        assert!((g.out_mass(f) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_graph() {
        for protocol in Protocol::ALL {
            for sensing in Sensing::ALL {
                for l in [1, 3, 6] {
                    let cfg = base()
                        .with_su_count(l)
                        .with_protocol(protocol)
                        .with_sensing(sensing);
                    let g = branch_gains(&cfg).unwrap();
                    let closed = pu_throughput_closed_form(&g, protocol).unwrap();
                    let graph = throughput(&build_flow_graph(&g, protocol).unwrap()).unwrap();
                    assert!((closed - graph).abs() < 1e-12, "{protocol} {sensing} L={l}");
                }
            }
        }
    }

    #[test]
    fn degenerate_closed_forms() {
        let g = BranchGains::<f64>::from_parts(0.3, vec![0.0, 0.0], vec![0.5, 0.5], None);
        assert!((pu_throughput_closed_form(&g, Protocol::AllRelay).unwrap() - 0.3).abs() < 1e-15);
        let g = BranchGains::<f64>::from_parts(0.3, vec![0.1, 0.2], vec![1.0, 1.0], None);
        let mu = pu_throughput_closed_form(&g, Protocol::AllRelay).unwrap();
        assert!((mu - 0.6 / 1.3).abs() < 1e-15);
        let g = BranchGains::<f64>::from_parts(0.3, vec![0.1], vec![0.0], None);
        assert!(matches!(
            pu_throughput_closed_form(&g, Protocol::AllRelay),
            Err(Error::DeadAssistState(_))
        ));
    }

    #[test]
    fn nc_ignores_cooperation() {
        let cfg = base().with_protocol(Protocol::NoCooperation);
        let mu = pu_throughput(&cfg).unwrap();
        assert!((mu - s_na(&cfg)).abs() < 1e-15);
        let ideal = cfg.with_sensing(Sensing::Perfect);
        assert!((pu_throughput(&ideal).unwrap() - (-1.99526231496888_f64).exp()).abs() < 1e-12);
        assert!(
            (pu_throughput(&cfg.with_q(0.0)).unwrap() - pu_throughput(&ideal).unwrap()).abs()
                < 1e-15
        );
    }

    #[test]
    fn gains_serialize() {
        let cfg = base()
            .with_su_count(2)
            .with_protocol(Protocol::NonRecurrentBestRelay);
        let g = branch_gains(&cfg).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("\"s_f\""));
        let back: BranchGains<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }
}
