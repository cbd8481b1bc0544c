use cocrn_core::model::{Protocol, Sensing};
use cocrn_core::performance::{pu_delay_geo_g1, su_throughput_bound};
use cocrn_core::protocols::pu_throughput;
use cocrn_core::{default_config, SystemConfig};
use cocrn_sim::{simulate, trace, SimConfig};
use proptest::prelude::*;

fn l4() -> SystemConfig {
    default_config::<f64>().with_su_count(4).with_q(0.7)
}

fn run(slots: u64, seed: u64) -> SimConfig {
    SimConfig {
        slots,
        seed,
        ..SimConfig::default()
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let cfg = l4().with_protocol(Protocol::NonRecurrentBestRelay);
    let sim = run(50_000, 3);
    let a = serde_json::to_string(&simulate(&cfg, &sim).unwrap()).unwrap();
    let b = serde_json::to_string(&simulate(&cfg, &sim).unwrap()).unwrap();
    assert_eq!(a, b);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| simulate(&cfg, &sim).unwrap());
    assert_eq!(a, serde_json::to_string(&single).unwrap());
    let other = simulate(&cfg, &run(50_000, 4)).unwrap();
    assert_ne!(a, serde_json::to_string(&other).unwrap());
}

#[test]
fn direct_link_only() {
    let cfg = l4()
        .with_protocol(Protocol::NoCooperation)
        .with_sensing(Sensing::Perfect);
    let r = simulate(&cfg, &run(1_000_000, 7)).unwrap();
    assert!(r.mu_p_hat.within(0.13598, 3.0), "{:?}", r.mu_p_hat);
}

#[test]
fn error_free_sensing_modes_coincide() {
    let mut ideal = l4();
    ideal.p_d = 1.0;
    ideal.p_f = 0.0;
    let sim = run(40_000, 5);
    for protocol in Protocol::ALL {
        let base = ideal.with_protocol(protocol);
        let perfect = simulate(&base.with_sensing(Sensing::Perfect), &sim).unwrap();
        for sensing in [Sensing::Individual, Sensing::Cooperative] {
            let r = simulate(&base.with_sensing(sensing), &sim).unwrap();
            assert_eq!(r, perfect, "{protocol:?} {sensing:?}");
        }
    }
}

#[test]
fn saturated_service_rate_matches_analysis() {
    let sim = run(300_000, 9);
    for protocol in Protocol::ALL {
        for sensing in Sensing::ALL {
            let cfg = l4().with_protocol(protocol).with_sensing(sensing);
            let mu = pu_throughput(&cfg).unwrap();
            let r = simulate(&cfg, &sim).unwrap();
            assert!(
                r.mu_p_hat.within(mu, 4.0),
                "{protocol:?} {sensing:?}: {mu} vs {:?}",
                r.mu_p_hat
            );
        }
    }
}

#[test]
fn unsaturated_queue() {
    let cfg = l4().with_lambda(0.1);
    let sim = SimConfig {
        saturated_pu: false,
        ..run(500_000, 2)
    };
    let mu = pu_throughput(&cfg).unwrap();
    let r = simulate(&cfg, &sim).unwrap();
    assert!(r.idle_frac.within(1.0 - 0.1 / mu, 4.0), "{:?}", r.idle_frac);
    assert!(r.mu_p_hat.within(0.1, 4.0), "{:?}", r.mu_p_hat);
    let d = pu_delay_geo_g1(&cfg).unwrap();
    assert!(r.delay_hat.within(d, 4.0), "{d} vs {:?}", r.delay_hat);
}

#[test]
fn su_throughput_in_idle_slots_matches_bound() {
    let sim = SimConfig {
        saturated_pu: false,
        ..run(500_000, 8)
    };
    for sensing in [Sensing::Individual, Sensing::Cooperative] {
        let cfg = l4().with_lambda(0.1).with_q(0.3).with_sensing(sensing);
        let mu = pu_throughput(&cfg).unwrap();
        let bound = su_throughput_bound(&cfg, mu);
        let r = simulate(&cfg, &sim).unwrap();
        assert!(
            r.mu_s_bound_hat.within(bound, 4.0),
            "{sensing:?}: {bound} vs {:?}",
            r.mu_s_bound_hat
        );
        assert!(r.mu_s_hat.mean >= r.mu_s_bound_hat.mean);
    }
}

#[test]
fn late_joiners_do_not_hurt() {
    let cfg = l4().with_protocol(Protocol::AllRelay);
    let off = simulate(&cfg, &run(200_000, 6)).unwrap();
    let on = simulate(
        &cfg,
        &SimConfig {
            join_mid_packet: true,
            ..run(200_000, 6)
        },
    )
    .unwrap();
    assert!(on.mu_p_hat.mean >= off.mu_p_hat.mean - 3.0 * off.mu_p_hat.stderr);
}

#[test]
fn trace_shows_cooperation() {
    let cfg = l4();
    let lines = trace(&cfg, &run(10_000, 1), 200).unwrap();
    assert_eq!(lines.len(), 200);
    assert!(lines
        .iter()
        .any(|l| l.contains("roles=") && l.contains('R')));
    assert!(lines.iter().any(|l| l.contains("next=A holders=")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reports_are_consistent(
        l in 1usize..6,
        q in 0.0f64..1.0,
        lambda in 0.01f64..0.5,
        p in 0usize..4,
        s in 0usize..3,
        saturated in any::<bool>(),
        join in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let cfg = default_config::<f64>()
            .with_su_count(l)
            .with_q(q)
            .with_lambda(lambda)
            .with_protocol(Protocol::ALL[p])
            .with_sensing(Sensing::ALL[s]);
        let sim = SimConfig {
            slots: 3_000,
            warmup: 100,
            seed,
            saturated_pu: saturated,
            replications: 2,
            batches: 5,
            join_mid_packet: join,
        };
        let r = simulate(&cfg, &sim).unwrap();
        prop_assert_eq!(r.slots, 2 * 2_900);
        prop_assert!((0.0..=1.0).contains(&r.idle_frac.mean));
        prop_assert!(r.mu_s_bound_hat.mean <= r.mu_s_hat.mean);
        prop_assert!(r.mu_p_hat.mean + r.idle_frac.mean <= 1.0 + 1e-12);
        if saturated {
            prop_assert_eq!(r.idle_frac.mean, 0.0);
        }
        if r.departures > 0 {
            prop_assert!(r.delay_hat.mean >= 1.0);
        }
    }
}
