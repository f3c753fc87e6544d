use super::*;
use crate::regulation::{ChannelPlan, SubBandMapping};
use proptest::prelude::*;

const MINUTE: Micros = 60 * MICROS_PER_SEC;
const HOUR: Micros = 60 * MINUTE;

fn only(sf: SpreadingFactor) -> [f64; 6] {
    let mut p = [0.0; 6];
    p[sf.index()] = 1.0;
    p
}

fn single_channel(n_devices: u32, sf: SpreadingFactor, lambda: f64) -> ScenarioSpec {
    ScenarioSpec {
        plan: ChannelPlan::new(1, 125_000, 0.01, SubBandMapping::PerChannel).unwrap(),
        sf_probabilities: only(sf),
        ..ScenarioSpec::eu868(n_devices, 10, lambda)
    }
}

#[test]
fn lone_device_below_cap_delivers_everything() {
    let mut spec = ScenarioSpec::eu868(1, 10, 20.0);
    spec.sf_probabilities = only(SpreadingFactor::SF7);
    let m = run(&SimConfig::new(spec, 10 * HOUR, 3)).unwrap();
    let c = m.total.counters;
    assert!(c.generated > 150, "{c:?}");
    assert_eq!(c.attempted + c.duty_blocked, c.generated);
    assert!(c.duty_blocked * 20 < c.generated, "{c:?}");
    assert_eq!(c.delivered, c.attempted);
    assert!((m.per_node_packets_per_hour() - 20.0).abs() < 4.0);
    assert_eq!(m.gateway_airtime_us, 0);
}

#[test]
fn simultaneous_same_sf_frames_collide() {
    let spec = single_channel(2, SpreadingFactor::SF9, 0.0);
    let cfg = avalanche_preset(&spec, 10 * MICROS_PER_SEC, 0, 1);
    let m = run(&cfg).unwrap();
    assert_eq!(m.total.counters.attempted, 2);
    assert_eq!(m.total.counters.delivered, 0);
    assert_eq!(m.total.counters.collided, 2);
}

#[test]
fn distinct_sfs_never_collide() {
    let spec = ScenarioSpec::eu868(3, 10, 0.0);
    let mut cfg = avalanche_preset(&spec, 10 * MICROS_PER_SEC, 0, 1);
    cfg.device_sfs = Some(vec![SpreadingFactor::SF7, SpreadingFactor::SF8, SpreadingFactor::SF9]);
    let m = run(&cfg).unwrap();
    assert_eq!(m.total.counters.delivered, 3);
    assert_eq!(m.total.counters.collided, 0);
}

#[test]
fn unjittered_avalanche_collides_almost_everything() {
    let spec = ScenarioSpec::eu868(600, 10, 0.0);
    let m = run(&avalanche_preset(&spec, 5 * MICROS_PER_SEC, 0, 11)).unwrap();
    assert_eq!(m.total.counters.attempted, 600);
    assert!(m.total.collision_ratio() > 0.99, "{}", m.total.collision_ratio());
    assert!(m.drain_time_us > 0);
}

#[test]
fn jitter_reduces_avalanche_collisions() {
    let spec = ScenarioSpec::eu868(300, 10, 0.0);
    let ratio = |jitter_s: u64| -> f64 {
        let (collided, attempted) = (0..8u64)
            .map(|seed| run(&avalanche_preset(&spec, 5 * MICROS_PER_SEC, jitter_s * MICROS_PER_SEC, seed)).unwrap())
            .fold((0, 0), |acc, m| (acc.0 + m.total.counters.collided, acc.1 + m.total.counters.attempted));
        collided as f64 / attempted as f64
    };
    let ratios: Vec<f64> = [0, 5, 30, 120, 480].into_iter().map(ratio).collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
}

#[test]
fn no_acks_means_no_downlink() {
    let m = run(&SimConfig::new(ScenarioSpec::eu868(200, 10, 60.0), HOUR, 5)).unwrap();
    assert_eq!(m.gateway_airtime_us, 0);
    assert_eq!(m.gateway_utilization(), 0.0);
    assert_eq!(m.total.counters.ack_requested, 0);
}

#[test]
fn sparse_confirmed_traffic_acks_in_rx1() {
    let mut spec = ScenarioSpec::eu868(1, 10, 6.0);
    spec.sf_probabilities = only(SpreadingFactor::SF10);
    let cfg = SimConfig { ack_fraction: 1.0, ..SimConfig::new(spec, 20 * HOUR, 2) };
    let m = run(&cfg).unwrap();
    let c = m.total.counters;
    assert!(c.ack_requested > 50);
    assert_eq!(c.ack_rx1, c.ack_requested);
    assert_eq!(c.ack_rx2, 0);
    assert_eq!(c.ack_missed, 0);
    assert!(m.gateway_utilization() > 0.0);
}

#[test]
fn acknowledgements_drain_uplink_capacity() {
    let spec = ScenarioSpec::eu868(300, 10, 300.0);
    let off = run(&SimConfig::new(spec.clone(), HOUR, 8)).unwrap();
    let on = run(&SimConfig { ack_fraction: 1.0, ..SimConfig::new(spec, HOUR, 8) }).unwrap();
    assert!(on.total.counters.delivered < off.total.counters.delivered);
    assert!(on.total.counters.ack_missed > 0);
    assert!(on.total.counters.ack_rx2 > 0);
}

#[test]
fn half_duplex_gateway_loses_overlapping_uplinks() {
    let spec = ScenarioSpec::eu868(300, 10, 300.0);
    let base = SimConfig { ack_fraction: 1.0, ..SimConfig::new(spec, HOUR, 4) };
    let full = run(&base).unwrap();
    let mut cfg = base.clone();
    cfg.gateway.half_duplex = true;
    let half = run(&cfg).unwrap();
    assert_eq!(full.total.counters.gateway_lost, 0);
    assert!(half.total.counters.gateway_lost > 0);
    assert!(half.total.counters.is_conserved());
}

#[test]
fn trace_lists_every_event_and_passes_audit() {
    let spec = ScenarioSpec::eu868(100, 10, 400.0);
    let cfg = SimConfig { ack_fraction: 0.5, record_trace: true, ..SimConfig::new(spec, HOUR, 21) };
    let out = run_with_trace(&cfg).unwrap();
    let c = out.metrics.total.counters;
    let count = |kind: EventKind| out.trace.iter().filter(|r| r.kind == kind).count() as u64;
    assert_eq!(count(EventKind::Generate), c.generated);
    assert_eq!(count(EventKind::FrameStart), c.attempted);
    assert_eq!(count(EventKind::FrameEnd), c.attempted);
    assert_eq!(count(EventKind::AckEnd), c.ack_received());
    assert!(out.trace.windows(2).all(|w| w[0].time_us <= w[1].time_us));
    let summary = audit_trace(&out.trace, &cfg.audit_rules()).unwrap();
    assert!(summary.transmitters_checked > 100);

    let mut buf = Vec::new();
    write_trace(&mut buf, &out.trace[..3]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("#schema=1\ntime_us,kind,device,channel,sf,outcome\n"));
}

#[test]
fn audit_flags_overfull_hour() {
    let rules = AuditRules { uplink_sub_band: vec![0], uplink_duty_cycle: 0.01, downlink_sub_band: vec![(0, 0.01)] };
    let rec = |t: Micros| TraceRecord {
        time_us: t,
        kind: EventKind::FrameStart,
        device: 0,
        channel: Some(0),
        sf: SpreadingFactor::SF12,
        outcome: Outcome::Transmitted,
        airtime_us: 991_232,
    };
    let ok: Vec<_> = (0..40).map(|k| rec(k * 100 * MICROS_PER_SEC)).collect();
    assert!(audit_trace(&ok, &rules).is_ok());
    let bad: Vec<_> = (0..40).map(|k| rec(k * 10 * MICROS_PER_SEC)).collect();
    assert!(audit_trace(&bad, &rules).is_err());
}

#[test]
fn fair_access_limits_daily_airtime() {
    let mut spec = ScenarioSpec::eu868(1, 10, 200.0);
    spec.sf_probabilities = only(SpreadingFactor::SF12);
    let cfg = SimConfig { fair_access: Some(FairAccessPolicy::default()), ..SimConfig::new(spec, 10 * HOUR, 1) };
    let m = run(&cfg).unwrap();
    assert_eq!(m.total.counters.attempted, 30);
    assert!(m.total.counters.policy_blocked > 0);
    assert!(m.total.counters.is_conserved());
}

#[test]
fn shared_sub_band_is_stricter() {
    let mut spec = ScenarioSpec::eu868(1, 10, 5000.0);
    spec.sf_probabilities = only(SpreadingFactor::SF7);
    let per_channel = run(&SimConfig::new(spec.clone(), HOUR, 1)).unwrap();
    spec.plan = ChannelPlan::new(3, 125_000, 0.01, SubBandMapping::Shared).unwrap();
    let shared = run(&SimConfig::new(spec, HOUR, 1)).unwrap();
    let cap = 0.01 / 0.041216 * 3600.0;
    assert!(shared.total.counters.attempted as f64 <= cap + 1.0);
    assert!(per_channel.total.counters.attempted > 2 * shared.total.counters.attempted);
}

#[test]
fn largest_remainder_split() {
    let p = crate::geometry::CellPreset::PaperUrban.cell().probabilities;
    let counts = largest_remainder(1000, &p);
    assert_eq!(counts.iter().sum::<u32>(), 1000);
    for (c, pi) in counts.iter().zip(p) {
        assert!((f64::from(*c) - 1000.0 * pi).abs() < 1.0);
    }
    assert_eq!(largest_remainder(1, &p).iter().sum::<u32>(), 1);
    assert_eq!(largest_remainder(7, &only(SpreadingFactor::SF8)), [0, 7, 0, 0, 0, 0]);
}

#[test]
fn config_errors() {
    let spec = ScenarioSpec::eu868(10, 10, 1.0);
    assert!(run(&SimConfig::new(spec.clone(), MINUTE, 1)).is_err());
    assert!(run(&SimConfig { ack_fraction: 1.5, ..SimConfig::new(spec.clone(), HOUR, 1) }).is_err());
    assert!(run(&SimConfig { device_sfs: Some(vec![SpreadingFactor::SF7]), ..SimConfig::new(spec.clone(), HOUR, 1) })
        .is_err());
    let late = SimConfig {
        traffic: Traffic::Avalanche { trigger_us: HOUR, jitter_us: 0 },
        ..SimConfig::new(spec.clone(), HOUR, 1)
    };
    assert!(run(&late).is_err());
    assert!(run(&SimConfig { spec: spec.with_devices(0), ..SimConfig::new(spec, HOUR, 1) }).is_err());
}

#[test]
fn periodic_traffic_generates_on_schedule() {
    let spec = ScenarioSpec::eu868(50, 10, 0.0);
    let cfg = SimConfig { traffic: Traffic::Periodic { period_us: 10 * MINUTE }, ..SimConfig::new(spec, 2 * HOUR, 1) };
    let m = run(&cfg).unwrap();
    assert_eq!(m.total.counters.generated, 50 * 12);
}

#[test]
fn seeds_run_in_parallel_deterministically() {
    let cfg = SimConfig::new(ScenarioSpec::eu868(200, 10, 100.0), HOUR, 0);
    let a = run_seeds(&cfg, &[1, 2, 3]).unwrap();
    let b = run_seeds(&cfg, &[1, 2, 3]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[1], run(&cfg.with_seed(2)).unwrap());
    assert_ne!(a[0].total.counters, a[1].total.counters);
    assert_eq!(a[0].csv_rows(), b[0].csv_rows());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn randomized_runs_are_conserved_and_compliant(
        n in 1u32..150,
        lambda in 1.0f64..4000.0,
        payload in 1usize..=51,
        n_channels in 1usize..=4,
        shared in any::<bool>(),
        d in prop::sample::select(vec![0.001, 0.01, 0.1]),
        ack in prop::sample::select(vec![0.0, 0.3, 1.0]),
        half_duplex in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mapping = if shared { SubBandMapping::Shared } else { SubBandMapping::PerChannel };
        let spec = ScenarioSpec {
            plan: ChannelPlan::new(n_channels, 125_000, d, mapping).unwrap(),
            ..ScenarioSpec::eu868(n, payload, lambda)
        };
        let mut cfg = SimConfig { ack_fraction: ack, record_trace: true, ..SimConfig::new(spec, 90 * MINUTE, seed) };
        cfg.gateway.half_duplex = half_duplex;
        let out = run_with_trace(&cfg).unwrap();
        let c = out.metrics.total.counters;
        prop_assert!(c.is_conserved(), "{:?}", c);
        prop_assert_eq!(c.ack_requested, c.ack_received() + c.ack_missed);
        for g in &out.metrics.per_sf {
            prop_assert!(g.counters.is_conserved());
        }
        if let Err(v) = audit_trace(&out.trace, &cfg.audit_rules()) {
            prop_assert!(false, "{}", v);
        }
        if ack == 0.0 && !half_duplex {
            prop_assert_eq!(c.gateway_lost, 0);
            prop_assert_eq!(c.attempted, c.delivered + c.collided);
        }
        prop_assert_eq!(&out.metrics, &run(&cfg).unwrap());
    }

    #[test]
    fn collisions_only_within_an_sf(seed in any::<u64>()) {
        // One channel, every SF present: losses equal the per-SF overlap count
        // recomputed from the trace.
        let spec = ScenarioSpec {
            plan: ChannelPlan::new(1, 125_000, 0.01, SubBandMapping::PerChannel).unwrap(),
            ..ScenarioSpec::eu868(120, 10, 30.0)
        };
        let cfg = SimConfig { record_trace: true, ..SimConfig::new(spec, HOUR, seed) };
        let out = run_with_trace(&cfg).unwrap();
        let frames: Vec<_> = out.trace.iter().filter(|r| r.kind == EventKind::FrameStart).collect();
        let mut lost = 0u64;
        for (i, a) in frames.iter().enumerate() {
            let overlaps = frames.iter().enumerate().any(|(j, b)| {
                i != j && a.sf == b.sf && a.time_us < b.time_us + b.airtime_us && b.time_us < a.time_us + a.airtime_us
            });
            lost += u64::from(overlaps);
        }
        prop_assert_eq!(lost, out.metrics.total.counters.collided);
    }
}
