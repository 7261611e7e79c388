use proptest::prelude::*;
use spikewin_core::sim::{CoupledObserver, CoupledRun, Event, Side, Simulator};
use spikewin_core::trunc::{
    density_bound, simulate_coupled, truncated_rate, truncation_bound, truncation_constants, uniform_density_bound,
};
use spikewin_core::{Activation, Kernel, Model, NetworkBuilder, NetworkConfig, Refractory, Truncation, Unit, WindowState};

fn feedback(refractory: Refractory) -> NetworkConfig {
    NetworkBuilder::new(1.0)
        .neuron(Activation::Logistic { lower: 0.2, upper: 1.0, gain: 3.0, midpoint: 0.5 }, 0.0)
        .refractory(refractory)
        .synapse(Unit::Neuron(0), 0, 1.0, Kernel::Constant { height: 1.0 })
        .build()
        .unwrap()
}

#[test]
fn bound_reference_value() {
    let cfg = feedback(Refractory::None);
    let oracle = 2.0 * std::f64::consts::E / std::f64::consts::PI.sqrt() * 4f64.powf(-2.5) * 2f64.exp();
    let b = truncation_bound(&cfg, 4).unwrap();
    assert!((b - oracle).abs() < 1e-12);
    assert!((b - 0.708).abs() < 5e-4);
    assert!(truncation_bound(&cfg, 0).is_err());
}

#[test]
fn bound_constant_scales_with_neuron_count() {
    let act = Activation::Logistic { lower: 0.2, upper: 1.0, gain: 3.0, midpoint: 0.5 };
    let two = NetworkBuilder::new(1.0).neuron(act, 0.0).neuron(act, 0.0).build().unwrap();
    let one = NetworkBuilder::new(1.0).neuron(act, 0.0).build().unwrap();
    // Same exponent requires the same total rate: compare C / exp(theta * sum).
    let (c2, a2) = truncation_constants(&two);
    let (c1, a1) = truncation_constants(&one);
    assert_eq!(a1, a2);
    let strip = |c: f64, cfg: &NetworkConfig| c / (cfg.theta() * cfg.total_rate_bound()).exp();
    assert!((strip(c2, &two) / strip(c1, &one) - 2.0).abs() < 1e-14);
}

#[test]
fn density_bound_cases() {
    let cfg = NetworkBuilder::new(2.0)
        .source(0.7)
        .source(1.1)
        .neuron(Activation::Constant(1.4), 0.0)
        .build()
        .unwrap();
    let base = (-2.0f64 * 1.8).exp();
    assert!((density_bound(&cfg, &[0, 0], &[0]).unwrap() - base).abs() < 1e-15);
    let b = density_bound(&cfg, &[2, 1], &[3]).unwrap();
    assert!((b - 0.49 * 1.1 * 1.4f64.powi(3) * base).abs() < 1e-14);
    assert!(b <= uniform_density_bound(&cfg, 6));
    assert!(density_bound(&cfg, &[1], &[0]).is_err());
}

#[derive(Default)]
struct Recorder {
    a: Vec<Event>,
    b: Vec<Event>,
    intervals: Vec<(f64, f64)>,
}

impl CoupledObserver for Recorder {
    fn on_event(&mut self, side: Side, event: Event, _: &WindowState) {
        match side {
            Side::A => self.a.push(event),
            Side::B => self.b.push(event),
        }
    }
    fn on_mismatch(&mut self, s: f64, e: f64) {
        self.intervals.push((s, e));
    }
}

#[test]
fn coupled_logs_agree_until_saturation() {
    let cfg = feedback(Refractory::None);
    let full = Model::new(cfg.clone());
    for n in 1..=4 {
        let trunc = Model::new(cfg.clone()).with_truncation(Truncation::neurons(n)).unwrap();
        let a = Simulator::new(&full, cfg.empty_state()).unwrap();
        let b = Simulator::new(&trunc, cfg.empty_state()).unwrap();
        let mut rec = Recorder::default();
        CoupledRun::new(a, b, 77, 0).unwrap().run(400.0, false, &mut rec);
        // Brute force: the first time the full process holds n own spikes in the window.
        let sat = rec.a.iter().enumerate().find_map(|(k, e)| {
            let in_window = rec.a[..=k].iter().filter(|x| x.time > e.time - 1.0).count();
            (in_window >= n).then_some(e.time)
        });
        let sat = sat.expect("saturates within the horizon");
        let before = |v: &[Event]| v.iter().filter(|e| e.time <= sat).copied().collect::<Vec<_>>();
        assert_eq!(before(&rec.a), before(&rec.b));
        assert!(rec.intervals.first().is_none_or(|&(s, _)| s >= sat));
        let stats = simulate_coupled(&full, n, 400, 77).unwrap();
        assert_eq!(stats.first_saturation, Some(sat));
    }
}

#[test]
fn mismatch_never_survives_a_silent_window() {
    let cfg = feedback(Refractory::None);
    let full = Model::new(cfg.clone());
    let trunc = Model::new(cfg.clone()).with_truncation(Truncation::neurons(2)).unwrap();
    let mut rec = Recorder::default();
    let a = Simulator::new(&full, cfg.empty_state()).unwrap();
    let b = Simulator::new(&trunc, cfg.empty_state()).unwrap();
    CoupledRun::new(a, b, 5, 0).unwrap().run(2000.0, false, &mut rec);
    assert!(!rec.intervals.is_empty());
    let mut times: Vec<f64> = rec.a.iter().chain(&rec.b).map(|e| e.time).collect();
    times.sort_by(f64::total_cmp);
    for &(s, e) in &rec.intervals {
        let mut marks = vec![s];
        marks.extend(times.iter().copied().filter(|&t| t > s && t < e));
        marks.push(e);
        assert!(marks.windows(2).all(|w| w[1] - w[0] <= 1.0 + 1e-9), "interval ({s}, {e})");
    }
}

#[test]
fn unreachable_truncation_is_inactive() {
    // delta > theta / n: n window spikes are reachable but an (n+1)-th never is,
    // so the cut never removes a spike the full dynamics could fire.
    let cfg = feedback(Refractory::Hard { delta: 0.34 });
    let stats = simulate_coupled(&Model::new(cfg), 3, 2000, 1).unwrap();
    assert_eq!(stats.p_n, 0.0);
    assert!(stats.intervals.is_empty());
    assert!(stats.first_saturation.is_some());
}

#[test]
fn mismatch_fraction_decreases_and_respects_bound() {
    let cfg = feedback(Refractory::None);
    let m = Model::new(cfg.clone());
    let stats: Vec<_> = (1..=5).map(|n| simulate_coupled(&m, n, 20_000, 3).unwrap()).collect();
    for s in &stats {
        assert!((0.0..=1.0).contains(&s.p_n));
        assert!(s.mismatch <= s.theta * s.blocks as f64);
        assert!(s.merges <= s.splits && s.splits <= s.merges + 1);
        let sum: f64 = s.intervals.iter().map(|(a, b)| b - a).sum();
        assert!((sum - s.mismatch).abs() < 1e-9);
        assert!(s.p_n <= truncation_bound(&cfg, s.n).unwrap() + 3.0 * s.stderr);
    }
    for w in stats.windows(2) {
        assert!(w[1].p_n <= w[0].p_n + 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt());
    }
}

fn arb_state() -> impl Strategy<Value = WindowState> {
    prop::collection::btree_set(1u32..=1000, 0..6).prop_map(|s| {
        let ages = s.into_iter().rev().map(|k| k as f64 / 1000.0).collect();
        WindowState::from_ages(1.0, vec![], vec![ages]).unwrap()
    })
}

proptest! {
    #[test]
    fn truncated_rate_is_an_indicator_cut(s in arb_state(), n in 1usize..7) {
        let cfg = feedback(Refractory::Ramp { delta: 0.2 });
        let r = cfg.firing_rate(&s, cfg.weights(), 0).unwrap();
        let t = truncated_rate(&cfg, &s, cfg.weights(), 0, n).unwrap();
        if s.total_count() >= n {
            prop_assert_eq!(t, 0.0);
        } else {
            prop_assert_eq!(t, r);
        }
    }
}
