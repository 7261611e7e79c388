use proptest::prelude::*;
use spikewin_core::{
    Activation, Error, Kernel, LagRule, NetworkBuilder, PlasticSynapse, PlasticityConfig, Refractory, Unit, WindowState,
};

fn state(sources: Vec<Vec<f64>>, neurons: Vec<Vec<f64>>) -> WindowState {
    WindowState::from_ages(1.0, sources, neurons).unwrap()
}

#[test]
fn influx_examples() {
    let cfg = NetworkBuilder::new(1.0).neuron(Activation::Constant(1.0), 0.5).build().unwrap();
    assert_eq!(cfg.synaptic_influx(&cfg.empty_state(), cfg.weights(), 0).unwrap(), 0.5);

    let cfg = NetworkBuilder::new(1.0)
        .source(1.0)
        .neuron(Activation::Constant(1.0), 0.0)
        .synapse(Unit::Source(0), 0, 2.0, Kernel::Constant { height: 1.0 })
        .build()
        .unwrap();
    let s = state(vec![vec![0.6]], vec![vec![]]);
    assert_eq!(cfg.synaptic_influx(&s, cfg.weights(), 0).unwrap(), 2.0);

    // Two own spikes with ages (0.8, 0.3) under eps(t) = t: eps(0.2) + eps(0.7).
    let cfg = NetworkBuilder::new(1.0)
        .neuron(Activation::Constant(1.0), 0.0)
        .synapse(Unit::Neuron(0), 0, 1.0, Kernel::Linear { slope: 1.0 })
        .build()
        .unwrap();
    let s = state(vec![], vec![vec![0.8, 0.3]]);
    let j = cfg.synaptic_influx(&s, cfg.weights(), 0).unwrap();
    let oracle = (1.0 - 0.8) + (1.0 - 0.3);
    assert!((j - oracle).abs() < 1e-15);
    assert!(matches!(cfg.synaptic_influx(&s, cfg.weights(), 3), Err(Error::UnitOutOfRange { .. })));
}

#[test]
fn rate_examples() {
    let act = Activation::Logistic { lower: 0.1, upper: 1.0, gain: 2.0, midpoint: 0.0 };
    let cfg = NetworkBuilder::new(1.0).neuron(act, 0.3).refractory(Refractory::Hard { delta: 0.2 }).build().unwrap();
    let w = cfg.weights();
    assert_eq!(cfg.firing_rate(&cfg.empty_state(), w, 0).unwrap(), act.eval(0.3));
    // Own last spike 0.1 ago, inside the refractory period.
    let s = state(vec![], vec![vec![0.9]]);
    assert_eq!(cfg.firing_rate(&s, w, 0).unwrap(), 0.0);

    let cfg = NetworkBuilder::new(1.0).neuron(act, 1e12).build().unwrap();
    assert!(cfg.firing_rate(&cfg.empty_state(), cfg.weights(), 0).unwrap() <= 1.0);
}

#[test]
fn drift_and_spike_examples() {
    let s = state(vec![], vec![vec![0.7, 0.2]]);
    let a = s.advanced(0.3).unwrap();
    assert_eq!(a.ages(Unit::Neuron(0)).unwrap().len(), 1);
    assert!((a.ages(Unit::Neuron(0)).unwrap()[0] - 0.4).abs() < 1e-15);
    assert_eq!(s.advanced(0.0).unwrap(), s);
    assert!(matches!(s.advanced(-1.0), Err(Error::NegativeStep(_))));

    let e = WindowState::empty(1.0, 0, 1).spiked(Unit::Neuron(0)).unwrap();
    assert_eq!(e.ages(Unit::Neuron(0)).unwrap(), &[1.0]);
    let s = state(vec![], vec![vec![0.4]]).spiked(Unit::Neuron(0)).unwrap();
    assert_eq!(s.ages(Unit::Neuron(0)).unwrap(), &[1.0, 0.4]);
}

#[test]
fn construction_rejects_bad_vectors() {
    assert!(WindowState::from_ages(1.0, vec![vec![0.3, 0.5]], vec![]).is_err());
    assert!(WindowState::from_ages(1.0, vec![vec![0.3, 0.3]], vec![]).is_err());
    assert!(WindowState::from_ages(1.0, vec![vec![1.2]], vec![]).is_err());
    assert!(WindowState::from_ages(1.0, vec![vec![0.0]], vec![]).is_err());
}

fn plastic_pair() -> (spikewin_core::NetworkConfig, PlasticityConfig) {
    let cfg = NetworkBuilder::new(1.0)
        .source(1.0)
        .neuron(Activation::Constant(1.0), 0.0)
        .neuron(Activation::Constant(1.0), 0.0)
        .synapse(Unit::Neuron(0), 1, 0.5, Kernel::Constant { height: 1.0 })
        .synapse(Unit::Source(0), 0, 0.5, Kernel::Constant { height: 1.0 })
        .build()
        .unwrap();
    let p = PlasticityConfig {
        window: 0.2,
        synapses: vec![
            PlasticSynapse {
                pre: Unit::Neuron(0),
                post: 1,
                levels: vec![0.5, 1.0, 1.5],
                initial: 1,
                rules: vec![
                    LagRule { from: 1, lower: -0.1, upper: 0.0, to: 2 },
                    LagRule { from: 2, lower: -0.1, upper: 0.0, to: 3 },
                    LagRule { from: 2, lower: 0.0, upper: 0.1, to: 1 },
                ],
            },
            PlasticSynapse {
                pre: Unit::Source(0),
                post: 0,
                levels: vec![0.25, 0.5],
                initial: 2,
                rules: vec![LagRule { from: 2, lower: 0.0, upper: 0.2, to: 1 }],
            },
        ],
    };
    p.validate(&cfg).unwrap();
    (cfg, p)
}

#[test]
fn stdp_examples() {
    let (_, p) = plastic_pair();
    let init = p.initial_state();
    // No counterpart spike in the window.
    let s = state(vec![vec![]], vec![vec![], vec![]]);
    assert_eq!(p.stdp_update(&init, &s, Unit::Neuron(1)), init);
    // Lag -0.5 is outside every rule.
    let s = state(vec![vec![]], vec![vec![0.5], vec![]]);
    assert_eq!(p.stdp_update(&init, &s, Unit::Neuron(1)), init);
    // Post fires 0.05 after pre: lag -0.05 in (-0.1, 0], level 1 -> 2.
    let s = state(vec![vec![]], vec![vec![0.95], vec![]]);
    assert_eq!(p.stdp_update(&init, &s, Unit::Neuron(1)).levels(), &[2, 2]);
}

#[test]
fn self_plastic_synapse_rejected() {
    let cfg = NetworkBuilder::new(1.0).neuron(Activation::Constant(1.0), 0.0).build().unwrap();
    let p = PlasticityConfig {
        window: 0.1,
        synapses: vec![PlasticSynapse { pre: Unit::Neuron(0), post: 0, levels: vec![1.0], initial: 1, rules: vec![] }],
    };
    assert!(p.validate(&cfg).is_err());
}

fn arb_ages(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(1u32..=1000, 0..max)
        .prop_map(|s| s.into_iter().rev().map(|k| k as f64 / 1000.0).collect())
}

fn arb_state() -> impl Strategy<Value = WindowState> {
    (prop::collection::vec(arb_ages(5), 2), prop::collection::vec(arb_ages(5), 2))
        .prop_map(|(s, n)| WindowState::from_ages(1.0, s, n).unwrap())
}

fn valid(s: &WindowState) -> bool {
    (0..s.num_units()).all(|u| {
        let a = s.slot_ages(u);
        a.iter().all(|&x| x > 0.0 && x <= 1.0) && a.windows(2).all(|w| w[0] > w[1])
    })
}

proptest! {
    #[test]
    fn drift_is_a_semigroup(s in arb_state(), a in 0.0..1.5f64, b in 0.0..1.5f64) {
        let two = s.advanced(a).unwrap().advanced(b).unwrap();
        let one = s.advanced(a + b).unwrap();
        // Same survivors; ages agree to rounding.
        prop_assert_eq!(two.counts(), one.counts());
        for u in 0..s.num_units() {
            for (x, y) in two.slot_ages(u).iter().zip(one.slot_ages(u)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
        // Brute force: a spike survives iff its age exceeds the elapsed time.
        for u in 0..s.num_units() {
            let alive = s.slot_ages(u).iter().filter(|&&x| x - (a + b) > 1e-9).count();
            let doomed = s.slot_ages(u).iter().filter(|&&x| (x - (a + b)).abs() <= 1e-9).count();
            prop_assert!(one.slot_ages(u).len() >= alive && one.slot_ages(u).len() <= alive + doomed);
        }
    }

    #[test]
    fn dynamics_keep_states_valid(s in arb_state(), dt in 0.0005..0.5f64, u in 0usize..4) {
        let unit = s.unit_at(u);
        let mut t = s.clone();
        t.advance(dt).unwrap();
        prop_assert!(valid(&t));
        let before = t.slot_ages(u).len();
        t.spike(unit).unwrap();
        prop_assert!(valid(&t));
        prop_assert_eq!(t.slot_ages(u).len(), before + 1);
        for v in (0..4).filter(|&v| v != u) {
            prop_assert_eq!(t.slot_ages(v).len(), s.advanced(dt).unwrap().slot_ages(v).len());
        }
    }

    #[test]
    fn rates_stay_within_bounds(s in arb_state()) {
        let act = Activation::Logistic { lower: 0.2, upper: 1.7, gain: 1.5, midpoint: 0.4 };
        let cfg = NetworkBuilder::new(1.0)
            .source(1.0).source(0.5)
            .neuron(act, -0.2).neuron(act, 0.1)
            .refractory(Refractory::Ramp { delta: 0.1 })
            .synapse(Unit::Source(0), 0, 1.0, Kernel::Bump { height: 1.0 })
            .synapse(Unit::Source(1), 1, 2.0, Kernel::Triangular { peak: 0.3, height: 1.0 })
            .synapse(Unit::Neuron(0), 1, 0.7, Kernel::Linear { slope: 1.0 })
            .synapse(Unit::Neuron(1), 0, 1.3, Kernel::Constant { height: 0.5 })
            .build().unwrap();
        for i in 0..2 {
            let r = cfg.firing_rate(&s, cfg.weights(), i).unwrap();
            prop_assert!((0.0..=1.7).contains(&r));
            let head = s.slot_ages(2 + i).first().copied();
            let refractory = head.is_some_and(|x| 1.0 - x <= 0.0);
            prop_assert!(r > 0.0 || refractory);
        }
    }

    #[test]
    fn stdp_leaves_other_synapses_alone(s in arb_state(), u in 0usize..3) {
        let (_, p) = plastic_pair();
        let s = WindowState::from_ages(1.0, vec![s.slot_ages(0).to_vec()], vec![s.slot_ages(2).to_vec(), s.slot_ages(3).to_vec()]).unwrap();
        let unit = s.unit_at(u);
        let next = p.stdp_update(&p.initial_state(), &s, unit);
        for (k, syn) in p.synapses.iter().enumerate() {
            let incident = unit == syn.pre || unit == Unit::Neuron(syn.post);
            if !incident {
                prop_assert_eq!(next.levels()[k], p.initial_state().levels()[k]);
            }
            prop_assert!((1..=syn.levels.len()).contains(&next.levels()[k]));
        }
    }
}
