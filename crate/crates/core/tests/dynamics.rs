mod common;

use std::f64::consts::{PI, TAU};

use ddsense::dynamics::{
    faulty_pulse, larmor_angular, nuclear_signal, physical_pulse_params, propagate_plan, propagate_plan_direct, ErrorModel,
    TargetSpin,
};
use ddsense::modulation::{fourier_amp, predicted_signal, Component, SignalKind};
use ddsense::sequence::{build_named_unit, PhaseMode, ReadoutBasis, SequencePlan};
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn randomized(family: &str, tau: f64, tp: f64, m: usize) -> SequencePlan {
    let unit = build_named_unit(family, tau, tp, PI / tp).unwrap();
    SequencePlan::new(unit, m, PhaseMode::Randomized { seed: 5, realizations: 8 }, ReadoutBasis::X).unwrap()
}

/// Qubit-conditional nuclear evolution for δ-pulses: the qubit sees a ±1
/// square wave flipping at every pulse centre, the nucleus evolves under
/// `±½(A∥I_z + A⊥I_x) + ωI_z` on each branch.
fn square_wave_population(spin: &TargetSpin, tau: f64, pulses: usize) -> f64 {
    let branch = |s: f64| {
        let mut v = common::I2;
        let mut sign = s;
        let mut edges = vec![0.0, 0.5 * tau];
        for j in 1..pulses {
            edges.push((j as f64 + 0.5) * tau);
        }
        edges.push(pulses as f64 * tau);
        for w in edges.windows(2) {
            let n = [sign * spin.a_perp / 4.0, 0.0, sign * spin.a_par / 4.0 + spin.larmor / 2.0];
            v = common::mul(&common::pauli_exp(n, w[1] - w[0]), &v);
            sign = -sign;
        }
        v
    };
    let (vp, vm) = (branch(1.0), branch(-1.0));
    0.5 + 0.25 * common::trace(&common::mul(&vp, &common::dagger(&vm))).re
}

#[test]
fn instantaneous_limit_matches_square_wave_oracle() {
    let tau = 4e-7;
    let spins = [
        TargetSpin::new("13C", TAU * 5e3, TAU * 50e3, TAU * 0.4817e6).unwrap(),
        TargetSpin::new("1H", TAU * 30e3, TAU * 10e3, TAU * 1.25e6).unwrap(),
        TargetSpin::new("1H", TAU * 80e3, -TAU * 20e3, TAU * 1.9e6).unwrap(),
    ];
    for m in [1usize, 7, 40] {
        let unit = build_named_unit("XY8", tau, 4e-8, PI / 4e-8).unwrap().with_instantaneous_pulses();
        let plan = SequencePlan::new(unit, m, PhaseMode::Randomized { seed: 3, realizations: 1 }, ReadoutBasis::X).unwrap();
        let phases: Vec<f64> = (0..m).map(|i| (i as f64 * 2.3).rem_euclid(TAU)).collect();
        for spin in &spins {
            let got = nuclear_signal(&plan, &phases, &ErrorModel::ideal(), std::slice::from_ref(spin), false).unwrap();
            let want = square_wave_population(spin, tau, 8 * m);
            assert!((got - want).abs() < 1e-8, "M={m} {spin:?}: {got} vs {want}");
        }
    }
}

#[test]
fn independent_spins_approximate_joint_space() {
    let larmor = larmor_angular("1H", 450.0).unwrap();
    let tau = PI / larmor;
    let plan = randomized("XY8", tau, 4e-8, 50);
    let spins = [
        TargetSpin::new("1H", TAU * 2e3, TAU * 1e3, larmor).unwrap(),
        TargetSpin::new("1H", TAU * 1.5e3, TAU * 0.4e3, larmor * 1.0005).unwrap(),
    ];
    for phases in [plan.zero_phases(), (0..50).map(|i| (i as f64 * 0.77).rem_euclid(TAU)).collect()] {
        let joint = nuclear_signal(&plan, &phases, &ErrorModel::ideal(), &spins, false).unwrap();
        let product = nuclear_signal(&plan, &phases, &ErrorModel::ideal(), &spins, true).unwrap();
        assert!((joint - product).abs() < 1e-4, "{joint} vs {product}");
        // the spins do produce a visible dip
        assert!(joint < 0.999);
    }
}

#[test]
fn first_order_prediction_in_weak_regime() {
    let tau = 1e-6;
    let m = 20;
    let plan = SequencePlan::standard(build_named_unit("XY8", tau, 2e-7, PI / 2e-7).unwrap(), m).unwrap();
    // F_z of XY8 has period 2τ: harmonic k = 4M of the full sequence
    let k = 4 * m as i64;
    let f = fourier_amp(&plan, &plan.zero_phases(), k, Component::Z).unwrap();
    let larmor = TAU * k as f64 / plan.total_time();
    for a_perp in [TAU * 100.0, TAU * 250.0, TAU * 400.0] {
        assert!(a_perp * plan.total_time() * f.magnitude() <= 0.3);
        let spin = [TargetSpin::new("x", a_perp, 0.0, larmor).unwrap()];
        let exact = nuclear_signal(&plan, &plan.zero_phases(), &ErrorModel::ideal(), &spin, false).unwrap();
        let predicted = predicted_signal(&f, a_perp, m, plan.unit().duration(), SignalKind::Expected).unwrap().population;
        assert!((exact - predicted).abs() <= 0.05 * (1.0 - predicted).max(1e-6) + 1e-9, "{exact} vs {predicted}");
    }
}

#[test]
fn physical_pulse_round_trip() {
    let rabi = TAU * 32.8e6;
    for (amp, det) in [(0.05, 0.0), (-0.05, 0.05), (0.02, -0.03), (0.0, 0.05)] {
        let e = ErrorModel {
            amplitude_fraction: amp,
            detuning: det * rabi,
            ..Default::default()
        };
        for phi in [0.0, PI / 2.0, PI, 2.1] {
            let p = physical_pulse_params(&e, rabi, phi).unwrap();
            let unit = ddsense::sequence::PulseUnit::new(
                "one",
                PI / rabi,
                vec![ddsense::sequence::Pulse::rectangular(0.5 * PI / rabi, phi, rabi)],
            )
            .unwrap();
            let plan = SequencePlan::standard(unit, 1).unwrap();
            let direct = propagate_plan(&plan, &[0.0], &e, &[]).unwrap();
            let rebuilt = faulty_pulse(phi, p);
            for (a, b) in rebuilt.matrix.iter().zip(direct.matrix.iter()) {
                assert!((a + b).norm() < 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn conjugation_and_direct_paths_agree(
        fam in prop::sample::select(vec!["XY4", "XY8", "UR6", "CPMG-3"]),
        m in 1usize..6,
        amp in -0.1f64..0.1,
        det in -0.1f64..0.1,
        yoff in -0.2f64..0.2,
        a_perp in 0.0f64..1e5,
        a_par in -1e5f64..1e5,
        seed in 0u64..100,
    ) {
        let plan = randomized(fam, 5e-7, 1e-7, m);
        let phases = ddsense::sequence::phase_stream(seed, 0, 0, m);
        let e = ErrorModel {
            amplitude_fraction: amp,
            detuning: det * PI / 1e-7,
            y_phase_offset: yoff,
            ..Default::default()
        };
        let spin = [TargetSpin::new("x", a_perp, a_par, TAU * 1e6).unwrap()];
        let a = propagate_plan(&plan, &phases, &e, &spin).unwrap();
        let b = propagate_plan_direct(&plan, &phases, &e, &spin).unwrap();
        prop_assert!(a.unitarity_defect() < 1e-10);
        let gap = a.matrix.iter().zip(b.matrix.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-10, "{}", gap);
        let p = nuclear_signal(&plan, &phases, &e, &spin, true).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn minus_x_readout_is_complementary(m in 1usize..5, a_perp in 0.0f64..3e5) {
        let plan = randomized("XY8", 5e-7, 1e-7, m);
        let phases = ddsense::sequence::phase_stream(1, 2, 0, m);
        let spin = [TargetSpin::new("x", a_perp, 1e4, TAU * 1e6).unwrap()];
        let x = nuclear_signal(&plan, &phases, &ErrorModel::ideal(), &spin, true).unwrap();
        let mx = nuclear_signal(&plan.clone().with_readout(ReadoutBasis::MinusX), &phases, &ErrorModel::ideal(), &spin, true).unwrap();
        prop_assert!((x + mx - 1.0).abs() < 1e-12);
    }
}

#[test]
fn oracle_helpers_are_consistent() {
    // π rotation from the Pauli closed form equals the rotation helper
    let a = common::pauli_exp([0.5 * PI, 0.0, 0.0], 1.0);
    let b = common::rotation(0.0, PI);
    for i in 0..2 {
        for j in 0..2 {
            assert!((a[i][j] - b[i][j]).norm() < 1e-15);
        }
    }
    assert_eq!(common::trace(&common::I2), C::new(2.0, 0.0));
}
