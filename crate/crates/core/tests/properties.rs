use lcuprep::eigen::{truncate_vector, TruncEntry, TruncatedState};
use lcuprep::io::{read_truncated_csv, write_truncated_csv};
use lcuprep::lattice::{build_thirring, ModelParams};
use lcuprep::lcu::{run_and_select, synth_prep, success_probability, LcuCircuits, PrepConvention, PrepSpec};
use lcuprep::observables::{cumulative_error, integrated_error, loschmidt_echo, EchoConfig, Model, Method, TimeSeries};
use lcuprep::pauli::PauliString;
use lcuprep::statevector::StateVector;
use lcuprep::trotter::{TrotterOrder, TrotterStep};
use lcuprep::lattice::Bitstring;
use lcuprep::C64;
use proptest::prelude::*;

fn pauli_string(n: usize) -> impl Strategy<Value = PauliString> {
    proptest::collection::vec(prop_oneof![Just('I'), Just('X'), Just('Y'), Just('Z')], n)
        .prop_map(|v| v.into_iter().collect::<String>().parse().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prep_reaches_target(amps in proptest::collection::vec(-1.0f64..1.0, 1..40), sqrt in any::<bool>()) {
        prop_assume!(amps.iter().any(|a| a.abs() > 1e-6));
        let n = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        let amps: Vec<f64> = amps.iter().map(|a| a / n).collect();
        let conv = if sqrt { PrepConvention::Sqrt } else { PrepConvention::Direct };
        let spec = PrepSpec::new(&amps, conv).unwrap();
        let mut s = StateVector::zero(spec.ancilla()).unwrap();
        s.apply_circuit(&synth_prep(&spec).unwrap()).unwrap();
        for (g, t) in s.amplitudes().iter().zip(spec.target_amplitudes()) {
            prop_assert!((g - C64::new(t, 0.0)).norm() < 1e-11);
        }
    }

    #[test]
    fn post_selection_matches_formula(amps in proptest::collection::vec(0.05f64..1.0, 2..9), flips in proptest::collection::vec(any::<bool>(), 9)) {
        let n = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        let entries: Vec<TruncEntry> = amps.iter().enumerate().map(|(i, a)| TruncEntry {
            bitstring: Bitstring::new(4, i as u64 + 3),
            amplitude: if flips[i] { -a / n } else { a / n },
        }).collect();
        let t = TruncatedState::from_entries(entries).unwrap();
        for conv in [PrepConvention::Direct, PrepConvention::Sqrt] {
            let lcu = LcuCircuits::new(&t, conv).unwrap();
            let (_, p) = run_and_select(&lcu.block_encoding().unwrap()).unwrap();
            prop_assert!((p - success_probability(&lcu.spec).unwrap()).abs() < 1e-10);
        }
        let lcu = LcuCircuits::new(&t, PrepConvention::Direct).unwrap();
        let (work, _) = run_and_select(&lcu.deterministic().unwrap()).unwrap();
        let target = StateVector::from_amplitudes(t.normalized_full_vector()).unwrap();
        prop_assert!(work.fidelity(&target) > 1.0 - 1e-10);
    }

    #[test]
    fn pauli_product_is_associative(a in pauli_string(5), b in pauli_string(5), c in pauli_string(5)) {
        let (p1, ab) = a.mul(&b);
        let (p2, ab_c) = ab.mul(&c);
        let (q1, bc) = b.mul(&c);
        let (q2, a_bc) = a.mul(&bc);
        prop_assert_eq!(ab_c, a_bc);
        prop_assert!((p1 * p2 - q1 * q2).norm() < 1e-15);
        let (x, _) = a.mul(&b);
        let (y, _) = b.mul(&a);
        let sign = if a.commutes_with(&b) { 1.0 } else { -1.0 };
        prop_assert!((x - y * sign).norm() < 1e-15);
    }

    #[test]
    fn trotter_step_is_unitary(m0 in 0.0f64..2.0, g in 0.0f64..1.0, dt in 0.01f64..0.5, second in any::<bool>()) {
        let h = build_thirring(&ModelParams::new(6, m0, g).unwrap()).unwrap();
        let order = if second { TrotterOrder::Second } else { TrotterOrder::First };
        let step = TrotterStep::new(&h, dt, order).unwrap();
        let mut s = StateVector::basis(6, 0b010101).unwrap();
        for _ in 0..5 {
            step.apply(&mut s, 0, None).unwrap();
        }
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        // number conserving: weight stays on three-particle states
        let w: f64 = s.amplitudes().iter().enumerate().filter(|(i, _)| i.count_ones() == 3).map(|(_, a)| a.norm_sqr()).sum();
        prop_assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_csv_round_trip(amps in proptest::collection::vec(-0.3f64..0.3, 1..12)) {
        prop_assume!(amps.iter().any(|a| *a != 0.0));
        let entries: Vec<TruncEntry> = amps.iter().enumerate().map(|(i, a)| TruncEntry {
            bitstring: Bitstring::new(6, i as u64),
            amplitude: *a,
        }).collect();
        let t = TruncatedState::from_entries(entries).unwrap();
        let mut buf = Vec::new();
        write_truncated_csv(&t, &mut buf).unwrap();
        prop_assert_eq!(read_truncated_csv(&buf[..]).unwrap(), t);
    }

    #[test]
    fn running_mean_of_monotone_gap_is_monotone(gaps in proptest::collection::vec(0.0f64..1.0, 2..50)) {
        let mut sorted = gaps.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let zero = TimeSeries::new(0.1, vec![C64::new(0.0, 0.0); n + 1], "a", Method::Exact).unwrap();
        let mut v = vec![C64::new(0.0, 0.0)];
        v.extend(sorted.iter().map(|g| C64::new(0.0, *g)));
        let b = TimeSeries::new(0.1, v, "b", Method::Exact).unwrap();
        let c = cumulative_error(&zero, &b).unwrap();
        prop_assert!(c.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        prop_assert!(integrated_error(&zero, &b).unwrap() == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn integrated_error_non_increasing_in_m(m0 in 0.2f64..2.0, g in 0.05f64..1.0) {
        let model = Model::new(ModelParams::new(6, m0, g).unwrap()).unwrap();
        let gs = model.ground().unwrap();
        let cfg = EchoConfig { steps: 200, ..EchoConfig::default() };
        let reference = loschmidt_echo(&model, &gs.amplitudes, &cfg).unwrap();
        let mut last = f64::INFINITY;
        for m in 1..=model.basis.dim() {
            let t = truncate_vector(&gs.amplitudes, &model.basis, m).unwrap();
            let e = integrated_error(&reference, &loschmidt_echo(&model, &t.normalized_vector(&model.basis).unwrap(), &cfg).unwrap()).unwrap();
            prop_assert!(e <= last + 1e-12, "M={} eps={} prev={}", m, e, last);
            last = e;
        }
        prop_assert!(last < 1e-12);
    }
}
