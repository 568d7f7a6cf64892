//! The four-site, four-term loading example worked end to end.

use lcuprep::circuit::{Circuit, Control, Gate, RegisterLayout};
use lcuprep::eigen::truncate;
use lcuprep::lattice::ModelParams;
use lcuprep::lcu::{count_prep_rotations, tree_angles, LcuCircuits, PrepConvention, PrepSpec};
use lcuprep::observables::Model;
use lcuprep::statevector::StateVector;
use lcuprep::C64;

fn ancilla_target(conv: PrepConvention) -> Vec<f64> {
    let model = Model::new(ModelParams::new(4, 1.0, 0.1).unwrap()).unwrap();
    let gs = model.ground().unwrap();
    let t = truncate(&gs, &model.basis, 4).unwrap();
    PrepSpec::from_truncated(&t, conv).unwrap().target_amplitudes()
}

#[test]
fn root_angle_of_direct_prep() {
    let angles = tree_angles(&ancilla_target(PrepConvention::Direct));
    assert!((angles[0][0] - 0.57081).abs() < 5e-5, "{}", angles[0][0]);
}

/// Two-ancilla Prep template: RY(t1) on a0, RY(t2) on a1, X on a1 when a0 is
/// |0>, then RY(-t3) on a1.
#[test]
fn quoted_rotation_angles_prepare_direct_ancilla_state() {
    let (t1, t2, t3) = (0.57081, 2.0663, 0.62978);
    let mut c = Circuit::new(RegisterLayout::new(2, 0));
    c.push(Gate::ry(0, t1)).unwrap();
    c.push(Gate::ry(1, t2)).unwrap();
    c.push(Gate::mcx(vec![Control::zero(0)], 1)).unwrap();
    c.push(Gate::ry(1, -t3)).unwrap();
    let mut s = StateVector::zero(2).unwrap();
    s.apply_circuit(&c).unwrap();
    let direct = StateVector::from_amplitudes(
        ancilla_target(PrepConvention::Direct).into_iter().map(|a| C64::new(a, 0.0)).collect(),
    )
    .unwrap();
    let sqrt = StateVector::from_amplitudes(
        ancilla_target(PrepConvention::Sqrt).into_iter().map(|a| C64::new(a, 0.0)).collect(),
    )
    .unwrap();
    let fd = s.fidelity(&direct);
    let fs = s.fidelity(&sqrt);
    assert!(fd > 1.0 - 1e-8, "direct fidelity {fd}");
    assert!(fs < fd);
}

#[test]
fn emitted_circuits_stay_within_budget() {
    let model = Model::new(ModelParams::new(4, 1.0, 0.1).unwrap()).unwrap();
    let gs = model.ground().unwrap();
    let t = truncate(&gs, &model.basis, 4).unwrap();
    let lcu = LcuCircuits::new(&t, PrepConvention::Direct).unwrap();
    assert_eq!(lcu.layout().ancilla, 2);
    assert_eq!(lcu.layout().work, 4);
    assert!(lcu.rotation_count() as u64 <= count_prep_rotations(4));
    let text = lcu.deterministic().unwrap().to_text();
    assert!(text.starts_with("# layout ancilla=2 work=4 test=0\n"));
    assert_eq!(Circuit::from_text(&text).unwrap(), lcu.deterministic().unwrap());
}
