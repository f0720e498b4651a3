//! Three message qubits, two controllers, outcomes (phi+, psi-, phi-).
//! Expected states are written out amplitude by amplitude on
//! `B_1 B_2 B_3 C_1 C_2`.

use mcqt::protocol::{compose_system, prepare_channel, Choice, Session};
use mcqt::tables::{derived_table, paper_table};
use mcqt::{BellOutcome, MessageState, Parity, ProtocolConfig, StateVector};
use num_complex::Complex64;

const TOL: f64 = 1e-10;

fn config() -> ProtocolConfig {
    ProtocolConfig::new(3, 2, mcqt::EprVariant::PhiPlus)
}

fn idx(b: &str, c: &str) -> usize {
    usize::from_str_radix(&format!("{b}{c}"), 2).unwrap()
}

/// `terms` are `(sign, x index 1..=8, B bits, C bits)`.
fn expected(x: &[Complex64], terms: &[(f64, usize, &str, &str)], scale: f64) -> StateVector {
    let mut amps = vec![Complex64::new(0.0, 0.0); 32];
    for &(sign, k, b, c) in terms {
        amps[idx(b, c)] += x[k - 1] * sign * scale;
    }
    StateVector::from_amplitudes(amps).unwrap()
}

fn bob_and_controllers(state: &StateVector, cfg: &ProtocolConfig) -> StateVector {
    let l = cfg.layout();
    let mut keep = l.bob_qubits();
    keep.extend(l.controller_qubits());
    state.extract_subsystem(&keep).unwrap()
}

fn assert_close(actual: &StateVector, want: &StateVector) {
    let d = actual.phase_aligned_distance(want).expect("states overlap");
    assert!(d <= TOL, "element-wise distance {d}");
}

fn session_after_step4(msg: &MessageState) -> Session {
    let mut s = Session::new(
        config(),
        msg,
        derived_table(mcqt::EprVariant::PhiPlus, Parity::Even),
    )
    .unwrap();
    s.measure_pair(Choice::Forced(BellOutcome::PhiPlus))
        .unwrap();
    s.correct_pair(0).unwrap();
    s.measure_pair(Choice::Forced(BellOutcome::PsiMinus))
        .unwrap();
    s.correct_pair(1).unwrap();
    s.measure_ghz_pair(Choice::Forced(BellOutcome::PhiMinus))
        .unwrap();
    s.correct_step4().unwrap();
    s
}

#[test]
fn state_after_alices_measurements() {
    let cfg = config();
    let msg = MessageState::example3x2();
    let x = msg.amplitudes();
    let l = cfg.layout();
    let mut state = compose_system(&msg, &prepare_channel(&cfg).unwrap(), &l).unwrap();
    for (i, o) in [
        BellOutcome::PhiPlus,
        BellOutcome::PsiMinus,
        BellOutcome::PhiMinus,
    ]
    .into_iter()
    .enumerate()
    {
        state = state
            .bell_project(l.a(i), l.d(i), o)
            .unwrap()
            .into_result()
            .unwrap()
            .0;
    }
    let want = expected(
        x,
        &[
            (1.0, 1, "010", "00"),
            (-1.0, 3, "000", "00"),
            (1.0, 5, "110", "00"),
            (-1.0, 7, "100", "00"),
            (-1.0, 2, "011", "11"),
            (1.0, 4, "001", "11"),
            (-1.0, 6, "111", "11"),
            (1.0, 8, "101", "11"),
        ],
        1.0,
    );
    assert_close(&bob_and_controllers(&state, &cfg), &want);
}

#[test]
fn state_after_bobs_corrections() {
    let cfg = config();
    let msg = MessageState::example3x2();
    let s = session_after_step4(&msg);
    let want = expected(
        msg.amplitudes(),
        &[
            (1.0, 1, "000", "00"),
            (1.0, 3, "010", "00"),
            (1.0, 5, "100", "00"),
            (1.0, 7, "110", "00"),
            (1.0, 2, "001", "11"),
            (1.0, 4, "011", "11"),
            (1.0, 6, "101", "11"),
            (1.0, 8, "111", "11"),
        ],
        1.0,
    );
    assert_close(&bob_and_controllers(s.state(), &cfg), &want);
}

#[test]
fn state_after_hadamards() {
    let cfg = config();
    let msg = MessageState::example3x2();
    let mut s = session_after_step4(&msg);
    s.controllers_hadamard().unwrap();
    let mut terms = Vec::new();
    let bits = ["000", "001", "010", "011", "100", "101", "110", "111"];
    for (k, b) in bits.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for c in ["00", "11"] {
            terms.push((1.0, k + 1, *b, c));
        }
        for c in ["01", "10"] {
            terms.push((sign, k + 1, *b, c));
        }
    }
    let want = expected(msg.amplitudes(), &terms, 0.5);
    assert_close(&bob_and_controllers(s.state(), &cfg), &want);
}

#[test]
fn both_controller_branches_recover_the_message() {
    let cfg = config();
    let msg = MessageState::example3x2();
    let bob = cfg.layout().bob_qubits();
    let mut z_on_last = msg.state().clone();
    z_on_last.apply_pauli(2, mcqt::Pauli::Z).unwrap();

    for (bits, before) in [([0u8, 0], msg.state()), ([0, 1], &z_on_last)] {
        let mut s = session_after_step4(&msg);
        s.controllers_hadamard().unwrap();
        for b in bits {
            s.measure_controller(Choice::Forced(b)).unwrap();
        }
        let raw = s.state().extract_subsystem(&bob).unwrap();
        assert_close(&raw, before);

        let out = s.finish().unwrap();
        assert_close(&out.bob_state, msg.state());
        assert!(out.transcript.fidelity >= 1.0 - TOL);
        assert!((out.transcript.branch_probability - 1.0 / 256.0).abs() < TOL);
    }
}

#[test]
fn printed_parity_rule_fails_both_controller_branches() {
    let msg = MessageState::example3x2();
    for bits in [[0u8, 0], [0, 1]] {
        let mut s = Session::new(config(), &msg, paper_table(mcqt::EprVariant::PhiPlus)).unwrap();
        s.measure_pair(Choice::Forced(BellOutcome::PhiPlus))
            .unwrap();
        s.correct_pair(0).unwrap();
        s.measure_pair(Choice::Forced(BellOutcome::PsiMinus))
            .unwrap();
        s.correct_pair(1).unwrap();
        s.measure_ghz_pair(Choice::Forced(BellOutcome::PhiMinus))
            .unwrap();
        s.correct_step4().unwrap();
        s.controllers_hadamard().unwrap();
        for b in bits {
            s.measure_controller(Choice::Forced(b)).unwrap();
        }
        assert!(s.finish().unwrap().transcript.fidelity < 1.0 - 1e-3);
    }
}
