//! The six-step controlled teleportation protocol.
//!
//! Alice holds the message `A_1..A_N` and channel halves `D_1..D_N`; Bob holds
//! `B_1..B_N`; controller `j` holds `C_j`. The channel is `N-1` identical EPR
//! pairs on `(D_i, B_i)` plus one GHZ state on `(D_N, B_N, C_1..C_M)`.
//!
//! A [`Session`] walks the steps in order and records every classical
//! broadcast and local correction in a [`Transcript`]. Sessions are `Clone`,
//! which is how the exhaustive enumerator branches.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{
    BellOutcome, MeasuredValue, MeasurementRecord, Pauli, StateVector, INPUT_TOLERANCE,
};
use crate::tables::{table_for, CorrectionTable, EprVariant, Parity, TableSource};

pub const DEFAULT_MAX_QUBITS: usize = 22;

/// Seed behind [`MessageState::example3x2`].
pub const EXAMPLE_SEED: u64 = 0x3_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Message qubit count, `N >= 1`.
    pub n: usize,
    /// Controller count, `M >= 0`.
    pub m: usize,
    pub epr_variant: EprVariant,
    pub table_source: TableSource,
    pub max_qubits: usize,
}

impl ProtocolConfig {
    pub fn new(n: usize, m: usize, epr_variant: EprVariant) -> Self {
        ProtocolConfig {
            n,
            m,
            epr_variant,
            table_source: TableSource::OracleDerived,
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }

    pub fn with_table(mut self, table_source: TableSource) -> Self {
        self.table_source = table_source;
        self
    }

    pub fn register_size(&self) -> usize {
        3 * self.n + self.m
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        let required = self.register_size();
        if required > self.max_qubits {
            return Err(Error::RegisterTooLarge {
                required,
                max: self.max_qubits,
            });
        }
        Ok(())
    }

    pub fn layout(&self) -> RegisterLayout {
        RegisterLayout::new(self.n, self.m)
    }

    /// The correction table this configuration selects.
    pub fn table(&self) -> CorrectionTable {
        table_for(self.epr_variant, self.table_source, self.m)
    }

    pub fn branch_count(&self) -> u64 {
        4u64.saturating_pow(self.n as u32)
            .saturating_mul(2u64.saturating_pow(self.m as u32))
    }
}

/// Qubit indices by role: `A` at `0..n`, `D` at `n..2n`, `B` at `2n..3n`,
/// `C` at `3n..3n+m`. Role accessors are zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RegisterLayout {
    pub n: usize,
    pub m: usize,
}

impl RegisterLayout {
    pub fn new(n: usize, m: usize) -> Self {
        RegisterLayout { n, m }
    }

    pub fn total(&self) -> usize {
        3 * self.n + self.m
    }

    pub fn a(&self, i: usize) -> usize {
        debug_assert!(i < self.n);
        i
    }

    pub fn d(&self, i: usize) -> usize {
        debug_assert!(i < self.n);
        self.n + i
    }

    pub fn b(&self, i: usize) -> usize {
        debug_assert!(i < self.n);
        2 * self.n + i
    }

    pub fn c(&self, j: usize) -> usize {
        debug_assert!(j < self.m);
        3 * self.n + j
    }

    pub fn message_qubits(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    pub fn bob_qubits(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.b(i)).collect()
    }

    pub fn controller_qubits(&self) -> Vec<usize> {
        (0..self.m).map(|j| self.c(j)).collect()
    }
}

/// The unknown `N`-qubit state Alice teleports. Any normalized state is
/// accepted, including basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageState(StateVector);

impl MessageState {
    /// Accepts amplitudes normalized within [`INPUT_TOLERANCE`] and
    /// renormalizes them.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        StateVector::normalized_within(amplitudes, INPUT_TOLERANCE).map(MessageState)
    }

    pub fn from_state(state: StateVector) -> Self {
        MessageState(state)
    }

    pub fn basis(n: usize, k: usize) -> Result<Self> {
        StateVector::basis(n, k).map(MessageState)
    }

    /// Full-support random state: real and imaginary parts uniform in
    /// `[-1, 1)`, then normalized.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let amps: Vec<Complex64> = (0..1usize << n)
                .map(|_| {
                    Complex64::new(
                        rng.random::<f64>() * 2.0 - 1.0,
                        rng.random::<f64>() * 2.0 - 1.0,
                    )
                })
                .collect();
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-3 {
                let amps = amps.into_iter().map(|a| a / norm).collect();
                return MessageState::new(amps).expect("normalized by construction");
            }
        }
    }

    pub fn seeded(n: usize, seed: u64) -> Self {
        MessageState::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Three-qubit message `x_1|000> + x_2|001> + ... + x_8|111>` with
    /// coefficients drawn from [`EXAMPLE_SEED`].
    pub fn example3x2() -> Self {
        MessageState::seeded(3, EXAMPLE_SEED)
    }

    pub fn n(&self) -> usize {
        self.0.num_qubits()
    }

    pub fn state(&self) -> &StateVector {
        &self.0
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.0.amplitudes()
    }
}

/// `N-1` pairs in `config.epr_variant` on `(D_i, B_i)` and the GHZ state on
/// `(D_N, B_N, C_1..C_M)`, over the channel qubits in layout order
/// `D_1..D_N, B_1..B_N, C_1..C_M`.
pub fn prepare_channel(config: &ProtocolConfig) -> Result<StateVector> {
    config.validate()?;
    let n = config.n;
    let pair = config.epr_variant.bell_state().state();

    let mut natural = StateVector::zero(0);
    for _ in 0..n - 1 {
        natural = natural.tensor(&pair);
    }
    natural = natural.tensor(&ghz_state(config.m + 2));

    // natural order: D_1 B_1 D_2 B_2 ... D_N B_N C_1 ... C_M
    let order: Vec<usize> = (0..n)
        .map(|i| 2 * i)
        .chain((0..n).map(|i| 2 * i + 1))
        .chain((0..config.m).map(|j| 2 * n + j))
        .collect();
    natural.permute_qubits(&order)
}

/// `(|0...0> + |1...1>)/sqrt2` on `k` qubits.
pub fn ghz_state(k: usize) -> StateVector {
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << k];
    amps[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amps[(1 << k) - 1] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    StateVector::from_amplitudes(amps).expect("GHZ state is normalized")
}

/// Message on the `A` qubits tensored with the channel on `D`, `B`, `C`.
pub fn compose_system(
    message: &MessageState,
    channel: &StateVector,
    layout: &RegisterLayout,
) -> Result<StateVector> {
    if message.n() != layout.n {
        return Err(Error::DimensionMismatch {
            expected: layout.n,
            actual: message.n(),
        });
    }
    let channel_qubits = layout.total() - layout.n;
    if channel.num_qubits() != channel_qubits {
        return Err(Error::DimensionMismatch {
            expected: channel_qubits,
            actual: channel.num_qubits(),
        });
    }
    // A occupies the leading indices, so the global order is a plain tensor.
    Ok(message.state().tensor(channel))
}

pub fn parity(bits: &[u8]) -> Parity {
    Parity::of_count(bits.iter().filter(|&&b| b == 1).count())
}

/// One complete assignment of every measurement outcome in a run.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Branch {
    /// Outcomes on `(A_i, D_i)`, `i = 1..N-1`.
    pub pairs: Vec<BellOutcome>,
    /// Outcome on `(A_N, D_N)`.
    pub ghz: BellOutcome,
    /// Controller announcements `c_1..c_M`.
    pub bits: Vec<u8>,
}

impl Branch {
    pub fn parity(&self) -> Parity {
        parity(&self.bits)
    }

    /// Compact form such as `phi+.psi-|phi-|01`.
    pub fn label(&self) -> String {
        let pairs: Vec<_> = self.pairs.iter().map(|o| o.label()).collect();
        let bits: String = self.bits.iter().map(|b| char::from(b'0' + b)).collect();
        format!("{}|{}|{}", pairs.join("."), self.ghz, bits)
    }
}

/// Where measurement outcomes come from.
pub enum OutcomeSource<'r> {
    Sampled(&'r mut dyn RngCore),
    Forced(Branch),
}

/// Outcome choice for a single measurement.
pub enum Choice<'r, T> {
    Forced(T),
    Sample(&'r mut dyn RngCore),
}

/// Whether step-three corrections follow each broadcast or are batched after
/// all of them. Paulis on distinct qubits commute, so both give the same state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CorrectionTiming {
    #[default]
    PerBroadcast,
    Batched,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    BellMeasurement {
        step: u8,
        pair: String,
        #[serde(flatten)]
        record: MeasurementRecord,
    },
    Correction {
        step: u8,
        party: String,
        target: String,
        qubit: usize,
        pauli: Pauli,
    },
    Hadamard {
        step: u8,
        party: String,
        qubit: usize,
    },
    ControllerMeasurement {
        step: u8,
        party: String,
        #[serde(flatten)]
        record: MeasurementRecord,
    },
    ParityAnnounced {
        step: u8,
        ones: usize,
        parity: Parity,
    },
    FinalCorrection {
        step: u8,
        target: String,
        qubit: usize,
        parity: Parity,
        pauli: Pauli,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Transcript {
    pub config: ProtocolConfig,
    pub table_provenance: TableSource,
    pub events: Vec<Event>,
    pub branch: Branch,
    pub parity: Parity,
    pub final_correction: Pauli,
    /// Product of the per-event probabilities.
    pub branch_probability: f64,
    /// Fidelity of Bob's extracted state against the message.
    pub fidelity: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub transcript: Transcript,
    pub final_state: StateVector,
    pub bob_state: StateVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Pairs,
    Ghz,
    Step4Corrections,
    Hadamard,
    Controllers,
    Final,
}

/// A protocol run in progress.
#[derive(Clone, Debug)]
pub struct Session {
    config: ProtocolConfig,
    layout: RegisterLayout,
    table: CorrectionTable,
    message: MessageState,
    state: StateVector,
    events: Vec<Event>,
    pairs: Vec<BellOutcome>,
    corrected: Vec<bool>,
    ghz: Option<BellOutcome>,
    bits: Vec<u8>,
    probability: f64,
    stage: Stage,
}

impl Session {
    /// Steps one and two: prepare the channel and compose it with the message.
    pub fn new(
        config: ProtocolConfig,
        message: &MessageState,
        table: CorrectionTable,
    ) -> Result<Self> {
        config.validate()?;
        if table.epr_variant != config.epr_variant {
            return Err(Error::InvalidConfig(format!(
                "table is for a {} channel, config uses {}",
                table.epr_variant, config.epr_variant
            )));
        }
        let layout = config.layout();
        let channel = prepare_channel(&config)?;
        let state = compose_system(message, &channel, &layout)?;
        let stage = if config.n > 1 {
            Stage::Pairs
        } else {
            Stage::Ghz
        };
        Ok(Session {
            config,
            layout,
            table,
            message: message.clone(),
            state,
            events: Vec::new(),
            pairs: Vec::with_capacity(config.n - 1),
            corrected: Vec::with_capacity(config.n - 1),
            ghz: None,
            bits: Vec::with_capacity(config.m),
            probability: 1.0,
            stage,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn branch_probability(&self) -> f64 {
        self.probability
    }

    pub fn pairs_measured(&self) -> usize {
        self.pairs.len()
    }

    fn expect_stage(&self, want: Stage, what: &str) -> Result<()> {
        if self.stage != want {
            return Err(Error::StepOrder(format!("{what} during {:?}", self.stage)));
        }
        Ok(())
    }

    fn bell(
        &mut self,
        a: usize,
        b: usize,
        choice: Choice<'_, BellOutcome>,
    ) -> Result<(BellOutcome, f64)> {
        let (outcome, state, p) = match choice {
            Choice::Forced(o) => {
                let (s, p) = self.state.bell_project(a, b, o)?.into_result()?;
                (o, s, p)
            }
            Choice::Sample(rng) => self.state.bell_sample(a, b, rng)?,
        };
        self.state = state;
        self.probability *= p;
        Ok((outcome, p))
    }

    fn correct(
        &mut self,
        step: u8,
        party: String,
        target: String,
        qubit: usize,
        pauli: Pauli,
    ) -> Result<()> {
        self.state.apply_pauli(qubit, pauli)?;
        self.events.push(Event::Correction {
            step,
            party,
            target,
            qubit,
            pauli,
        });
        Ok(())
    }

    /// Step three: Bell measurement on the next `(A_i, D_i)`, broadcast.
    pub fn measure_pair(&mut self, choice: Choice<'_, BellOutcome>) -> Result<BellOutcome> {
        self.expect_stage(Stage::Pairs, "pair measurement")?;
        let i = self.pairs.len();
        let (a, d) = (self.layout.a(i), self.layout.d(i));
        let (outcome, probability) = self.bell(a, d, choice)?;
        self.events.push(Event::BellMeasurement {
            step: 3,
            pair: format!("A_{0},D_{0}", i + 1),
            record: MeasurementRecord {
                outcome: MeasuredValue::Bell(outcome),
                probability,
                qubits: vec![a, d],
            },
        });
        self.pairs.push(outcome);
        self.corrected.push(false);
        if self.pairs.len() == self.config.n - 1 {
            self.stage = Stage::Ghz;
        }
        Ok(outcome)
    }

    /// Step three: Bob applies `U_i` on `B_i` for the announced outcome.
    pub fn correct_pair(&mut self, i: usize) -> Result<()> {
        let outcome = *self
            .pairs
            .get(i)
            .ok_or_else(|| Error::StepOrder(format!("pair {} not measured yet", i + 1)))?;
        if std::mem::replace(&mut self.corrected[i], true) {
            return Err(Error::StepOrder(format!(
                "pair {} already corrected",
                i + 1
            )));
        }
        let pauli = self.table.u_i[outcome];
        self.correct(
            3,
            "Bob".into(),
            format!("B_{}", i + 1),
            self.layout.b(i),
            pauli,
        )
    }

    /// Step four: Bell measurement on `(A_N, D_N)`, broadcast.
    pub fn measure_ghz_pair(&mut self, choice: Choice<'_, BellOutcome>) -> Result<BellOutcome> {
        self.expect_stage(Stage::Ghz, "GHZ pair measurement")?;
        if let Some(i) = self.corrected.iter().position(|c| !c) {
            return Err(Error::StepOrder(format!("pair {} is uncorrected", i + 1)));
        }
        let last = self.config.n - 1;
        let (a, d) = (self.layout.a(last), self.layout.d(last));
        let (outcome, probability) = self.bell(a, d, choice)?;
        self.events.push(Event::BellMeasurement {
            step: 4,
            pair: format!("A_{0},D_{0}", last + 1),
            record: MeasurementRecord {
                outcome: MeasuredValue::Bell(outcome),
                probability,
                qubits: vec![a, d],
            },
        });
        self.ghz = Some(outcome);
        self.stage = Stage::Step4Corrections;
        Ok(outcome)
    }

    /// Step four: `U_N` on `B_N`, then `U_Cj` on every controller.
    pub fn correct_step4(&mut self) -> Result<()> {
        self.expect_stage(Stage::Step4Corrections, "step-four corrections")?;
        let outcome = self.ghz.expect("set with the stage");
        let last = self.config.n - 1;
        let u_n = self.table.u_n[outcome];
        self.correct(
            4,
            "Bob".into(),
            format!("B_{}", last + 1),
            self.layout.b(last),
            u_n,
        )?;
        let u_c = self.table.u_c[outcome];
        for j in 0..self.config.m {
            let name = format!("C_{}", j + 1);
            self.correct(4, format!("Charlie_{}", j + 1), name, self.layout.c(j), u_c)?;
        }
        self.stage = Stage::Hadamard;
        Ok(())
    }

    /// Step five: every controller applies a Hadamard to their qubit.
    pub fn controllers_hadamard(&mut self) -> Result<()> {
        self.expect_stage(Stage::Hadamard, "Hadamard step")?;
        for j in 0..self.config.m {
            let qubit = self.layout.c(j);
            self.state.apply_hadamard(qubit)?;
            self.events.push(Event::Hadamard {
                step: 5,
                party: format!("Charlie_{}", j + 1),
                qubit,
            });
        }
        self.stage = if self.config.m > 0 {
            Stage::Controllers
        } else {
            Stage::Final
        };
        Ok(())
    }

    /// Step six: the next controller measures in `{|0>, |1>}` and announces.
    pub fn measure_controller(&mut self, choice: Choice<'_, u8>) -> Result<u8> {
        self.expect_stage(Stage::Controllers, "controller measurement")?;
        let j = self.bits.len();
        let qubit = self.layout.c(j);
        let (bit, state, probability) = match choice {
            Choice::Forced(bit) => {
                let (s, p) = self.state.z_project(qubit, bit)?.into_result()?;
                (bit, s, p)
            }
            Choice::Sample(rng) => self.state.z_sample(qubit, rng)?,
        };
        self.state = state;
        self.probability *= probability;
        self.events.push(Event::ControllerMeasurement {
            step: 6,
            party: format!("Charlie_{}", j + 1),
            record: MeasurementRecord {
                outcome: MeasuredValue::Bit(bit),
                probability,
                qubits: vec![qubit],
            },
        });
        self.bits.push(bit);
        if self.bits.len() == self.config.m {
            self.stage = Stage::Final;
        }
        Ok(bit)
    }

    /// Step six: Bob's parity-conditioned correction on `B_N`, then the
    /// fidelity of his extracted state against the message.
    pub fn finish(mut self) -> Result<RunOutcome> {
        self.expect_stage(Stage::Final, "final correction")?;
        let ghz = self.ghz.expect("measured before final stage");
        let parity = parity(&self.bits);
        let ones = self.bits.iter().filter(|&&b| b == 1).count();
        self.events.push(Event::ParityAnnounced {
            step: 6,
            ones,
            parity,
        });
        let last = self.config.n - 1;
        let pauli = self.table.final_correction(ghz, parity);
        let qubit = self.layout.b(last);
        self.state.apply_pauli(qubit, pauli)?;
        self.events.push(Event::FinalCorrection {
            step: 6,
            target: format!("B_{}", last + 1),
            qubit,
            parity,
            pauli,
        });

        let bob_state = self.state.extract_subsystem(&self.layout.bob_qubits())?;
        let fidelity = bob_state.fidelity(self.message.state())?;
        let transcript = Transcript {
            config: self.config,
            table_provenance: self.table.provenance,
            events: self.events,
            branch: Branch {
                pairs: self.pairs,
                ghz,
                bits: self.bits,
            },
            parity,
            final_correction: pauli,
            branch_probability: self.probability,
            fidelity,
        };
        Ok(RunOutcome {
            transcript,
            final_state: self.state,
            bob_state,
        })
    }
}

/// Runs all six steps with the configuration's table.
pub fn run(
    config: &ProtocolConfig,
    message: &MessageState,
    source: OutcomeSource<'_>,
) -> Result<Transcript> {
    execute(
        config,
        message,
        &config.table(),
        source,
        CorrectionTiming::default(),
    )
    .map(|o| o.transcript)
}

/// Runs all six steps with an explicit table and correction timing.
pub fn execute(
    config: &ProtocolConfig,
    message: &MessageState,
    table: &CorrectionTable,
    source: OutcomeSource<'_>,
    timing: CorrectionTiming,
) -> Result<RunOutcome> {
    let mut session = Session::new(*config, message, table.clone())?;
    let n = config.n;
    let m = config.m;
    let mut source = source;

    if let OutcomeSource::Forced(branch) = &source {
        if branch.pairs.len() != n - 1 || branch.bits.len() != m {
            return Err(Error::ForcedOutcomes(format!(
                "expected {} pair outcomes and {} bits, got {} and {}",
                n - 1,
                m,
                branch.pairs.len(),
                branch.bits.len()
            )));
        }
    }

    for i in 0..n - 1 {
        let choice = match &mut source {
            OutcomeSource::Forced(b) => Choice::Forced(b.pairs[i]),
            OutcomeSource::Sampled(rng) => Choice::Sample(&mut **rng),
        };
        session.measure_pair(choice)?;
        if timing == CorrectionTiming::PerBroadcast {
            session.correct_pair(i)?;
        }
    }
    if timing == CorrectionTiming::Batched {
        for i in 0..n - 1 {
            session.correct_pair(i)?;
        }
    }

    let choice = match &mut source {
        OutcomeSource::Forced(b) => Choice::Forced(b.ghz),
        OutcomeSource::Sampled(rng) => Choice::Sample(&mut **rng),
    };
    session.measure_ghz_pair(choice)?;
    session.correct_step4()?;
    session.controllers_hadamard()?;
    for j in 0..m {
        let choice = match &mut source {
            OutcomeSource::Forced(b) => Choice::Forced(b.bits[j]),
            OutcomeSource::Sampled(rng) => Choice::Sample(&mut **rng),
        };
        session.measure_controller(choice)?;
    }
    session.finish()
}
