//! Dense pure-state simulation over a fixed qubit register.
//!
//! Amplitudes are stored big-endian: qubit 0 is the most significant bit of
//! the basis index, so `|q0 q1 ... q(n-1)>` reads left to right exactly as a
//! ket is written. Measurements never shrink the register; measured qubits
//! stay in place, collapsed onto the observed outcome.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for algebraic identities (norms, probability sums, fidelities).
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Tolerance for the purity check in [`StateVector::extract_subsystem`].
pub const PURITY_TOLERANCE: f64 = 1e-8;
/// Tolerance applied to externally supplied amplitudes before renormalizing.
pub const INPUT_TOLERANCE: f64 = 1e-6;
/// Branch weights at or below this are treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Single-qubit correction. `IY` is `i*sigma_y`, the real matrix `[[0,1],[-1,0]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    #[serde(rename = "I")]
    Identity,
    #[serde(rename = "X")]
    X,
    #[serde(rename = "iY")]
    IY,
    #[serde(rename = "Z")]
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::Identity, Pauli::X, Pauli::IY, Pauli::Z];

    pub fn matrix(self) -> [[i8; 2]; 2] {
        match self {
            Pauli::Identity => [[1, 0], [0, 1]],
            Pauli::X => [[0, 1], [1, 0]],
            Pauli::IY => [[0, 1], [-1, 0]],
            Pauli::Z => [[1, 0], [0, -1]],
        }
    }

    pub fn from_matrix(m: [[i8; 2]; 2]) -> Option<Pauli> {
        Pauli::ALL.into_iter().find(|p| p.matrix() == m)
    }

    /// Identifies `m` as `sign * P`, if it is one.
    pub fn from_signed_matrix(m: [[i8; 2]; 2]) -> Option<(Pauli, i8)> {
        if let Some(p) = Pauli::from_matrix(m) {
            return Some((p, 1));
        }
        let neg = [[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]];
        Pauli::from_matrix(neg).map(|p| (p, -1))
    }

    /// Matrix product `self * rhs`, i.e. apply `rhs` first. The real Pauli
    /// group is closed, so the result is always `sign * P`.
    pub fn product(self, rhs: Pauli) -> (Pauli, i8) {
        let a = self.matrix();
        let b = rhs.matrix();
        let mut m = [[0i8; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Pauli::from_signed_matrix(m).expect("real Pauli group is closed under products")
    }

    pub fn label(self) -> &'static str {
        match self {
            Pauli::Identity => "I",
            Pauli::X => "X",
            Pauli::IY => "iY",
            Pauli::Z => "Z",
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The four Bell states. For a measured pair `(a, b)`, `a` is the more
/// significant qubit: `PhiPlus = (|00>+|11>)/sqrt2`, `PsiMinus = (|01>-|10>)/sqrt2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellOutcome {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Amplitudes on `[|00>, |01>, |10>, |11>]`.
    pub fn coefficients(self) -> [f64; 4] {
        let h = FRAC_1_SQRT_2;
        match self {
            BellOutcome::PhiPlus => [h, 0.0, 0.0, h],
            BellOutcome::PhiMinus => [h, 0.0, 0.0, -h],
            BellOutcome::PsiPlus => [0.0, h, h, 0.0],
            BellOutcome::PsiMinus => [0.0, h, -h, 0.0],
        }
    }

    pub fn state(self) -> StateVector {
        StateVector {
            num_qubits: 2,
            amps: self
                .coefficients()
                .iter()
                .map(|&c| Complex64::new(c, 0.0))
                .collect(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BellOutcome::PhiPlus => "phi+",
            BellOutcome::PhiMinus => "phi-",
            BellOutcome::PsiPlus => "psi+",
            BellOutcome::PsiMinus => "psi-",
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BellOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BellOutcome::ALL
            .into_iter()
            .find(|o| o.label() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown Bell state '{s}'")))
    }
}

/// Value observed by a measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasuredValue {
    Bell(BellOutcome),
    Bit(u8),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub outcome: MeasuredValue,
    /// Branch weight before renormalization.
    pub probability: f64,
    pub qubits: Vec<usize>,
}

/// Result of projecting onto a chosen outcome.
#[derive(Clone, Debug)]
pub enum Projection {
    Collapsed {
        state: StateVector,
        probability: f64,
    },
    /// The outcome has zero weight; enumeration skips these.
    Impossible,
}

impl Projection {
    pub fn is_impossible(&self) -> bool {
        matches!(self, Projection::Impossible)
    }

    pub fn into_result(self) -> Result<(StateVector, f64)> {
        match self {
            Projection::Collapsed { state, probability } => Ok((state, probability)),
            Projection::Impossible => Err(Error::ImpossibleBranch),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(num_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[0] = ONE;
        StateVector { num_qubits, amps }
    }

    pub fn basis(num_qubits: usize, basis_index: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if basis_index >= dim {
            return Err(Error::BasisIndexOutOfRange {
                num_qubits,
                index: basis_index,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[basis_index] = ONE;
        Ok(StateVector { num_qubits, amps })
    }

    /// Accepts amplitudes that are normalized within [`NORM_TOLERANCE`].
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        Self::normalized_within(amps, NORM_TOLERANCE)
    }

    /// Accepts amplitudes whose squared norm is within `tolerance` of one and
    /// renormalizes them exactly.
    pub fn normalized_within(amps: Vec<Complex64>, tolerance: f64) -> Result<Self> {
        let num_qubits = qubits_for_len(amps.len())?;
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > tolerance {
            return Err(Error::NotNormalized { norm_sqr });
        }
        let scale = norm_sqr.sqrt().recip();
        Ok(StateVector {
            num_qubits,
            amps: amps.into_iter().map(|a| a * scale).collect(),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(Error::QubitOutOfRange {
                num_qubits: self.num_qubits,
                qubit,
            });
        }
        Ok(())
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::DuplicateQubit(a));
        }
        Ok(())
    }

    /// `self ⊗ other`; `self` supplies the more significant qubits.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        StateVector {
            num_qubits: self.num_qubits + other.num_qubits,
            amps,
        }
    }

    /// Reorders qubits so that new qubit `j` is old qubit `order[j]`.
    pub fn permute_qubits(&self, order: &[usize]) -> Result<StateVector> {
        if order.len() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                actual: order.len(),
            });
        }
        let mut seen = vec![false; self.num_qubits];
        for &q in order {
            self.check_qubit(q)?;
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        let n = self.num_qubits;
        let mut amps = vec![ZERO; self.amps.len()];
        for (old, amp) in self.amps.iter().enumerate() {
            let mut new = 0usize;
            for (j, &q) in order.iter().enumerate() {
                if old & (1 << (n - 1 - q)) != 0 {
                    new |= 1 << (n - 1 - j);
                }
            }
            amps[new] = *amp;
        }
        Ok(StateVector {
            num_qubits: n,
            amps,
        })
    }

    pub fn apply_pauli(&mut self, qubit: usize, pauli: Pauli) -> Result<()> {
        self.check_qubit(qubit)?;
        let mask = self.mask(qubit);
        match pauli {
            Pauli::Identity => {}
            Pauli::Z => {
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *a = -*a;
                    }
                }
            }
            Pauli::X | Pauli::IY => {
                for i0 in (0..self.amps.len()).filter(|i| i & mask == 0) {
                    let i1 = i0 | mask;
                    let (a0, a1) = (self.amps[i0], self.amps[i1]);
                    if pauli == Pauli::X {
                        self.amps[i0] = a1;
                        self.amps[i1] = a0;
                    } else {
                        // [[0,1],[-1,0]]
                        self.amps[i0] = a1;
                        self.amps[i1] = -a0;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_hadamard(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        let mask = self.mask(qubit);
        for i0 in (0..self.amps.len()).filter(|i| i & mask == 0) {
            let i1 = i0 | mask;
            let (a0, a1) = (self.amps[i0], self.amps[i1]);
            self.amps[i0] = (a0 + a1) * FRAC_1_SQRT_2;
            self.amps[i1] = (a0 - a1) * FRAC_1_SQRT_2;
        }
        Ok(())
    }

    /// Unnormalized projection of `(a, b)` onto `outcome`, in place.
    /// Returns the branch weight.
    fn bell_project_raw(&mut self, a: usize, b: usize, outcome: BellOutcome) -> f64 {
        let (ma, mb) = (self.mask(a), self.mask(b));
        let [c00, c01, c10, c11] = outcome.coefficients();
        let mut weight = 0.0;
        for i in (0..self.amps.len()).filter(|i| i & (ma | mb) == 0) {
            let idx = [i, i | mb, i | ma, i | ma | mb];
            let w = self.amps[idx[0]] * c00
                + self.amps[idx[1]] * c01
                + self.amps[idx[2]] * c10
                + self.amps[idx[3]] * c11;
            weight += w.norm_sqr();
            self.amps[idx[0]] = w * c00;
            self.amps[idx[1]] = w * c01;
            self.amps[idx[2]] = w * c10;
            self.amps[idx[3]] = w * c11;
        }
        weight
    }

    /// Outcome weights in [`BellOutcome::ALL`] order.
    pub fn bell_probabilities(&self, a: usize, b: usize) -> Result<[f64; 4]> {
        self.check_pair(a, b)?;
        let (ma, mb) = (self.mask(a), self.mask(b));
        let mut probs = [0.0; 4];
        for i in (0..self.amps.len()).filter(|i| i & (ma | mb) == 0) {
            let v = [
                self.amps[i],
                self.amps[i | mb],
                self.amps[i | ma],
                self.amps[i | ma | mb],
            ];
            for (p, o) in probs.iter_mut().zip(BellOutcome::ALL) {
                let c = o.coefficients();
                let w = v[0] * c[0] + v[1] * c[1] + v[2] * c[2] + v[3] * c[3];
                *p += w.norm_sqr();
            }
        }
        Ok(probs)
    }

    /// Collapses `(a, b)` onto `outcome`. The measured qubits stay in the
    /// register, left in the corresponding Bell state.
    pub fn bell_project(&self, a: usize, b: usize, outcome: BellOutcome) -> Result<Projection> {
        self.check_pair(a, b)?;
        let mut state = self.clone();
        let probability = state.bell_project_raw(a, b, outcome);
        Ok(state.renormalized(probability))
    }

    pub fn bell_sample<R: Rng + ?Sized>(
        &self,
        a: usize,
        b: usize,
        rng: &mut R,
    ) -> Result<(BellOutcome, StateVector, f64)> {
        let probs = self.bell_probabilities(a, b)?;
        let k = sample_index(&probs, rng);
        let outcome = BellOutcome::ALL[k];
        let (state, probability) = self.bell_project(a, b, outcome)?.into_result()?;
        Ok((outcome, state, probability))
    }

    pub fn z_probabilities(&self, qubit: usize) -> Result<[f64; 2]> {
        self.check_qubit(qubit)?;
        let mask = self.mask(qubit);
        let mut probs = [0.0; 2];
        for (i, a) in self.amps.iter().enumerate() {
            probs[usize::from(i & mask != 0)] += a.norm_sqr();
        }
        Ok(probs)
    }

    pub fn z_project(&self, qubit: usize, bit: u8) -> Result<Projection> {
        self.check_qubit(qubit)?;
        if bit > 1 {
            return Err(Error::InvalidConfig(format!(
                "bit value {bit} is not 0 or 1"
            )));
        }
        let mask = self.mask(qubit);
        let keep_set = bit == 1;
        let mut state = self.clone();
        let mut probability = 0.0;
        for (i, a) in state.amps.iter_mut().enumerate() {
            if (i & mask != 0) == keep_set {
                probability += a.norm_sqr();
            } else {
                *a = ZERO;
            }
        }
        Ok(state.renormalized(probability))
    }

    pub fn z_sample<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        rng: &mut R,
    ) -> Result<(u8, StateVector, f64)> {
        let probs = self.z_probabilities(qubit)?;
        let bit = sample_index(&probs, rng) as u8;
        let (state, probability) = self.z_project(qubit, bit)?.into_result()?;
        Ok((bit, state, probability))
    }

    fn renormalized(mut self, probability: f64) -> Projection {
        if probability <= ZERO_PROBABILITY {
            return Projection::Impossible;
        }
        let scale = probability.sqrt().recip();
        for a in &mut self.amps {
            *a *= scale;
        }
        Projection::Collapsed {
            state: self,
            probability,
        }
    }

    /// Pure state of the `keep` qubits, in the listed order.
    ///
    /// Every other qubit must already be disentangled from them. The check
    /// takes the largest Schmidt column as candidate `psi` and requires
    /// `<psi|rho|psi> >= 1 - PURITY_TOLERANCE`, which bounds the top
    /// eigenvalue of the reduced density operator from below.
    pub fn extract_subsystem(&self, keep: &[usize]) -> Result<StateVector> {
        let n = self.num_qubits;
        let mut kept = vec![false; n];
        for &q in keep {
            self.check_qubit(q)?;
            if std::mem::replace(&mut kept[q], true) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        let rest: Vec<usize> = (0..n).filter(|&q| !kept[q]).collect();
        let k_dim = 1usize << keep.len();
        let r_dim = 1usize << rest.len();

        // columns[r * k_dim + k]
        let mut columns = vec![ZERO; self.amps.len()];
        for (idx, amp) in self.amps.iter().enumerate() {
            let k = gather_bits(idx, n, keep);
            let r = gather_bits(idx, n, &rest);
            columns[r * k_dim + k] = *amp;
        }

        let best = (0..r_dim)
            .map(|r| {
                let w: f64 = columns[r * k_dim..(r + 1) * k_dim]
                    .iter()
                    .map(|a| a.norm_sqr())
                    .sum();
                (r, w)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap_or((0, 0.0));
        if best.1 <= ZERO_PROBABILITY {
            return Err(Error::SubsystemNotPure { purity: 0.0 });
        }
        let scale = best.1.sqrt().recip();
        let psi: Vec<Complex64> = columns[best.0 * k_dim..(best.0 + 1) * k_dim]
            .iter()
            .map(|a| a * scale)
            .collect();

        let purity: f64 = columns
            .chunks_exact(k_dim)
            .map(|col| {
                psi.iter()
                    .zip(col)
                    .map(|(p, c)| p.conj() * c)
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum();
        if purity < 1.0 - PURITY_TOLERANCE {
            return Err(Error::SubsystemNotPure { purity });
        }
        Ok(StateVector {
            num_qubits: keep.len(),
            amps: psi,
        })
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                actual: other.num_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2`, clamped to `[0, 1]`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// Largest element-wise deviation after removing the relative global
    /// phase. Returns `None` on dimension mismatch or orthogonal states.
    pub fn phase_aligned_distance(&self, other: &StateVector) -> Option<f64> {
        let overlap = self.inner(other).ok()?;
        if overlap.norm() <= ZERO_PROBABILITY {
            return None;
        }
        let phase = overlap / overlap.norm();
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a * phase - b).norm())
            .reduce(f64::max)
    }

    /// One `re im` line per amplitude, big-endian index order.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.amps.len() * 48);
        for a in &self.amps {
            out.push_str(&format!("{} {}\n", a.re, a.im));
        }
        out
    }

    /// Parses the text form, enforcing normalization within
    /// [`INPUT_TOLERANCE`] and renormalizing exactly.
    pub fn from_text(text: &str) -> Result<StateVector> {
        let mut amps = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let mut next = |name: &str| -> Result<f64> {
                let field = fields.next().ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: format!("missing {name} part"),
                })?;
                field.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad {name} part '{field}': {e}"),
                })
            };
            let re = next("real")?;
            let im = next("imaginary")?;
            if fields.next().is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "expected exactly two fields".into(),
                });
            }
            amps.push(Complex64::new(re, im));
        }
        Self::normalized_within(amps, INPUT_TOLERANCE)
    }
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Packs the bits of `qubits` (big-endian in the listed order) out of `idx`.
fn gather_bits(idx: usize, n: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .fold(0, |acc, &q| (acc << 1) | ((idx >> (n - 1 - q)) & 1))
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    assert!(
        (total - 1.0).abs() <= 1e-9,
        "outcome probabilities sum to {total}"
    );
    let r: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_possible = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > ZERO_PROBABILITY {
            last_possible = k;
            acc += p;
            if r < acc {
                return k;
            }
        }
    }
    last_possible
}
