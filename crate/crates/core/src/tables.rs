//! Classical correction rules as pure data.
//!
//! Two families of tables live here. The *printed* tables are transcribed
//! cell by cell in the operator notation they were published in
//! (`σ_z`, `|0⟩⟨0|∓|1⟩⟨1|`, ...) and parsed into Paulis, so a malformed
//! cell is detected by the parser rather than guessed at. The *derived*
//! tables are the corrections certified by the brute-force oracle in
//! [`crate::verify`]; tests there re-derive them and compare.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::statevector::{BellOutcome, Pauli};

/// State shared by the `N-1` channel pairs `(D_i, B_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EprVariant {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

impl EprVariant {
    pub const ALL: [EprVariant; 4] = [
        EprVariant::PhiPlus,
        EprVariant::PhiMinus,
        EprVariant::PsiPlus,
        EprVariant::PsiMinus,
    ];

    pub fn bell_state(self) -> BellOutcome {
        BellOutcome::ALL[self as usize]
    }

    pub fn label(self) -> &'static str {
        self.bell_state().label()
    }
}

impl fmt::Display for EprVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EprVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let outcome: BellOutcome = s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("unknown EPR variant '{s}'")))?;
        Ok(EprVariant::ALL[outcome.index()])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub const ALL: [Parity; 2] = [Parity::Even, Parity::Odd];

    pub fn of_count(count: usize) -> Parity {
        if count.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Where a table came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableSource {
    #[serde(rename = "paper")]
    PaperStated,
    #[serde(rename = "derived")]
    OracleDerived,
}

impl TableSource {
    pub fn label(self) -> &'static str {
        match self {
            TableSource::PaperStated => "paper",
            TableSource::OracleDerived => "derived",
        }
    }
}

impl FromStr for TableSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(TableSource::PaperStated),
            "derived" => Ok(TableSource::OracleDerived),
            _ => Err(Error::InvalidConfig(format!("unknown table source '{s}'"))),
        }
    }
}

/// A total map keyed by [`BellOutcome`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutcomeMap<T>(pub [T; 4]);

impl<T> Index<BellOutcome> for OutcomeMap<T> {
    type Output = T;

    fn index(&self, o: BellOutcome) -> &T {
        &self.0[o.index()]
    }
}

impl<T: Serialize> Serialize for OutcomeMap<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(4))?;
        for o in BellOutcome::ALL {
            map.serialize_entry(o.label(), &self[o])?;
        }
        map.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParityRule {
    pub even: Pauli,
    pub odd: Pauli,
}

impl ParityRule {
    pub fn get(&self, parity: Parity) -> Pauli {
        match parity {
            Parity::Even => self.even,
            Parity::Odd => self.odd,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrectionTable {
    pub epr_variant: EprVariant,
    pub provenance: TableSource,
    /// Parity of the controller count the table was derived for; printed
    /// tables do not depend on it.
    pub m_parity: Option<Parity>,
    /// Bob's correction on `B_i` after the `(A_i, D_i)` outcome.
    pub u_i: OutcomeMap<Pauli>,
    /// Bob's correction on `B_N` after the `(A_N, D_N)` outcome.
    pub u_n: OutcomeMap<Pauli>,
    /// Every controller's correction after the `(A_N, D_N)` outcome.
    pub u_c: OutcomeMap<Pauli>,
    /// Bob's last correction on `B_N`, keyed by the `(A_N, D_N)` outcome and
    /// the parity of the controllers' announced 1-bits.
    pub final_u_n: OutcomeMap<ParityRule>,
}

impl CorrectionTable {
    pub fn final_correction(&self, outcome: BellOutcome, parity: Parity) -> Pauli {
        self.final_u_n[outcome].get(parity)
    }
}

/// Step-four corrections for Bob (`B_N`) and the controllers.
///
/// Only the product of Bob's step-four and final corrections on `B_N` is
/// observable, and any controller correction is absorbed by the parity rule,
/// so this pair is a convention rather than something the oracle can pin
/// down. The oracle checks that it is admissible and derives everything else
/// relative to it.
pub const STEP4_BOB: OutcomeMap<Pauli> =
    OutcomeMap([Pauli::Identity, Pauli::Z, Pauli::X, Pauli::IY]);
pub const STEP4_CONTROLLERS: OutcomeMap<Pauli> =
    OutcomeMap([Pauli::Identity, Pauli::Identity, Pauli::X, Pauli::IY]);

// Oracle output, indexed [variant][outcome]. Re-derived in verify's tests.
const DERIVED_U_I: [[Pauli; 4]; 4] = {
    use Pauli::{Identity as I, IY, X, Z};
    [[I, Z, X, IY], [Z, I, IY, X], [X, IY, I, Z], [IY, X, Z, I]]
};

const PLAIN_RULE: ParityRule = ParityRule {
    even: Pauli::Identity,
    odd: Pauli::Z,
};
const FLIPPED_RULE: ParityRule = ParityRule {
    even: Pauli::Z,
    odd: Pauli::Identity,
};

/// The oracle-certified table for `epr_variant` and a controller count of
/// parity `m_parity`.
///
/// The final rule is "even -> I, odd -> Z" except after a `psi-` step-four
/// outcome with an odd number of controllers: the `M+1` applications of
/// `iY` then leave a relative sign `(-1)^(M+1)` that flips it.
pub fn derived_table(epr_variant: EprVariant, m_parity: Parity) -> CorrectionTable {
    let psi_minus_rule = match m_parity {
        Parity::Even => PLAIN_RULE,
        Parity::Odd => FLIPPED_RULE,
    };
    CorrectionTable {
        epr_variant,
        provenance: TableSource::OracleDerived,
        m_parity: Some(m_parity),
        u_i: OutcomeMap(DERIVED_U_I[epr_variant as usize]),
        u_n: STEP4_BOB,
        u_c: STEP4_CONTROLLERS,
        final_u_n: OutcomeMap([PLAIN_RULE, PLAIN_RULE, PLAIN_RULE, psi_minus_rule]),
    }
}

pub fn table_for(epr_variant: EprVariant, source: TableSource, m: usize) -> CorrectionTable {
    match source {
        TableSource::PaperStated => paper_table(epr_variant),
        TableSource::OracleDerived => derived_table(epr_variant, Parity::of_count(m)),
    }
}

// ---------------------------------------------------------------------------
// Printed tables
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PrintedTable {
    #[serde(rename = "Table I")]
    I,
    #[serde(rename = "Table II")]
    II,
    #[serde(rename = "Table III")]
    III,
    #[serde(rename = "Table IV")]
    IV,
    #[serde(rename = "Table V")]
    V,
    #[serde(rename = "Table VI")]
    VI,
}

impl PrintedTable {
    pub const ALL: [PrintedTable; 6] = [
        PrintedTable::I,
        PrintedTable::II,
        PrintedTable::III,
        PrintedTable::IV,
        PrintedTable::V,
        PrintedTable::VI,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PrintedTable::I => "Table I",
            PrintedTable::II => "Table II",
            PrintedTable::III => "Table III",
            PrintedTable::IV => "Table IV",
            PrintedTable::V => "Table V",
            PrintedTable::VI => "Table VI",
        }
    }

    /// Channel variant the table describes.
    pub fn epr_variant(self) -> EprVariant {
        match self {
            PrintedTable::I | PrintedTable::II | PrintedTable::III => EprVariant::PhiPlus,
            PrintedTable::IV => EprVariant::PhiMinus,
            PrintedTable::V => EprVariant::PsiPlus,
            PrintedTable::VI => EprVariant::PsiMinus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Column {
    #[serde(rename = "u_i")]
    UI,
    #[serde(rename = "u_n")]
    UN,
    #[serde(rename = "u_c")]
    UC,
    #[serde(rename = "final_u_n")]
    FinalUN,
}

impl Column {
    pub fn label(self) -> &'static str {
        match self {
            Column::UI => "u_i",
            Column::UN => "u_n",
            Column::UC => "u_c",
            Column::FinalUN => "final_u_n",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum CellKey {
    Outcome(BellOutcome),
    OutcomeParity(BellOutcome, Parity),
}

impl CellKey {
    pub fn outcome(self) -> BellOutcome {
        match self {
            CellKey::Outcome(o) | CellKey::OutcomeParity(o, _) => o,
        }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellKey::Outcome(o) => write!(f, "{o}"),
            CellKey::OutcomeParity(o, p) => write!(f, "{o}/{p}"),
        }
    }
}

/// One printed cell, resolved to a single key.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PaperCell {
    pub table: PrintedTable,
    pub column: Column,
    pub key: CellKey,
    /// Cell text as printed, including any `±`/`∓` shared by a row group.
    pub printed: &'static str,
    /// `printed` with the sign picked for this key.
    pub resolved: String,
    /// Operator the cell denotes. For a malformed cell this is the presumed
    /// intended operator, see `typo`.
    pub reading: Pauli,
    /// Set when `resolved` is not one of the four Paulis as printed; holds
    /// the text of the presumed intended cell.
    pub typo: Option<String>,
}

/// Row groups: printed tables write `φ±` / `ψ±` rows with a shared `±`.
#[derive(Clone, Copy)]
enum Rows {
    One(BellOutcome),
    Phi,
    Psi,
}

impl Rows {
    /// Members with whether each takes the upper sign.
    fn members(self) -> Vec<(BellOutcome, bool)> {
        match self {
            Rows::One(o) => vec![(o, true)],
            Rows::Phi => vec![(BellOutcome::PhiPlus, true), (BellOutcome::PhiMinus, false)],
            Rows::Psi => vec![(BellOutcome::PsiPlus, true), (BellOutcome::PsiMinus, false)],
        }
    }
}

struct RawCell {
    table: PrintedTable,
    column: Column,
    rows: Rows,
    parity: Option<Parity>,
    printed: &'static str,
    /// Intended text for cells that do not parse to a Pauli.
    presumed: Option<&'static str>,
}

const fn raw(
    table: PrintedTable,
    column: Column,
    rows: Rows,
    parity: Option<Parity>,
    printed: &'static str,
    presumed: Option<&'static str>,
) -> RawCell {
    RawCell {
        table,
        column,
        rows,
        parity,
        printed,
        presumed,
    }
}

const IDENTITY_OP: &str = "|0⟩⟨0|+|1⟩⟨1|";
const Z_OP: &str = "|0⟩⟨0|-|1⟩⟨1|";
const FLIP_PM: &str = "|0⟩⟨1|±|1⟩⟨0|";

fn raw_cells() -> Vec<RawCell> {
    use BellOutcome::*;
    use Column::*;
    use PrintedTable as T;

    let mut cells = vec![
        // Table I: U_i for a phi+ channel.
        raw(T::I, UI, Rows::One(PhiPlus), None, "I", None),
        raw(T::I, UI, Rows::One(PhiMinus), None, "σ_z", None),
        raw(T::I, UI, Rows::One(PsiPlus), None, "σ_x", None),
        raw(T::I, UI, Rows::One(PsiMinus), None, "iσ_y", None),
        // Table II: U_N and U_Cj after (A_N, D_N).
        raw(T::II, UN, Rows::One(PhiPlus), None, "I", None),
        raw(T::II, UN, Rows::One(PhiMinus), None, "σ_z", None),
        raw(T::II, UN, Rows::One(PsiPlus), None, "σ_x", None),
        raw(T::II, UN, Rows::One(PsiMinus), None, "iσ_y", None),
        raw(T::II, UC, Rows::One(PhiPlus), None, "I", None),
        raw(T::II, UC, Rows::One(PhiMinus), None, "I", None),
        raw(T::II, UC, Rows::One(PsiPlus), None, "σ_x", None),
        raw(T::II, UC, Rows::One(PsiMinus), None, "iσ_y", None),
    ];

    // Tables III-VI share the controller and parity columns; only U_i moves.
    let u_i_columns: [(
        PrintedTable,
        &'static str,
        Option<&'static str>,
        &'static str,
    ); 4] = [
        (T::III, "|0⟩⟨0|±|1⟩⟨1|", None, FLIP_PM),
        (T::IV, "|0⟩⟨0|∓|1⟩⟨1|", None, "|0⟩⟨1|∓|1⟩⟨0|"),
        // Printed "|0⟩⟨1|±|0⟩⟨1|" is not an operator of the required form.
        (T::V, "|0⟩⟨1|±|0⟩⟨1|", Some(FLIP_PM), "|0⟩⟨0|±|1⟩⟨1|"),
        (
            T::VI,
            "|0⟩⟨1|∓|0⟩⟨1|",
            Some("|0⟩⟨1|∓|1⟩⟨0|"),
            "|0⟩⟨0|∓|1⟩⟨1|",
        ),
    ];
    for (table, phi_rows, phi_presumed, psi_rows) in u_i_columns {
        cells.push(raw(table, UC, Rows::Phi, None, IDENTITY_OP, None));
        cells.push(raw(table, UC, Rows::Psi, None, FLIP_PM, None));
        cells.push(raw(table, UI, Rows::Phi, None, phi_rows, phi_presumed));
        cells.push(raw(table, UI, Rows::Psi, None, psi_rows, None));
        // The parity rows repeat verbatim under both U_i row groups.
        for rows in [Rows::Phi, Rows::Psi] {
            cells.push(raw(
                table,
                FinalUN,
                rows,
                Some(Parity::Odd),
                IDENTITY_OP,
                None,
            ));
            cells.push(raw(table, FinalUN, rows, Some(Parity::Even), Z_OP, None));
        }
    }
    cells
}

/// Every printed cell, in table order, one entry per key.
pub fn paper_cells() -> Vec<PaperCell> {
    raw_cells()
        .into_iter()
        .flat_map(|raw| {
            raw.rows
                .members()
                .into_iter()
                .map(move |(outcome, upper)| expand_cell(&raw, outcome, upper))
        })
        .collect()
}

/// Printed cells describing the given channel variant.
pub fn paper_cells_for(epr_variant: EprVariant) -> Vec<PaperCell> {
    paper_cells()
        .into_iter()
        .filter(|c| c.table.epr_variant() == epr_variant)
        .collect()
}

fn expand_cell(raw: &RawCell, outcome: BellOutcome, upper: bool) -> PaperCell {
    let resolved = resolve_signs(raw.printed, upper);
    let key = match raw.parity {
        Some(p) => CellKey::OutcomeParity(outcome, p),
        None => CellKey::Outcome(outcome),
    };
    let (reading, typo) = match parse_operator(&resolved) {
        Ok(p) => (p, None),
        Err(_) => {
            let presumed = raw
                .presumed
                .map(|t| resolve_signs(t, upper))
                .expect("every malformed transcribed cell carries a presumed reading");
            let p = parse_operator(&presumed).expect("presumed reading parses");
            (p, Some(presumed))
        }
    };
    PaperCell {
        table: raw.table,
        column: raw.column,
        key,
        printed: raw.printed,
        resolved,
        reading,
        typo,
    }
}

/// Picks the upper (`+` for `±`, `-` for `∓`) or lower sign.
pub fn resolve_signs(text: &str, upper: bool) -> String {
    text.chars()
        .map(|ch| match (ch, upper) {
            ('±', true) | ('∓', false) => '+',
            ('±', false) | ('∓', true) => '-',
            (other, _) => other,
        })
        .collect()
}

/// Parses a named Pauli (`I`, `σ_x`, `iσ_y`, `σ_z`) or a signed sum of
/// outer products such as `|0⟩⟨1|-|1⟩⟨0|`, and identifies the result with
/// one of the four correction matrices.
pub fn parse_operator(text: &str) -> Result<Pauli> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let named = match compact.as_str() {
        "I" => Some(Pauli::Identity),
        "σ_x" => Some(Pauli::X),
        "iσ_y" => Some(Pauli::IY),
        "σ_z" => Some(Pauli::Z),
        _ => None,
    };
    if let Some(p) = named {
        return Ok(p);
    }

    let bad = || Error::Operator(text.to_string());
    let mut matrix = [[0i8; 2]; 2];
    let mut chars = compact.chars().peekable();
    let mut first = true;
    while chars.peek().is_some() {
        let sign = match chars.peek() {
            Some('+') => {
                chars.next();
                1
            }
            Some('-') | Some('−') => {
                chars.next();
                -1
            }
            _ if first => 1,
            _ => return Err(bad()),
        };
        first = false;
        let digit = |c: Option<char>| c.and_then(|c| c.to_digit(2)).map(|d| d as usize);
        if chars.next() != Some('|') {
            return Err(bad());
        }
        let ket = digit(chars.next()).ok_or_else(bad)?;
        if chars.next() != Some('⟩') || chars.next() != Some('⟨') {
            return Err(bad());
        }
        let bra = digit(chars.next()).ok_or_else(bad)?;
        if chars.next() != Some('|') {
            return Err(bad());
        }
        matrix[ket][bra] += sign;
    }
    if first {
        return Err(bad());
    }
    Pauli::from_matrix(matrix).ok_or_else(bad)
}

/// The printed table for `epr_variant`, with malformed cells read as their
/// presumed intent.
///
/// Tables IV to VI do not restate Bob's step-four correction `U_N`; it is
/// taken from Table II for every variant since the GHZ part of the channel
/// does not change.
pub fn paper_table(epr_variant: EprVariant) -> CorrectionTable {
    let cells = paper_cells();
    let pick = |table_filter: &dyn Fn(&PaperCell) -> bool, column: Column, key: CellKey| -> Pauli {
        cells
            .iter()
            .find(|c| table_filter(c) && c.column == column && c.key == key)
            .map(|c| c.reading)
            .expect("printed tables are total")
    };
    let own = |c: &PaperCell| c.table.epr_variant() == epr_variant;
    let table_ii = |c: &PaperCell| c.table == PrintedTable::II;

    let by_outcome = |filter: &dyn Fn(&PaperCell) -> bool, column| {
        OutcomeMap(BellOutcome::ALL.map(|o| pick(filter, column, CellKey::Outcome(o))))
    };
    let final_u_n = OutcomeMap(BellOutcome::ALL.map(|o| ParityRule {
        even: pick(
            &own,
            Column::FinalUN,
            CellKey::OutcomeParity(o, Parity::Even),
        ),
        odd: pick(
            &own,
            Column::FinalUN,
            CellKey::OutcomeParity(o, Parity::Odd),
        ),
    }));
    CorrectionTable {
        epr_variant,
        provenance: TableSource::PaperStated,
        m_parity: None,
        u_i: by_outcome(&own, Column::UI),
        u_n: by_outcome(&table_ii, Column::UN),
        u_c: by_outcome(&own, Column::UC),
        final_u_n,
    }
}
