//! Command-line harness behind the `mcqt` binary.
//!
//! Every report is a single JSON document with a `header` carrying the
//! schema version and the full argument list, so a report can be re-run
//! exactly. Exit codes: 0 success, 1 usage or configuration error, 2 a
//! branch violated fidelity or an invariant in `enumerate` mode.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::protocol::{run, MessageState, OutcomeSource, ProtocolConfig};
use crate::statevector::StateVector;
use crate::tables::{paper_table, EprVariant, TableSource};
use crate::verify::{
    derive_both_parities, enumerate_branches, monte_carlo, reconcile, summarize,
    uniform_branch_probability, FIDELITY_TOLERANCE,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
/// Multinomial check bound for `montecarlo`, in binomial standard deviations.
pub const SIGMA_BOUND: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Run,
    Enumerate,
    Reconcile,
    Montecarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    /// Plain-text table diff; `reconcile` only.
    Text,
}

#[derive(Parser, Clone, Debug, PartialEq, Serialize)]
#[command(
    name = "mcqt",
    version,
    about = "Controlled multi-qubit teleportation simulator"
)]
pub struct RunSpec {
    #[arg(long, value_enum, default_value_t = Mode::Run)]
    pub mode: Mode,
    /// Message qubits.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Controllers.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Channel pair state: phi+, phi-, psi+ or psi-.
    #[arg(long, default_value = "phi+")]
    pub epr: EprVariant,
    /// Correction table: paper or derived.
    #[arg(long, default_value = "derived")]
    pub table: TableSource,
    /// Seeds ChaCha8 for sampled outcomes and random messages.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `random`, `example3x2`, or a path to a state file.
    #[arg(long, default_value = "random")]
    pub message: String,
    /// Sampled runs in `montecarlo` mode.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl RunSpec {
    /// Flag list that parses back to `self`.
    pub fn to_args(&self) -> Vec<String> {
        let mut args = vec![
            "mcqt".to_string(),
            "--mode".into(),
            value_name(self.mode),
            "--n".into(),
            self.n.to_string(),
            "--m".into(),
            self.m.to_string(),
            "--epr".into(),
            self.epr.label().into(),
            "--table".into(),
            self.table.label().into(),
            "--seed".into(),
            self.seed.to_string(),
            "--message".into(),
            self.message.clone(),
            "--trials".into(),
            self.trials.to_string(),
        ];
        if let Some(out) = &self.out {
            args.push("--out".into());
            args.push(out.display().to_string());
        }
        args.push("--format".into());
        args.push(value_name(self.format));
        args
    }

    pub fn config(&self) -> ProtocolConfig {
        ProtocolConfig::new(self.n, self.m, self.epr).with_table(self.table)
    }

    /// Mode-specific checks that do not need a simulation.
    pub fn validate(&self) -> Result<()> {
        if self.mode != Mode::Reconcile {
            self.config().validate()?;
        }
        if self.mode == Mode::Montecarlo && self.trials == 0 {
            return Err(Error::InvalidConfig("--trials must be positive".into()));
        }
        if self.format == Format::Text && self.mode != Mode::Reconcile {
            return Err(Error::InvalidConfig(
                "--format text is only available for reconcile".into(),
            ));
        }
        Ok(())
    }

    pub fn load_message(&self) -> Result<MessageState> {
        let msg = match self.message.as_str() {
            "random" => MessageState::seeded(self.n, self.seed),
            "example3x2" => MessageState::example3x2(),
            path => MessageState::from_state(StateVector::from_text(&fs::read_to_string(path)?)?),
        };
        if msg.n() != self.n {
            return Err(Error::InvalidConfig(format!(
                "message has {} qubits but --n is {}",
                msg.n(),
                self.n
            )));
        }
        Ok(msg)
    }
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

/// A finished report and the exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub body: String,
    pub exit_code: i32,
}

fn header(spec: &RunSpec) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "mode": spec.mode,
        "args": spec.to_args(),
    })
}

fn amplitudes_json(amps: &[Complex64]) -> Value {
    amps.iter().map(|a| json!([a.re, a.im])).collect()
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Runs the mode described by `spec` and renders its report.
pub fn execute(spec: &RunSpec) -> Result<Report> {
    spec.validate()?;
    let mut exit_code = EXIT_OK;
    let mut doc = json!({ "header": header(spec) });
    let config = spec.config();

    match spec.mode {
        Mode::Run => {
            let msg = spec.load_message()?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let transcript = run(&config, &msg, OutcomeSource::Sampled(&mut rng))?;
            doc["message"] = amplitudes_json(msg.amplitudes());
            doc["transcript"] = to_json(&transcript);
        }
        Mode::Enumerate => {
            let msg = spec.load_message()?;
            let branches = enumerate_branches(&config, &msg)?;
            let summary = summarize(&branches);
            let uniform = uniform_branch_probability(&config);
            let off_uniform = branches
                .iter()
                .filter(|b| (b.probability - uniform).abs() > 1e-10)
                .count();
            let failing = match spec.table {
                TableSource::PaperStated => summary.failing_paper,
                TableSource::OracleDerived => summary.failing_derived,
            };
            let violation = failing > 0
                || off_uniform > 0
                || (summary.probability_sum - 1.0).abs() > 1e-9
                || branches.len() as u64 != config.branch_count();
            if violation {
                exit_code = EXIT_VIOLATION;
            }
            doc["table"] = to_json(&config.table());
            doc["summary"] = to_json(&summary);
            doc["checks"] = json!({
                "selected_table": spec.table,
                "fidelity_tolerance": FIDELITY_TOLERANCE,
                "failing_branches": failing,
                "off_uniform_branches": off_uniform,
                "passed": !violation,
            });
            doc["branches"] = to_json(&branches);
        }
        Mode::Reconcile => {
            let (even, odd) = derive_both_parities(spec.epr)?;
            let report = reconcile(&paper_table(spec.epr), &even, &odd)?;
            if spec.format == Format::Text {
                return Ok(Report {
                    body: report.to_text(),
                    exit_code,
                });
            }
            doc["reconciliation"] = to_json(&report);
        }
        Mode::Montecarlo => {
            let msg = spec.load_message()?;
            let report = monte_carlo(&config, &msg, spec.trials, spec.seed, SIGMA_BOUND)?;
            doc["montecarlo"] = to_json(&report);
        }
    }

    let mut body = serde_json::to_string_pretty(&doc).expect("json values serialize");
    body.push('\n');
    Ok(Report { body, exit_code })
}

/// Parses `args`, runs, and writes the report to `--out` or `stdout`.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let spec = match RunSpec::try_parse_from(args) {
        Ok(spec) => spec,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let report = match execute(&spec) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let written = match &spec.out {
        Some(path) => fs::write(path, &report.body),
        None => stdout.write_all(report.body.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_USAGE;
    }
    report.exit_code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunSpec {
        RunSpec::try_parse_from(std::iter::once("mcqt").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults() {
        let spec = parse(&[]);
        assert_eq!(spec.mode, Mode::Run);
        assert_eq!(spec.epr, EprVariant::PhiPlus);
        assert_eq!(spec.table, TableSource::OracleDerived);
        assert_eq!(spec.message, "random");
    }

    #[test]
    fn args_round_trip() {
        let spec = parse(&[
            "--mode",
            "montecarlo",
            "--epr",
            "psi-",
            "--table",
            "paper",
            "--out",
            "x.json",
        ]);
        assert_eq!(RunSpec::try_parse_from(spec.to_args()).unwrap(), spec);
    }

    #[test]
    fn rejects_unknown_variant() {
        assert!(RunSpec::try_parse_from(["mcqt", "--epr", "chi"]).is_err());
    }

    #[test]
    fn text_format_is_reconcile_only() {
        assert!(parse(&["--format", "text"]).validate().is_err());
        assert!(parse(&["--mode", "reconcile", "--format", "text"])
            .validate()
            .is_ok());
    }

    #[test]
    fn example_message_requires_three_qubits() {
        assert!(parse(&["--message", "example3x2"]).load_message().is_err());
        assert!(parse(&["--n", "3", "--message", "example3x2"])
            .load_message()
            .is_ok());
    }
}
