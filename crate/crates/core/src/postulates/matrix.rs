//! Conformance matrix: every operator is run on seeded random instances and
//! every postulate is tallied per operator.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::generate::{trial, trial_seed, GeneratorConfig, Trial};
use super::{check_all, Instance, PostulateId, PostulateVerdict, Status, Witness};
use crate::error::Result;
use crate::revision::{Operator, RevisionEnv, RevisionOutcome, Scenario, ScenarioConfig};
use crate::semantics::ScopeKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixConfig {
    pub operators: Vec<Operator>,
    pub generator: GeneratorConfig,
    pub scope: ScopeKind,
    pub seed: u64,
    pub trials: usize,
}

impl MatrixConfig {
    /// The three scenario presets in the given scope.
    pub fn presets(scope: ScopeKind, seed: u64, trials: usize) -> Self {
        let operators = [Scenario::S1, Scenario::S2, Scenario::S3]
            .into_iter()
            .map(|s| Operator::Scenario { config: ScenarioConfig::preset(s, scope) })
            .collect();
        MatrixConfig { operators, generator: GeneratorConfig::default(), scope, seed, trials }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub seed: u64,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub holds: usize,
    pub fails: usize,
    pub not_applicable: usize,
    pub first_failure: Option<Failure>,
}

impl Cell {
    fn add(&mut self, seed: u64, v: &PostulateVerdict) {
        match v.verdict.status {
            Status::Holds => self.holds += 1,
            Status::NotApplicable => self.not_applicable += 1,
            Status::Fails => {
                self.fails += 1;
                if self.first_failure.is_none() {
                    self.first_failure = Some(Failure { seed, witness: v.verdict.witness.clone() });
                }
            }
        }
    }

    /// `ok` when never violated, `xN` with N violations, `n/a` when never
    /// applicable.
    pub fn symbol(&self) -> String {
        if self.fails > 0 {
            format!("x{}", self.fails)
        } else if self.holds == 0 {
            "n/a".into()
        } else {
            "ok".into()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorRow {
    pub operator: String,
    pub config: Operator,
    pub errors: usize,
    pub first_error: Option<(u64, String)>,
    pub cells: BTreeMap<PostulateId, Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    pub seed: u64,
    pub trials: usize,
    pub scope: ScopeKind,
    pub rows: Vec<OperatorRow>,
}

/// Whether a postulate may ever fail for an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    NeverViolated,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub operator: String,
    pub postulate: PostulateId,
    pub expect: Expect,
}

/// The postulate profile expected of the scenario presets.
pub fn preset_expectations() -> Vec<Expectation> {
    use Expect::*;
    use PostulateId::*;
    let table: [(&str, &[(PostulateId, Expect)]); 3] = [
        ("s1", &[(Success, NeverViolated), (ConsistencyPreservation, NeverViolated), (Relevance, NeverViolated), (Uniformity, NeverViolated)]),
        (
            "s2",
            &[(ConsistencyPreservation, NeverViolated), (Relevance, NeverViolated), (Uniformity, NeverViolated), (InclusionS2, NeverViolated)],
        ),
        (
            "s3",
            &[
                (WeakSuccess, NeverViolated),
                (WeakProxySuccess, NeverViolated),
                (WeakInclusion, NeverViolated),
                (RelativeSuccess, NeverViolated),
                (Success, Violated),
            ],
        ),
    ];
    table
        .iter()
        .flat_map(|(op, cells)| {
            cells.iter().map(|&(postulate, expect)| Expectation { operator: op.to_string(), postulate, expect })
        })
        .collect()
}

/// Everything produced by one trial of one operator, for replaying a seed.
pub struct TrialRun {
    pub trial: Trial,
    pub outcome: RevisionOutcome,
    pub verdicts: Vec<PostulateVerdict>,
}

pub fn run_trial(operator: &Operator, seed: u64, generator: &GeneratorConfig, scope: ScopeKind) -> Result<TrialRun> {
    let trial = trial(seed, generator)?;
    let env = RevisionEnv::new(&trial.table, scope);
    let outcome = operator.revise(env, &trial.kb, &trial.input)?;
    let verdicts = check_all(Instance {
        table: &trial.table,
        scope,
        kb: &trial.kb,
        input: &trial.input,
        outcome: &outcome,
        operator,
        paired: Some(&trial.paired),
    })?;
    Ok(TrialRun { trial, outcome, verdicts })
}

pub fn run_matrix(cfg: &MatrixConfig) -> Matrix {
    let rows = cfg
        .operators
        .iter()
        .map(|op| {
            let mut row = OperatorRow {
                operator: op.name(),
                config: op.clone(),
                errors: 0,
                first_error: None,
                cells: PostulateId::ALL.into_iter().map(|p| (p, Cell::default())).collect(),
            };
            for i in 0..cfg.trials {
                let seed = trial_seed(cfg.seed, i as u64);
                match run_trial(op, seed, &cfg.generator, cfg.scope) {
                    Ok(run) => {
                        for v in &run.verdicts {
                            row.cells.get_mut(&v.postulate).expect("all postulates present").add(seed, v);
                        }
                    }
                    Err(e) => {
                        row.errors += 1;
                        row.first_error.get_or_insert((seed, e.to_string()));
                    }
                }
            }
            row
        })
        .collect();
    Matrix { seed: cfg.seed, trials: cfg.trials, scope: cfg.scope, rows }
}

impl Matrix {
    pub fn row(&self, operator: &str) -> Option<&OperatorRow> {
        self.rows.iter().find(|r| r.operator == operator)
    }

    /// Expectations the matrix contradicts, each with a replayable seed where
    /// one exists. Trial errors are always reported.
    pub fn unexpected(&self, expectations: &[Expectation]) -> Vec<String> {
        let mut out = Vec::new();
        for row in &self.rows {
            if let Some((seed, e)) = &row.first_error {
                out.push(format!("{}: {} trial errors, first at seed {seed}: {e}", row.operator, row.errors));
            }
        }
        for e in expectations {
            let Some(row) = self.row(&e.operator) else {
                continue;
            };
            let cell = &row.cells[&e.postulate];
            match e.expect {
                Expect::NeverViolated if cell.fails > 0 => {
                    let f = cell.first_failure.as_ref().expect("failure recorded");
                    out.push(format!(
                        "{} {}: {} violations, replay with seed {} ({:?})",
                        e.operator, e.postulate, cell.fails, f.seed, f.witness
                    ));
                }
                Expect::Violated if cell.fails == 0 => {
                    out.push(format!("{} {}: expected a violation, none in {} trials", e.operator, e.postulate, self.trials));
                }
                _ => {}
            }
        }
        out
    }

    /// Plain-text table: one row per postulate, one column per operator.
    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.operator.len()).max().unwrap_or(0).max(8);
        let mut s = String::new();
        let _ = write!(s, "{:<26}", "postulate");
        for r in &self.rows {
            let _ = write!(s, " {:>width$}", r.operator);
        }
        s.push('\n');
        for p in PostulateId::ALL {
            let _ = write!(s, "{:<26}", p.name());
            for r in &self.rows {
                let _ = write!(s, " {:>width$}", r.cells[&p].symbol());
            }
            s.push('\n');
        }
        let _ = writeln!(s, "{} trials per cell, base seed {}, scope {:?}", self.trials, self.seed, self.scope);
        s
    }
}
