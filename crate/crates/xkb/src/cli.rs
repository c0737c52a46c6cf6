//! `xkb` command line. Exit codes: 0 success, 1 logical findings, 2 usage or
//! I/O errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use xkb_core::kb::{load_table, validate, ClassifierTable, ExplanationKB, ValidationReport};
use xkb_core::language::{parse_document, parse_rule_fresh, Document, Rule};
use xkb_core::postulates::matrix::{preset_expectations, run_matrix, MatrixConfig};
use xkb_core::postulates::{check_all, oracle, PostulateVerdict, Status};
use xkb_core::revision::{
    self, CredibilityTest, Operator, ProtectedSet, RevisionEnv, RevisionOutcome, Scenario, ScenarioConfig,
    WeakeningStrategy,
};
use xkb_core::semantics::{
    check_complete, tau_coherence, CoherenceValue, CompletenessReport, ConsistencyReport, EnforcementReport,
    Reasoner, ScopeKind,
};

use crate::server::{self, AppState};
use crate::session::{scope_name, Diff};
use crate::store::Store;

#[derive(Parser, Debug)]
#[command(name = "xkb", version, about = "Explanation knowledge bases: checks, revision and postulates")]
pub struct Cli {
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Inputs {
    /// Knowledge base (.xkb document).
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// Classifier table (CSV with the schema's features and a `class` column).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// `full` (every point of the feature space) or `dataset` (table rows).
    #[arg(long, default_value = "full")]
    pub scope: ScopeKind,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Structural and logical report on a KB against its table.
    Validate(Inputs),
    /// Individual checks; without a check flag all applicable ones run.
    Check {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        consistency: bool,
        #[arg(long)]
        coherence: bool,
        #[arg(long)]
        completeness: bool,
        /// τ threshold for --coherence.
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// Rules that should enforce those of --enforce-right.
        #[arg(long, requires = "enforce_right")]
        enforce_left: Option<PathBuf>,
        #[arg(long, requires = "enforce_left")]
        enforce_right: Option<PathBuf>,
    },
    /// Revise a KB by a feedback rule.
    Revise {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        op: OperatorArgs,
        /// Feedback rule, `[id:] body => head`.
        #[arg(long)]
        feedback: String,
        /// Write the revised KB here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Revise, then check every postulate on the result.
    Postulates {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long)]
        feedback: String,
        /// Second input for uniformity.
        #[arg(long)]
        paired: Option<String>,
    },
    /// Compare the fast revision primitives with exhaustive enumeration
    /// (small KBs only).
    Oracle {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        feedback: String,
    },
    /// Postulate conformance matrix of the scenario presets on random KBs.
    Matrix {
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "full")]
        scope: ScopeKind,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Persistence directory; sessions are kept in memory only without it.
        #[arg(long, env = "XKB_STORE")]
        store: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct OperatorArgs {
    /// Feedback setting: s1, s2 or s3.
    #[arg(long, default_value = "s1", conflicts_with = "operator")]
    pub scenario: Scenario,
    /// Scenario variant label as listed by `revise --json` (e.g.
    /// `s1+weaken_existing`); the preset when omitted.
    #[arg(long, conflicts_with = "operator")]
    pub variant: Option<String>,
    /// A plain operator with default settings instead of a scenario:
    /// expansion, partial_meet, kernel, screened, credibility_limited, selective.
    #[arg(long)]
    pub operator: Option<String>,
}

impl OperatorArgs {
    fn build(&self, scope: ScopeKind) -> anyhow::Result<Operator> {
        if let Some(name) = &self.operator {
            return Ok(match name.as_str() {
                "expansion" => Operator::Expansion,
                "partial_meet" => Operator::PartialMeet { selection: Default::default() },
                "kernel" => Operator::Kernel { incision: Default::default() },
                "screened" => Operator::Screened { protected: ProtectedSet::Kd, selection: Default::default() },
                "credibility_limited" => Operator::CredibilityLimited {
                    test: CredibilityTest::ConsistentWithKd,
                    selection: Default::default(),
                },
                "selective" => Operator::Selective {
                    strategy: WeakeningStrategy::BodyRestriction,
                    protected: ProtectedSet::All,
                },
                other => bail!("unknown operator {other}"),
            });
        }
        let variants = ScenarioConfig::variants(self.scenario, scope);
        let config = match &self.variant {
            None => variants.into_iter().next().expect("variants start with the preset"),
            Some(label) => {
                let labels: Vec<String> = variants.iter().map(ScenarioConfig::label).collect();
                variants
                    .into_iter()
                    .find(|c| c.label() == *label)
                    .ok_or_else(|| anyhow!("unknown variant {label} (available: {})", labels.join(", ")))?
            }
        };
        Ok(Operator::Scenario { config })
    }
}

/// A command's printable result and whether it reported a finding.
struct Report {
    text: String,
    json: serde_json::Value,
    finding: bool,
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    run(cli)
}

pub fn run(cli: Cli) -> ExitCode {
    if let Command::Serve { port, store } = cli.command {
        return match serve(port, store) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {}", error_text(&e));
                ExitCode::from(2)
            }
        };
    }
    match execute(&cli.command) {
        Ok(report) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report.json).expect("report serializes"));
            } else {
                print!("{}", report.text);
            }
            if report.finding {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {}", error_text(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain joined by `: `, skipping causes already quoted by the
/// message before them.
fn error_text(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if parts.last().is_some_and(|prev| prev.contains(&msg)) {
            continue;
        }
        parts.push(msg);
    }
    parts.join(": ")
}

fn serve(port: u16, store: Option<PathBuf>) -> anyhow::Result<()> {
    let state = match store {
        Some(dir) => {
            let store = Store::open(&dir)?;
            let state = AppState::with_store(store)?;
            eprintln!("loaded {} sessions from {}", state.summaries().len(), dir.display());
            state
        }
        None => AppState::in_memory(),
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(server::serve(state, port))?;
    Ok(())
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_doc(path: &Path) -> anyhow::Result<Document> {
    parse_document(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_kb(inputs: &Inputs) -> anyhow::Result<ExplanationKB> {
    let path = inputs.kb.as_ref().ok_or_else(|| anyhow!("--kb is required"))?;
    ExplanationKB::from_document(load_doc(path)?).with_context(|| format!("loading {}", path.display()))
}

fn load_tbl(path: &Path, kb: &ExplanationKB) -> anyhow::Result<ClassifierTable> {
    let text = read(path)?;
    load_table(text.as_bytes(), kb.schema()).with_context(|| format!("loading {}", path.display()))
}

fn require_table(inputs: &Inputs, kb: &ExplanationKB) -> anyhow::Result<ClassifierTable> {
    let path = inputs.table.as_ref().ok_or_else(|| anyhow!("--table is required"))?;
    load_tbl(path, kb)
}

/// The table when given; dataset scope needs one.
fn optional_table(inputs: &Inputs, kb: &ExplanationKB) -> anyhow::Result<Option<ClassifierTable>> {
    match &inputs.table {
        Some(p) => Ok(Some(load_tbl(p, kb)?)),
        None if inputs.scope == ScopeKind::Dataset => bail!("--table is required in dataset scope"),
        None => Ok(None),
    }
}

fn reasoner<'a>(kb: &'a ExplanationKB, table: Option<&'a ClassifierTable>, scope: ScopeKind) -> anyhow::Result<Reasoner<'a>> {
    Ok(match (scope, table) {
        (ScopeKind::Dataset, Some(t)) => Reasoner::new(kb.schema(), scope.bind(t))?,
        (ScopeKind::Dataset, None) => bail!("--table is required in dataset scope"),
        (ScopeKind::Full, _) => Reasoner::full(kb.schema()),
    })
}

fn execute(cmd: &Command) -> anyhow::Result<Report> {
    match cmd {
        Command::Validate(inputs) => validate_cmd(inputs),
        Command::Check { inputs, consistency, coherence, completeness, tau, enforce_left, enforce_right } => {
            let enforce = enforce_left.as_deref().zip(enforce_right.as_deref());
            check_cmd(inputs, *consistency, *coherence, *completeness, *tau, enforce)
        }
        Command::Revise { inputs, op, feedback, out } => revise_cmd(inputs, op, feedback, out.as_deref()),
        Command::Postulates { inputs, op, feedback, paired } => postulates_cmd(inputs, op, feedback, paired.as_deref()),
        Command::Oracle { inputs, feedback } => oracle_cmd(inputs, feedback),
        Command::Matrix { trials, seed, scope } => matrix_cmd(*trials, *seed, *scope),
        Command::Serve { .. } => unreachable!("handled in run"),
    }
}

fn to_json(v: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

fn validate_cmd(inputs: &Inputs) -> anyhow::Result<Report> {
    let kb = load_kb(inputs)?;
    let table = require_table(inputs, &kb)?;
    let report: ValidationReport = validate(&kb, &table, inputs.scope.bind(&table))?;
    let mut text = String::new();
    let _ = writeln!(text, "rules: {} data, {} explanation", kb.kd().len(), kb.ke().len());
    let _ = writeln!(text, "K_d complete: {}", yes_no(report.kd_completeness.complete));
    let _ = writeln!(text, "K_d coherent: {}", yes_no(report.kd_coherent));
    let _ = writeln!(
        text,
        "consistent ({} scope): {}",
        scope_name(inputs.scope),
        yes_no(report.kb_consistency.consistent)
    );
    for (id, tau) in &report.ke_tau {
        let _ = writeln!(text, "  τ({id}) = {}", tau_text(tau));
    }
    if report.warnings.is_empty() {
        text.push_str("no warnings\n");
    }
    for w in &report.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    Ok(Report { text, finding: !report.is_clean(), json: to_json(&report) })
}

#[derive(Serialize)]
struct TauRow {
    id: String,
    tau: CoherenceValue,
    coherent: bool,
}

#[derive(Serialize, Default)]
struct CheckReport {
    scope: ScopeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    consistency: Option<ConsistencyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coherence: Option<Vec<TauRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    completeness: Option<CompletenessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    enforcement: Option<EnforcementReport>,
}

fn check_cmd(
    inputs: &Inputs,
    consistency: bool,
    coherence: bool,
    completeness: bool,
    tau: f64,
    enforce: Option<(&Path, &Path)>,
) -> anyhow::Result<Report> {
    let any_flag = consistency || coherence || completeness || enforce.is_some();
    let mut out = CheckReport { scope: inputs.scope, ..Default::default() };
    let mut text = String::new();
    let mut finding = false;

    if let Some((left, right)) = enforce {
        let (l, r) = (load_doc(left)?, load_doc(right)?);
        if l.schema != r.schema {
            bail!("{} and {} declare different schemas", left.display(), right.display());
        }
        let holder = ExplanationKB::new(l.schema.clone(), Vec::new(), Vec::new())?;
        let table = optional_table(inputs, &holder)?;
        let rep = reasoner(&holder, table.as_ref(), inputs.scope)?.enforces(&l.rules, &r.rules)?;
        let _ = writeln!(text, "{} enforces {}: {}", left.display(), right.display(), yes_no(rep.holds));
        if let Some(c) = &rep.counterexample {
            let _ = writeln!(text, "  counterexample: {} at ({})", c.rule, c.point.join(", "));
        }
        finding |= !rep.holds;
        out.enforcement = Some(rep);
    }

    if inputs.kb.is_some() {
        let kb = load_kb(inputs)?;
        let table = optional_table(inputs, &kb)?;
        let all = kb.all_rules();
        if consistency || !any_flag {
            let rep = reasoner(&kb, table.as_ref(), inputs.scope)?.check_consistency(&all)?;
            let edges = rep.edges.len() + rep.self_loops.len();
            let _ = writeln!(
                text,
                "consistent ({} scope): {}, {edges} conflict edges",
                scope_name(inputs.scope),
                yes_no(rep.consistent)
            );
            for e in &rep.edges {
                let _ = writeln!(text, "  {} / {} at ({})", e.rule_a, e.rule_b, e.point.join(", "));
            }
            for s in &rep.self_loops {
                let _ = writeln!(text, "  {} conflicts with itself at ({})", s.rule, s.point.join(", "));
            }
            finding |= !rep.consistent;
            out.consistency = Some(rep);
        }
        match table.as_ref() {
            Some(t) => {
                if coherence || !any_flag {
                    let mut rows = Vec::new();
                    for r in &all {
                        let v = tau_coherence(r, t)?;
                        rows.push(TauRow { id: r.id.clone(), tau: v, coherent: v.meets(tau) });
                    }
                    let bad: Vec<&str> = rows.iter().filter(|r| !r.coherent).map(|r| r.id.as_str()).collect();
                    let _ = writeln!(text, "τ-coherent (τ = {tau}): {}", yes_no(bad.is_empty()));
                    for r in &rows {
                        let _ = writeln!(text, "  τ({}) = {}", r.id, tau_text(&r.tau));
                    }
                    finding |= !bad.is_empty();
                    out.coherence = Some(rows);
                }
                if completeness || !any_flag {
                    let rep = check_complete(kb.kd(), t);
                    let _ = writeln!(text, "K_d complete: {}", yes_no(rep.complete));
                    for m in &rep.missing {
                        let _ = writeln!(text, "  missing ({})", m.join(", "));
                    }
                    for e in &rep.extras {
                        let _ = writeln!(text, "  extra {e}");
                    }
                    finding |= !rep.complete;
                    out.completeness = Some(rep);
                }
            }
            None if coherence || completeness => bail!("--coherence and --completeness need --table"),
            None => {}
        }
    } else if !any_flag || consistency || coherence || completeness {
        bail!("--kb is required");
    }
    Ok(Report { text, finding, json: to_json(&out) })
}

struct Revised {
    kb: ExplanationKB,
    table: ClassifierTable,
    input: Rule,
    operator: Operator,
    scope: ScopeKind,
    outcome: RevisionOutcome,
}

fn revise_with(inputs: &Inputs, op: &OperatorArgs, feedback: &str) -> anyhow::Result<Revised> {
    let kb = load_kb(inputs)?;
    let table = require_table(inputs, &kb)?;
    let input = parse_rule_fresh(kb.schema(), feedback, |id| kb.contains_id(id)).context("parsing --feedback")?;
    let operator = op.build(inputs.scope)?;
    let scope = operator.scope(inputs.scope);
    let outcome = operator.revise(RevisionEnv::new(&table, scope), &kb, &input)?;
    Ok(Revised { kb, table, input, operator, scope, outcome })
}

fn revise_cmd(inputs: &Inputs, op: &OperatorArgs, feedback: &str, out: Option<&Path>) -> anyhow::Result<Report> {
    let rv = revise_with(inputs, op, feedback)?;
    let trace = &rv.outcome.trace;
    let diff = Diff::between(&rv.kb, &rv.outcome.kb_after, trace);
    let status = if trace.accepted { "accepted" } else { "rejected" };
    let mut text = String::new();
    let _ = writeln!(text, "operator: {}", trace.operator);
    let _ = writeln!(text, "input: {}", rv.input);
    if diff.is_empty() {
        let _ = writeln!(text, "outcome: {status}, KB unchanged");
    } else {
        let _ = writeln!(text, "outcome: {status}");
    }
    for r in &diff.removed {
        let _ = writeln!(text, "  - {r}");
    }
    for w in &diff.weakened {
        let _ = writeln!(text, "  ~ {}  =>  {}", w.old, w.new);
    }
    for r in &diff.added {
        let _ = writeln!(text, "  + {r}");
    }
    for n in &trace.notes {
        let _ = writeln!(text, "note: {n}");
    }
    let m = &rv.outcome.metrics_after;
    let _ = writeln!(
        text,
        "conflict edges: {}, drift: {}/{}",
        m.conflict_edge_count, m.drift.num, m.drift.den
    );
    let rendered = rv.outcome.kb_after.render();
    match out {
        Some(path) => {
            std::fs::write(path, &rendered).with_context(|| format!("writing {}", path.display()))?;
            let _ = writeln!(text, "wrote {}", path.display());
        }
        None => {
            text.push('\n');
            text.push_str(&rendered);
        }
    }
    let json = serde_json::json!({
        "status": status,
        "outcome": to_json(&rv.outcome),
        "diff": to_json(&diff),
        "kb_text": rendered,
    });
    Ok(Report { text, json, finding: false })
}

fn postulates_cmd(inputs: &Inputs, op: &OperatorArgs, feedback: &str, paired: Option<&str>) -> anyhow::Result<Report> {
    let rv = revise_with(inputs, op, feedback)?;
    let paired = paired
        .map(|t| parse_rule_fresh(rv.kb.schema(), t, |id| rv.kb.contains_id(id) || id == rv.input.id))
        .transpose()
        .context("parsing --paired")?;
    let verdicts: Vec<PostulateVerdict> = check_all(xkb_core::postulates::Instance {
        table: &rv.table,
        scope: rv.scope,
        kb: &rv.kb,
        input: &rv.input,
        outcome: &rv.outcome,
        operator: &rv.operator,
        paired: paired.as_ref(),
    })?;
    let mut text = String::new();
    let _ = writeln!(text, "operator: {}  input: {}", rv.outcome.trace.operator, rv.input);
    for v in &verdicts {
        let mark = match v.verdict.status {
            Status::Holds => "holds",
            Status::Fails => "FAILS",
            Status::NotApplicable => "n/a",
        };
        let _ = write!(text, "  {:<26} {mark}", v.postulate.name());
        if let Some(w) = &v.verdict.witness {
            let _ = write!(text, "  {}", serde_json::to_string(w).expect("witness serializes"));
        }
        text.push('\n');
    }
    let finding = verdicts.iter().any(|v| v.verdict.status == Status::Fails);
    let json = serde_json::json!({ "operator": rv.outcome.trace.operator, "verdicts": to_json(&verdicts) });
    Ok(Report { text, json, finding })
}

#[derive(Serialize)]
struct OracleReport {
    scope: ScopeKind,
    remainders: Vec<Vec<String>>,
    kernels: Vec<Vec<String>>,
    remainders_agree: bool,
    kernels_agree: bool,
    consistency_agrees: bool,
}

fn normalize(mut sets: Vec<Vec<String>>) -> Vec<Vec<String>> {
    sets.iter_mut().for_each(|s| s.sort());
    sets.sort();
    sets
}

fn oracle_cmd(inputs: &Inputs, feedback: &str) -> anyhow::Result<Report> {
    let kb = load_kb(inputs)?;
    let table = optional_table(inputs, &kb)?;
    let input = parse_rule_fresh(kb.schema(), feedback, |id| kb.contains_id(id)).context("parsing --feedback")?;
    let k = kb.all_rules();
    let schema = kb.schema();
    let scope = inputs.scope;
    let reasoner = reasoner(&kb, table.as_ref(), scope)?;

    let slow_rem = normalize(oracle::remainders(schema, scope, table.as_ref(), &k, &input)?);
    let slow_ker = normalize(oracle::kernels(schema, scope, table.as_ref(), &k, &input)?);
    let fast_rem = normalize(revision::remainders(&reasoner, &k, &input, 1 << 12)?);
    let fast_ker = normalize(revision::kernels(&reasoner, &k, &input)?);
    let mut with_input = k.clone();
    with_input.push(input.clone());
    let slow_cons = oracle::def3(schema, scope, table.as_ref(), &with_input)?.is_none();
    let fast_cons = reasoner.is_consistent(&with_input)?;

    let rep = OracleReport {
        scope,
        remainders_agree: slow_rem == fast_rem,
        kernels_agree: slow_ker == fast_ker,
        consistency_agrees: slow_cons == fast_cons,
        remainders: slow_rem,
        kernels: slow_ker,
    };
    let mut text = String::new();
    let _ = writeln!(text, "K ∪ {{{}}} consistent: {}", input.id, yes_no(slow_cons));
    let _ = writeln!(text, "remainders ({}):", rep.remainders.len());
    for r in &rep.remainders {
        let _ = writeln!(text, "  {{{}}}", r.join(", "));
    }
    let _ = writeln!(text, "kernels ({}):", rep.kernels.len());
    for r in &rep.kernels {
        let _ = writeln!(text, "  {{{}}}", r.join(", "));
    }
    let agree = rep.remainders_agree && rep.kernels_agree && rep.consistency_agrees;
    let _ = writeln!(text, "fast paths agree with enumeration: {}", yes_no(agree));
    Ok(Report { text, finding: !agree, json: to_json(&rep) })
}

fn matrix_cmd(trials: usize, seed: u64, scope: ScopeKind) -> anyhow::Result<Report> {
    let m = run_matrix(&MatrixConfig::presets(scope, seed, trials));
    let unexpected = m.unexpected(&preset_expectations());
    let mut text = m.render();
    for u in &unexpected {
        let _ = writeln!(text, "unexpected: {u}");
    }
    let json = serde_json::json!({ "matrix": to_json(&m), "unexpected": unexpected });
    Ok(Report { text, finding: !unexpected.is_empty(), json })
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn tau_text(v: &CoherenceValue) -> String {
    match v {
        CoherenceValue::Vacuous => "vacuous".into(),
        CoherenceValue::Ratio { num, den } => format!("{num}/{den}"),
    }
}
