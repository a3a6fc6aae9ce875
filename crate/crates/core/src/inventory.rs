//! Process-inventory graphs, emission-factor tables, and scenario
//! substitution rules, with parsing and validation for each.
//!
//! All types are immutable after construction and safe to share across
//! concurrent evaluations; scenario application returns a new graph.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::Read;
use thiserror::Error;

/// Whether an exchange draws on an emission-factor entry or on another
/// process in the same graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeKind {
    Leaf,
    Process,
}

/// One input flow into a process, per unit of the owning process's
/// reference flow. For `kind = process` the `input` field names a process
/// id in the same graph; for leaves it names an emission-factor entry
/// together with `origin` and `unit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRef {
    #[serde(rename = "input")]
    pub input_name: String,
    pub origin: String,
    pub amount: f64,
    pub unit: String,
    pub kind: ExchangeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFlow {
    pub quantity: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessInventory {
    pub id: String,
    pub reference_flow: ReferenceFlow,
    pub exchanges: Vec<ExchangeRef>,
}

/// A validated collection of processes. The directed graph induced by
/// process-kind exchanges is acyclic and fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryGraph {
    pub processes: Vec<ProcessInventory>,
}

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("duplicate process id '{0}'")]
    DuplicateProcessId(String),
    #[error("process '{process}' references unknown process '{input}'")]
    DanglingReference { process: String, input: String },
    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("process '{process}', exchange '{input}': negative amount {amount}")]
    NegativeAmount { process: String, input: String, amount: f64 },
    #[error("process '{process}', exchange '{input}': amount is not finite")]
    NonFiniteAmount { process: String, input: String },
    #[error("process '{process}': reference flow quantity {quantity} must be positive")]
    NonPositiveReferenceFlow { process: String, quantity: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl InventoryGraph {
    /// Parse and validate an inventory document.
    pub fn parse(document: &str) -> Result<Self, InventoryError> {
        let graph: InventoryGraph =
            serde_json::from_str(document).map_err(|e| InventoryError::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        graph.check()?;
        Ok(graph)
    }

    pub fn from_reader<R: Read>(mut reader: R) -> Result<Self, InventoryError> {
        let mut buf = String::new();
        reader.read_to_string(&mut buf)?;
        Self::parse(&buf)
    }

    /// Canonical JSON serialization; `parse` round-trips it field for field.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("inventory serialization cannot fail")
    }

    pub fn process(&self, id: &str) -> Option<&ProcessInventory> {
        self.processes.iter().find(|p| p.id == id)
    }

    /// The unique process no other process references, if there is exactly one.
    pub fn root_process(&self) -> Option<&ProcessInventory> {
        let referenced: HashSet<&str> = self
            .processes
            .iter()
            .flat_map(|p| p.exchanges.iter())
            .filter(|e| e.kind == ExchangeKind::Process)
            .map(|e| e.input_name.as_str())
            .collect();
        let mut roots = self.processes.iter().filter(|p| !referenced.contains(p.id.as_str()));
        match (roots.next(), roots.next()) {
            (Some(root), None) => Some(root),
            _ => None,
        }
    }

    /// Structural invariants: unique ids, resolved process references,
    /// acyclicity, finite nonnegative amounts, positive reference flows.
    pub fn check(&self) -> Result<(), InventoryError> {
        let mut ids = HashSet::new();
        for p in &self.processes {
            if !ids.insert(p.id.as_str()) {
                return Err(InventoryError::DuplicateProcessId(p.id.clone()));
            }
            if !(p.reference_flow.quantity > 0.0 && p.reference_flow.quantity.is_finite()) {
                return Err(InventoryError::NonPositiveReferenceFlow {
                    process: p.id.clone(),
                    quantity: p.reference_flow.quantity,
                });
            }
        }
        for p in &self.processes {
            for e in &p.exchanges {
                if e.amount.is_nan() || e.amount.is_infinite() {
                    return Err(InventoryError::NonFiniteAmount {
                        process: p.id.clone(),
                        input: e.input_name.clone(),
                    });
                }
                if e.amount < 0.0 {
                    return Err(InventoryError::NegativeAmount {
                        process: p.id.clone(),
                        input: e.input_name.clone(),
                        amount: e.amount,
                    });
                }
                if e.kind == ExchangeKind::Process && !ids.contains(e.input_name.as_str()) {
                    return Err(InventoryError::DanglingReference {
                        process: p.id.clone(),
                        input: e.input_name.clone(),
                    });
                }
            }
        }
        self.check_acyclic()
    }

    fn check_acyclic(&self) -> Result<(), InventoryError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            InProgress,
            Done,
        }
        fn visit(
            graph: &InventoryGraph,
            id: &str,
            marks: &mut HashMap<String, Mark>,
            path: &mut Vec<String>,
        ) -> Result<(), InventoryError> {
            match marks.get(id) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::InProgress) => {
                    let start = path.iter().position(|p| p == id).unwrap_or(0);
                    let mut cycle: Vec<String> = path[start..].to_vec();
                    cycle.push(id.to_string());
                    return Err(InventoryError::Cycle(cycle));
                }
                None => {}
            }
            marks.insert(id.to_string(), Mark::InProgress);
            path.push(id.to_string());
            if let Some(p) = graph.process(id) {
                for e in &p.exchanges {
                    if e.kind == ExchangeKind::Process {
                        visit(graph, &e.input_name, marks, path)?;
                    }
                }
            }
            path.pop();
            marks.insert(id.to_string(), Mark::Done);
            Ok(())
        }
        let mut marks = HashMap::new();
        let mut path = Vec::new();
        for p in &self.processes {
            visit(self, &p.id, &mut marks, &mut path)?;
        }
        Ok(())
    }
}

/// Key of one emission-factor entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorKey {
    pub input_name: String,
    pub origin: String,
    pub unit: String,
}

/// Map from (input name, origin region, unit) to kg CO2-eq per unit.
#[derive(Debug, Clone, Default)]
pub struct EmissionFactorTable {
    entries: HashMap<FactorKey, f64>,
}

pub const FACTOR_CSV_HEADER: [&str; 4] = ["input_name", "origin", "unit", "gwp_factor"];

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("expected header {expected:?}, found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    #[error("row {row}: duplicate key ({input_name}, {origin}, {unit})")]
    DuplicateKey { row: usize, input_name: String, origin: String, unit: String },
    #[error("row {row}: invalid factor '{value}'")]
    InvalidFactor { row: usize, value: String },
    #[error("row {row}: missing column '{column}'")]
    MissingColumn { row: usize, column: String },
}

impl EmissionFactorTable {
    pub fn parse<R: Read>(reader: R) -> Result<Self, FactorError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
        if headers != FACTOR_CSV_HEADER {
            return Err(FactorError::Header {
                expected: FACTOR_CSV_HEADER.iter().map(|s| s.to_string()).collect(),
                found: headers,
            });
        }
        let mut entries = HashMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let field = |idx: usize, column: &str| -> Result<String, FactorError> {
                rec.get(idx)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .ok_or_else(|| FactorError::MissingColumn {
                        row,
                        column: column.to_string(),
                    })
            };
            let key = FactorKey {
                input_name: field(0, "input_name")?,
                origin: field(1, "origin")?,
                unit: field(2, "unit")?,
            };
            let raw = field(3, "gwp_factor")?;
            let factor: f64 = raw
                .parse()
                .ok()
                .filter(|f: &f64| f.is_finite())
                .ok_or_else(|| FactorError::InvalidFactor { row, value: raw.clone() })?;
            if entries.contains_key(&key) {
                return Err(FactorError::DuplicateKey {
                    row,
                    input_name: key.input_name,
                    origin: key.origin,
                    unit: key.unit,
                });
            }
            entries.insert(key, factor);
        }
        Ok(EmissionFactorTable { entries })
    }

    pub fn lookup(&self, input_name: &str, origin: &str, unit: &str) -> Option<f64> {
        self.entries
            .get(&FactorKey {
                input_name: input_name.to_string(),
                origin: origin.to_string(),
                unit: unit.to_string(),
            })
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: FactorKey, factor: f64) {
        self.entries.insert(key, factor);
    }
}

/// One origin substitution: every exchange whose input name contains
/// `pattern` (case-insensitive) gets `new_origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    #[serde(rename = "match")]
    pub pattern: String,
    pub new_origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub substitutions: Vec<Substitution>,
}

impl ScenarioConfig {
    pub fn parse(document: &str) -> Result<Self, InventoryError> {
        serde_json::from_str(document).map_err(|e| InventoryError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn from_reader<R: Read>(mut reader: R) -> Result<Self, InventoryError> {
        let mut buf = String::new();
        reader.read_to_string(&mut buf)?;
        Self::parse(&buf)
    }

    /// A scenario with no substitutions; applying it returns the graph unchanged.
    pub fn identity(name: &str) -> Self {
        ScenarioConfig { name: name.to_string(), substitutions: Vec::new() }
    }
}

/// Result of applying a scenario: the rewritten graph plus one warning per
/// substitution that matched no exchange.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub graph: InventoryGraph,
    pub warnings: Vec<String>,
}

/// Rewrite exchange origins according to the scenario. Amounts and names
/// are untouched and the input graph is not modified. Matching is a
/// case-insensitive substring test on the exchange input name, applied to
/// leaf and process exchanges alike.
pub fn apply_scenario(graph: &InventoryGraph, scenario: &ScenarioConfig) -> ScenarioOutcome {
    let mut out = graph.clone();
    let mut warnings = Vec::new();
    for sub in &scenario.substitutions {
        let needle = sub.pattern.to_lowercase();
        let mut matched = 0usize;
        for p in &mut out.processes {
            for e in &mut p.exchanges {
                if e.input_name.to_lowercase().contains(&needle) {
                    e.origin = sub.new_origin.clone();
                    matched += 1;
                }
            }
        }
        if matched == 0 {
            warnings.push(format!(
                "scenario '{}': pattern '{}' matched no exchange",
                scenario.name, sub.pattern
            ));
        }
    }
    ScenarioOutcome { graph: out, warnings }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// One validation finding. An empty finding list means the graph can be
/// scored against the table without lookup failures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

fn finding(severity: Severity, code: &str, message: String) -> Finding {
    Finding { severity, code: code.to_string(), message }
}

/// Check every graph invariant and the resolvability of every leaf exchange
/// against `factors`. Findings are returned rather than raised; an empty
/// list guarantees `unit_score` on this pair cannot hit a missing key.
pub fn validate(graph: &InventoryGraph, factors: &EmissionFactorTable) -> Vec<Finding> {
    let mut findings = Vec::new();
    let mut ids = HashSet::new();
    for p in &graph.processes {
        if !ids.insert(p.id.as_str()) {
            findings.push(finding(
                Severity::Error,
                "duplicate_process_id",
                format!("duplicate process id '{}'", p.id),
            ));
        }
        if !(p.reference_flow.quantity > 0.0 && p.reference_flow.quantity.is_finite()) {
            findings.push(finding(
                Severity::Error,
                "nonpositive_reference_flow",
                format!(
                    "process '{}': reference flow quantity {} must be positive",
                    p.id, p.reference_flow.quantity
                ),
            ));
        }
    }
    for p in &graph.processes {
        for e in &p.exchanges {
            if e.amount.is_nan() || e.amount.is_infinite() {
                findings.push(finding(
                    Severity::Error,
                    "nonfinite_amount",
                    format!("process '{}', exchange '{}': amount is not finite", p.id, e.input_name),
                ));
            } else if e.amount < 0.0 {
                findings.push(finding(
                    Severity::Error,
                    "negative_amount",
                    format!(
                        "process '{}', exchange '{}': negative amount {}",
                        p.id, e.input_name, e.amount
                    ),
                ));
            }
            match e.kind {
                ExchangeKind::Process => {
                    if !ids.contains(e.input_name.as_str()) {
                        findings.push(finding(
                            Severity::Error,
                            "dangling_reference",
                            format!(
                                "process '{}' references unknown process '{}'",
                                p.id, e.input_name
                            ),
                        ));
                    }
                }
                ExchangeKind::Leaf => {
                    if factors.lookup(&e.input_name, &e.origin, &e.unit).is_none() {
                        findings.push(finding(
                            Severity::Error,
                            "missing_factor",
                            format!(
                                "no emission factor for ({}, {}, {})",
                                e.input_name, e.origin, e.unit
                            ),
                        ));
                    }
                }
            }
        }
    }
    if let Err(InventoryError::Cycle(path)) = graph.check_acyclic() {
        findings.push(finding(
            Severity::Error,
            "cycle",
            format!("cycle detected: {}", path.join(" -> ")),
        ));
    }
    findings
}
