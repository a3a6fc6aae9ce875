//! Recursive GWP scoring over an inventory graph: contribution trees,
//! scenario comparison, functional-unit basis conversion, and flat
//! contribution rankings.
//!
//! Evaluation is a post-order DFS memoized on process id, so shared
//! sub-processes are scored once per invocation and the cost stays linear
//! in graph size. Scores are per unit of the process reference flow.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::inventory::{
    apply_scenario, EmissionFactorTable, ExchangeKind, ExchangeRef, InventoryGraph,
    ScenarioConfig,
};
use crate::parallel;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown process '{0}'")]
    UnknownProcess(String),
    #[error("no emission factor for ({input_name}, {origin}, {unit})")]
    MissingFactor { input_name: String, origin: String, unit: String },
    #[error("cycle detected at process '{0}'")]
    Cycle(String),
    #[error("specific energy must be positive and finite, got {0}")]
    NonPositiveSpecificEnergy(f64),
}

/// One exchange's contribution to a process score. `child` is present
/// exactly for process-kind exchanges and holds the sub-process breakdown;
/// its total times the exchange amount equals `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub exchange: ExchangeRef,
    pub score: f64,
    pub share: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub child: Option<Box<ScoreBreakdown>>,
}

/// Recursive GWP contribution tree for one process under one scenario,
/// in kg CO2-eq per unit reference flow.
///
/// When any contribution is negative (credits), `has_negative` is set and
/// shares are reported against the sum of absolute scores instead of the
/// total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub process_id: String,
    pub scenario: String,
    pub total: f64,
    pub has_negative: bool,
    pub contributions: Vec<Contribution>,
}

pub const BASELINE_SCENARIO: &str = "baseline";

/// Score `process_id` against `factors`, labelling the result as the
/// baseline scenario.
pub fn unit_score(
    graph: &InventoryGraph,
    factors: &EmissionFactorTable,
    process_id: &str,
) -> Result<ScoreBreakdown, EngineError> {
    unit_score_labelled(graph, factors, process_id, BASELINE_SCENARIO)
}

/// Score `process_id`, labelling the breakdown with a scenario name.
pub fn unit_score_labelled(
    graph: &InventoryGraph,
    factors: &EmissionFactorTable,
    process_id: &str,
    scenario: &str,
) -> Result<ScoreBreakdown, EngineError> {
    let mut memo: HashMap<String, ScoreBreakdown> = HashMap::new();
    let mut in_progress: Vec<String> = Vec::new();
    score_process(graph, factors, process_id, scenario, &mut memo, &mut in_progress)
}

fn score_process(
    graph: &InventoryGraph,
    factors: &EmissionFactorTable,
    process_id: &str,
    scenario: &str,
    memo: &mut HashMap<String, ScoreBreakdown>,
    in_progress: &mut Vec<String>,
) -> Result<ScoreBreakdown, EngineError> {
    if let Some(done) = memo.get(process_id) {
        return Ok(done.clone());
    }
    if in_progress.iter().any(|p| p == process_id) {
        return Err(EngineError::Cycle(process_id.to_string()));
    }
    let process = graph
        .process(process_id)
        .ok_or_else(|| EngineError::UnknownProcess(process_id.to_string()))?;

    in_progress.push(process_id.to_string());
    let mut contributions = Vec::with_capacity(process.exchanges.len());
    let mut total = 0.0;
    for exchange in &process.exchanges {
        let (score, child) = match exchange.kind {
            ExchangeKind::Leaf => {
                let factor = factors
                    .lookup(&exchange.input_name, &exchange.origin, &exchange.unit)
                    .ok_or_else(|| EngineError::MissingFactor {
                        input_name: exchange.input_name.clone(),
                        origin: exchange.origin.clone(),
                        unit: exchange.unit.clone(),
                    })?;
                (exchange.amount * factor, None)
            }
            ExchangeKind::Process => {
                let sub = score_process(
                    graph,
                    factors,
                    &exchange.input_name,
                    scenario,
                    memo,
                    in_progress,
                )?;
                (exchange.amount * sub.total, Some(Box::new(sub)))
            }
        };
        total += score;
        contributions.push(Contribution { exchange: exchange.clone(), score, share: 0.0, child });
    }
    in_progress.pop();

    let has_negative = contributions.iter().any(|c| c.score < 0.0);
    let denom = if has_negative {
        contributions.iter().map(|c| c.score.abs()).sum::<f64>()
    } else {
        total
    };
    for c in &mut contributions {
        c.share = if denom > 0.0 { c.score / denom } else { 0.0 };
    }

    let breakdown = ScoreBreakdown {
        process_id: process_id.to_string(),
        scenario: scenario.to_string(),
        total,
        has_negative,
        contributions,
    };
    memo.insert(process_id.to_string(), breakdown.clone());
    Ok(breakdown)
}

/// Score one process under each scenario, in order. Each breakdown is
/// computed on `apply_scenario(graph, s)`; scenarios are independent and
/// evaluated in parallel when the `parallel` feature is on.
pub fn compare_scenarios(
    graph: &InventoryGraph,
    factors: &EmissionFactorTable,
    process_id: &str,
    scenarios: &[ScenarioConfig],
) -> Result<Vec<ScoreBreakdown>, EngineError> {
    parallel::map_ordered(scenarios, |scenario| {
        let applied = apply_scenario(graph, scenario);
        unit_score_labelled(&applied.graph, factors, process_id, &scenario.name)
    })
    .into_iter()
    .collect()
}

/// Conversion between a mass basis and an energy basis via the pack's
/// specific energy in kWh per kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConversion {
    pub specific_energy: f64,
}

impl BasisConversion {
    pub fn new(specific_energy: f64) -> Result<Self, EngineError> {
        if !(specific_energy > 0.0 && specific_energy.is_finite()) {
            return Err(EngineError::NonPositiveSpecificEnergy(specific_energy));
        }
        Ok(BasisConversion { specific_energy })
    }
}

/// kg CO2-eq per kg -> kg CO2-eq per kWh.
pub fn convert_basis(score_per_kg: f64, conv: BasisConversion) -> f64 {
    score_per_kg / conv.specific_energy
}

/// One row of a flattened contribution ranking. The path walks exchange
/// names from the scored root down to the entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedContribution {
    pub path: Vec<String>,
    pub score: f64,
    pub share: f64,
}

/// Flatten a breakdown to `depth` levels and sort descending by score.
/// Shares are re-expressed against the root total. Depth 0 is the root
/// itself; at depth d, process contributions shallower than d are replaced
/// by their scaled children.
pub fn contribution_ranking(breakdown: &ScoreBreakdown, depth: usize) -> Vec<RankedContribution> {
    let root_denom = if breakdown.has_negative {
        breakdown.contributions.iter().map(|c| c.score.abs()).sum::<f64>()
    } else {
        breakdown.total
    };
    let share_of = |score: f64| if root_denom > 0.0 { score / root_denom } else { 0.0 };

    let mut out = Vec::new();
    if depth == 0 {
        out.push(RankedContribution {
            path: vec![breakdown.process_id.clone()],
            score: breakdown.total,
            share: if breakdown.total != 0.0 || root_denom > 0.0 { 1.0 } else { 0.0 },
        });
        return out;
    }
    fn walk(
        contributions: &[Contribution],
        scale: f64,
        remaining: usize,
        prefix: &[String],
        out: &mut Vec<(Vec<String>, f64)>,
    ) {
        for c in contributions {
            let mut path = prefix.to_vec();
            path.push(c.exchange.input_name.clone());
            match (&c.child, remaining) {
                (Some(child), r) if r > 1 => {
                    walk(&child.contributions, scale * c.exchange.amount, r - 1, &path, out);
                }
                _ => out.push((path, scale * c.score)),
            }
        }
    }
    let mut rows = Vec::new();
    walk(&breakdown.contributions, 1.0, depth, &[], &mut rows);
    out.extend(rows.into_iter().map(|(path, score)| RankedContribution {
        path,
        score,
        share: share_of(score),
    }));
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.path.cmp(&b.path)));
    out
}

/// One edge of the contribution flow graph: parent process to exchange
/// target, weighted by the (scaled) contribution score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SankeyEdge {
    pub source: String,
    pub target: String,
    pub value: f64,
}

/// Edge list of the contribution tree down to `depth` levels (all levels
/// when `None`). Child subtree values are scaled by the parent exchange
/// amount, so each process node's inflow equals its outflow.
pub fn sankey_edges(breakdown: &ScoreBreakdown, depth: Option<usize>) -> Vec<SankeyEdge> {
    fn walk(b: &ScoreBreakdown, scale: f64, remaining: Option<usize>, out: &mut Vec<SankeyEdge>) {
        if remaining == Some(0) {
            return;
        }
        let next = remaining.map(|d| d - 1);
        for c in &b.contributions {
            out.push(SankeyEdge {
                source: b.process_id.clone(),
                target: c.exchange.input_name.clone(),
                value: scale * c.score,
            });
            if let Some(child) = &c.child {
                walk(child, scale * c.exchange.amount, next, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(breakdown, 1.0, depth, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::FactorKey;

    fn leaf(name: &str, origin: &str, amount: f64) -> ExchangeRef {
        ExchangeRef {
            input_name: name.to_string(),
            origin: origin.to_string(),
            amount,
            unit: "kg".to_string(),
            kind: ExchangeKind::Leaf,
        }
    }

    fn proc_ref(id: &str, amount: f64) -> ExchangeRef {
        ExchangeRef {
            input_name: id.to_string(),
            origin: "GLO".to_string(),
            amount,
            unit: "kg".to_string(),
            kind: ExchangeKind::Process,
        }
    }

    fn process(id: &str, exchanges: Vec<ExchangeRef>) -> crate::inventory::ProcessInventory {
        crate::inventory::ProcessInventory {
            id: id.to_string(),
            reference_flow: crate::inventory::ReferenceFlow {
                quantity: 1.0,
                unit: "kg".to_string(),
            },
            exchanges,
        }
    }

    fn table(entries: &[(&str, &str, f64)]) -> EmissionFactorTable {
        let mut t = EmissionFactorTable::default();
        for (name, origin, f) in entries {
            t.insert(
                FactorKey {
                    input_name: name.to_string(),
                    origin: origin.to_string(),
                    unit: "kg".to_string(),
                },
                *f,
            );
        }
        t
    }

    #[test]
    fn leaf_and_nested_scoring() {
        let graph = InventoryGraph {
            processes: vec![
                process("pack", vec![proc_ref("cell", 0.5), leaf("al", "GLO", 2.0)]),
                process("cell", vec![leaf("cathode", "CN", 3.0)]),
            ],
        };
        let t = table(&[("al", "GLO", 10.0), ("cathode", "CN", 4.0)]);
        let b = unit_score(&graph, &t, "pack").unwrap();
        // cell total = 12, pack = 0.5*12 + 2*10 = 26
        assert_eq!(b.total, 26.0);
        assert_eq!(b.contributions[0].score, 6.0);
        let child = b.contributions[0].child.as_ref().unwrap();
        assert_eq!(child.total, 12.0);
        assert!((b.contributions[0].share - 6.0 / 26.0).abs() < 1e-15);
        let share_sum: f64 = b.contributions.iter().map(|c| c.share).sum();
        assert!((share_sum - 1.0).abs() < 1e-12);
        assert!(!b.has_negative);
    }

    #[test]
    fn zero_exchange_process_scores_zero() {
        let graph = InventoryGraph { processes: vec![process("empty", vec![])] };
        let b = unit_score(&graph, &EmissionFactorTable::default(), "empty").unwrap();
        assert_eq!(b.total, 0.0);
        assert!(b.contributions.is_empty());
    }

    #[test]
    fn missing_factor_names_key() {
        let graph =
            InventoryGraph { processes: vec![process("p", vec![leaf("mystery", "XX", 1.0)])] };
        match unit_score(&graph, &EmissionFactorTable::default(), "p") {
            Err(EngineError::MissingFactor { input_name, origin, unit }) => {
                assert_eq!(input_name, "mystery");
                assert_eq!(origin, "XX");
                assert_eq!(unit, "kg");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_process_rejected() {
        let graph = InventoryGraph { processes: vec![] };
        assert!(matches!(
            unit_score(&graph, &EmissionFactorTable::default(), "nope"),
            Err(EngineError::UnknownProcess(_))
        ));
    }

    #[test]
    fn memoized_and_naive_evaluation_agree_exactly() {
        // diamond: top -> {left, right} -> shared
        let graph = InventoryGraph {
            processes: vec![
                process("top", vec![proc_ref("left", 0.3), proc_ref("right", 0.7)]),
                process("left", vec![proc_ref("shared", 2.0), leaf("al", "GLO", 1.0)]),
                process("right", vec![proc_ref("shared", 5.0)]),
                process("shared", vec![leaf("cathode", "CN", 1.5)]),
            ],
        };
        let t = table(&[("al", "GLO", 10.0), ("cathode", "CN", 4.0)]);

        fn naive(graph: &InventoryGraph, t: &EmissionFactorTable, id: &str) -> f64 {
            let p = graph.process(id).unwrap();
            p.exchanges
                .iter()
                .map(|e| match e.kind {
                    ExchangeKind::Leaf => {
                        e.amount * t.lookup(&e.input_name, &e.origin, &e.unit).unwrap()
                    }
                    ExchangeKind::Process => e.amount * naive(graph, t, &e.input_name),
                })
                .sum()
        }

        let b = unit_score(&graph, &t, "top").unwrap();
        assert_eq!(b.total, naive(&graph, &t, "top"));
        // both references see the same shared sub-tree
        let left = b.contributions[0].child.as_ref().unwrap();
        let right = b.contributions[1].child.as_ref().unwrap();
        assert_eq!(left.contributions[0].child, right.contributions[0].child);
    }

    #[test]
    fn negative_scores_flagged_with_abs_shares() {
        let graph = InventoryGraph {
            processes: vec![process(
                "p",
                vec![leaf("burden", "GLO", 2.0), leaf("credit", "GLO", 1.0)],
            )],
        };
        let t = table(&[("burden", "GLO", 5.0), ("credit", "GLO", -4.0)]);
        let b = unit_score(&graph, &t, "p").unwrap();
        assert!(b.has_negative);
        assert_eq!(b.total, 6.0);
        // shares against |10| + |-4| = 14
        assert!((b.contributions[0].share - 10.0 / 14.0).abs() < 1e-15);
        assert!((b.contributions[1].share + 4.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn compare_scenarios_orders_and_labels() {
        let graph = InventoryGraph {
            processes: vec![process("p", vec![leaf("electricity", "CN", 2.0)])],
        };
        let mut t = table(&[("electricity", "CN", 1.0)]);
        t.insert(
            FactorKey {
                input_name: "electricity".to_string(),
                origin: "SE".to_string(),
                unit: "kg".to_string(),
            },
            0.1,
        );
        let scenarios = vec![
            ScenarioConfig::identity("base"),
            ScenarioConfig {
                name: "green".to_string(),
                substitutions: vec![crate::inventory::Substitution {
                    pattern: "electric".to_string(),
                    new_origin: "SE".to_string(),
                }],
            },
        ];
        let results = compare_scenarios(&graph, &t, "p", &scenarios).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].scenario, "base");
        assert_eq!(results[0].total, 2.0);
        assert_eq!(results[1].scenario, "green");
        assert!((results[1].total - 0.2).abs() < 1e-15);
    }

    #[test]
    fn convert_basis_examples() {
        let conv = BasisConversion::new(0.209).unwrap();
        assert!((convert_basis(17.33, conv) - 82.92).abs() < 0.01);
        assert!((convert_basis(16.47, conv) - 78.80).abs() < 0.01);
        assert_eq!(convert_basis(0.0, conv), 0.0);
        assert!(BasisConversion::new(0.0).is_err());
        assert!(BasisConversion::new(-3.0).is_err());
        assert!(BasisConversion::new(f64::NAN).is_err());
    }

    #[test]
    fn ranking_depths() {
        let graph = InventoryGraph {
            processes: vec![
                process("pack", vec![proc_ref("cell", 0.5), leaf("al", "GLO", 2.0)]),
                process("cell", vec![leaf("cathode", "CN", 3.0), leaf("anode", "CN", 1.0)]),
            ],
        };
        let t = table(&[("al", "GLO", 10.0), ("cathode", "CN", 4.0), ("anode", "CN", 2.0)]);
        let b = unit_score(&graph, &t, "pack").unwrap();
        // totals: cell = 14, pack = 0.5*14 + 20 = 27
        let d0 = contribution_ranking(&b, 0);
        assert_eq!(d0.len(), 1);
        assert_eq!(d0[0].path, vec!["pack"]);
        assert_eq!(d0[0].score, 27.0);
        assert_eq!(d0[0].share, 1.0);

        let d1 = contribution_ranking(&b, 1);
        assert_eq!(d1.len(), 2);
        assert_eq!(d1[0].path, vec!["al"]);
        assert_eq!(d1[0].score, 20.0);
        assert_eq!(d1[1].path, vec!["cell"]);
        assert_eq!(d1[1].score, 7.0);
        let total_share: f64 = d1.iter().map(|r| r.share).sum();
        assert!((total_share - 1.0).abs() < 1e-12);

        let d2 = contribution_ranking(&b, 2);
        assert_eq!(d2.len(), 3);
        assert_eq!(d2[0].path, vec!["al"]);
        assert_eq!(d2[1].path, vec!["cell", "cathode"]);
        assert!((d2[1].score - 6.0).abs() < 1e-15);
        assert_eq!(d2[2].path, vec!["cell", "anode"]);
        assert!((d2[2].score - 1.0).abs() < 1e-15);
        let total_score: f64 = d2.iter().map(|r| r.score).sum();
        assert!((total_score - 27.0).abs() < 1e-12);
    }

    #[test]
    fn sankey_edges_depth_limits() {
        let graph = InventoryGraph {
            processes: vec![
                process("pack", vec![proc_ref("cell", 0.5), leaf("al", "GLO", 2.0)]),
                process("cell", vec![leaf("cathode", "CN", 3.0), leaf("anode", "CN", 1.0)]),
            ],
        };
        let t = table(&[("al", "GLO", 10.0), ("cathode", "CN", 4.0), ("anode", "CN", 2.0)]);
        let b = unit_score(&graph, &t, "pack").unwrap();
        let one = sankey_edges(&b, Some(1));
        assert_eq!(one.len(), 2);
        let all = sankey_edges(&b, None);
        assert_eq!(all.len(), 4);
        // inflow into cell equals outflow of scaled children
        let inflow = all
            .iter()
            .find(|e| e.source == "pack" && e.target == "cell")
            .unwrap()
            .value;
        let outflow: f64 =
            all.iter().filter(|e| e.source == "cell").map(|e| e.value).sum();
        assert!((inflow - outflow).abs() < 1e-12);
    }

    #[test]
    fn linearity_under_power_of_two_scaling() {
        let graph = InventoryGraph {
            processes: vec![process(
                "p",
                vec![leaf("a", "GLO", 0.123), leaf("b", "GLO", 4.56), leaf("c", "GLO", 0.00789)],
            )],
        };
        let t = table(&[("a", "GLO", 9.87), ("b", "GLO", 0.654), ("c", "GLO", 321.0)]);
        let base = unit_score(&graph, &t, "p").unwrap();
        for lambda in [0.5, 2.0, 4.0] {
            let mut scaled = graph.clone();
            for e in &mut scaled.processes[0].exchanges {
                e.amount *= lambda;
            }
            let b = unit_score(&scaled, &t, "p").unwrap();
            assert_eq!(b.total, lambda * base.total, "lambda = {lambda}");
        }
    }
}
