//! Multi-seed experiment runner: trains (or loads) one model per seed,
//! attacks every test node, and aggregates per-cell accuracy and success
//! rates into reproducible reports.

mod config;
mod report;
mod stats;

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

pub use config::{presets, AttackKind, AttackSpec, AttackerChoice, ExperimentConfig, TargetMode};
pub use report::{read_victim_log, replay_check, write_victim_log, CellReport, ExperimentReport, VictimRecord};
pub use stats::Stat;

use crate::attacks::{
    choose_attacker_gradchoice, choose_attacker_random, choose_attacker_topology, choose_attackers_random,
    injection_attack, multi_edge_attack, single_node_attack, zero_features_attack, AttackOutcome, EdgeCandidates,
    FrozenModel, Goal, RandomVariant,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::models::{accuracy, load_checkpoint, save_checkpoint, train, Architecture, TrainConfig};
use crate::rng;

const TARGET_DOMAIN: u64 = 0x7a6;
const DISTANCE_DOMAIN: u64 = 0xd15;

/// A frozen model for one seed with its clean test accuracy.
#[derive(Debug, Clone)]
pub struct SeedModel {
    pub seed: u64,
    pub model: FrozenModel,
    pub clean_accuracy: f64,
}

fn checkpoint_name(g: &Graph, arch: Architecture, cfg: &TrainConfig) -> String {
    format!("{}-{}-L{}-h{}-seed{}.ckpt", g.name(), arch, cfg.layers, cfg.hidden, cfg.seed)
}

/// Trains one model per seed, or reuses matching checkpoints from `dir`.
pub fn prepare_models(
    g: &Graph,
    arch: Architecture,
    base: &TrainConfig,
    seeds: &[u64],
    dir: Option<&Path>,
) -> Result<Vec<SeedModel>> {
    seeds
        .iter()
        .map(|&seed| {
            let cfg = TrainConfig { seed, ..base.clone() };
            let path = dir.map(|d| d.join(checkpoint_name(g, arch, &cfg)));
            let cached = match &path {
                Some(p) if p.exists() => {
                    let (m, header) = load_checkpoint(p)?;
                    (header.config == cfg && m.params().arch() == arch).then_some(m)
                }
                _ => None,
            };
            let trained = match cached {
                Some(m) => m,
                None => {
                    let m = train(g, arch, &cfg)?;
                    if let Some(p) = &path {
                        std::fs::create_dir_all(p.parent().unwrap_or(Path::new(".")))?;
                        save_checkpoint(p, &m, None)?;
                    }
                    m
                }
            };
            let model = FrozenModel::new(trained.params().clone(), g)?;
            let clean_accuracy = accuracy(model.predictions(), g, g.test_mask())?;
            Ok(SeedModel {
                seed,
                model,
                clean_accuracy,
            })
        })
        .collect()
}

/// Overrides attacker selection: `(graph, seed, victim) -> attackers`.
pub type AttackerPicker<'a> = dyn Fn(&Graph, u64, usize) -> Result<Vec<usize>> + Sync + 'a;

fn pick_target(spec: &AttackSpec, g: &Graph, seed: u64, v: usize, reference: usize) -> Option<Goal> {
    match spec.target {
        TargetMode::NonTargeted => Some(Goal::NonTargeted),
        TargetMode::Class(c) => (c != reference).then_some(Goal::Targeted(c)),
        TargetMode::Random => {
            if g.num_classes() < 2 {
                return None;
            }
            let mut r = rng::stream(&[TARGET_DOMAIN, seed, v as u64]);
            let t = r.gen_range(0..g.num_classes() - 1);
            Some(Goal::Targeted(if t >= reference { t + 1 } else { t }))
        }
    }
}

fn pick_attackers(spec: &AttackSpec, m: &FrozenModel, g: &Graph, seed: u64, v: usize, goal: Goal) -> Result<Vec<usize>> {
    let layers = m.layers();
    let mut r = rng::stream(&[seed, v as u64]);
    let variant = match spec.attacker {
        AttackerChoice::Random => RandomVariant::Any,
        AttackerChoice::Hops => RandomVariant::Hops,
        AttackerChoice::Direct => return Ok(vec![v]),
        AttackerChoice::GradChoice => return Ok(vec![choose_attacker_gradchoice(m, g, v, goal)?]),
        AttackerChoice::Topology => return Ok(vec![choose_attacker_topology(g, v)?]),
    };
    if spec.num_attackers == 1 {
        Ok(vec![choose_attacker_random(g, v, variant, layers, &mut r)?])
    } else {
        choose_attackers_random(g, v, variant, layers, spec.num_attackers, &mut r)
    }
}

/// Attacks `v` once. `Ok(Err(reason))` means the victim is left unattacked.
fn attack_one(
    spec: &AttackSpec,
    m: &FrozenModel,
    g: &Graph,
    seed: u64,
    v: usize,
    picker: Option<&AttackerPicker<'_>>,
) -> Result<std::result::Result<AttackOutcome, String>> {
    let reference = m.prediction(v);
    let Some(goal) = pick_target(spec, g, seed, v, reference) else {
        return Ok(Err("prediction already equals the target".into()));
    };
    let attackers = || match picker {
        Some(p) => p(g, seed, v),
        None => pick_attackers(spec, m, g, seed, v, goal),
    };
    let out = match spec.kind {
        AttackKind::None => return Ok(Err("no attack".into())),
        AttackKind::SingleNode => attackers().and_then(|a| single_node_attack(m, g, v, &a, goal, &spec.budget)),
        AttackKind::ZeroFeatures => attackers().and_then(|a| zero_features_attack(m, g, v, a[0])),
        AttackKind::Injection => injection_attack(m, g, v, goal, &spec.budget),
        AttackKind::SingleEdge | AttackKind::MultiEdge => {
            let budget = if spec.kind == AttackKind::SingleEdge { 1 } else { spec.edge_budget };
            let candidates = if spec.global_edges {
                Ok(EdgeCandidates::Global)
            } else {
                attackers().map(|a| EdgeCandidates::Attacker(a[0]))
            };
            candidates.and_then(|c| multi_edge_attack(m, g, v, budget, c, goal))
        }
    };
    match out {
        Ok(o) => Ok(Ok(o)),
        Err(Error::NoAttacker { reason, .. }) => Ok(Err(reason)),
        Err(e) => Err(e),
    }
}

fn within_budget(spec: &AttackSpec, g: &Graph, o: &AttackOutcome) -> bool {
    match spec.kind {
        // replacing a row by zeros is the baseline's definition, not a budgeted edit
        AttackKind::ZeroFeatures => true,
        AttackKind::SingleEdge => o.flipped_edges.len() <= 1,
        AttackKind::MultiEdge => o.flipped_edges.len() <= spec.edge_budget,
        _ => o
            .check_budget(&spec.budget, g.feature_kind(), g.num_features())
            .is_ok(),
    }
}

/// Attacks every test node under every seed's model for one cell.
pub fn evaluate_cell(
    g: &Graph,
    models: &[SeedModel],
    spec: &AttackSpec,
    cell: usize,
    name: &str,
    picker: Option<&AttackerPicker<'_>>,
    exclude_unattacked: bool,
) -> Result<(CellReport, Vec<VictimRecord>)> {
    spec.validate(g)?;
    let mut records = Vec::new();
    let (mut accs, mut succs, mut attacked, mut unattacked) = (vec![], vec![], vec![], vec![]);
    let mut violations = 0;
    for sm in models {
        let m = &sm.model;
        let rows = g
            .test_mask()
            .par_iter()
            .map(|&v| {
                let res = attack_one(spec, m, g, sm.seed, v, picker).map_err(|e| Error::Victim {
                    seed: sm.seed,
                    victim: v,
                    source: Box::new(e),
                })?;
                let before = m.prediction(v);
                Ok(match res {
                    Ok(o) => VictimRecord {
                        cell,
                        seed: sm.seed,
                        victim: v,
                        label: g.label(v),
                        attacked: true,
                        note: None,
                        pred_before: before,
                        pred_after: o.pred_after,
                        success: o.success,
                        budget_ok: within_budget(spec, g, &o),
                        outcome: Some(o),
                    },
                    Err(reason) => VictimRecord {
                        cell,
                        seed: sm.seed,
                        victim: v,
                        label: g.label(v),
                        attacked: false,
                        note: (spec.kind != AttackKind::None).then_some(reason),
                        pred_before: before,
                        pred_after: before,
                        success: false,
                        budget_ok: true,
                        outcome: None,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let hit = rows.iter().filter(|r| r.attacked).count();
        let counted: Vec<&VictimRecord> = rows.iter().filter(|r| r.attacked || !exclude_unattacked).collect();
        let (acc, succ) = if counted.is_empty() {
            (0.0, 0.0)
        } else {
            let n = counted.len() as f64;
            (
                counted.iter().filter(|r| r.correct()).count() as f64 / n,
                counted.iter().filter(|r| r.success).count() as f64 / n,
            )
        };
        accs.push(acc);
        succs.push(succ);
        attacked.push(hit);
        unattacked.push(rows.len() - hit);
        violations += rows.iter().filter(|r| !r.budget_ok).count();
        records.extend(rows);
    }
    Ok((
        CellReport {
            name: name.to_string(),
            attack: spec.clone(),
            distance: None,
            accuracy: Stat::from_values(&accs),
            success_rate: Stat::from_values(&succs),
            attacked,
            unattacked,
            excludes_unattacked: exclude_unattacked,
            budget_violations: violations,
        },
        records,
    ))
}

fn report(g: &Graph, config: &ExperimentConfig, models: &[SeedModel], cells: Vec<CellReport>, notes: Vec<String>, start: Instant) -> ExperimentReport {
    let clean: Vec<f64> = models.iter().map(|m| m.clean_accuracy).collect();
    ExperimentReport {
        dataset: g.name().to_string(),
        config: config.clone(),
        clean_accuracy: Stat::from_values(&clean),
        cells,
        outcome_log: None,
        notes,
        wall_time_secs: start.elapsed().as_secs_f64(),
    }
}

fn standard_notes(config: &ExperimentConfig, g: &Graph) -> Vec<String> {
    let mut notes = Vec::new();
    if let Some(e) = config.attack.budget.eps_inf {
        if matches!(config.attack.kind, AttackKind::SingleNode | AttackKind::Injection) {
            notes.push(format!("active eps_inf = {e} on {}", g.name()));
        }
    }
    if config.attack.kind == AttackKind::ZeroFeatures {
        notes.push("zero-features rows are exempt from the feature budget".into());
    }
    notes
}

fn load(config: &ExperimentConfig) -> Result<Graph> {
    config.validate()?;
    crate::graph::load_bundle(&config.dataset)
}

fn models_for(g: &Graph, config: &ExperimentConfig) -> Result<Vec<SeedModel>> {
    prepare_models(g, config.arch, &config.train, &config.seeds, config.checkpoint_dir.as_deref())
}

/// One cell: the configured attack over all seeds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ExperimentReport, Vec<VictimRecord>)> {
    let start = Instant::now();
    let g = load(config)?;
    let models = models_for(&g, config)?;
    run_on(&g, config, &models, start)
}

/// [`run_experiment`] on an already loaded graph and trained models.
pub fn run_on(g: &Graph, config: &ExperimentConfig, models: &[SeedModel], start: Instant) -> Result<(ExperimentReport, Vec<VictimRecord>)> {
    let name = serde_json::to_value(config.attack.kind)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let (cell, records) = evaluate_cell(g, models, &config.attack, 0, &name, None, false)?;
    let notes = standard_notes(config, g);
    Ok((report(g, config, models, vec![cell], notes, start), records))
}

/// One cell per `(eps0, eps_inf)` pair; `eps_inf` values are ignored on
/// binary graphs. Models are shared across cells.
pub fn sweep_eps(config: &ExperimentConfig, eps0: &[f64], eps_inf: &[f64]) -> Result<(ExperimentReport, Vec<VictimRecord>)> {
    let start = Instant::now();
    let g = load(config)?;
    let models = models_for(&g, config)?;
    sweep_eps_on(&g, config, &models, eps0, eps_inf, start)
}

pub fn sweep_eps_on(
    g: &Graph,
    config: &ExperimentConfig,
    models: &[SeedModel],
    eps0: &[f64],
    eps_inf: &[f64],
    start: Instant,
) -> Result<(ExperimentReport, Vec<VictimRecord>)> {
    if eps0.is_empty() {
        return Err(Error::Config("eps0 grid is empty".into()));
    }
    let binary = g.feature_kind() == crate::graph::FeatureKind::Binary;
    let linf: Vec<Option<f64>> = if binary {
        vec![None]
    } else if eps_inf.is_empty() {
        vec![config.attack.budget.eps_inf]
    } else {
        eps_inf.iter().copied().map(Some).collect()
    };
    let mut cells = Vec::new();
    let mut records = Vec::new();
    for &e0 in eps0 {
        for &ei in &linf {
            let mut spec = config.attack.clone();
            spec.budget.eps0 = e0;
            spec.budget.eps_inf = ei;
            let name = match ei {
                Some(ei) => format!("eps0={e0},eps_inf={ei}"),
                None => format!("eps0={e0}"),
            };
            let (c, r) = evaluate_cell(g, models, &spec, cells.len(), &name, None, false)?;
            cells.push(c);
            records.extend(r);
        }
    }
    let notes = standard_notes(config, g);
    Ok((report(g, config, models, cells, notes, start), records))
}

/// Single-node attacks with 1..=max attackers drawn at random.
pub fn attacker_count_study(config: &ExperimentConfig, counts: &[usize]) -> Result<(ExperimentReport, Vec<VictimRecord>)> {
    let start = Instant::now();
    let g = load(config)?;
    let models = models_for(&g, config)?;
    attacker_count_study_on(&g, config, &models, counts, start)
}

pub fn attacker_count_study_on(
    g: &Graph,
    config: &ExperimentConfig,
    models: &[SeedModel],
    counts: &[usize],
    start: Instant,
) -> Result<(ExperimentReport, Vec<VictimRecord>)> {
    if counts.is_empty() || counts.contains(&0) {
        return Err(Error::Config("attacker counts must be non-empty and positive".into()));
    }
    let mut cells = Vec::new();
    let mut records = Vec::new();
    for &k in counts {
        let mut spec = config.attack.clone();
        spec.kind = AttackKind::SingleNode;
        spec.num_attackers = k;
        let (c, r) = evaluate_cell(g, models, &spec, cells.len(), &format!("attackers={k}"), None, false)?;
        cells.push(c);
        records.extend(r);
    }
    let notes = standard_notes(config, g);
    Ok((report(g, config, models, cells, notes, start), records))
}

/// For each distance `d` in `1..=layers`, attacks every test node from a
/// random attacker at exactly `d` hops. Victims without such a node are
/// skipped and left out of that distance's rates.
pub fn distance_study(config: &ExperimentConfig) -> Result<(ExperimentReport, Vec<VictimRecord>)> {
    let start = Instant::now();
    let g = load(config)?;
    let models = models_for(&g, config)?;
    distance_study_on(&g, config, &models, start)
}

pub fn distance_study_on(
    g: &Graph,
    config: &ExperimentConfig,
    models: &[SeedModel],
    start: Instant,
) -> Result<(ExperimentReport, Vec<VictimRecord>)> {
    let layers = config.train.layers;
    let mut cells = Vec::new();
    let mut records = Vec::new();
    let mut spec = config.attack.clone();
    spec.kind = AttackKind::SingleNode;
    spec.num_attackers = 1;
    for d in 1..=layers {
        let picker = move |g: &Graph, seed: u64, v: usize| -> Result<Vec<usize>> {
            let ring: Vec<usize> = g
                .index()
                .bfs_within(v, d)?
                .into_iter()
                .filter(|&(_, h)| h == d)
                .map(|(u, _)| u)
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            if ring.is_empty() {
                return Err(Error::NoAttacker {
                    victim: v,
                    reason: format!("no node at distance {d}"),
                });
            }
            let mut r = rng::stream(&[DISTANCE_DOMAIN, seed, v as u64, d as u64]);
            Ok(vec![ring[r.gen_range(0..ring.len())]])
        };
        let (mut c, r) = evaluate_cell(g, models, &spec, cells.len(), &format!("distance={d}"), Some(&picker), true)?;
        c.distance = Some(d);
        cells.push(c);
        records.extend(r);
    }
    let notes = standard_notes(config, g);
    Ok((report(g, config, models, cells, notes, start), records))
}
