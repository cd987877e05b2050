//! End-to-end pipeline: preprocess, expand and anonymize, generate
//! configurations, repair routing, verify, and report.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::anonymize::{
    check_kdma, kda_baseline, kdma_greedy, maxsmt, AnonymityParams, AnonymizeError, KdmaLevel,
};
use crate::confgen::{
    self, path_anonymity, similarity, ExpansionPlan, SimilarityReport, SubnetPool,
    DEFAULT_WEIGHTS, HOST_POOL_BASE, LINK_POOL_BASE,
};
use crate::config::NetworkSnapshot;
use crate::expansion::{
    embed_graph_greedy, expand_replica, expand_sample_connect, select_reference, NodeMapping,
    SamplingKind, SamplingStrategy,
};
use crate::repair::{
    build_cost_model, cegis_repair, extract_requirements, interas_repair, iterative_intra_repair,
    CostModel, IbgpStrategy, PathRequirement, RepairError, RepairLog, StoredFibs,
};
use crate::sim::{compute_fibs, dataplane, DataPlane, Network};
use crate::topology::{
    degree_sequence, extract_topology, ks_distance, load_reference_library, rationality,
    NodeKind, Topology,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionMode {
    Replica,
    SampleConnect,
    Embedding,
}

impl ExpansionMode {
    pub fn name(&self) -> &'static str {
        match self {
            ExpansionMode::Replica => "replica",
            ExpansionMode::SampleConnect => "sample-connect",
            ExpansionMode::Embedding => "embedding",
        }
    }
}

impl FromStr for ExpansionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "replica" => Ok(ExpansionMode::Replica),
            "sample-connect" => Ok(ExpansionMode::SampleConnect),
            "embedding" => Ok(ExpansionMode::Embedding),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anonymizer {
    Greedy,
    MaxSmt,
    Kda,
}

impl Anonymizer {
    pub fn name(&self) -> &'static str {
        match self {
            Anonymizer::Greedy => "greedy",
            Anonymizer::MaxSmt => "maxsmt",
            Anonymizer::Kda => "kda",
        }
    }
}

impl FromStr for Anonymizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" => Ok(Anonymizer::Greedy),
            "maxsmt" => Ok(Anonymizer::MaxSmt),
            "kda" => Ok(Anonymizer::Kda),
            other => Err(format!("unknown anonymizer {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairMode {
    Constraint,
    Iterative,
}

impl FromStr for RepairMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "constraint" => Ok(RepairMode::Constraint),
            "iterative" => Ok(RepairMode::Iterative),
            other => Err(format!("unknown repair mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub reference_dir: Option<PathBuf>,
    pub mode: ExpansionMode,
    pub add_routers: usize,
    pub params: AnonymityParams,
    pub anonymizer: Anonymizer,
    pub sampling: SamplingKind,
    pub repair_mode: RepairMode,
    pub ibgp_strategy: IbgpStrategy,
    pub seed: u64,
    pub report_path: Option<PathBuf>,
    /// Internal switch for the mimicry ablation; the CLI always mimics.
    pub mimic_filters: bool,
}

impl RunConfig {
    pub fn new(input_dir: PathBuf, output_dir: PathBuf) -> RunConfig {
        RunConfig {
            input_dir,
            output_dir,
            reference_dir: None,
            mode: ExpansionMode::Embedding,
            add_routers: 0,
            params: AnonymityParams::default(),
            anonymizer: Anonymizer::Greedy,
            sampling: SamplingKind::Rw,
            repair_mode: RepairMode::Constraint,
            ibgp_strategy: IbgpStrategy::FilterNexthop,
            seed: 0,
            report_path: None,
            mimic_filters: true,
        }
    }
}

/// Failure class, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Generic,
    InfeasibleAnonymity,
    SolverTimeout,
}

#[derive(Debug, Error)]
#[error("[{phase}] {message}")]
pub struct PipelineError {
    pub phase: &'static str,
    pub message: String,
    pub kind: FailureKind,
}

impl PipelineError {
    fn new(phase: &'static str, message: impl ToString) -> PipelineError {
        PipelineError {
            phase,
            message: message.to_string(),
            kind: FailureKind::Generic,
        }
    }

    fn classified(phase: &'static str, message: impl ToString, kind: FailureKind) -> PipelineError {
        PipelineError {
            phase,
            message: message.to_string(),
            kind,
        }
    }
}

fn anonym_err(phase: &'static str, e: AnonymizeError) -> PipelineError {
    let kind = match e {
        AnonymizeError::Infeasible(_) | AnonymizeError::Unsatisfiable => {
            FailureKind::InfeasibleAnonymity
        }
        AnonymizeError::SolverTimeout(_) => FailureKind::SolverTimeout,
    };
    PipelineError::classified(phase, e, kind)
}

fn repair_err(phase: &'static str, e: RepairError) -> PipelineError {
    let kind = match e {
        RepairError::SolverTimeout(_) => FailureKind::SolverTimeout,
        _ => FailureKind::Generic,
    };
    PipelineError::classified(phase, e, kind)
}

#[derive(Debug, Clone, Serialize)]
pub struct KdmaCheckReport {
    pub weak: bool,
    pub strong: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RepairLogReport {
    pub iterations: usize,
    pub converged: bool,
    pub cost_changes: usize,
    pub filters_added: Vec<String>,
}

impl RepairLogReport {
    fn from_log(log: &RepairLog, model: Option<&CostModel>) -> RepairLogReport {
        let cost_changes = match model {
            Some(m) => m
                .edges
                .iter()
                .enumerate()
                .filter(|(e, _)| {
                    log.costs_assigned
                        .get(&m.edges[*e])
                        .map(|c| *c != m.initial[*e])
                        .unwrap_or(false)
                })
                .count(),
            None => 0,
        };
        RepairLogReport {
            iterations: log.iterations,
            converged: log.converged,
            cost_changes,
            filters_added: log
                .filters_added
                .iter()
                .map(|(r, f)| format!("{r}: {f}"))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceDiff {
    pub src: String,
    pub dst: String,
    pub missing_path: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimilaritySummary {
    pub mean_overall: f64,
    pub mean_stanza: f64,
    pub mean_cmd: f64,
    pub mean_order: f64,
    pub per_fake: BTreeMap<String, SimilarityReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub seed: u64,
    pub mode: String,
    pub anonymizer: String,
    pub requested_adds: usize,
    pub actual_adds: usize,
    pub reference_name: Option<String>,
    pub rationality_ks: Option<f64>,
    pub kdma_check: KdmaCheckReport,
    pub similarity: Option<SimilaritySummary>,
    pub n_r_before: f64,
    pub n_r_after: f64,
    pub repair_intra: BTreeMap<String, RepairLogReport>,
    pub repair_interas: Option<RepairLogReport>,
    pub functional_equivalence: bool,
    pub missing_paths: Vec<EquivalenceDiff>,
    pub wall_ms: BTreeMap<String, u64>,
}

/// Every original data-plane path must survive verbatim (real nodes map to
/// themselves). Returns the missing paths.
pub fn verify_equivalence(
    original: &DataPlane,
    anonymized: &DataPlane,
    _mapping: &NodeMapping,
) -> Vec<EquivalenceDiff> {
    let mut diffs = Vec::new();
    for ((src, dst), result) in &original.paths {
        let Some(paths) = result.paths() else {
            continue; // pairs broken in the original stay out of scope
        };
        let anon = anonymized.ok_paths(src, dst);
        for p in paths {
            if !anon.contains(p) {
                diffs.push(EquivalenceDiff {
                    src: src.clone(),
                    dst: dst.clone(),
                    missing_path: p.clone(),
                });
            }
        }
    }
    diffs
}

struct Phases {
    t0: Instant,
    wall: BTreeMap<String, u64>,
    last: Instant,
}

impl Phases {
    fn new() -> Phases {
        let now = Instant::now();
        Phases {
            t0: now,
            wall: BTreeMap::new(),
            last: now,
        }
    }

    fn mark(&mut self, name: &str) {
        let now = Instant::now();
        self.wall
            .insert(name.to_string(), now.duration_since(self.last).as_millis() as u64);
        self.last = now;
    }

    fn finish(mut self) -> BTreeMap<String, u64> {
        self.wall.insert(
            "total".to_string(),
            self.t0.elapsed().as_millis() as u64,
        );
        self.wall
    }
}

pub const SOLVER_BUDGET: u64 = 2_000_000;
pub const INTERAS_CAP: usize = 50;
pub const ITERATIVE_CAP: usize = 4_000;

/// Run the full pipeline on an already-loaded snapshot. Returns the
/// anonymized snapshot plus the report.
pub fn run_on_snapshot(
    cfg: &RunConfig,
    original: &NetworkSnapshot,
    library: &[Topology],
) -> Result<(NetworkSnapshot, RunReport), PipelineError> {
    let mut phases = Phases::new();

    // preprocess: simulate the original and store repair anchors
    let orig_net = Network::build(original).map_err(|e| PipelineError::new("preprocess", e))?;
    let orig_sim = compute_fibs(&orig_net).map_err(|e| PipelineError::new("preprocess", e))?;
    let orig_dp = dataplane(&orig_net, &orig_sim.fibs);
    let topo = extract_topology(original).map_err(|e| PipelineError::new("preprocess", e))?;
    let g = topo.router_graph();
    let reqs = extract_requirements(&orig_net, &orig_sim, &orig_dp);
    let stored = StoredFibs::capture(&orig_sim, &orig_net.asbrs());
    let real_egress: BTreeSet<String> = original
        .hosts
        .values()
        .map(|h| h.gateway_router.clone())
        .collect();
    let original_links: BTreeSet<(String, String)> = g.router_edges().into_iter().collect();
    phases.mark("preprocess");

    // expansion + anonymization on the router graph
    let n = g.router_count().max(1);
    let requested = cfg.add_routers;
    let (mut anonym, reference, mapping): (Topology, Option<Topology>, NodeMapping) =
        match cfg.mode {
            ExpansionMode::Replica => {
                let fold = std::cmp::max(2, requested.div_ceil(n) + 1);
                let emb = expand_replica(&g, fold)
                    .map_err(|e| PipelineError::new("expand", e))?;
                (emb, None, NodeMapping::default())
            }
            ExpansionMode::SampleConnect => {
                let wanted = n + requested.max(1);
                let reference = select_reference(&g, library, wanted)
                    .map_err(|e| PipelineError::new("expand", e))?;
                let strat = SamplingStrategy::new(cfg.sampling, cfg.seed);
                let emb = expand_sample_connect(&g, &reference, requested.max(1), &strat)
                    .map_err(|e| PipelineError::new("expand", e))?;
                (emb, Some(reference), NodeMapping::default())
            }
            ExpansionMode::Embedding => {
                let wanted = n + requested;
                let reference = select_reference(&g, library, wanted)
                    .map_err(|e| PipelineError::new("expand", e))?;
                let (emb, mapping) = embed_graph_greedy(&g, &reference)
                    .map_err(|e| PipelineError::new("expand", e))?;
                (emb, Some(reference), mapping)
            }
        };
    phases.mark("expand");

    let params = AnonymityParams {
        seed: cfg.seed,
        ..cfg.params
    };
    anonym = match cfg.anonymizer {
        Anonymizer::Greedy => {
            kdma_greedy(&g, &anonym, &params).map_err(|e| anonym_err("anonymize", e))?
        }
        Anonymizer::Kda => kda_baseline(&anonym, params.k_routers, cfg.seed)
            .map_err(|e| anonym_err("anonymize", e))?,
        Anonymizer::MaxSmt => {
            let Some(reference) = &reference else {
                return Err(PipelineError::classified(
                    "anonymize",
                    "the all-in-one solver needs embedding mode with a reference",
                    FailureKind::InfeasibleAnonymity,
                ));
            };
            let out = maxsmt::kdma_maxsmt(&g, reference, &mapping, params.k_routers)
                .map_err(|e| anonym_err("anonymize", e))?;
            out.graph
        }
    };

    // style-conforming names for the fake routers
    let real_names: Vec<String> = g.routers().cloned().collect();
    let fake_old: Vec<String> = anonym
        .routers()
        .filter(|r| !g.has_node(r))
        .cloned()
        .collect();
    if cfg.mode != ExpansionMode::Replica {
        let fresh = confgen::fake_router_names(&real_names, fake_old.len());
        let rename: BTreeMap<&String, &String> = fake_old.iter().zip(fresh.iter()).collect();
        let mut renamed = Topology::new(anonym.name.clone());
        for r in anonym.routers() {
            let name = rename.get(r).map(|s| (*s).clone()).unwrap_or_else(|| r.clone());
            renamed.add_node(name.clone(), NodeKind::Router);
            if let Some(asn) = anonym.as_of(r) {
                renamed.set_as(&name, asn);
            }
        }
        for (a, b) in anonym.router_edges() {
            let an = rename.get(&a).map(|s| (*s).clone()).unwrap_or(a);
            let bn = rename.get(&b).map(|s| (*s).clone()).unwrap_or(b);
            renamed.add_edge(&an, &bn);
        }
        anonym = renamed;
    }
    let actual_adds = anonym.router_count() - g.router_count();
    let kdma_weak = check_kdma(&g, &anonym, params.k_routers, KdmaLevel::Weak);
    let kdma_strong = check_kdma(&g, &anonym, params.k_routers, KdmaLevel::Strong);
    phases.mark("anonymize");

    // configuration generation
    let mut snapshot = original.clone();
    let mut plan = ExpansionPlan::from_graphs(&g, &anonym);
    let mut link_pool = SubnetPool::new(LINK_POOL_BASE.parse().unwrap(), &snapshot);
    let mut host_pool = SubnetPool::new(HOST_POOL_BASE.parse().unwrap(), &snapshot);
    confgen::expand_network(&mut snapshot, &mut plan, &mut link_pool)
        .map_err(|e| PipelineError::new("generate", e))?;
    confgen::join_ibgp_mesh(&mut snapshot, &plan);
    confgen::add_fake_hosts(&mut snapshot, &mut plan, &mut host_pool, params.k_hosts)
        .map_err(|e| PipelineError::new("generate", e))?;
    if cfg.mimic_filters {
        confgen::mimic_filters(&mut snapshot, &plan.host_map);
    }
    phases.mark("generate");

    // repair: per-AS cost synthesis, then inter-AS filters
    let mut repair_intra: BTreeMap<String, RepairLogReport> = BTreeMap::new();
    {
        let anon_net =
            Network::build(&snapshot).map_err(|e| PipelineError::new("repair", e))?;
        let by_as: BTreeMap<u32, Vec<PathRequirement>> = {
            let mut m: BTreeMap<u32, Vec<PathRequirement>> = BTreeMap::new();
            for r in &reqs {
                m.entry(r.as_id).or_default().push(r.clone());
            }
            m
        };
        for (asn, as_reqs) in by_as {
            let model = build_cost_model(&anon_net, asn, &original_links);
            let (costs, log) = match cfg.repair_mode {
                RepairMode::Constraint => cegis_repair(&model, &as_reqs, SOLVER_BUDGET)
                    .map_err(|e| repair_err("repair", e))?,
                RepairMode::Iterative => {
                    iterative_intra_repair(&model, &as_reqs, ITERATIVE_CAP)
                        .map_err(|e| repair_err("repair", e))?
                }
            };
            apply_costs(&mut snapshot, &anon_net, &model, &costs);
            repair_intra.insert(asn.to_string(), RepairLogReport::from_log(&log, Some(&model)));
        }
    }
    let interas_log = interas_repair(&mut snapshot, &stored, cfg.ibgp_strategy, INTERAS_CAP)
        .map_err(|e| repair_err("repair", e))?;
    phases.mark("repair");

    // verification and metrics
    let anon_net = Network::build(&snapshot).map_err(|e| PipelineError::new("verify", e))?;
    let anon_sim = compute_fibs(&anon_net).map_err(|e| PipelineError::new("verify", e))?;
    let anon_dp = dataplane(&anon_net, &anon_sim.fibs);
    let missing = verify_equivalence(&orig_dp, &anon_dp, &mapping);
    let n_r_before = path_anonymity(&orig_dp, &real_egress).n_r;
    let n_r_after = path_anonymity(&anon_dp, &real_egress).n_r;
    let rationality_ks = match (&reference, cfg.mode) {
        (Some(r), _) => Some(
            rationality(&anonym, r)
                .map_err(|e| PipelineError::new("verify", e))?
                .ks_distance,
        ),
        (None, _) => ks_distance(&degree_sequence(&anonym, true), &degree_sequence(&g, true))
            .ok(),
    };
    let sim_summary = similarity_summary(&snapshot, &plan);
    phases.mark("verify");

    let report = RunReport {
        schema: 1,
        seed: cfg.seed,
        mode: cfg.mode.name().to_string(),
        anonymizer: cfg.anonymizer.name().to_string(),
        requested_adds: requested,
        actual_adds,
        reference_name: reference.as_ref().map(|r| r.name.clone()),
        rationality_ks,
        kdma_check: KdmaCheckReport {
            weak: kdma_weak,
            strong: kdma_strong,
        },
        similarity: sim_summary,
        n_r_before,
        n_r_after,
        repair_intra,
        repair_interas: Some(RepairLogReport::from_log(&interas_log, None)),
        functional_equivalence: missing.is_empty(),
        missing_paths: missing,
        wall_ms: phases.finish(),
    };
    Ok((snapshot, report))
}

fn similarity_summary(snapshot: &NetworkSnapshot, plan: &ExpansionPlan) -> Option<SimilaritySummary> {
    if plan.new_routers.is_empty() {
        return None;
    }
    let reals: Vec<&crate::config::RouterConfig> = snapshot
        .routers
        .iter()
        .filter(|(n, _)| !plan.new_routers.contains(*n))
        .map(|(_, c)| c)
        .collect();
    let mut per_fake = BTreeMap::new();
    for f in &plan.new_routers {
        let Some(cfg) = snapshot.routers.get(f) else {
            continue;
        };
        per_fake.insert(f.clone(), similarity(cfg, &reals, DEFAULT_WEIGHTS));
    }
    if per_fake.is_empty() {
        return None;
    }
    let k = per_fake.len() as f64;
    Some(SimilaritySummary {
        mean_overall: per_fake.values().map(|r| r.overall).sum::<f64>() / k,
        mean_stanza: per_fake.values().map(|r| r.sim_stanza).sum::<f64>() / k,
        mean_cmd: per_fake.values().map(|r| r.sim_cmd).sum::<f64>() / k,
        mean_order: per_fake.values().map(|r| r.sim_order).sum::<f64>() / k,
        per_fake,
    })
}

/// Write the synthesized link costs to the interface stanzas; only costs
/// differing from the current configuration are touched.
fn apply_costs(
    snapshot: &mut NetworkSnapshot,
    anon_net: &Network,
    model: &CostModel,
    costs: &[i64],
) {
    for (e, (tail, head)) in model.edges.iter().enumerate() {
        if model.fixed.contains_key(&e) || costs[e] == model.initial[e] {
            continue;
        }
        let Some(link) = anon_net.link_between(tail, head) else {
            continue;
        };
        let iface = if link.a == *tail {
            link.a_iface.clone()
        } else {
            link.b_iface.clone()
        };
        let Some(cfg) = snapshot.routers.get_mut(tail) else {
            continue;
        };
        if let Some(st) = cfg.interface_mut(&iface) {
            let line = format!("ip ospf cost {}", costs[e]);
            if let Some(cmd) = st
                .commands
                .iter_mut()
                .find(|c| c.raw.trim().starts_with("ip ospf cost"))
            {
                let indent: String = cmd
                    .raw
                    .chars()
                    .take_while(|ch| ch.is_whitespace())
                    .collect();
                cmd.raw = format!("{indent}{line}");
            } else {
                st.push_command(&line);
            }
        }
    }
}

/// Load, run, save: the directory-level entry point used by the CLI.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    if cfg.input_dir == cfg.output_dir {
        return Err(PipelineError::new(
            "preprocess",
            "output directory must differ from input directory",
        ));
    }
    let snapshot = NetworkSnapshot::load(&cfg.input_dir)
        .map_err(|e| PipelineError::new("preprocess", e))?;
    let library = match &cfg.reference_dir {
        Some(dir) => {
            load_reference_library(dir).map_err(|e| PipelineError::new("preprocess", e))?
        }
        None => Vec::new(),
    };
    let (out_snapshot, report) = run_on_snapshot(cfg, &snapshot, &library)?;
    out_snapshot
        .save(&cfg.output_dir)
        .map_err(|e| PipelineError::new("verify", e))?;
    if let Some(path) = &cfg.report_path {
        let mut text =
            serde_json::to_string_pretty(&report).map_err(|e| PipelineError::new("verify", e))?;
        text.push('\n');
        std::fs::write(path, text)
            .map_err(|e| PipelineError::new("verify", e))?;
    }
    Ok(report)
}

/// Serialize the report deterministically (sorted keys via BTreeMap).
pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}
