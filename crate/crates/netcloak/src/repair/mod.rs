//! Route repair: intra-AS link-cost synthesis (constraint encoding + CEGIS)
//! and inter-AS iterative FIB diffing with filter insertion.

pub mod constraints;
mod interas;
pub mod solver;

pub use constraints::{encode_ecmp, encode_primary, ConstraintSet, CostModel, COST_MAX};
pub use interas::{interas_repair, IbgpStrategy, StoredEntry, StoredFibs};
pub use solver::costs_by_edge;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::sim::{spf, DataPlane, Network, Simulation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RepairError {
    #[error("constraints unsatisfiable")]
    Unsat,
    #[error("solver budget of {0} nodes exhausted")]
    SolverTimeout(u64),
    #[error("requirement references a non-edge {0} -> {1}")]
    PathNotInGraph(String, String),
    #[error("inter-AS repair did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("conflicting requirement: {0}")]
    ConflictingRequirement(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Primary,
    Ecmp,
}

/// A routing-path demand between two routers inside one AS: a single path
/// (Primary) or the exact set of load-balanced paths (Ecmp).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRequirement {
    pub kind: PathKind,
    pub src: String,
    pub dst: String,
    pub paths: BTreeSet<Vec<String>>,
    pub as_id: u32,
}

impl PathRequirement {
    pub fn new(as_id: u32, src: String, dst: String, paths: BTreeSet<Vec<String>>) -> Self {
        let kind = if paths.len() == 1 {
            PathKind::Primary
        } else {
            PathKind::Ecmp
        };
        PathRequirement {
            kind,
            src,
            dst,
            paths,
            as_id,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RepairLog {
    pub iterations: usize,
    pub filters_added: Vec<(String, String)>,
    pub costs_assigned: BTreeMap<(String, String), i64>,
    pub converged: bool,
}

/// Extract the three requirement categories from the original network:
/// (1) egress-to-egress paths of intra-AS host pairs, (2) egress-to-ASBR
/// segments of inter-AS flows, (3) IGP paths among ASBR pairs per AS.
pub fn extract_requirements(
    net: &Network,
    sim: &Simulation,
    dp: &DataPlane,
) -> Vec<PathRequirement> {
    let mut wanted: BTreeMap<(u32, String, String), BTreeSet<Vec<String>>> = BTreeMap::new();
    let as_of = |r: &str| net.devices.get(r).map(|d| d.asn).unwrap_or(0);

    for ((hs, hd), result) in &dp.paths {
        let Some(paths) = result.paths() else {
            continue;
        };
        if !net.hosts.contains_key(hs) || !net.hosts.contains_key(hd) {
            continue;
        }
        for p in paths {
            // strip the hosts at both ends
            let routers = &p[1..p.len() - 1];
            if routers.len() < 2 {
                continue;
            }
            let src_as = as_of(&routers[0]);
            let dst_as = as_of(&routers[routers.len() - 1]);
            if src_as == dst_as {
                let key = (
                    src_as,
                    routers[0].to_string(),
                    routers[routers.len() - 1].to_string(),
                );
                wanted.entry(key).or_default().insert(routers.to_vec());
            } else {
                // source-side segment up to the exit ASBR
                let cut = routers
                    .iter()
                    .position(|r| as_of(r) != src_as)
                    .unwrap_or(routers.len());
                if cut >= 2 {
                    let seg = routers[..cut].to_vec();
                    let key = (src_as, seg[0].clone(), seg[cut - 1].clone());
                    wanted.entry(key).or_default().insert(seg);
                }
                // destination-side segment from the entry ASBR
                let entry = routers
                    .iter()
                    .position(|r| as_of(r) == dst_as)
                    .unwrap_or(routers.len());
                if routers.len() - entry >= 2 {
                    let seg = routers[entry..].to_vec();
                    let key = (dst_as, seg[0].clone(), seg[seg.len() - 1].clone());
                    wanted.entry(key).or_default().insert(seg);
                }
            }
        }
    }

    // category (3): ASBR interconnections inside each AS
    let asbrs = net.asbrs();
    for (asn, members) in &net.as_members {
        let local: Vec<&String> = members.iter().filter(|m| asbrs.contains(*m)).collect();
        for a in &local {
            for b in &local {
                if a == b {
                    continue;
                }
                let paths = sim.scost[asn].all_paths(a, b);
                if !paths.is_empty() {
                    let key = (*asn, (*a).clone(), (*b).clone());
                    wanted.entry(key).or_default().extend(paths.into_iter());
                }
            }
        }
    }

    wanted
        .into_iter()
        .filter(|((_, s, d), _)| s != d)
        .map(|((as_id, src, dst), paths)| PathRequirement::new(as_id, src, dst, paths))
        .collect()
}

/// Independent check: run the simulator's SPF on the candidate costs and
/// compare predecessor sets against the requirement.
pub fn verify_requirement(model: &CostModel, costs: &[i64], req: &PathRequirement) -> bool {
    let mut adj: BTreeMap<&str, Vec<(&str, u64)>> = BTreeMap::new();
    for (e, (u, v)) in model.edges.iter().enumerate() {
        adj.entry(u).or_default().push((v, costs[e].max(1) as u64));
    }
    let entry = spf(&req.src, &adj);
    let wanted = constraints::requested_preds(&req.paths);
    for (v, preds) in &wanted {
        if entry.preds.get(v) != Some(preds) {
            return false;
        }
    }
    true
}

/// CEGIS loop: verify under the current assignment, encode the violated
/// requirements, solve, repeat. The active set grows strictly, so at most
/// |reqs| + 1 iterations run.
pub fn cegis_repair(
    model: &CostModel,
    reqs: &[PathRequirement],
    budget: u64,
) -> Result<(Vec<i64>, RepairLog), RepairError> {
    let mut assignment = model.initial.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut log = RepairLog::default();
    loop {
        log.iterations += 1;
        let violated: Vec<usize> = reqs
            .iter()
            .enumerate()
            .filter(|(_, r)| !verify_requirement(model, &assignment, r))
            .map(|(i, _)| i)
            .collect();
        if violated.is_empty() {
            log.converged = true;
            log.costs_assigned = costs_by_edge(model, &assignment);
            return Ok((assignment, log));
        }
        if log.iterations > reqs.len() + 1 {
            return Err(RepairError::NonConvergence(log.iterations));
        }
        for v in violated {
            if !active.contains(&v) {
                active.push(v);
            }
        }
        let mut cs = ConstraintSet::new(model);
        let mut active_reqs: Vec<&PathRequirement> = Vec::new();
        for i in &active {
            let r = &reqs[*i];
            match r.kind {
                PathKind::Primary => encode_primary(r, model, &mut cs)?,
                PathKind::Ecmp => encode_ecmp(r, model, &mut cs)?,
            }
            active_reqs.push(r);
        }
        let (costs, _) = solver::solve_costs(&cs, model, &active_reqs, budget)?;
        assignment = costs;
    }
}

/// ConfMask-style iterative intra-AS repair: raise the cost of free edges
/// that appear as unrequested predecessors until every requirement holds.
pub fn iterative_intra_repair(
    model: &CostModel,
    reqs: &[PathRequirement],
    cap: usize,
) -> Result<(Vec<i64>, RepairLog), RepairError> {
    let mut costs = model.initial.clone();
    let mut log = RepairLog::default();
    for _ in 0..cap {
        log.iterations += 1;
        let violated: Vec<&PathRequirement> = reqs
            .iter()
            .filter(|r| !verify_requirement(model, &costs, r))
            .collect();
        if violated.is_empty() {
            log.converged = true;
            log.costs_assigned = costs_by_edge(model, &costs);
            return Ok((costs, log));
        }
        let mut bumped = false;
        for req in violated {
            let mut adj: BTreeMap<&str, Vec<(&str, u64)>> = BTreeMap::new();
            for (e, (u, v)) in model.edges.iter().enumerate() {
                adj.entry(u).or_default().push((v, costs[e].max(1) as u64));
            }
            let entry = spf(&req.src, &adj);
            let wanted = constraints::requested_preds(&req.paths);
            for (v, preds) in &wanted {
                let actual = entry.preds.get(v).cloned().unwrap_or_default();
                for wrong in actual.difference(preds) {
                    let Some(e) = model.edge(wrong, v) else {
                        continue;
                    };
                    if model.fixed.contains_key(&e) {
                        return Err(RepairError::ConflictingRequirement(format!(
                            "original link {wrong}->{v} shortcuts {}->{}",
                            req.src, req.dst
                        )));
                    }
                    if costs[e] >= model.max_cost {
                        return Err(RepairError::NonConvergence(log.iterations));
                    }
                    costs[e] += 1;
                    bumped = true;
                }
            }
        }
        if !bumped {
            return Err(RepairError::ConflictingRequirement(
                "no adjustable fake link on any violating path".into(),
            ));
        }
    }
    Err(RepairError::NonConvergence(cap))
}

/// Build the cost model of one AS from the anonymized network: directed
/// OSPF links, original links pinned at their configured costs.
pub fn build_cost_model(
    anon: &Network,
    asn: u32,
    original_links: &BTreeSet<(String, String)>,
) -> CostModel {
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut costs: Vec<i64> = Vec::new();
    let mut pins: Vec<bool> = Vec::new();
    for l in anon.ospf_links(asn) {
        for (from, to) in [(&l.a, &l.b), (&l.b, &l.a)] {
            let key = (from.clone(), to.clone());
            let pinned = original_links.contains(&key)
                || original_links.contains(&(to.clone(), from.clone()));
            edges.push(key);
            costs.push(anon.link_cost(l, from) as i64);
            pins.push(pinned);
        }
    }
    let mut model = CostModel::new(edges.clone());
    for (i, (tail, head)) in edges.iter().enumerate() {
        model.set_initial(tail, head, costs[i]);
        if pins[i] {
            model.pin(tail, head, costs[i]);
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(edges: &[(&str, &str)], pins: &[((&str, &str), i64)]) -> CostModel {
        let mut m = CostModel::new(
            edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        );
        for ((a, b), c) in pins {
            m.pin(a, b, *c);
            m.set_initial(a, b, *c);
        }
        m
    }

    fn both<'a>(edges: &[(&'a str, &'a str)]) -> Vec<(&'a str, &'a str)> {
        edges
            .iter()
            .flat_map(|(a, b)| [(*a, *b), (*b, *a)])
            .collect()
    }

    fn req(as_id: u32, paths: &[&[&str]]) -> PathRequirement {
        let set: BTreeSet<Vec<String>> = paths
            .iter()
            .map(|p| p.iter().map(|s| s.to_string()).collect())
            .collect();
        let first = paths[0];
        PathRequirement::new(
            as_id,
            first[0].to_string(),
            first[first.len() - 1].to_string(),
            set,
        )
    }

    #[test]
    fn triangle_primary_forces_detour() {
        // s-a-t requested although s-t edge exists: solver must make
        // cost(s,a) + cost(a,t) < cost(s,t)
        let m = model(&both(&[("s", "a"), ("a", "t"), ("s", "t")]), &[]);
        let r = req(0, &[&["s", "a", "t"]]);
        let mut cs = ConstraintSet::new(&m);
        encode_primary(&r, &m, &mut cs).unwrap();
        let (costs, _) = solver::solve_costs(&cs, &m, &[&r], 100_000).unwrap();
        let c = |a: &str, b: &str| costs[m.edge(a, b).unwrap()];
        assert!(c("s", "a") + c("a", "t") < c("s", "t"));
        assert!(verify_requirement(&m, &costs, &r));
    }

    #[test]
    fn single_edge_requirement_trivially_sat() {
        let m = model(&both(&[("s", "t")]), &[]);
        let r = req(0, &[&["s", "t"]]);
        let mut cs = ConstraintSet::new(&m);
        encode_primary(&r, &m, &mut cs).unwrap();
        let (costs, _) = solver::solve_costs(&cs, &m, &[&r], 10_000).unwrap();
        assert!(verify_requirement(&m, &costs, &r));
    }

    #[test]
    fn non_edge_requirement_rejected() {
        let m = model(&both(&[("s", "a")]), &[]);
        let r = req(0, &[&["s", "t"]]);
        let mut cs = ConstraintSet::new(&m);
        assert!(matches!(
            encode_primary(&r, &m, &mut cs),
            Err(RepairError::PathNotInGraph(_, _))
        ));
    }

    #[test]
    fn contradictory_primaries_unsat() {
        // both s-a-t and s-t as unique paths for the same pair
        let m = model(&both(&[("s", "a"), ("a", "t"), ("s", "t")]), &[]);
        let r1 = req(0, &[&["s", "a", "t"]]);
        let r2 = req(0, &[&["s", "t"]]);
        let mut cs = ConstraintSet::new(&m);
        encode_primary(&r1, &m, &mut cs).unwrap();
        encode_primary(&r2, &m, &mut cs).unwrap();
        assert_eq!(
            solver::solve_costs(&cs, &m, &[&r1, &r2], 100_000).unwrap_err(),
            RepairError::Unsat
        );
    }

    #[test]
    fn ecmp_square_forces_equal_sums() {
        let m = model(&both(&[("s", "b"), ("b", "t"), ("s", "d"), ("d", "t")]), &[]);
        let r = req(0, &[&["s", "b", "t"], &["s", "d", "t"]]);
        let mut cs = ConstraintSet::new(&m);
        encode_ecmp(&r, &m, &mut cs).unwrap();
        let (costs, _) = solver::solve_costs(&cs, &m, &[&r], 100_000).unwrap();
        let c = |a: &str, b: &str| costs[m.edge(a, b).unwrap()];
        assert_eq!(c("s", "b") + c("b", "t"), c("s", "d") + c("d", "t"));
        assert!(verify_requirement(&m, &costs, &r));
    }

    #[test]
    fn ecmp_missing_predecessor_unsat_under_pins() {
        // pinned equal-cost square, but only one of the two paths requested:
        // the other predecessor cannot be excluded
        let m = model(
            &both(&[("s", "b"), ("b", "t"), ("s", "d"), ("d", "t")]),
            &[
                (("s", "b"), 1),
                (("b", "s"), 1),
                (("b", "t"), 1),
                (("t", "b"), 1),
                (("s", "d"), 1),
                (("d", "s"), 1),
                (("d", "t"), 1),
                (("t", "d"), 1),
            ],
        );
        let r = req(0, &[&["s", "b", "t"]]);
        let mut cs = ConstraintSet::new(&m);
        encode_primary(&r, &m, &mut cs).unwrap();
        assert_eq!(
            solver::solve_costs(&cs, &m, &[&r], 100_000).unwrap_err(),
            RepairError::Unsat
        );
    }

    #[test]
    fn empty_constraint_set_accepts_minimum() {
        let m = model(&both(&[("s", "t")]), &[]);
        let cs = ConstraintSet::new(&m);
        let (costs, _) = solver::solve_costs(&cs, &m, &[], 1_000).unwrap();
        assert!(costs.iter().all(|c| *c == 1));
    }

    #[test]
    fn cegis_converges_and_counts_iterations() {
        // fake shortcut edge (s,t) must get an expensive cost
        let mut m = model(
            &both(&[("s", "a"), ("a", "t"), ("s", "t")]),
            &[
                (("s", "a"), 2),
                (("a", "s"), 2),
                (("a", "t"), 2),
                (("t", "a"), 2),
            ],
        );
        m.set_initial("s", "t", 1);
        m.set_initial("t", "s", 1);
        let r = req(0, &[&["s", "a", "t"]]);
        let (costs, log) = cegis_repair(&m, std::slice::from_ref(&r), 100_000).unwrap();
        assert!(log.converged);
        assert_eq!(log.iterations, 2, "one verify miss, one solve round");
        assert!(verify_requirement(&m, &costs, &r));
        // pinned costs untouched
        assert_eq!(costs[m.edge("s", "a").unwrap()], 2);
    }

    #[test]
    fn cegis_noop_when_already_satisfied() {
        let m = model(
            &both(&[("s", "a"), ("a", "t")]),
            &[
                (("s", "a"), 1),
                (("a", "s"), 1),
                (("a", "t"), 1),
                (("t", "a"), 1),
            ],
        );
        let r = req(0, &[&["s", "a", "t"]]);
        let (costs, log) = cegis_repair(&m, std::slice::from_ref(&r), 10_000).unwrap();
        assert!(log.converged);
        assert_eq!(log.iterations, 1);
        assert_eq!(costs, m.initial);
    }

    #[test]
    fn iterative_repair_raises_fake_cost() {
        let mut m = model(
            &both(&[("s", "a"), ("a", "t"), ("s", "t")]),
            &[
                (("s", "a"), 2),
                (("a", "s"), 2),
                (("a", "t"), 2),
                (("t", "a"), 2),
            ],
        );
        m.set_initial("s", "t", 1);
        m.set_initial("t", "s", 1);
        let r = req(0, &[&["s", "a", "t"]]);
        let (costs, log) = iterative_intra_repair(&m, std::slice::from_ref(&r), 100).unwrap();
        assert!(log.converged);
        assert!(log.iterations > 1, "took several bumps");
        assert!(verify_requirement(&m, &costs, &r));
        assert!(costs[m.edge("s", "t").unwrap()] > 4);
    }
}
