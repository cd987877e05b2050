//! Exact all-in-one anonymization: boolean edge variables with pinned
//! original edges, hard degree-mapping counting constraints, and the
//! weighted degree-gap objective, solved by branch and bound.

use std::collections::BTreeMap;

use super::{check_kdma, AnonymizeError, AnonymityParams, KdmaLevel};
use crate::expansion::{embed_with_mapping, NodeMapping};
use crate::topology::{NodeKind, Topology};

/// Constraint system over edge indicator variables.
#[derive(Debug)]
pub struct DegreeConstraintSet {
    pub nodes: Vec<String>,
    /// All unordered pairs (i < j) as variable indices.
    pub pairs: Vec<(usize, usize)>,
    /// Variables pinned true (original edges under the mapping).
    pub pinned: Vec<bool>,
    /// Expected degree per node, from the reference.
    pub expected_deg: Vec<usize>,
    /// Descending original degrees; level i requires k+i nodes at >= deg.
    pub level_thresholds: Vec<usize>,
    pub k: usize,
}

#[derive(Debug)]
pub struct MaxSmtOutcome {
    pub graph: Topology,
    pub objective: u64,
    pub explored: u64,
}

/// Build the constraint set for `g` embedded into `reference` under
/// `mapping`. Output node names follow the embedding convention (original
/// names for mapped nodes, reference names otherwise).
pub fn build_constraints(
    g: &Topology,
    reference: &Topology,
    mapping: &NodeMapping,
    k: usize,
) -> DegreeConstraintSet {
    let inverse: BTreeMap<&String, &String> = mapping.map.iter().map(|(o, r)| (r, o)).collect();
    let mut nodes: Vec<String> = Vec::new();
    let mut expected_deg: Vec<usize> = Vec::new();
    for r in reference.routers() {
        let name = inverse.get(r).map(|o| (*o).clone()).unwrap_or_else(|| r.clone());
        nodes.push(name);
        expected_deg.push(reference.router_degree(r));
    }
    let index: BTreeMap<&String, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut pairs = Vec::new();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            pairs.push((i, j));
        }
    }
    let mut pinned = vec![false; pairs.len()];
    for (a, b) in g.router_edges() {
        let (ia, ib) = (index[&a], index[&b]);
        let key = (ia.min(ib), ia.max(ib));
        let pos = pairs.iter().position(|p| *p == key).unwrap();
        pinned[pos] = true;
    }
    let mut level_thresholds: Vec<usize> = g.routers().map(|r| g.router_degree(r)).collect();
    level_thresholds.sort_unstable_by(|a, b| b.cmp(a));
    DegreeConstraintSet {
        nodes,
        pairs,
        pinned,
        expected_deg,
        level_thresholds,
        k,
    }
}

struct Search<'a> {
    cs: &'a DegreeConstraintSet,
    /// incident undecided variable count per node
    undecided: Vec<usize>,
    decided_deg: Vec<usize>,
    assignment: Vec<Option<bool>>,
    best: Option<(u64, Vec<bool>)>,
    explored: u64,
    budget: u64,
}

impl<'a> Search<'a> {
    fn objective_lower_bound(&self) -> u64 {
        let mut lb = 0u64;
        for (i, e) in self.cs.expected_deg.iter().enumerate() {
            let lo = self.decided_deg[i];
            let hi = self.decided_deg[i] + self.undecided[i];
            let gap = if *e < lo {
                lo - e
            } else if *e > hi {
                e - hi
            } else {
                0
            };
            lb += gap as u64;
        }
        lb
    }

    /// Counting constraints still achievable? Compares the optimistic
    /// per-node degree ceiling against each level's requirement.
    fn levels_feasible(&self) -> bool {
        for (i, d) in self.cs.level_thresholds.iter().enumerate() {
            let required = self.cs.k + i;
            let achievable = (0..self.cs.nodes.len())
                .filter(|n| self.decided_deg[*n] + self.undecided[*n] >= *d)
                .count();
            if achievable < required {
                return false;
            }
        }
        true
    }

    fn levels_satisfied(&self) -> bool {
        for (i, d) in self.cs.level_thresholds.iter().enumerate() {
            let required = self.cs.k + i;
            let have = (0..self.cs.nodes.len())
                .filter(|n| self.decided_deg[*n] >= *d)
                .count();
            if have < required {
                return false;
            }
        }
        true
    }

    fn dfs(&mut self, var: usize) -> Result<(), AnonymizeError> {
        self.explored += 1;
        if self.explored > self.budget {
            return Err(AnonymizeError::SolverTimeout(self.explored));
        }
        if let Some((best_obj, _)) = &self.best {
            if self.objective_lower_bound() >= *best_obj {
                return Ok(());
            }
        }
        if !self.levels_feasible() {
            return Ok(());
        }
        if var == self.cs.pairs.len() {
            if self.levels_satisfied() {
                let obj = self.objective_lower_bound();
                let assign: Vec<bool> = self.assignment.iter().map(|a| a.unwrap()).collect();
                match &self.best {
                    Some((b, _)) if *b <= obj => {}
                    _ => self.best = Some((obj, assign)),
                }
            }
            return Ok(());
        }
        let (a, b) = self.cs.pairs[var];
        let order = if self.cs.pinned[var] {
            vec![true]
        } else {
            // try the value that moves both endpoints toward their targets
            let want = self.decided_deg[a] < self.cs.expected_deg[a]
                && self.decided_deg[b] < self.cs.expected_deg[b];
            if want {
                vec![true, false]
            } else {
                vec![false, true]
            }
        };
        for value in order {
            self.assignment[var] = Some(value);
            self.undecided[a] -= 1;
            self.undecided[b] -= 1;
            if value {
                self.decided_deg[a] += 1;
                self.decided_deg[b] += 1;
            }
            self.dfs(var + 1)?;
            if value {
                self.decided_deg[a] -= 1;
                self.decided_deg[b] -= 1;
            }
            self.undecided[a] += 1;
            self.undecided[b] += 1;
            self.assignment[var] = None;
        }
        Ok(())
    }
}

/// Solve the all-in-one embedding + k-DMA problem exactly.
pub fn kdma_maxsmt(
    g: &Topology,
    reference: &Topology,
    mapping: &NodeMapping,
    k: usize,
) -> Result<MaxSmtOutcome, AnonymizeError> {
    kdma_maxsmt_with_budget(g, reference, mapping, k, 4_000_000)
}

pub fn kdma_maxsmt_with_budget(
    g: &Topology,
    reference: &Topology,
    mapping: &NodeMapping,
    k: usize,
    budget: u64,
) -> Result<MaxSmtOutcome, AnonymizeError> {
    let cs = build_constraints(g, reference, mapping, k);
    // quick counting bound: level i needs k+i nodes
    let n = cs.nodes.len();
    for (i, _) in cs.level_thresholds.iter().enumerate() {
        if cs.k + i > n {
            return Err(AnonymizeError::Unsatisfiable);
        }
    }
    let mut search = Search {
        cs: &cs,
        undecided: {
            let mut u = vec![0usize; n];
            for (a, b) in &cs.pairs {
                u[*a] += 1;
                u[*b] += 1;
            }
            u
        },
        decided_deg: vec![0; n],
        assignment: vec![None; cs.pairs.len()],
        best: None,
        explored: 0,
        budget,
    };
    // seed the incumbent with the greedy pipeline result so pruning bites
    if let Some((obj, assign)) = greedy_incumbent(g, reference, mapping, k, &cs) {
        search.best = Some((obj, assign));
    }
    search.dfs(0)?;
    let explored = search.explored;
    match search.best.take() {
        None => Err(AnonymizeError::Unsatisfiable),
        Some((objective, assign)) => {
            let graph = realize(&cs, &assign, g);
            Ok(MaxSmtOutcome {
                graph,
                objective,
                explored,
            })
        }
    }
}

fn realize(cs: &DegreeConstraintSet, assign: &[bool], g: &Topology) -> Topology {
    let mut t = Topology::new(format!("{}-maxsmt", g.name));
    for n in &cs.nodes {
        t.add_node(n.clone(), NodeKind::Router);
        if let Some(asn) = g.as_of(n) {
            t.set_as(n, asn);
        }
    }
    for (v, (a, b)) in cs.pairs.iter().enumerate() {
        if assign[v] {
            t.add_edge(&cs.nodes[*a], &cs.nodes[*b]);
        }
    }
    t
}

fn greedy_incumbent(
    g: &Topology,
    reference: &Topology,
    mapping: &NodeMapping,
    k: usize,
    cs: &DegreeConstraintSet,
) -> Option<(u64, Vec<bool>)> {
    let emb = embed_with_mapping(g, reference, mapping);
    let params = AnonymityParams {
        k_routers: k,
        kdma_level: KdmaLevel::Strong,
        seed: 1,
        ..Default::default()
    };
    let candidate = super::kdma_greedy(g, &emb, &params).ok()?;
    if !check_kdma(g, &candidate, k, KdmaLevel::Strong) {
        return None;
    }
    let index: BTreeMap<&String, usize> =
        cs.nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut assign = vec![false; cs.pairs.len()];
    for (a, b) in candidate.router_edges() {
        let (ia, ib) = (*index.get(&a)?, *index.get(&b)?);
        let key = (ia.min(ib), ia.max(ib));
        let pos = cs.pairs.iter().position(|p| *p == key)?;
        assign[pos] = true;
    }
    let mut deg = vec![0usize; cs.nodes.len()];
    for (v, (a, b)) in cs.pairs.iter().enumerate() {
        if assign[v] {
            deg[*a] += 1;
            deg[*b] += 1;
        }
    }
    let obj: u64 = deg
        .iter()
        .zip(&cs.expected_deg)
        .map(|(d, e)| (*d as i64 - *e as i64).unsigned_abs())
        .sum();
    Some((obj, assign))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::node_mapping;

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> Topology {
        let mut t = Topology::new("t");
        for n in nodes {
            t.add_node(*n, NodeKind::Router);
        }
        for (a, b) in edges {
            t.add_edge(a, b);
        }
        t
    }

    /// Exhaustive oracle over all graphs on the reference node count.
    fn exhaustive_best(
        g: &Topology,
        reference: &Topology,
        mapping: &NodeMapping,
        k: usize,
    ) -> Option<u64> {
        let cs = build_constraints(g, reference, mapping, k);
        let m = cs.pairs.len();
        let mut best: Option<u64> = None;
        'assign: for bits in 0u32..(1 << m) {
            let assign: Vec<bool> = (0..m).map(|v| bits & (1 << v) != 0).collect();
            for (v, pin) in cs.pinned.iter().enumerate() {
                if *pin && !assign[v] {
                    continue 'assign;
                }
            }
            let mut deg = vec![0usize; cs.nodes.len()];
            for (v, (a, b)) in cs.pairs.iter().enumerate() {
                if assign[v] {
                    deg[*a] += 1;
                    deg[*b] += 1;
                }
            }
            let ok = cs.level_thresholds.iter().enumerate().all(|(i, d)| {
                deg.iter().filter(|x| **x >= *d).count() >= k + i
            });
            if !ok {
                continue;
            }
            let obj: u64 = deg
                .iter()
                .zip(&cs.expected_deg)
                .map(|(d, e)| (*d as i64 - *e as i64).unsigned_abs())
                .sum();
            best = Some(best.map_or(obj, |b| b.min(obj)));
        }
        best
    }

    #[test]
    fn single_edge_into_triangle_is_optimal_zero() {
        let g = graph(&["s", "t"], &[("s", "t")]);
        let r = graph(&["x", "y", "z"], &[("x", "y"), ("y", "z"), ("x", "z")]);
        let mapping = node_mapping(&g, &r).unwrap();
        let out = kdma_maxsmt(&g, &r, &mapping, 1).unwrap();
        assert_eq!(out.objective, 0);
        assert_eq!(out.graph.router_edges().len(), 3, "triangle is optimal");
        assert_eq!(exhaustive_best(&g, &r, &mapping, 1), Some(0));
    }

    #[test]
    fn oversized_k_is_unsatisfiable() {
        let g = graph(&["s", "t"], &[("s", "t")]);
        let r = graph(&["x", "y", "z"], &[("x", "y"), ("y", "z"), ("x", "z")]);
        let mapping = node_mapping(&g, &r).unwrap();
        assert_eq!(
            kdma_maxsmt(&g, &r, &mapping, 3).unwrap_err(),
            AnonymizeError::Unsatisfiable
        );
    }

    #[test]
    fn identity_compliant_reference_scores_zero() {
        let r = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("a", "c")]);
        let mapping = node_mapping(&r, &r).unwrap();
        let out = kdma_maxsmt(&r, &r, &mapping, 1).unwrap();
        assert_eq!(out.objective, 0);
    }

    #[test]
    fn matches_exhaustive_on_small_instances() {
        let g = graph(&["s", "t", "u"], &[("s", "t"), ("t", "u")]);
        let r = graph(
            &["p", "q", "w", "v"],
            &[("p", "q"), ("q", "w"), ("w", "v"), ("v", "p")],
        );
        let mapping = node_mapping(&g, &r).unwrap();
        for k in 1..=2 {
            let ours = kdma_maxsmt(&g, &r, &mapping, k).unwrap();
            let oracle = exhaustive_best(&g, &r, &mapping, k).unwrap();
            assert_eq!(ours.objective, oracle, "k={k}");
            assert!(check_kdma(&g, &ours.graph, k, KdmaLevel::Strong));
        }
    }
}
