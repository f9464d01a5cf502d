//! Splitting a knowledge base into a curriculum of nested sub-bases.
//!
//! Each concept seeds a cluster of the rules that mention it, grown along
//! the rule dependency graph. Clusters are ordered so that a cluster whose
//! conclusions another relies on comes first, and sub-base `p` is the union
//! of the first `p` (possibly merged) clusters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::logic::{KnowledgeBase, LabelId, PredKey, RuleId, Theory};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("knowledge base declares no concepts")]
    NoConcepts,
    #[error("tau must be positive")]
    ZeroTau,
    #[error("tau {tau} exceeds the number of concepts ({concepts})")]
    TauTooLarge { tau: usize, concepts: usize },
    #[error("concept {0} is not referenced by any rule")]
    Unreferenced(PredKey),
}

/// Edge `(i, j)` when the head predicate of rule `i` occurs in the body of rule `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    nodes: usize,
    edges: BTreeSet<(RuleId, RuleId)>,
    succ: Vec<Vec<RuleId>>,
}

impl DependencyGraph {
    pub fn new(kb: &KnowledgeBase) -> Self {
        let mut users: BTreeMap<PredKey, Vec<RuleId>> = BTreeMap::new();
        for rule in kb.rules() {
            let used: BTreeSet<PredKey> = rule.body_atoms().map(|a| a.key()).collect();
            for key in used {
                users.entry(key).or_default().push(rule.id);
            }
        }
        let mut edges = BTreeSet::new();
        let mut succ = vec![Vec::new(); kb.len()];
        for rule in kb.rules() {
            if let Some(targets) = users.get(&rule.head.key()) {
                for &j in targets {
                    edges.insert((rule.id, j));
                    succ[rule.id].push(j);
                }
            }
        }
        DependencyGraph {
            nodes: kb.len(),
            edges,
            succ,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes == 0
    }

    pub fn edges(&self) -> &BTreeSet<(RuleId, RuleId)> {
        &self.edges
    }

    pub fn successors(&self, rule: RuleId) -> &[RuleId] {
        &self.succ[rule]
    }

    pub fn has_edge(&self, from: RuleId, to: RuleId) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Strongly connected components (Tarjan), as a component index per rule.
    pub fn components(&self) -> Vec<usize> {
        struct State<'g> {
            g: &'g DependencyGraph,
            index: Vec<Option<usize>>,
            low: Vec<usize>,
            on_stack: Vec<bool>,
            stack: Vec<usize>,
            next: usize,
            comp: Vec<usize>,
            count: usize,
        }
        fn visit(s: &mut State, v: usize) {
            s.index[v] = Some(s.next);
            s.low[v] = s.next;
            s.next += 1;
            s.stack.push(v);
            s.on_stack[v] = true;
            for &w in &s.g.succ[v] {
                match s.index[w] {
                    None => {
                        visit(s, w);
                        s.low[v] = s.low[v].min(s.low[w]);
                    }
                    Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                    Some(_) => {}
                }
            }
            if Some(s.low[v]) == s.index[v] {
                while let Some(w) = s.stack.pop() {
                    s.on_stack[w] = false;
                    s.comp[w] = s.count;
                    if w == v {
                        break;
                    }
                }
                s.count += 1;
            }
        }
        let n = self.nodes;
        let mut s = State {
            g: self,
            index: vec![None; n],
            low: vec![0; n],
            on_stack: vec![false; n],
            stack: Vec::new(),
            next: 0,
            comp: vec![0; n],
            count: 0,
        };
        for v in 0..n {
            if s.index[v].is_none() {
                visit(&mut s, v);
            }
        }
        s.comp
    }
}

pub fn build_dependency_graph(kb: &KnowledgeBase) -> DependencyGraph {
    DependencyGraph::new(kb)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    pub seeds: BTreeSet<LabelId>,
    pub rules: BTreeSet<RuleId>,
    /// Concepts referenced by the bodies of the cluster's rules.
    pub domain: BTreeSet<LabelId>,
}

impl Cluster {
    fn key<'k>(&self, kb: &'k KnowledgeBase) -> (usize, &'k str) {
        let first = self
            .seeds
            .iter()
            .map(|&l| kb.label_name(l).as_str())
            .min()
            .unwrap_or("");
        (self.rules.len(), first)
    }
}

/// One cluster per concept, grown forward through concept-free rules towards
/// the target and backward through the definitions of every predicate used.
/// Rules on a dependency cycle always enter a cluster together.
pub fn initial_clusters(
    kb: &KnowledgeBase,
    g: &DependencyGraph,
) -> Result<Vec<Cluster>, PartitionError> {
    let comp = g.components();
    let mut members: BTreeMap<usize, Vec<RuleId>> = BTreeMap::new();
    for (rule, &c) in comp.iter().enumerate() {
        members.entry(c).or_default().push(rule);
    }
    let concepts_of: Vec<BTreeSet<LabelId>> = (0..kb.len()).map(|r| kb.rule_concepts(r)).collect();

    let mut clusters = Vec::new();
    for (label, &key) in kb.concepts().iter().enumerate() {
        let seed: Vec<RuleId> = (0..kb.len())
            .filter(|&r| concepts_of[r].contains(&label))
            .collect();
        if seed.is_empty() {
            return Err(PartitionError::Unreferenced(key));
        }
        let foreign = |r: RuleId| concepts_of[r].iter().any(|&c| c != label);
        let mut rules = BTreeSet::new();
        let add = |r: RuleId, rules: &mut BTreeSet<RuleId>, frontier: &mut Vec<RuleId>| {
            for &m in &members[&comp[r]] {
                if rules.insert(m) {
                    frontier.push(m);
                }
            }
        };

        let mut frontier = Vec::new();
        for &r in &seed {
            add(r, &mut rules, &mut frontier);
        }
        while let Some(r) = frontier.pop() {
            for &next in g.successors(r) {
                if concepts_of[next].is_empty() && !rules.contains(&next) {
                    add(next, &mut rules, &mut frontier);
                }
            }
        }

        let mut frontier: Vec<RuleId> = rules.iter().copied().collect();
        while let Some(r) = frontier.pop() {
            for atom in kb.rule(r).body_atoms() {
                for &def in kb.defining_rules(atom.key()) {
                    if !foreign(def) && !rules.contains(&def) {
                        add(def, &mut rules, &mut frontier);
                    }
                }
            }
        }

        let domain = rules.iter().flat_map(|&r| concepts_of[r].iter().copied()).collect();
        clusters.push(Cluster {
            seeds: BTreeSet::from([label]),
            rules,
            domain,
        });
    }
    Ok(clusters)
}

/// Merges clusters with identical rule sets and sorts them topologically by
/// precedence. A two-way dependency puts the cluster with fewer rules first;
/// equal sizes fall back to the smallest seed concept name.
pub fn merge_and_order(kb: &KnowledgeBase, clusters: Vec<Cluster>, g: &DependencyGraph) -> Vec<Cluster> {
    let mut merged: Vec<Cluster> = Vec::new();
    for c in clusters {
        match merged.iter_mut().find(|m| m.rules == c.rules) {
            Some(m) => {
                m.seeds.extend(c.seeds);
                m.domain.extend(c.domain);
            }
            None => merged.push(c),
        }
    }

    let n = merged.len();
    let depends = |a: &Cluster, b: &Cluster| {
        a.rules
            .iter()
            .any(|&ri| g.successors(ri).iter().any(|rj| b.rules.contains(rj)))
    };
    let mut before = vec![BTreeSet::new(); n];
    for a in 0..n {
        for b in 0..n {
            if a == b || !depends(&merged[a], &merged[b]) {
                continue;
            }
            let mutual = depends(&merged[b], &merged[a]);
            if !mutual || merged[a].key(kb) < merged[b].key(kb) {
                before[b].insert(a);
            }
        }
    }

    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let remaining = (0..n).filter(|&i| !placed[i]);
        let ready: Vec<usize> = remaining
            .clone()
            .filter(|&i| before[i].iter().all(|&p| placed[p]))
            .collect();
        // a precedence cycle among three or more clusters is broken by the same key
        let pool = if ready.is_empty() { remaining.collect() } else { ready };
        let next = *pool.iter().min_by_key(|&&i| merged[i].key(kb)).unwrap();
        placed[next] = true;
        order.push(next);
    }
    let mut slots: Vec<Option<Cluster>> = merged.into_iter().map(Some).collect();
    order.into_iter().map(|i| slots[i].take().unwrap()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubBase {
    pub rules: BTreeSet<RuleId>,
    pub domain: BTreeSet<LabelId>,
    /// Concepts first active in this phase, in cluster order.
    pub introduced: Vec<LabelId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Curriculum {
    phases: Vec<SubBase>,
}

impl Curriculum {
    /// Wraps phases as given; see [`Curriculum::check`] for the invariants.
    pub fn from_phases(phases: Vec<SubBase>) -> Self {
        Curriculum { phases }
    }

    pub fn phases(&self) -> &[SubBase] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phase(&self, p: usize) -> &SubBase {
        &self.phases[p]
    }

    pub fn last(&self) -> &SubBase {
        self.phases.last().expect("curriculum has phases")
    }

    /// Phase index in which `label` becomes active.
    pub fn phase_of(&self, label: LabelId) -> Option<usize> {
        self.phases.iter().position(|s| s.domain.contains(&label))
    }

    /// The knowledge base restricted to phase `p`.
    pub fn theory(&self, full: &Theory, p: usize) -> Theory {
        full.restrict(self.phases[p].rules.iter().copied())
    }

    /// Nesting, coverage and (with `tau`) growth.
    pub fn check(&self, kb: &KnowledgeBase, tau: Option<usize>) -> Result<(), String> {
        if self.phases.is_empty() {
            return Err("no phases".into());
        }
        for (p, pair) in self.phases.windows(2).enumerate() {
            if !pair[0].rules.is_subset(&pair[1].rules) || !pair[0].domain.is_subset(&pair[1].domain) {
                return Err(format!("phase {} is not contained in phase {}", p + 1, p + 2));
            }
        }
        let last = self.last();
        if last.rules.len() != kb.len() || last.domain.len() != kb.concepts().len() {
            return Err("final phase does not cover the knowledge base".into());
        }
        if let Some(tau) = tau {
            let mut prev = BTreeSet::new();
            for (p, s) in self.phases.iter().enumerate() {
                let grown = s.domain.difference(&prev).count();
                if p + 1 < self.phases.len() && grown < tau {
                    return Err(format!("phase {} adds {grown} concepts, fewer than tau={tau}", p + 1));
                }
                prev = s.domain.clone();
            }
        }
        Ok(())
    }

    /// One line per phase: `phase p: +{new concepts} rules=n |Z_p|=k`.
    pub fn summary(&self, kb: &KnowledgeBase) -> String {
        let mut out = String::new();
        for (p, s) in self.phases.iter().enumerate() {
            let names: Vec<&str> = s.introduced.iter().map(|&l| kb.label_name(l).as_str()).collect();
            let _ = writeln!(
                out,
                "phase {}: +{{{}}} rules={} |Z_{}|={}",
                p + 1,
                names.join(", "),
                s.rules.len(),
                p + 1,
                s.domain.len()
            );
        }
        out
    }

    /// The dependency graph in DOT, with each phase's newly added rules in
    /// their own subgraph.
    pub fn to_dot(&self, kb: &KnowledgeBase, g: &DependencyGraph) -> String {
        let mut out = String::from("digraph kb {\n  node [shape=box];\n");
        let mut seen = BTreeSet::new();
        for (p, s) in self.phases.iter().enumerate() {
            let _ = writeln!(out, "  subgraph cluster_phase{} {{\n    label=\"phase {}\";", p + 1, p + 1);
            for &r in &s.rules {
                if seen.insert(r) {
                    let head = kb.rule(r).head.to_string().replace('"', "\\\"");
                    let _ = writeln!(out, "    r{r} [label=\"{head}\"];");
                }
            }
            out.push_str("  }\n");
        }
        for &(a, b) in g.edges() {
            let _ = writeln!(out, "  r{a} -> r{b};");
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for SubBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rules={:?} domain={:?}", self.rules, self.domain)
    }
}

/// Cuts the ordered clusters into cumulative sub-bases. With `tau`, clusters
/// are merged forward until at least `tau` new concepts have accumulated; the
/// final phase takes whatever remains.
pub fn assemble_subbases(
    kb: &KnowledgeBase,
    ordered: &[Cluster],
    tau: Option<usize>,
) -> Result<Curriculum, PartitionError> {
    let concepts = kb.concepts().len();
    if concepts == 0 {
        return Err(PartitionError::NoConcepts);
    }
    match tau {
        Some(0) => return Err(PartitionError::ZeroTau),
        Some(t) if t > concepts => return Err(PartitionError::TauTooLarge { tau: t, concepts }),
        _ => {}
    }
    let threshold = tau.unwrap_or(1);

    let mut phases = Vec::new();
    let mut rules = BTreeSet::new();
    let mut domain = BTreeSet::new();
    let mut introduced = Vec::new();
    let mut taken = vec![false; ordered.len()];
    for i in 0..ordered.len() {
        if taken[i] {
            continue;
        }
        // A cluster can involve concepts seeded elsewhere; their clusters are
        // pulled forward so every active concept brings all of its rules.
        let mut next = Some(i);
        while let Some(j) = next {
            taken[j] = true;
            let cluster = &ordered[j];
            rules.extend(cluster.rules.iter().copied());
            let mut fresh: Vec<LabelId> = cluster
                .domain
                .iter()
                .copied()
                .filter(|l| !domain.contains(l))
                .collect();
            fresh.sort_by_key(|&l| (!cluster.seeds.contains(&l), kb.label_name(l)));
            domain.extend(fresh.iter().copied());
            introduced.extend(fresh);
            next = (0..ordered.len()).find(|&k| !taken[k] && !ordered[k].seeds.is_disjoint(&domain));
        }
        let last = taken.iter().all(|&t| t);
        if introduced.len() >= threshold || last {
            phases.push(SubBase {
                rules: rules.clone(),
                domain: domain.clone(),
                introduced: std::mem::take(&mut introduced),
            });
        }
    }
    // Rules outside every cluster join the first phase, so the last covers the
    // KB, together with the concept-free definitions they rely on.
    let mut orphans: BTreeSet<RuleId> = (0..kb.len()).filter(|r| !rules.contains(r)).collect();
    let mut stack: Vec<RuleId> = orphans.iter().copied().collect();
    while let Some(r) = stack.pop() {
        for atom in kb.rule(r).body_atoms() {
            for &d in kb.defining_rules(atom.key()) {
                if kb.rule_concepts(d).is_empty() && orphans.insert(d) {
                    stack.push(d);
                }
            }
        }
    }
    for phase in &mut phases {
        phase.rules.extend(orphans.iter().copied());
    }
    Ok(Curriculum { phases })
}

pub fn partition(kb: &KnowledgeBase, tau: Option<usize>) -> Result<Curriculum, PartitionError> {
    if kb.concepts().is_empty() {
        return Err(PartitionError::NoConcepts);
    }
    let g = DependencyGraph::new(kb);
    let clusters = initial_clusters(kb, &g)?;
    let ordered = merge_and_order(kb, clusters, &g);
    assemble_subbases(kb, &ordered, tau)
}

/// [`partition`] plus its wall-clock time.
pub fn partition_timed(
    kb: &KnowledgeBase,
    tau: Option<usize>,
) -> Result<(Curriculum, Duration), PartitionError> {
    let start = Instant::now();
    let curriculum = partition(kb, tau)?;
    Ok((curriculum, start.elapsed()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_program;
    use crate::tasks::Task;

    fn names(kb: &KnowledgeBase, labels: impl IntoIterator<Item = LabelId>) -> Vec<&'static str> {
        labels.into_iter().map(|l| kb.label_name(l).as_str()).collect()
    }

    #[test]
    fn addition_graph_edges() {
        let task = Task::addition(10, 1).unwrap();
        let g = DependencyGraph::new(task.kb());
        // rules: 0 addition, 1 number base, 2 number step, 3 number/2, 4.. digits
        for digit in 4..14 {
            assert!(g.has_edge(digit, 2));
            assert!(!g.has_edge(digit, 1));
        }
        assert!(g.has_edge(2, 2), "recursive rule loops on itself");
        assert!(g.has_edge(1, 3) && g.has_edge(3, 0));
    }

    #[test]
    fn isolated_fact_has_no_edges() {
        let kb = parse_program("@target p/0.\np.\n").unwrap();
        assert!(DependencyGraph::new(&kb).edges().is_empty());
    }

    #[test]
    fn cycles_share_a_component() {
        let kb = parse_program(
            "@concept c/1.\n@target t/0.\nt :- a(x).\na(X) :- b(X).\nb(X) :- a(X).\nb(X) :- c(X).\n",
        )
        .unwrap();
        let comp = DependencyGraph::new(&kb).components();
        assert_eq!(comp[1], comp[2]);
        assert_ne!(comp[0], comp[1]);
        assert_ne!(comp[3], comp[1]);
    }

    #[test]
    fn addition_clusters_share_arithmetic() {
        let task = Task::addition(10, 1).unwrap();
        let kb = task.kb();
        let g = DependencyGraph::new(kb);
        let clusters = initial_clusters(kb, &g).unwrap();
        assert_eq!(clusters.len(), 10);
        for (digit, c) in clusters.iter().enumerate() {
            let expected: BTreeSet<RuleId> = [0, 1, 2, 3, 4 + digit].into();
            assert_eq!(c.rules, expected);
            assert_eq!(c.domain, BTreeSet::from([digit]));
        }
    }

    #[test]
    fn chess_clusters() {
        let task = Task::chess(8, 2).unwrap();
        let kb = task.kb();
        let g = DependencyGraph::new(kb);
        let clusters = initial_clusters(kb, &g).unwrap();
        let heads = |label: &str| -> Vec<String> {
            let c = &clusters[kb.label_id(label).unwrap()];
            c.rules.iter().map(|&r| kb.rule(r).head.predicate.to_string()).collect()
        };
        assert_eq!(heads("knight"), ["attack", "lshape", "left", "fwd"]);
        assert_eq!(heads("queen"), ["attack", "line", "diag", "diag", "line_or_diag", "line_or_diag", "left", "fwd"]);
    }

    #[test]
    fn mutual_dependency_puts_smaller_first() {
        // two clusters depending on each other through shared predicates
        let text = "\
@concept a/1.
@concept b/1.
@target t/0.
t :- a(x), q(x).
p(X) :- a(X).
t :- b(x), p(x).
q(X) :- b(X).
q(X) :- r(X).
r(X) :- b(X).
";
        let kb = parse_program(text).unwrap();
        let g = DependencyGraph::new(&kb);
        let clusters = initial_clusters(&kb, &g).unwrap();
        let sizes: Vec<usize> = clusters.iter().map(|c| c.rules.len()).collect();
        assert_eq!(sizes, vec![3, 4]);
        let ordered = merge_and_order(&kb, clusters.into_iter().rev().collect(), &g);
        assert_eq!(names(&kb, ordered[0].seeds.iter().copied()), ["a"]);
    }

    #[test]
    fn duplicate_clusters_merge() {
        let text = "@concept a/1.\n@concept b/1.\n@target t/0.\nt :- a(x), b(x).\n";
        let kb = parse_program(text).unwrap();
        let g = DependencyGraph::new(&kb);
        let ordered = merge_and_order(&kb, initial_clusters(&kb, &g).unwrap(), &g);
        assert_eq!(ordered.len(), 1);
        assert_eq!(ordered[0].seeds, BTreeSet::from([0, 1]));
    }

    #[test]
    fn chess_order_without_tau() {
        let task = Task::chess(8, 2).unwrap();
        let kb = task.kb();
        let c = partition(kb, None).unwrap();
        let order: Vec<&str> = c.phases().iter().map(|s| names(kb, s.introduced.clone())[0]).collect();
        assert_eq!(order, ["knight", "rook", "bishop", "king", "pawn", "queen"]);
        assert_eq!(names(kb, c.phase(0).domain.iter().copied()), ["knight"]);
        c.check(kb, None).unwrap();
    }

    #[test]
    fn tau_merges_forward() {
        let task = Task::chess(8, 2).unwrap();
        let kb = task.kb();
        let c = partition(kb, Some(3)).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(names(kb, c.phase(0).introduced.clone()), ["knight", "rook", "bishop"]);
        c.check(kb, Some(3)).unwrap();
        assert_eq!(partition(kb, Some(6)).unwrap().len(), 1);
        assert_eq!(
            partition(kb, Some(7)),
            Err(PartitionError::TauTooLarge { tau: 7, concepts: 6 })
        );

        let decimal = Task::addition(10, 1).unwrap();
        let c = partition(decimal.kb(), Some(2)).unwrap();
        assert_eq!(c.len(), 5);
        c.check(decimal.kb(), Some(2)).unwrap();
        let hex = Task::addition(16, 1).unwrap();
        assert_eq!(partition(hex.kb(), Some(2)).unwrap().len(), 8);
    }

    #[test]
    fn summary_and_dot() {
        let task = Task::chess(8, 2).unwrap();
        let kb = task.kb();
        let c = partition(kb, Some(2)).unwrap();
        let summary = c.summary(kb);
        assert_eq!(summary.lines().next(), Some("phase 1: +{knight, rook} rules=6 |Z_1|=2"));
        let dot = c.to_dot(kb, &DependencyGraph::new(kb));
        assert!(dot.contains("subgraph cluster_phase3"));
        assert!(dot.contains("r16 -> r6;"));
    }

    #[test]
    fn no_concepts_is_an_error() {
        let kb = parse_program("@target p/0.\np.\n").unwrap();
        assert_eq!(partition(&kb, None), Err(PartitionError::NoConcepts));
    }
}
