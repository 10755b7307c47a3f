//! Grouped causal graphs, the three synthetic graph generators and runnable
//! checkers for the graph-side identifiability conditions.
//!
//! Adjacency entry `(i, j)` holds the strength of the edge `i → j`; zero means
//! no edge. Variables are ordered group by group.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use thiserror::Error;

use crate::grn;
use crate::linalg;
use crate::matrix::{GroupLayout, Matrix};
use crate::rng::{self, Rng};

/// Redraw budget for constrained generators.
pub const MAX_REGENERATIONS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("adjacency must be {expected}×{expected}")]
    Shape { expected: usize },
    #[error("self-loop on variable {0}")]
    SelfLoop(usize),
    #[error("non-finite edge weight at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("confounder mask has length {found}, expected {expected}")]
    MaskLength { expected: usize, found: usize },
    #[error("invalid generator argument: {0}")]
    InvalidArgument(&'static str),
    #[error("constraints unsatisfied after {0} regeneration attempts")]
    Unsatisfiable(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    DagSim1,
    CyclicConfounded,
    GrnDag,
    Custom,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::DagSim1 => "dag_sim1",
            Generator::CyclicConfounded => "cyclic_confounded",
            Generator::GrnDag => "grn_dag",
            Generator::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::DagSim1, Self::CyclicConfounded, Self::GrnDag, Self::Custom].into_iter().find(|g| g.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphMeta {
    pub generator: Generator,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupedGraph {
    layout: GroupLayout,
    adjacency: Matrix,
    confounder_mask: Vec<bool>,
    pub meta: GraphMeta,
}

impl GroupedGraph {
    pub fn new(layout: GroupLayout, adjacency: Matrix, confounder_mask: Vec<bool>) -> Result<Self, GraphError> {
        let d = layout.total();
        if adjacency.rows() != d || adjacency.cols() != d {
            return Err(GraphError::Shape { expected: d });
        }
        if confounder_mask.len() != d {
            return Err(GraphError::MaskLength { expected: d, found: confounder_mask.len() });
        }
        for i in 0..d {
            for j in 0..d {
                let v = adjacency.get(i, j);
                if !v.is_finite() {
                    return Err(GraphError::NonFinite(i, j));
                }
                if i == j && v != 0.0 {
                    return Err(GraphError::SelfLoop(i));
                }
            }
        }
        Ok(Self { layout, adjacency, confounder_mask, meta: GraphMeta { generator: Generator::Custom, seed: 0 } })
    }

    /// Graph without confounders.
    pub fn fully_observed(layout: GroupLayout, adjacency: Matrix) -> Result<Self, GraphError> {
        let d = layout.total();
        Self::new(layout, adjacency, vec![false; d])
    }

    pub fn with_meta(mut self, generator: Generator, seed: u64) -> Self {
        self.meta = GraphMeta { generator, seed };
        self
    }

    pub fn layout(&self) -> &GroupLayout {
        &self.layout
    }

    pub fn num_vars(&self) -> usize {
        self.layout.total()
    }

    pub fn num_groups(&self) -> usize {
        self.layout.num_groups()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.adjacency.get(from, to)
    }

    pub fn confounder_mask(&self) -> &[bool] {
        &self.confounder_mask
    }

    pub fn group_of(&self, var: usize) -> usize {
        self.layout.group_of(var)
    }

    pub fn parents(&self, var: usize) -> Vec<usize> {
        (0..self.num_vars()).filter(|&i| self.adjacency.get(i, var) != 0.0).collect()
    }

    pub fn children(&self, var: usize) -> Vec<usize> {
        (0..self.num_vars()).filter(|&j| self.adjacency.get(var, j) != 0.0).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.as_slice().iter().filter(|&&v| v != 0.0).count()
    }

    /// Parentless variables, i.e. the master regulators of a gene network.
    pub fn roots(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&v| self.parents(v).is_empty()).collect()
    }

    /// Kahn ordering; `None` when the graph has a directed cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let d = self.num_vars();
        let mut indeg: Vec<usize> = (0..d).map(|v| self.parents(v).len()).collect();
        let mut ready: Vec<usize> = (0..d).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(d);
        while let Some(v) = ready.pop() {
            order.push(v);
            for c in self.children(v).into_iter().rev() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(c);
                }
            }
        }
        (order.len() == d).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    pub fn observable_indices(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&v| !self.confounder_mask[v]).collect()
    }

    /// Restriction to the unmasked variables, groups preserved.
    pub fn observable_subgraph(&self) -> GroupedGraph {
        let keep = self.observable_indices();
        let dims = (0..self.num_groups()).map(|m| self.layout.range(m).filter(|&v| !self.confounder_mask[v]).count()).collect();
        let mut adj = Matrix::zeros(keep.len(), keep.len());
        for (i, &a) in keep.iter().enumerate() {
            for (j, &b) in keep.iter().enumerate() {
                adj.set(i, j, self.adjacency.get(a, b));
            }
        }
        GroupedGraph {
            layout: GroupLayout::new(dims),
            adjacency: adj,
            confounder_mask: vec![false; keep.len()],
            meta: self.meta,
        }
    }

    /// True when `a` and `b` lie in different groups.
    pub fn is_inter_group(&self, a: usize, b: usize) -> bool {
        self.group_of(a) != self.group_of(b)
    }
}

/// Assigns `per_source` distinct children in `targets` to every source, keeping
/// target in-degrees as equal as possible.
fn balanced_block(
    sources: &[usize],
    targets: &[usize],
    per_source: usize,
    rng: &mut Rng,
) -> Vec<Vec<usize>> {
    let k = per_source.min(targets.len());
    let mut children: Vec<Vec<usize>> = vec![Vec::with_capacity(k); sources.len()];
    for _ in 0..k {
        let layer = balanced_layer(sources.len(), targets, rng);
        place_layer(&mut children, layer, rng);
    }
    children
}

/// One child per source, each target used `floor` or `ceil` of `n / |targets|` times.
fn balanced_layer(n: usize, targets: &[usize], rng: &mut Rng) -> Vec<usize> {
    if targets.is_empty() {
        return Vec::new();
    }
    let mut order = targets.to_vec();
    order.shuffle(rng);
    let mut slots: Vec<usize> = (0..n).map(|i| order[i % order.len()]).collect();
    slots.shuffle(rng);
    slots
}

/// Appends `layer[s]` to `children[s]`, swapping entries between sources until
/// no source receives a duplicate child.
fn place_layer(children: &mut [Vec<usize>], mut layer: Vec<usize>, rng: &mut Rng) {
    if layer.is_empty() {
        return;
    }
    let n = children.len();
    for s in 0..n {
        if !children[s].contains(&layer[s]) {
            continue;
        }
        let mut start = rng.random_range(0..n);
        for _ in 0..n {
            let t = start;
            start = (start + 1) % n;
            if t == s || layer[t] == layer[s] {
                continue;
            }
            if !children[s].contains(&layer[t]) && !children[t].contains(&layer[s]) {
                layer.swap(s, t);
                break;
            }
        }
    }
    for (s, c) in layer.into_iter().enumerate() {
        // a remaining duplicate (tiny target sets) is dropped; "almost" two children
        if !children[s].contains(&c) {
            children[s].push(c);
        }
    }
}

fn check_groups(groups: usize, dim: usize) -> Result<(), GraphError> {
    if groups < 2 {
        return Err(GraphError::InvalidArgument("at least two groups are required"));
    }
    if dim < 2 {
        return Err(GraphError::InvalidArgument("at least two variables per group are required"));
    }
    Ok(())
}

/// Intra-group DAG: each non-first variable gets one earlier parent; in the
/// first group variables get two earlier parents where two exist.
fn intra_group_dag(edges: &mut Vec<(usize, usize)>, members: &[Vec<usize>], rng: &mut Rng) {
    for (m, vars) in members.iter().enumerate() {
        for (pos, &v) in vars.iter().enumerate().skip(1) {
            let wanted = if m == 0 { 2.min(pos) } else { 1 };
            let mut earlier: Vec<usize> = vars[..pos].to_vec();
            earlier.shuffle(rng);
            edges.extend(earlier.into_iter().take(wanted).map(|p| (p, v)));
        }
    }
}

/// Simulation-1 style DAG over `groups × dim` variables in causal order.
///
/// Non-zero weights are drawn from `weight_range` and each column is divided
/// by the number of parents of that variable.
pub fn gen_dag_sim1(groups: usize, dim: usize, seed: u64, weight_range: [f64; 2]) -> Result<GroupedGraph, GraphError> {
    check_groups(groups, dim)?;
    check_range(weight_range)?;
    let layout = GroupLayout::uniform(groups, dim);
    let mut rng = rng::seeded(seed);
    let members: Vec<Vec<usize>> = (0..groups).map(|m| layout.range(m).collect()).collect();
    let mut edges = Vec::new();
    intra_group_dag(&mut edges, &members, &mut rng);
    for m in 0..groups {
        for mp in m + 1..groups {
            let kids = balanced_block(&members[m], &members[mp], 2, &mut rng);
            for (s, cs) in members[m].iter().zip(kids) {
                edges.extend(cs.into_iter().map(|c| (*s, c)));
            }
        }
    }
    let d = layout.total();
    let mut adj = Matrix::zeros(d, d);
    for (a, b) in edges {
        adj.set(a, b, rng.random_range(weight_range[0]..=weight_range[1]));
    }
    normalize_columns(&mut adj);
    Ok(GroupedGraph::fully_observed(layout, adj)?.with_meta(Generator::DagSim1, seed))
}

fn check_range(r: [f64; 2]) -> Result<(), GraphError> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(GraphError::InvalidArgument("weight range must be finite with lo <= hi"));
    }
    Ok(())
}

fn normalize_columns(adj: &mut Matrix) {
    let d = adj.rows();
    for j in 0..d {
        let count = (0..d).filter(|&i| adj.get(i, j) != 0.0).count();
        if count > 1 {
            for i in 0..d {
                let v = adj.get(i, j);
                adj.set(i, j, v / count as f64);
            }
        }
    }
}

/// Confounders alternate within each group: odd positions are masked.
fn alternating_mask(layout: &GroupLayout) -> Vec<bool> {
    (0..layout.num_groups()).flat_map(|m| layout.range(m).map(move |v| (v - layout.offset(m)) % 2 == 1)).collect()
}

/// Block `m → m'` where every observable source has an observable child and
/// every observable target an observable parent: the first child layer pairs
/// observables with observables and confounders with confounders, the second
/// is drawn over all targets.
fn masked_block(src: &[usize], tgt: &[usize], mask: &[bool], rng: &mut Rng) -> Vec<(usize, usize)> {
    let split = |vars: &[usize], hidden: bool| -> Vec<usize> { vars.iter().copied().filter(|&v| mask[v] == hidden).collect() };
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); src.len()];
    let mut first = vec![0usize; src.len()];
    for hidden in [false, true] {
        let s_idx: Vec<usize> = (0..src.len()).filter(|&i| mask[src[i]] == hidden).collect();
        let layer = balanced_layer(s_idx.len(), &split(tgt, hidden), rng);
        for (&i, c) in s_idx.iter().zip(layer) {
            first[i] = c;
        }
    }
    for (c, f) in children.iter_mut().zip(&first) {
        c.push(*f);
    }
    let second = balanced_layer(src.len(), tgt, rng);
    place_layer(&mut children, second, rng);
    src.iter().zip(children).flat_map(|(&s, cs)| cs.into_iter().map(move |c| (s, c))).collect()
}

/// Every observable variable has at least one observable child and one
/// observable parent in each listed direction's partner group.
fn observable_links_ok(g: &GroupedGraph, need_child: impl Fn(usize, usize) -> bool, need_parent: impl Fn(usize, usize) -> bool) -> bool {
    let obs = g.observable_indices();
    let m_count = g.num_groups();
    obs.iter().all(|&v| {
        let gv = g.group_of(v);
        (0..m_count).filter(|&m| m != gv).all(|m| {
            let in_m = |u: &usize| g.group_of(*u) == m && !g.confounder_mask[*u];
            let child_ok = !need_child(gv, m) || g.children(v).iter().any(in_m);
            let parent_ok = !need_parent(gv, m) || g.parents(v).iter().any(in_m);
            child_ok && parent_ok
        })
    })
}

/// Simulation-2 style graph: `2·dim_obs` variables per group with directed
/// cycles, alternate variables masked as latent confounders.
pub fn gen_cyclic_confounded(groups: usize, dim_obs: usize, seed: u64) -> Result<GroupedGraph, GraphError> {
    check_groups(groups, dim_obs)?;
    let layout = GroupLayout::uniform(groups, 2 * dim_obs);
    let mask = alternating_mask(&layout);
    let members: Vec<Vec<usize>> = (0..groups).map(|m| layout.range(m).collect()).collect();
    let mut rng = rng::seeded(seed);
    for _ in 0..MAX_REGENERATIONS {
        let mut edges = Vec::new();
        for vars in &members {
            for &v in vars {
                let others: Vec<usize> = vars.iter().copied().filter(|&u| u != v).collect();
                edges.push((others[rng.random_range(0..others.len())], v));
            }
        }
        for m in 0..groups {
            for mp in 0..groups {
                if m != mp {
                    edges.extend(masked_block(&members[m], &members[mp], &mask, &mut rng));
                }
            }
        }
        let d = layout.total();
        let mut adj = Matrix::zeros(d, d);
        for (a, b) in edges {
            adj.set(a, b, rng.random_range(0.9..=1.0));
        }
        let g = GroupedGraph::new(layout.clone(), adj, mask.clone())?.with_meta(Generator::CyclicConfounded, seed);
        if observable_links_ok(&g, |_, _| true, |_, _| true) && check_a1(&g, true).per_group.iter().all(|&ok| ok) {
            return Ok(g);
        }
    }
    Err(GraphError::Unsatisfiable(MAX_REGENERATIONS))
}

/// Gene-network DAG with latent confounders. Intra-group edges follow the
/// Simulation-1 recipe, inter-group edges (m < m') the confounder-aware recipe;
/// the last observable gene of every group but the last is a leaf fed by the
/// genes of the last group. Weights are `±magnitude`, half of each gene's
/// parents activating.
pub fn gen_grn_dag(groups: usize, dim_obs: usize, seed: u64) -> Result<GroupedGraph, GraphError> {
    gen_grn_dag_with(groups, dim_obs, seed, grn::DEFAULT_INTERACTION_MAGNITUDE)
}

pub fn gen_grn_dag_with(groups: usize, dim_obs: usize, seed: u64, magnitude: f64) -> Result<GroupedGraph, GraphError> {
    check_groups(groups, dim_obs)?;
    let layout = GroupLayout::uniform(groups, 2 * dim_obs);
    let mask = alternating_mask(&layout);
    let members: Vec<Vec<usize>> = (0..groups).map(|m| layout.range(m).collect()).collect();
    let leaves: Vec<usize> = members[..groups - 1]
        .iter()
        .map(|vars| *vars.iter().rev().find(|&&v| !mask[v]).expect("group has observables"))
        .collect();
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::new();
    intra_group_dag(&mut edges, &members, &mut rng);
    for m in 0..groups {
        for mp in m + 1..groups {
            edges.extend(masked_block(&members[m], &members[mp], &mask, &mut rng));
        }
    }
    edges.retain(|(a, _)| !leaves.contains(a));
    let mut feeders = members[groups - 1].clone();
    feeders.shuffle(&mut rng);
    for (i, f) in feeders.into_iter().enumerate() {
        edges.push((f, leaves[i % leaves.len()]));
    }
    let d = layout.total();
    let mut adj = Matrix::zeros(d, d);
    for (a, b) in edges {
        adj.set(a, b, 1.0);
    }
    let unsigned = GroupedGraph::new(layout.clone(), adj, mask.clone())?;
    let mut adj = Matrix::zeros(d, d);
    for e in grn::grn_edge_signs(&unsigned, rng::derive_seed(seed, 1)) {
        adj.set(e.from, e.to, if e.activating { magnitude } else { -magnitude });
    }
    let g = GroupedGraph::new(layout, adj, mask)?.with_meta(Generator::GrnDag, seed);
    debug_assert!(g.is_acyclic());
    Ok(g)
}

/// Stacked inter-group adjacency of one group: outgoing rows over incoming rows.
pub fn stacked_adjacency(g: &GroupedGraph, group: usize) -> Matrix {
    let own: Vec<usize> = g.layout().range(group).collect();
    let others: Vec<usize> = (0..g.num_vars()).filter(|&v| g.group_of(v) != group).collect();
    let mut out = Matrix::zeros(2 * own.len(), others.len());
    for (r, &a) in own.iter().enumerate() {
        for (c, &b) in others.iter().enumerate() {
            out.set(r, c, g.weight(a, b));
            out.set(own.len() + r, c, g.weight(b, a));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankDetail {
    pub rows_after_zero_removal: usize,
    pub numeric_rank: usize,
    pub every_variable_has_neighbor: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct A1Report {
    pub per_group: Vec<bool>,
    pub rank_details: Vec<RankDetail>,
}

/// Nondegeneracy check per group: every variable has a neighbor in another
/// group, and the stacked inter-group adjacency has full row rank once its
/// all-zero rows are removed.
pub fn check_a1(g: &GroupedGraph, restrict_to_observables: bool) -> A1Report {
    let sub;
    let g = if restrict_to_observables {
        sub = g.observable_subgraph();
        &sub
    } else {
        g
    };
    let mut per_group = Vec::new();
    let mut rank_details = Vec::new();
    for m in 0..g.num_groups() {
        let stacked = stacked_adjacency(g, m);
        let d = g.layout().dims()[m];
        let nonzero = |r: usize| stacked.row(r).iter().any(|&v| v != 0.0);
        let has_neighbor = (0..d).all(|i| nonzero(i) || nonzero(d + i));
        let keep: Vec<usize> = (0..stacked.rows()).filter(|&r| nonzero(r)).collect();
        let reduced = stacked.select_rows(&keep);
        let rank = linalg::numeric_rank(&reduced);
        per_group.push(has_neighbor && rank == keep.len());
        rank_details.push(RankDetail {
            rows_after_zero_removal: keep.len(),
            numeric_rank: rank,
            every_variable_has_neighbor: has_neighbor,
        });
    }
    A1Report { per_group, rank_details }
}

/// True when no inter-group pair carries edges in both directions.
pub fn inter_group_directed(g: &GroupedGraph) -> bool {
    let d = g.num_vars();
    (0..d).all(|a| (a + 1..d).all(|b| !g.is_inter_group(a, b) || g.weight(a, b) == 0.0 || g.weight(b, a) == 0.0))
}

/// Co-parent and co-child adjacency within one group, as symmetric boolean matrices.
fn co_relations(g: &GroupedGraph, group: usize) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
    let own: Vec<usize> = g.layout().range(group).collect();
    let others: Vec<usize> = (0..g.num_vars()).filter(|&v| g.group_of(v) != group).collect();
    let n = own.len();
    let mut co_parent = vec![vec![false; n]; n];
    let mut co_child = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (own[i], own[j]);
            let cp = others.iter().any(|&c| g.weight(a, c) != 0.0 && g.weight(b, c) != 0.0);
            let cc = others.iter().any(|&p| g.weight(p, a) != 0.0 && g.weight(p, b) != 0.0);
            co_parent[i][j] = cp;
            co_parent[j][i] = cp;
            co_child[i][j] = cc;
            co_child[j][i] = cc;
        }
    }
    (co_parent, co_child)
}

fn connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for u in 0..n {
            if adj[v][u] && !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn each_has(adj: &[Vec<bool>]) -> Vec<bool> {
    adj.iter().map(|row| row.iter().any(|&b| b)).collect()
}

/// Group-level part of the both-co-relations condition: every variable has a
/// co-parent and a co-child, and the group is connected under each relation.
pub fn check_c1_group(g: &GroupedGraph, group: usize) -> bool {
    let (cp, cc) = co_relations(g, group);
    let has_cp = each_has(&cp);
    let has_cc = each_has(&cc);
    has_cp.iter().zip(&has_cc).all(|(&p, &c)| p && c) && connected(&cp) && connected(&cc)
}

/// Group-level part of the either-co-relation condition: every variable has a
/// co-parent or a co-child, and the group is connected under their union.
pub fn check_c1_alt_group(g: &GroupedGraph, group: usize) -> bool {
    let (cp, cc) = co_relations(g, group);
    let union: Vec<Vec<bool>> =
        cp.iter().zip(&cc).map(|(p, c)| p.iter().zip(c).map(|(&x, &y)| x || y).collect()).collect();
    each_has(&union).into_iter().all(|b| b) && connected(&union)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairCheck {
    pub directed: bool,
    pub c1: bool,
    pub c1_alt: bool,
}

/// Pairwise graph conditions for groups `m` and `m'`. Both are false when the
/// inter-group relations are not all directed.
pub fn check_pair(g: &GroupedGraph, m: usize, mp: usize) -> PairCheck {
    let directed = inter_group_directed(g);
    if !directed {
        return PairCheck { directed, c1: false, c1_alt: false };
    }
    PairCheck {
        directed,
        c1: check_c1_group(g, m) && check_c1_group(g, mp),
        c1_alt: check_c1_alt_group(g, m) && check_c1_alt_group(g, mp),
    }
}

pub fn check_c1(g: &GroupedGraph, m: usize, mp: usize) -> bool {
    check_pair(g, m, mp).c1
}

pub fn check_c1_alt(g: &GroupedGraph, m: usize, mp: usize) -> bool {
    check_pair(g, m, mp).c1_alt
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckerReport {
    pub per_group_a1: Vec<bool>,
    pub directed: bool,
    pub per_pair_c1: BTreeMap<(usize, usize), bool>,
    pub per_pair_c1_alt: BTreeMap<(usize, usize), bool>,
    pub rank_details: Vec<RankDetail>,
}

/// Runs every checker. Pairs are keyed `(m, m')` with `m < m'`.
pub fn check_all(g: &GroupedGraph, restrict_to_observables: bool) -> CheckerReport {
    let a1 = check_a1(g, restrict_to_observables);
    let sub;
    let view = if restrict_to_observables {
        sub = g.observable_subgraph();
        &sub
    } else {
        g
    };
    let mut per_pair_c1 = BTreeMap::new();
    let mut per_pair_c1_alt = BTreeMap::new();
    for m in 0..view.num_groups() {
        for mp in m + 1..view.num_groups() {
            let pc = check_pair(view, m, mp);
            per_pair_c1.insert((m, mp), pc.c1);
            per_pair_c1_alt.insert((m, mp), pc.c1_alt);
        }
    }
    CheckerReport {
        per_group_a1: a1.per_group,
        directed: inter_group_directed(view),
        per_pair_c1,
        per_pair_c1_alt,
        rank_details: a1.rank_details,
    }
}

/// Hand-built graphs illustrating the co-parent / co-child conditions.
///
/// Each fixture has three groups: a parent group `P`, the group of interest
/// `m = 1` with four variables `a, b, c, d`, and a child group `C`. The
/// conditions are meant to be read on group 1, see [`check_c1_group`].
pub mod fixtures {
    use super::*;

    pub const GROUP_OF_INTEREST: usize = 1;

    fn build(parents: &[&[usize]], children: &[&[usize]]) -> GroupedGraph {
        let p = parents.len().max(1);
        let c = children.len().max(1);
        let layout = GroupLayout::new(vec![p, 4, c]);
        let d = layout.total();
        let mut adj = Matrix::zeros(d, d);
        for (k, kids) in parents.iter().enumerate() {
            for &v in *kids {
                adj.set(k, p + v, 1.0);
            }
        }
        for (k, pars) in children.iter().enumerate() {
            for &v in *pars {
                adj.set(p + v, p + 4 + k, 1.0);
            }
        }
        GroupedGraph::fully_observed(layout, adj).expect("fixture is valid")
    }

    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;
    const D: usize = 3;

    /// `a, b` share a parent (co-children), `c, d` share a child (co-parents); nothing links the two pairs.
    pub fn no_co_relations() -> GroupedGraph {
        build(&[&[A, B]], &[&[C, D]])
    }

    /// Co-child chain `a–b–c–d` and co-parent links `a–d`, `d–b`, `b–c`.
    pub fn both_relations() -> GroupedGraph {
        build(&[&[A, B], &[B, C], &[C, D]], &[&[A, D], &[D, B], &[B, C]])
    }

    /// Edge removals from [`both_relations`] after which some variables keep
    /// only one kind of co-relation.
    pub fn single_relation() -> [GroupedGraph; 3] {
        [
            build(&[&[A, B]], &[&[D, B], &[B, C]]),
            build(&[&[A, B], &[B, C], &[C, D]], &[]),
            build(&[], &[&[A, D], &[D, B], &[B, C]]),
        ]
    }

    /// Four groups chained `0 → 1 → 2 → 3`, each step fully connected with
    /// distinct weights. The inner groups 1 and 2 receive and send edges, so
    /// every other member of their group is both a co-parent and a co-child.
    pub fn fully_connected(dim: usize) -> GroupedGraph {
        let layout = GroupLayout::uniform(4, dim);
        let mut adj = Matrix::zeros(4 * dim, 4 * dim);
        for k in 0..3 {
            for a in 0..dim {
                for b in 0..dim {
                    let w = 1.0 + (k * dim * dim + a * dim + b) as f64 / (3 * dim * dim) as f64;
                    adj.set(k * dim + a, (k + 1) * dim + b, w);
                }
            }
        }
        GroupedGraph::fully_observed(layout, adj).expect("fixture is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim1_has_no_lower_triangular_mass() {
        for seed in 0..20 {
            let g = gen_dag_sim1(3, 6, seed, [0.9, 1.0]).unwrap();
            let a = g.adjacency();
            for i in 0..g.num_vars() {
                for j in 0..=i {
                    assert_eq!(a.get(i, j), 0.0);
                }
            }
            assert!(g.is_acyclic());
        }
    }

    #[test]
    fn sim1_inter_group_sources_have_two_children() {
        let g = gen_dag_sim1(3, 10, 4, [0.9, 1.0]).unwrap();
        for m in 0..2 {
            for mp in m + 1..3 {
                for a in g.layout().range(m) {
                    let n = g.layout().range(mp).filter(|&b| g.weight(a, b) != 0.0).count();
                    assert_eq!(n, 2);
                }
            }
        }
    }

    #[test]
    fn sim1_first_group_parents_fixed_to_two() {
        let g = gen_dag_sim1(2, 6, 9, [0.9, 1.0]).unwrap();
        let counts: Vec<usize> = (0..6).map(|v| g.parents(v).len()).collect();
        assert_eq!(counts, vec![0, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn sim1_columns_are_divided_by_parent_count() {
        let g = gen_dag_sim1(3, 5, 2, [0.9, 1.0]).unwrap();
        for v in 0..g.num_vars() {
            let ps = g.parents(v);
            for p in &ps {
                let w = g.weight(*p, v) * ps.len() as f64;
                assert!((0.9..=1.0).contains(&w), "weight {w}");
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(gen_dag_sim1(3, 5, 1, [0.9, 1.0]).unwrap(), gen_dag_sim1(3, 5, 1, [0.9, 1.0]).unwrap());
        assert_eq!(gen_cyclic_confounded(3, 4, 1).unwrap(), gen_cyclic_confounded(3, 4, 1).unwrap());
        assert_eq!(gen_grn_dag(3, 4, 1).unwrap(), gen_grn_dag(3, 4, 1).unwrap());
    }

    #[test]
    fn bad_arguments_are_rejected() {
        assert!(gen_dag_sim1(1, 5, 0, [0.9, 1.0]).is_err());
        assert!(gen_dag_sim1(3, 1, 0, [0.9, 1.0]).is_err());
        assert!(gen_dag_sim1(3, 4, 0, [1.0, 0.9]).is_err());
        assert!(gen_cyclic_confounded(3, 1, 0).is_err());
    }

    #[test]
    fn identity_block_passes_a1() {
        let d = 3;
        let layout = GroupLayout::uniform(2, d);
        let mut adj = Matrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            adj.set(i, d + i, 1.0);
        }
        let g = GroupedGraph::fully_observed(layout, adj).unwrap();
        let r = check_a1(&g, false);
        assert!(r.per_group[0]);
        assert_eq!(r.rank_details[0], RankDetail { rows_after_zero_removal: 3, numeric_rank: 3, every_variable_has_neighbor: true });
    }

    #[test]
    fn proportional_rows_fail_a1() {
        let layout = GroupLayout::new(vec![2, 2]);
        let mut adj = Matrix::zeros(4, 4);
        adj.set(0, 2, 1.0);
        adj.set(1, 2, 1.0);
        let g = GroupedGraph::fully_observed(layout, adj).unwrap();
        let r = check_a1(&g, false);
        assert!(!r.per_group[0]);
        assert_eq!(r.rank_details[0].numeric_rank, 1);
    }

    #[test]
    fn empty_graph_fails_a1() {
        let g = GroupedGraph::fully_observed(GroupLayout::uniform(2, 3), Matrix::zeros(6, 6)).unwrap();
        assert_eq!(check_a1(&g, false).per_group, vec![false, false]);
    }

    #[test]
    fn undirected_pair_fails_both_checks() {
        let mut g = fixtures::fully_connected(3);
        let mut adj = g.adjacency().clone();
        adj.set(3, 0, 0.5);
        g = GroupedGraph::fully_observed(g.layout().clone(), adj).unwrap();
        assert_eq!(check_pair(&g, 0, 1), PairCheck { directed: false, c1: false, c1_alt: false });
    }

    #[test]
    fn fully_connected_satisfies_c1() {
        let g = fixtures::fully_connected(4);
        assert!(check_c1(&g, 1, 2));
        assert!(check_c1_alt(&g, 1, 2));
        // the end groups only send or only receive
        assert!(!check_c1(&g, 0, 1));
    }

    #[test]
    fn masking_keeps_observable_links() {
        for seed in 0..10 {
            let g = gen_cyclic_confounded(3, 5, seed).unwrap();
            assert!(observable_links_ok(&g, |_, _| true, |_, _| true));
            assert_eq!(g.observable_indices().len(), 15);
        }
    }

    #[test]
    fn grn_leaves_have_no_children() {
        let g = gen_grn_dag(3, 10, 3).unwrap();
        assert!(g.is_acyclic());
        for m in 0..2 {
            let leaf = g.layout().range(m).rev().find(|&v| !g.confounder_mask()[v]).unwrap();
            assert!(g.children(leaf).is_empty());
            assert!(g.parents(leaf).iter().any(|&p| g.group_of(p) == 2));
        }
    }
}
