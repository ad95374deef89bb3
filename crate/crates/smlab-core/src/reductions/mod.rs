//! Clique-to-matching reduction toolkit: the instance generator, its witness
//! matching, structural verifiers for perfect matchings, a perfect-matching
//! sampler, ring-amplifier audits, and a clique brute-forcer for the source
//! graphs.
//!
//! The generated instance encodes a graph G and clique size h as a strict
//! marriage profile. Selector agents pick h vertices and C(h,2) edges;
//! per-edge rings of L four-cycles punish any perfect matching that selects
//! an edge without both endpoints, so perfect matchings with few blocking
//! pairs correspond exactly to cliques.

mod gadget;
mod local_search;

pub use gadget::{
    extend_witness, generate_sri_padding, verify_gadget, GadgetCounterexample, GadgetError,
    GadgetRef, GadgetSpec, GadgetVerdict, VerifiedGadget,
};
pub use local_search::{minimize_blocking_local_search, LocalSearchResult};

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classic::gale_shapley;
use crate::graph::Graph;
use crate::model::{
    is_pair_blocking, AgentId, Kind, Matching, PreferenceProfile, Side,
};

/// Memory guard for the generator.
pub const MAX_GENERATED_AGENTS: u128 = 2_000_000;
/// Vertex cap for the exhaustive clique search.
pub const CLIQUE_BRUTEFORCE_CAP: usize = 25;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ReductionError {
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),
    #[error("vertex set is not a size-h clique")]
    NotAClique,
    #[error("matching is not perfect")]
    NotPerfect,
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
    #[error("gadget not verified: {0}")]
    GadgetNotVerified(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("parameter overflow evaluating the gap function")]
    Overflow,
}

/// Gap function F over the non-negative integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GapFunction {
    Const(u64),
    /// F(x) = x^c.
    Pow(u32),
    /// F(x) = sum coeffs[i] * x^i.
    Poly(Vec<u64>),
}

impl GapFunction {
    pub fn eval(&self, x: u64) -> Option<u64> {
        match self {
            GapFunction::Const(c) => Some(*c),
            GapFunction::Pow(c) => x.checked_pow(*c),
            GapFunction::Poly(coeffs) => {
                let mut acc: u64 = 0;
                let mut power: u64 = 1;
                for (i, &c) in coeffs.iter().enumerate() {
                    acc = acc.checked_add(c.checked_mul(power)?)?;
                    if i + 1 < coeffs.len() {
                        power = power.checked_mul(x)?;
                    }
                }
                Some(acc)
            }
        }
    }

    /// Parses `const:C`, `pow:C` or `poly:c0,c1,...`.
    pub fn parse(text: &str) -> Result<GapFunction, ReductionError> {
        let bad = || ReductionError::DegenerateParameters(format!("bad gap function {text:?}"));
        let (form, arg) = text.split_once(':').ok_or_else(bad)?;
        match form {
            "const" => Ok(GapFunction::Const(arg.parse().map_err(|_| bad())?)),
            "pow" => Ok(GapFunction::Pow(arg.parse().map_err(|_| bad())?)),
            "poly" => {
                let coeffs = arg
                    .split(',')
                    .map(|c| c.trim().parse::<u64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(GapFunction::Poly(coeffs))
            }
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for GapFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GapFunction::Const(c) => write!(f, "const:{c}"),
            GapFunction::Pow(c) => write!(f, "pow:{c}"),
            GapFunction::Poly(cs) => {
                let list: Vec<String> = cs.iter().map(u64::to_string).collect();
                write!(f, "poly:{}", list.join(","))
            }
        }
    }
}

/// Numeric parameters of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionParameters {
    pub h: usize,
    pub n_hat: usize,
    pub m_hat: usize,
    /// Blocking-pair target beta = h + C(h,2).
    pub beta: usize,
    /// Ring copies per edge endpoint: L = beta * F(beta) + 1.
    pub big_l: usize,
    /// Required matching size k = |U| (half the agents).
    pub k: usize,
    pub total_agents: usize,
}

/// Construction role of one generated agent. `endpoint` is a graph vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    VertexSelectorU(usize),
    VertexSelectorW(usize),
    EdgeSelectorU(usize),
    EdgeSelectorW(usize),
    VertexU(usize),
    VertexUHat(usize),
    VertexW(usize),
    VertexWHat(usize),
    EdgeX(usize),
    EdgeY(usize),
    RingPi { edge: usize, endpoint: usize, copy: usize },
    RingPiHat { edge: usize, endpoint: usize, copy: usize },
    RingTheta { edge: usize, endpoint: usize, copy: usize },
    RingThetaHat { edge: usize, endpoint: usize, copy: usize },
    /// Padding agent of the roommates variant.
    Padding { host: usize, index: usize },
}

impl Role {
    pub fn label(&self) -> String {
        match *self {
            Role::VertexSelectorU(z) => format!("s_{z}"),
            Role::VertexSelectorW(z) => format!("t_{z}"),
            Role::EdgeSelectorU(p) => format!("shat_{p}"),
            Role::EdgeSelectorW(p) => format!("that_{p}"),
            Role::VertexU(i) => format!("u_{i}"),
            Role::VertexUHat(i) => format!("uhat_{i}"),
            Role::VertexW(i) => format!("w_{i}"),
            Role::VertexWHat(i) => format!("what_{i}"),
            Role::EdgeX(e) => format!("x_{e}"),
            Role::EdgeY(e) => format!("y_{e}"),
            Role::RingPi { edge, endpoint, copy } => format!("pi[u_{endpoint}][e_{edge}][{copy}]"),
            Role::RingPiHat { edge, endpoint, copy } => {
                format!("pihat[u_{endpoint}][e_{edge}][{copy}]")
            }
            Role::RingTheta { edge, endpoint, copy } => {
                format!("theta[u_{endpoint}][e_{edge}][{copy}]")
            }
            Role::RingThetaHat { edge, endpoint, copy } => {
                format!("thetahat[u_{endpoint}][e_{edge}][{copy}]")
            }
            Role::Padding { host, index } => format!("pad[{host}][{index}]"),
        }
    }
}

/// Bijection between generated agents and construction roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleMap {
    roles: Vec<Role>,
    index: HashMap<Role, usize>,
}

impl RoleMap {
    fn new(roles: Vec<Role>) -> RoleMap {
        let index = roles.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        RoleMap { roles, index }
    }

    pub fn role(&self, a: AgentId) -> Role {
        self.roles[a.idx()]
    }

    pub fn agent(&self, role: Role) -> Option<AgentId> {
        self.index.get(&role).copied().map(AgentId)
    }

    pub fn require(&self, role: Role) -> AgentId {
        self.agent(role)
            .unwrap_or_else(|| panic!("role {role:?} missing from role map"))
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentId, Role)> + '_ {
        self.roles.iter().enumerate().map(|(i, r)| (AgentId(i), *r))
    }
}

/// A generated instance with its role map, parameters and source graph.
#[derive(Debug, Clone)]
pub struct ReductionOutput {
    pub profile: PreferenceProfile,
    pub roles: RoleMap,
    pub params: ReductionParameters,
    pub graph: Graph,
}

fn binom2(h: usize) -> usize {
    h * h.saturating_sub(1) / 2
}

/// Generates the reduced marriage instance for (graph, h, F).
pub fn generate_clique_to_smi(
    graph: &Graph,
    h: usize,
    gap: &GapFunction,
) -> Result<ReductionOutput, ReductionError> {
    let n_hat = graph.n();
    let m_hat = graph.m();
    if h == 0 || h > n_hat {
        return Err(ReductionError::DegenerateParameters(format!(
            "need 1 <= h <= {n_hat}, got h = {h}"
        )));
    }
    let c = binom2(h);
    if c > m_hat {
        return Err(ReductionError::DegenerateParameters(format!(
            "C(h,2) = {c} exceeds edge count {m_hat}"
        )));
    }
    let beta = h + c;
    let f_beta = gap.eval(beta as u64).ok_or(ReductionError::Overflow)?;
    let big_l_128 = (beta as u128)
        .checked_mul(f_beta as u128)
        .and_then(|x| x.checked_add(1))
        .ok_or(ReductionError::Overflow)?;
    let total_128 = 2 * (h as u128 + c as u128 + 2 * n_hat as u128 + m_hat as u128
        + 4 * m_hat as u128 * big_l_128);
    if total_128 > MAX_GENERATED_AGENTS {
        return Err(ReductionError::TooLarge(format!(
            "{total_128} agents exceed the {MAX_GENERATED_AGENTS} generator cap"
        )));
    }
    let big_l = big_l_128 as usize;
    let total = total_128 as usize;

    // Agent layout in creation order; this order is also the fixed linear
    // order used whenever the construction needs one.
    let ix = Layout {
        h,
        c,
        n_hat,
        m_hat,
        big_l,
    };

    let mut roles = vec![Role::VertexSelectorU(0); total];
    for z in 0..h {
        roles[ix.s(z)] = Role::VertexSelectorU(z);
        roles[ix.t(z)] = Role::VertexSelectorW(z);
    }
    for p in 0..c {
        roles[ix.shat(p)] = Role::EdgeSelectorU(p);
        roles[ix.that(p)] = Role::EdgeSelectorW(p);
    }
    for i in 0..n_hat {
        roles[ix.u(i)] = Role::VertexU(i);
        roles[ix.uhat(i)] = Role::VertexUHat(i);
        roles[ix.w(i)] = Role::VertexW(i);
        roles[ix.what(i)] = Role::VertexWHat(i);
    }
    for (e, &(a, b)) in graph.edges().iter().enumerate() {
        roles[ix.x(e)] = Role::EdgeX(e);
        roles[ix.y(e)] = Role::EdgeY(e);
        for (slot, v) in [(0, a), (1, b)] {
            for r in 0..big_l {
                roles[ix.pi(e, slot, r)] = Role::RingPi { edge: e, endpoint: v, copy: r };
                roles[ix.pihat(e, slot, r)] = Role::RingPiHat { edge: e, endpoint: v, copy: r };
                roles[ix.theta(e, slot, r)] = Role::RingTheta { edge: e, endpoint: v, copy: r };
                roles[ix.thetahat(e, slot, r)] =
                    Role::RingThetaHat { edge: e, endpoint: v, copy: r };
            }
        }
    }
    let roles = RoleMap::new(roles);

    let names: Vec<String> = roles.roles.iter().map(Role::label).collect();
    let u_side = |role: &Role| {
        matches!(
            role,
            Role::VertexSelectorU(_)
                | Role::EdgeSelectorU(_)
                | Role::VertexU(_)
                | Role::VertexUHat(_)
                | Role::EdgeX(_)
                | Role::RingPi { .. }
                | Role::RingPiHat { .. }
        )
    };
    let sides: Vec<Side> = roles
        .roles
        .iter()
        .map(|r| if u_side(r) { Side::A } else { Side::B })
        .collect();

    // Endpoint slot of vertex v on edge e.
    let slot_of = |e: usize, v: usize| -> usize {
        let (a, b) = graph.edges()[e];
        if v == a {
            0
        } else {
            debug_assert_eq!(v, b);
            1
        }
    };

    let mut lists: Vec<Vec<Vec<usize>>> = vec![Vec::new(); total];
    let strict = |entries: Vec<usize>| -> Vec<Vec<usize>> {
        entries.into_iter().map(|x| vec![x]).collect()
    };

    for z in 0..h {
        lists[ix.s(z)] = strict((0..n_hat).map(|i| ix.w(i)).collect());
        lists[ix.t(z)] = strict((0..n_hat).map(|i| ix.uhat(i)).collect());
    }
    for p in 0..c {
        lists[ix.shat(p)] = strict((0..m_hat).map(|e| ix.y(e)).collect());
        lists[ix.that(p)] = strict((0..m_hat).map(|e| ix.x(e)).collect());
    }
    for i in 0..n_hat {
        // u_i: what_i > Theta(v_i) > w_i.
        let mut u_list = vec![ix.what(i)];
        for e in graph.incident_edges(i) {
            let slot = slot_of(e, i);
            for r in 0..big_l {
                u_list.push(ix.theta(e, slot, r));
            }
        }
        u_list.push(ix.w(i));
        lists[ix.u(i)] = strict(u_list);

        // w_i: u_i > s_0 > ... > s_{h-1}.
        let mut w_list = vec![ix.u(i)];
        w_list.extend((0..h).map(|z| ix.s(z)));
        lists[ix.w(i)] = strict(w_list);

        // uhat_i: what_i > t_0 > ... > t_{h-1}.
        let mut uh_list = vec![ix.what(i)];
        uh_list.extend((0..h).map(|z| ix.t(z)));
        lists[ix.uhat(i)] = strict(uh_list);

        // what_i: uhat_i > u_i.
        lists[ix.what(i)] = strict(vec![ix.uhat(i), ix.u(i)]);
    }
    for e in 0..m_hat {
        // x_e: y_e > that_0 > ... > that_{c-1}.
        let mut x_list = vec![ix.y(e)];
        x_list.extend((0..c).map(|p| ix.that(p)));
        lists[ix.x(e)] = strict(x_list);

        // y_e: x_e > Pi(e) > shat_0 > ... > shat_{c-1}.
        let mut y_list = vec![ix.x(e)];
        for slot in 0..2 {
            for r in 0..big_l {
                y_list.push(ix.pi(e, slot, r));
            }
        }
        y_list.extend((0..c).map(|p| ix.shat(p)));
        lists[ix.y(e)] = strict(y_list);

        let (a, b) = graph.edges()[e];
        for (slot, v) in [(0, a), (1, b)] {
            for r in 0..big_l {
                lists[ix.pi(e, slot, r)] =
                    strict(vec![ix.theta(e, slot, r), ix.y(e), ix.thetahat(e, slot, r)]);
                lists[ix.theta(e, slot, r)] =
                    strict(vec![ix.pihat(e, slot, r), ix.u(v), ix.pi(e, slot, r)]);
                lists[ix.pihat(e, slot, r)] =
                    strict(vec![ix.thetahat(e, slot, r), ix.theta(e, slot, r)]);
                lists[ix.thetahat(e, slot, r)] =
                    strict(vec![ix.pi(e, slot, r), ix.pihat(e, slot, r)]);
            }
        }
    }

    let profile = PreferenceProfile::new(Kind::Marriage, names, Some(sides), lists)
        .expect("construction is mutual and bipartite");

    Ok(ReductionOutput {
        profile,
        roles,
        params: ReductionParameters {
            h,
            n_hat,
            m_hat,
            beta,
            big_l,
            k: total / 2,
            total_agents: total,
        },
        graph: graph.clone(),
    })
}

/// Agent index layout of one generated instance.
#[derive(Debug, Clone, Copy)]
struct Layout {
    h: usize,
    c: usize,
    n_hat: usize,
    m_hat: usize,
    big_l: usize,
}

impl Layout {
    fn s(&self, z: usize) -> usize {
        z
    }
    fn t(&self, z: usize) -> usize {
        self.h + z
    }
    fn shat(&self, p: usize) -> usize {
        2 * self.h + p
    }
    fn that(&self, p: usize) -> usize {
        2 * self.h + self.c + p
    }
    fn vert_base(&self) -> usize {
        2 * self.h + 2 * self.c
    }
    fn u(&self, i: usize) -> usize {
        self.vert_base() + 4 * i
    }
    fn uhat(&self, i: usize) -> usize {
        self.vert_base() + 4 * i + 1
    }
    fn w(&self, i: usize) -> usize {
        self.vert_base() + 4 * i + 2
    }
    fn what(&self, i: usize) -> usize {
        self.vert_base() + 4 * i + 3
    }
    fn edge_base(&self) -> usize {
        self.vert_base() + 4 * self.n_hat
    }
    fn x(&self, e: usize) -> usize {
        self.edge_base() + 2 * e
    }
    fn y(&self, e: usize) -> usize {
        self.edge_base() + 2 * e + 1
    }
    fn ring_base(&self) -> usize {
        self.edge_base() + 2 * self.m_hat
    }
    fn ring(&self, e: usize) -> usize {
        self.ring_base() + 8 * self.big_l * e
    }
    fn pi(&self, e: usize, slot: usize, r: usize) -> usize {
        self.ring(e) + slot * self.big_l + r
    }
    fn pihat(&self, e: usize, slot: usize, r: usize) -> usize {
        self.ring(e) + (2 + slot) * self.big_l + r
    }
    fn theta(&self, e: usize, slot: usize, r: usize) -> usize {
        self.ring(e) + (4 + slot) * self.big_l + r
    }
    fn thetahat(&self, e: usize, slot: usize, r: usize) -> usize {
        self.ring(e) + (6 + slot) * self.big_l + r
    }
}

fn layout_of(output: &ReductionOutput) -> Layout {
    Layout {
        h: output.params.h,
        c: binom2(output.params.h),
        n_hat: output.params.n_hat,
        m_hat: output.params.m_hat,
        big_l: output.params.big_l,
    }
}

fn check_clique(graph: &Graph, h: usize, clique: &[usize]) -> Result<Vec<usize>, ReductionError> {
    let mut sorted = clique.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != h || sorted.len() != clique.len() {
        return Err(ReductionError::NotAClique);
    }
    if sorted.iter().any(|&v| v >= graph.n()) {
        return Err(ReductionError::NotAClique);
    }
    for (ai, &a) in sorted.iter().enumerate() {
        for &b in &sorted[ai + 1..] {
            if !graph.has_edge(a, b) {
                return Err(ReductionError::NotAClique);
            }
        }
    }
    Ok(sorted)
}

/// Stable pairing of a complete selector block via deferred acceptance on the
/// restricted sub-instance.
fn selector_block_pairs(
    profile: &PreferenceProfile,
    block: &[usize],
) -> Vec<(AgentId, AgentId)> {
    let agents: Vec<AgentId> = block.iter().map(|&i| AgentId(i)).collect();
    let (sub, back) = profile.restrict_to(&agents);
    let m = gale_shapley(&sub, Side::A).expect("selector blocks are strict marriage instances");
    m.pairs()
        .into_iter()
        .map(|(a, b)| (back[a.idx()], back[b.idx()]))
        .collect()
}

/// The witness matching of a clique: perfect, with exactly beta blocking
/// pairs (the uhat/what pair of each clique vertex and the x/y pair of each
/// clique edge).
pub fn build_witness_matching(
    output: &ReductionOutput,
    clique: &[usize],
) -> Result<Matching, ReductionError> {
    let ix = layout_of(output);
    let graph = &output.graph;
    let clique = check_clique(graph, output.params.h, clique)?;
    let in_clique = |v: usize| clique.binary_search(&v).is_ok();
    let clique_edges: Vec<usize> = (0..graph.m())
        .filter(|&e| {
            let (a, b) = graph.edges()[e];
            in_clique(a) && in_clique(b)
        })
        .collect();
    debug_assert_eq!(clique_edges.len(), ix.c);
    let is_clique_edge = |e: usize| clique_edges.binary_search(&e).is_ok();

    let mut pairs: Vec<(AgentId, AgentId)> = Vec::new();

    // Selector blocks, each a complete strict sub-instance.
    let mut block = Vec::new();
    block.extend(clique.iter().map(|&i| ix.uhat(i)));
    block.extend((0..ix.h).map(|z| ix.t(z)));
    pairs.extend(selector_block_pairs(&output.profile, &block));

    block.clear();
    block.extend((0..ix.h).map(|z| ix.s(z)));
    block.extend(clique.iter().map(|&i| ix.w(i)));
    pairs.extend(selector_block_pairs(&output.profile, &block));

    block.clear();
    block.extend(clique_edges.iter().map(|&e| ix.x(e)));
    block.extend((0..ix.c).map(|p| ix.that(p)));
    pairs.extend(selector_block_pairs(&output.profile, &block));

    block.clear();
    block.extend((0..ix.c).map(|p| ix.shat(p)));
    block.extend(clique_edges.iter().map(|&e| ix.y(e)));
    pairs.extend(selector_block_pairs(&output.profile, &block));

    // Vertex agents.
    for i in 0..ix.n_hat {
        if in_clique(i) {
            pairs.push((AgentId(ix.u(i)), AgentId(ix.what(i))));
        } else {
            pairs.push((AgentId(ix.uhat(i)), AgentId(ix.what(i))));
            pairs.push((AgentId(ix.u(i)), AgentId(ix.w(i))));
        }
    }

    // Edge agents and rings.
    for e in 0..ix.m_hat {
        if is_clique_edge(e) {
            for slot in 0..2 {
                for r in 0..ix.big_l {
                    pairs.push((AgentId(ix.pi(e, slot, r)), AgentId(ix.theta(e, slot, r))));
                    pairs.push((AgentId(ix.pihat(e, slot, r)), AgentId(ix.thetahat(e, slot, r))));
                }
            }
        } else {
            pairs.push((AgentId(ix.x(e)), AgentId(ix.y(e))));
            for slot in 0..2 {
                for r in 0..ix.big_l {
                    pairs.push((AgentId(ix.pi(e, slot, r)), AgentId(ix.thetahat(e, slot, r))));
                    pairs.push((AgentId(ix.pihat(e, slot, r)), AgentId(ix.theta(e, slot, r))));
                }
            }
        }
    }

    let m = Matching::new(&output.profile, &pairs).expect("witness pairs are acceptability edges");
    debug_assert!(m.is_perfect());
    Ok(m)
}

/// Result of the perfect-matching structure check: edge agents must pair with
/// their own partner or an edge selector, and the selected edges should stay
/// inside the selected vertex set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureReport {
    /// Every y_e is matched to x_e or an edge selector.
    pub y_assignment_ok: bool,
    pub violations: Vec<(usize, AgentId)>,
    /// K: vertices whose uhat went to a vertex selector.
    pub selected_vertices: Vec<usize>,
    /// E': edges whose y went to an edge selector.
    pub selected_edges: Vec<usize>,
    /// E' is contained in K x K.
    pub clique_consistent: bool,
}

impl StructureReport {
    pub fn passes(&self) -> bool {
        self.y_assignment_ok
    }
}

pub fn check_perfect_structure(
    output: &ReductionOutput,
    m: &Matching,
) -> Result<StructureReport, ReductionError> {
    if !m.is_perfect() {
        return Err(ReductionError::NotPerfect);
    }
    let ix = layout_of(output);
    let mut violations = Vec::new();
    let mut selected_edges = Vec::new();
    for e in 0..ix.m_hat {
        let partner = m.partner(AgentId(ix.y(e))).expect("matching is perfect");
        match output.roles.role(partner) {
            Role::EdgeX(xe) if xe == e => {}
            Role::EdgeSelectorU(_) => selected_edges.push(e),
            _ => violations.push((e, partner)),
        }
    }
    let mut selected_vertices = Vec::new();
    for i in 0..ix.n_hat {
        let partner = m.partner(AgentId(ix.uhat(i))).expect("matching is perfect");
        if matches!(output.roles.role(partner), Role::VertexSelectorW(_)) {
            selected_vertices.push(i);
        }
    }
    let in_k = |v: usize| selected_vertices.binary_search(&v).is_ok();
    let clique_consistent = selected_edges.iter().all(|&e| {
        let (a, b) = output.graph.edges()[e];
        in_k(a) && in_k(b)
    });
    Ok(StructureReport {
        y_assignment_ok: violations.is_empty(),
        violations,
        selected_vertices,
        selected_edges,
        clique_consistent,
    })
}

/// Per-ring blocking counts of one (vertex, edge) amplifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingAudit {
    pub per_ring: Vec<usize>,
    pub total: usize,
}

impl RingAudit {
    pub fn every_ring_blocks(&self) -> bool {
        self.per_ring.iter().all(|&c| c >= 1)
    }
}

/// Exhaustive per-ring audit for a perfect matching in which u_v kept its
/// fallback partner w_v while edge e at v was selected (y_e matched to an
/// edge selector). Checks all pairs inside each ring copy plus the two pairs
/// leaving it ({u_v, theta[r]} and {y_e, pi[r]}) and counts blocks.
pub fn ring_amplifier_audit(
    output: &ReductionOutput,
    m: &Matching,
    vertex: usize,
    edge: usize,
) -> Result<RingAudit, ReductionError> {
    if !m.is_perfect() {
        return Err(ReductionError::PreconditionUnmet("matching not perfect".into()));
    }
    let ix = layout_of(output);
    if edge >= ix.m_hat {
        return Err(ReductionError::PreconditionUnmet(format!(
            "edge index {edge} out of range"
        )));
    }
    let (a, b) = output.graph.edges()[edge];
    if vertex != a && vertex != b {
        return Err(ReductionError::PreconditionUnmet(format!(
            "vertex {vertex} not an endpoint of edge {edge}"
        )));
    }
    let u_v = AgentId(ix.u(vertex));
    let w_v = AgentId(ix.w(vertex));
    if m.partner(u_v) != Some(w_v) {
        return Err(ReductionError::PreconditionUnmet(
            "u_v is not matched to its fallback w_v".into(),
        ));
    }
    let y_e = AgentId(ix.y(edge));
    let y_partner = m.partner(y_e).expect("matching is perfect");
    if !matches!(output.roles.role(y_partner), Role::EdgeSelectorU(_)) {
        return Err(ReductionError::PreconditionUnmet(
            "y_e is not matched to an edge selector".into(),
        ));
    }

    let slot = if vertex == a { 0 } else { 1 };
    let profile = &output.profile;
    let mut per_ring = Vec::with_capacity(ix.big_l);
    for r in 0..ix.big_l {
        let pi = AgentId(ix.pi(edge, slot, r));
        let pihat = AgentId(ix.pihat(edge, slot, r));
        let theta = AgentId(ix.theta(edge, slot, r));
        let thetahat = AgentId(ix.thetahat(edge, slot, r));
        let candidates = [
            (pi, theta),
            (pi, thetahat),
            (pihat, theta),
            (pihat, thetahat),
            (u_v, theta),
            (y_e, pi),
        ];
        let blocks = candidates
            .iter()
            .filter(|&&(p, q)| is_pair_blocking(profile, m, p, q))
            .count();
        per_ring.push(blocks);
    }
    Ok(RingAudit {
        total: per_ring.iter().sum(),
        per_ring,
    })
}

/// A uniform-ish random perfect matching of a generated instance: random
/// selected vertex set K and edge set E'' (not necessarily a clique), random
/// pairings inside the four selector blocks, random ring configurations.
/// Every perfect matching of the instance has this shape.
pub fn sample_perfect_matching(output: &ReductionOutput, seed: u64) -> Matching {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ix = layout_of(output);

    let mut vertices: Vec<usize> = (0..ix.n_hat).collect();
    vertices.shuffle(&mut rng);
    let mut k_set: Vec<usize> = vertices[..ix.h].to_vec();
    k_set.sort_unstable();
    let mut edges: Vec<usize> = (0..ix.m_hat).collect();
    edges.shuffle(&mut rng);
    let mut e_set: Vec<usize> = edges[..ix.c].to_vec();
    e_set.sort_unstable();

    let mut pairs: Vec<(AgentId, AgentId)> = Vec::new();
    let mut assign = |left: Vec<usize>, right: Vec<usize>, rng: &mut ChaCha8Rng| {
        let mut shuffled = right;
        shuffled.shuffle(rng);
        for (l, r) in left.iter().zip(&shuffled) {
            pairs.push((AgentId(*l), AgentId(*r)));
        }
    };
    assign(
        k_set.iter().map(|&i| ix.uhat(i)).collect(),
        (0..ix.h).map(|z| ix.t(z)).collect(),
        &mut rng,
    );
    assign(
        k_set.iter().map(|&i| ix.w(i)).collect(),
        (0..ix.h).map(|z| ix.s(z)).collect(),
        &mut rng,
    );
    assign(
        e_set.iter().map(|&e| ix.y(e)).collect(),
        (0..ix.c).map(|p| ix.shat(p)).collect(),
        &mut rng,
    );
    assign(
        e_set.iter().map(|&e| ix.x(e)).collect(),
        (0..ix.c).map(|p| ix.that(p)).collect(),
        &mut rng,
    );

    let in_k = |v: usize| k_set.binary_search(&v).is_ok();
    let in_e = |e: usize| e_set.binary_search(&e).is_ok();
    for i in 0..ix.n_hat {
        if in_k(i) {
            pairs.push((AgentId(ix.u(i)), AgentId(ix.what(i))));
        } else {
            pairs.push((AgentId(ix.uhat(i)), AgentId(ix.what(i))));
            pairs.push((AgentId(ix.u(i)), AgentId(ix.w(i))));
        }
    }
    for e in 0..ix.m_hat {
        if !in_e(e) {
            pairs.push((AgentId(ix.x(e)), AgentId(ix.y(e))));
        }
        for slot in 0..2 {
            for r in 0..ix.big_l {
                if rng.gen_bool(0.5) {
                    pairs.push((AgentId(ix.pi(e, slot, r)), AgentId(ix.theta(e, slot, r))));
                    pairs.push((AgentId(ix.pihat(e, slot, r)), AgentId(ix.thetahat(e, slot, r))));
                } else {
                    pairs.push((AgentId(ix.pi(e, slot, r)), AgentId(ix.thetahat(e, slot, r))));
                    pairs.push((AgentId(ix.pihat(e, slot, r)), AgentId(ix.theta(e, slot, r))));
                }
            }
        }
    }

    let m = Matching::new(&output.profile, &pairs).expect("sampled pairs are edges");
    debug_assert!(m.is_perfect());
    m
}

/// Exhaustive clique search with candidate pruning; returns the
/// lexicographically smallest size-h clique, if any.
pub fn clique_bruteforce(graph: &Graph, h: usize) -> Result<Option<Vec<usize>>, ReductionError> {
    if graph.n() > CLIQUE_BRUTEFORCE_CAP {
        return Err(ReductionError::TooLarge(format!(
            "clique search capped at {CLIQUE_BRUTEFORCE_CAP} vertices, got {}",
            graph.n()
        )));
    }
    if h == 0 {
        return Ok(Some(Vec::new()));
    }
    fn extend(
        graph: &Graph,
        h: usize,
        current: &mut Vec<usize>,
        candidates: &[usize],
    ) -> Option<Vec<usize>> {
        if current.len() == h {
            return Some(current.clone());
        }
        if current.len() + candidates.len() < h {
            return None;
        }
        for (i, &v) in candidates.iter().enumerate() {
            current.push(v);
            let next: Vec<usize> = candidates[i + 1..]
                .iter()
                .copied()
                .filter(|&w| graph.has_edge(v, w))
                .collect();
            if let Some(found) = extend(graph, h, current, &next) {
                return Some(found);
            }
            current.pop();
        }
        None
    }
    let all: Vec<usize> = (0..graph.n()).collect();
    Ok(extend(graph, h, &mut Vec::new(), &all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{blocking_pairs, is_stable};

    fn k3_const1() -> ReductionOutput {
        generate_clique_to_smi(&Graph::complete(3), 3, &GapFunction::Const(1)).unwrap()
    }

    #[test]
    fn gap_function_forms() {
        assert_eq!(GapFunction::Const(1).eval(6), Some(1));
        assert_eq!(GapFunction::Pow(1).eval(6), Some(6));
        assert_eq!(GapFunction::Pow(2).eval(6), Some(36));
        assert_eq!(GapFunction::Poly(vec![1, 2]).eval(3), Some(7));
        assert_eq!(GapFunction::parse("const:4").unwrap(), GapFunction::Const(4));
        assert_eq!(GapFunction::parse("pow:2").unwrap(), GapFunction::Pow(2));
        assert_eq!(
            GapFunction::parse("poly:1,0,3").unwrap(),
            GapFunction::Poly(vec![1, 0, 3])
        );
        assert!(GapFunction::parse("exp:2").is_err());
    }

    #[test]
    fn k3_parameters() {
        let out = k3_const1();
        assert_eq!(out.params.beta, 6);
        assert_eq!(out.params.big_l, 7);
        assert_eq!(out.params.total_agents, 198);
        assert_eq!(out.params.k, 99);
        assert_eq!(out.profile.n(), 198);
    }

    #[test]
    fn k3_pow1_l() {
        let out = generate_clique_to_smi(&Graph::complete(3), 3, &GapFunction::Pow(1)).unwrap();
        assert_eq!(out.params.big_l, 37);
    }

    #[test]
    fn generated_profile_is_valid_bipartite() {
        let out = k3_const1();
        // Validation happened at construction; spot-check sides across edges.
        for &(a, b) in out.profile.edges() {
            assert_ne!(
                out.profile.side(AgentId(a)),
                out.profile.side(AgentId(b))
            );
        }
        // Half the agents on each side.
        let a_count = out
            .profile
            .agents()
            .filter(|&x| out.profile.side(x) == Some(Side::A))
            .count();
        assert_eq!(a_count, out.params.k);
    }

    #[test]
    fn degenerate_parameters_rejected() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        assert!(matches!(
            generate_clique_to_smi(&g, 3, &GapFunction::Const(1)),
            Err(ReductionError::DegenerateParameters(_))
        ));
        assert!(matches!(
            generate_clique_to_smi(&Graph::complete(2), 3, &GapFunction::Const(1)),
            Err(ReductionError::DegenerateParameters(_))
        ));
        assert!(matches!(
            generate_clique_to_smi(&Graph::complete(2), 0, &GapFunction::Const(1)),
            Err(ReductionError::DegenerateParameters(_))
        ));
    }

    #[test]
    fn witness_on_k3_has_beta_blocking_pairs() {
        let out = k3_const1();
        let witness = build_witness_matching(&out, &[0, 1, 2]).unwrap();
        assert!(witness.is_perfect());
        let blocks = blocking_pairs(&out.profile, &witness).unwrap();
        assert_eq!(blocks.len(), 6);
        // Exactly the uhat/what pairs of clique vertices and x/y pairs of
        // clique edges.
        for bp in &blocks {
            let roles = (out.roles.role(bp.a), out.roles.role(bp.b));
            let ok = matches!(
                roles,
                (Role::EdgeX(e1), Role::EdgeY(e2)) if e1 == e2
            ) || matches!(
                roles,
                (Role::VertexUHat(i1), Role::VertexWHat(i2)) if i1 == i2
            );
            assert!(ok, "unexpected blocking pair {roles:?}");
        }
    }

    #[test]
    fn witness_single_edge_h2() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let out = generate_clique_to_smi(&g, 2, &GapFunction::Const(1)).unwrap();
        assert_eq!(out.params.beta, 3);
        let witness = build_witness_matching(&out, &[0, 1]).unwrap();
        assert!(witness.is_perfect());
        assert_eq!(blocking_pairs(&out.profile, &witness).unwrap().len(), 3);
    }

    #[test]
    fn witness_rejects_non_clique() {
        let out = generate_clique_to_smi(&Graph::star(3), 3, &GapFunction::Const(1)).unwrap();
        assert_eq!(
            build_witness_matching(&out, &[0, 1, 2]),
            Err(ReductionError::NotAClique)
        );
    }

    #[test]
    fn structure_check_on_witness() {
        let out = k3_const1();
        let witness = build_witness_matching(&out, &[0, 1, 2]).unwrap();
        let report = check_perfect_structure(&out, &witness).unwrap();
        assert!(report.passes());
        assert!(report.clique_consistent);
        assert_eq!(report.selected_vertices, vec![0, 1, 2]);
        assert_eq!(report.selected_edges, vec![0, 1, 2]);
    }

    #[test]
    fn structure_check_rejects_imperfect() {
        let out = k3_const1();
        assert_eq!(
            check_perfect_structure(&out, &Matching::empty(out.profile.n())),
            Err(ReductionError::NotPerfect)
        );
    }

    #[test]
    fn sampled_perfect_matchings_pass_structure_check() {
        let out = k3_const1();
        for seed in 0..50 {
            let m = sample_perfect_matching(&out, seed);
            assert!(m.is_perfect());
            let report = check_perfect_structure(&out, &m).unwrap();
            assert!(report.passes());
        }
    }

    #[test]
    fn ring_audit_counts_at_least_l_when_applicable() {
        // Star graph, h = 3: no triangle, so sampled selections routinely put
        // an edge in E'' with an endpoint outside K.
        let out = generate_clique_to_smi(&Graph::star(3), 3, &GapFunction::Const(1)).unwrap();
        let mut checked = 0;
        for seed in 0..60 {
            let m = sample_perfect_matching(&out, seed);
            let report = check_perfect_structure(&out, &m).unwrap();
            for &e in &report.selected_edges {
                let (a, b) = out.graph.edges()[e];
                for v in [a, b] {
                    let in_k = report.selected_vertices.binary_search(&v).is_ok();
                    if !in_k {
                        let audit = ring_amplifier_audit(&out, &m, v, e).unwrap();
                        assert!(audit.every_ring_blocks());
                        assert!(audit.total >= out.params.big_l);
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 0, "sampler never produced an applicable case");
    }

    #[test]
    fn ring_audit_preconditions() {
        let out = k3_const1();
        let witness = build_witness_matching(&out, &[0, 1, 2]).unwrap();
        // All vertices are in the clique, so u_v is matched to what_v and the
        // precondition fails.
        assert!(matches!(
            ring_amplifier_audit(&out, &witness, 0, 0),
            Err(ReductionError::PreconditionUnmet(_))
        ));
    }

    #[test]
    fn clique_bruteforce_cases() {
        assert_eq!(
            clique_bruteforce(&Graph::complete(4), 3).unwrap(),
            Some(vec![0, 1, 2])
        );
        assert_eq!(clique_bruteforce(&Graph::star(3), 3).unwrap(), None);
        let big = Graph::new(26, vec![]).unwrap();
        assert!(matches!(
            clique_bruteforce(&big, 2),
            Err(ReductionError::TooLarge(_))
        ));
    }

    #[test]
    fn clique_bruteforce_agrees_with_combination_scan() {
        use itertools::Itertools;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let n = 8;
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(0.4) {
                        edges.push((a, b));
                    }
                }
            }
            let g = Graph::new(n, edges).unwrap();
            for h in 2..=4 {
                let fast = clique_bruteforce(&g, h).unwrap();
                let slow = (0..n).combinations(h).find(|c| {
                    c.iter()
                        .enumerate()
                        .all(|(i, &a)| c[i + 1..].iter().all(|&b| g.has_edge(a, b)))
                });
                assert_eq!(fast.is_some(), slow.is_some(), "trial {trial} h {h}");
                if let (Some(f), Some(s)) = (fast, slow) {
                    assert_eq!(f, s);
                }
            }
        }
    }

    #[test]
    fn witness_is_unstable_but_sub_blocks_are_quiet() {
        let out = k3_const1();
        let witness = build_witness_matching(&out, &[0, 1, 2]).unwrap();
        assert!(!is_stable(&out.profile, &witness).unwrap());
    }
}
