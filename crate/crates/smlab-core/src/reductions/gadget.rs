//! Padding gadgets for the roommates variant of the reduction.
//!
//! A gadget is a set S_u of agents hung off one host agent u. The executable
//! contract has two clauses:
//!
//! (G1) some matching of S_u alone has zero blocking pairs inside
//!      S_u + host while the host is matched to a partner it prefers to all
//!      of S_u;
//! (G2) every matching in which the host is unmatched or matched inside S_u
//!      induces at least `l_target` blocking pairs inside S_u + host.
//!
//! `verify_gadget` checks both clauses exhaustively and returns a concrete
//! counterexample on failure. `generate_sri_padding` refuses gadgets that are
//! not verified at the instance's amplifier level.

use rayon::prelude::*;
use thiserror::Error;

use crate::classic::for_each_matching;
use crate::model::{AgentId, Kind, Matching, PreferenceProfile};

use super::{ReductionError, ReductionOutput, Role, RoleMap};

/// Entry of a gadget-internal preference list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GadgetRef {
    Member(usize),
    Host,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GadgetError {
    #[error("gadget size {0} is odd; padding sets must be even")]
    OddSize(usize),
    #[error("gadget needs at least two agents")]
    Empty,
    #[error("member {x} lists {y} but {y} does not list {x} back")]
    NotMutual { x: usize, y: usize },
    #[error("member {0} lists itself")]
    SelfRef(usize),
    #[error("duplicate entry in the list of member {0}")]
    Duplicate(usize),
    #[error("member {0} out of range")]
    OutOfRange(usize),
    #[error("host appears in the list of {0}, which is not attached (or vice versa)")]
    AttachmentMismatch(usize),
}

/// A candidate padding gadget: internal strict preference lists over the
/// members plus the host, and the ordered suffix of members appended to the
/// host's own list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetSpec {
    l_target: usize,
    lists: Vec<Vec<GadgetRef>>,
    attachment: Vec<usize>,
}

impl GadgetSpec {
    pub fn new(
        l_target: usize,
        lists: Vec<Vec<GadgetRef>>,
        attachment: Vec<usize>,
    ) -> Result<GadgetSpec, GadgetError> {
        let n = lists.len();
        if n == 0 {
            return Err(GadgetError::Empty);
        }
        if n % 2 != 0 {
            return Err(GadgetError::OddSize(n));
        }
        for (i, list) in lists.iter().enumerate() {
            let mut seen = std::collections::HashSet::new();
            for r in list {
                if !seen.insert(*r) {
                    return Err(GadgetError::Duplicate(i));
                }
                if let GadgetRef::Member(j) = r {
                    if *j >= n {
                        return Err(GadgetError::OutOfRange(*j));
                    }
                    if *j == i {
                        return Err(GadgetError::SelfRef(i));
                    }
                }
            }
        }
        for i in 0..n {
            for r in &lists[i] {
                if let GadgetRef::Member(j) = r {
                    if !lists[*j].contains(&GadgetRef::Member(i)) {
                        return Err(GadgetError::NotMutual { x: i, y: *j });
                    }
                }
            }
        }
        for &a in &attachment {
            if a >= n {
                return Err(GadgetError::OutOfRange(a));
            }
        }
        for i in 0..n {
            let listed = lists[i].contains(&GadgetRef::Host);
            let attached = attachment.contains(&i);
            if listed != attached {
                return Err(GadgetError::AttachmentMismatch(i));
            }
        }
        {
            let mut uniq = attachment.clone();
            uniq.sort_unstable();
            uniq.dedup();
            if uniq.len() != attachment.len() {
                return Err(GadgetError::Duplicate(usize::MAX));
            }
        }
        Ok(GadgetSpec {
            l_target,
            lists,
            attachment,
        })
    }

    pub fn l_target(&self) -> usize {
        self.l_target
    }

    pub fn size(&self) -> usize {
        self.lists.len()
    }

    pub fn lists(&self) -> &[Vec<GadgetRef>] {
        &self.lists
    }

    pub fn attachment(&self) -> &[usize] {
        &self.attachment
    }

    /// Documented failing candidate: pendant pairs x_t: host > y_t; y_t: x_t,
    /// host suffix x_0 > ... > x_{l-1}. Fails (G2): the host can marry x_0
    /// and leave the rest quietly paired.
    pub fn pendant_pair(l: usize) -> GadgetSpec {
        let mut lists = Vec::new();
        for t in 0..l {
            lists.push(vec![GadgetRef::Host, GadgetRef::Member(l + t)]);
        }
        for t in 0..l {
            lists.push(vec![GadgetRef::Member(t)]);
        }
        GadgetSpec::new(l, lists, (0..l).collect()).expect("pendant pair candidate is well formed")
    }

    /// Documented failing candidate: alternating path b_0..b_3 with
    /// b_i: b_{i-1} > b_{i+1} (b_{-1} = host). Fails (G2) at l_target = 2.
    pub fn alternating_path() -> GadgetSpec {
        let lists = vec![
            vec![GadgetRef::Host, GadgetRef::Member(1)],
            vec![GadgetRef::Member(0), GadgetRef::Member(2)],
            vec![GadgetRef::Member(1), GadgetRef::Member(3)],
            vec![GadgetRef::Member(2)],
        ];
        GadgetSpec::new(2, lists, vec![0]).expect("alternating path candidate is well formed")
    }

    /// Verified gadget at l_target = 1: an entry agent that prefers the host,
    /// backed by a three-cycle that cannot settle once the entry agent is
    /// consumed. Eating the entry agent strands the cycle, ignoring the
    /// gadget strands the entry agent.
    pub fn cycle_guard() -> GadgetSpec {
        let lists = vec![
            vec![GadgetRef::Host, GadgetRef::Member(1)],
            vec![GadgetRef::Member(2), GadgetRef::Member(0), GadgetRef::Member(3)],
            vec![GadgetRef::Member(3), GadgetRef::Member(1)],
            vec![GadgetRef::Member(1), GadgetRef::Member(2)],
        ];
        GadgetSpec::new(1, lists, vec![0]).expect("cycle guard gadget is well formed")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedGadget {
    pub l_target: usize,
    /// The (G1) witness: member pairs with zero blocking pairs while the
    /// host is contented.
    pub quiet_matching: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetCounterexample {
    /// Member the host is matched to; `None` means the host is unmatched.
    pub host_partner: Option<usize>,
    pub member_pairs: Vec<(usize, usize)>,
    pub block_count: usize,
    pub required: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GadgetVerdict {
    Verified(VerifiedGadget),
    /// (G1) fails: no internal matching is quiet even with a contented host.
    NoQuietMatching { best_block_count: usize },
    /// (G2) fails: some host-unmatched or host-inside configuration stays
    /// below the required block count.
    Counterexample(GadgetCounterexample),
}

pub const GADGET_ENUM_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HostState {
    Contented,
    Unmatched,
    Inside(usize),
}

/// Blocking pairs among members and host under one configuration. Member
/// `inside` (if any) is matched to the host.
fn count_blocks(
    spec: &GadgetSpec,
    pos: &[std::collections::HashMap<GadgetRef, usize>],
    host: HostState,
    partner: &[Option<usize>],
) -> usize {
    let n = spec.size();
    let inside = match host {
        HostState::Inside(a) => Some(a),
        _ => None,
    };
    let member_wants = |i: usize, target: GadgetRef| -> bool {
        let target_pos = pos[i][&target];
        if Some(i) == inside {
            return target_pos < pos[i][&GadgetRef::Host];
        }
        match partner[i] {
            None => true,
            Some(p) => target_pos < pos[i][&GadgetRef::Member(p)],
        }
    };
    let mut count = 0;
    for i in 0..n {
        for r in &spec.lists[i] {
            if let GadgetRef::Member(j) = r {
                if *j > i
                    && partner[i] != Some(*j)
                    && member_wants(i, GadgetRef::Member(*j))
                    && member_wants(*j, GadgetRef::Member(i))
                {
                    count += 1;
                }
            }
        }
    }
    // Host-member pairs.
    let host_wants = |s: usize| -> bool {
        match host {
            HostState::Contented => false,
            HostState::Unmatched => true,
            HostState::Inside(a) => {
                let pa = spec.attachment.iter().position(|&x| x == a).unwrap();
                let ps = spec.attachment.iter().position(|&x| x == s).unwrap();
                ps < pa
            }
        }
    };
    for &s in &spec.attachment {
        if Some(s) == inside {
            continue;
        }
        if host_wants(s) && member_wants(s, GadgetRef::Host) {
            count += 1;
        }
    }
    count
}

/// Exhaustive check of (G1) and (G2) over all matchings of S_u + host under
/// every host status. On (G2) failure, the minimum-block violating
/// configuration is returned.
pub fn verify_gadget(spec: &GadgetSpec) -> Result<GadgetVerdict, ReductionError> {
    let n = spec.size();
    if n > GADGET_ENUM_CAP {
        return Err(ReductionError::TooLarge(format!(
            "gadget has {n} agents, exhaustive cap is {GADGET_ENUM_CAP}"
        )));
    }
    let pos: Vec<std::collections::HashMap<GadgetRef, usize>> = spec
        .lists
        .iter()
        .map(|l| l.iter().enumerate().map(|(p, r)| (*r, p)).collect())
        .collect();
    let full_adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            spec.lists[i]
                .iter()
                .filter_map(|r| match r {
                    GadgetRef::Member(j) => Some(*j),
                    GadgetRef::Host => None,
                })
                .collect()
        })
        .collect();

    let mut statuses = vec![HostState::Contented, HostState::Unmatched];
    statuses.extend(spec.attachment.iter().map(|&a| HostState::Inside(a)));

    struct StatusOutcome {
        status: HostState,
        /// minimum block count and its matching
        min: usize,
        min_pairs: Vec<(usize, usize)>,
    }

    let outcomes: Vec<StatusOutcome> = statuses
        .par_iter()
        .map(|&status| {
            let mut adj = full_adj.clone();
            if let HostState::Inside(a) = status {
                adj[a].clear();
                for l in adj.iter_mut() {
                    l.retain(|&x| x != a);
                }
            }
            let mut min = usize::MAX;
            let mut min_pairs = Vec::new();
            for_each_matching(&adj, &mut |partner| {
                let count = count_blocks(spec, &pos, status, partner);
                if count < min {
                    min = count;
                    min_pairs = partner
                        .iter()
                        .enumerate()
                        .filter_map(|(i, p)| p.map(|q| (i, q)))
                        .filter(|&(i, q)| i < q)
                        .collect();
                }
            });
            StatusOutcome {
                status,
                min,
                min_pairs,
            }
        })
        .collect();

    let contented = &outcomes[0];
    if contented.min > 0 {
        return Ok(GadgetVerdict::NoQuietMatching {
            best_block_count: contented.min,
        });
    }
    let violation = outcomes[1..]
        .iter()
        .filter(|o| o.min < spec.l_target)
        .min_by_key(|o| o.min);
    if let Some(v) = violation {
        return Ok(GadgetVerdict::Counterexample(GadgetCounterexample {
            host_partner: match v.status {
                HostState::Inside(a) => Some(a),
                _ => None,
            },
            member_pairs: v.min_pairs.clone(),
            block_count: v.min,
            required: spec.l_target,
        }));
    }
    Ok(GadgetVerdict::Verified(VerifiedGadget {
        l_target: spec.l_target,
        quiet_matching: contented.min_pairs.clone(),
    }))
}

/// Roommates variant of a generated instance: sides are merged and one fresh
/// gadget copy is attached to every original agent. The gadget must verify at
/// the instance's amplifier level.
pub fn generate_sri_padding(
    smi: &ReductionOutput,
    gadget: &GadgetSpec,
) -> Result<ReductionOutput, ReductionError> {
    if smi.profile.kind() != Kind::Marriage {
        return Err(ReductionError::PreconditionUnmet(
            "padding applies to the marriage reduction output".into(),
        ));
    }
    if gadget.l_target() < smi.params.big_l {
        return Err(ReductionError::GadgetNotVerified(format!(
            "gadget level {} is below the instance amplifier level {}",
            gadget.l_target(),
            smi.params.big_l
        )));
    }
    match verify_gadget(gadget)? {
        GadgetVerdict::Verified(_) => {}
        other => {
            return Err(ReductionError::GadgetNotVerified(format!(
                "verification failed: {other:?}"
            )))
        }
    }

    let n0 = smi.profile.n();
    let size = gadget.size();
    let base = |host: usize| n0 + host * size;

    let mut names: Vec<String> = smi.profile.names().to_vec();
    let mut roles: Vec<Role> = (0..n0).map(|i| smi.roles.role(AgentId(i))).collect();
    let mut lists: Vec<Vec<Vec<usize>>> = (0..n0)
        .map(|i| {
            smi.profile
                .list(AgentId(i))
                .groups()
                .iter()
                .map(|g| g.iter().map(|m| m.idx()).collect())
                .collect()
        })
        .collect();

    for host in 0..n0 {
        for &a in gadget.attachment() {
            lists[host].push(vec![base(host) + a]);
        }
        for (j, member_list) in gadget.lists().iter().enumerate() {
            names.push(format!("pad[{}][{}]", smi.profile.name(AgentId(host)), j));
            roles.push(Role::Padding { host, index: j });
            let mapped = member_list
                .iter()
                .map(|r| match r {
                    GadgetRef::Member(x) => vec![base(host) + x],
                    GadgetRef::Host => vec![host],
                })
                .collect();
            lists.push(mapped);
        }
    }

    // Interleave: keep original agents first, then gadget blocks in host
    // order. `lists` above pushed gadget blocks host by host already.
    let profile = PreferenceProfile::new(Kind::Roommates, names, None, lists)
        .expect("padded construction stays mutual");
    Ok(ReductionOutput {
        profile,
        roles: RoleMap::new(roles),
        params: smi.params,
        graph: smi.graph.clone(),
    })
}

/// Extends a matching of the original instance with each gadget's quiet
/// internal matching.
pub fn extend_witness(
    padded: &ReductionOutput,
    smi_matching: &Matching,
    quiet: &[(usize, usize)],
) -> Matching {
    let n0 = smi_matching.n();
    let total = padded.profile.n();
    let size = (total - n0) / n0;
    let mut pairs: Vec<(AgentId, AgentId)> = smi_matching.pairs();
    for host in 0..n0 {
        let base = n0 + host * size;
        for &(a, b) in quiet {
            pairs.push((AgentId(base + a), AgentId(base + b)));
        }
    }
    Matching::new(&padded.profile, &pairs).expect("extension pairs are edges")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::model::blocking_pairs;
    use crate::reductions::{build_witness_matching, generate_clique_to_smi, GapFunction};

    #[test]
    fn odd_gadget_rejected() {
        let err = GadgetSpec::new(
            0,
            vec![
                vec![GadgetRef::Member(1)],
                vec![GadgetRef::Member(0)],
                vec![],
            ],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err, GadgetError::OddSize(3));
    }

    #[test]
    fn attachment_mismatch_rejected() {
        let err = GadgetSpec::new(
            0,
            vec![vec![GadgetRef::Host, GadgetRef::Member(1)], vec![GadgetRef::Member(0)]],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err, GadgetError::AttachmentMismatch(0));
    }

    #[test]
    fn pendant_pair_counterexample_is_host_inside_zero_blocks() {
        let spec = GadgetSpec::pendant_pair(2);
        match verify_gadget(&spec).unwrap() {
            GadgetVerdict::Counterexample(ce) => {
                assert!(ce.host_partner.is_some(), "host must sit inside the gadget");
                assert_eq!(ce.block_count, 0);
                assert_eq!(ce.required, 2);
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
    }

    #[test]
    fn alternating_path_counterexample_is_host_inside_zero_blocks() {
        let spec = GadgetSpec::alternating_path();
        match verify_gadget(&spec).unwrap() {
            GadgetVerdict::Counterexample(ce) => {
                assert_eq!(ce.host_partner, Some(0));
                assert_eq!(ce.block_count, 0);
                // The documented configuration: host eats b_0, b_1-b_2
                // matched, b_3 stranded.
                assert_eq!(ce.member_pairs, vec![(1, 2)]);
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
    }

    #[test]
    fn any_quiet_gadget_verifies_at_level_zero() {
        let mut spec = GadgetSpec::pendant_pair(2);
        spec.l_target = 0;
        assert!(matches!(
            verify_gadget(&spec).unwrap(),
            GadgetVerdict::Verified(_)
        ));
    }

    #[test]
    fn cycle_guard_verifies_at_level_one() {
        let spec = GadgetSpec::cycle_guard();
        match verify_gadget(&spec).unwrap() {
            GadgetVerdict::Verified(v) => {
                assert_eq!(v.l_target, 1);
                assert_eq!(v.quiet_matching, vec![(0, 1), (2, 3)]);
            }
            other => panic!("expected verified, got {other:?}"),
        }
    }

    #[test]
    fn padding_preserves_witness_block_count() {
        // F = const:0 gives L = 1, matching the cycle-guard level.
        let g = Graph::complete(3);
        let smi = generate_clique_to_smi(&g, 3, &GapFunction::Const(0)).unwrap();
        assert_eq!(smi.params.big_l, 1);
        let witness = build_witness_matching(&smi, &[0, 1, 2]).unwrap();
        let smi_blocks = blocking_pairs(&smi.profile, &witness).unwrap().len();
        assert_eq!(smi_blocks, 6);

        let gadget = GadgetSpec::cycle_guard();
        let quiet = match verify_gadget(&gadget).unwrap() {
            GadgetVerdict::Verified(v) => v.quiet_matching,
            other => panic!("cycle guard must verify, got {other:?}"),
        };
        let padded = generate_sri_padding(&smi, &gadget).unwrap();
        assert_eq!(padded.profile.kind(), Kind::Roommates);
        assert_eq!(
            padded.profile.n(),
            smi.profile.n() * (1 + gadget.size())
        );

        let extended = extend_witness(&padded, &witness, &quiet);
        let padded_blocks = blocking_pairs(&padded.profile, &extended).unwrap();
        assert_eq!(padded_blocks.len(), smi_blocks);
    }

    #[test]
    fn unverified_gadget_refused() {
        let g = Graph::complete(3);
        let smi = generate_clique_to_smi(&g, 3, &GapFunction::Const(0)).unwrap();
        let mut bad = GadgetSpec::pendant_pair(2);
        bad.l_target = 1;
        assert!(matches!(
            generate_sri_padding(&smi, &bad),
            Err(ReductionError::GadgetNotVerified(_))
        ));
        // Verified but at a level below the instance's L.
        let smi_big = generate_clique_to_smi(&g, 3, &GapFunction::Const(1)).unwrap();
        assert!(matches!(
            generate_sri_padding(&smi_big, &GadgetSpec::cycle_guard()),
            Err(ReductionError::GadgetNotVerified(_))
        ));
    }

    #[test]
    fn host_unmatched_in_padded_instance_pays_inside_its_gadget() {
        // Leave one host unmatched: its gadget must contribute >= L blocks.
        let g = Graph::complete(3);
        let smi = generate_clique_to_smi(&g, 3, &GapFunction::Const(0)).unwrap();
        let witness = build_witness_matching(&smi, &[0, 1, 2]).unwrap();
        let gadget = GadgetSpec::cycle_guard();
        let quiet = match verify_gadget(&gadget).unwrap() {
            GadgetVerdict::Verified(v) => v.quiet_matching,
            _ => unreachable!(),
        };
        let padded = generate_sri_padding(&smi, &gadget).unwrap();

        // Remove agent 0's pair from the witness before extending.
        let dropped: Vec<(AgentId, AgentId)> = witness
            .pairs()
            .into_iter()
            .filter(|&(a, b)| a.idx() != 0 && b.idx() != 0)
            .collect();
        let partial = Matching::new(&smi.profile, &dropped).unwrap();
        let extended = extend_witness(&padded, &partial, &quiet);
        let blocks = blocking_pairs(&padded.profile, &extended).unwrap();
        let base = smi.profile.n();
        let size = gadget.size();
        let gadget0: Vec<_> = blocks
            .iter()
            .filter(|bp| {
                let in_gadget0 = |a: AgentId| a.idx() == 0 || (a.idx() >= base && a.idx() < base + size);
                in_gadget0(bp.a) && in_gadget0(bp.b)
            })
            .collect();
        assert!(gadget0.len() >= padded.params.big_l);
    }
}
