//! Preference profiles, matchings and the blocking-pair oracles.
//!
//! Everything downstream (solvers, reductions, verifiers) is defined in terms
//! of the types here. Profiles are immutable after validation and all
//! operations are pure, so values can be shared freely across worker threads.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Dense agent index, unique within one profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub usize);

impl AgentId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Marriage instances have a bipartite acceptability graph, roommates do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Marriage,
    Roommates,
}

/// Side tag for marriage profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// A weakly ordered acceptability list: a sequence of tie-groups, most
/// preferred first. Strict lists have singleton groups only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceList {
    groups: Vec<Vec<AgentId>>,
}

impl PreferenceList {
    pub fn groups(&self) -> &[Vec<AgentId>] {
        &self.groups
    }

    /// Total number of acceptable agents.
    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn is_strict(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    pub fn has_tie(&self) -> bool {
        !self.is_strict()
    }

    /// Acceptable agents in list order (group by group, ascending inside a group).
    pub fn entries(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.groups.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("agent {x} lists {y} but {y} does not list {x} back")]
    NonMutualAcceptability { x: usize, y: usize },
    #[error("agent {x} appears in its own preference list")]
    SelfAcceptability { x: usize },
    #[error("agent {x} appears more than once in the list of {y}")]
    DuplicateEntry { x: usize, y: usize },
    #[error("marriage profile has a same-side pair ({x}, {y})")]
    SideViolation { x: usize, y: usize },
    #[error("agent index {x} out of range (n = {n})")]
    OutOfRange { x: usize, n: usize },
    #[error("empty tie-group in the list of {owner}")]
    EmptyTieGroup { owner: usize },
    #[error("marriage profiles need a side tag per agent, roommates must not have one")]
    SideTagMismatch,
    #[error("duplicate agent name {0:?}")]
    DuplicateName(String),
    #[error("expected {n} names/sides/lists, got {got}")]
    LengthMismatch { n: usize, got: usize },
}

/// A validated preference profile. Construction is the `validate_profile`
/// operation: every invariant (mutuality, bipartiteness for marriage, no
/// self/duplicate entries) is checked once, and a rank table is precomputed
/// so that blocking-pair evaluation is O(1) per edge.
#[derive(Debug, Clone)]
pub struct PreferenceProfile {
    kind: Kind,
    names: Vec<String>,
    sides: Option<Vec<Side>>,
    lists: Vec<PreferenceList>,
    /// rank[owner][target] = number of agents owner strictly prefers to target.
    rank: Vec<HashMap<usize, usize>>,
    /// Acceptability edges, each with a < b, sorted.
    edges: Vec<(usize, usize)>,
}

impl PartialEq for PreferenceProfile {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.names == other.names
            && self.sides == other.sides
            && self.lists == other.lists
    }
}

impl Eq for PreferenceProfile {}

impl PreferenceProfile {
    /// Validate raw per-agent tie-group lists (indices) into a profile.
    pub fn new(
        kind: Kind,
        names: Vec<String>,
        sides: Option<Vec<Side>>,
        raw_lists: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self, ProfileError> {
        let n = names.len();
        if raw_lists.len() != n {
            return Err(ProfileError::LengthMismatch {
                n,
                got: raw_lists.len(),
            });
        }
        match (kind, &sides) {
            (Kind::Marriage, Some(s)) if s.len() != n => {
                return Err(ProfileError::LengthMismatch { n, got: s.len() })
            }
            (Kind::Marriage, None) | (Kind::Roommates, Some(_)) => {
                return Err(ProfileError::SideTagMismatch)
            }
            _ => {}
        }
        {
            let mut seen = HashMap::new();
            for (i, name) in names.iter().enumerate() {
                if seen.insert(name.as_str(), i).is_some() {
                    return Err(ProfileError::DuplicateName(name.clone()));
                }
            }
        }

        let mut lists = Vec::with_capacity(n);
        let mut rank = Vec::with_capacity(n);
        for (owner, groups) in raw_lists.into_iter().enumerate() {
            let mut canonical = Vec::with_capacity(groups.len());
            let mut ranks = HashMap::new();
            let mut position = 0usize;
            for group in groups {
                if group.is_empty() {
                    return Err(ProfileError::EmptyTieGroup { owner });
                }
                let mut members = group;
                members.sort_unstable();
                for &x in &members {
                    if x >= n {
                        return Err(ProfileError::OutOfRange { x, n });
                    }
                    if x == owner {
                        return Err(ProfileError::SelfAcceptability { x });
                    }
                    if ranks.insert(x, position).is_some() {
                        return Err(ProfileError::DuplicateEntry { x, y: owner });
                    }
                    if let (Kind::Marriage, Some(s)) = (kind, &sides) {
                        if s[owner] == s[x] {
                            return Err(ProfileError::SideViolation { x: owner, y: x });
                        }
                    }
                }
                position += members.len();
                canonical.push(members.iter().map(|&x| AgentId(x)).collect());
            }
            lists.push(PreferenceList { groups: canonical });
            rank.push(ranks);
        }

        // Mutuality: x in list(y) iff y in list(x).
        let mut edges = Vec::new();
        for y in 0..n {
            for x in rank[y].keys().copied() {
                if !rank[x].contains_key(&y) {
                    return Err(ProfileError::NonMutualAcceptability { x: y, y: x });
                }
                if y < x {
                    edges.push((y, x));
                }
            }
        }
        edges.sort_unstable();

        Ok(PreferenceProfile {
            kind,
            names,
            sides,
            lists,
            rank,
            edges,
        })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.n()).map(AgentId)
    }

    pub fn name(&self, a: AgentId) -> &str {
        &self.names[a.idx()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<AgentId> {
        self.names.iter().position(|x| x == name).map(AgentId)
    }

    pub fn side(&self, a: AgentId) -> Option<Side> {
        self.sides.as_ref().map(|s| s[a.idx()])
    }

    pub fn list(&self, a: AgentId) -> &PreferenceList {
        &self.lists[a.idx()]
    }

    pub fn acceptable(&self, x: AgentId, y: AgentId) -> bool {
        self.rank[x.idx()].contains_key(&y.idx())
    }

    /// Acceptability edges with a < b, in sorted order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_strict(&self) -> bool {
        self.lists.iter().all(PreferenceList::is_strict)
    }

    /// Number of agents owner strictly prefers to target; constant within a
    /// tie-group, strictly increasing across groups.
    pub fn rank(&self, owner: AgentId, target: AgentId) -> Result<usize, RankError> {
        self.rank[owner.idx()]
            .get(&target.idx())
            .copied()
            .ok_or(RankError::NotAcceptable {
                owner: owner.idx(),
                target: target.idx(),
            })
    }

    /// True if `owner` strictly prefers `x` to `y` (both must be acceptable).
    pub fn prefers(&self, owner: AgentId, x: AgentId, y: AgentId) -> bool {
        self.rank[owner.idx()][&x.idx()] < self.rank[owner.idx()][&y.idx()]
    }

    /// Restriction to a subset of agents: keeps all edges inside the subset.
    /// Returns the restricted profile and the new-index -> old-id map.
    pub fn restrict_to(&self, agents: &[AgentId]) -> (PreferenceProfile, Vec<AgentId>) {
        let mut old_to_new: HashMap<usize, usize> = HashMap::new();
        for (new, a) in agents.iter().enumerate() {
            old_to_new.insert(a.idx(), new);
        }
        let names = agents.iter().map(|a| self.names[a.idx()].clone()).collect();
        let sides = self
            .sides
            .as_ref()
            .map(|s| agents.iter().map(|a| s[a.idx()]).collect());
        let raw = agents
            .iter()
            .map(|a| {
                self.lists[a.idx()]
                    .groups
                    .iter()
                    .map(|g| {
                        g.iter()
                            .filter_map(|m| old_to_new.get(&m.idx()).copied())
                            .collect::<Vec<_>>()
                    })
                    .filter(|g| !g.is_empty())
                    .collect()
            })
            .collect();
        let profile = PreferenceProfile::new(self.kind, names, sides, raw)
            .expect("restriction of a valid profile stays valid");
        (profile, agents.to_vec())
    }

    /// Copy of the profile with the given acceptability edges removed from
    /// both endpoint lists.
    pub fn without_edges(&self, removed: &[(AgentId, AgentId)]) -> PreferenceProfile {
        let mut gone: Vec<(usize, usize)> = removed
            .iter()
            .map(|&(a, b)| (a.idx().min(b.idx()), a.idx().max(b.idx())))
            .collect();
        gone.sort_unstable();
        let banned = |x: usize, y: usize| {
            let key = (x.min(y), x.max(y));
            gone.binary_search(&key).is_ok()
        };
        let raw = (0..self.n())
            .map(|owner| {
                self.lists[owner]
                    .groups
                    .iter()
                    .map(|g| {
                        g.iter()
                            .map(|m| m.idx())
                            .filter(|&m| !banned(owner, m))
                            .collect::<Vec<_>>()
                    })
                    .filter(|g| !g.is_empty())
                    .collect()
            })
            .collect();
        PreferenceProfile::new(self.kind, self.names.clone(), self.sides.clone(), raw)
            .expect("edge removal keeps a valid profile")
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RankError {
    #[error("agent {target} is not acceptable to {owner}")]
    NotAcceptable { owner: usize, target: usize },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MatchingError {
    #[error("matching built for {expected} agents, profile has {got}")]
    WrongAgentCount { expected: usize, got: usize },
    #[error("agent index {0} out of range")]
    OutOfRange(usize),
    #[error("pair ({x}, {y}) is not an acceptability edge")]
    NotAnEdge { x: usize, y: usize },
    #[error("agent {0} appears in more than one pair")]
    AgentReused(usize),
    #[error("agent {0} paired with itself")]
    SelfPair(usize),
    #[error("invalid matching: {0}")]
    InvalidMatching(String),
}

/// A set of disjoint acceptable pairs. Unmatched agents carry an explicit
/// `None` partner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    partner: Vec<Option<AgentId>>,
}

impl Matching {
    pub fn empty(n: usize) -> Matching {
        Matching {
            partner: vec![None; n],
        }
    }

    pub fn new(profile: &PreferenceProfile, pairs: &[(AgentId, AgentId)]) -> Result<Matching, MatchingError> {
        let n = profile.n();
        let mut partner: Vec<Option<AgentId>> = vec![None; n];
        for &(a, b) in pairs {
            if a.idx() >= n {
                return Err(MatchingError::OutOfRange(a.idx()));
            }
            if b.idx() >= n {
                return Err(MatchingError::OutOfRange(b.idx()));
            }
            if a == b {
                return Err(MatchingError::SelfPair(a.idx()));
            }
            if !profile.acceptable(a, b) {
                return Err(MatchingError::NotAnEdge {
                    x: a.idx(),
                    y: b.idx(),
                });
            }
            if partner[a.idx()].is_some() {
                return Err(MatchingError::AgentReused(a.idx()));
            }
            if partner[b.idx()].is_some() {
                return Err(MatchingError::AgentReused(b.idx()));
            }
            partner[a.idx()] = Some(b);
            partner[b.idx()] = Some(a);
        }
        Ok(Matching { partner })
    }

    /// Builds from a partner vector without an edge check; internal helper
    /// for solvers that construct partners directly from list entries.
    pub(crate) fn from_partner(partner: Vec<Option<AgentId>>) -> Matching {
        Matching { partner }
    }

    pub fn n(&self) -> usize {
        self.partner.len()
    }

    pub fn partner(&self, a: AgentId) -> Option<AgentId> {
        self.partner[a.idx()]
    }

    pub fn is_matched(&self, a: AgentId) -> bool {
        self.partner[a.idx()].is_some()
    }

    /// Pairs with a < b, sorted.
    pub fn pairs(&self) -> Vec<(AgentId, AgentId)> {
        let mut out = Vec::new();
        for (i, p) in self.partner.iter().enumerate() {
            if let Some(q) = p {
                if i < q.idx() {
                    out.push((AgentId(i), *q));
                }
            }
        }
        out
    }

    pub fn size(&self) -> usize {
        self.partner.iter().flatten().count() / 2
    }

    pub fn is_perfect(&self) -> bool {
        self.partner.iter().all(Option::is_some)
    }
}

/// An acceptability edge outside the matching whose endpoints would both
/// rather be together. Stored with a < b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockingPair {
    pub a: AgentId,
    pub b: AgentId,
}

fn check_matching(profile: &PreferenceProfile, m: &Matching) -> Result<(), MatchingError> {
    if m.n() != profile.n() {
        return Err(MatchingError::WrongAgentCount {
            expected: m.n(),
            got: profile.n(),
        });
    }
    for (i, p) in m.partner.iter().enumerate() {
        if let Some(q) = p {
            if q.idx() >= profile.n() {
                return Err(MatchingError::OutOfRange(q.idx()));
            }
            if m.partner[q.idx()] != Some(AgentId(i)) {
                return Err(MatchingError::InvalidMatching(format!(
                    "partner vector inconsistent at agent {i}"
                )));
            }
            if !profile.acceptable(AgentId(i), *q) {
                return Err(MatchingError::NotAnEdge {
                    x: i,
                    y: q.idx(),
                });
            }
        }
    }
    Ok(())
}

/// True iff the acceptable pair {a, b} blocks `m`: the pair is unmatched and
/// each endpoint is unmatched or strictly prefers the other to its partner.
/// Under ties an indifferent endpoint does not block (weak stability).
pub fn is_pair_blocking(profile: &PreferenceProfile, m: &Matching, a: AgentId, b: AgentId) -> bool {
    debug_assert!(profile.acceptable(a, b));
    if m.partner(a) == Some(b) {
        return false;
    }
    let wants = |x: AgentId, y: AgentId| match m.partner(x) {
        None => true,
        Some(p) => profile.prefers(x, y, p),
    };
    wants(a, b) && wants(b, a)
}

/// All blocking pairs of `m`, sorted by endpoint indices.
pub fn blocking_pairs(
    profile: &PreferenceProfile,
    m: &Matching,
) -> Result<Vec<BlockingPair>, MatchingError> {
    check_matching(profile, m)?;
    let mut out = Vec::new();
    for &(x, y) in profile.edges() {
        let (a, b) = (AgentId(x), AgentId(y));
        if is_pair_blocking(profile, m, a, b) {
            out.push(BlockingPair { a, b });
        }
    }
    Ok(out)
}

/// Number of blocking pairs; same validation as `blocking_pairs`.
pub fn blocking_count(profile: &PreferenceProfile, m: &Matching) -> Result<usize, MatchingError> {
    check_matching(profile, m)?;
    let mut count = 0;
    for &(x, y) in profile.edges() {
        if is_pair_blocking(profile, m, AgentId(x), AgentId(y)) {
            count += 1;
        }
    }
    Ok(count)
}

pub fn is_stable(profile: &PreferenceProfile, m: &Matching) -> Result<bool, MatchingError> {
    check_matching(profile, m)?;
    for &(x, y) in profile.edges() {
        if is_pair_blocking(profile, m, AgentId(x), AgentId(y)) {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn matching_size(m: &Matching) -> usize {
    m.size()
}

pub fn is_perfect(profile: &PreferenceProfile, m: &Matching) -> bool {
    2 * m.size() == profile.n()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strict(names: &[&str], lists: Vec<Vec<usize>>, kind: Kind, sides: Option<Vec<Side>>) -> PreferenceProfile {
        let raw = lists
            .into_iter()
            .map(|l| l.into_iter().map(|x| vec![x]).collect())
            .collect();
        PreferenceProfile::new(kind, names.iter().map(|s| s.to_string()).collect(), sides, raw).unwrap()
    }

    #[test]
    fn smallest_mutual_pair_validates() {
        let p = strict(&["a0", "a1"], vec![vec![1], vec![0]], Kind::Roommates, None);
        assert_eq!(p.edges(), &[(0, 1)]);
    }

    #[test]
    fn non_mutual_rejected() {
        let err = PreferenceProfile::new(
            Kind::Roommates,
            vec!["a0".into(), "a1".into()],
            None,
            vec![vec![vec![1]], vec![]],
        )
        .unwrap_err();
        assert_eq!(err, ProfileError::NonMutualAcceptability { x: 0, y: 1 });
    }

    #[test]
    fn same_side_edge_rejected() {
        let err = PreferenceProfile::new(
            Kind::Marriage,
            vec!["a0".into(), "a1".into()],
            Some(vec![Side::A, Side::A]),
            vec![vec![vec![1]], vec![vec![0]]],
        )
        .unwrap_err();
        assert_eq!(err, ProfileError::SideViolation { x: 0, y: 1 });
    }

    #[test]
    fn self_and_duplicate_entries_rejected() {
        let err = PreferenceProfile::new(
            Kind::Roommates,
            vec!["a".into(), "b".into()],
            None,
            vec![vec![vec![0]], vec![]],
        )
        .unwrap_err();
        assert_eq!(err, ProfileError::SelfAcceptability { x: 0 });

        let err = PreferenceProfile::new(
            Kind::Roommates,
            vec!["a".into(), "b".into()],
            None,
            vec![vec![vec![1], vec![1]], vec![vec![0]]],
        )
        .unwrap_err();
        assert_eq!(err, ProfileError::DuplicateEntry { x: 1, y: 0 });
    }

    // List b2 > (b1 b3) > b4 for owner a0 over agents b1..b4 = 1..4.
    fn tied_list_profile() -> PreferenceProfile {
        PreferenceProfile::new(
            Kind::Marriage,
            vec!["a0".into(), "b1".into(), "b2".into(), "b3".into(), "b4".into()],
            Some(vec![Side::A, Side::B, Side::B, Side::B, Side::B]),
            vec![
                vec![vec![2], vec![1, 3], vec![4]],
                vec![vec![0]],
                vec![vec![0]],
                vec![vec![0]],
                vec![vec![0]],
            ],
        )
        .unwrap()
    }

    #[test]
    fn rank_counts_strictly_preferred() {
        let p = tied_list_profile();
        let a0 = AgentId(0);
        assert_eq!(p.rank(a0, AgentId(2)).unwrap(), 0);
        assert_eq!(p.rank(a0, AgentId(1)).unwrap(), 1);
        assert_eq!(p.rank(a0, AgentId(3)).unwrap(), 1);
        assert_eq!(p.rank(a0, AgentId(4)).unwrap(), 3);
        assert!(matches!(
            p.rank(AgentId(1), AgentId(2)),
            Err(RankError::NotAcceptable { .. })
        ));
    }

    #[test]
    fn empty_matching_on_one_edge_profile_blocks() {
        let p = strict(&["a0", "a1"], vec![vec![1], vec![0]], Kind::Roommates, None);
        let m = Matching::empty(2);
        let blocks = blocking_pairs(&p, &m).unwrap();
        assert_eq!(
            blocks,
            vec![BlockingPair {
                a: AgentId(0),
                b: AgentId(1)
            }]
        );
        assert!(!is_stable(&p, &m).unwrap());
    }

    #[test]
    fn empty_profile_empty_matching_is_stable() {
        let p = PreferenceProfile::new(Kind::Roommates, vec!["a".into()], None, vec![vec![]]).unwrap();
        assert!(is_stable(&p, &Matching::empty(1)).unwrap());
    }

    #[test]
    fn indifferent_agent_does_not_block() {
        // m1: w1; m2: w1~w2; w1: m1~m2; w2: m2. Matching {m2 w1}.
        let p = PreferenceProfile::new(
            Kind::Marriage,
            vec!["m1".into(), "m2".into(), "w1".into(), "w2".into()],
            Some(vec![Side::A, Side::A, Side::B, Side::B]),
            vec![
                vec![vec![2]],
                vec![vec![2, 3]],
                vec![vec![0, 1]],
                vec![vec![1]],
            ],
        )
        .unwrap();
        let m = Matching::new(&p, &[(AgentId(1), AgentId(2))]).unwrap();
        assert_eq!(blocking_pairs(&p, &m).unwrap(), vec![]);
        assert!(is_stable(&p, &m).unwrap());
    }

    #[test]
    fn perfect_and_size() {
        let p = strict(
            &["a", "b", "c", "d"],
            vec![vec![1], vec![0], vec![3], vec![2]],
            Kind::Roommates,
            None,
        );
        let m = Matching::new(&p, &[(AgentId(0), AgentId(1)), (AgentId(2), AgentId(3))]).unwrap();
        assert_eq!(matching_size(&m), 2);
        assert!(is_perfect(&p, &m));
        assert!(!is_perfect(&p, &Matching::empty(4)));
    }

    #[test]
    fn matching_rejects_non_edges_and_reuse() {
        let p = strict(
            &["a", "b", "c"],
            vec![vec![1], vec![0, 2], vec![1]],
            Kind::Roommates,
            None,
        );
        assert!(matches!(
            Matching::new(&p, &[(AgentId(0), AgentId(2))]),
            Err(MatchingError::NotAnEdge { .. })
        ));
        assert!(matches!(
            Matching::new(&p, &[(AgentId(0), AgentId(1)), (AgentId(1), AgentId(2))]),
            Err(MatchingError::AgentReused(1))
        ));
    }

    #[test]
    fn restrict_keeps_inner_edges() {
        let p = strict(
            &["a", "b", "c", "d"],
            vec![vec![1, 2], vec![0], vec![0, 3], vec![2]],
            Kind::Roommates,
            None,
        );
        let (sub, back) = p.restrict_to(&[AgentId(0), AgentId(2)]);
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.edges(), &[(0, 1)]);
        assert_eq!(back, vec![AgentId(0), AgentId(2)]);
    }

    #[test]
    fn without_edges_removes_both_directions() {
        let p = strict(
            &["a", "b", "c", "d"],
            vec![vec![1, 2], vec![0], vec![0, 3], vec![2]],
            Kind::Roommates,
            None,
        );
        let q = p.without_edges(&[(AgentId(2), AgentId(0))]);
        assert_eq!(q.edges(), &[(0, 1), (2, 3)]);
    }
}
