//! Maximum-size weakly stable matching under ties: a promotion-based 2/3
//! approximation, an exact solver by tie-break enumeration, the
//! approximation-scheme driver parameterized by the number of agents with
//! ties, and the symmetric-difference analysis relating stable matchings to
//! maximum matchings of the acceptability graph.

use std::collections::VecDeque;

use rayon::prelude::*;
use thiserror::Error;

use crate::classic::max_graph_matching;
use crate::model::{
    blocking_pairs, AgentId, Kind, Matching, PreferenceProfile, Side,
};

/// Default cap on the number of strict completions `exact_max_smti` explores.
pub const DEFAULT_COMPLETION_BUDGET: u128 = 2_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MaxSmtiError {
    #[error("operation requires a marriage profile")]
    WrongKind,
    #[error("tie-break enumeration needs {completions} completions, budget is {budget}")]
    EnumerationTooLarge { completions: u128, budget: u128 },
    #[error("invalid epsilon: {0}")]
    InvalidEpsilon(String),
    #[error("input matching is not stable")]
    NotStable,
}

/// Tie statistics of a profile: `tau` counts agents whose list has at least
/// one tie-group of size two or more; `total_tie_length` sums the sizes of
/// those groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TieStatistics {
    pub tau: usize,
    pub total_tie_length: usize,
}

impl TieStatistics {
    pub fn of(profile: &PreferenceProfile) -> TieStatistics {
        let mut tau = 0;
        let mut total = 0;
        for a in profile.agents() {
            let tied: usize = profile
                .list(a)
                .groups()
                .iter()
                .filter(|g| g.len() >= 2)
                .map(|g| g.len())
                .sum();
            if tied > 0 {
                tau += 1;
            }
            total += tied;
        }
        TieStatistics {
            tau,
            total_tie_length: total,
        }
    }
}

/// Exact rational approximation ratio, compared by cross-multiplication so
/// the case split of the approximation scheme is branch-exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Epsilon {
    num: u64,
    den: u64,
}

impl Epsilon {
    pub fn new(num: u64, den: u64) -> Result<Epsilon, MaxSmtiError> {
        if den == 0 {
            return Err(MaxSmtiError::InvalidEpsilon("zero denominator".into()));
        }
        if num >= den {
            return Err(MaxSmtiError::InvalidEpsilon(format!(
                "{num}/{den} is not below 1"
            )));
        }
        Ok(Epsilon { num, den })
    }

    /// Parses a rational literal `P/Q`.
    pub fn parse(text: &str) -> Result<Epsilon, MaxSmtiError> {
        let (p, q) = text
            .split_once('/')
            .ok_or_else(|| MaxSmtiError::InvalidEpsilon(format!("{text:?} is not `P/Q`")))?;
        let num: u64 = p
            .trim()
            .parse()
            .map_err(|_| MaxSmtiError::InvalidEpsilon(format!("bad numerator in {text:?}")))?;
        let den: u64 = q
            .trim()
            .parse()
            .map_err(|_| MaxSmtiError::InvalidEpsilon(format!("bad denominator in {text:?}")))?;
        Epsilon::new(num, den)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    fn below_two_thirds(&self) -> bool {
        3 * (self.num as u128) < 2 * (self.den as u128)
    }

    /// Smallest integer s with s >= eps * value.
    pub fn ceil_times(&self, value: usize) -> usize {
        let num = self.num as u128 * value as u128;
        num.div_ceil(self.den as u128) as usize
    }
}

impl std::fmt::Display for Epsilon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Configuration of the approximation scheme. Ratios below 2/3 are clamped
/// up to 2/3 (the plain approximation already achieves that factor), which is
/// reported through `clamped`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FptAsConfig {
    pub epsilon: Epsilon,
    pub clamped: bool,
}

impl FptAsConfig {
    pub fn new(requested: Epsilon) -> FptAsConfig {
        if requested.below_two_thirds() {
            FptAsConfig {
                epsilon: Epsilon { num: 2, den: 3 },
                clamped: true,
            }
        } else {
            FptAsConfig {
                epsilon: requested,
                clamped: false,
            }
        }
    }
}

fn require_marriage(profile: &PreferenceProfile) -> Result<(), MaxSmtiError> {
    if profile.kind() != Kind::Marriage {
        return Err(MaxSmtiError::WrongKind);
    }
    Ok(())
}

fn assert_weakly_stable(profile: &PreferenceProfile, m: &Matching, who: &str) {
    let blocks = blocking_pairs(profile, m).expect("solver output fits profile");
    assert!(
        blocks.is_empty(),
        "{who} produced an unstable matching, blocked by {blocks:?}"
    );
}

/// Promotion-based proposal algorithm for weakly stable matchings with ties
/// on both sides. Proposers walk their list group by group, preferring an
/// unmatched receiver inside the current tie-group; a proposer that exhausts
/// its list is promoted once (receivers resolve ties in its favor) and walks
/// the list again. Receivers break remaining ties for their current partner,
/// then for the lower index. The output is verified weakly stable; the 2/3
/// size factor is enforced by the oracle test suites.
pub fn approx_two_thirds(profile: &PreferenceProfile) -> Result<Matching, MaxSmtiError> {
    require_marriage(profile)?;
    let n = profile.n();
    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut promoted = vec![false; n];
    let mut group_idx = vec![0usize; n];
    let mut remaining: Vec<Vec<Vec<usize>>> = profile
        .agents()
        .map(|a| {
            profile
                .list(a)
                .groups()
                .iter()
                .map(|g| g.iter().map(|m| m.idx()).collect())
                .collect()
        })
        .collect();
    let fresh = remaining.clone();

    // Effective preference of receiver w for proposer x: tie-group first,
    // then promotion status. Lower is better.
    let eff = |profile: &PreferenceProfile, promoted: &[bool], w: usize, x: usize| {
        (
            profile.rank(AgentId(w), AgentId(x)).expect("proposal along an edge"),
            u8::from(!promoted[x]),
        )
    };

    let mut queue: VecDeque<usize> = (0..n)
        .filter(|&a| profile.side(AgentId(a)) == Some(Side::A))
        .collect();
    while let Some(p) = queue.pop_front() {
        if partner[p].is_some() {
            continue;
        }
        loop {
            while group_idx[p] < remaining[p].len() && remaining[p][group_idx[p]].is_empty() {
                group_idx[p] += 1;
            }
            if group_idx[p] >= remaining[p].len() {
                if promoted[p] {
                    break; // exhausted both walks, stays single
                }
                promoted[p] = true;
                remaining[p] = fresh[p].clone();
                group_idx[p] = 0;
                continue;
            }
            let group = &remaining[p][group_idx[p]];
            let w = group
                .iter()
                .copied()
                .filter(|&w| partner[w].is_none())
                .min()
                .unwrap_or_else(|| *group.iter().min().expect("group is non-empty"));
            let accept = match partner[w] {
                None => true,
                Some(q) => eff(profile, &promoted, w, p) < eff(profile, &promoted, w, q),
            };
            if accept {
                if let Some(q) = partner[w] {
                    partner[q] = None;
                    queue.push_back(q);
                }
                partner[w] = Some(p);
                partner[p] = Some(w);
                break;
            }
            let slot = remaining[p][group_idx[p]]
                .iter()
                .position(|&x| x == w)
                .expect("w was drawn from this group");
            remaining[p][group_idx[p]].swap_remove(slot);
        }
    }

    let m = Matching::from_partner(partner.iter().map(|p| p.map(AgentId)).collect());
    assert_weakly_stable(profile, &m, "approx_two_thirds");
    Ok(m)
}

/// Deferred acceptance specialized to pre-completed strict lists, used by the
/// tie-break enumeration. `rank_pos[w][x]` must give w's position of x.
fn gs_on_completion(
    n: usize,
    proposers: &[usize],
    lists: &[Vec<usize>],
    rank_pos: &[Vec<usize>],
) -> Vec<Option<usize>> {
    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut next = vec![0usize; n];
    let mut free: VecDeque<usize> = proposers.iter().copied().collect();
    while let Some(p) = free.pop_front() {
        while next[p] < lists[p].len() {
            let w = lists[p][next[p]];
            next[p] += 1;
            match partner[w] {
                None => {
                    partner[w] = Some(p);
                    partner[p] = Some(w);
                    break;
                }
                Some(q) => {
                    if rank_pos[w][p] < rank_pos[w][q] {
                        partner[q] = None;
                        free.push_back(q);
                        partner[w] = Some(p);
                        partner[p] = Some(w);
                        break;
                    }
                }
            }
        }
    }
    partner
}

/// Every tie-group of size >= 2, as (owner, group index, members).
fn tie_groups(profile: &PreferenceProfile) -> Vec<(usize, usize, Vec<usize>)> {
    let mut out = Vec::new();
    for a in profile.agents() {
        for (gi, g) in profile.list(a).groups().iter().enumerate() {
            if g.len() >= 2 {
                out.push((a.idx(), gi, g.iter().map(|m| m.idx()).collect()));
            }
        }
    }
    out
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Exact maximum weakly stable matching by enumerating every strict
/// completion of every tie-group and keeping the largest deferred-acceptance
/// result. Each completion's stable matching is weakly stable in the original
/// instance, and some completion attains the optimum, so the maximum over
/// completions is exact. Ties between equal-size results are broken by the
/// lexicographically smallest pair list.
pub fn exact_max_smti(
    profile: &PreferenceProfile,
    budget: Option<u128>,
) -> Result<Matching, MaxSmtiError> {
    require_marriage(profile)?;
    let budget = budget.unwrap_or(DEFAULT_COMPLETION_BUDGET);
    let groups = tie_groups(profile);
    let completions: u128 = groups.iter().map(|(_, _, g)| factorial(g.len())).product();
    if completions > budget {
        return Err(MaxSmtiError::EnumerationTooLarge {
            completions,
            budget,
        });
    }

    let n = profile.n();
    let proposers: Vec<usize> = (0..n)
        .filter(|&a| profile.side(AgentId(a)) == Some(Side::A))
        .collect();
    let base_lists: Vec<Vec<Vec<usize>>> = profile
        .agents()
        .map(|a| {
            profile
                .list(a)
                .groups()
                .iter()
                .map(|g| g.iter().map(|m| m.idx()).collect())
                .collect()
        })
        .collect();
    // Lexicographic permutations per tied group; the completion index is a
    // mixed-radix number over these tables.
    let perm_tables: Vec<Vec<Vec<usize>>> = groups
        .iter()
        .map(|(_, _, g)| {
            use itertools::Itertools;
            g.iter().copied().permutations(g.len()).collect()
        })
        .collect();

    let eval = |index: u128| -> (usize, Vec<(AgentId, AgentId)>, Vec<Option<usize>>) {
        let mut lists: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut choice = Vec::with_capacity(groups.len());
        let mut rest = index;
        for table in &perm_tables {
            let radix = table.len() as u128;
            choice.push((rest % radix) as usize);
            rest /= radix;
        }
        for (a, base) in base_lists.iter().enumerate() {
            let mut flat = Vec::new();
            for (gi, g) in base.iter().enumerate() {
                if g.len() >= 2 {
                    let slot = groups
                        .iter()
                        .position(|&(owner, ogi, _)| owner == a && ogi == gi)
                        .expect("tied group is registered");
                    flat.extend_from_slice(&perm_tables[slot][choice[slot]]);
                } else {
                    flat.extend_from_slice(g);
                }
            }
            lists.push(flat);
        }
        let mut rank_pos = vec![vec![usize::MAX; n]; n];
        for (a, list) in lists.iter().enumerate() {
            for (pos, &x) in list.iter().enumerate() {
                rank_pos[a][x] = pos;
            }
        }
        let partner = gs_on_completion(n, &proposers, &lists, &rank_pos);
        let m = Matching::from_partner(partner.iter().map(|p| p.map(AgentId)).collect());
        (m.size(), m.pairs(), partner)
    };

    let better = |a: &(usize, Vec<(AgentId, AgentId)>, Vec<Option<usize>>),
                  b: &(usize, Vec<(AgentId, AgentId)>, Vec<Option<usize>>)| {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    };

    let upper_bound = max_graph_matching(profile).size();
    let total = completions;
    let best = if total <= 4096 {
        let mut best = eval(0);
        let mut index = 1u128;
        while index < total && best.0 < upper_bound {
            let cand = eval(index);
            if better(&cand, &best) {
                best = cand;
            }
            index += 1;
        }
        best
    } else {
        (0..total as u64)
            .into_par_iter()
            .map(|i| eval(i as u128))
            .reduce_with(|a, b| if better(&b, &a) { b } else { a })
            .expect("at least one completion")
    };

    let m = Matching::from_partner(best.2.iter().map(|p| p.map(AgentId)).collect());
    assert_weakly_stable(profile, &m, "exact_max_smti");
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FptasCase {
    ExactByEnumeration,
    ApproxSuffices,
}

/// Run report of the approximation scheme: which case fired and the exact
/// rational data behind the branch decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseReport {
    pub case: FptasCase,
    pub epsilon: Epsilon,
    pub clamped: bool,
    pub tau: usize,
    pub approx_size: usize,
    pub result_size: usize,
    /// Case threshold eps*tau/(1-eps) as an exact fraction (numerator,
    /// denominator); the branch tests |M|*den < num.
    pub threshold: (u64, u64),
    /// In the enumeration case, the derived optimum bound 3|M|/2 as a
    /// fraction.
    pub opt_upper_bound: Option<(u64, u64)>,
}

/// Approximation scheme for maximum weakly stable matching, parameterized by
/// the number tau of agents with ties. Runs the 2/3 approximation; if its
/// size is below eps*tau/(1-eps) the optimum is small enough to solve exactly
/// by tie-break enumeration, otherwise the approximate matching is already an
/// eps-approximation because a stable matching misses the maximum matching by
/// at most tau pairs.
pub fn fptas_max_smti(
    profile: &PreferenceProfile,
    config: FptAsConfig,
    budget: Option<u128>,
) -> Result<(Matching, CaseReport), MaxSmtiError> {
    require_marriage(profile)?;
    let eps = config.epsilon;
    let approx = approx_two_thirds(profile)?;
    let tau = TieStatistics::of(profile).tau;

    let threshold = (tau as u64 * eps.num(), eps.den() - eps.num());
    let case_one = (approx.size() as u128) * (threshold.1 as u128) < threshold.0 as u128;

    if case_one {
        let exact = exact_max_smti(profile, budget)?;
        let report = CaseReport {
            case: FptasCase::ExactByEnumeration,
            epsilon: eps,
            clamped: config.clamped,
            tau,
            approx_size: approx.size(),
            result_size: exact.size(),
            threshold,
            opt_upper_bound: Some((3 * approx.size() as u64, 2)),
        };
        Ok((exact, report))
    } else {
        let report = CaseReport {
            case: FptasCase::ApproxSuffices,
            epsilon: eps,
            clamped: config.clamped,
            tau,
            approx_size: approx.size(),
            result_size: approx.size(),
            threshold,
            opt_upper_bound: None,
        };
        Ok((approx, report))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    Cycle,
    EvenPath,
    OddPath,
}

/// One connected component of a symmetric difference of two matchings: an
/// alternating path or cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffComponent {
    /// Path components list their vertices end to end; cycles start at their
    /// smallest vertex.
    pub vertices: Vec<AgentId>,
    pub kind: ComponentKind,
    pub edges_first: usize,
    pub edges_second: usize,
}

impl DiffComponent {
    /// Matched-pair advantage of the first matching on this component:
    /// 0 for cycles and even paths, +-1 for odd paths.
    pub fn advantage(&self) -> i64 {
        self.edges_first as i64 - self.edges_second as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffDecomposition {
    pub components: Vec<DiffComponent>,
}

impl DiffDecomposition {
    pub fn total_advantage(&self) -> i64 {
        self.components.iter().map(DiffComponent::advantage).sum()
    }

    /// Components where the second matching matches one extra pair.
    pub fn second_advantaged_odd_paths(&self) -> usize {
        self.components
            .iter()
            .filter(|c| c.advantage() == -1)
            .count()
    }
}

/// Decomposes m1 symmetric-difference m2 into alternating paths and cycles.
/// Both matchings must be valid for the profile.
pub fn diff_decompose(
    profile: &PreferenceProfile,
    m1: &Matching,
    m2: &Matching,
) -> DiffDecomposition {
    let n = profile.n();
    assert_eq!(m1.n(), n, "first matching fits profile");
    assert_eq!(m2.n(), n, "second matching fits profile");

    // Per vertex, its diff neighbors: partner in m1 (if differing) and in m2.
    let diff_partner = |m: &Matching, other: &Matching, v: usize| -> Option<usize> {
        let p = m.partner(AgentId(v))?;
        if other.partner(AgentId(v)) == Some(p) {
            None
        } else {
            Some(p.idx())
        }
    };

    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let n1 = diff_partner(m1, m2, start);
        let n2 = diff_partner(m2, m1, start);
        let degree = usize::from(n1.is_some()) + usize::from(n2.is_some());
        if degree == 0 {
            continue;
        }
        if degree == 2 {
            continue; // interior vertex; handled from an endpoint or as a cycle
        }
        // Path starting at `start`.
        let mut vertices = vec![AgentId(start)];
        let mut edges_first = 0;
        let mut edges_second = 0;
        seen[start] = true;
        let mut prev = start;
        let mut use_first = n1.is_some();
        let mut cur = n1.or(n2).expect("degree is 1");
        loop {
            if use_first {
                edges_first += 1;
            } else {
                edges_second += 1;
            }
            vertices.push(AgentId(cur));
            seen[cur] = true;
            let next = if use_first {
                diff_partner(m2, m1, cur)
            } else {
                diff_partner(m1, m2, cur)
            };
            match next {
                Some(x) if x != prev => {
                    prev = cur;
                    cur = x;
                    use_first = !use_first;
                }
                _ => break,
            }
        }
        let total = edges_first + edges_second;
        let kind = if total % 2 == 0 {
            ComponentKind::EvenPath
        } else {
            ComponentKind::OddPath
        };
        // Canonical orientation: smaller endpoint first.
        if vertices.last() < vertices.first() {
            vertices.reverse();
        }
        components.push(DiffComponent {
            vertices,
            kind,
            edges_first,
            edges_second,
        });
    }

    // Remaining unseen diff vertices lie on cycles.
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let n1 = diff_partner(m1, m2, start);
        if n1.is_none() && diff_partner(m2, m1, start).is_none() {
            continue;
        }
        let mut vertices = vec![AgentId(start)];
        let mut edges_first = 0;
        let mut edges_second = 0;
        seen[start] = true;
        let mut use_first = n1.is_some();
        let mut cur = n1
            .or_else(|| diff_partner(m2, m1, start))
            .expect("cycle vertex has degree 2");
        loop {
            if use_first {
                edges_first += 1;
            } else {
                edges_second += 1;
            }
            if cur == start {
                break;
            }
            vertices.push(AgentId(cur));
            seen[cur] = true;
            use_first = !use_first;
            let next = if use_first {
                diff_partner(m1, m2, cur)
            } else {
                diff_partner(m2, m1, cur)
            };
            cur = next.expect("cycle closes");
        }
        components.push(DiffComponent {
            vertices,
            kind: ComponentKind::Cycle,
            edges_first,
            edges_second,
        });
    }

    components.sort_by_key(|c| c.vertices.iter().min().copied());
    DiffDecomposition { components }
}

/// Check of the structural bound |M*| <= |M| + tau for a stable matching M,
/// where M* is a maximum matching of the acceptability graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim4Report {
    pub holds: bool,
    pub stable_size: usize,
    pub max_size: usize,
    pub tau: usize,
    /// Odd-path components of M diff M* on which M* matches one extra pair.
    pub max_advantaged_odd_paths: usize,
}

pub fn verify_claim4(
    profile: &PreferenceProfile,
    m: &Matching,
) -> Result<Claim4Report, MaxSmtiError> {
    let stable = crate::model::is_stable(profile, m).map_err(|_| MaxSmtiError::NotStable)?;
    if !stable {
        return Err(MaxSmtiError::NotStable);
    }
    let m_star = max_graph_matching(profile);
    let tau = TieStatistics::of(profile).tau;
    let diff = diff_decompose(profile, m, &m_star);
    Ok(Claim4Report {
        holds: m_star.size() <= m.size() + tau,
        stable_size: m.size(),
        max_size: m_star.size(),
        tau,
        max_advantaged_odd_paths: diff.second_advantaged_odd_paths(),
    })
}
