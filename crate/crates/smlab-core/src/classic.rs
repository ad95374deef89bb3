//! Baseline exact algorithms and brute-force oracles: Gale-Shapley,
//! Irving's roommates algorithm, exhaustive stable-matching enumeration and
//! maximum-cardinality matching on general graphs.

use std::collections::VecDeque;

use thiserror::Error;

use crate::model::{blocking_pairs, AgentId, Kind, Matching, PreferenceProfile, Side};

/// Default agent cap for the exhaustive enumerators.
pub const DEFAULT_ENUM_CAP: usize = 10;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("preferences contain ties")]
    TiesPresent,
    #[error("operation requires a {expected:?} profile")]
    WrongKind { expected: Kind },
    #[error("instance too large for exhaustive enumeration (n = {n}, cap = {cap})")]
    TooLarge { n: usize, cap: usize },
}

/// Deferred-acceptance on a strict marriage profile. Proposers are the agents
/// of `proposing` side, processed in ascending index; the result is the
/// proposer-optimal stable matching.
pub fn gale_shapley(profile: &PreferenceProfile, proposing: Side) -> Result<Matching, SolverError> {
    if profile.kind() != Kind::Marriage {
        return Err(SolverError::WrongKind {
            expected: Kind::Marriage,
        });
    }
    if !profile.is_strict() {
        return Err(SolverError::TiesPresent);
    }
    let n = profile.n();
    let entries: Vec<Vec<AgentId>> = profile
        .agents()
        .map(|a| profile.list(a).entries().collect())
        .collect();
    let mut partner: Vec<Option<AgentId>> = vec![None; n];
    let mut next = vec![0usize; n];
    let mut free: VecDeque<usize> = (0..n)
        .filter(|&i| profile.side(AgentId(i)) == Some(proposing))
        .collect();

    while let Some(p) = free.pop_front() {
        while next[p] < entries[p].len() {
            let w = entries[p][next[p]];
            next[p] += 1;
            match partner[w.idx()] {
                None => {
                    partner[w.idx()] = Some(AgentId(p));
                    partner[p] = Some(w);
                    break;
                }
                Some(q) => {
                    if profile.prefers(w, AgentId(p), q) {
                        partner[q.idx()] = None;
                        free.push_back(q.idx());
                        partner[w.idx()] = Some(AgentId(p));
                        partner[p] = Some(w);
                        break;
                    }
                }
            }
        }
    }
    Ok(Matching::from_partner(partner))
}

/// Mutable phase table for Irving's algorithm: per-agent remaining lists with
/// symmetric deletion. Successor tests use the immutable profile ranks.
struct Table<'a> {
    profile: &'a PreferenceProfile,
    lists: Vec<Vec<usize>>,
}

impl<'a> Table<'a> {
    fn new(profile: &'a PreferenceProfile) -> Table<'a> {
        Table {
            profile,
            lists: profile
                .agents()
                .map(|a| profile.list(a).entries().map(AgentId::idx).collect())
                .collect(),
        }
    }

    fn delete(&mut self, x: usize, y: usize) {
        self.lists[x].retain(|&z| z != y);
        self.lists[y].retain(|&z| z != x);
    }

    /// Delete every remaining entry of y's list strictly worse than `keep`.
    /// Returns the deleted agents.
    fn reject_worse_than(&mut self, y: usize, keep: usize) -> Vec<usize> {
        let keep_rank = self.profile.rank(AgentId(y), AgentId(keep)).unwrap();
        let worse: Vec<usize> = self.lists[y]
            .iter()
            .copied()
            .filter(|&w| self.profile.rank(AgentId(y), AgentId(w)).unwrap() > keep_rank)
            .collect();
        for w in &worse {
            self.delete(y, *w);
        }
        worse
    }
}

/// Irving's algorithm for strict roommates instances with incomplete lists.
/// Returns `None` when no stable matching exists. The final candidate is
/// re-checked against the blocking oracle, so a `Some` answer is always a
/// certified stable matching.
pub fn irving_sri(profile: &PreferenceProfile) -> Result<Option<Matching>, SolverError> {
    if profile.kind() != Kind::Roommates {
        return Err(SolverError::WrongKind {
            expected: Kind::Roommates,
        });
    }
    if !profile.is_strict() {
        return Err(SolverError::TiesPresent);
    }
    let n = profile.n();
    let mut table = Table::new(profile);

    // Phase 1: proposals. holds[y] = proposer y currently keeps.
    let mut holds: Vec<Option<usize>> = vec![None; n];
    let mut free: VecDeque<usize> = (0..n).collect();
    while let Some(x) = free.pop_front() {
        if holds.iter().any(|h| *h == Some(x)) {
            continue; // re-queued but re-engaged meanwhile
        }
        loop {
            let Some(&y) = table.lists[x].first() else {
                break; // exhausted: x stays unmatched
            };
            match holds[y] {
                Some(z) if !profile.prefers(AgentId(y), AgentId(x), AgentId(z)) => {
                    table.delete(x, y);
                }
                prev => {
                    holds[y] = Some(x);
                    for w in table.reject_worse_than(y, x) {
                        if Some(w) == prev {
                            free.push_back(w);
                        }
                    }
                    debug_assert!(prev.map_or(true, |z| !table.lists[z].contains(&y)));
                    break;
                }
            }
        }
    }

    // Phase 2: rotation elimination. In the reduced table the head of x's
    // list is the agent holding x, and x is the last entry of that agent's
    // list. Follow second/last pointers to expose a rotation, then let each
    // rotation receiver reject everyone worse than its new proposer.
    loop {
        let Some(start) = (0..n).find(|&x| table.lists[x].len() >= 2) else {
            break;
        };
        let mut seq: Vec<usize> = vec![start];
        let mut pos_of = vec![usize::MAX; n];
        pos_of[start] = 0;
        let rotation = loop {
            let a = *seq.last().unwrap();
            if table.lists[a].len() < 2 {
                // Table invariant broken; no exposed rotation reachable.
                debug_assert!(false, "irving: rotation chase hit a short list");
                break None;
            }
            let y = table.lists[a][1];
            let Some(&nxt) = table.lists[y].last() else {
                debug_assert!(false, "irving: rotation chase hit an empty list");
                break None;
            };
            if pos_of[nxt] != usize::MAX {
                break Some(seq[pos_of[nxt]..].to_vec());
            }
            pos_of[nxt] = seq.len();
            seq.push(nxt);
        };
        let Some(rotation) = rotation else {
            return finish_irving(profile, &table);
        };
        let receivers: Vec<usize> = rotation.iter().map(|&a| table.lists[a][1]).collect();
        for (&a, &y) in rotation.iter().zip(&receivers) {
            table.reject_worse_than(y, a);
        }
    }
    finish_irving(profile, &table)
}

fn finish_irving(
    profile: &PreferenceProfile,
    table: &Table<'_>,
) -> Result<Option<Matching>, SolverError> {
    let n = profile.n();
    let mut pairs = Vec::new();
    for x in 0..n {
        match table.lists[x].as_slice() {
            [] => {}
            &[y] => {
                if table.lists[y].as_slice() != [x] {
                    return Ok(None);
                }
                if x < y {
                    pairs.push((AgentId(x), AgentId(y)));
                }
            }
            _ => return Ok(None),
        }
    }
    let m = Matching::new(profile, &pairs).expect("table pairs are acceptability edges");
    if blocking_pairs(profile, &m).expect("matching fits profile").is_empty() {
        Ok(Some(m))
    } else {
        Ok(None)
    }
}

/// Calls `visit` with every matching of the graph given by adjacency lists,
/// as a partner vector. Agents are decided in ascending index order, so the
/// visit order is deterministic.
pub fn for_each_matching(adj: &[Vec<usize>], visit: &mut impl FnMut(&[Option<usize>])) {
    let n = adj.len();
    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut decided = vec![false; n];
    fn rec(
        from: usize,
        adj: &[Vec<usize>],
        partner: &mut Vec<Option<usize>>,
        decided: &mut Vec<bool>,
        visit: &mut impl FnMut(&[Option<usize>]),
    ) {
        let Some(i) = (from..adj.len()).find(|&i| !decided[i]) else {
            visit(partner);
            return;
        };
        decided[i] = true;
        rec(i + 1, adj, partner, decided, visit); // i stays unmatched
        for &j in &adj[i] {
            if !decided[j] {
                decided[j] = true;
                partner[i] = Some(j);
                partner[j] = Some(i);
                rec(i + 1, adj, partner, decided, visit);
                partner[i] = None;
                partner[j] = None;
                decided[j] = false;
            }
        }
        decided[i] = false;
    }
    rec(0, adj, &mut partner, &mut decided, visit);
}

pub(crate) fn adjacency(profile: &PreferenceProfile) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); profile.n()];
    for &(a, b) in profile.edges() {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

fn partner_vec_to_matching(partner: &[Option<usize>]) -> Matching {
    Matching::from_partner(partner.iter().map(|p| p.map(AgentId)).collect())
}

/// Brute-force oracle: every stable matching of the instance, by exhaustive
/// enumeration over all matchings of the acceptability graph. Results are in
/// canonical (sorted pair list) order.
pub fn enumerate_stable_matchings(
    profile: &PreferenceProfile,
    cap: Option<usize>,
) -> Result<Vec<Matching>, SolverError> {
    let cap = cap.unwrap_or(DEFAULT_ENUM_CAP);
    if profile.n() > cap {
        return Err(SolverError::TooLarge {
            n: profile.n(),
            cap,
        });
    }
    let adj = adjacency(profile);
    let mut out = Vec::new();
    for_each_matching(&adj, &mut |partner| {
        let m = partner_vec_to_matching(partner);
        if blocking_pairs(profile, &m).expect("enumerated matching fits profile").is_empty() {
            out.push(m);
        }
    });
    out.sort_by_key(Matching::pairs);
    Ok(out)
}

/// Maximum-cardinality matching of the acceptability graph (stability is
/// ignored). Augmenting-path search with blossom contraction, so roommates
/// instances with odd cycles are handled.
pub fn max_graph_matching(profile: &PreferenceProfile) -> Matching {
    let n = profile.n();
    let adj = adjacency(profile);
    let mut mate: Vec<Option<usize>> = vec![None; n];
    for root in 0..n {
        if mate[root].is_none() {
            augment(root, &adj, &mut mate);
        }
    }
    Matching::from_partner(mate.iter().map(|p| p.map(AgentId)).collect())
}

/// One BFS phase of the blossom algorithm: grows an alternating tree from
/// `root`, contracting odd cycles at their base, and flips the augmenting
/// path if an exposed vertex is reached.
fn augment(root: usize, adj: &[Vec<usize>], mate: &mut [Option<usize>]) -> bool {
    let n = adj.len();
    let mut parent = vec![usize::MAX; n];
    let mut base: Vec<usize> = (0..n).collect();
    let mut used = vec![false; n];
    let mut queue = VecDeque::new();
    used[root] = true;
    queue.push_back(root);

    fn lca(
        mut a: usize,
        mut b: usize,
        base: &[usize],
        parent: &[usize],
        mate: &[Option<usize>],
    ) -> usize {
        let mut on_path = vec![false; base.len()];
        loop {
            a = base[a];
            on_path[a] = true;
            match mate[a] {
                None => break,
                Some(m) => {
                    if parent[m] == usize::MAX {
                        break;
                    }
                    a = parent[m];
                }
            }
        }
        loop {
            b = base[b];
            if on_path[b] {
                return b;
            }
            b = parent[mate[b].expect("interior tree vertex is matched")];
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn mark_path(
        mut v: usize,
        cur_base: usize,
        mut child: usize,
        base: &[usize],
        parent: &mut [usize],
        mate: &[Option<usize>],
        in_blossom: &mut [bool],
    ) {
        while base[v] != cur_base {
            let m = mate[v].expect("blossom path vertex is matched");
            in_blossom[base[v]] = true;
            in_blossom[base[m]] = true;
            parent[v] = child;
            child = m;
            v = parent[m];
        }
    }

    while let Some(v) = queue.pop_front() {
        for &to in &adj[v] {
            if base[v] == base[to] || mate[v] == Some(to) {
                continue;
            }
            if to == root || mate[to].map_or(false, |m| parent[m] != usize::MAX) {
                // Odd cycle: contract the blossom at its base.
                let cur_base = lca(v, to, &base, &parent, mate);
                let mut in_blossom = vec![false; n];
                mark_path(v, cur_base, to, &base, &mut parent, mate, &mut in_blossom);
                mark_path(to, cur_base, v, &base, &mut parent, mate, &mut in_blossom);
                for i in 0..n {
                    if in_blossom[base[i]] {
                        base[i] = cur_base;
                        if !used[i] {
                            used[i] = true;
                            queue.push_back(i);
                        }
                    }
                }
            } else if parent[to] == usize::MAX {
                parent[to] = v;
                match mate[to] {
                    None => {
                        // Exposed vertex: flip the alternating path back to root.
                        let mut u = to;
                        while u != usize::MAX {
                            let pv = parent[u];
                            let next = mate[pv];
                            mate[u] = Some(pv);
                            mate[pv] = Some(u);
                            u = match next {
                                Some(x) => x,
                                None => usize::MAX,
                            };
                        }
                        return true;
                    }
                    Some(m) => {
                        used[m] = true;
                        queue.push_back(m);
                    }
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::is_stable;

    fn strict_marriage(a_lists: Vec<Vec<usize>>, b_lists: Vec<Vec<usize>>) -> PreferenceProfile {
        let na = a_lists.len();
        let nb = b_lists.len();
        let names = (0..na)
            .map(|i| format!("m{i}"))
            .chain((0..nb).map(|i| format!("w{i}")))
            .collect();
        let sides = Some(
            std::iter::repeat(Side::A)
                .take(na)
                .chain(std::iter::repeat(Side::B).take(nb))
                .collect(),
        );
        let raw = a_lists
            .into_iter()
            .map(|l| l.into_iter().map(|w| vec![na + w]).collect())
            .chain(b_lists.into_iter().map(|l| l.into_iter().map(|m| vec![m]).collect()))
            .collect();
        PreferenceProfile::new(Kind::Marriage, names, sides, raw).unwrap()
    }

    fn strict_roommates(lists: Vec<Vec<usize>>) -> PreferenceProfile {
        let names = (0..lists.len()).map(|i| format!("a{i}")).collect();
        let raw = lists
            .into_iter()
            .map(|l| l.into_iter().map(|x| vec![x]).collect())
            .collect();
        PreferenceProfile::new(Kind::Roommates, names, None, raw).unwrap()
    }

    #[test]
    fn gale_shapley_hand_instance() {
        // m0: w0 > w1; m1: w0; w0: m1 > m0; w1: m0.
        let p = strict_marriage(vec![vec![0, 1], vec![0]], vec![vec![1, 0], vec![0]]);
        let m = gale_shapley(&p, Side::A).unwrap();
        assert_eq!(
            m.pairs(),
            vec![(AgentId(0), AgentId(3)), (AgentId(1), AgentId(2))]
        );
        assert!(is_stable(&p, &m).unwrap());
    }

    #[test]
    fn gale_shapley_single_pair() {
        let p = strict_marriage(vec![vec![0]], vec![vec![0]]);
        let m = gale_shapley(&p, Side::A).unwrap();
        assert_eq!(m.pairs(), vec![(AgentId(0), AgentId(1))]);
    }

    #[test]
    fn gale_shapley_rejects_ties_and_roommates() {
        let p = PreferenceProfile::new(
            Kind::Marriage,
            vec!["m".into(), "w0".into(), "w1".into()],
            Some(vec![Side::A, Side::B, Side::B]),
            vec![vec![vec![1, 2]], vec![vec![0]], vec![vec![0]]],
        )
        .unwrap();
        assert_eq!(gale_shapley(&p, Side::A), Err(SolverError::TiesPresent));
        let r = strict_roommates(vec![vec![1], vec![0]]);
        assert!(matches!(
            gale_shapley(&r, Side::A),
            Err(SolverError::WrongKind { .. })
        ));
    }

    #[test]
    fn irving_two_agents() {
        let p = strict_roommates(vec![vec![1], vec![0]]);
        let m = irving_sri(&p).unwrap().unwrap();
        assert_eq!(m.pairs(), vec![(AgentId(0), AgentId(1))]);
    }

    #[test]
    fn irving_no_stable_instance() {
        // a: b > c > d; b: c > a > d; c: a > b > d; d: a > b > c.
        let p = strict_roommates(vec![
            vec![1, 2, 3],
            vec![2, 0, 3],
            vec![0, 1, 3],
            vec![0, 1, 2],
        ]);
        assert_eq!(irving_sri(&p).unwrap(), None);
        assert!(enumerate_stable_matchings(&p, None).unwrap().is_empty());
    }

    #[test]
    fn irving_stable_four_agents() {
        // Mutual first choices {a,b} and {c,d}.
        let p = strict_roommates(vec![
            vec![1, 2, 3],
            vec![0, 2, 3],
            vec![3, 0, 1],
            vec![2, 0, 1],
        ]);
        let m = irving_sri(&p).unwrap().unwrap();
        assert_eq!(
            m.pairs(),
            vec![(AgentId(0), AgentId(1)), (AgentId(2), AgentId(3))]
        );
        assert!(is_stable(&p, &m).unwrap());
    }

    #[test]
    fn enumerate_one_edge() {
        let p = strict_roommates(vec![vec![1], vec![0]]);
        let all = enumerate_stable_matchings(&p, None).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].pairs(), vec![(AgentId(0), AgentId(1))]);
    }

    #[test]
    fn enumerate_cap() {
        let p = strict_roommates((0..11).map(|_| vec![]).collect());
        assert!(matches!(
            enumerate_stable_matchings(&p, None),
            Err(SolverError::TooLarge { n: 11, cap: 10 })
        ));
    }

    #[test]
    fn max_matching_path_and_triangle() {
        // Path a-b-c-d.
        let p = strict_roommates(vec![vec![1], vec![0, 2], vec![1, 3], vec![2]]);
        assert_eq!(max_graph_matching(&p).size(), 2);
        // Triangle.
        let t = strict_roommates(vec![vec![1, 2], vec![0, 2], vec![0, 1]]);
        assert_eq!(max_graph_matching(&t).size(), 1);
    }

    #[test]
    fn max_matching_blossom_case() {
        // Two triangles joined by a bridge: 0-1-2-0, 3-4-5-3, bridge 2-3.
        let p = strict_roommates(vec![
            vec![1, 2],
            vec![0, 2],
            vec![0, 1, 3],
            vec![2, 4, 5],
            vec![3, 5],
            vec![3, 4],
        ]);
        assert_eq!(max_graph_matching(&p).size(), 3);
    }

    #[test]
    fn max_matching_agrees_with_bruteforce() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in 2..=9usize {
            for _ in 0..30 {
                let mut lists = vec![Vec::new(); n];
                for a in 0..n {
                    for b in a + 1..n {
                        if rng.gen_bool(0.45) {
                            lists[a].push(b);
                            lists[b].push(a);
                        }
                    }
                }
                let p = strict_roommates(lists);
                let blossom = max_graph_matching(&p);
                let mut best = 0usize;
                for_each_matching(&adjacency(&p), &mut |partner| {
                    best = best.max(partner.iter().flatten().count() / 2);
                });
                assert_eq!(blossom.size(), best, "n={n}");
            }
        }
    }
}
