//! Solvers for blocking-pair minimization: find a matching (of size at least
//! k in the marriage variant) with as few blocking pairs as possible.
//!
//! `minbp_exact_bruteforce` is the ground-truth oracle; `minbp_xp` decides a
//! blocking-pair budget by deleting candidate blocking sets and testing the
//! residual instance for a stable matching.

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use crate::classic::{gale_shapley, irving_sri, SolverError};
use crate::model::{
    blocking_pairs, AgentId, BlockingPair, Kind, Matching, PreferenceProfile, Side,
};

pub const DEFAULT_SMI_CAP: usize = 12;
pub const DEFAULT_SRI_CAP: usize = 10;
/// Upper bound on the number of candidate blocking sets `minbp_xp` will try.
pub const DEFAULT_XP_CEILING: u128 = 5_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MinBpError {
    #[error("instance too large for exhaustive search (n = {n}, cap = {cap})")]
    TooLarge { n: usize, cap: usize },
    #[error("no matching of size at least {k} exists")]
    Infeasible { k: usize },
    #[error("candidate blocking sets ({candidates}) exceed enumeration ceiling ({ceiling})")]
    BudgetTooLargeForEnumeration { candidates: u128, ceiling: u128 },
    #[error("size floor k = {k} out of range for {n} agents")]
    InvalidK { k: usize, n: usize },
    #[error("query needs a beta budget")]
    MissingBudget,
    #[error("blocking-pair queries require strict preferences")]
    TiesPresent,
    #[error("marriage queries need a marriage profile, roommates queries a roommates one")]
    WrongKind,
}

impl From<SolverError> for MinBpError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::TiesPresent => MinBpError::TiesPresent,
            SolverError::WrongKind { .. } => MinBpError::WrongKind,
            SolverError::TooLarge { n, cap } => MinBpError::TooLarge { n, cap },
        }
    }
}

/// A blocking-pair minimization query. Marriage queries carry the size floor
/// `k`; roommates queries do not. `beta_cap` is the budget for decision mode.
#[derive(Debug, Clone)]
pub struct MinBpQuery<'a> {
    pub profile: &'a PreferenceProfile,
    pub k: Option<usize>,
    pub beta_cap: Option<usize>,
}

impl<'a> MinBpQuery<'a> {
    pub fn smi(profile: &'a PreferenceProfile, k: usize) -> Self {
        MinBpQuery {
            profile,
            k: Some(k),
            beta_cap: None,
        }
    }

    pub fn sri(profile: &'a PreferenceProfile) -> Self {
        MinBpQuery {
            profile,
            k: None,
            beta_cap: None,
        }
    }

    pub fn with_beta_cap(mut self, beta_cap: usize) -> Self {
        self.beta_cap = Some(beta_cap);
        self
    }

    fn validate(&self) -> Result<(), MinBpError> {
        if !self.profile.is_strict() {
            return Err(MinBpError::TiesPresent);
        }
        match self.k {
            Some(k) => {
                if self.profile.kind() != Kind::Marriage {
                    return Err(MinBpError::WrongKind);
                }
                if 2 * k > self.profile.n() {
                    return Err(MinBpError::InvalidK {
                        k,
                        n: self.profile.n(),
                    });
                }
            }
            None => {
                if self.profile.kind() != Kind::Roommates {
                    return Err(MinBpError::WrongKind);
                }
            }
        }
        Ok(())
    }

    fn size_floor(&self) -> usize {
        self.k.unwrap_or(0)
    }

    fn default_cap(&self) -> usize {
        if self.k.is_some() {
            DEFAULT_SMI_CAP
        } else {
            DEFAULT_SRI_CAP
        }
    }
}

/// A solution with its independently recomputable evidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinBpCertificate {
    pub matching: Matching,
    pub blocking: Vec<BlockingPair>,
    pub objective: usize,
}

impl MinBpCertificate {
    fn build(profile: &PreferenceProfile, matching: Matching) -> MinBpCertificate {
        let blocking = blocking_pairs(profile, &matching).expect("certificate matching fits profile");
        MinBpCertificate {
            objective: blocking.len(),
            matching,
            blocking,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XpOutcome {
    Within(MinBpCertificate),
    NoWithinBudget,
}

fn pair_blocks(profile: &PreferenceProfile, partner: &[Option<usize>], a: usize, b: usize) -> bool {
    if partner[a] == Some(b) {
        return false;
    }
    let wants = |x: usize, y: usize| match partner[x] {
        None => true,
        Some(p) => profile.prefers(AgentId(x), AgentId(y), AgentId(p)),
    };
    wants(a, b) && wants(b, a)
}

struct BruteState<'a> {
    profile: &'a PreferenceProfile,
    adj: Vec<Vec<usize>>,
    k: usize,
    partner: Vec<Option<usize>>,
    decided: Vec<bool>,
    running_blocks: usize,
    matched_pairs: usize,
    best: Option<(usize, usize, Vec<(AgentId, AgentId)>, Matching)>,
}

impl BruteState<'_> {
    /// Blocking pairs that become fully decided when `x` is decided now.
    fn newly_decided_blocks(&self, x: usize, skip: Option<usize>) -> usize {
        self.adj[x]
            .iter()
            .filter(|&&y| Some(y) != skip && self.decided[y] && pair_blocks(self.profile, &self.partner, x, y))
            .count()
    }

    fn consider_leaf(&mut self) {
        if self.matched_pairs < self.k {
            return;
        }
        let m = Matching::from_partner(self.partner.iter().map(|p| p.map(AgentId)).collect());
        let key = (self.running_blocks, self.matched_pairs, m.pairs());
        let better = match &self.best {
            None => true,
            Some((obj, size, pairs, _)) => key < (*obj, *size, pairs.clone()),
        };
        if better {
            self.best = Some((key.0, key.1, key.2, m));
        }
    }

    fn rec(&mut self, from: usize) {
        // Prune on the blocking count of fully decided pairs (it can only
        // grow) and on size feasibility.
        if let Some((best_obj, _, _, _)) = &self.best {
            if self.running_blocks > *best_obj {
                return;
            }
        }
        let undecided = self.decided.iter().filter(|d| !**d).count();
        if self.matched_pairs + undecided / 2 < self.k {
            return;
        }
        let Some(i) = (from..self.profile.n()).find(|&i| !self.decided[i]) else {
            self.consider_leaf();
            return;
        };

        // Branch: i stays unmatched.
        self.decided[i] = true;
        let add = self.newly_decided_blocks(i, None);
        self.running_blocks += add;
        self.rec(i + 1);
        self.running_blocks -= add;

        // Branch: i matched to each undecided neighbor.
        for jx in 0..self.adj[i].len() {
            let j = self.adj[i][jx];
            if self.decided[j] {
                continue;
            }
            self.partner[i] = Some(j);
            self.partner[j] = Some(i);
            self.decided[j] = true;
            self.matched_pairs += 1;
            let add = self.newly_decided_blocks(i, Some(j)) + self.newly_decided_blocks(j, Some(i));
            self.running_blocks += add;
            self.rec(i + 1);
            self.running_blocks -= add;
            self.matched_pairs -= 1;
            self.decided[j] = false;
            self.partner[i] = None;
            self.partner[j] = None;
        }
        self.decided[i] = false;
    }
}

/// Exhaustive minimum-blocking-pair search with branch-and-bound pruning.
/// Ties are broken by (objective, size, lexicographic pair list).
pub fn minbp_exact_bruteforce(
    query: &MinBpQuery<'_>,
    cap: Option<usize>,
) -> Result<MinBpCertificate, MinBpError> {
    query.validate()?;
    let profile = query.profile;
    let cap = cap.unwrap_or_else(|| query.default_cap());
    if profile.n() > cap {
        return Err(MinBpError::TooLarge {
            n: profile.n(),
            cap,
        });
    }
    let mut state = BruteState {
        profile,
        adj: crate::classic::adjacency(profile),
        k: query.size_floor(),
        partner: vec![None; profile.n()],
        decided: vec![false; profile.n()],
        running_blocks: 0,
        matched_pairs: 0,
        best: None,
    };
    state.rec(0);
    match state.best {
        Some((_, _, _, matching)) => Ok(MinBpCertificate::build(profile, matching)),
        None => Err(MinBpError::Infeasible {
            k: query.size_floor(),
        }),
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut out: u128 = 1;
    for i in 0..k.min(n - k) {
        out = out * (n - i) as u128 / (i + 1) as u128;
    }
    out
}

/// Stable matching of the residual instance, if any. For the marriage case
/// the matched agent set is the same in every stable matching, so one
/// Gale-Shapley run decides the size constraint for this residual.
fn residual_stable(
    residual: &PreferenceProfile,
    marriage: bool,
) -> Result<Option<Matching>, MinBpError> {
    if marriage {
        Ok(Some(gale_shapley(residual, Side::A)?))
    } else {
        Ok(irving_sri(residual)?)
    }
}

/// Decides whether a matching with at most `beta_cap` blocking pairs (and
/// size at least k, for marriage queries) exists. Candidate blocking sets are
/// tried in size-then-lexicographic order; the first feasible set yields the
/// witness, so smaller budgets were already ruled out and the certificate
/// objective equals the optimum whenever it is within the budget.
pub fn minbp_xp(query: &MinBpQuery<'_>, ceiling: Option<u128>) -> Result<XpOutcome, MinBpError> {
    query.validate()?;
    let beta_cap = query.beta_cap.ok_or(MinBpError::MissingBudget)?;
    let profile = query.profile;
    let k = query.size_floor();
    let marriage = query.k.is_some();

    if crate::classic::max_graph_matching(profile).size() < k {
        return Err(MinBpError::Infeasible { k });
    }

    let m_edges = profile.edges().len();
    let ceiling = ceiling.unwrap_or(DEFAULT_XP_CEILING);
    let candidates: u128 = (0..=beta_cap.min(m_edges)).map(|s| binomial(m_edges, s)).sum();
    if candidates > ceiling {
        return Err(MinBpError::BudgetTooLargeForEnumeration {
            candidates,
            ceiling,
        });
    }

    let edges: Vec<(AgentId, AgentId)> = profile
        .edges()
        .iter()
        .map(|&(a, b)| (AgentId(a), AgentId(b)))
        .collect();

    for s in 0..=beta_cap.min(m_edges) {
        let combos: Vec<Vec<usize>> = (0..m_edges).combinations(s).collect();
        let hit = combos
            .par_iter()
            .find_first(|combo| {
                let removed: Vec<(AgentId, AgentId)> = combo.iter().map(|&i| edges[i]).collect();
                let residual = profile.without_edges(&removed);
                match residual_stable(&residual, marriage) {
                    Ok(Some(m)) => m.size() >= k,
                    _ => false,
                }
            })
            .cloned();
        if let Some(combo) = hit {
            let removed: Vec<(AgentId, AgentId)> = combo.iter().map(|&i| edges[i]).collect();
            let residual = profile.without_edges(&removed);
            let m = residual_stable(&residual, marriage)?.expect("combo was feasible");
            let cert = MinBpCertificate::build(profile, m);
            debug_assert!(cert
                .blocking
                .iter()
                .all(|bp| removed.iter().any(|&(a, b)| {
                    (a, b) == (bp.a, bp.b) || (b, a) == (bp.a, bp.b)
                })));
            debug_assert_eq!(cert.objective, s);
            return Ok(XpOutcome::Within(cert));
        }
    }
    Ok(XpOutcome::NoWithinBudget)
}
