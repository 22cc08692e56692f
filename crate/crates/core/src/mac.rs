//! Reservation phase: codeword collision detection and resolution.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::linalg::{self, CVector};

/// Probability that `u` uniform picks among `m` codewords are pairwise distinct.
pub fn p_unique_exact(m: usize, u: usize) -> f64 {
    if u > m {
        return 0.0;
    }
    (0..u).map(|i| (m - i) as f64 / m as f64).product()
}

/// Probability of at least one codeword collision under uniform picks.
pub fn collision_prob_exact(m: usize, u: usize) -> f64 {
    1.0 - p_unique_exact(m, u)
}

/// `exp(-u(u-1) / 2m)`, the birthday approximation of [`p_unique_exact`] for `m >> u`.
pub fn p_unique_asymptotic(m: usize, u: usize) -> f64 {
    let u = u as f64;
    (-u * (u - 1.0) / (2.0 * m as f64)).exp()
}

pub fn collision_prob_asymptotic(m: usize, u: usize) -> f64 {
    1.0 - p_unique_asymptotic(m, u)
}

/// Energy-detector false-alarm target on empty codewords.
pub const FALSE_ALARM: f64 = 1e-3;
/// Collided/single boundary as a multiple of the median single-user energy.
pub const COLLISION_FACTOR: f64 = 2.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Occupancy {
    Empty,
    Single,
    Collided,
}

impl Occupancy {
    fn of_count(n: usize) -> Self {
        match n {
            0 => Occupancy::Empty,
            1 => Occupancy::Single,
            _ => Occupancy::Collided,
        }
    }
}

/// Two-threshold classifier on `E_k = |q_k^H y|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyDetector {
    pub tau_empty: f64,
    pub tau_collision: f64,
}

impl EnergyDetector {
    /// `tau_empty = sigma^2 ln(1/p_fa)`; `tau_collision` is 2.5x the median of
    /// single-user reservation energies from a calibration run.
    pub fn calibrate(noise_power: f64, single_user_energies: &[f64]) -> Result<Self> {
        if single_user_energies.is_empty() {
            return Err(Error::invalid("calibration needs at least one single-user energy"));
        }
        let mut sorted = single_user_energies.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
        Ok(EnergyDetector {
            tau_empty: noise_power * (1.0 / FALSE_ALARM).ln(),
            tau_collision: COLLISION_FACTOR * median,
        })
    }

    pub fn classify(&self, energy: f64) -> Occupancy {
        if energy <= self.tau_empty {
            Occupancy::Empty
        } else if energy < self.tau_collision {
            Occupancy::Single
        } else {
            Occupancy::Collided
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Detection {
    /// Ground-truth grouping.
    Oracle,
    /// Synthesized reservation observations classified by energy.
    Energy(EnergyDetector),
}

/// Per-codeword energy-detection outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub energies: Vec<f64>,
    pub detected: Vec<Occupancy>,
    /// Codewords whose detected class differs from the truth.
    pub errors: usize,
}

/// Who claimed which codeword.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservationReport {
    /// Codeword index to claiming users, ascending user id.
    pub claims: BTreeMap<usize, Vec<usize>>,
    pub num_codewords: usize,
    pub energy: Option<EnergyReport>,
}

impl ReservationReport {
    /// Codewords claimed by two or more users.
    pub fn collision_groups(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.claims.iter().filter(|(_, v)| v.len() > 1).map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn has_collision(&self) -> bool {
        self.collision_groups().next().is_some()
    }

    /// Number of users that share their codeword with someone.
    pub fn collided_users(&self) -> usize {
        self.collision_groups().map(|(_, v)| v.len()).sum()
    }

    pub fn num_users(&self) -> usize {
        self.claims.values().map(Vec::len).sum()
    }

    /// Codewords nobody claimed, ascending.
    pub fn free_codewords(&self) -> Vec<usize> {
        (0..self.num_codewords).filter(|k| !self.claims.contains_key(k)).collect()
    }
}

/// Group claims and, in energy mode, synthesize and classify the reservation observations.
///
/// `claims[u]` is user `u`'s codeword. Energy mode needs every user's
/// effective channel and power: claimants of codeword `k` superpose
/// coherently with unit pilot symbols on their own mini-slot, plus
/// `CN(0, noise_power I)` noise.
pub fn detect_collisions<R: Rng + ?Sized>(
    claims: &[usize],
    book: &Codebook,
    detection: Detection,
    reservation: Option<(&[CVector], &[f64])>,
    noise_power: f64,
    rng: &mut R,
) -> Result<ReservationReport> {
    let m = book.size();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (user, &k) in claims.iter().enumerate() {
        if k >= m {
            return Err(Error::invalid(format!("user {user} claims codeword {k} of {m}")));
        }
        groups.entry(k).or_default().push(user);
    }
    let energy = match detection {
        Detection::Oracle => None,
        Detection::Energy(det) => {
            let (channels, powers) =
                reservation.ok_or_else(|| Error::invalid("energy detection needs effective channels and powers"))?;
            if channels.len() != claims.len() || powers.len() != claims.len() {
                return Err(Error::invalid("one effective channel and power per user required"));
            }
            let mut energies = Vec::with_capacity(m);
            let mut detected = Vec::with_capacity(m);
            let mut errors = 0;
            for k in 0..m {
                let mut y = if noise_power > 0.0 {
                    linalg::complex_gaussian(m, 1, rng).column(0) * Complex64::new(noise_power.sqrt(), 0.0)
                } else {
                    CVector::zeros(m)
                };
                let members = groups.get(&k).map(Vec::as_slice).unwrap_or(&[]);
                for &u in members {
                    y += &channels[u] * Complex64::new(powers[u].sqrt(), 0.0);
                }
                let e = book.codeword(k).dotc(&y).norm_sqr();
                let class = det.classify(e);
                errors += (class != Occupancy::of_count(members.len())) as usize;
                energies.push(e);
                detected.push(class);
            }
            Some(EnergyReport { energies, detected, errors })
        }
    };
    Ok(ReservationReport { claims: groups, num_codewords: m, energy })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Colliding users stay silent this slot.
    #[default]
    Deferral,
    /// One keeper stays; the others reselect among unclaimed codewords on their own.
    UeReselect,
    /// One keeper stays; the BS hands the others random unclaimed codewords.
    BsReassign,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Deferral => "deferral",
            PolicyKind::UeReselect => "ue_reselect",
            PolicyKind::BsReassign => "bs_reassign",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "deferral" => Ok(PolicyKind::Deferral),
            "ue_reselect" => Ok(PolicyKind::UeReselect),
            "bs_reassign" => Ok(PolicyKind::BsReassign),
            other => Err(Error::Config(format!("unknown collision policy {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KeeperRule {
    /// Uniformly random member keeps the codeword.
    #[default]
    Arbitrary,
    /// The member with the strongest reservation signal keeps it.
    MaxPower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct CollisionPolicy {
    pub kind: PolicyKind,
    pub keeper: KeeperRule,
}

impl CollisionPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        CollisionPolicy { kind, keeper: KeeperRule::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UserStatus {
    Clear,
    Deferred,
    Reselected,
    Reassigned,
    Failed,
}

impl UserStatus {
    /// Whether the user's data is decoded this slot.
    pub fn is_served(self) -> bool {
        matches!(self, UserStatus::Clear | UserStatus::Reselected | UserStatus::Reassigned)
    }
}

/// Per-user result of collision handling.
///
/// A failed user whose reselection collided keeps transmitting on that
/// codeword (`final_index` is `Some`) and interferes with others; a failed user
/// with no codeword left and every deferred user stays silent.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionOutcome {
    pub status: Vec<UserStatus>,
    pub final_index: Vec<Option<usize>>,
}

impl ResolutionOutcome {
    /// Served users hold pairwise distinct codewords.
    pub fn check_uniqueness(&self) -> Result<()> {
        let mut used = std::collections::BTreeSet::new();
        for (u, (s, k)) in self.status.iter().zip(&self.final_index).enumerate() {
            if s.is_served() {
                let k = k.ok_or_else(|| Error::InvalidState(format!("served user {u} has no codeword")))?;
                if !used.insert(k) {
                    return Err(Error::InvalidState(format!("codeword {k} served twice")));
                }
            }
        }
        Ok(())
    }

    pub fn count(&self, status: UserStatus) -> usize {
        self.status.iter().filter(|&&s| s == status).count()
    }
}

fn pick_keeper<R: Rng + ?Sized>(members: &[usize], rule: KeeperRule, powers: Option<&[f64]>, rng: &mut R) -> usize {
    match (rule, powers) {
        (KeeperRule::MaxPower, Some(p)) => {
            let mut best = members[0];
            for &u in &members[1..] {
                if p[u] > p[best] {
                    best = u;
                }
            }
            best
        }
        _ => members[rng.random_range(0..members.len())],
    }
}

/// Apply a collision policy.
///
/// `reselect(user, free)` is the user's own choice among the unclaimed
/// codewords `free` (nonempty, ascending); only `UeReselect` calls it.
/// `powers` feeds [`KeeperRule::MaxPower`].
pub fn resolve<R, F>(
    report: &ReservationReport,
    policy: CollisionPolicy,
    mut reselect: F,
    powers: Option<&[f64]>,
    rng: &mut R,
) -> Result<ResolutionOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &[usize]) -> Result<usize>,
{
    let u = report.num_users();
    let mut status = vec![UserStatus::Clear; u];
    let mut final_index = vec![None; u];
    for (&k, members) in &report.claims {
        for &user in members {
            if user >= u {
                return Err(Error::InvalidState(format!("user id {user} out of range")));
            }
            final_index[user] = Some(k);
        }
    }
    if let (KeeperRule::MaxPower, Some(p)) = (policy.keeper, powers) {
        if p.len() != u {
            return Err(Error::invalid("one power per user required"));
        }
    }

    let free = report.free_codewords();
    let mut losers = Vec::new();
    for (_, members) in report.collision_groups() {
        match policy.kind {
            PolicyKind::Deferral => {
                for &user in members {
                    status[user] = UserStatus::Deferred;
                    final_index[user] = None;
                }
            }
            PolicyKind::UeReselect | PolicyKind::BsReassign => {
                let keeper = pick_keeper(members, policy.keeper, powers, rng);
                losers.extend(members.iter().copied().filter(|&m| m != keeper));
            }
        }
    }

    match policy.kind {
        PolicyKind::Deferral => {}
        PolicyKind::UeReselect => {
            let mut second: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &user in &losers {
                if free.is_empty() {
                    status[user] = UserStatus::Failed;
                    final_index[user] = None;
                    continue;
                }
                let k = reselect(user, &free)?;
                if free.binary_search(&k).is_err() {
                    return Err(Error::InvalidState(format!("user {user} reselected occupied codeword {k}")));
                }
                second.entry(k).or_default().push(user);
            }
            for (k, members) in second {
                let outcome = if members.len() == 1 { UserStatus::Reselected } else { UserStatus::Failed };
                for user in members {
                    status[user] = outcome;
                    final_index[user] = Some(k);
                }
            }
        }
        PolicyKind::BsReassign => {
            let mut pool = free.clone();
            pool.shuffle(rng);
            losers.shuffle(rng);
            for (i, &user) in losers.iter().enumerate() {
                match pool.get(i) {
                    Some(&k) => {
                        status[user] = UserStatus::Reassigned;
                        final_index[user] = Some(k);
                    }
                    None => {
                        status[user] = UserStatus::Failed;
                        final_index[user] = None;
                    }
                }
            }
        }
    }

    let outcome = ResolutionOutcome { status, final_index };
    outcome.check_uniqueness()?;
    Ok(outcome)
}
