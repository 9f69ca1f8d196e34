//! Finite descriptions of a computably enumerable set.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("element {0} is listed twice")]
    DuplicateMember(u64),
    #[error("designated nonmember {0} is listed as a member")]
    NonmemberListed(u64),
    #[error("element {n} has enumeration time {t}, outside 1..={horizon}")]
    TimeOutOfRange { n: u64, t: u64, horizon: u64 },
    #[error("horizon must be positive")]
    ZeroHorizon,
}

/// Elements `n` with the stage `t_n` at which they are enumerated, plus one
/// designated element `m0` that is never enumerated.
#[derive(Clone, PartialEq, Eq)]
pub struct CeInstance {
    members: BTreeMap<u64, u64>,
    nonmember: u64,
    horizon: u64,
}

impl CeInstance {
    pub fn new(
        members: impl IntoIterator<Item = (u64, u64)>,
        nonmember: u64,
        horizon: u64,
    ) -> Result<Self, InstanceError> {
        if horizon == 0 {
            return Err(InstanceError::ZeroHorizon);
        }
        let mut map = BTreeMap::new();
        for (n, t) in members {
            if n == nonmember {
                return Err(InstanceError::NonmemberListed(n));
            }
            if t == 0 || t > horizon {
                return Err(InstanceError::TimeOutOfRange { n, t, horizon });
            }
            if map.insert(n, t).is_some() {
                return Err(InstanceError::DuplicateMember(n));
            }
        }
        Ok(CeInstance {
            members: map,
            nonmember,
            horizon,
        })
    }

    pub fn empty(nonmember: u64, horizon: u64) -> Result<Self, InstanceError> {
        CeInstance::new([], nonmember, horizon)
    }

    /// Random instance over candidates `0..=horizon` (minus `nonmember`), with at
    /// most `max_members` members and enumeration times in `1..=max_time`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        max_members: usize,
        max_time: u64,
        nonmember: u64,
        horizon: u64,
    ) -> Self {
        let candidates: Vec<u64> = (0..=horizon).filter(|&n| n != nonmember).collect();
        let count = rng.random_range(0..=max_members.min(candidates.len()));
        let max_time = max_time.min(horizon).max(1);
        let members: Vec<(u64, u64)> = sample(rng, candidates.len(), count)
            .into_iter()
            .map(|i| (candidates[i], rng.random_range(1..=max_time)))
            .collect();
        CeInstance::new(members, nonmember, horizon).expect("random instance is valid")
    }

    pub fn nonmember(&self) -> u64 {
        self.nonmember
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn is_member(&self, n: u64) -> bool {
        self.members.contains_key(&n)
    }

    pub fn enumeration_time(&self, n: u64) -> Option<u64> {
        self.members.get(&n).copied()
    }

    /// `(n, t_n)` pairs in increasing `n`.
    pub fn members(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.members.iter().map(|(&n, &t)| (n, t))
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Largest enumeration time, 0 for the empty instance.
    pub fn max_time(&self) -> u64 {
        self.members.values().copied().max().unwrap_or(0)
    }

    /// Membership as visible to an enumeration run for `stage` steps.
    pub fn enumerated_by(&self, n: u64, stage: u64) -> Option<u64> {
        self.enumeration_time(n).filter(|&t| t <= stage)
    }
}

impl fmt::Debug for CeInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CeInstance {{ members: {{")?;
        for (i, (n, t)) in self.members().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({n},{t})")?;
        }
        write!(
            f,
            "}}, nonmember: {}, horizon: {} }}",
            self.nonmember, self.horizon
        )
    }
}
