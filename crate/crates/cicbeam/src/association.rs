//! Data-stream association and maximum-DoF search.
//!
//! An association assigns each of `J` streams a nonempty set of available
//! GBSs that decode it; no GBS decodes two streams. Streams are indexed from
//! 0 in code (so the set `Gamma_1 = {3}` of a 1-based description is
//! `gamma[&1] == {2}` here), GBS ids stay 1-based.
//!
//! Feasibility of a DoF of `J` reduces to a counting condition on the sets:
//! for every stream `j`, the occupied GBSs that cannot get `j` over the
//! backhaul (`psi[j]`) plus the decoders of all other streams must number
//! fewer than the antenna count, so that a zero-forcing direction exists.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::network::Topology;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreamAssociation {
    sets: Vec<BTreeSet<usize>>,
}

impl StreamAssociation {
    pub fn new(sets: Vec<BTreeSet<usize>>) -> Result<StreamAssociation> {
        if let Some(j) = sets.iter().position(|s| s.is_empty()) {
            return Err(Error::InvalidAssociation(format!("stream {} has no decoding GBS", j + 1)));
        }
        let mut seen = BTreeSet::new();
        for s in &sets {
            for &id in s {
                if !seen.insert(id) {
                    return Err(Error::InvalidAssociation(format!("GBS {id} decodes more than one stream")));
                }
            }
        }
        Ok(StreamAssociation { sets })
    }

    pub fn from_slices(sets: &[&[usize]]) -> Result<StreamAssociation> {
        StreamAssociation::new(sets.iter().map(|s| s.iter().copied().collect()).collect())
    }

    /// Parse a literal such as `[[4,7],[5,8],[6]]`.
    pub fn parse(literal: &str) -> Result<StreamAssociation> {
        let bad = |why: &str| Error::InvalidAssociation(format!("{why} in {literal:?}"));
        let s: String = literal.chars().filter(|c| !c.is_whitespace()).collect();
        let inner = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')).ok_or_else(|| bad("expected outer brackets"))?;
        let mut sets = Vec::new();
        let mut rest = inner;
        while !rest.is_empty() {
            let body = rest.strip_prefix('[').ok_or_else(|| bad("expected '['"))?;
            let end = body.find(']').ok_or_else(|| bad("unclosed '['"))?;
            let mut set = BTreeSet::new();
            if !body[..end].is_empty() {
                for tok in body[..end].split(',') {
                    let id: usize = tok.parse().map_err(|_| bad("expected a GBS id"))?;
                    if !set.insert(id) {
                        return Err(bad("repeated GBS id"));
                    }
                }
            }
            sets.push(set);
            rest = &body[end + 1..];
            if let Some(r) = rest.strip_prefix(',') {
                if r.is_empty() {
                    return Err(bad("trailing comma"));
                }
                rest = r;
            } else if !rest.is_empty() {
                return Err(bad("expected ','"));
            }
        }
        StreamAssociation::new(sets)
    }

    pub fn num_streams(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[BTreeSet<usize>] {
        &self.sets
    }

    pub fn stream(&self, j: usize) -> &BTreeSet<usize> {
        &self.sets[j]
    }

    /// All decoding GBSs, ascending.
    pub fn receivers(&self) -> BTreeSet<usize> {
        self.sets.iter().flatten().copied().collect()
    }

    /// Decoding GBSs of every stream other than `j`.
    pub fn other_receivers(&self, j: usize) -> Vec<usize> {
        self.sets.iter().enumerate().filter(|(i, _)| *i != j).flat_map(|(_, s)| s.iter().copied()).collect()
    }

    /// Stream decoded by GBS `id`, if any.
    pub fn stream_of(&self, id: usize) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(&id))
    }

    /// Check that every decoder is an available GBS of `t`.
    pub fn check_against(&self, t: &Topology) -> Result<()> {
        for id in self.receivers() {
            if !t.available.contains(&id) {
                return Err(Error::InvalidAssociation(format!("GBS {id} is not an available GBS")));
            }
        }
        Ok(())
    }

    pub fn without_stream(&self, j: usize) -> StreamAssociation {
        let mut sets = self.sets.clone();
        sets.remove(j);
        StreamAssociation { sets }
    }
}

impl fmt::Display for StreamAssociation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (j, s) in self.sets.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            let ids: Vec<String> = s.iter().map(|id| id.to_string()).collect();
            write!(f, "[{}]", ids.join(","))?;
        }
        write!(f, "]")
    }
}

/// Cancellation bookkeeping for one association on one topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedSets {
    /// `psi[j]`: occupied GBSs with no backhaul neighbour decoding stream `j`.
    pub psi: Vec<BTreeSet<usize>>,
    /// `omega[(n1, j)]`: backhaul neighbours of `n1` that decode stream `j`.
    pub omega: BTreeMap<(usize, usize), BTreeSet<usize>>,
    /// `gamma[n1]`: streams occupied GBS `n1` cannot cancel.
    pub gamma: BTreeMap<usize, BTreeSet<usize>>,
}

pub fn derive_sets(t: &Topology, a: &StreamAssociation) -> DerivedSets {
    let mut omega = BTreeMap::new();
    let mut gamma: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut psi = vec![BTreeSet::new(); a.num_streams()];
    for &n1 in &t.occupied {
        let phi = t.phi(n1);
        let g = gamma.entry(n1).or_default();
        for (j, lambda) in a.sets().iter().enumerate() {
            let o: BTreeSet<usize> = phi.intersection(lambda).copied().collect();
            if o.is_empty() {
                g.insert(j);
                psi[j].insert(n1);
            }
            omega.insert((n1, j), o);
        }
    }
    DerivedSets { psi, omega, gamma }
}

/// Zero-forcing feasibility of `a` with `antennas` transmit antennas.
pub fn theorem1_feasible(t: &Topology, antennas: usize, a: &StreamAssociation) -> bool {
    let sets = derive_sets(t, a);
    let total: usize = a.sets().iter().map(|s| s.len()).sum();
    a.sets().iter().enumerate().all(|(j, s)| sets.psi[j].len() + (total - s.len()) < antennas)
}

/// Default cap on enumerated associations per stream count.
pub const DEFAULT_ASSOCIATION_CAP: usize = 64;

/// Up to `cap` distinct feasible associations with exactly `streams` streams.
///
/// Each available GBS (ascending id) is assigned a stream label or nothing;
/// labels are canonical (stream `k` is the one whose smallest member comes
/// `k`-th), and assignment vectors are visited in lexicographic order with
/// "nothing" first.
pub fn enumerate_feasible(t: &Topology, antennas: usize, streams: usize, cap: usize) -> Vec<StreamAssociation> {
    let mut out = Vec::new();
    if streams == 0 || cap == 0 || streams > antennas.min(t.available.len()) {
        return out;
    }
    let avail: Vec<usize> = t.available.iter().copied().collect();
    let mut labels = vec![0usize; avail.len()];
    enumerate_rec(t, antennas, streams, cap, &avail, &mut labels, 0, 0, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn enumerate_rec(
    t: &Topology,
    antennas: usize,
    streams: usize,
    cap: usize,
    avail: &[usize],
    labels: &mut [usize],
    pos: usize,
    used: usize,
    out: &mut Vec<StreamAssociation>,
) {
    if out.len() >= cap {
        return;
    }
    if pos == avail.len() {
        if used == streams {
            let mut sets = vec![BTreeSet::new(); streams];
            for (id, &l) in avail.iter().zip(labels.iter()) {
                if l > 0 {
                    sets[l - 1].insert(*id);
                }
            }
            let a = StreamAssociation { sets };
            if theorem1_feasible(t, antennas, &a) {
                out.push(a);
            }
        }
        return;
    }
    if avail.len() - pos < streams - used {
        return;
    }
    let top = if used < streams { used + 1 } else { used };
    for l in 0..=top {
        labels[pos] = l;
        enumerate_rec(t, antennas, streams, cap, avail, labels, pos + 1, used.max(l), out);
    }
    labels[pos] = 0;
}

/// Largest feasible stream count and its canonically first witness. Returns
/// `(0, None)` when not even a single stream is feasible.
pub fn max_dof(t: &Topology, antennas: usize) -> (usize, Option<StreamAssociation>) {
    let upper = antennas.min(t.available.len());
    for j in (1..=upper).rev() {
        if let Some(a) = enumerate_feasible(t, antennas, j, 1).into_iter().next() {
            return (j, Some(a));
        }
    }
    (0, None)
}

/// DoF with full backhaul between occupied and available GBSs.
pub fn comp_dof(antennas: usize, available: usize) -> usize {
    antennas.min(available)
}

/// DoF with no backhaul (cognitive beamforming or uplink NOMA).
pub fn isolated_dof(antennas: usize, occupied: usize, available: usize) -> usize {
    antennas.saturating_sub(occupied).min(available)
}
