//! Reference schemes: joint decoding at all available GBSs (CoMP) and
//! cognitive beamforming without backhaul cancellation.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::association::{isolated_dof, StreamAssociation};
use crate::channel::ChannelSet;
use crate::error::Result;
use crate::network::Topology;
use crate::numerics::{hstack, null_space, svd, CMatrix, CVector, DEFAULT_RANK_TOL};
use crate::sca::{run_sca, ScaConfig, ScaTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct CompResult {
    /// bps/Hz
    pub capacity: f64,
    /// Singular values of the noise-whitened channel, descending.
    pub singular_values: Vec<f64>,
    /// Power on each mode, aligned with `singular_values`.
    pub powers: Vec<f64>,
    pub water_level: f64,
}

/// Water-filling over parallel channels with unit-noise gains `gains`:
/// `p_i = max(mu - 1 / g_i, 0)` with `sum p_i = power`. Returns the powers
/// and the water level `mu` (0 if no gain is positive).
pub fn water_fill(gains: &[f64], power: f64) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let mut p = vec![0.0; gains.len()];
    if order.is_empty() || !(power > 0.0) {
        return (p, 0.0);
    }
    let mut mu = 0.0;
    let mut active = order.len();
    while active > 0 {
        let inv_sum: f64 = order[..active].iter().map(|&i| 1.0 / gains[i]).sum();
        mu = (power + inv_sum) / active as f64;
        if mu > 1.0 / gains[order[active - 1]] {
            break;
        }
        active -= 1;
    }
    for &i in &order[..active] {
        p[i] = (mu - 1.0 / gains[i]).max(0.0);
    }
    (p, mu)
}

/// Capacity of parallel modes with amplitudes `singular_values` and common
/// noise power `sigma2`.
pub fn water_fill_capacity(singular_values: &[f64], sigma2: f64, power: f64) -> CompResult {
    let gains: Vec<f64> = singular_values.iter().map(|s| s * s / sigma2).collect();
    let (powers, water_level) = water_fill(&gains, power);
    let capacity = powers.iter().zip(&gains).map(|(p, g)| (1.0 + p * g).log2()).sum();
    CompResult { capacity, singular_values: singular_values.to_vec(), powers, water_level }
}

/// Point-to-point MIMO capacity from the UAV to the decoders `ids` decoding
/// jointly. Each receive row is whitened by its noise level first.
pub fn comp_capacity_for(ch: &ChannelSet, ids: &BTreeSet<usize>, power: f64) -> Result<CompResult> {
    let rows = ids.len();
    let h = CMatrix::from_fn(rows, ch.antennas, |r, c| {
        let id = *ids.iter().nth(r).expect("row in range");
        ch.get(id)[c].conj() / Complex64::from(ch.noise(id).sqrt())
    });
    let s = svd(&h)?;
    Ok(water_fill_capacity(s.singular_values.as_slice(), 1.0, power))
}

/// CoMP benchmark over all available GBSs.
pub fn comp_capacity(ch: &ChannelSet, t: &Topology, power: f64) -> Result<CompResult> {
    comp_capacity_for(ch, &t.available, power)
}

/// Available GBSs ranked by channel gain after projecting out every occupied
/// GBS's channel, strongest first (ties by id).
pub fn post_nulling_gains(ch: &ChannelSet, t: &Topology) -> Result<Vec<(usize, f64)>> {
    let occ: Vec<&CVector> = t.occupied.iter().map(|&n1| ch.get(n1)).collect();
    let basis = null_space(&hstack(ch.antennas, &occ), DEFAULT_RANK_TOL)?;
    let mut gains: Vec<(usize, f64)> = t
        .available
        .iter()
        .map(|&id| {
            let g = if basis.ncols() == 0 { 0.0 } else { (basis.adjoint() * ch.get(id)).norm_squared() };
            (id, g / ch.noise(id))
        })
        .collect();
    gains.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(gains)
}

/// Default cognitive association: `max(M - N1, 0)` single-GBS streams to the
/// strongest post-nulling channels, listed by ascending GBS id.
pub fn cognitive_association(ch: &ChannelSet, t: &Topology) -> Result<StreamAssociation> {
    let j = isolated_dof(ch.antennas, t.occupied.len(), t.available.len());
    let mut ids: Vec<usize> = post_nulling_gains(ch, t)?.into_iter().take(j).map(|(id, _)| id).collect();
    ids.sort_unstable();
    StreamAssociation::new(ids.into_iter().map(|id| BTreeSet::from([id])).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CognitiveResult {
    pub association: StreamAssociation,
    pub trace: ScaTrace,
}

/// Cognitive beamforming: the same SCA, but no occupied GBS can cancel
/// anything, so every stream counts against every interference temperature.
/// `association` overrides the default stream targets.
pub fn cognitive_beamforming(
    ch: &ChannelSet,
    t: &Topology,
    power: f64,
    theta: &BTreeMap<usize, f64>,
    cfg: &ScaConfig,
    association: Option<&StreamAssociation>,
) -> Result<CognitiveResult> {
    let isolated = t.isolated();
    let association = match association {
        Some(a) => a.clone(),
        None => cognitive_association(ch, t)?,
    };
    let trace = if association.num_streams() == 0 {
        ScaTrace::zero(ch, &isolated, &association)
    } else {
        run_sca(ch, &isolated, &association, power, theta, cfg)?
    };
    Ok(CognitiveResult { association, trace })
}
