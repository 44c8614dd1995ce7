//! Zero-forcing beamformer construction and closed-form performance metrics.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::association::{derive_sets, StreamAssociation};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::numerics::{hstack, inner, null_space, CMatrix, CVector, DEFAULT_RANK_TOL};

/// Beamformers together with what they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    /// One vector per stream, in sqrt(W).
    pub w: Vec<CVector>,
    /// Rate of each stream in bps/Hz.
    pub rates: Vec<f64>,
    /// `sinr[j][n2]` for every decoder `n2` of stream `j`.
    pub sinr: Vec<BTreeMap<usize, f64>>,
    /// Interference (W) left at each occupied GBS after cooperative
    /// cancellation.
    pub residual_interference: BTreeMap<usize, f64>,
    /// Interference (W) at each occupied GBS without any cancellation.
    pub total_interference: BTreeMap<usize, f64>,
}

impl BeamformingSolution {
    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum()
    }

    /// Largest scaled violation of the power, interference and rate
    /// constraints; `<= 0` means feasible. Power is relative to `power`,
    /// interference relative to `max(theta, noise)`, rates in bps/Hz.
    pub fn max_violation(&self, power: f64, theta: &BTreeMap<usize, f64>, noise: f64) -> f64 {
        let mut worst = (self.power() - power) / power;
        for (n1, i) in &self.residual_interference {
            let bound = theta.get(n1).copied().unwrap_or(f64::INFINITY);
            if bound.is_finite() {
                worst = worst.max((i - bound) / bound.max(noise));
            }
        }
        for (r, s) in self.rates.iter().zip(&self.sinr) {
            let achievable = s.values().map(|g| (1.0 + g).log2()).fold(f64::INFINITY, f64::min);
            if achievable.is_finite() {
                worst = worst.max(r - achievable);
            }
        }
        worst
    }
}

/// SINRs, rates and interference of a beamformer set.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub sinr: Vec<BTreeMap<usize, f64>>,
    /// Multicast rate `min_{n2} log2(1 + sinr)` per stream.
    pub rates: Vec<f64>,
    pub residual_interference: BTreeMap<usize, f64>,
    pub total_interference: BTreeMap<usize, f64>,
}

pub fn evaluate(ch: &ChannelSet, t: &Topology, a: &StreamAssociation, w: &[CVector]) -> Evaluation {
    let sets = derive_sets(t, a);
    let gain = |id: usize, j: usize| inner(ch.get(id), &w[j]).norm_sqr();
    let mut sinr = Vec::with_capacity(a.num_streams());
    let mut rates = Vec::with_capacity(a.num_streams());
    for (j, lambda) in a.sets().iter().enumerate() {
        let s: BTreeMap<usize, f64> = lambda
            .iter()
            .map(|&n2| {
                let interference: f64 = (0..w.len()).filter(|&i| i != j).map(|i| gain(n2, i)).sum();
                (n2, gain(n2, j) / (interference + ch.noise(n2)))
            })
            .collect();
        rates.push(s.values().map(|g| (1.0 + g).log2()).fold(f64::INFINITY, f64::min));
        sinr.push(s);
    }
    let residual_interference =
        t.occupied.iter().map(|&n1| (n1, sets.gamma[&n1].iter().map(|&j| gain(n1, j)).sum())).collect();
    let total_interference = t.occupied.iter().map(|&n1| (n1, (0..w.len()).map(|j| gain(n1, j)).sum())).collect();
    Evaluation { sinr, rates, residual_interference, total_interference }
}

fn solution_from(ch: &ChannelSet, t: &Topology, a: &StreamAssociation, w: Vec<CVector>) -> BeamformingSolution {
    let e = evaluate(ch, t, a, &w);
    BeamformingSolution {
        w,
        rates: e.rates,
        sinr: e.sinr,
        residual_interference: e.residual_interference,
        total_interference: e.total_interference,
    }
}

/// Channels stream `j` has to null: decoders of the other streams and the
/// occupied GBSs that cannot cancel it.
pub fn nulling_matrix(ch: &ChannelSet, t: &Topology, a: &StreamAssociation, j: usize) -> CMatrix {
    let sets = derive_sets(t, a);
    let ids: Vec<usize> = a.other_receivers(j).into_iter().chain(sets.psi[j].iter().copied()).collect();
    let cols: Vec<&CVector> = ids.iter().map(|&id| ch.get(id)).collect();
    hstack(ch.antennas, &cols)
}

/// Mean channel of the decoders of stream `j`.
pub fn group_centroid(ch: &ChannelSet, group: &BTreeSet<usize>) -> CVector {
    let mut c = CVector::zeros(ch.antennas);
    for &id in group {
        c += ch.get(id);
    }
    c / Complex64::from(group.len() as f64)
}

/// Unit vector along the projection of `target` onto the span of the
/// orthonormal columns of `basis` (first basis vector if the projection
/// vanishes).
pub fn project_direction(basis: &CMatrix, target: &CVector) -> Option<CVector> {
    if basis.ncols() == 0 {
        return None;
    }
    let v = basis * (basis.adjoint() * target);
    let n = v.norm();
    if n > 1e-12 * target.norm() && n > 0.0 {
        Some(v / Complex64::from(n))
    } else {
        Some(basis.column(0).into_owned())
    }
}

/// Zero-forcing design: each `w_j` lies in the null space of its nulling
/// matrix, points along the projected decoder centroid and carries `P / J`.
pub fn zf_design(ch: &ChannelSet, t: &Topology, a: &StreamAssociation, power: f64) -> Result<BeamformingSolution> {
    let per_stream = (power / a.num_streams() as f64).sqrt();
    let mut w = Vec::with_capacity(a.num_streams());
    for j in 0..a.num_streams() {
        let basis = null_space(&nulling_matrix(ch, t, a, j), DEFAULT_RANK_TOL)?;
        let dir = project_direction(&basis, &group_centroid(ch, a.stream(j)))
            .ok_or(Error::InfeasibleAssociation { stream: j })?;
        w.push(dir * Complex64::from(per_stream));
    }
    Ok(solution_from(ch, t, a, w))
}

/// Uniformly shrink all beamformers so that power and every positive
/// interference temperature hold with a 1% margin. Occupied GBSs with a zero
/// temperature must already see (numerically) zero residual interference.
/// Returns the rescaled solution and the factor applied.
pub fn scale_to_constraints(
    w: &[CVector],
    power: f64,
    theta: &BTreeMap<usize, f64>,
    ch: &ChannelSet,
    t: &Topology,
    a: &StreamAssociation,
) -> Result<(BeamformingSolution, f64)> {
    const MARGIN: f64 = 0.99;
    let p = w.iter().map(|v| v.norm_squared()).sum::<f64>();
    if p == 0.0 {
        return Err(Error::ZeroSolution);
    }
    let e = evaluate(ch, t, a, w);
    let mut alpha2 = 1.0f64.min(MARGIN * power / p);
    for (n1, &i) in &e.residual_interference {
        let bound = theta.get(n1).copied().unwrap_or(f64::INFINITY);
        if bound == 0.0 {
            let scale: f64 = ch.get(*n1).norm_squared() * p;
            if i > 1e-18 * scale {
                return Err(Error::NoFeasibleScaling);
            }
        } else if i > 0.0 {
            alpha2 = alpha2.min(MARGIN * bound / i);
        }
    }
    let alpha = alpha2.sqrt();
    let scaled = w.iter().map(|v| v * Complex64::from(alpha)).collect();
    Ok((solution_from(ch, t, a, scaled), alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, ChannelParams};
    use crate::network::paper_topology;

    fn assoc(sets: &[&[usize]]) -> StreamAssociation {
        StreamAssociation::from_slices(sets).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Two-GBS toy network: GBS 1 occupied, GBS 2 available, no backhaul.
    fn toy(h1: [f64; 2], h2: [f64; 2]) -> (Topology, ChannelSet) {
        let mut t = paper_topology();
        t.gbs_positions.truncate(2);
        t.occupied = [1].into_iter().collect();
        t.available = [2].into_iter().collect();
        t.backhaul.clear();
        let ch = ChannelSet {
            h: vec![CVector::from_vec(vec![c(h1[0]), c(h1[1])]), CVector::from_vec(vec![c(h2[0]), c(h2[1])])],
            sigma2: vec![1.0, 1.0],
            params: ChannelParams::reference(),
            antennas: 2,
        };
        (t, ch)
    }

    #[test]
    fn zf_nulls_single_occupied_channel() {
        let (t, ch) = toy([1.0, 0.0], [1.0, 1.0]);
        let s = zf_design(&ch, &t, &assoc(&[&[2]]), 2.0).unwrap();
        assert!(s.w[0][0].norm() < 1e-12);
        assert!((s.w[0][1].norm() - 2f64.sqrt()).abs() < 1e-12);
        assert!(s.residual_interference[&1] < 1e-24);
    }

    #[test]
    fn zf_residuals_on_reference_network() {
        let t = paper_topology();
        let a = assoc(&[&[5], &[6], &[7]]);
        let sets = derive_sets(&t, &a);
        for seed in 0..50 {
            let ch = sample_channels(&t, &ChannelParams::reference(), 5, seed);
            let s = zf_design(&ch, &t, &a, 0.2).unwrap();
            for j in 0..3 {
                let wn = s.w[j].norm();
                let nulled = a.other_receivers(j).into_iter().chain(sets.psi[j].iter().copied());
                for id in nulled {
                    let h = ch.get(id);
                    assert!(inner(h, &s.w[j]).norm() <= 1e-9 * h.norm() * wn, "seed {seed} stream {j} gbs {id}");
                }
                for &n2 in a.stream(j) {
                    let h = ch.get(n2);
                    assert!(inner(h, &s.w[j]).norm() > 1e-6 * h.norm() * wn);
                }
            }
            assert!((s.power() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn single_stream_to_gbs_six_needs_no_nulling() {
        let t = paper_topology();
        let ch = sample_channels(&t, &ChannelParams::reference(), 2, 1);
        let s = zf_design(&ch, &t, &assoc(&[&[6]]), 0.2).unwrap();
        assert!(s.w[0].norm() > 0.0);
        assert!(inner(ch.get(6), &s.w[0]).norm() > 0.0);
    }

    #[test]
    fn zf_fails_when_null_space_is_empty() {
        let t = paper_topology().isolated();
        let ch = sample_channels(&t, &ChannelParams::reference(), 3, 1);
        assert!(matches!(zf_design(&ch, &t, &assoc(&[&[6]]), 0.2), Err(Error::InfeasibleAssociation { stream: 0 })));
    }

    #[test]
    fn evaluate_unit_snr_gives_one_bit() {
        let (t, ch) = toy([0.0, 0.0], [1.0, 0.0]);
        let w = vec![CVector::from_vec(vec![c(1.0), c(0.0)])];
        let e = evaluate(&ch, &t, &assoc(&[&[2]]), &w);
        assert!((e.rates[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_streams_see_no_interference() {
        let mut t = paper_topology();
        t.backhaul.clear();
        let mut h = vec![CVector::zeros(2); 8];
        h[3] = CVector::from_vec(vec![c(1.0), c(0.0)]);
        h[4] = CVector::from_vec(vec![c(0.0), c(2.0)]);
        let ch = ChannelSet { h, sigma2: vec![0.5; 8], params: ChannelParams::reference(), antennas: 2 };
        let w = vec![CVector::from_vec(vec![c(1.0), c(0.0)]), CVector::from_vec(vec![c(0.0), c(1.0)])];
        let e = evaluate(&ch, &t, &assoc(&[&[4], &[5]]), &w);
        assert!((e.sinr[0][&4] - 2.0).abs() < 1e-15);
        assert!((e.sinr[1][&5] - 8.0).abs() < 1e-15);
    }

    #[test]
    fn empty_gamma_means_no_residual_interference() {
        let t = paper_topology();
        let ch = sample_channels(&t, &ChannelParams::reference(), 5, 3);
        let w: Vec<CVector> = (0..3).map(|j| ch.h[j + 2].clone() * Complex64::from(1e3)).collect();
        let e = evaluate(&ch, &t, &assoc(&[&[4, 7], &[5, 8], &[6]]), &w);
        assert!(e.residual_interference.values().all(|&i| i == 0.0));
        assert!(e.total_interference.values().all(|&i| i > 0.0));
    }

    #[test]
    fn evaluate_is_homogeneous() {
        let t = paper_topology();
        let a = assoc(&[&[5], &[6], &[7]]);
        let ch = sample_channels(&t, &ChannelParams::reference(), 5, 9);
        let w: Vec<CVector> = (0..3).map(|j| ch.h[j].clone() * Complex64::from(1e5)).collect();
        let alpha = 0.3;
        let ws: Vec<CVector> = w.iter().map(|v| v * Complex64::from(alpha)).collect();
        let e1 = evaluate(&ch, &t, &a, &w);
        let e2 = evaluate(&ch, &t, &a, &ws);
        for (n1, i) in &e1.total_interference {
            assert!((e2.total_interference[n1] / i - alpha * alpha).abs() < 1e-12);
        }
        // Scaling only changes the noise term: sinr/(signal) follows.
        for j in 0..3 {
            for n2 in a.stream(j) {
                assert!(e2.sinr[j][n2] < e1.sinr[j][n2]);
            }
        }
    }

    #[test]
    fn scaling_examples() {
        let t = paper_topology();
        let a = assoc(&[&[4, 7], &[5, 8], &[6]]);
        let ch = sample_channels(&t, &ChannelParams::reference(), 5, 2);
        let theta: BTreeMap<usize, f64> = t.occupied.iter().map(|&n| (n, 1e-9)).collect();

        let zf = zf_design(&ch, &t, &a, 0.1).unwrap();
        let (s, alpha) = scale_to_constraints(&zf.w, 0.2, &theta, &ch, &t, &a).unwrap();
        assert_eq!(alpha, 1.0);
        assert_eq!(s.w, zf.w);

        // Twice the budget: only power binds (gamma is empty everywhere).
        let zf = zf_design(&ch, &t, &a, 0.4).unwrap();
        let (s, alpha) = scale_to_constraints(&zf.w, 0.2, &theta, &ch, &t, &a).unwrap();
        assert!((alpha - (0.99f64 / 2.0).sqrt()).abs() < 1e-12);
        assert!(s.power() <= 0.99 * 0.2 * (1.0 + 1e-12));

        let zero = vec![CVector::zeros(5); 3];
        assert!(matches!(scale_to_constraints(&zero, 0.2, &theta, &ch, &t, &a), Err(Error::ZeroSolution)));
    }

    #[test]
    fn scaling_respects_interference() {
        let t = paper_topology();
        let a = assoc(&[&[5], &[6], &[7]]);
        let ch = sample_channels(&t, &ChannelParams::reference(), 5, 4);
        let w: Vec<CVector> = a.sets().iter().map(|s| group_centroid(&ch, s) * Complex64::from(1e4)).collect();
        let worst = evaluate(&ch, &t, &a, &w).residual_interference.values().copied().fold(0.0, f64::max);
        let theta: BTreeMap<usize, f64> = t.occupied.iter().map(|&n| (n, 0.1 * worst)).collect();
        let (s, alpha) = scale_to_constraints(&w, 0.2, &theta, &ch, &t, &a).unwrap();
        assert!(alpha < 1.0);
        for (n1, i) in &s.residual_interference {
            assert!(*i <= 0.99 * theta[n1] * (1.0 + 1e-12));
        }
        let zero_theta: BTreeMap<usize, f64> = t.occupied.iter().map(|&n| (n, 0.0)).collect();
        assert!(matches!(scale_to_constraints(&w, 0.2, &zero_theta, &ch, &t, &a), Err(Error::NoFeasibleScaling)));
    }


    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn zf_meets_power_and_nulls(seed in 0u64..10_000, pick in 0usize..2) {
            let t = paper_topology();
            let a = [assoc(&[&[4, 7], &[5, 8], &[6]]), assoc(&[&[5], &[6], &[7]])][pick].clone();
            let ch = sample_channels(&t, &ChannelParams::reference(), 5, seed);
            let p = 0.2;
            let sol = zf_design(&ch, &t, &a, p).unwrap();
            proptest::prop_assert!((sol.power() - p).abs() < 1e-12);
            for j in 0..a.num_streams() {
                for id in a.other_receivers(j) {
                    let leak = inner(ch.get(id), &sol.w[j]).norm_sqr();
                    proptest::prop_assert!(leak <= 1e-18 * ch.get(id).norm_squared() * p);
                }
            }
            for (n1, r) in &sol.residual_interference {
                proptest::prop_assert!(*r <= 1e-18 * ch.get(*n1).norm_squared() * p);
            }
        }
    }
}
