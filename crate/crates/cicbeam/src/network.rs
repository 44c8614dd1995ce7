//! GBS layout, occupied/available partition and one-hop backhaul sets.
//!
//! GBS ids are 1-based throughout the crate, matching the way networks are
//! described in configs and association literals. `gbs_positions[id - 1]` is
//! the position of GBS `id`.

use std::collections::{BTreeMap, BTreeSet};

use crate::channel::{dbm_to_watts, ChannelParams};
use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub gbs_positions: Vec<Point3>,
    pub occupied: BTreeSet<usize>,
    pub available: BTreeSet<usize>,
    /// Occupied GBS -> available GBSs with a one-hop backhaul link to it.
    pub backhaul: BTreeMap<usize, BTreeSet<usize>>,
    pub uav_position: Point3,
    pub cell_radius: f64,
}

/// Default hexagonal layout for the eight-cell reference network.
///
/// Cell 6 sits at the origin. Its first ring alternates occupied and
/// available cells (1, 5, 2, 7, 3 counter-clockwise from 240 degrees, one
/// ring slot left empty), which is a reuse-3 pattern for the occupied cells.
/// Cells 4 and 8 sit in the second ring, each touching exactly one occupied
/// cell. Geometric adjacency between occupied and available cells then equals
/// the backhaul sets `{1: 4,5,6}`, `{2: 5,6,7}`, `{3: 6,7,8}`.
pub fn hex_layout(cell_radius: f64) -> Vec<Point3> {
    let isd = 3f64.sqrt() * cell_radius;
    let ring = |deg: f64| {
        let a = deg.to_radians();
        [isd * a.cos(), isd * a.sin(), 0.0]
    };
    let add = |p: Point3, q: Point3| [p[0] + q[0], p[1] + q[1], 0.0];
    let (p1, p2, p3) = (ring(240.0), ring(120.0), ring(0.0));
    let (p5, p7) = (ring(180.0), ring(60.0));
    vec![p1, p2, p3, add(p1, p5), p5, [0.0, 0.0, 0.0], p7, add(p3, p7)]
}

pub const REFERENCE_CELL_RADIUS_M: f64 = 200.0;
pub const REFERENCE_UAV_ALTITUDE_M: f64 = 100.0;

/// The eight-GBS reference network: occupied {1,2,3}, available {4..8}, UAV
/// hovering 100 m above cell 6.
pub fn paper_topology() -> Topology {
    let gbs_positions = hex_layout(REFERENCE_CELL_RADIUS_M);
    let center = gbs_positions[5];
    let backhaul = [(1, [4, 5, 6]), (2, [5, 6, 7]), (3, [6, 7, 8])]
        .into_iter()
        .map(|(n1, phi)| (n1, phi.into_iter().collect()))
        .collect();
    Topology {
        gbs_positions,
        occupied: (1..=3).collect(),
        available: (4..=8).collect(),
        backhaul,
        uav_position: [center[0], center[1], REFERENCE_UAV_ALTITUDE_M],
        cell_radius: REFERENCE_CELL_RADIUS_M,
    }
}

fn distance(a: &Point3, b: &Point3) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl Topology {
    pub fn num_gbs(&self) -> usize {
        self.gbs_positions.len()
    }

    pub fn position(&self, id: usize) -> Point3 {
        self.gbs_positions[id - 1]
    }

    /// Backhaul neighbours of occupied GBS `n1` (empty if it has none).
    pub fn phi(&self, n1: usize) -> BTreeSet<usize> {
        self.backhaul.get(&n1).cloned().unwrap_or_default()
    }

    /// UAV-GBS distances in metres, indexed by `id - 1`.
    pub fn distances(&self) -> Vec<f64> {
        self.gbs_positions.iter().map(|p| distance(&self.uav_position, p)).collect()
    }

    /// Same network with no backhaul at all: every occupied GBS must be
    /// protected by beamforming alone.
    pub fn isolated(&self) -> Topology {
        Topology { backhaul: BTreeMap::new(), ..self.clone() }
    }

    /// Same network with every occupied GBS connected to every available one.
    pub fn fully_connected(&self) -> Topology {
        let backhaul = self.occupied.iter().map(|&n1| (n1, self.available.clone())).collect();
        Topology { backhaul, ..self.clone() }
    }

    /// Check every structural invariant, collecting all violations.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut violations = Vec::new();
        let n = self.num_gbs();
        let all: BTreeSet<usize> = (1..=n).collect();

        if let Some(id) = self.occupied.intersection(&self.available).next() {
            violations.push(format!("GBS {id} is both occupied and available"));
        }
        let union: BTreeSet<usize> = self.occupied.union(&self.available).copied().collect();
        if union != all {
            violations.push(format!("occupied and available sets must partition 1..={n}"));
        }
        for (&n1, targets) in &self.backhaul {
            if !self.occupied.contains(&n1) {
                violations.push(format!("backhaul source {n1} is not an occupied GBS"));
            }
            for t in targets {
                if !self.available.contains(t) {
                    violations.push(format!("backhaul target not available: {n1} -> {t}"));
                }
            }
        }
        let finite = |p: &Point3| p.iter().all(|v| v.is_finite());
        if !self.gbs_positions.iter().all(finite) || !finite(&self.uav_position) {
            violations.push("non-finite position".to_string());
        }
        if !(self.cell_radius > 0.0 && self.cell_radius.is_finite()) {
            violations.push(format!("cell radius must be positive, got {}", self.cell_radius));
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }
}

/// A complete simulation setup. Values are stored in the units used in
/// configs (dB, dBm); linear accessors convert on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub channel: ChannelParams,
    pub power_dbm: f64,
    /// Interference temperature per occupied GBS, aligned with
    /// `topology.occupied` in ascending id order. `-inf` means zero.
    pub theta_dbm: Vec<f64>,
    pub antennas: usize,
    pub seed: u64,
}

impl Scenario {
    /// Reference parameters: M = 5, 23 dBm, -60 dBm interference temperature.
    pub fn reference() -> Scenario {
        Scenario {
            topology: paper_topology(),
            channel: ChannelParams::reference(),
            power_dbm: 23.0,
            theta_dbm: vec![-60.0; 3],
            antennas: 5,
            seed: 0,
        }
    }

    pub fn power_w(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }

    /// Linear interference temperatures keyed by occupied GBS id.
    pub fn theta_w(&self) -> BTreeMap<usize, f64> {
        self.topology
            .occupied
            .iter()
            .zip(&self.theta_dbm)
            .map(|(&n1, &t)| (n1, dbm_to_watts(t)))
            .collect()
    }

    pub fn with_theta_dbm(&self, theta_dbm: f64) -> Scenario {
        Scenario { theta_dbm: vec![theta_dbm; self.topology.occupied.len()], ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = self.topology.validate().err().unwrap_or_default();
        if self.antennas == 0 {
            v.push("antenna count must be at least 1".into());
        }
        if !(self.channel.rician_factor >= 0.0) {
            v.push(format!("rician factor must be nonnegative, got {}", self.channel.rician_factor));
        }
        if self.theta_dbm.len() != self.topology.occupied.len() {
            v.push(format!(
                "expected {} interference temperatures, got {}",
                self.topology.occupied.len(),
                self.theta_dbm.len()
            ));
        }
        if self.theta_dbm.iter().any(|t| t.is_nan() || *t == f64::INFINITY) {
            v.push("interference temperatures must be finite dBm or -inf".into());
        }
        if !(self.channel.bandwidth_hz > 0.0) {
            v.push("bandwidth must be positive".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidTopology(v))
        }
    }
}
