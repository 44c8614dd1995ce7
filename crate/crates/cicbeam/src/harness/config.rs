//! TOML experiment configuration.
//!
//! Units at this boundary are the ones engineers write down (dBm, dB, MHz,
//! metres); they are converted to linear SI units when a [`Scenario`] is
//! used. See `configs/reference.toml` for a fully commented example.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::association::{StreamAssociation, DEFAULT_ASSOCIATION_CAP};
use crate::channel::ChannelParams;
use crate::convex::SolverOptions;
use crate::error::{Error, Result};
use crate::network::{hex_layout, paper_topology, Point3, Scenario, Topology};
use crate::sca::{AnchorInit, ScaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    DofVsM,
    Convergence,
    SweepTheta,
    SweepPower,
    Single,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::DofVsM => "dof_vs_m",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::SweepTheta => "sweep_theta",
            ExperimentKind::SweepPower => "sweep_power",
            ExperimentKind::Single => "single",
        })
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ExperimentKind> {
        Ok(match s {
            "dof_vs_m" => ExperimentKind::DofVsM,
            "convergence" => ExperimentKind::Convergence,
            "sweep_theta" => ExperimentKind::SweepTheta,
            "sweep_power" => ExperimentKind::SweepPower,
            "single" => ExperimentKind::Single,
            other => return Err(Error::Config(format!("unknown experiment kind {other:?}"))),
        })
    }
}

/// The two reference associations compared in the sweeps.
pub const REFERENCE_ASSOCIATIONS: [&str; 2] = ["[[4,7],[5,8],[6]]", "[[5],[6],[7]]"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub kind: ExperimentKind,
    pub antennas_grid: Vec<usize>,
    pub theta_grid_dbm: Vec<f64>,
    pub power_grid_dbm: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Pins the association for `convergence` and `single`.
    pub association: Option<StreamAssociation>,
    /// Associations reported individually in the sweeps.
    pub compare: Vec<StreamAssociation>,
    /// Overrides the cognitive benchmark's stream targets.
    pub cognitive_association: Option<StreamAssociation>,
    pub solver: ScaConfig,
}

impl ExperimentConfig {
    /// Reference setup: the eight-GBS network, 23 dBm, -60 dBm, M = 5,
    /// 50 seeds.
    pub fn reference() -> ExperimentConfig {
        ExperimentConfig {
            scenario: Scenario::reference(),
            kind: ExperimentKind::Single,
            antennas_grid: (1..=8).collect(),
            theta_grid_dbm: default_theta_grid(),
            power_grid_dbm: default_power_grid(),
            seeds: (0..50).collect(),
            output_dir: PathBuf::from("out"),
            association: None,
            compare: REFERENCE_ASSOCIATIONS.iter().map(|s| StreamAssociation::parse(s).expect("literal")).collect(),
            cognitive_association: None,
            solver: ScaConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.solver.validate()?;
        let mut v = Vec::new();
        if self.antennas_grid.is_empty() || self.antennas_grid.contains(&0) {
            v.push("antennas_grid must be nonempty with entries >= 1".to_string());
        }
        if self.theta_grid_dbm.is_empty() {
            v.push("theta_grid_dbm must be nonempty".into());
        }
        if self.power_grid_dbm.is_empty() || self.power_grid_dbm.iter().any(|p| !p.is_finite()) {
            v.push("power_grid_dbm must be nonempty and finite".into());
        }
        if self.theta_grid_dbm.iter().any(|t| t.is_nan() || *t == f64::INFINITY) {
            v.push("theta_grid_dbm entries must be finite or -inf".into());
        }
        if self.seeds.is_empty() {
            v.push("seeds must be nonempty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            v.push("seeds must be distinct".into());
        }
        let assocs = self.association.iter().chain(&self.compare).chain(&self.cognitive_association);
        for a in assocs {
            if let Err(e) = a.check_against(&self.scenario.topology) {
                v.push(e.to_string());
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    /// Replace the seed list by `count` consecutive seeds from `first`, and
    /// the scenario seed by `first`.
    pub fn with_first_seed(mut self, first: u64) -> ExperimentConfig {
        let count = self.seeds.len() as u64;
        self.seeds = (first..first + count).collect();
        self.scenario.seed = first;
        self
    }
}

fn default_theta_grid() -> Vec<f64> {
    (0..=10).map(|k| -100.0 + 5.0 * k as f64).collect()
}

fn default_power_grid() -> Vec<f64> {
    (0..=8).map(|k| 5.0 * k as f64).collect()
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ThetaSpec {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    antennas: usize,
    power_dbm: f64,
    /// One value for every occupied GBS, or one per occupied GBS in
    /// ascending id order. `-inf` means no interference at all.
    theta_dbm: ThetaSpec,
    tau0_db: f64,
    rician_factor: f64,
    bandwidth_mhz: f64,
    noise_psd_dbm_hz: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    cell_radius_m: f64,
    occupied: Vec<usize>,
    available: Vec<usize>,
    backhaul: BTreeMap<String, Vec<usize>>,
    /// Defaults to the built-in hexagonal layout (eight GBSs only).
    positions: Option<Vec<[f64; 3]>>,
    /// Either `uav_position` or `uav_cell` + `uav_altitude_m`.
    uav_position: Option<[f64; 3]>,
    uav_cell: Option<usize>,
    uav_altitude_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: Option<String>,
    antennas_grid: Option<Vec<usize>>,
    theta_grid_dbm: Option<Vec<f64>>,
    power_grid_dbm: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    num_seeds: Option<u64>,
    output_dir: Option<PathBuf>,
    association: Option<String>,
    compare: Option<Vec<String>>,
    cognitive_association: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    epsilon: Option<f64>,
    max_iterations: Option<usize>,
    rate_backoff: Option<f64>,
    init: Option<String>,
    association_cap: Option<usize>,
    barrier_gap: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: RawScenario,
    topology: Option<RawTopology>,
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    solver: RawSolver,
}

fn build_topology(raw: RawTopology) -> Result<Topology> {
    let n = raw.occupied.len() + raw.available.len();
    let gbs_positions: Vec<Point3> = match raw.positions {
        Some(p) => p,
        None if n == 8 => hex_layout(raw.cell_radius_m),
        None => {
            return Err(Error::Config(format!(
                "topology.positions is required unless there are exactly 8 GBSs (got {n})"
            )))
        }
    };
    let mut backhaul = BTreeMap::new();
    for (k, v) in raw.backhaul {
        let n1: usize =
            k.parse().map_err(|_| Error::Config(format!("topology.backhaul key {k:?} is not a GBS id")))?;
        backhaul.insert(n1, v.into_iter().collect());
    }
    let uav_position = match (raw.uav_position, raw.uav_cell, raw.uav_altitude_m) {
        (Some(p), None, None) => p,
        (None, Some(cell), Some(alt)) => {
            let c = gbs_positions
                .get(cell.wrapping_sub(1))
                .ok_or_else(|| Error::Config(format!("topology.uav_cell {cell} does not exist")))?;
            [c[0], c[1], c[2] + alt]
        }
        _ => {
            return Err(Error::Config(
                "topology needs either uav_position or both uav_cell and uav_altitude_m".into(),
            ))
        }
    };
    let t = Topology {
        gbs_positions,
        occupied: raw.occupied.into_iter().collect(),
        available: raw.available.into_iter().collect(),
        backhaul,
        uav_position,
        cell_radius: raw.cell_radius_m,
    };
    t.validate().map_err(Error::InvalidTopology)?;
    Ok(t)
}

fn parse_assoc(field: &str, s: &str) -> Result<StreamAssociation> {
    StreamAssociation::parse(s).map_err(|e| Error::Config(format!("{field}: {e}")))
}

/// Parse configuration text. Errors carry the TOML line/column and the
/// offending field.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let defaults = ExperimentConfig::reference();

    let custom_topology = raw.topology.is_some();
    let topology = match raw.topology {
        Some(t) => build_topology(t)?,
        None => paper_topology(),
    };
    let s = raw.scenario;
    let theta_dbm = match s.theta_dbm {
        ThetaSpec::Scalar(v) => vec![v; topology.occupied.len()],
        ThetaSpec::List(v) => v,
    };
    let scenario = Scenario {
        topology,
        channel: ChannelParams {
            tau0_db: s.tau0_db,
            rician_factor: s.rician_factor,
            bandwidth_hz: s.bandwidth_mhz * 1e6,
            noise_psd_dbm_hz: s.noise_psd_dbm_hz,
        },
        power_dbm: s.power_dbm,
        theta_dbm,
        antennas: s.antennas,
        seed: s.seed,
    };

    let e = raw.experiment;
    let seeds = match (e.seeds, e.num_seeds) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("experiment: give either seeds or num_seeds, not both".into()));
        }
        (Some(list), None) => list,
        (None, Some(n)) => (scenario.seed..scenario.seed + n).collect(),
        (None, None) => (scenario.seed..scenario.seed + defaults.seeds.len() as u64).collect(),
    };
    let compare = match e.compare {
        Some(list) => list.iter().map(|s| parse_assoc("experiment.compare", s)).collect::<Result<Vec<_>>>()?,
        // The reference associations only make sense on the reference network.
        None if custom_topology => Vec::new(),
        None => defaults.compare,
    };

    let r = raw.solver;
    let solver = ScaConfig {
        epsilon: r.epsilon.unwrap_or(defaults.solver.epsilon),
        max_iterations: r.max_iterations.unwrap_or(defaults.solver.max_iterations),
        rate_backoff: r.rate_backoff.unwrap_or(defaults.solver.rate_backoff),
        init: match r.init {
            Some(s) => s.parse()?,
            None => AnchorInit::ZeroForcing,
        },
        association_cap: r.association_cap.unwrap_or(DEFAULT_ASSOCIATION_CAP),
        solver: SolverOptions {
            gap_tol: r.barrier_gap.unwrap_or(defaults.solver.solver.gap_tol),
            ..defaults.solver.solver
        },
    };

    let cfg = ExperimentConfig {
        scenario,
        kind: match e.kind {
            Some(k) => k.parse()?,
            None => defaults.kind,
        },
        antennas_grid: e.antennas_grid.unwrap_or(defaults.antennas_grid),
        theta_grid_dbm: e.theta_grid_dbm.unwrap_or(defaults.theta_grid_dbm),
        power_grid_dbm: e.power_grid_dbm.unwrap_or(defaults.power_grid_dbm),
        seeds,
        output_dir: e.output_dir.unwrap_or(defaults.output_dir),
        association: e.association.map(|s| parse_assoc("experiment.association", &s)).transpose()?,
        compare,
        cognitive_association: e
            .cognitive_association
            .map(|s| parse_assoc("experiment.cognitive_association", &s))
            .transpose()?,
        solver,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scenario]
antennas = 5
power_dbm = 23.0
theta_dbm = -60.0
tau0_db = -60.0
rician_factor = 5.0
bandwidth_mhz = 10.0
noise_psd_dbm_hz = -169.0
"#;

    #[test]
    fn minimal_config_matches_reference_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg, ExperimentConfig::reference());
    }

    #[test]
    fn missing_theta_is_named() {
        let text = MINIMAL.replace("theta_dbm = -60.0\n", "");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("theta_dbm"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected_with_position() {
        let text = MINIMAL.replace("antennas = 5", "antennas = 5\nantenas = 4");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("antenas"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn minus_infinity_theta_means_zero_watts() {
        let text = MINIMAL.replace("theta_dbm = -60.0", "theta_dbm = [-inf, -70.0, -inf]");
        let cfg = parse_config_str(&text).unwrap();
        let theta = cfg.scenario.theta_w();
        assert_eq!(theta[&1], 0.0);
        assert!((theta[&2] - 1e-10).abs() < 1e-22);
    }

    #[test]
    fn explicit_topology() {
        let text = format!(
            "{MINIMAL}
[topology]
cell_radius_m = 100.0
occupied = [1]
available = [2, 3]
backhaul = {{ 1 = [2] }}
positions = [[0.0, 0.0, 0.0], [100.0, 0.0, 0.0], [0.0, 100.0, 0.0]]
uav_cell = 2
uav_altitude_m = 50.0
"
        );
        let cfg = parse_config_str(&text).unwrap();
        let t = &cfg.scenario.topology;
        assert_eq!(t.uav_position, [100.0, 0.0, 50.0]);
        assert_eq!(t.phi(1), BTreeSet::from([2]));
        assert_eq!(cfg.scenario.theta_dbm.len(), 1);
    }

    #[test]
    fn bad_backhaul_is_reported() {
        let text = format!(
            "{MINIMAL}
[topology]
cell_radius_m = 200.0
occupied = [1, 2, 3]
available = [4, 5, 6, 7, 8]
backhaul = {{ 1 = [2] }}
uav_cell = 6
uav_altitude_m = 100.0
"
        );
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("backhaul target not available"), "{err}");
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let text = format!("{MINIMAL}\n[experiment]\nseeds = [1, 2, 1]\n");
        assert!(parse_config_str(&text).unwrap_err().to_string().contains("distinct"));
    }

    #[test]
    fn empty_grid_rejected() {
        let text = format!("{MINIMAL}\n[experiment]\ntheta_grid_dbm = []\n");
        assert!(parse_config_str(&text).is_err());
    }

    #[test]
    fn association_literals_are_checked() {
        let text = format!("{MINIMAL}\n[experiment]\nassociation = \"[[1]]\"\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("not an available GBS"), "{err}");
        let text = format!("{MINIMAL}\n[experiment]\nassociation = \"[[4,\"\n");
        assert!(parse_config_str(&text).unwrap_err().to_string().contains("experiment.association"));
    }

    #[test]
    fn seed_shift() {
        let cfg = ExperimentConfig::reference().with_first_seed(100);
        assert_eq!(cfg.seeds.first(), Some(&100));
        assert_eq!(cfg.seeds.len(), 50);
        assert_eq!(cfg.scenario.seed, 100);
    }
}
