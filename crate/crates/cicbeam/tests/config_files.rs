use std::path::PathBuf;

use cicbeam::harness::{parse_config, ExperimentConfig};

fn repo_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

#[test]
fn shipped_reference_config_parses_to_defaults() {
    let cfg = parse_config(&repo_file("configs/reference.toml")).unwrap();
    assert_eq!(cfg, ExperimentConfig::reference());
    let s = &cfg.scenario;
    assert_eq!(s.antennas, 5);
    assert_eq!(s.power_dbm, 23.0);
    assert_eq!(s.channel.rician_factor, 5.0);
    assert_eq!(s.channel.bandwidth_hz, 10e6);
    assert_eq!(s.channel.noise_psd_dbm_hz, -169.0);
    assert_eq!(s.topology.cell_radius, 200.0);
    assert_eq!(s.topology.uav_position[2], 100.0);
}

#[test]
fn missing_file_is_an_error() {
    let err = parse_config(&repo_file("configs/does-not-exist.toml")).unwrap_err();
    assert!(err.to_string().contains("does-not-exist.toml"));
}
