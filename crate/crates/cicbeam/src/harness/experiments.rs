//! Experiment drivers and their CSV outputs.
//!
//! Work items (grid point, seed) run in parallel; results are always merged
//! in grid-then-seed order, so outputs are byte-identical across runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::association::{comp_dof, isolated_dof, max_dof, StreamAssociation};
use crate::beamforming::{evaluate, BeamformingSolution};
use crate::benchmarks::{cognitive_beamforming, comp_capacity};
use crate::channel::{sample_channels, watts_to_dbm, ChannelSet};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::network::Scenario;
use crate::numerics::CVector;
use crate::sca::{optimize_with_channels, run_sca, ScaTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofRow {
    pub antennas: usize,
    pub coop: usize,
    pub comp: usize,
    pub cognitive: usize,
}

pub fn run_dof_vs_m(cfg: &ExperimentConfig) -> Vec<DofRow> {
    let t = &cfg.scenario.topology;
    cfg.antennas_grid
        .iter()
        .map(|&m| DofRow {
            antennas: m,
            coop: max_dof(t, m).0,
            comp: comp_dof(m, t.available.len()),
            cognitive: isolated_dof(m, t.occupied.len(), t.available.len()),
        })
        .collect()
}

pub fn dof_csv(rows: &[DofRow]) -> String {
    let mut s = String::from("antennas,coop_dof,comp_dof,cognitive_dof\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.antennas, r.coop, r.comp, r.cognitive);
    }
    s
}

/// Association used by `convergence`: the pinned one, else the first
/// comparison association.
fn pinned_association(cfg: &ExperimentConfig) -> Result<StreamAssociation> {
    cfg.association
        .clone()
        .or_else(|| cfg.compare.first().cloned())
        .ok_or_else(|| Error::Config("convergence needs experiment.association or experiment.compare".into()))
}

/// One SCA run on the scenario seed with the pinned association.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<(StreamAssociation, ScaTrace)> {
    let s = &cfg.scenario;
    let a = pinned_association(cfg)?;
    let ch = sample_channels(&s.topology, &s.channel, s.antennas, s.seed);
    let tr = run_sca(&ch, &s.topology, &a, s.power_w(), &s.theta_w(), &cfg.solver)?;
    Ok((a, tr))
}

/// Sum rates of every scheme for one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRates {
    /// One entry per comparison association, in config order.
    pub pinned: Vec<f64>,
    /// Best over the DoF-optimal associations.
    pub coop_best: f64,
    pub comp: f64,
    pub cognitive: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub x_dbm: f64,
    pub seed: u64,
    pub rates: SchemeRates,
}

pub fn evaluate_schemes(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<SchemeRates> {
    let t = &scenario.topology;
    let ch = sample_channels(t, &scenario.channel, scenario.antennas, scenario.seed);
    let p = scenario.power_w();
    let theta = scenario.theta_w();
    let pinned = cfg
        .compare
        .iter()
        .map(|a| run_sca(&ch, t, a, p, &theta, &cfg.solver).map(|tr| tr.sum_rate()))
        .collect::<Result<Vec<f64>>>()?;
    let coop_best = optimize_with_channels(&ch, t, p, &theta, &cfg.solver)?.best_run().1.sum_rate();
    let comp = comp_capacity(&ch, t, p)?.capacity;
    let cognitive =
        cognitive_beamforming(&ch, t, p, &theta, &cfg.solver, cfg.cognitive_association.as_ref())?.trace.sum_rate();
    Ok(SchemeRates { pinned, coop_best, comp, cognitive })
}

fn sweep(cfg: &ExperimentConfig, grid: &[f64], apply: impl Fn(&Scenario, f64) -> Scenario + Sync) -> Result<Vec<SweepPoint>> {
    let items: Vec<(f64, u64)> = grid.iter().flat_map(|&x| cfg.seeds.iter().map(move |&s| (x, s))).collect();
    items
        .into_par_iter()
        .map(|(x, seed)| {
            let scenario = Scenario { seed, ..apply(&cfg.scenario, x) };
            evaluate_schemes(cfg, &scenario).map(|rates| SweepPoint { x_dbm: x, seed, rates })
        })
        .collect()
}

/// Sum rate versus a common interference temperature at the configured power.
pub fn run_sweep_theta(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    sweep(cfg, &cfg.theta_grid_dbm, |s, x| s.with_theta_dbm(x))
}

/// Sum rate versus transmit power at the configured temperatures.
pub fn run_sweep_power(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    sweep(cfg, &cfg.power_grid_dbm, |s, x| Scenario { power_dbm: x, ..s.clone() })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Seed statistics of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x_dbm: f64,
    /// `(mean, std)` per comparison association.
    pub pinned: Vec<(f64, f64)>,
    pub coop_best: (f64, f64),
    pub comp: (f64, f64),
    pub cognitive: (f64, f64),
}

pub fn summarize(points: &[SweepPoint]) -> Vec<SweepRow> {
    let mut groups: Vec<(f64, Vec<&SchemeRates>)> = Vec::new();
    for p in points {
        match groups.last_mut() {
            Some((x, g)) if *x == p.x_dbm => g.push(&p.rates),
            _ => groups.push((p.x_dbm, vec![&p.rates])),
        }
    }
    groups
        .into_iter()
        .map(|(x, g)| {
            let col = |f: &dyn Fn(&SchemeRates) -> f64| mean_std(&g.iter().map(|r| f(r)).collect::<Vec<f64>>());
            let k = g.first().map_or(0, |r| r.pinned.len());
            SweepRow {
                x_dbm: x,
                pinned: (0..k).map(|i| col(&|r| r.pinned[i])).collect(),
                coop_best: col(&|r| r.coop_best),
                comp: col(&|r| r.comp),
                cognitive: col(&|r| r.cognitive),
            }
        })
        .collect()
}

fn fmt_dbm(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// Seed-mean table. `x_name` is the first column header.
pub fn sweep_csv(x_name: &str, rows: &[SweepRow]) -> String {
    let k = rows.first().map_or(0, |r| r.pinned.len());
    let mut s = String::from(x_name);
    for i in 1..=k {
        let _ = write!(s, ",coop_{i}_mean,coop_{i}_std");
    }
    s.push_str(",coop_best_mean,coop_best_std,comp_mean,comp_std,cognitive_mean,cognitive_std\n");
    for r in rows {
        s.push_str(&fmt_dbm(r.x_dbm));
        for (m, d) in r.pinned.iter().chain([&r.coop_best, &r.comp, &r.cognitive]) {
            let _ = write!(s, ",{m:.9},{d:.9}");
        }
        s.push('\n');
    }
    s
}

/// Per-seed table.
pub fn sweep_raw_csv(x_name: &str, points: &[SweepPoint]) -> String {
    let k = points.first().map_or(0, |p| p.rates.pinned.len());
    let mut s = format!("{x_name},seed");
    for i in 1..=k {
        let _ = write!(s, ",coop_{i}");
    }
    s.push_str(",coop_best,comp,cognitive\n");
    for p in points {
        let _ = write!(s, "{},{}", fmt_dbm(p.x_dbm), p.seed);
        for v in p.rates.pinned.iter().chain([&p.rates.coop_best, &p.rates.comp, &p.rates.cognitive]) {
            let _ = write!(s, ",{v:.9}");
        }
        s.push('\n');
    }
    s
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Outcome of a single optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleRun {
    pub channels: ChannelSet,
    pub association: StreamAssociation,
    pub trace: ScaTrace,
    pub comp: f64,
    pub cognitive: f64,
    /// Number of associations the outer search tried (1 if pinned).
    pub candidates: usize,
}

/// Optimize one scenario: the pinned association if any, else the best
/// DoF-optimal association.
pub fn run_single(cfg: &ExperimentConfig) -> Result<SingleRun> {
    let s = &cfg.scenario;
    let t = &s.topology;
    let ch = sample_channels(t, &s.channel, s.antennas, s.seed);
    let (p, theta) = (s.power_w(), s.theta_w());
    let (association, trace, candidates) = match &cfg.association {
        Some(a) => (a.clone(), run_sca(&ch, t, a, p, &theta, &cfg.solver)?, 1),
        None => {
            let opt = optimize_with_channels(&ch, t, p, &theta, &cfg.solver)?;
            let n = opt.runs.len();
            let (a, tr) = opt.runs.into_iter().nth(opt.best).expect("best index");
            (a, tr, n)
        }
    };
    let comp = comp_capacity(&ch, t, p)?.capacity;
    let cognitive =
        cognitive_beamforming(&ch, t, p, &theta, &cfg.solver, cfg.cognitive_association.as_ref())?.trace.sum_rate();
    Ok(SingleRun { channels: ch, association, trace, comp, cognitive, candidates })
}

fn decoders_field(a: &StreamAssociation, j: usize) -> String {
    a.stream(j).iter().map(|id| id.to_string()).collect::<Vec<_>>().join(" ")
}

/// `stream,decoders,antenna_index,re,im`, one row per beamformer entry.
/// `decoders` is a space-separated list of GBS ids.
pub fn solution_csv(a: &StreamAssociation, w: &[CVector]) -> String {
    let mut s = String::from("stream,decoders,antenna_index,re,im\n");
    for (j, v) in w.iter().enumerate() {
        for (m, z) in v.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{:e},{:e}", j + 1, decoders_field(a, j), m, z.re, z.im);
        }
    }
    s
}

/// `stream,decoders,rate_bps_hz,min_sinr_db`.
pub fn streams_csv(a: &StreamAssociation, sol: &BeamformingSolution) -> String {
    let mut s = String::from("stream,decoders,rate_bps_hz,min_sinr_db\n");
    for j in 0..a.num_streams() {
        let g = sol.sinr[j].values().copied().fold(f64::INFINITY, f64::min);
        let _ = writeln!(s, "{},{},{:e},{:.6}", j + 1, decoders_field(a, j), sol.rates[j], 10.0 * g.log10());
    }
    s
}

/// `occupied_gbs,theta_dbm,residual_dbm,total_dbm`.
pub fn interference_csv(sol: &BeamformingSolution, theta_dbm: &BTreeMap<usize, f64>) -> String {
    let mut s = String::from("occupied_gbs,theta_dbm,residual_dbm,total_dbm\n");
    for (n1, r) in &sol.residual_interference {
        let total = sol.total_interference[n1];
        let _ = writeln!(
            s,
            "{n1},{},{},{}",
            fmt_dbm(theta_dbm[n1]),
            fmt_dbm(watts_to_dbm(*r)),
            fmt_dbm(watts_to_dbm(total))
        );
    }
    s
}

pub fn summary_csv(run: &SingleRun) -> String {
    format!(
        "association,sum_rate_bps_hz,comp_bps_hz,cognitive_bps_hz,converged,iterations,candidates,max_violation\n\
         \"{}\",{:.9},{:.9},{:.9},{},{},{},{:e}\n",
        run.association,
        run.trace.sum_rate(),
        run.comp,
        run.cognitive,
        run.trace.converged,
        run.trace.iterations(),
        run.candidates,
        run.trace.max_violations.last().copied().unwrap_or(0.0)
    )
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Config(format!("line {line}: expected a number, got {field:?}")))
}

/// Inverse of [`solution_csv`].
pub fn load_solution(text: &str) -> Result<(StreamAssociation, Vec<CVector>)> {
    let mut rows: BTreeMap<usize, (String, BTreeMap<usize, Complex64>)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::Config(format!("line {}: expected 5 fields", i + 1)));
        }
        let j: usize = f[0].parse().map_err(|_| Error::Config(format!("line {}: bad stream", i + 1)))?;
        let m: usize = f[2].parse().map_err(|_| Error::Config(format!("line {}: bad antenna index", i + 1)))?;
        let z = Complex64::new(parse_f64(f[3], i + 1)?, parse_f64(f[4], i + 1)?);
        rows.entry(j).or_insert_with(|| (f[1].to_string(), BTreeMap::new())).1.insert(m, z);
    }
    let mut sets = Vec::new();
    let mut w = Vec::new();
    for (_, (dec, entries)) in rows {
        let ids = dec
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::Config(format!("bad decoder list {dec:?}"))))
            .collect::<Result<_>>()?;
        sets.push(ids);
        w.push(CVector::from_iterator(entries.len(), entries.into_values()));
    }
    Ok((StreamAssociation::new(sets)?, w))
}

/// Rates column of [`streams_csv`].
pub fn load_rates(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            f.get(2).ok_or_else(|| Error::Config(format!("line {}: missing rate", i + 1))).and_then(|v| parse_f64(v, i + 1))
        })
        .collect()
}

/// Re-check a saved optimization against power, interference and rate
/// constraints. Returns the scaled maximum violation (`<= 0` is feasible).
pub fn revalidate(scenario: &Scenario, dir: &Path) -> Result<f64> {
    let read = |name: &str| fs::read_to_string(dir.join(name));
    let ch = ChannelSet::from_csv(&read("channels.csv")?, scenario.channel)?;
    let (a, w) = load_solution(&read("solution.csv")?)?;
    let rates = load_rates(&read("streams.csv")?)?;
    let e = evaluate(&ch, &scenario.topology, &a, &w);
    let sol = BeamformingSolution {
        w,
        rates,
        sinr: e.sinr,
        residual_interference: e.residual_interference,
        total_interference: e.total_interference,
    };
    Ok(sol.max_violation(scenario.power_w(), &scenario.theta_w(), scenario.channel.noise_power()))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    fs::write(&p, body)?;
    Ok(p)
}

/// Write every output of a single optimization into `dir`.
pub fn write_single(run: &SingleRun, scenario: &Scenario, dir: &Path) -> Result<Vec<PathBuf>> {
    let theta_dbm: BTreeMap<usize, f64> =
        scenario.topology.occupied.iter().copied().zip(scenario.theta_dbm.iter().copied()).collect();
    Ok(vec![
        write(dir, "summary.csv", &summary_csv(run))?,
        write(dir, "streams.csv", &streams_csv(&run.association, &run.trace.solution))?,
        write(dir, "solution.csv", &solution_csv(&run.association, &run.trace.solution.w))?,
        write(dir, "interference.csv", &interference_csv(&run.trace.solution, &theta_dbm))?,
        write(dir, "channels.csv", &run.channels.to_csv())?,
        write(dir, "convergence.csv", &run.trace.to_csv())?,
    ])
}

pub fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    write(dir, name, body)
}
