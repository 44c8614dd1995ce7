//! Python bindings. Associations are accepted either as literals
//! (`"[[4,7],[5,8],[6]]"`) or as lists of GBS-id lists.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cicbeam::association::{self, StreamAssociation};
use cicbeam::benchmarks;
use cicbeam::channel::{self, ChannelParams};
use cicbeam::convex::{self, Anchor};
use cicbeam::network;
use cicbeam::sca::{self, AnchorInit, ScaConfig};

fn err(e: cicbeam::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[derive(FromPyObject)]
enum AssocArg {
    Literal(String),
    Sets(Vec<Vec<usize>>),
}

impl AssocArg {
    fn resolve(self) -> PyResult<StreamAssociation> {
        match self {
            AssocArg::Literal(s) => StreamAssociation::parse(&s).map_err(err),
            AssocArg::Sets(v) => StreamAssociation::new(v.into_iter().map(|s| s.into_iter().collect()).collect()).map_err(err),
        }
    }
}

/// A scalar temperature in dBm applies to every occupied GBS; a dict maps
/// occupied GBS id to dBm.
#[derive(FromPyObject)]
enum ThetaArg {
    All(f64),
    PerGbs(BTreeMap<usize, f64>),
}

impl ThetaArg {
    fn watts(self, t: &network::Topology) -> BTreeMap<usize, f64> {
        match self {
            ThetaArg::All(dbm) => t.occupied.iter().map(|&n| (n, channel::dbm_to_watts(dbm))).collect(),
            ThetaArg::PerGbs(m) => m.into_iter().map(|(n, dbm)| (n, channel::dbm_to_watts(dbm))).collect(),
        }
    }
}

fn sets_to_lists(a: &StreamAssociation) -> Vec<Vec<usize>> {
    a.sets().iter().map(|s| s.iter().copied().collect()).collect()
}

fn vec_to_list(v: &cicbeam::numerics::CVector) -> Vec<Complex64> {
    v.iter().copied().collect()
}

#[pyclass(name = "Topology", module = "cicbeam_py", skip_from_py_object)]
#[derive(Clone)]
struct PyTopology {
    inner: network::Topology,
}

#[pymethods]
impl PyTopology {
    #[new]
    #[pyo3(signature = (positions, occupied, available, backhaul, uav_position, cell_radius=200.0))]
    fn new(
        positions: Vec<[f64; 3]>,
        occupied: BTreeSet<usize>,
        available: BTreeSet<usize>,
        backhaul: BTreeMap<usize, BTreeSet<usize>>,
        uav_position: [f64; 3],
        cell_radius: f64,
    ) -> PyResult<Self> {
        let inner = network::Topology { gbs_positions: positions, occupied, available, backhaul, uav_position, cell_radius };
        inner.validate().map_err(|v| PyValueError::new_err(v.join("; ")))?;
        Ok(PyTopology { inner })
    }

    /// The eight-GBS reference network.
    #[staticmethod]
    fn reference() -> Self {
        PyTopology { inner: network::paper_topology() }
    }

    #[getter]
    fn occupied(&self) -> Vec<usize> {
        self.inner.occupied.iter().copied().collect()
    }

    #[getter]
    fn available(&self) -> Vec<usize> {
        self.inner.available.iter().copied().collect()
    }

    #[getter]
    fn backhaul(&self) -> BTreeMap<usize, Vec<usize>> {
        self.inner.backhaul.iter().map(|(k, v)| (*k, v.iter().copied().collect())).collect()
    }

    #[getter]
    fn positions(&self) -> Vec<[f64; 3]> {
        self.inner.gbs_positions.clone()
    }

    #[getter]
    fn uav_position(&self) -> [f64; 3] {
        self.inner.uav_position
    }

    fn distances(&self) -> Vec<f64> {
        self.inner.distances()
    }

    fn __repr__(&self) -> String {
        format!("Topology(occupied={:?}, available={:?})", self.occupied(), self.available())
    }
}

#[pyclass(name = "ChannelSet", module = "cicbeam_py", skip_from_py_object)]
#[derive(Clone)]
struct PyChannelSet {
    inner: channel::ChannelSet,
}

#[pymethods]
impl PyChannelSet {
    /// Draw one Rician channel realization.
    #[staticmethod]
    #[pyo3(signature = (topology, antennas, seed, tau0_db=-60.0, rician_factor=5.0, bandwidth_mhz=10.0, noise_psd_dbm_hz=-169.0))]
    fn sample(
        topology: &PyTopology,
        antennas: usize,
        seed: u64,
        tau0_db: f64,
        rician_factor: f64,
        bandwidth_mhz: f64,
        noise_psd_dbm_hz: f64,
    ) -> PyResult<Self> {
        if antennas == 0 {
            return Err(PyValueError::new_err("antennas must be at least 1"));
        }
        let params = ChannelParams { tau0_db, rician_factor, bandwidth_hz: bandwidth_mhz * 1e6, noise_psd_dbm_hz };
        Ok(PyChannelSet { inner: channel::sample_channels(&topology.inner, &params, antennas, seed) })
    }

    #[getter]
    fn antennas(&self) -> usize {
        self.inner.antennas
    }

    /// Channel vector of GBS `id` (1-based).
    fn channel(&self, id: usize) -> PyResult<Vec<Complex64>> {
        if id == 0 || id > self.inner.h.len() {
            return Err(PyValueError::new_err(format!("no GBS {id}")));
        }
        Ok(vec_to_list(self.inner.get(id)))
    }

    fn noise(&self, id: usize) -> PyResult<f64> {
        if id == 0 || id > self.inner.sigma2.len() {
            return Err(PyValueError::new_err(format!("no GBS {id}")));
        }
        Ok(self.inner.noise(id))
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

#[pyclass(name = "Scenario", module = "cicbeam_py", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: network::Scenario,
}

#[pymethods]
impl PyScenario {
    /// Reference parameters: M = 5, 23 dBm, -60 dBm on every occupied GBS.
    #[staticmethod]
    fn reference() -> Self {
        PyScenario { inner: network::Scenario::reference() }
    }

    #[getter]
    fn antennas(&self) -> usize {
        self.inner.antennas
    }

    #[getter]
    fn power_dbm(&self) -> f64 {
        self.inner.power_dbm
    }

    #[getter]
    fn theta_dbm(&self) -> Vec<f64> {
        self.inner.theta_dbm.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn topology(&self) -> PyTopology {
        PyTopology { inner: self.inner.topology.clone() }
    }

    /// Copy with any of the scalar fields replaced.
    #[pyo3(signature = (antennas=None, power_dbm=None, theta_dbm=None, seed=None))]
    fn replace(&self, antennas: Option<usize>, power_dbm: Option<f64>, theta_dbm: Option<f64>, seed: Option<u64>) -> PyResult<Self> {
        let mut s = self.inner.clone();
        if let Some(m) = antennas {
            s.antennas = m;
        }
        if let Some(p) = power_dbm {
            s.power_dbm = p;
        }
        if let Some(t) = theta_dbm {
            s = s.with_theta_dbm(t);
        }
        if let Some(seed) = seed {
            s.seed = seed;
        }
        s.validate().map_err(err)?;
        Ok(PyScenario { inner: s })
    }

    fn channels(&self) -> PyChannelSet {
        let s = &self.inner;
        PyChannelSet { inner: channel::sample_channels(&s.topology, &s.channel, s.antennas, s.seed) }
    }
}

/// Maximum number of streams and one association achieving it.
#[pyfunction]
fn max_dof(topology: &PyTopology, antennas: usize) -> (usize, Option<Vec<Vec<usize>>>) {
    let (d, a) = association::max_dof(&topology.inner, antennas);
    (d, a.as_ref().map(sets_to_lists))
}

#[pyfunction]
fn theorem1_feasible(topology: &PyTopology, antennas: usize, association: AssocArg) -> PyResult<bool> {
    Ok(association::theorem1_feasible(&topology.inner, antennas, &association.resolve()?))
}

/// `psi`, `omega` and `gamma` of an association, with 0-based stream indices.
#[pyfunction]
fn derive_sets<'py>(py: Python<'py>, topology: &PyTopology, association: AssocArg) -> PyResult<Bound<'py, PyDict>> {
    let d = association::derive_sets(&topology.inner, &association.resolve()?);
    let out = PyDict::new(py);
    let psi: Vec<Vec<usize>> = d.psi.iter().map(|s| s.iter().copied().collect()).collect();
    let omega: BTreeMap<(usize, usize), Vec<usize>> =
        d.omega.iter().map(|(k, v)| (*k, v.iter().copied().collect())).collect();
    let gamma: BTreeMap<usize, Vec<usize>> = d.gamma.iter().map(|(k, v)| (*k, v.iter().copied().collect())).collect();
    out.set_item("psi", psi)?;
    out.set_item("omega", omega)?;
    out.set_item("gamma", gamma)?;
    Ok(out)
}

#[pyfunction]
fn comp_dof(antennas: usize, available: usize) -> usize {
    association::comp_dof(antennas, available)
}

#[pyfunction]
fn isolated_dof(antennas: usize, occupied: usize, available: usize) -> usize {
    association::isolated_dof(antennas, occupied, available)
}

/// Rows `(antennas, coop, comp, cognitive)` for `antennas` in `1..=max_antennas`.
#[pyfunction]
fn dof_table(topology: &PyTopology, max_antennas: usize) -> Vec<(usize, usize, usize, usize)> {
    let t = &topology.inner;
    (1..=max_antennas)
        .map(|m| {
            (
                m,
                association::max_dof(t, m).0,
                association::comp_dof(m, t.available.len()),
                association::isolated_dof(m, t.occupied.len(), t.available.len()),
            )
        })
        .collect()
}

/// Noise power in watts.
#[pyfunction]
fn noise_power(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    channel::noise_power(psd_dbm_hz, bandwidth_hz)
}

#[pyfunction]
fn dbm_to_watts(dbm: f64) -> f64 {
    channel::dbm_to_watts(dbm)
}

fn solution_dict<'py>(py: Python<'py>, sol: &cicbeam::BeamformingSolution) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    let w: Vec<Vec<Complex64>> = sol.w.iter().map(vec_to_list).collect();
    out.set_item("beamformers", w)?;
    out.set_item("rates", sol.rates.clone())?;
    out.set_item("sum_rate", sol.sum_rate())?;
    out.set_item("power", sol.power())?;
    out.set_item("residual_interference", sol.residual_interference.clone())?;
    out.set_item("total_interference", sol.total_interference.clone())?;
    Ok(out)
}

/// Zero-forcing design with `power` watts split evenly across streams.
#[pyfunction]
fn zf_design<'py>(
    py: Python<'py>,
    channels: &PyChannelSet,
    topology: &PyTopology,
    association: AssocArg,
    power: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sol = cicbeam::zf_design(&channels.inner, &topology.inner, &association.resolve()?, power).map_err(err)?;
    solution_dict(py, &sol)
}

/// SCA beamforming for one association. `power` in watts, `theta` in dBm.
#[pyfunction]
#[pyo3(signature = (channels, topology, association, power, theta, epsilon=1e-3, max_iterations=100, init="zf"))]
#[allow(clippy::too_many_arguments)]
fn run_sca<'py>(
    py: Python<'py>,
    channels: &PyChannelSet,
    topology: &PyTopology,
    association: AssocArg,
    power: f64,
    theta: ThetaArg,
    epsilon: f64,
    max_iterations: usize,
    init: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let init: AnchorInit = init.parse().map_err(err)?;
    let cfg = ScaConfig { epsilon, max_iterations, init, ..Default::default() };
    let theta = theta.watts(&topology.inner);
    let tr = sca::run_sca(&channels.inner, &topology.inner, &association.resolve()?, power, &theta, &cfg).map_err(err)?;
    let out = solution_dict(py, &tr.solution)?;
    out.set_item("sum_rates", tr.sum_rates.clone())?;
    out.set_item("max_violations", tr.max_violations.clone())?;
    out.set_item("converged", tr.converged)?;
    out.set_item("kkt_residual", tr.kkt_residual)?;
    Ok(out)
}

/// Best SCA result over the DoF-optimal associations of a scenario.
#[pyfunction]
#[pyo3(signature = (scenario, association_cap=64))]
fn optimize<'py>(py: Python<'py>, scenario: &PyScenario, association_cap: usize) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ScaConfig { association_cap, ..Default::default() };
    let opt = sca::optimize_scenario(&scenario.inner, &cfg).map_err(err)?;
    let (a, tr) = opt.best_run();
    let out = solution_dict(py, &tr.solution)?;
    out.set_item("dof", opt.dof)?;
    out.set_item("association", sets_to_lists(a))?;
    out.set_item("candidates", opt.runs.len())?;
    out.set_item("sum_rates", tr.sum_rates.clone())?;
    Ok(out)
}

/// CoMP capacity over all available GBSs: `(capacity, singular_values, powers)`.
#[pyfunction]
fn comp_capacity(channels: &PyChannelSet, topology: &PyTopology, power: f64) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    let r = benchmarks::comp_capacity(&channels.inner, &topology.inner, power).map_err(err)?;
    Ok((r.capacity, r.singular_values, r.powers))
}

/// Water-filling over parallel modes: `(capacity, powers, water_level)`.
#[pyfunction]
fn water_fill(singular_values: Vec<f64>, sigma2: f64, power: f64) -> (f64, Vec<f64>, f64) {
    let r = benchmarks::water_fill_capacity(&singular_values, sigma2, power);
    (r.capacity, r.powers, r.water_level)
}

/// Value and `(a, b, R, eta)` gradient of the concave rate surrogate.
#[pyfunction]
fn eval_surrogate(a: f64, b: f64, rate: f64, eta: f64, anchor: (f64, f64, f64)) -> PyResult<(f64, [f64; 4])> {
    convex::eval_surrogate(a, b, rate, eta, &Anchor { a: anchor.0, b: anchor.1, c: anchor.2 }).map_err(err)
}

#[pymodule]
fn cicbeam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTopology>()?;
    m.add_class::<PyChannelSet>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(max_dof, m)?)?;
    m.add_function(wrap_pyfunction!(theorem1_feasible, m)?)?;
    m.add_function(wrap_pyfunction!(derive_sets, m)?)?;
    m.add_function(wrap_pyfunction!(comp_dof, m)?)?;
    m.add_function(wrap_pyfunction!(isolated_dof, m)?)?;
    m.add_function(wrap_pyfunction!(dof_table, m)?)?;
    m.add_function(wrap_pyfunction!(noise_power, m)?)?;
    m.add_function(wrap_pyfunction!(dbm_to_watts, m)?)?;
    m.add_function(wrap_pyfunction!(zf_design, m)?)?;
    m.add_function(wrap_pyfunction!(run_sca, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(comp_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(water_fill, m)?)?;
    m.add_function(wrap_pyfunction!(eval_surrogate, m)?)?;
    Ok(())
}
