//! Successive convex approximation for sum-rate maximization under
//! interference-temperature constraints, and the outer association search.
//!
//! Internally every quantity is normalized: beamformers by `sqrt(P)` and
//! powers by a reference noise level, so the subproblem sees a unit power
//! ball and SNR-sized channel gains.
//!
//! An occupied GBS with a zero interference temperature that cannot cancel
//! stream `j` forces `w_j` into the null space of its channel. Such streams
//! are optimized over an orthonormal basis of that subspace, which keeps the
//! subproblem strictly feasible. A stream whose subspace is empty carries no
//! data.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::association::{derive_sets, enumerate_feasible, max_dof, StreamAssociation, DEFAULT_ASSOCIATION_CAP};
use crate::beamforming::{
    evaluate, group_centroid, nulling_matrix, project_direction, scale_to_constraints, BeamformingSolution,
};
use crate::channel::{sample_channels, ChannelSet};
use crate::convex::{solve, Anchor, Constraint, Projection, SolveStatus, SolverOptions, SubproblemSpec};
use crate::error::{Error, Result};
use crate::network::{Scenario, Topology};
use crate::numerics::{hstack, inner, null_space, CMatrix, CVector, DEFAULT_RANK_TOL};

/// How the starting beamformers are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorInit {
    /// Zero-forcing, falling back to matched filtering for streams whose
    /// zero-forcing null space is empty.
    ZeroForcing,
    /// Matched filtering towards the decoder centroid.
    MatchedFilter,
}

impl fmt::Display for AnchorInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnchorInit::ZeroForcing => "zf",
            AnchorInit::MatchedFilter => "mrt",
        })
    }
}

impl std::str::FromStr for AnchorInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<AnchorInit> {
        match s {
            "zf" => Ok(AnchorInit::ZeroForcing),
            "mrt" => Ok(AnchorInit::MatchedFilter),
            other => Err(Error::Config(format!("unknown anchor init {other:?} (expected \"zf\" or \"mrt\")"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaConfig {
    /// Stop once the sum-rate gain of an iteration is below this (bps/Hz).
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Starting rates are this fraction of the achievable rate.
    pub rate_backoff: f64,
    pub init: AnchorInit,
    /// Maximum number of DoF-optimal associations tried by the outer search.
    pub association_cap: usize,
    pub solver: SolverOptions,
}

impl Default for ScaConfig {
    fn default() -> Self {
        ScaConfig {
            epsilon: 1e-3,
            max_iterations: 100,
            rate_backoff: 0.99,
            init: AnchorInit::ZeroForcing,
            association_cap: DEFAULT_ASSOCIATION_CAP,
            solver: SolverOptions::default(),
        }
    }
}

impl ScaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.rate_backoff > 0.0 && self.rate_backoff < 1.0) {
            return Err(Error::Config(format!("rate_backoff must lie in (0, 1), got {}", self.rate_backoff)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaTrace {
    /// Sum rate at the start (entry 0) and after every iteration.
    pub sum_rates: Vec<f64>,
    /// Scaled constraint violation of the original problem at each entry of
    /// `sum_rates`; see [`BeamformingSolution::max_violation`].
    pub max_violations: Vec<f64>,
    pub solution: BeamformingSolution,
    pub converged: bool,
    /// Stationarity and complementary-slackness residual of the original
    /// problem at the final point, using the last subproblem's multipliers.
    /// `NaN` if no subproblem was solved.
    pub kkt_residual: f64,
}

impl ScaTrace {
    pub fn sum_rate(&self) -> f64 {
        self.solution.sum_rate()
    }

    pub fn iterations(&self) -> usize {
        self.sum_rates.len().saturating_sub(1)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,sum_rate_bps_hz,max_violation\n");
        for (q, (r, v)) in self.sum_rates.iter().zip(&self.max_violations).enumerate() {
            s.push_str(&format!("{q},{r:.12e},{v:.6e}\n"));
        }
        s
    }

    /// Trace of an association that carries nothing.
    pub fn zero(ch: &ChannelSet, t: &Topology, a: &StreamAssociation) -> ScaTrace {
        let streams = a.num_streams();
        let w = vec![CVector::zeros(ch.antennas); streams];
        let e = evaluate(ch, t, a, &w);
        let solution = BeamformingSolution {
            w,
            rates: vec![0.0; streams],
            sinr: e.sinr,
            residual_interference: e.residual_interference,
            total_interference: e.total_interference,
        };
        ScaTrace { sum_rates: vec![0.0], max_violations: vec![0.0], solution, converged: true, kkt_residual: 0.0 }
    }
}

struct Block {
    basis: CMatrix,
    offset: usize,
}

struct Decoder {
    id: usize,
    stream: usize,
    eta: usize,
}

/// Variable layout and normalization of one SCA run.
struct Problem<'a> {
    ch: &'a ChannelSet,
    t: &'a Topology,
    a: &'a StreamAssociation,
    power: f64,
    theta: &'a BTreeMap<usize, f64>,
    sigma0: f64,
    /// Channels are multiplied by this so that `|h^H v|^2` is an SNR for a
    /// unit-power `v`.
    gain_scale: f64,
    blocks: Vec<Option<Block>>,
    rate_index: Vec<Option<usize>>,
    decoders: Vec<Decoder>,
    dim: usize,
}

/// Orthonormal basis of the subspace stream `j` may use: the null space of
/// the occupied GBSs with zero temperature that cannot cancel it.
fn allowed_subspace(
    ch: &ChannelSet,
    t: &Topology,
    a: &StreamAssociation,
    theta: &BTreeMap<usize, f64>,
    j: usize,
) -> Result<CMatrix> {
    let sets = derive_sets(t, a);
    let hard: Vec<&CVector> =
        sets.psi[j].iter().filter(|n1| theta.get(n1).is_some_and(|v| *v == 0.0)).map(|&n1| ch.get(n1)).collect();
    null_space(&hstack(ch.antennas, &hard), DEFAULT_RANK_TOL)
}

fn start_beamformers(
    ch: &ChannelSet,
    t: &Topology,
    a: &StreamAssociation,
    subspaces: &[CMatrix],
    power: f64,
    init: AnchorInit,
) -> Result<Vec<CVector>> {
    let live = subspaces.iter().filter(|b| b.ncols() > 0).count().max(1);
    let amp = Complex64::from((power / live as f64).sqrt());
    let mut w = Vec::with_capacity(a.num_streams());
    for (j, basis) in subspaces.iter().enumerate() {
        if basis.ncols() == 0 {
            w.push(CVector::zeros(ch.antennas));
            continue;
        }
        let target = group_centroid(ch, a.stream(j));
        let zf = match init {
            AnchorInit::ZeroForcing => {
                let ns = null_space(&nulling_matrix(ch, t, a, j), DEFAULT_RANK_TOL)?;
                project_direction(&ns, &target)
            }
            AnchorInit::MatchedFilter => None,
        };
        let dir = zf.or_else(|| project_direction(basis, &target)).expect("nonempty basis");
        w.push(dir * amp);
    }
    Ok(w)
}

impl<'a> Problem<'a> {
    fn new(
        ch: &'a ChannelSet,
        t: &'a Topology,
        a: &'a StreamAssociation,
        power: f64,
        theta: &'a BTreeMap<usize, f64>,
        subspaces: Vec<CMatrix>,
        alive: &[bool],
    ) -> Problem<'a> {
        let receivers = a.receivers();
        let sigma0 = receivers.iter().map(|&id| ch.noise(id)).sum::<f64>() / receivers.len().max(1) as f64;
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(a.num_streams());
        for (basis, &live) in subspaces.into_iter().zip(alive) {
            if live {
                let d = basis.ncols();
                blocks.push(Some(Block { basis, offset }));
                offset += 2 * d;
            } else {
                blocks.push(None);
            }
        }
        let mut rate_index = Vec::with_capacity(a.num_streams());
        for &live in alive {
            rate_index.push(live.then(|| {
                offset += 1;
                offset - 1
            }));
        }
        let mut decoders = Vec::new();
        for (j, lambda) in a.sets().iter().enumerate() {
            if alive[j] {
                for &id in lambda {
                    decoders.push(Decoder { id, stream: j, eta: offset });
                    offset += 1;
                }
            }
        }
        Problem {
            ch,
            t,
            a,
            power,
            theta,
            sigma0,
            gain_scale: (power / sigma0).sqrt(),
            blocks,
            rate_index,
            decoders,
            dim: offset,
        }
    }

    fn projection(&self, id: usize, j: usize) -> Projection {
        let b = self.blocks[j].as_ref().expect("live stream");
        let g = b.basis.adjoint() * (self.ch.get(id) * Complex64::from(self.gain_scale));
        let mut p: Vec<f64> = g.iter().map(|z| z.re).collect();
        p.extend(g.iter().map(|z| z.im));
        let mut q: Vec<f64> = g.iter().map(|z| -z.im).collect();
        q.extend(g.iter().map(|z| z.re));
        Projection { offset: b.offset, p, q }
    }

    fn live_streams(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.blocks.len()).filter(|&j| self.blocks[j].is_some())
    }

    /// Pack physical beamformers with the given rates and interference
    /// levels. `eta` is aligned with `self.decoders`.
    fn pack(&self, w: &[CVector], rates: &[f64], eta: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        let inv = Complex64::from(1.0 / self.power.sqrt());
        for (j, block) in self.blocks.iter().enumerate() {
            if let Some(b) = block {
                let c = b.basis.adjoint() * (&w[j] * inv);
                let d = c.len();
                for k in 0..d {
                    x[b.offset + k] = c[k].re;
                    x[b.offset + d + k] = c[k].im;
                }
            }
            if let Some(r) = self.rate_index[j] {
                x[r] = rates[j];
            }
        }
        for (dec, e) in self.decoders.iter().zip(eta) {
            x[dec.eta] = *e;
        }
        x
    }

    fn beamformers(&self, x: &[f64]) -> Vec<CVector> {
        let amp = Complex64::from(self.power.sqrt());
        self.blocks
            .iter()
            .map(|block| match block {
                Some(b) => {
                    let d = b.basis.ncols();
                    let c = CVector::from_fn(d, |k, _| Complex64::new(x[b.offset + k], x[b.offset + d + k]));
                    &b.basis * c * amp
                }
                None => CVector::zeros(self.ch.antennas),
            })
            .collect()
    }

    fn rates(&self, x: &[f64]) -> Vec<f64> {
        self.rate_index.iter().map(|r| r.map_or(0.0, |i| x[i].max(0.0))).collect()
    }

    fn solution(&self, x: &[f64]) -> BeamformingSolution {
        let w = self.beamformers(x);
        let e = evaluate(self.ch, self.t, self.a, &w);
        BeamformingSolution {
            w,
            rates: self.rates(x),
            sinr: e.sinr,
            residual_interference: e.residual_interference,
            total_interference: e.total_interference,
        }
    }

    fn anchors(&self, x: &[f64]) -> Vec<Anchor> {
        self.decoders
            .iter()
            .map(|d| {
                let (a, b) = self.projection(d.id, d.stream).eval(x);
                let r = x[self.rate_index[d.stream].expect("live stream")];
                let c = ((r.exp2() - 1.0) / x[d.eta]).sqrt().max(1e-12);
                Anchor { a, b, c }
            })
            .collect()
    }

    fn spec(&self, anchors: &[Anchor]) -> SubproblemSpec {
        let mut constraints = Vec::new();
        for (d, anchor) in self.decoders.iter().zip(anchors) {
            constraints.push(Constraint::Surrogate {
                proj: self.projection(d.id, d.stream),
                rate: self.rate_index[d.stream].expect("live stream"),
                eta: d.eta,
                anchor: *anchor,
            });
        }
        for d in &self.decoders {
            let terms = self.live_streams().filter(|&i| i != d.stream).map(|i| self.projection(d.id, i)).collect();
            constraints.push(Constraint::QuadraticSum {
                terms,
                constant: self.ch.noise(d.id) / self.sigma0,
                minus: Some(d.eta),
            });
        }
        let sets = derive_sets(self.t, self.a);
        for (n1, gamma) in &sets.gamma {
            let bound = self.theta.get(n1).copied().unwrap_or(f64::INFINITY);
            // Zero temperatures are enforced through the stream subspaces.
            if !(bound > 0.0 && bound.is_finite()) {
                continue;
            }
            let terms: Vec<Projection> =
                gamma.iter().filter(|&&j| self.blocks[j].is_some()).map(|&j| self.projection(*n1, j)).collect();
            if !terms.is_empty() {
                constraints.push(Constraint::QuadraticSum { terms, constant: -bound / self.sigma0, minus: None });
            }
        }
        let ranges = self.blocks.iter().flatten().map(|b| (b.offset, b.offset + 2 * b.basis.ncols())).collect();
        constraints.push(Constraint::Ball { ranges, budget: 1.0 });
        for r in self.rate_index.iter().flatten() {
            constraints.push(Constraint::Lower { index: *r, bound: 0.0 });
        }
        let mut objective = vec![0.0; self.dim];
        for r in self.rate_index.iter().flatten() {
            objective[*r] = 1.0;
        }
        SubproblemSpec { dim: self.dim, objective, constraints }
    }

    fn violation(&self, s: &BeamformingSolution) -> f64 {
        s.max_violation(self.power, self.theta, self.sigma0).max(0.0)
    }
}

fn exact_spec(spec: &SubproblemSpec) -> SubproblemSpec {
    let constraints = spec
        .constraints
        .iter()
        .map(|c| match c {
            Constraint::Surrogate { proj, rate, eta, .. } => {
                Constraint::RateExact { proj: proj.clone(), rate: *rate, eta: *eta }
            }
            other => other.clone(),
        })
        .collect();
    SubproblemSpec { constraints, ..spec.clone() }
}

/// Feasible starting beamformers: ZF (or matched filter) inside each
/// stream's allowed subspace, uniformly scaled onto the power and
/// interference budgets with a 1% margin.
pub fn initial_solution(
    ch: &ChannelSet,
    t: &Topology,
    a: &StreamAssociation,
    power: f64,
    theta: &BTreeMap<usize, f64>,
    init: AnchorInit,
) -> Result<BeamformingSolution> {
    let subspaces =
        (0..a.num_streams()).map(|j| allowed_subspace(ch, t, a, theta, j)).collect::<Result<Vec<CMatrix>>>()?;
    let w = start_beamformers(ch, t, a, &subspaces, power, init)?;
    Ok(scale_to_constraints(&w, power, theta, ch, t, a)?.0)
}

/// Run the SCA loop for one association.
pub fn run_sca(
    ch: &ChannelSet,
    t: &Topology,
    a: &StreamAssociation,
    power: f64,
    theta: &BTreeMap<usize, f64>,
    cfg: &ScaConfig,
) -> Result<ScaTrace> {
    cfg.validate()?;
    a.check_against(t)?;
    let j_total = a.num_streams();
    let subspaces =
        (0..j_total).map(|j| allowed_subspace(ch, t, a, theta, j)).collect::<Result<Vec<CMatrix>>>()?;
    let w0 = start_beamformers(ch, t, a, &subspaces, power, cfg.init)?;
    let start = match scale_to_constraints(&w0, power, theta, ch, t, a) {
        Ok((s, _)) => s,
        Err(Error::ZeroSolution) => return Ok(ScaTrace::zero(ch, t, a)),
        Err(e) => return Err(e),
    };

    // Streams that cannot reach one of their decoders carry nothing.
    let min_sinr: Vec<f64> = start.sinr.iter().map(|s| s.values().copied().fold(f64::INFINITY, f64::min)).collect();
    let alive: Vec<bool> = min_sinr.iter().map(|g| *g > 1e-12).collect();
    if !alive.iter().any(|v| *v) {
        return Ok(ScaTrace::zero(ch, t, a));
    }
    let prob = Problem::new(ch, t, a, power, theta, subspaces, &alive);

    let mut w_start = start.w.clone();
    for (j, live) in alive.iter().enumerate() {
        if !live {
            w_start[j] = CVector::zeros(ch.antennas);
        }
    }
    let rates: Vec<f64> =
        min_sinr.iter().zip(&alive).map(|(g, l)| if *l { cfg.rate_backoff * g.ln_1p() / std::f64::consts::LN_2 } else { 0.0 }).collect();
    let eta: Vec<f64> = prob
        .decoders
        .iter()
        .map(|d| {
            let interference: f64 = (0..j_total)
                .filter(|&i| i != d.stream)
                .map(|i| inner(ch.get(d.id), &w_start[i]).norm_sqr())
                .sum();
            1.001 * (interference + ch.noise(d.id)) / prob.sigma0
        })
        .collect();
    let mut x = prob.pack(&w_start, &rates, &eta);

    let objective = |x: &[f64]| prob.rates(x).iter().sum::<f64>();
    let mut sum_rates = vec![objective(&x)];
    let mut max_violations = vec![prob.violation(&prob.solution(&x))];
    let mut converged = false;
    let mut kkt_residual = f64::NAN;

    for _ in 0..cfg.max_iterations {
        let spec = prob.spec(&prob.anchors(&x));
        let report = solve(&spec, &x, &cfg.solver);
        if report.status == SolveStatus::InfeasibleStart {
            break;
        }
        let gain = report.objective - spec.objective_value(&x);
        x = report.x;
        let exact = exact_spec(&spec);
        let stationarity = exact.stationarity_residual(&x, &report.duals);
        let slackness = exact
            .constraints
            .iter()
            .zip(&report.duals)
            .map(|(c, l)| (l * c.value(&x)).abs())
            .fold(0.0f64, f64::max);
        kkt_residual = stationarity.max(slackness);
        sum_rates.push(objective(&x));
        max_violations.push(prob.violation(&prob.solution(&x)));
        if gain < cfg.epsilon {
            converged = true;
            break;
        }
    }

    Ok(ScaTrace { sum_rates, max_violations, solution: prob.solution(&x), converged, kkt_residual })
}

/// Result of the outer association search.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimization {
    pub dof: usize,
    /// Every association tried, in enumeration order, with its trace.
    pub runs: Vec<(StreamAssociation, ScaTrace)>,
    /// Index into `runs` of the highest final sum rate (first on ties).
    pub best: usize,
}

impl Optimization {
    pub fn best_run(&self) -> &(StreamAssociation, ScaTrace) {
        &self.runs[self.best]
    }
}

/// Find the maximum DoF, run SCA on up to `cfg.association_cap`
/// DoF-optimal associations and keep the best.
pub fn optimize_with_channels(
    ch: &ChannelSet,
    t: &Topology,
    power: f64,
    theta: &BTreeMap<usize, f64>,
    cfg: &ScaConfig,
) -> Result<Optimization> {
    let (dof, _) = max_dof(t, ch.antennas);
    if dof == 0 {
        return Err(Error::NoFeasibleStream);
    }
    let candidates = enumerate_feasible(t, ch.antennas, dof, cfg.association_cap.max(1));
    let runs = candidates
        .into_par_iter()
        .map(|a| run_sca(ch, t, &a, power, theta, cfg).map(|tr| (a, tr)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, (_, tr)) in runs.iter().enumerate() {
        if tr.sum_rate() > runs[best].1.sum_rate() {
            best = i;
        }
    }
    Ok(Optimization { dof, runs, best })
}

pub fn optimize_scenario(scenario: &Scenario, cfg: &ScaConfig) -> Result<Optimization> {
    scenario.validate()?;
    let ch = sample_channels(&scenario.topology, &scenario.channel, scenario.antennas, scenario.seed);
    optimize_with_channels(&ch, &scenario.topology, scenario.power_w(), &scenario.theta_w(), cfg)
}
