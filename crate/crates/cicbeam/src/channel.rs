//! Rician UAV-to-GBS channels and noise powers.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::network::Topology;
use crate::numerics::CVector;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// AWGN power in watts for a PSD in dBm/Hz over `bandwidth_hz`.
pub fn noise_power(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(psd_dbm_hz + 10.0 * bandwidth_hz.log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Channel power gain at the 1 m reference distance.
    pub tau0_db: f64,
    /// LoS-to-scattered power ratio; `f64::INFINITY` gives pure LoS.
    pub rician_factor: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
}

impl ChannelParams {
    pub fn reference() -> ChannelParams {
        ChannelParams { tau0_db: -60.0, rician_factor: 5.0, bandwidth_hz: 10e6, noise_psd_dbm_hz: -169.0 }
    }

    pub fn noise_power(&self) -> f64 {
        noise_power(self.noise_psd_dbm_hz, self.bandwidth_hz)
    }
}

/// Half-wavelength ULA response `[1, e^{i pi cos t}, ...] / sqrt(M)`.
pub fn los_steering(antennas: usize, angle: f64) -> CVector {
    let scale = 1.0 / (antennas as f64).sqrt();
    let phase = PI * angle.cos();
    CVector::from_fn(antennas, |m, _| Complex64::from_polar(scale, phase * m as f64))
}

/// Angle between the UAV array axis (the x axis) and the UAV->GBS direction.
pub fn steering_angle(t: &Topology, id: usize) -> f64 {
    let p = t.position(id);
    let d: Vec<f64> = (0..3).map(|k| p[k] - t.uav_position[k]).collect();
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return PI / 2.0;
    }
    (d[0] / norm).clamp(-1.0, 1.0).acos()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `h[id - 1]` is the channel to GBS `id`.
    pub h: Vec<CVector>,
    /// Noise power in watts per GBS.
    pub sigma2: Vec<f64>,
    pub params: ChannelParams,
    pub antennas: usize,
}

impl ChannelSet {
    pub fn get(&self, id: usize) -> &CVector {
        &self.h[id - 1]
    }

    pub fn noise(&self, id: usize) -> f64 {
        self.sigma2[id - 1]
    }

    /// One row per (GBS, antenna): `gbs_id,antenna_index,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gbs_id,antenna_index,re,im\n");
        for (k, h) in self.h.iter().enumerate() {
            for (m, z) in h.iter().enumerate() {
                out.push_str(&format!("{},{},{:e},{:e}\n", k + 1, m, z.re, z.im));
            }
        }
        out
    }

    /// Inverse of [`ChannelSet::to_csv`]; noise powers come from `params`.
    pub fn from_csv(text: &str, params: ChannelParams) -> Result<ChannelSet> {
        let mut rows: Vec<(usize, usize, Complex64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Config(format!("channel csv line {}: malformed row {line:?}", lineno + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let id: usize = f[0].trim().parse().map_err(|_| bad())?;
            let m: usize = f[1].trim().parse().map_err(|_| bad())?;
            let re: f64 = f[2].trim().parse().map_err(|_| bad())?;
            let im: f64 = f[3].trim().parse().map_err(|_| bad())?;
            if id == 0 {
                return Err(bad());
            }
            rows.push((id, m, Complex64::new(re, im)));
        }
        let n = rows.iter().map(|r| r.0).max().unwrap_or(0);
        let antennas = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let mut h = vec![CVector::zeros(antennas); n];
        let mut seen = vec![vec![false; antennas]; n];
        for (id, m, z) in rows {
            h[id - 1][m] = z;
            seen[id - 1][m] = true;
        }
        if seen.iter().flatten().any(|s| !s) {
            return Err(Error::Config("channel csv is missing entries".into()));
        }
        let sigma2 = vec![params.noise_power(); n];
        Ok(ChannelSet { h, sigma2, params, antennas })
    }
}

/// Draw one channel realization:
/// `h_n = sqrt(tau0 / d_n^2) (sqrt(K/(K+1)) h_los + sqrt(1/(K+1)) h_scat)` with
/// `h_scat ~ CN(0, I)`. Deterministic in `seed`.
pub fn sample_channels(t: &Topology, params: &ChannelParams, antennas: usize, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau0 = db_to_linear(params.tau0_db);
    let k = params.rician_factor;
    let (los_w, scat_w) = if k.is_infinite() { (1.0, 0.0) } else { ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt()) };
    let half = std::f64::consts::FRAC_1_SQRT_2;

    let h = t
        .distances()
        .iter()
        .enumerate()
        .map(|(idx, d)| {
            let los = los_steering(antennas, steering_angle(t, idx + 1));
            let scat = CVector::from_fn(antennas, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * half, im * half)
            });
            (los * Complex64::from(los_w) + scat * Complex64::from(scat_w)) * Complex64::from((tau0 / (d * d)).sqrt())
        })
        .collect();
    ChannelSet { h, sigma2: vec![params.noise_power(); t.num_gbs()], params: *params, antennas }
}
