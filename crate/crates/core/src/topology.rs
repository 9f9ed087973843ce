//! Cell geometry, channel generation and zero-forcing beamforming.
//!
//! A drop places `K` single-antenna UEs uniformly over a disk of radius `R`
//! around a BS carrying an `N_t`-element uniform linear array. Each UE sees a
//! Rician channel per subchannel: a line-of-sight steering component plus an
//! i.i.d. Rayleigh scatter term, scaled by the distance-dependent path loss.
//! The angular field of view is cut into `B` equal sectors ("beamspaces").

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ParamError, TopologyError};

/// Complex channel or beamforming vector of length `N_t`.
pub type CVector = DVector<Complex64>;

/// RNG stream identifiers derived from one master seed.
pub const STREAM_DROP: u64 = 0;
pub const STREAM_CHANNEL: u64 = 1;
pub const STREAM_MATCHING: u64 = 2;

/// Seeded generator for one purpose (`stream`) of one drop.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Utilization-cost coefficients `(rho_0, rho_1, rho_2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCoeffs {
    /// Fixed cost of running SIC for one far partner.
    pub rho0: f64,
    /// Slope of the SIC cost in `log10` of the SIC SINR.
    pub rho1: f64,
    /// Weight of the normalized spatial correlation.
    pub rho2: f64,
}

impl Default for CostCoeffs {
    fn default() -> Self {
        Self { rho0: 0.5, rho1: 0.24, rho2: 0.5 }
    }
}

/// System-level configuration. Physical quantities are linear SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub num_antennas: usize,
    pub num_subchannels: usize,
    pub num_beamspaces: usize,
    /// Total bandwidth in Hz, split evenly over the subchannels.
    pub total_bandwidth: f64,
    /// Cell radius in meters.
    pub cell_radius: f64,
    /// BS power budget in watts.
    pub max_bs_power: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    pub rician_kappa: f64,
    /// Inter-element spacing in carrier wavelengths.
    pub antenna_spacing: f64,
    /// Maximum number of UEs sharing one subchannel.
    pub coalition_cap: usize,
    pub cost_coeffs: CostCoeffs,
    pub num_ues: usize,
    /// Fraction of UEs able to run SIC, rounded half-up to a count.
    pub sic_fraction: f64,
    /// Default cost weight `w_k` assigned to every UE of a drop.
    pub ue_weight: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            num_antennas: 64,
            num_subchannels: 12,
            num_beamspaces: 10,
            total_bandwidth: 20e6,
            cell_radius: 250.0,
            max_bs_power: dbm_to_watts(33.0),
            noise_psd: dbm_to_watts(-140.0),
            rician_kappa: 9.0,
            antenna_spacing: 0.5,
            coalition_cap: 3,
            cost_coeffs: CostCoeffs::default(),
            num_ues: 25,
            sic_fraction: 0.5,
            ue_weight: 0.2,
        }
    }
}

impl SystemParams {
    /// Bandwidth of one subchannel, `B / M`.
    pub fn subchannel_bandwidth(&self) -> f64 {
        self.total_bandwidth / self.num_subchannels as f64
    }

    /// Noise power integrated over one subchannel, `N_0 B / M`.
    pub fn noise_power(&self) -> f64 {
        self.noise_psd * self.subchannel_bandwidth()
    }

    /// Number of SIC-capable UEs in a drop (half-up rounding).
    pub fn sic_count(&self) -> usize {
        ((self.sic_fraction * self.num_ues as f64) + 0.5).floor() as usize
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("total_bandwidth", self.total_bandwidth),
            ("cell_radius", self.cell_radius),
            ("max_bs_power", self.max_bs_power),
            ("noise_psd", self.noise_psd),
            ("antenna_spacing", self.antenna_spacing),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ParamError::NotPositive(name));
            }
        }
        if !(self.rician_kappa.is_finite() && self.rician_kappa >= 0.0) {
            return Err(ParamError::NotPositive("rician_kappa"));
        }
        let c = self.cost_coeffs;
        if !(c.rho0 >= 0.0 && c.rho1 >= 0.0 && c.rho2 >= 0.0) {
            return Err(ParamError::NotPositive("cost_coeffs"));
        }
        if !(self.ue_weight >= 0.0) {
            return Err(ParamError::NotPositive("ue_weight"));
        }
        if self.num_subchannels == 0 {
            return Err(ParamError::Invalid("num_subchannels must be at least 1".into()));
        }
        if self.num_ues <= self.num_subchannels {
            return Err(ParamError::Invalid(format!(
                "num_ues ({}) must exceed num_subchannels ({})",
                self.num_ues, self.num_subchannels
            )));
        }
        if self.num_antennas < self.num_ues {
            return Err(ParamError::Invalid(format!(
                "num_antennas ({}) must be at least num_ues ({})",
                self.num_antennas, self.num_ues
            )));
        }
        if self.coalition_cap == 0 {
            return Err(ParamError::Invalid("coalition_cap must be at least 1".into()));
        }
        if self.num_beamspaces < 2 {
            return Err(ParamError::Invalid("num_beamspaces must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.sic_fraction) {
            return Err(ParamError::Invalid("sic_fraction must lie in [0, 1]".into()));
        }
        if self.num_ues > self.num_subchannels * self.coalition_cap {
            return Err(ParamError::Invalid(format!(
                "{} UEs cannot fit into {} coalitions of at most {}",
                self.num_ues, self.num_subchannels, self.coalition_cap
            )));
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

/// Per-UE rate window and cost weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosTargets {
    /// Minimum acceptable rate `R_th` in bit/s.
    pub rate_min: f64,
    /// Ideal (saturating) rate `R_max` in bit/s.
    pub rate_max: f64,
}

impl QosTargets {
    /// Targets expressed as spectral efficiencies on one subchannel.
    pub fn from_spectral_efficiency(params: &SystemParams, se_min: f64, se_max: f64) -> Self {
        let bw = params.subchannel_bandwidth();
        Self { rate_min: se_min * bw, rate_max: se_max * bw }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.rate_min > 0.0 && self.rate_max > self.rate_min) {
            return Err(ParamError::Invalid(format!(
                "rate window must satisfy 0 < rate_min < rate_max, got [{}, {}]",
                self.rate_min, self.rate_max
            )));
        }
        Ok(())
    }
}

/// One UE: geometry, hardware capability, QoS window and cost weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeProfile {
    pub id: usize,
    /// Distance to the BS in meters.
    pub distance: f64,
    /// Angle of departure from array broadside, radians.
    pub angle: f64,
    pub sic_capable: bool,
    pub weight: f64,
    pub rate_min: f64,
    pub rate_max: f64,
}

/// Draws `K` UEs for one drop.
///
/// Distances are uniform over the disk area, angles uniform over the array's
/// broadside half-plane, and exactly [`SystemParams::sic_count`] UEs (picked
/// by a seeded shuffle) are SIC capable.
pub fn generate_drop(
    params: &SystemParams,
    qos: &QosTargets,
    seed: u64,
) -> Result<Vec<UeProfile>, ParamError> {
    params.validate()?;
    qos.validate()?;
    let mut rng = stream_rng(seed, STREAM_DROP);
    let k = params.num_ues;
    let mut profiles = Vec::with_capacity(k);
    for id in 0..k {
        // 1 - U lies in (0, 1], keeping the UE off the BS itself.
        let u: f64 = 1.0 - rng.random::<f64>();
        let distance = params.cell_radius * u.sqrt();
        let angle = loop {
            let a = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            if a > -FRAC_PI_2 {
                break a;
            }
        };
        profiles.push(UeProfile {
            id,
            distance,
            angle,
            sic_capable: false,
            weight: params.ue_weight,
            rate_min: qos.rate_min,
            rate_max: qos.rate_max,
        });
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut rng);
    for &id in order.iter().take(params.sic_count()) {
        profiles[id].sic_capable = true;
    }
    Ok(profiles)
}

/// Distance-dependent path loss in dB, distance in meters.
pub fn path_loss_db(distance: f64) -> Result<f64, TopologyError> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(TopologyError::NonPositiveDistance(distance));
    }
    Ok(128.1 + 37.6 * (distance / 1000.0).log10())
}

/// Linear large-scale power gain, `10^(-PL_dB / 10)`.
pub fn path_gain(distance: f64) -> Result<f64, TopologyError> {
    Ok(10f64.powf(-path_loss_db(distance)? / 10.0))
}

/// ULA steering vector, element `n` is `exp(-j 2 pi n spacing sin(angle))`.
pub fn steering_vector(angle: f64, num_antennas: usize, spacing: f64) -> CVector {
    let phase = -2.0 * PI * spacing * angle.sin();
    CVector::from_fn(num_antennas, |n, _| Complex64::from_polar(1.0, phase * n as f64))
}

/// Draws one Rician channel vector for `ue` on a subchannel.
pub fn sample_channel<R: Rng + ?Sized>(
    ue: &UeProfile,
    params: &SystemParams,
    rng: &mut R,
) -> Result<CVector, TopologyError> {
    let gain = path_gain(ue.distance)?.sqrt();
    let kappa = params.rician_kappa;
    let los_w = (kappa / (kappa + 1.0)).sqrt();
    let nlos_w = (1.0 / (kappa + 1.0)).sqrt();
    let los = steering_vector(ue.angle, params.num_antennas, params.antenna_spacing);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    Ok(CVector::from_fn(params.num_antennas, |n, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let z = Complex64::new(re * scale, im * scale);
        (los[n] * los_w + z * nlos_w) * gain
    }))
}

/// Index in `1..=B` of the uniform angular sector containing `angle`.
pub fn beamspace_of(angle: f64, num_beamspaces: usize) -> Result<usize, TopologyError> {
    if !(angle > -FRAC_PI_2 && angle < FRAC_PI_2) {
        return Err(TopologyError::AngleOutOfRange(angle));
    }
    let width = PI / num_beamspaces as f64;
    let idx = ((angle + FRAC_PI_2) / width).floor() as usize;
    Ok(idx.min(num_beamspaces - 1) + 1)
}

/// Channels `h[k][m]` for every UE and subchannel plus the beamspace map.
#[derive(Debug, Clone)]
pub struct ChannelState {
    channels: Vec<Vec<CVector>>,
    beamspace: Vec<usize>,
}

impl ChannelState {
    /// Samples fresh channels for a drop. Small-scale fading is independent
    /// across subchannels; the large-scale term is shared.
    pub fn sample(
        profiles: &[UeProfile],
        params: &SystemParams,
        seed: u64,
    ) -> Result<Self, TopologyError> {
        let mut rng = stream_rng(seed, STREAM_CHANNEL);
        let mut channels = Vec::with_capacity(profiles.len());
        let mut beamspace = Vec::with_capacity(profiles.len());
        for ue in profiles {
            let per_sc = (0..params.num_subchannels)
                .map(|_| sample_channel(ue, params, &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            channels.push(per_sc);
            beamspace.push(beamspace_of(ue.angle, params.num_beamspaces)?);
        }
        Ok(Self { channels, beamspace })
    }

    /// Builds a state from explicit channel vectors.
    pub fn from_parts(
        channels: Vec<Vec<CVector>>,
        beamspace: Vec<usize>,
    ) -> Result<Self, TopologyError> {
        if channels.len() != beamspace.len() {
            return Err(TopologyError::Shape(format!(
                "{} channel rows for {} beamspace entries",
                channels.len(),
                beamspace.len()
            )));
        }
        let m = channels.first().map_or(0, Vec::len);
        let n = channels.first().and_then(|r| r.first()).map_or(0, |h| h.len());
        for row in &channels {
            if row.len() != m {
                return Err(TopologyError::Shape("ragged subchannel dimension".into()));
            }
            for h in row {
                if h.len() != n {
                    return Err(TopologyError::Shape("ragged antenna dimension".into()));
                }
                if !h.iter().all(|c| c.re.is_finite() && c.im.is_finite()) || h.norm() == 0.0 {
                    return Err(TopologyError::DegenerateChannel);
                }
            }
        }
        Ok(Self { channels, beamspace })
    }

    pub fn channel(&self, ue: usize, subchannel: usize) -> &CVector {
        &self.channels[ue][subchannel]
    }

    pub fn beamspace(&self, ue: usize) -> usize {
        self.beamspace[ue]
    }

    pub fn beamspaces(&self) -> &[usize] {
        &self.beamspace
    }

    pub fn num_ues(&self) -> usize {
        self.channels.len()
    }

    pub fn num_subchannels(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

/// Relative pivot below which the stacked representative channels are
/// treated as rank deficient.
const ZF_CONDITION_FLOOR: f64 = 1e-12;

/// Zero-forcing beamformers for the members of one coalition on one
/// subchannel, returned in member order.
///
/// One representative per occupied beamspace (the member with the largest
/// channel norm) is stacked and inverted; a power-domain pair shares the
/// beamformer of its stronger member. A singleton gets the matched filter.
pub fn zf_beamformers(members: &[usize], channels: &[&CVector], beamspaces: &[usize]) -> Result<Vec<CVector>, TopologyError> {
    if members.is_empty() {
        return Err(TopologyError::EmptyCoalition);
    }
    if channels.len() != members.len() || beamspaces.len() != members.len() {
        return Err(TopologyError::Shape("member, channel and beamspace lists differ in length".into()));
    }
    if members.len() == 1 {
        let h = channels[0];
        let norm = h.norm();
        if norm == 0.0 {
            return Err(TopologyError::DegenerateChannel);
        }
        return Ok(vec![h / Complex64::from(norm)]);
    }

    // Representative member index (into `members`) for each occupied beamspace.
    let mut reps: Vec<(usize, usize)> = Vec::new(); // (beamspace, member position)
    for (pos, &b) in beamspaces.iter().enumerate() {
        match reps.iter_mut().find(|(rb, _)| *rb == b) {
            Some(entry) => {
                if channels[pos].norm() > channels[entry.1].norm() {
                    entry.1 = pos;
                }
            }
            None => reps.push((b, pos)),
        }
    }

    let n_t = channels[0].len();
    let r = reps.len();
    // Columns are normalized representative channels; scaling a column does
    // not change the direction of the corresponding ZF beam.
    let stacked = DMatrix::from_fn(n_t, r, |row, col| {
        let h = channels[reps[col].1];
        h[row] / Complex64::from(h.norm())
    });
    let gram = stacked.adjoint() * &stacked;
    let diag_max = (0..r).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    let lu = gram.clone().full_piv_lu();
    let pivots = lu.u().diagonal();
    let min_pivot = pivots.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > ZF_CONDITION_FLOOR * diag_max) {
        return Err(TopologyError::RankDeficient);
    }
    let inv = lu.try_inverse().ok_or(TopologyError::RankDeficient)?;
    let zf = stacked * inv;

    let beams: Vec<CVector> = (0..r)
        .map(|col| {
            let c = zf.column(col).into_owned();
            let norm = c.norm();
            c / Complex64::from(norm)
        })
        .collect();

    Ok(beamspaces
        .iter()
        .map(|b| {
            let col = reps.iter().position(|(rb, _)| rb == b).expect("every beamspace has a representative");
            beams[col].clone()
        })
        .collect())
}
