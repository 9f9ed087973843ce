//! Link quality and receiver-side utilization cost.
//!
//! [`SubchannelLink`] snapshots one coalition on one subchannel: the
//! zero-forcing beams, the cross gains `|h_i^H v_j|^2`, who cancels whom, and
//! the normalized channel correlations. Every per-UE quantity (SINR, rate,
//! SIC cost, spatial cost, utility) is evaluated against that snapshot for a
//! given power vector.
//!
//! [`ConflictModel`] is the location-only counterpart used while forming
//! coalitions, before any instantaneous channel is known.

use serde::{Deserialize, Serialize};

use crate::error::{CostError, TopologyError};
use crate::topology::{beamspace_of, path_gain, steering_vector, zf_beamformers, ChannelState, CostCoeffs, SystemParams, UeProfile};

/// Multiple-access mode of a coalition, encoded by the spatial indicator
/// `alpha` and the power-domain indicator `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessMode {
    Oma,
    SpatialNoma,
    PowerNoma,
    Hybrid,
}

impl AccessMode {
    pub fn from_indicators(alpha: bool, beta: bool) -> Self {
        match (alpha, beta) {
            (false, false) => Self::Oma,
            (true, false) => Self::SpatialNoma,
            (false, true) => Self::PowerNoma,
            (true, true) => Self::Hybrid,
        }
    }

    pub fn alpha(self) -> bool {
        matches!(self, Self::SpatialNoma | Self::Hybrid)
    }

    pub fn beta(self) -> bool {
        matches!(self, Self::PowerNoma | Self::Hybrid)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Oma => "oma",
            Self::SpatialNoma => "spatial",
            Self::PowerNoma => "power",
            Self::Hybrid => "hybrid",
        }
    }
}

/// `(alpha, beta)` for a multiset of member beamspaces.
///
/// `alpha` is set when the members span at least two beamspaces, `beta` when
/// some beamspace holds exactly two of them. A beamspace holding three or
/// more members is a forbidden configuration and is reported by
/// [`crate::coalition::is_forbidden`], not here.
pub fn mode_indicators(beamspaces: &[usize]) -> (bool, bool) {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for &b in beamspaces {
        match counts.iter_mut().find(|(bb, _)| *bb == b) {
            Some(e) => e.1 += 1,
            None => counts.push((b, 1)),
        }
    }
    (counts.len() >= 2, counts.iter().any(|&(_, c)| c == 2))
}

/// Coalition of UEs sharing one subchannel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coalition {
    pub members: Vec<usize>,
    pub mode: AccessMode,
}

impl Coalition {
    pub fn new(members: Vec<usize>, beamspaces: &[usize]) -> Self {
        let bs: Vec<usize> = members.iter().map(|&u| beamspaces[u]).collect();
        let (a, b) = mode_indicators(&bs);
        Self { members, mode: AccessMode::from_indicators(a, b) }
    }
}

/// Per-UE quantities at an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub sinr: f64,
    /// Achievable rate in bit/s.
    pub rate: f64,
    /// SINR when detecting the far partner's signal; only for SIC performers.
    pub sic_sinr: Option<f64>,
    pub cost_pd: f64,
    pub cost_sd: f64,
    pub cost: f64,
    pub utility: f64,
}

/// Shannon rate on one subchannel of width `bandwidth`.
pub fn data_rate(sinr: f64, bandwidth: f64) -> f64 {
    bandwidth * (1.0 + sinr.max(0.0)).log2()
}

/// Cost-aware utility `r / R_max - w g`.
pub fn utility(rate: f64, rate_max: f64, weight: f64, cost: f64) -> f64 {
    rate / rate_max - weight * cost
}

/// One SIC term `rho_0 - rho_1 log10(gamma_sic)`, clamped at zero.
///
/// Returns `(clamped, raw)`.
pub fn sic_term(coeffs: &CostCoeffs, sic_sinr: f64) -> (f64, f64) {
    let raw = coeffs.rho0 - coeffs.rho1 * sic_sinr.log10();
    (raw.max(0.0), raw)
}

/// A coalition on a specific subchannel with its beamformers in place.
#[derive(Debug, Clone)]
pub struct SubchannelLink {
    members: Vec<usize>,
    beamspace: Vec<usize>,
    norms: Vec<f64>,
    /// `gains[i][j] = |h_i^H v_j|^2`, receiver `i`, beam of member `j`.
    gains: Vec<Vec<f64>>,
    /// `|h_i^H h_j| / (|h_i| |h_j|)`.
    correlation: Vec<Vec<f64>>,
    weights: Vec<f64>,
    sic_capable: Vec<bool>,
    noise: f64,
    mode: AccessMode,
    coeffs: CostCoeffs,
}

impl SubchannelLink {
    /// Builds the snapshot for `members` on `subchannel`.
    pub fn new(
        members: &[usize],
        subchannel: usize,
        channels: &ChannelState,
        profiles: &[UeProfile],
        params: &SystemParams,
    ) -> Result<Self, TopologyError> {
        let hs: Vec<_> = members.iter().map(|&u| channels.channel(u, subchannel)).collect();
        let beamspace: Vec<usize> = members.iter().map(|&u| channels.beamspace(u)).collect();
        let beams = zf_beamformers(members, &hs, &beamspace)?;
        let n = members.len();
        let norms: Vec<f64> = hs.iter().map(|h| h.norm()).collect();
        let gains = (0..n)
            .map(|i| (0..n).map(|j| hs[i].dotc(&beams[j]).norm_sqr()).collect())
            .collect();
        let correlation = (0..n)
            .map(|i| (0..n).map(|j| hs[i].dotc(hs[j]).norm() / (norms[i] * norms[j])).collect())
            .collect();
        let (a, b) = mode_indicators(&beamspace);
        Ok(Self {
            members: members.to_vec(),
            beamspace,
            norms,
            gains,
            correlation,
            weights: members.iter().map(|&u| profiles[u].weight).collect(),
            sic_capable: members.iter().map(|&u| profiles[u].sic_capable).collect(),
            noise: params.noise_power(),
            mode: AccessMode::from_indicators(a, b),
            coeffs: params.cost_coeffs,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn mode(&self) -> AccessMode {
        self.mode
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn coeffs(&self) -> &CostCoeffs {
        &self.coeffs
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `|h_i^H v_j|^2` between local member indices.
    pub fn gain(&self, i: usize, j: usize) -> f64 {
        self.gains[i][j]
    }

    pub fn channel_norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    /// Local index of UE `ue`.
    pub fn position(&self, ue: usize) -> Result<usize, CostError> {
        self.members.iter().position(|&m| m == ue).ok_or(CostError::NotAMember(ue))
    }

    pub fn same_beamspace(&self, i: usize, j: usize) -> bool {
        self.beamspace[i] == self.beamspace[j]
    }

    /// Whether member `j`'s signal reaches member `i` as interference.
    ///
    /// Other-beamspace signals always do. Within a beamspace only the
    /// stronger member's signal interferes; the stronger member removes its
    /// weaker partner's signal by SIC.
    pub fn interferes(&self, i: usize, j: usize) -> bool {
        if i == j || self.mode == AccessMode::Oma {
            return false;
        }
        if self.same_beamspace(i, j) {
            self.norms[j] > self.norms[i]
        } else {
            true
        }
    }

    /// `(I_PD, I_SD)` seen by member `i`.
    pub fn interference(&self, i: usize, powers: &[f64]) -> (f64, f64) {
        let mut pd = 0.0;
        let mut sd = 0.0;
        for j in 0..self.len() {
            if !self.interferes(i, j) {
                continue;
            }
            let term = powers[j] * self.gains[i][j];
            if self.same_beamspace(i, j) {
                pd += term;
            } else {
                sd += term;
            }
        }
        (pd, sd)
    }

    /// SINR of local member `i`.
    pub fn sinr(&self, i: usize, powers: &[f64]) -> f64 {
        let (pd, sd) = self.interference(i, powers);
        powers[i] * self.gains[i][i] / (pd + sd + self.noise)
    }

    /// SINR of UE `ue` (global id).
    pub fn sinr_of(&self, ue: usize, powers: &[f64]) -> Result<f64, CostError> {
        Ok(self.sinr(self.position(ue)?, powers))
    }

    /// Weaker same-beamspace partners of member `i`, i.e. the signals it must
    /// cancel. Non-empty only for the near member of a power-domain pair.
    pub fn far_partners(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| j != i && self.same_beamspace(i, j) && self.norms[j] < self.norms[i])
    }

    pub fn near_partner(&self, i: usize) -> Option<usize> {
        (0..self.len()).find(|&j| j != i && self.same_beamspace(i, j) && self.norms[j] > self.norms[i])
    }

    pub fn is_sic_performer(&self, i: usize) -> bool {
        self.mode.beta() && self.far_partners(i).next().is_some()
    }

    /// SINR at near member `i` while detecting far member `j`.
    pub fn sic_sinr(&self, i: usize, j: usize, powers: &[f64]) -> f64 {
        let (_, sd) = self.interference(i, powers);
        powers[j] * self.gains[i][j] / (powers[i] * self.gains[i][i] + sd + self.noise)
    }

    /// SIC cost of member `i`, zero unless it is a near UE of a pair.
    /// Returns `(clamped, raw)`.
    pub fn sic_cost(&self, i: usize, powers: &[f64]) -> (f64, f64) {
        if !self.mode.beta() {
            return (0.0, 0.0);
        }
        self.far_partners(i).fold((0.0, 0.0), |(c, r), j| {
            let (ct, rt) = sic_term(&self.coeffs, self.sic_sinr(i, j, powers));
            (c + ct, r + rt)
        })
    }

    /// Spatial non-orthogonality cost of member `i`.
    pub fn spatial_cost(&self, i: usize) -> f64 {
        if !self.mode.alpha() {
            return 0.0;
        }
        (0..self.len())
            .filter(|&j| !self.same_beamspace(i, j))
            .map(|j| self.coeffs.rho2 * self.correlation[i][j])
            .sum()
    }

    /// Total utilization cost `beta psi_PD + alpha psi_SD` of member `i`.
    pub fn utilization_cost(&self, i: usize, powers: &[f64]) -> f64 {
        let (pd, raw) = self.sic_cost(i, powers);
        if raw < 0.0 {
            log::debug!(
                "negative SIC cost {raw:.4} for UE {} clamped to zero (SIC SINR above the cost model's range)",
                self.members[i]
            );
        }
        pd + self.spatial_cost(i)
    }

    /// Hardware check on this subchannel: the stronger member of every
    /// same-beamspace pair must be able to run SIC.
    pub fn sic_constraint_holds(&self) -> bool {
        (0..self.len()).all(|i| self.sic_capable[i] || self.far_partners(i).next().is_none())
    }

    /// Full per-member metrics for `powers` on a subchannel of `bandwidth`,
    /// normalizing rates by each member's `rate_max`.
    pub fn metrics(&self, powers: &[f64], bandwidth: f64, rate_max: &[f64]) -> Vec<LinkMetrics> {
        (0..self.len())
            .map(|i| {
                let sinr = self.sinr(i, powers);
                let rate = data_rate(sinr, bandwidth);
                let (cost_pd, _) = self.sic_cost(i, powers);
                let cost_sd = self.spatial_cost(i);
                let cost = self.utilization_cost(i, powers);
                let sic_sinr = if self.is_sic_performer(i) {
                    self.far_partners(i).next().map(|j| self.sic_sinr(i, j, powers))
                } else {
                    None
                };
                LinkMetrics {
                    sinr,
                    rate,
                    sic_sinr,
                    cost_pd,
                    cost_sd,
                    cost,
                    utility: utility(rate, rate_max[i], self.weights[i], cost),
                }
            })
            .collect()
    }
}

/// Location-only conflict model used for coalition formation.
///
/// Precomputes, for every pair of UEs, the normalized steering correlation
/// `|a(theta_k)^H a(theta_i)| / N_t` and the SIC log-ratio term.
#[derive(Debug, Clone)]
pub struct ConflictModel {
    path_gain: Vec<f64>,
    beamspace: Vec<usize>,
    sic_capable: Vec<bool>,
    weight: Vec<f64>,
    steering_corr: Vec<Vec<f64>>,
    sic_log_ratio: Vec<Vec<f64>>,
    coeffs: CostCoeffs,
    coalition_cap: usize,
}

impl ConflictModel {
    pub fn new(profiles: &[UeProfile], params: &SystemParams) -> Result<Self, TopologyError> {
        let beamspaces = profiles
            .iter()
            .map(|u| beamspace_of(u.angle, params.num_beamspaces))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_beamspaces(profiles, params, beamspaces)
    }

    /// Same as [`ConflictModel::new`] with an explicit beamspace map.
    pub fn with_beamspaces(profiles: &[UeProfile], params: &SystemParams, beamspace: Vec<usize>) -> Result<Self, TopologyError> {
        if beamspace.len() != profiles.len() {
            return Err(TopologyError::Shape("one beamspace per UE required".into()));
        }
        let path_gain = profiles.iter().map(|u| path_gain(u.distance)).collect::<Result<Vec<_>, _>>()?;
        let steering: Vec<_> = profiles
            .iter()
            .map(|u| steering_vector(u.angle, params.num_antennas, params.antenna_spacing))
            .collect();
        let n_t = params.num_antennas as f64;
        let k = profiles.len();
        let steering_corr = (0..k)
            .map(|a| (0..k).map(|b| steering[a].dotc(&steering[b]).norm() / n_t).collect())
            .collect();
        let floor = params.noise_power() / params.max_bs_power;
        let sic_log_ratio = (0..k)
            .map(|a| (0..k).map(|b| (path_gain[a] / (path_gain[b] + floor)).log10()).collect())
            .collect();
        Ok(Self {
            path_gain,
            beamspace,
            sic_capable: profiles.iter().map(|u| u.sic_capable).collect(),
            weight: profiles.iter().map(|u| u.weight).collect(),
            steering_corr,
            sic_log_ratio,
            coeffs: params.cost_coeffs,
            coalition_cap: params.coalition_cap,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.path_gain.len()
    }

    pub fn beamspace(&self, ue: usize) -> usize {
        self.beamspace[ue]
    }

    pub fn weight(&self, ue: usize) -> f64 {
        self.weight[ue]
    }

    pub fn coalition_cap(&self) -> usize {
        self.coalition_cap
    }

    pub fn sic_capable(&self, ue: usize) -> bool {
        self.sic_capable[ue]
    }

    pub fn path_gain(&self, ue: usize) -> f64 {
        self.path_gain[ue]
    }

    /// Conflict intensity of UE `k` in a coalition with `members` (entries
    /// equal to `k` are ignored).
    ///
    /// The SIC terms, including the fixed `rho_0` charge, apply only when `k`
    /// is the stronger member of a same-beamspace pair; other-beamspace
    /// members contribute their normalized steering correlation.
    pub fn conflict(&self, k: usize, members: &[usize]) -> f64 {
        let c = &self.coeffs;
        members
            .iter()
            .filter(|&&i| i != k)
            .map(|&i| {
                if self.beamspace[i] == self.beamspace[k] {
                    if self.path_gain[k] > self.path_gain[i] {
                        c.rho0 - c.rho1 * self.sic_log_ratio[k][i]
                    } else {
                        0.0
                    }
                } else {
                    c.rho2 * self.steering_corr[k][i]
                }
            })
            .sum()
    }

    /// `sum_k w_k g~_k` over one coalition.
    pub fn weighted_conflict(&self, members: &[usize]) -> f64 {
        members.iter().map(|&k| self.weight[k] * self.conflict(k, members)).sum()
    }
}
