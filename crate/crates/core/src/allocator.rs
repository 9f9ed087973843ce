//! Stage II: joint subchannel and power allocation for a fixed coalition
//! structure.
//!
//! Rates are replaced by a concave lower bound tangent at the rate floor,
//! powers are written as `p = exp(z)`, and the rate window and power budget
//! are dualized. For fixed multipliers the problem splits into one power
//! subproblem per (coalition, subchannel) pair; the pairs are then matched by
//! the Hungarian method. Rate multipliers follow projected subgradient steps
//! and the power multiplier is found by bisection.

use std::f64::consts::{LN_10, LN_2};

use serde::{Deserialize, Serialize};

use crate::coalition::CoalitionStructure;
use crate::cost::{AccessMode, LinkMetrics, SubchannelLink};
use crate::error::AllocError;
use crate::hungarian::assign_subchannels;
use crate::topology::{ChannelState, SystemParams, UeProfile};

/// Tangent constants of the rate lower bound `a log2(gamma) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaConstants {
    pub a: f64,
    pub b: f64,
    /// SINR at the rate floor; the bound is tight here.
    pub gamma_th: f64,
    /// SINR at the rate ceiling.
    pub gamma_max: f64,
}

impl ScaConstants {
    /// Constants for a UE with rate window `[rate_min, rate_max]` on a
    /// subchannel of width `bandwidth`.
    pub fn new(rate_min: f64, rate_max: f64, bandwidth: f64) -> Result<Self, AllocError> {
        if !(rate_min > 0.0 && rate_max > rate_min && bandwidth > 0.0) {
            return Err(AllocError::InvalidRates(rate_min, rate_max));
        }
        let gamma_th = (rate_min / bandwidth).exp2() - 1.0;
        let gamma_max = (rate_max / bandwidth).exp2() - 1.0;
        Ok(Self::from_sinr(gamma_th, gamma_max))
    }

    /// Constants tangent at `gamma_th`.
    pub fn from_sinr(gamma_th: f64, gamma_max: f64) -> Self {
        let a = gamma_th / (1.0 + gamma_th);
        let b = (1.0 + gamma_th).log2() - a * gamma_th.log2();
        Self { a, b, gamma_th, gamma_max }
    }

    /// Lower bound on spectral efficiency, `a log2(gamma) + b`.
    pub fn spectral_efficiency(&self, gamma: f64) -> f64 {
        self.a * gamma.log2() + self.b
    }
}

/// Surrogate rate `bandwidth (a log2(gamma) + b)`, never above the Shannon rate.
pub fn rate_lower_bound(gamma: f64, sca: &ScaConstants, bandwidth: f64) -> Result<f64, AllocError> {
    if !(gamma > 0.0) {
        return Err(AllocError::NonPositiveSinr(gamma));
    }
    Ok(bandwidth * sca.spectral_efficiency(gamma))
}

/// Lagrange multipliers: `eta` (rate floor) and `mu` (rate ceiling) per UE,
/// `nu` for the power budget with its bisection bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: f64,
    pub nu_min: f64,
    pub nu_max: f64,
}

impl DualState {
    pub fn zeros(num_ues: usize) -> Self {
        Self { eta: vec![0.0; num_ues], mu: vec![0.0; num_ues], nu: 0.0, nu_min: 0.0, nu_max: 0.0 }
    }
}

/// Projected subgradient step on the rate multipliers.
///
/// `eta` grows while a surrogate rate sits below its floor, `mu` while it
/// exceeds its ceiling; both are clipped at zero.
pub fn subgradient_step(dual: &DualState, surrogate_rates: &[f64], rate_min: &[f64], rate_max: &[f64], step: f64) -> DualState {
    let mut next = dual.clone();
    for k in 0..surrogate_rates.len() {
        next.eta[k] = (dual.eta[k] + step * (rate_min[k] - surrogate_rates[k])).max(0.0);
        next.mu[k] = (dual.mu[k] + step * (surrogate_rates[k] - rate_max[k])).max(0.0);
    }
    next
}

/// Per-member data a power subproblem needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberTerms {
    pub sca: ScaConstants,
    pub rate_max: f64,
    pub eta: f64,
    pub mu: f64,
}

impl MemberTerms {
    /// `(1/R_max + eta - mu)`, the marginal value of surrogate rate.
    pub fn rate_price(&self) -> f64 {
        1.0 / self.rate_max + self.eta - self.mu
    }

    /// `D_k = price * bandwidth * a / ln 2`.
    pub fn d(&self, bandwidth: f64) -> f64 {
        self.rate_price() * bandwidth * self.sca.a / LN_2
    }
}

/// Knobs of the power fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Power assigned to a UE whose rate price is not positive.
    pub power_floor: f64,
    pub initial_power: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200, power_floor: 1e-12, initial_power: 0.08 }
    }
}

/// Solution of one (coalition, subchannel) power subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    pub powers: Vec<f64>,
    /// Largest relative power change in the last fixed-point sweep.
    pub residual: f64,
    pub iterations: usize,
}

/// Optimal member powers for one coalition on one subchannel at fixed
/// multipliers, with every SINR capped at its ceiling.
///
/// A pure power-domain pair uses the closed form: the near UE first, then
/// the far UE given the near UE's interference. Every other mode iterates
/// the stationarity condition `p_k = num_k / (nu + den_k(p))`, which for
/// hybrid coalitions also carries the SIC-cost gradient terms.
pub fn solve_power_subproblem(
    link: &SubchannelLink,
    members: &[MemberTerms],
    nu: f64,
    bandwidth: f64,
    opts: &FixedPointOptions,
) -> Result<PowerSolution, AllocError> {
    let n = link.len();
    let noise = link.noise();
    let d: Vec<f64> = members.iter().map(|m| m.d(bandwidth)).collect();
    let cap = |k: usize, powers: &[f64]| {
        let (pd, sd) = link.interference(k, powers);
        members[k].sca.gamma_max * (pd + sd + noise) / link.gain(k, k)
    };
    let price_branch = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };

    if link.mode() == AccessMode::PowerNoma && n == 2 {
        let near = if link.far_partners(0).next().is_some() { 0 } else { 1 };
        let far = 1 - near;
        let mut powers = vec![0.0; 2];
        for k in [near, far] {
            powers[k] = if d[k] <= 0.0 {
                opts.power_floor
            } else {
                cap(k, &powers).min(price_branch(d[k], nu)).max(opts.power_floor)
            };
        }
        return Ok(PowerSolution { powers, residual: 0.0, iterations: 1 });
    }

    let hybrid = link.mode() == AccessMode::Hybrid;
    let rho1 = link.coeffs().rho1;
    // SIC-cost gradient weight charged through near UE `i`.
    let sic_weight = |i: usize| rho1 * link.weight(i) / LN_10;
    // numerator: D_k plus, for a far UE of a hybrid pair, its near partner's
    // SIC-cost derivative
    let num: Vec<f64> = (0..n)
        .map(|k| {
            let extra = if hybrid {
                link.near_partner(k).map_or(0.0, sic_weight)
            } else {
                0.0
            };
            d[k] + extra
        })
        .collect();

    let mut powers = vec![opts.initial_power; n];
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let interference: Vec<(f64, f64)> = (0..n).map(|i| link.interference(i, &powers)).collect();
        let next: Vec<f64> = (0..n)
            .map(|k| {
                if num[k] <= 0.0 {
                    return opts.power_floor;
                }
                let mut den = nu;
                for i in 0..n {
                    if link.interferes(i, k) {
                        let (pd, sd) = interference[i];
                        let loss = d[i].max(0.0) * link.gain(i, k) / (pd + sd + noise);
                        // a UE pinned at its SINR ceiling can instead buy back
                        // the interference with its own power
                        let at_ceiling = powers[i] * link.gain(i, i) >= members[i].sca.gamma_max * (pd + sd + noise) * (1.0 - 1e-9);
                        den += if at_ceiling {
                            loss.min(nu * members[i].sca.gamma_max * link.gain(i, k) / link.gain(i, i))
                        } else {
                            loss
                        };
                    }
                }
                if hybrid {
                    for i in 0..n {
                        if !link.is_sic_performer(i) {
                            continue;
                        }
                        let touches = i == k || (link.interferes(i, k) && !link.same_beamspace(i, k));
                        if touches {
                            let (_, sd) = interference[i];
                            den += sic_weight(i) * link.gain(i, k) / (powers[i] * link.gain(i, i) + sd + noise);
                        }
                    }
                }
                let (pd, sd) = interference[k];
                let ceiling = members[k].sca.gamma_max * (pd + sd + noise) / link.gain(k, k);
                price_branch(num[k], den).min(ceiling).max(opts.power_floor)
            })
            .collect();
        residual = next
            .iter()
            .zip(&powers)
            .map(|(a, b)| (a - b).abs() / b)
            .fold(0.0, f64::max);
        powers = next;
        if residual < opts.tol {
            return Ok(PowerSolution { powers, residual, iterations: it });
        }
    }
    log::debug!("power fixed point stalled at residual {residual:.3e}");
    Err(AllocError::NotConverged(opts.max_iter))
}

/// Assignment weight of a (coalition, subchannel) pair at `powers`:
/// `sum_k [price_k B/M a_k log2(gamma_k) - nu p_k - w_k g_k]`.
pub fn subproblem_value(link: &SubchannelLink, members: &[MemberTerms], nu: f64, bandwidth: f64, powers: &[f64]) -> f64 {
    (0..link.len())
        .map(|k| {
            let gamma = link.sinr(k, powers);
            members[k].rate_price() * bandwidth * members[k].sca.a * gamma.log2() - nu * powers[k] - link.weight(k) * link.utilization_cost(k, powers)
        })
        .sum()
}

/// Solver settings for [`allocate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocOptions {
    /// Relative change of the dual value that ends the inner loop.
    pub eps_dual: f64,
    /// Bisection stops once the bracket is this fraction of `nu_max`.
    pub eps_nu: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Base subgradient step in units of `1 / (R_max * B/M)`; decays as `1/sqrt(t)`.
    pub step_scale: f64,
    /// Relative shortfall below the rate floor still counted as feasible
    /// when picking the iterate to return.
    pub rate_slack: f64,
    pub fixed_point: FixedPointOptions,
    /// Initial upper end of the power-price bracket.
    pub nu_start: f64,
}

impl Default for AllocOptions {
    fn default() -> Self {
        Self {
            eps_dual: 1e-5,
            eps_nu: 1e-4,
            max_inner: 500,
            max_outer: 40,
            step_scale: 0.5,
            rate_slack: 0.005,
            fixed_point: FixedPointOptions::default(),
            nu_start: 1.0,
        }
    }
}

/// Output of [`allocate`]. Per-UE vectors are indexed by UE id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Allocation {
    /// Subchannel serving each coalition; a permutation.
    pub subchannel_of: Vec<usize>,
    pub modes: Vec<AccessMode>,
    pub powers: Vec<f64>,
    pub log_powers: Vec<f64>,
    pub surrogate_rates: Vec<f64>,
    pub metrics: Vec<LinkMetrics>,
    pub dual: DualState,
    /// Dual function value at the returned multipliers.
    pub dual_value: f64,
    /// `sum_k (r_bar_k / R_max - w_k g_k)`.
    pub primal_value: f64,
    pub converged: bool,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
}

impl Allocation {
    /// Binary indicator `s[n][m]`.
    pub fn assignment_matrix(&self) -> Vec<Vec<u8>> {
        let m = self.subchannel_of.len();
        self.subchannel_of
            .iter()
            .map(|&sc| (0..m).map(|j| u8::from(j == sc)).collect())
            .collect()
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// One pass over all pairs at fixed multipliers.
#[derive(Debug, Clone)]
struct Iterate {
    perm: Vec<usize>,
    powers: Vec<f64>,
    surrogate: Vec<f64>,
    dual_value: f64,
    primal_value: f64,
}

struct Problem<'a> {
    structure: &'a CoalitionStructure,
    links: Vec<Vec<Option<SubchannelLink>>>,
    sca: Vec<ScaConstants>,
    rate_min: Vec<f64>,
    rate_max: Vec<f64>,
    bandwidth: f64,
    max_power: f64,
    opts: AllocOptions,
}

impl Problem<'_> {
    fn member_terms(&self, members: &[usize], dual: &DualState) -> Vec<MemberTerms> {
        members
            .iter()
            .map(|&u| MemberTerms { sca: self.sca[u], rate_max: self.rate_max[u], eta: dual.eta[u], mu: dual.mu[u] })
            .collect()
    }

    fn evaluate(&self, dual: &DualState) -> Result<Iterate, AllocError> {
        let m = self.links.len();
        let mut weights = vec![vec![f64::NEG_INFINITY; m]; m];
        let mut solutions: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; m]; m];
        for (n, row) in self.links.iter().enumerate() {
            let members = &self.structure.coalitions()[n];
            let terms = self.member_terms(members, dual);
            for (sc, link) in row.iter().enumerate() {
                let Some(link) = link else { continue };
                match solve_power_subproblem(link, &terms, dual.nu, self.bandwidth, &self.opts.fixed_point) {
                    Ok(sol) => {
                        let v = subproblem_value(link, &terms, dual.nu, self.bandwidth, &sol.powers);
                        if v.is_finite() {
                            weights[n][sc] = v;
                            solutions[n][sc] = Some(sol.powers);
                        }
                    }
                    Err(AllocError::NotConverged(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        let perm = assign_subchannels(&weights)?;
        let k = self.sca.len();
        let mut powers = vec![0.0; k];
        let mut surrogate = vec![0.0; k];
        let mut primal = 0.0;
        let mut dual_value = dual.nu * self.max_power;
        for (n, &sc) in perm.iter().enumerate() {
            let members = &self.structure.coalitions()[n];
            let link = self.links[n][sc].as_ref().expect("assigned pair is feasible");
            let p = solutions[n][sc].as_ref().expect("assigned pair has a solution");
            dual_value += weights[n][sc];
            for (i, &u) in members.iter().enumerate() {
                powers[u] = p[i];
                let gamma = link.sinr(i, p);
                surrogate[u] = self.bandwidth * self.sca[u].spectral_efficiency(gamma);
                primal += surrogate[u] / self.rate_max[u] - link.weight(i) * link.utilization_cost(i, p);
                let price = 1.0 / self.rate_max[u] + dual.eta[u] - dual.mu[u];
                dual_value += price * self.bandwidth * self.sca[u].b - dual.eta[u] * self.rate_min[u] + dual.mu[u] * self.rate_max[u];
            }
        }
        Ok(Iterate { perm, powers, surrogate, dual_value, primal_value: primal })
    }

    fn shortfall(&self, it: &Iterate) -> f64 {
        it.surrogate
            .iter()
            .zip(&self.rate_min)
            .map(|(r, min)| (min - r) / min)
            .fold(0.0, f64::max)
    }

    /// Subgradient loop on `eta`, `mu` at fixed `nu`. Returns the iterate to
    /// keep, whether the dual value settled, and the iteration count.
    fn inner(&self, dual: &mut DualState) -> Result<(Iterate, bool, usize), AllocError> {
        let step0 = self.opts.step_scale / (self.bandwidth * mean(&self.rate_max));
        let mut prev: Option<f64> = None;
        let mut best: Option<Iterate> = None;
        let mut last = None;
        let mut converged = false;
        let mut t = 0;
        while t < self.opts.max_inner {
            t += 1;
            let it = self.evaluate(dual)?;
            if self.shortfall(&it) <= self.opts.rate_slack && best.as_ref().is_none_or(|b| it.primal_value > b.primal_value) {
                best = Some(it.clone());
            }
            let settled = prev.is_some_and(|p| (it.dual_value - p).abs() <= self.opts.eps_dual * it.dual_value.abs().max(f64::MIN_POSITIVE));
            prev = Some(it.dual_value);
            if settled {
                converged = true;
                last = Some(it);
                break;
            }
            let next = subgradient_step(dual, &it.surrogate, &self.rate_min, &self.rate_max, step0 / (t as f64).sqrt());
            let unchanged = next.eta == dual.eta && next.mu == dual.mu;
            *dual = next;
            last = Some(it);
            if unchanged {
                converged = true;
                break;
            }
        }
        let last = last.expect("at least one inner iteration");
        let keep = if self.shortfall(&last) <= self.opts.rate_slack {
            last
        } else if let Some(b) = best {
            b
        } else {
            last
        };
        Ok((keep, converged, t))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Joint subchannel and power allocation for a coalition structure with
/// exactly as many coalitions as subchannels.
///
/// Runs the subgradient loop at `nu = 0` first and stops if the power budget
/// already holds. Otherwise grows `nu_max` by doubling until the budget
/// holds and bisects `nu` down to the budget boundary, returning the last
/// budget-feasible iterate.
pub fn allocate(
    structure: &CoalitionStructure,
    channels: &ChannelState,
    profiles: &[UeProfile],
    params: &SystemParams,
    opts: &AllocOptions,
) -> Result<Allocation, AllocError> {
    let m = channels.num_subchannels();
    if structure.num_coalitions() != m {
        return Err(AllocError::ShapeMismatch { coalitions: structure.num_coalitions(), subchannels: m });
    }
    let bandwidth = params.subchannel_bandwidth();
    let k = profiles.len();
    let sca = profiles
        .iter()
        .map(|u| ScaConstants::new(u.rate_min, u.rate_max, bandwidth))
        .collect::<Result<Vec<_>, _>>()?;
    let mut links = Vec::with_capacity(m);
    for members in structure.coalitions() {
        let mut row = Vec::with_capacity(m);
        for sc in 0..m {
            let link = SubchannelLink::new(members, sc, channels, profiles, params)?;
            row.push(link.sic_constraint_holds().then_some(link));
        }
        links.push(row);
    }
    let mut opts = *opts;
    opts.fixed_point.initial_power = params.max_bs_power / k as f64;
    let problem = Problem {
        structure,
        links,
        sca,
        rate_min: profiles.iter().map(|u| u.rate_min).collect(),
        rate_max: profiles.iter().map(|u| u.rate_max).collect(),
        bandwidth,
        max_power: params.max_bs_power,
        opts,
    };
    let budget = params.max_bs_power;
    let power = |it: &Iterate| it.powers.iter().sum::<f64>();

    let mut dual = DualState::zeros(k);
    let mut inner_total = 0;
    let mut outer = 0;
    let mut all_converged = true;
    let (first, conv, t) = problem.inner(&mut dual)?;
    inner_total += t;
    all_converged &= conv;

    let (chosen, chosen_dual) = if power(&first) <= budget {
        (first, dual.clone())
    } else {
        let mut lo = 0.0;
        let mut hi = opts.nu_start;
        let mut feasible;
        loop {
            outer += 1;
            dual.nu = hi;
            let (it, conv, t) = problem.inner(&mut dual)?;
            inner_total += t;
            all_converged &= conv;
            if power(&it) <= budget {
                feasible = (it, dual.clone());
                break;
            }
            lo = hi;
            hi *= 2.0;
            if outer > 200 {
                log::warn!("power price diverged while searching for a budget-feasible bracket");
                feasible = (it, dual.clone());
                all_converged = false;
                break;
            }
        }
        for _ in 0..opts.max_outer {
            if hi - lo <= opts.eps_nu * hi {
                break;
            }
            outer += 1;
            let mid = 0.5 * (lo + hi);
            dual.nu = mid;
            let (it, conv, t) = problem.inner(&mut dual)?;
            inner_total += t;
            all_converged &= conv;
            if power(&it) > budget {
                lo = mid;
            } else {
                hi = mid;
                feasible = (it, dual.clone());
            }
        }
        let (it, mut d) = feasible;
        d.nu_min = lo;
        d.nu_max = hi;
        (it, d)
    };
    if !all_converged {
        log::warn!("subgradient loop hit its iteration cap; returning the best feasible iterate");
    }

    let mut metrics = vec![
        LinkMetrics { sinr: 0.0, rate: 0.0, sic_sinr: None, cost_pd: 0.0, cost_sd: 0.0, cost: 0.0, utility: 0.0 };
        k
    ];
    let mut modes = Vec::with_capacity(m);
    for (n, &sc) in chosen.perm.iter().enumerate() {
        let members = &structure.coalitions()[n];
        let link = problem.links[n][sc].as_ref().expect("assigned pair is feasible");
        modes.push(link.mode());
        let p: Vec<f64> = members.iter().map(|&u| chosen.powers[u]).collect();
        let r_max: Vec<f64> = members.iter().map(|&u| problem.rate_max[u]).collect();
        for (i, lm) in link.metrics(&p, bandwidth, &r_max).into_iter().enumerate() {
            metrics[members[i]] = lm;
        }
    }
    Ok(Allocation {
        subchannel_of: chosen.perm,
        modes,
        log_powers: chosen.powers.iter().map(|p| p.ln()).collect(),
        powers: chosen.powers,
        surrogate_rates: chosen.surrogate,
        metrics,
        dual: chosen_dual,
        dual_value: chosen.dual_value,
        primal_value: chosen.primal_value,
        converged: all_converged,
        inner_iterations: inner_total,
        outer_iterations: outer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::generate_drop;
    use crate::topology::QosTargets;

    fn params_with(k: usize) -> SystemParams {
        SystemParams { num_ues: k, ..SystemParams::default() }
    }

    fn drop(params: &SystemParams, seed: u64) -> (Vec<UeProfile>, ChannelState) {
        let qos = QosTargets::from_spectral_efficiency(params, 1.15, 3.3);
        let profiles = generate_drop(params, &qos, seed).unwrap();
        let channels = ChannelState::sample(&profiles, params, seed).unwrap();
        (profiles, channels)
    }

    /// `M` UEs on `M` subchannels: the first `M` UEs of a larger drop.
    fn square_drop(params: &SystemParams, seed: u64) -> (Vec<UeProfile>, ChannelState) {
        let m = params.num_subchannels;
        let (mut profiles, channels) = drop(&SystemParams { num_ues: m + 1, ..params.clone() }, seed);
        profiles.truncate(m);
        let rows = (0..m).map(|u| (0..m).map(|sc| channels.channel(u, sc).clone()).collect()).collect();
        let channels = ChannelState::from_parts(rows, channels.beamspaces()[..m].to_vec()).unwrap();
        (profiles, channels)
    }

    fn terms(profiles: &[UeProfile], members: &[usize], bw: f64) -> Vec<MemberTerms> {
        members
            .iter()
            .map(|&u| MemberTerms {
                sca: ScaConstants::new(profiles[u].rate_min, profiles[u].rate_max, bw).unwrap(),
                rate_max: profiles[u].rate_max,
                eta: 0.0,
                mu: 0.0,
            })
            .collect()
    }

    #[test]
    fn surrogate_is_tangent_at_threshold() {
        let bw = 20e6 / 12.0;
        let sca = ScaConstants::new(1.15 * bw, 3.3 * bw, bw).unwrap();
        assert!((sca.gamma_th - (2f64.powf(1.15) - 1.0)).abs() < 1e-12);
        assert!((sca.gamma_max - (2f64.powf(3.3) - 1.0)).abs() < 1e-12);
        let at = rate_lower_bound(sca.gamma_th, &sca, bw).unwrap();
        assert!((at - 1.15 * bw).abs() < 1e-9 * at);
        let g = 2.0 * sca.gamma_th;
        assert!(rate_lower_bound(g, &sca, bw).unwrap() < bw * (1.0 + g).log2());
        assert!(rate_lower_bound(1e-300, &sca, bw).unwrap() < -500.0 * bw);
        assert_eq!(rate_lower_bound(0.0, &sca, bw), Err(AllocError::NonPositiveSinr(0.0)));
        assert!(ScaConstants::new(2.0, 1.0, bw).is_err());
    }

    #[test]
    fn subgradient_moves_only_violated_multipliers() {
        let d = DualState::zeros(3);
        let next = subgradient_step(&d, &[2.0, 0.5, 5.0], &[1.0; 3], &[3.0; 3], 0.1);
        assert_eq!(next.eta, vec![0.0, 0.05, 0.0]);
        assert_eq!(next.mu[0], 0.0);
        assert_eq!(next.mu[1], 0.0);
        assert!((next.mu[2] - 0.2).abs() < 1e-15);
        // projection keeps multipliers nonnegative
        let d = DualState { eta: vec![0.01], mu: vec![0.01], ..DualState::zeros(1) };
        let next = subgradient_step(&d, &[2.0], &[1.0], &[3.0], 1.0);
        assert_eq!((next.eta[0], next.mu[0]), (0.0, 0.0));
    }

    #[test]
    fn singleton_power_is_price_over_nu() {
        let params = params_with(13);
        let (profiles, channels) = drop(&params, 3);
        let bw = params.subchannel_bandwidth();
        let far = (0..13).max_by(|&a, &b| profiles[a].distance.total_cmp(&profiles[b].distance)).unwrap();
        let link = SubchannelLink::new(&[far], 0, &channels, &profiles, &params).unwrap();
        let t = terms(&profiles, &[far], bw);
        let cap = t[0].sca.gamma_max * link.noise() / link.gain(0, 0);
        let nu = 2.0 * t[0].d(bw) / cap;
        let sol = solve_power_subproblem(&link, &t, nu, bw, &FixedPointOptions::default()).unwrap();
        assert!((sol.powers[0] - t[0].d(bw) / nu).abs() < 1e-12 * sol.powers[0]);
        assert!(sol.residual < 1e-8);
        // closed-form value
        let gamma = sol.powers[0] * link.gain(0, 0) / link.noise();
        let expect = t[0].rate_price() * bw * t[0].sca.a * gamma.log2() - nu * sol.powers[0];
        assert!((subproblem_value(&link, &t, nu, bw, &sol.powers) - expect).abs() < 1e-12);
        // nu = 0 lands on the SINR ceiling
        let sol = solve_power_subproblem(&link, &t, 0.0, bw, &FixedPointOptions::default()).unwrap();
        assert!((link.sinr(0, &sol.powers) / t[0].sca.gamma_max - 1.0).abs() < 1e-9);
        // a non-positive price floors the power
        let mut neg = t.clone();
        neg[0].mu = 2.0 / neg[0].rate_max;
        let sol = solve_power_subproblem(&link, &neg, nu, bw, &FixedPointOptions::default()).unwrap();
        assert_eq!(sol.powers[0], 1e-12);
    }

    #[test]
    fn value_falls_as_power_price_rises() {
        let params = params_with(13);
        let (profiles, channels) = drop(&params, 4);
        let bw = params.subchannel_bandwidth();
        let link = SubchannelLink::new(&[0, 1], 0, &channels, &profiles, &params).unwrap();
        let t = terms(&profiles, &[0, 1], bw);
        let p = [0.1, 0.2];
        assert!(subproblem_value(&link, &t, 1.0, bw, &p) > subproblem_value(&link, &t, 2.0, bw, &p));
    }

    #[test]
    fn power_pair_takes_price_branch_under_large_nu() {
        let params = params_with(25);
        let (mut profiles, channels) = drop(&params, 5);
        let bw = params.subchannel_bandwidth();
        let bs = channels.beamspaces();
        let (i, j) = (0..25)
            .flat_map(|i| (i + 1..25).map(move |j| (i, j)))
            .find(|&(i, j)| bs[i] == bs[j])
            .expect("some beamspace holds two UEs");
        profiles[i].sic_capable = true;
        profiles[j].sic_capable = true;
        let link = SubchannelLink::new(&[i, j], 0, &channels, &profiles, &params).unwrap();
        assert_eq!(link.mode(), AccessMode::PowerNoma);
        let t = terms(&profiles, &[i, j], bw);
        let nu = 1e6;
        let sol = solve_power_subproblem(&link, &t, nu, bw, &FixedPointOptions::default()).unwrap();
        for k in 0..2 {
            assert!((sol.powers[k] - t[k].d(bw) / nu).abs() < 1e-12 * sol.powers[k]);
        }
        // near UE first, far UE capped against the near UE's interference
        let sol = solve_power_subproblem(&link, &t, 0.0, bw, &FixedPointOptions::default()).unwrap();
        for k in 0..2 {
            assert!((link.sinr(k, &sol.powers) / t[k].sca.gamma_max - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn generous_budget_puts_singletons_on_ceiling() {
        let params = SystemParams { num_ues: 12, max_bs_power: 100.0, ..SystemParams::default() };
        let (profiles, channels) = square_drop(&params, 6);
        let s = CoalitionStructure::singletons(12);
        let a = allocate(&s, &channels, &profiles, &params, &AllocOptions::default()).unwrap();
        assert_eq!(a.dual.nu, 0.0);
        assert_eq!(a.outer_iterations, 0);
        for m in &a.metrics {
            assert!((m.rate / profiles[0].rate_max - 1.0).abs() < 1e-9);
            assert_eq!(m.cost, 0.0);
        }
        let mut seen = a.subchannel_of.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
        assert_eq!(a.assignment_matrix().iter().map(|r| r.iter().map(|&x| x as usize).sum::<usize>()).collect::<Vec<_>>(), vec![1; 12]);
    }

    #[test]
    fn tight_budget_is_active() {
        let params = SystemParams { num_ues: 12, max_bs_power: 0.2, ..SystemParams::default() };
        let (profiles, channels) = square_drop(&params, 7);
        let s = CoalitionStructure::singletons(12);
        let a = allocate(&s, &channels, &profiles, &params, &AllocOptions::default()).unwrap();
        assert!(a.dual.nu > 0.0);
        let used = a.total_power();
        assert!(used <= params.max_bs_power * (1.0 + 1e-9));
        assert!(used >= params.max_bs_power * 0.995, "used {used}");
    }

    #[test]
    fn returned_allocation_respects_bounds_and_duality() {
        let params = SystemParams::default();
        let (profiles, channels) = drop(&params, 1);
        let model = crate::cost::ConflictModel::new(&profiles, &params).unwrap();
        let mut rng = crate::topology::stream_rng(1, crate::topology::STREAM_MATCHING);
        let s = crate::coalition::greedy_init(&model, 12, &mut rng).unwrap();
        let a = allocate(&s, &channels, &profiles, &params, &AllocOptions::default()).unwrap();
        assert!(a.total_power() <= params.max_bs_power * 1.005);
        for (k, u) in profiles.iter().enumerate() {
            assert!(a.surrogate_rates[k] <= a.metrics[k].rate * (1.0 + 1e-9));
            assert!(a.surrogate_rates[k] >= u.rate_min * 0.98);
            assert!(a.metrics[k].rate <= u.rate_max * (1.0 + 1e-9));
        }
        assert!(a.dual_value >= a.primal_value - 1e-6 * a.primal_value.abs());
        let again = allocate(&s, &channels, &profiles, &params, &AllocOptions::default()).unwrap();
        assert_eq!(a.powers, again.powers);
        assert_eq!(a.subchannel_of, again.subchannel_of);
    }

    #[test]
    fn structure_must_match_subchannels() {
        let params = params_with(13);
        let (profiles, channels) = drop(&params, 8);
        let s = CoalitionStructure::singletons(13);
        assert_eq!(
            allocate(&s, &channels, &profiles, &params, &AllocOptions::default()).unwrap_err(),
            AllocError::ShapeMismatch { coalitions: 13, subchannels: 12 }
        );
    }
}
