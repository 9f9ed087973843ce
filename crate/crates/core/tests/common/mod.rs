//! Shared builders and brute-force oracles for integration tests.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use mdma_core::allocator::{MemberTerms, ScaConstants};
use mdma_core::coalition::is_forbidden;
use mdma_core::ConflictModel;
use mdma_core::topology::sample_channel;
use mdma_core::{ChannelState, SubchannelLink, SystemParams, UeProfile};
use rand::Rng;

/// Angle drawn strictly inside 1-based beamspace `b`.
pub fn angle_in_beamspace<R: Rng>(rng: &mut R, b: usize, num_beamspaces: usize) -> f64 {
    let width = PI / num_beamspaces as f64;
    let lo = -FRAC_PI_2 + (b - 1) as f64 * width;
    lo + width * rng.random_range(0.05..0.95)
}

/// Builds UEs at the given beamspaces and a one-subchannel link over all of
/// them. UEs sharing a beamspace are all made SIC capable so the link is
/// usable whichever of them ends up stronger.
pub fn random_link<R: Rng>(rng: &mut R, params: &SystemParams, beamspaces: &[usize]) -> (SubchannelLink, Vec<UeProfile>) {
    let bw = params.subchannel_bandwidth();
    let profiles: Vec<UeProfile> = beamspaces
        .iter()
        .enumerate()
        .map(|(id, &b)| UeProfile {
            id,
            distance: rng.random_range(30.0..params.cell_radius),
            angle: angle_in_beamspace(rng, b, params.num_beamspaces),
            sic_capable: beamspaces.iter().filter(|&&x| x == b).count() > 1,
            weight: params.ue_weight,
            rate_min: 1.15 * bw,
            rate_max: 3.3 * bw,
        })
        .collect();
    let channels = profiles
        .iter()
        .map(|u| vec![sample_channel(u, params, rng).unwrap()])
        .collect();
    let state = ChannelState::from_parts(channels, beamspaces.to_vec()).unwrap();
    let members: Vec<usize> = (0..profiles.len()).collect();
    let link = SubchannelLink::new(&members, 0, &state, &profiles, params).unwrap();
    (link, profiles)
}

/// Member terms with random multipliers that keep every rate price positive.
pub fn random_terms<R: Rng>(rng: &mut R, profiles: &[UeProfile], bandwidth: f64) -> Vec<MemberTerms> {
    profiles
        .iter()
        .map(|u| {
            let inv = 1.0 / u.rate_max;
            MemberTerms {
                sca: ScaConstants::new(u.rate_min, u.rate_max, bandwidth).unwrap(),
                rate_max: u.rate_max,
                eta: rng.random_range(0.0..2.0) * inv,
                mu: rng.random_range(0.0..0.5) * inv,
            }
        })
        .collect()
}

/// `J` at `powers` with every SINR clipped at its ceiling. Pushing a SINR
/// past the ceiling only costs power, so the maximizer is the same as under
/// the hard cap while the landscape stays flat instead of `-inf`.
pub fn capped_value(link: &SubchannelLink, terms: &[MemberTerms], nu: f64, bandwidth: f64, powers: &[f64]) -> f64 {
    (0..link.len())
        .map(|k| {
            let t = &terms[k];
            let gamma = link.sinr(k, powers).min(t.sca.gamma_max);
            t.rate_price() * bandwidth * t.sca.a * gamma.log2() - nu * powers[k] - link.weight(k) * link.utilization_cost(k, powers)
        })
        .sum()
}

/// Maximizes `J` over log-powers in `[ln lo, ln hi]^n` by a full grid with
/// `points` per axis, then polishes with a pattern search over every
/// direction in `{-1, 0, 1}^n`.
pub fn grid_maximize(
    link: &SubchannelLink,
    terms: &[MemberTerms],
    nu: f64,
    bandwidth: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> (f64, Vec<f64>) {
    let n = terms.len();
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (points - 1) as f64;
    let eval = |z: &[f64]| {
        let p: Vec<f64> = z.iter().map(|x| x.exp()).collect();
        capped_value(link, terms, nu, bandwidth, &p)
    };
    let mut best = (f64::NEG_INFINITY, vec![a; n]);
    let mut idx = vec![0usize; n];
    loop {
        let z: Vec<f64> = idx.iter().map(|&i| a + i as f64 * step).collect();
        let v = eval(&z);
        if v > best.0 {
            best = (v, z);
        }
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
    }
    let dirs: Vec<Vec<f64>> = (0..3usize.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let v = (c % 3) as f64 - 1.0;
                    c /= 3;
                    v
                })
                .collect::<Vec<f64>>()
        })
        .filter(|d| d.iter().any(|&x| x != 0.0))
        .collect();
    let (mut value, mut z) = best;
    let mut h = step;
    while h > 1e-9 {
        let mut moved = false;
        for d in &dirs {
            let cand: Vec<f64> = z.iter().zip(d).map(|(x, dx)| x + h * dx).collect();
            let v = eval(&cand);
            if v > value {
                value = v;
                z = cand;
                moved = true;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (value, z.iter().map(|x| x.exp()).collect())
}

/// Best surrogate objective `sum (rbar/R_max - w g)` of one coalition on one
/// subchannel for each power level, as a Pareto list of (total power, value)
/// over a log-power grid. Points must meet the rate floor on `rbar` and the
/// SINR ceiling.
pub fn coalition_frontier(link: &SubchannelLink, profiles: &[UeProfile], bw: f64, p_max: f64, points: usize) -> Vec<(f64, f64)> {
    let n = link.len();
    let sca: Vec<ScaConstants> = profiles.iter().map(|u| ScaConstants::new(u.rate_min, u.rate_max, bw).unwrap()).collect();
    // each UE needs at least gamma_th over noise alone
    let lo: Vec<f64> = (0..n).map(|k| (sca[k].gamma_th * link.noise() / link.gain(k, k)).ln()).collect();
    let hi = p_max.ln();
    let mut pts = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let p: Vec<f64> = (0..n).map(|k| (lo[k] + (hi - lo[k]) * idx[k] as f64 / (points - 1) as f64).exp()).collect();
        let total: f64 = p.iter().sum();
        if total <= p_max {
            let mut ok = true;
            let mut value = 0.0;
            for k in 0..n {
                let g = link.sinr(k, &p);
                let rbar = bw * sca[k].spectral_efficiency(g);
                if g > sca[k].gamma_max * (1.0 + 1e-12) || rbar < profiles[k].rate_min {
                    ok = false;
                    break;
                }
                value += rbar / profiles[k].rate_max - link.weight(k) * link.utilization_cost(k, &p);
            }
            if ok {
                pts.push((total, value));
            }
        }
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut frontier: Vec<(f64, f64)> = Vec::new();
    for (p, v) in pts {
        if frontier.last().is_none_or(|&(_, best)| v > best) {
            frontier.push((p, v));
        }
    }
    frontier
}

/// Exhaustive optimum over partitions into two coalitions, both subchannel
/// assignments, and a power grid, under the shared power budget.
pub fn exhaustive_two_by_two(profiles: &[UeProfile], channels: &ChannelState, params: &SystemParams, model: &ConflictModel) -> f64 {
    let bw = params.subchannel_bandwidth();
    let k = profiles.len();
    let mut best = f64::NEG_INFINITY;
    // UE 0 always sits in the first block so each partition is seen once
    for mask in 0..(1u32 << k) {
        if mask & 1 == 0 || mask == (1 << k) - 1 {
            continue;
        }
        let a: Vec<usize> = (0..k).filter(|&u| mask >> u & 1 == 1).collect();
        let b: Vec<usize> = (0..k).filter(|&u| mask >> u & 1 == 0).collect();
        if is_forbidden(&a, model) || is_forbidden(&b, model) {
            continue;
        }
        for (sa, sb) in [(0, 1), (1, 0)] {
            let fa = frontier_of(&a, sa, profiles, channels, params, bw);
            let fb = frontier_of(&b, sb, profiles, channels, params, bw);
            for &(pa, va) in &fa {
                // fb is sorted by power with increasing value
                let room = params.max_bs_power - pa;
                let i = fb.partition_point(|&(p, _)| p <= room);
                if i > 0 {
                    best = best.max(va + fb[i - 1].1);
                }
            }
        }
    }
    best
}

pub fn frontier_of(members: &[usize], sc: usize, profiles: &[UeProfile], channels: &ChannelState, params: &SystemParams, bw: f64) -> Vec<(f64, f64)> {
    let link = SubchannelLink::new(members, sc, channels, profiles, params).unwrap();
    if !link.sic_constraint_holds() {
        return Vec::new();
    }
    let sub: Vec<UeProfile> = members.iter().map(|&u| profiles[u].clone()).collect();
    let points = match members.len() {
        1 => 4000,
        2 => 400,
        _ => 100,
    };
    coalition_frontier(&link, &sub, bw, params.max_bs_power, points)
}

