//! Stage I: grouping UEs into coalitions.
//!
//! A feasible structure is built greedily (every coalition first gets one
//! UE, later UEs join the coalition where their conflict is lowest) and then
//! refined with rotation sequences: cyclic shifts of the coalition labels of
//! a few UEs, accepted whenever they strictly reduce the weighted conflict
//! without creating a forbidden coalition.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{mode_indicators, AccessMode, Coalition, ConflictModel};
use crate::error::MatchingError;

/// Minimum decrease of the total conflict counted as an improvement.
pub const IMPROVEMENT_TOL: f64 = 1e-12;

/// Partition of all UEs into a fixed number of coalitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalitionStructure {
    coalitions: Vec<Vec<usize>>,
    assignment: Vec<usize>,
}

impl CoalitionStructure {
    /// Builds a structure from the coalition index of every UE.
    pub fn from_assignment(assignment: Vec<usize>, num_coalitions: usize) -> Result<Self, MatchingError> {
        let mut coalitions = vec![Vec::new(); num_coalitions];
        for (ue, &n) in assignment.iter().enumerate() {
            if n >= num_coalitions {
                return Err(MatchingError::InvalidStructure(format!("UE {ue} mapped to coalition {n} of {num_coalitions}")));
            }
            coalitions[n].push(ue);
        }
        if let Some(n) = coalitions.iter().position(Vec::is_empty) {
            return Err(MatchingError::InvalidStructure(format!("coalition {n} is empty")));
        }
        Ok(Self { coalitions, assignment })
    }

    /// All-singleton structure over `num_ues` UEs.
    pub fn singletons(num_ues: usize) -> Self {
        Self {
            coalitions: (0..num_ues).map(|u| vec![u]).collect(),
            assignment: (0..num_ues).collect(),
        }
    }

    pub fn coalitions(&self) -> &[Vec<usize>] {
        &self.coalitions
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn coalition_of(&self, ue: usize) -> usize {
        self.assignment[ue]
    }

    pub fn num_coalitions(&self) -> usize {
        self.coalitions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.assignment.len()
    }

    /// Coalition records with their access modes.
    pub fn with_modes(&self, beamspace: impl Fn(usize) -> usize) -> Vec<Coalition> {
        self.coalitions
            .iter()
            .map(|members| {
                let bs: Vec<usize> = members.iter().map(|&u| beamspace(u)).collect();
                let (a, b) = mode_indicators(&bs);
                Coalition { members: members.clone(), mode: AccessMode::from_indicators(a, b) }
            })
            .collect()
    }

    /// Checks totality, disjointness, non-emptiness and that no coalition is
    /// forbidden.
    pub fn validate(&self, model: &ConflictModel) -> Result<(), MatchingError> {
        if self.assignment.len() != model.num_ues() {
            return Err(MatchingError::InvalidStructure("assignment does not cover every UE".into()));
        }
        let mut seen = vec![false; self.assignment.len()];
        for (n, members) in self.coalitions.iter().enumerate() {
            if members.is_empty() {
                return Err(MatchingError::InvalidStructure(format!("coalition {n} is empty")));
            }
            for &u in members {
                if seen[u] || self.assignment[u] != n {
                    return Err(MatchingError::InvalidStructure(format!("UE {u} is not uniquely placed")));
                }
                seen[u] = true;
            }
            if is_forbidden(members, model) {
                return Err(MatchingError::InvalidStructure(format!("coalition {n} is forbidden")));
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(MatchingError::InvalidStructure("some UE is unassigned".into()));
        }
        Ok(())
    }
}

/// Cyclic exchange: `subset[j]` moves to the coalition currently held by
/// `subset[(j + shift) % S]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationSequence {
    pub subset: Vec<usize>,
    pub shift: usize,
}

impl RotationSequence {
    pub fn is_valid(&self) -> bool {
        let s = self.subset.len();
        s >= 2 && self.shift >= 1 && self.shift < s
    }
}

/// Whether a candidate coalition violates the size cap, holds more than two
/// UEs in one beamspace, or would need a UE without SIC to act as the near
/// member of a pair.
pub fn is_forbidden(members: &[usize], model: &ConflictModel) -> bool {
    if members.len() > model.coalition_cap() {
        return true;
    }
    for (a, &k) in members.iter().enumerate() {
        let mut same = 0;
        for &i in &members[a + 1..] {
            if model.beamspace(i) != model.beamspace(k) {
                continue;
            }
            same += 1;
            let (strong, weak) = if model.path_gain(k) >= model.path_gain(i) { (k, i) } else { (i, k) };
            if model.path_gain(strong) > model.path_gain(weak) && !model.sic_capable(strong) {
                return true;
            }
        }
        if same >= 2 {
            return true;
        }
    }
    false
}

/// Greedy feasible placement in UE id order.
///
/// While some coalition is empty the UE takes a randomly chosen empty one.
/// Afterwards it joins the non-forbidden occupied coalition minimizing its
/// own weighted conflict, ties going to the lowest index.
pub fn greedy_init<R: Rng + ?Sized>(model: &ConflictModel, num_coalitions: usize, rng: &mut R) -> Result<CoalitionStructure, MatchingError> {
    let k = model.num_ues();
    if k < num_coalitions {
        return Err(MatchingError::TooFewUes { ues: k, coalitions: num_coalitions });
    }
    let mut coalitions: Vec<Vec<usize>> = vec![Vec::new(); num_coalitions];
    let mut assignment = vec![usize::MAX; k];
    let mut empty: Vec<usize> = (0..num_coalitions).collect();
    for ue in 0..k {
        let target = if !empty.is_empty() {
            empty.remove(rng.random_range(0..empty.len()))
        } else {
            let mut best: Option<(usize, f64)> = None;
            let mut candidate = Vec::with_capacity(model.coalition_cap() + 1);
            for (n, members) in coalitions.iter().enumerate() {
                candidate.clear();
                candidate.extend_from_slice(members);
                candidate.push(ue);
                if is_forbidden(&candidate, model) {
                    continue;
                }
                let score = model.weight(ue) * model.conflict(ue, &candidate);
                if best.is_none_or(|(_, s)| score < s) {
                    best = Some((n, score));
                }
            }
            best.ok_or(MatchingError::Infeasible(ue))?.0
        };
        coalitions[target].push(ue);
        assignment[ue] = target;
    }
    Ok(CoalitionStructure { coalitions, assignment })
}

/// Applies a rotation; all moves happen simultaneously.
pub fn apply_rotation(structure: &CoalitionStructure, rotation: &RotationSequence) -> CoalitionStructure {
    let s = rotation.subset.len();
    let mut assignment = structure.assignment.clone();
    for (j, &ue) in rotation.subset.iter().enumerate() {
        assignment[ue] = structure.assignment[rotation.subset[(j + rotation.shift) % s]];
    }
    let mut coalitions = vec![Vec::new(); structure.coalitions.len()];
    for (ue, &n) in assignment.iter().enumerate() {
        coalitions[n].push(ue);
    }
    CoalitionStructure { coalitions, assignment }
}

/// Weighted conflict summed over all coalitions.
pub fn total_conflict(structure: &CoalitionStructure, model: &ConflictModel) -> f64 {
    structure.coalitions.iter().map(|m| model.weighted_conflict(m)).sum()
}

/// Change in total conflict a rotation would cause, or `None` if it creates
/// a forbidden coalition or moves nobody.
fn rotation_delta(structure: &CoalitionStructure, rotation: &RotationSequence, model: &ConflictModel) -> Option<f64> {
    let s = rotation.subset.len();
    let mut touched: Vec<usize> = rotation.subset.iter().map(|&u| structure.assignment[u]).collect();
    touched.sort_unstable();
    touched.dedup();
    if touched.len() < 2 {
        return None;
    }
    let new_label = |ue: usize| -> usize {
        match rotation.subset.iter().position(|&x| x == ue) {
            Some(j) => structure.assignment[rotation.subset[(j + rotation.shift) % s]],
            None => structure.assignment[ue],
        }
    };
    let mut delta = 0.0;
    let mut members = Vec::new();
    for &n in &touched {
        members.clear();
        for &u in &structure.coalitions[n] {
            if new_label(u) == n {
                members.push(u);
            }
        }
        for &u in &rotation.subset {
            if new_label(u) == n && structure.assignment[u] != n {
                members.push(u);
            }
        }
        if is_forbidden(&members, model) {
            return None;
        }
        delta += model.weighted_conflict(&members) - model.weighted_conflict(&structure.coalitions[n]);
    }
    Some(delta)
}

/// Lexicographic `size`-subsets of `0..n`.
struct Subsets {
    idx: Vec<usize>,
    n: usize,
    done: bool,
}

impl Subsets {
    fn new(n: usize, size: usize) -> Self {
        Self { idx: (0..size).collect(), n, done: size == 0 || size > n }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Every rotation over subsets of size `2..=max_size`, in deterministic order.
fn all_rotations(num_ues: usize, max_size: usize) -> impl Iterator<Item = RotationSequence> {
    (2..=max_size).flat_map(move |size| {
        Subsets::new(num_ues, size).flat_map(move |subset| (1..size).map(move |shift| RotationSequence { subset: subset.clone(), shift }))
    })
}

/// Result of [`rotation_refine`].
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub structure: CoalitionStructure,
    /// Total conflict of the input followed by the value after every
    /// accepted rotation.
    pub trace: Vec<f64>,
    pub rotations: usize,
    pub passes: usize,
    /// Rotations evaluated, for complexity accounting.
    pub examined: usize,
}

/// Local search over rotation sequences of size up to `max_size`.
///
/// Each pass walks all subsets lexicographically and accepts the first
/// improving shift of each; passes repeat until one accepts nothing or
/// `max_rotations` rotations have been applied.
pub fn rotation_refine(structure: &CoalitionStructure, model: &ConflictModel, max_size: usize, max_rotations: usize) -> RefineOutcome {
    let mut current = structure.clone();
    let mut value = total_conflict(&current, model);
    let mut trace = vec![value];
    let mut rotations = 0;
    let mut passes = 0;
    let mut examined = 0;
    'outer: loop {
        passes += 1;
        let mut improved = false;
        for rot in all_rotations(current.num_ues(), max_size) {
            if rotations >= max_rotations {
                break 'outer;
            }
            examined += 1;
            if let Some(delta) = rotation_delta(&current, &rot, model) {
                if delta < -IMPROVEMENT_TOL {
                    current = apply_rotation(&current, &rot);
                    value = total_conflict(&current, model);
                    trace.push(value);
                    rotations += 1;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    RefineOutcome { structure: current, trace, rotations, passes, examined }
}

/// Outcome of an exhaustive stability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stability {
    Stable,
    /// A feasible rotation that strictly lowers the total conflict.
    Improvable(RotationSequence),
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable)
    }
}

/// Tests every rotation of size up to `max_size` against `structure`.
pub fn verify_exchange_stability(structure: &CoalitionStructure, model: &ConflictModel, max_size: usize) -> Stability {
    for rot in all_rotations(structure.num_ues(), max_size) {
        if let Some(delta) = rotation_delta(structure, &rot, model) {
            if delta < -IMPROVEMENT_TOL {
                return Stability::Improvable(rot);
            }
        }
    }
    Stability::Stable
}
