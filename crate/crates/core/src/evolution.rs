//! Population management and the evolutionary operators: fitness ranking,
//! elitism, tournament selection, per-neuron crossover, and sparse random
//! weight mutation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::Parameters;

/// What happened to an individual at a generation's selection step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LifecycleTag {
    Elite,
    Selected,
    Discarded,
}

impl std::fmt::Display for LifecycleTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LifecycleTag::Elite => "elite",
            LifecycleTag::Selected => "selected",
            LifecycleTag::Discarded => "discarded",
        };
        f.write_str(s)
    }
}

/// One population member: an actor genome with its evaluation state.
#[derive(Debug, Clone)]
pub struct Individual {
    pub params: Parameters,
    pub fitness: Option<f64>,
    pub tag: Option<LifecycleTag>,
}

impl Individual {
    pub fn new(params: Parameters) -> Self {
        Self {
            params,
            fitness: None,
            tag: None,
        }
    }
}

/// A fixed-size population. Slots are stable across generations: slot `i`
/// of the next generation holds either the preserved elite or the offspring
/// built for that slot, so "replace the weakest slot" stays well defined.
#[derive(Debug, Clone)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: u64,
}

impl Population {
    pub fn new(members: Vec<Individual>) -> Self {
        Self {
            members,
            generation: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Whether parents are chosen by fitness or uniformly at random (the
/// selection-ablation mode, which also drops elitism).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    Tournament,
    RandomNs,
}

/// How a non-reset mutation event rescales the chosen weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationMode {
    /// `w <- w * (1 + N(0, scale))`: zero-mean relative perturbation.
    ProportionalAdditive,
    /// `w <- w * N(0, scale)`: the raw multiplicative form.
    LiteralMultiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationParams {
    pub mut_prob: f64,
    pub mut_frac: f64,
    pub mut_strength: f64,
    pub supermut_prob: f64,
    pub reset_prob: f64,
    pub mode: MutationMode,
}

impl Default for MutationParams {
    fn default() -> Self {
        Self {
            mut_prob: 0.9,
            mut_frac: 0.1,
            mut_strength: 0.1,
            supermut_prob: 0.05,
            reset_prob: 0.05,
            mode: MutationMode::ProportionalAdditive,
        }
    }
}

impl MutationParams {
    pub fn validate(&self) -> Result<()> {
        for (key, p) in [
            ("mutation.mut_prob", self.mut_prob),
            ("mutation.mut_frac", self.mut_frac),
            ("mutation.supermut_prob", self.supermut_prob),
            ("mutation.reset_prob", self.reset_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(key, format!("{p} outside [0, 1]")));
            }
        }
        if !(self.mut_strength > 0.0) {
            return Err(Error::config(
                "mutation.mut_strength",
                format!("{} must be > 0", self.mut_strength),
            ));
        }
        Ok(())
    }
}

/// Counts of mutation event kinds, for the operator-statistics checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MutationStats {
    pub super_events: usize,
    pub reset_events: usize,
    pub normal_events: usize,
}

impl MutationStats {
    pub fn total(&self) -> usize {
        self.super_events + self.reset_events + self.normal_events
    }
}

/// Slot indices sorted by fitness, best first; ties broken by lower slot.
pub fn rank(pop: &Population) -> Result<Vec<usize>> {
    let mut fitness = Vec::with_capacity(pop.len());
    for (i, m) in pop.members.iter().enumerate() {
        match m.fitness {
            Some(f) if f.is_finite() => fitness.push(f),
            Some(f) => return Err(Error::numeric(format!("member {i} has fitness {f}"))),
            None => return Err(Error::state(format!("member {i} has no fitness"))),
        }
    }
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| {
        fitness[b]
            .partial_cmp(&fitness[a])
            .expect("finite fitness")
            .then(a.cmp(&b))
    });
    Ok(order)
}

/// The first `e` ranked slots, with `e = max(1, floor(psi * k))`.
pub fn select_elites(pop: &Population, psi: f64) -> Result<Vec<usize>> {
    let ranking = rank(pop)?;
    let e = elite_count(pop.len(), psi);
    Ok(ranking[..e].to_vec())
}

pub fn elite_count(k: usize, psi: f64) -> usize {
    (((psi * k as f64).floor() as usize).max(1)).min(k)
}

/// Draws `n` winners; each tournament samples `tournament_size` slots
/// uniformly with replacement and keeps the best (ties to the lower slot).
pub fn tournament_select(
    pop: &Population,
    n: usize,
    tournament_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    if tournament_size == 0 {
        return Err(Error::input("tournament_size must be >= 1"));
    }
    let ranking = rank(pop)?;
    let mut position = vec![0usize; pop.len()];
    for (pos, &slot) in ranking.iter().enumerate() {
        position[slot] = pos;
    }
    let k = pop.len();
    Ok((0..n)
        .map(|_| {
            let mut best = rng.random_range(0..k);
            for _ in 1..tournament_size {
                let challenger = rng.random_range(0..k);
                if position[challenger] < position[best] {
                    best = challenger;
                }
            }
            best
        })
        .collect())
}

/// Per-neuron uniform crossover: for every output row of every weight
/// matrix, the child takes that row, its bias entry and its layer-norm
/// entries from one parent or the other with probability 1/2.
pub fn crossover(
    parent_a: &Parameters,
    parent_b: &Parameters,
    rng: &mut ChaCha8Rng,
) -> Result<Parameters> {
    if !parent_a.congruent(parent_b) {
        return Err(Error::input("crossover: parent layouts differ"));
    }
    let mut child = parent_a.clone();
    let layout = parent_a.layout().clone();
    for layer in &layout.layers {
        let mut row_base = 0usize;
        for mat in &layer.mats {
            for r in 0..mat.rows {
                if rng.random_bool(0.5) {
                    continue; // keep parent_a's neuron
                }
                let row = mat.offset + r * mat.cols..mat.offset + (r + 1) * mat.cols;
                child.values_mut()[row.clone()].copy_from_slice(&parent_b.values()[row]);
                let neuron = row_base + r;
                let b_ix = layer.bias.offset + neuron;
                child.values_mut()[b_ix] = parent_b.values()[b_ix];
                if let Some(ln) = &layer.ln {
                    let g_ix = ln.gain.offset + neuron;
                    let n_ix = ln.bias.offset + neuron;
                    child.values_mut()[g_ix] = parent_b.values()[g_ix];
                    child.values_mut()[n_ix] = parent_b.values()[n_ix];
                }
            }
            row_base += mat.rows;
        }
    }
    Ok(child)
}

/// Sparse weight mutation. Each weight matrix `M` receives
/// `round(mut_frac * |M|)` events; an event picks an entry uniformly and is
/// a super-mutation with probability `supermut_prob` (noise scale
/// `100 * mut_strength`), otherwise a reset to `N(0, 1)` with probability
/// `reset_prob`, otherwise an ordinary mutation at scale `mut_strength`.
/// Biases and layer-norm terms are never mutated.
pub fn mutate(p: &Parameters, mp: &MutationParams, rng: &mut ChaCha8Rng) -> Parameters {
    mutate_traced(p, mp, rng).0
}

/// [`mutate`], additionally reporting how many events of each kind fired.
pub fn mutate_traced(
    p: &Parameters,
    mp: &MutationParams,
    rng: &mut ChaCha8Rng,
) -> (Parameters, MutationStats) {
    let normal = Normal::new(0.0, mp.mut_strength).expect("validated strength");
    let super_normal = Normal::new(0.0, 100.0 * mp.mut_strength).expect("validated strength");
    let mut child = p.clone();
    let mut stats = MutationStats::default();
    let layout = p.layout().clone();
    for layer in &layout.layers {
        for mat in &layer.mats {
            let events = (mp.mut_frac * mat.len() as f64).round() as usize;
            for _ in 0..events {
                let i = rng.random_range(0..mat.rows);
                let j = rng.random_range(0..mat.cols);
                let ix = mat.offset + i * mat.cols + j;
                if rng.random::<f64>() < mp.supermut_prob {
                    stats.super_events += 1;
                    apply_scaled(&mut child.values_mut()[ix], mp.mode, super_normal.sample(rng));
                } else if rng.random::<f64>() < mp.reset_prob {
                    stats.reset_events += 1;
                    child.values_mut()[ix] = StandardNormal.sample(rng);
                } else {
                    stats.normal_events += 1;
                    apply_scaled(&mut child.values_mut()[ix], mp.mode, normal.sample(rng));
                }
            }
        }
    }
    (child, stats)
}

fn apply_scaled(w: &mut f64, mode: MutationMode, noise: f64) {
    *w *= match mode {
        MutationMode::ProportionalAdditive => 1.0 + noise,
        MutationMode::LiteralMultiplicative => noise,
    };
}

/// Tags of the outgoing generation plus bookkeeping for reports.
#[derive(Debug, Clone)]
pub struct TransitionSummary {
    /// Per-slot lifecycle tag of the generation that was selected over.
    pub tags: Vec<LifecycleTag>,
    pub elite_slots: Vec<usize>,
    pub ranking: Vec<usize>,
}

/// Builds the next generation: preserved elites plus offspring produced by
/// crossing a random elite with a tournament winner, each offspring then
/// mutated with probability `mut_prob`. In [`SelectionMode::RandomNs`] both
/// parents are uniform random picks and there are no elites.
///
/// Selection choices (tournaments, parent picks) and variation noise
/// (crossover coins, mutations) draw from separate streams so ablating one
/// mechanism leaves the other's randomness untouched.
pub fn next_generation(
    pop: &Population,
    psi: f64,
    tournament_size: usize,
    mp: &MutationParams,
    mode: SelectionMode,
    selection_rng: &mut ChaCha8Rng,
    variation_rng: &mut ChaCha8Rng,
) -> Result<(Population, TransitionSummary)> {
    let k = pop.len();
    if k == 0 {
        return Err(Error::state("next_generation on an empty population"));
    }
    let ranking = rank(pop)?;

    let (elite_slots, parent_pool): (Vec<usize>, Vec<usize>) = match mode {
        SelectionMode::Tournament => {
            let e = elite_count(k, psi);
            let elites = ranking[..e].to_vec();
            let winners = tournament_select(pop, k - e, tournament_size, selection_rng)?;
            (elites, winners)
        }
        SelectionMode::RandomNs => {
            let picks = (0..k).map(|_| selection_rng.random_range(0..k)).collect();
            (Vec::new(), picks)
        }
    };

    let elite_set: Vec<bool> = {
        let mut set = vec![false; k];
        for &s in &elite_slots {
            set[s] = true;
        }
        set
    };

    let mut members: Vec<Option<Individual>> = (0..k).map(|_| None).collect();
    for &s in &elite_slots {
        members[s] = Some(Individual::new(pop.members[s].params.clone()));
    }

    let mut parented = vec![false; k];
    let offspring_slots: Vec<usize> = (0..k).filter(|s| !elite_set[*s]).collect();
    for (t, &slot) in offspring_slots.iter().enumerate() {
        let (a_slot, b_slot) = match mode {
            SelectionMode::Tournament => {
                let elite = elite_slots[selection_rng.random_range(0..elite_slots.len())];
                (elite, parent_pool[t])
            }
            SelectionMode::RandomNs => {
                let b = selection_rng.random_range(0..k);
                (parent_pool[t], b)
            }
        };
        parented[a_slot] = true;
        parented[b_slot] = true;
        let mut child = crossover(
            &pop.members[a_slot].params,
            &pop.members[b_slot].params,
            variation_rng,
        )?;
        if variation_rng.random::<f64>() < mp.mut_prob {
            child = mutate(&child, mp, variation_rng);
        }
        members[slot] = Some(Individual::new(child));
    }

    let tags: Vec<LifecycleTag> = (0..k)
        .map(|s| {
            if elite_set[s] {
                LifecycleTag::Elite
            } else if parented[s] {
                LifecycleTag::Selected
            } else {
                LifecycleTag::Discarded
            }
        })
        .collect();

    let next = Population {
        members: members.into_iter().map(|m| m.expect("slot filled")).collect(),
        generation: pop.generation + 1,
    };
    Ok((
        next,
        TransitionSummary {
            tags,
            elite_slots,
            ranking,
        },
    ))
}
