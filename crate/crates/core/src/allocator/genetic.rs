//! Genetic search over circuit selections.
//!
//! A chromosome holds one bit per ranked candidate. Decoding packs the set
//! bits in rank order, first-fit with a Kempe-chain fallback, and silently
//! drops whatever does not fit, so every individual maps to a feasible plan
//! and its fitness is that plan's weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::greedy::greedy_selection;
use super::packing::{kempe_fit, CandidateSet};
use super::{AllocError, CircuitPlan, Provenance};
use crate::topology::MeshConfig;
use crate::traffic::TrafficProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub population_size: usize,
    pub generations: usize,
    /// Per-mating gene exchange probability is drawn uniformly from this range.
    pub crossover_rate_range: (f64, f64),
    pub chromosome_mutation_probability: f64,
    /// `None` flips one gene per mutating chromosome on average.
    pub per_gene_flip_rate: Option<f64>,
    pub elitism_count: usize,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population_size: 10,
            generations: 5000,
            crossover_rate_range: (0.3, 0.7),
            chromosome_mutation_probability: 0.5,
            per_gene_flip_rate: None,
            elitism_count: 1,
            tournament_size: 2,
            seed: 0,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<(), AllocError> {
        let bad = |m: &str| Err(AllocError::InvalidParams(m.to_string()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let (lo, hi) = self.crossover_rate_range;
        if self.population_size < 2 {
            return bad("population_size must be at least 2");
        }
        if !(unit(lo) && unit(hi) && lo <= hi) {
            return bad("crossover_rate_range must satisfy 0 <= lo <= hi <= 1");
        }
        if !unit(self.chromosome_mutation_probability) {
            return bad("chromosome_mutation_probability must lie in [0, 1]");
        }
        if self.per_gene_flip_rate.is_some_and(|r| !unit(r)) {
            return bad("per_gene_flip_rate must lie in [0, 1]");
        }
        if self.elitism_count >= self.population_size {
            return bad("elitism_count must be below population_size");
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be positive");
        }
        Ok(())
    }
}

/// One bit per candidate, in rank order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chromosome(pub Vec<bool>);

impl Chromosome {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}

/// Packs the selected candidates in rank order, dropping those that fit in no
/// subnet even after a Kempe-chain swap.
pub fn decode(chromosome: &Chromosome, set: &CandidateSet, k: usize) -> Result<CircuitPlan, AllocError> {
    if chromosome.len() != set.len() {
        return Err(AllocError::InvalidParams(format!(
            "chromosome has {} genes for {} candidates",
            chromosome.len(),
            set.len()
        )));
    }
    if k == 0 {
        return Err(AllocError::NoSubnets);
    }
    let placed = kempe_fit(set, k, chromosome.selected());
    Ok(set.plan_from(k, &placed, Provenance::Ga))
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub plan: CircuitPlan,
    pub best: Chromosome,
    /// Best fitness of the initial population, then after every generation.
    pub best_fitness_trace: Vec<u64>,
    pub greedy_seed_fitness: u64,
}

impl GaOutcome {
    pub fn best_fitness(&self) -> u64 {
        *self.best_fitness_trace.last().unwrap_or(&0)
    }
}

pub fn ga_allocate(
    profile: &TrafficProfile,
    mesh: &MeshConfig,
    k: usize,
    params: &GaParams,
) -> Result<CircuitPlan, AllocError> {
    let set = CandidateSet::from_profile(profile, mesh)?;
    Ok(ga_search(&set, k, params)?.plan)
}

pub fn ga_search(set: &CandidateSet, k: usize, params: &GaParams) -> Result<GaOutcome, AllocError> {
    params.validate()?;
    if k == 0 {
        return Err(AllocError::NoSubnets);
    }
    let n = set.len();
    let fitness = |c: &Chromosome| -> u64 {
        kempe_fit(set, k, c.selected())
            .iter()
            .map(|&(i, _)| set.pairs[i].weight)
            .sum()
    };

    // Seed 0 is plain greedy, seed i drops the i-th heaviest candidate first.
    let mut population: Vec<Chromosome> = (0..params.population_size)
        .map(|i| {
            let skip = i.checked_sub(1);
            Chromosome(greedy_selection(set, k, skip))
        })
        .collect();
    let mut scores: Vec<u64> = population.iter().map(fitness).collect();
    let greedy_seed_fitness = scores.iter().copied().max().unwrap_or(0);

    let mut trace = Vec::with_capacity(params.generations + 1);
    trace.push(greedy_seed_fitness);
    if n == 0 {
        return Ok(GaOutcome {
            plan: decode(&population[0], set, k)?,
            best: population.swap_remove(0),
            best_fitness_trace: trace,
            greedy_seed_fitness,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let flip = params.per_gene_flip_rate.unwrap_or(1.0 / n as f64);
    let (lo, hi) = params.crossover_rate_range;

    for _ in 0..params.generations {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| scores[b].cmp(&scores[a]));

        let mut next: Vec<Chromosome> = order[..params.elitism_count]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        let mut next_scores: Vec<u64> = order[..params.elitism_count].iter().map(|&i| scores[i]).collect();

        while next.len() < params.population_size {
            let a = tournament(&scores, params.tournament_size, &mut rng);
            let b = tournament(&scores, params.tournament_size, &mut rng);
            let rate = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let (mut c1, mut c2) = (population[a].clone(), population[b].clone());
            for g in 0..n {
                if rng.gen_bool(rate) {
                    std::mem::swap(&mut c1.0[g], &mut c2.0[g]);
                }
            }
            for child in [c1, c2] {
                if next.len() == params.population_size {
                    break;
                }
                let mut child = child;
                if rng.gen_bool(params.chromosome_mutation_probability) {
                    for gene in child.0.iter_mut() {
                        if rng.gen_bool(flip) {
                            *gene = !*gene;
                        }
                    }
                }
                next_scores.push(fitness(&child));
                next.push(child);
            }
        }
        population = next;
        scores = next_scores;
        trace.push(scores.iter().copied().max().unwrap_or(0));
    }

    let best_idx = (0..population.len())
        .max_by(|&a, &b| scores[a].cmp(&scores[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let best = population.swap_remove(best_idx);
    Ok(GaOutcome {
        plan: decode(&best, set, k)?,
        best,
        best_fitness_trace: trace,
        greedy_seed_fitness,
    })
}

fn tournament(scores: &[u64], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut winner = rng.gen_range(0..scores.len());
    for _ in 1..size {
        let c = rng.gen_range(0..scores.len());
        if scores[c] > scores[winner] {
            winner = c;
        }
    }
    winner
}
