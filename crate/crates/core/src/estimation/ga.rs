use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::objective::MelObjective;
use super::EvolutionFit;
use crate::error::{Error, Result};
use crate::tract::TractControls;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    /// Standard deviation of the Gaussian mutation, in normalized units.
    pub mutation_sigma: f64,
    pub elitism: usize,
}

impl Default for GaSettings {
    fn default() -> Self {
        Self {
            population: 64,
            generations: 100,
            tournament: 4,
            mutation_sigma: 0.05,
            elitism: 1,
        }
    }
}

impl GaSettings {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidInput(format!(
                "population {} below 2",
                self.population
            )));
        }
        if self.tournament == 0 {
            return Err(Error::InvalidInput(
                "tournament size must be positive".into(),
            ));
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "mutation sigma {} must be non-negative",
                self.mutation_sigma
            )));
        }
        if self.elitism > self.population {
            return Err(Error::InvalidInput(format!(
                "elitism {} exceeds population {}",
                self.elitism, self.population
            )));
        }
        Ok(())
    }
}

fn tournament(fitness: &[f64], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let i = rng.random_range(0..fitness.len());
        if fitness[i] < fitness[best] {
            best = i;
        }
    }
    best
}

/// Generational GA in the unit box: tournament selection, uniform crossover,
/// Gaussian mutation with clipping, and the best `elitism` individuals copied
/// unchanged. `history[g]` is the best fitness seen up to generation `g`.
pub fn fit_controls_ga(
    objective: &MelObjective,
    settings: &GaSettings,
    seed: u64,
) -> Result<EvolutionFit> {
    settings.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, settings.mutation_sigma.max(f64::MIN_POSITIVE))
        .expect("finite positive sigma");
    let dim = objective.dim();
    let mut pop: Vec<Vec<f64>> = (0..settings.population)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect())
        .collect();
    let mut fitness = objective.fitness_all(&pop)?;
    let mut order: Vec<usize> = (0..pop.len()).collect();
    let rank = |fitness: &[f64], order: &mut Vec<usize>| {
        order.sort_by(|a, b| fitness[*a].total_cmp(&fitness[*b]).then(a.cmp(b)));
    };
    rank(&fitness, &mut order);
    let mut best = (pop[order[0]].clone(), fitness[order[0]]);
    let mut history = vec![best.1];

    for _ in 0..settings.generations {
        let mut next: Vec<Vec<f64>> = order[..settings.elitism]
            .iter()
            .map(|i| pop[*i].clone())
            .collect();
        while next.len() < settings.population {
            let a = &pop[tournament(&fitness, settings.tournament, &mut rng)];
            let b = &pop[tournament(&fitness, settings.tournament, &mut rng)];
            let child = a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let gene = if rng.random_bool(0.5) { *x } else { *y };
                    let noise = if settings.mutation_sigma > 0.0 {
                        normal.sample(&mut rng)
                    } else {
                        0.0
                    };
                    (gene + noise).clamp(0.0, 1.0)
                })
                .collect();
            next.push(child);
        }
        pop = next;
        fitness = objective.fitness_all(&pop)?;
        order = (0..pop.len()).collect();
        rank(&fitness, &mut order);
        if fitness[order[0]] < best.1 {
            best = (pop[order[0]].clone(), fitness[order[0]]);
        }
        history.push(best.1);
    }
    Ok(EvolutionFit {
        controls: TractControls::from_normalized(&best.0),
        fitness: best.1,
        history,
    })
}
