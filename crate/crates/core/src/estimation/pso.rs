use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::MelObjective;
use super::EvolutionFit;
use crate::error::{Error, Result};
use crate::tract::TractControls;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoSettings {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
}

impl Default for PsoSettings {
    fn default() -> Self {
        Self {
            particles: 64,
            iterations: 100,
            inertia: 0.72,
            cognitive: 1.49,
            social: 1.49,
        }
    }
}

impl PsoSettings {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::InvalidInput(
                "swarm needs at least one particle".into(),
            ));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} weight {v} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Global-best PSO in the unit box. Particles start uniformly at random with
/// zero velocity; positions are clipped after each move. `history[i]` is the
/// global best fitness after iteration `i` (index 0 is the initial swarm).
pub fn fit_controls_pso(
    objective: &MelObjective,
    settings: &PsoSettings,
    seed: u64,
) -> Result<EvolutionFit> {
    settings.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = objective.dim();
    let mut pos: Vec<Vec<f64>> = (0..settings.particles)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect())
        .collect();
    let mut vel = vec![vec![0.0; dim]; settings.particles];
    let mut fitness = objective.fitness_all(&pos)?;
    let mut personal = pos.clone();
    let mut personal_fit = fitness.clone();
    let argmin = |f: &[f64]| {
        (0..f.len())
            .min_by(|a, b| f[*a].total_cmp(&f[*b]))
            .expect("non-empty swarm")
    };
    let g = argmin(&personal_fit);
    let mut global = (personal[g].clone(), personal_fit[g]);
    let mut history = vec![global.1];

    for _ in 0..settings.iterations {
        for (p, (x, v)) in pos.iter_mut().zip(vel.iter_mut()).enumerate() {
            for d in 0..dim {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                v[d] = settings.inertia * v[d]
                    + settings.cognitive * r1 * (personal[p][d] - x[d])
                    + settings.social * r2 * (global.0[d] - x[d]);
                x[d] = (x[d] + v[d]).clamp(0.0, 1.0);
            }
        }
        fitness = objective.fitness_all(&pos)?;
        for (p, f) in fitness.iter().enumerate() {
            if *f < personal_fit[p] {
                personal_fit[p] = *f;
                personal[p] = pos[p].clone();
            }
        }
        let g = argmin(&personal_fit);
        if personal_fit[g] < global.1 {
            global = (personal[g].clone(), personal_fit[g]);
        }
        history.push(global.1);
    }
    Ok(EvolutionFit {
        controls: TractControls::from_normalized(&global.0),
        fitness: global.1,
        history,
    })
}
