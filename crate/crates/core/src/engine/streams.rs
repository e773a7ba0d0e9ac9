use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{Individual, ModelSpec, Population};
use crate::reflect::{advance_in_place, ReflectConfig};

/// Random sources of one simulation.
///
/// Event-level draws (clock, actor, θ, partner, mutant trait) come from one
/// sequential stream. Every individual owns a ChaCha stream keyed by its id;
/// its position only depends on how many words it has consumed, so lazy
/// position updates are reproducible whatever the event interleaving.
#[derive(Debug, Clone)]
pub struct SimRng {
    events: ChaCha8Rng,
    key: [u8; 32],
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        let mut events = ChaCha8Rng::seed_from_u64(seed);
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15).fill_bytes(&mut key);
        events.set_stream(0);
        Self { events, key }
    }

    pub fn events(&mut self) -> &mut ChaCha8Rng {
        &mut self.events
    }

    fn stream(&self, ind: &Individual) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(ind.id);
        rng.set_word_pos(ind.draws as u128);
        rng
    }

    /// Moves one individual along its own diffusion stream to `t`.
    pub fn advance(&self, ind: &mut Individual, spec: &ModelSpec, cfg: &ReflectConfig, t: f64) -> Result<()> {
        if ind.t_sync == t {
            return Ok(());
        }
        let mut rng = self.stream(ind);
        advance_in_place(ind, spec, t, cfg, &mut rng)?;
        ind.draws = rng.get_word_pos() as u64;
        Ok(())
    }

    /// Synchronizes the whole population to `t` and moves the clock there.
    pub fn sync_all(&self, pop: &mut Population, spec: &ModelSpec, cfg: &ReflectConfig, t: f64) -> Result<()> {
        for ind in pop.individuals.iter_mut() {
            self.advance(ind, spec, cfg, t)?;
        }
        pop.t = t;
        Ok(())
    }
}
