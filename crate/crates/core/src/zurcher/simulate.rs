//! Forward simulation of bus panels from a solved model.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::dp_core::{
    ccp_from_values, solve_value_function, FixedPointOptions, PanelDataset, Record,
};
use crate::error::Result;

use super::config::ZurcherConfig;

/// Simulates `num_units` buses for `num_periods` periods each.
///
/// Solves the value function at the config's parameters, then draws
/// actions directly from the model CCPs and next states from the chosen
/// action's transition row. Every bus starts at mileage state 1 and the
/// stream is fully determined by `seed`.
pub fn simulate_panel(
    config: &ZurcherConfig,
    num_units: usize,
    num_periods: usize,
    seed: u64,
) -> Result<PanelDataset> {
    let model = config.model()?;
    let theta = config.theta();
    let v = solve_value_function(&model, theta.as_slice(), &FixedPointOptions::default())?;
    let ccps = ccp_from_values(&model, theta.as_slice(), &v)?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(num_units * num_periods);
    for unit in 1..=num_units {
        let mut state = 1usize;
        for period in 1..=num_periods {
            let action = draw_index(&mut rng, (0..model.num_actions()).map(|a| ccps.prob(a, state)));
            records.push(Record {
                unit: unit as u64,
                period: period as u64,
                state,
                action,
            });
            let q = model.transition(action);
            let next =
                draw_index(&mut rng, (0..model.num_states()).map(|y| q[(state - 1, y)]));
            state = next + 1;
        }
    }
    PanelDataset::new(records, model.num_states(), model.num_actions())
}

fn draw_index(rng: &mut ChaCha12Rng, probs: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        cum += p;
        last = i;
        if u < cum {
            return i;
        }
    }
    last
}
