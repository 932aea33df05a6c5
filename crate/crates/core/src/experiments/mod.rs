//! Experiment drivers: the sampled-GP experiment, the channel-equalization
//! benchmark, and result emission.

pub mod channel;
pub mod circulant;
pub mod equalize;
pub mod exp1;
pub mod results;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use channel::{simulate_channel, ChannelConfig};
pub use equalize::{
    run_equalization, run_scenario, Algorithm, EqualizeConfig, EqualizeReport, LearningCurve, Scenario,
};
pub use exp1::{run_experiment_1, Exp1Config, Exp1Report};
pub use results::{emit_results, OutputFormat};

/// `10·log₁₀(x)`.
pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Independent RNG stream `stream` under master seed `seed`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
