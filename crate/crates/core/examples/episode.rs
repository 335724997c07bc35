//! Closed-loop episodes on the bivariate tanh model, active versus random.

use abcd::agent::{run_episode, EpisodeConfig, Strategy};
use abcd::scm::GroundTruthScm;

fn main() -> abcd::Result<()> {
    let scm = GroundTruthScm::bivariate_tanh(0.1f64.sqrt())?;
    for strategy in [Strategy::Bo, Strategy::Random] {
        let mut cfg = EpisodeConfig::new(scm.clone(), 5, 10);
        cfg.strategy = strategy;
        cfg.seed = 3;
        let ep = run_episode(&cfg)?;
        println!("{}:", strategy.name());
        for s in &ep.steps {
            let iv = s.chosen.get().expect("interventional step");
            println!("  t={:2} do(X{} = {:+.3})  H = {:.4}  P(true) = {:.4}", s.t, iv.target, iv.value, s.entropy, s.p_true.unwrap_or(f64::NAN));
        }
        println!("  converged: {}", ep.converged);
    }
    Ok(())
}
