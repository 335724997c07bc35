//! Score candidate interventions by Monte-Carlo information gain and let
//! GP-UCB pick the best one per target.

use abcd::belief::{BeliefConfig, BeliefState, InterventionSpec};
use abcd::design::{mc_expected_info_gain, optimize_intervention, DesignConfig};
use abcd::scm::{sample_truth, GroundTruthScm};

fn main() -> abcd::Result<()> {
    let scm = GroundTruthScm::bivariate_tanh(0.3)?;
    let obs = (0..8).map(|i| sample_truth(&scm, InterventionSpec::observational(), i)).collect::<abcd::Result<Vec<_>>>()?;
    let (belief, _) = BeliefState::initialize(&obs, &BeliefConfig::default())?;
    let cfg = DesignConfig { mc_samples: 128, ..DesignConfig::default() };
    for j in 0..2 {
        let dom = cfg.domain(j, &belief)?;
        for k in 0..5 {
            let x = (dom.lo + dom.width() * k as f64 / 4.0).min(dom.hi);
            let e = mc_expected_info_gain(&belief, j, x, &cfg)?;
            println!("do(X{j} = {x:+.2}): {:.4} +- {:.4}", e.value, e.std_error);
        }
    }
    let rec = optimize_intervention(&belief, &cfg)?;
    println!("recommended do(X{} = {:.3}), objective {:.4}, {} evaluations", rec.target, rec.value, rec.eig, rec.diagnostics.len());
    Ok(())
}
