//! Build a belief from observational data, then condition on interventions.

use abcd::belief::{BeliefConfig, BeliefState, InterventionSpec};
use abcd::scm::{sample_truth, GroundTruthScm};

fn main() -> abcd::Result<()> {
    let scm = GroundTruthScm::bivariate_tanh(0.1f64.sqrt())?;
    let obs = (0..5).map(|i| sample_truth(&scm, InterventionSpec::observational(), i)).collect::<abcd::Result<Vec<_>>>()?;
    let (mut belief, _) = BeliefState::initialize(&obs, &BeliefConfig::default())?;
    let show = |b: &BeliefState| {
        let p: Vec<String> = b.universe().iter().zip(b.posterior()).map(|(g, p)| format!("{:?}: {p:.3}", g.edges())).collect();
        println!("{}  H = {:.3}", p.join("  "), b.entropy());
    };
    show(&belief);
    for (t, spec) in [InterventionSpec::intervene(0, 1.5), InterventionSpec::intervene(1, -1.0), InterventionSpec::intervene(0, -2.0)]
        .into_iter()
        .enumerate()
    {
        belief = belief.update(sample_truth(&scm, spec, 100 + t as u64)?)?;
        show(&belief);
    }
    Ok(())
}
