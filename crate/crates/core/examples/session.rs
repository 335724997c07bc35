//! Drive a session by hand, as a lab would: ask for a recommendation,
//! report what was measured, repeat.

use abcd::belief::{InterventionSpec, Sample};
use abcd::scm::{sample_truth, GroundTruthScm};
use abcd::session::{Session, SessionConfig};

fn main() -> abcd::Result<()> {
    let scm = GroundTruthScm::bivariate_tanh(0.3)?;
    let rows = (0..6).map(|i| sample_truth(&scm, InterventionSpec::observational(), i).map(|s| s.values)).collect::<abcd::Result<_>>()?;
    let mut cfg = SessionConfig::new(2, rows);
    cfg.design.mc_samples = 32;
    cfg.design.bo_budget = 6;
    let mut s = Session::create("bench-1", cfg)?;
    for t in 0..5 {
        let rec = s.compute_recommendation()?;
        println!("recommend do(X{} = {:.3})", rec.target, rec.value);
        let measured = sample_truth(&scm, InterventionSpec::intervene(rec.target, rec.value), 50 + t)?;
        s.set_pending(rec);
        let entry = s.observe(Sample::new(measured.values, measured.intervention)?)?;
        println!("  posterior {:?}  H = {:.4}", entry.posterior.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>(), entry.entropy);
    }
    Ok(())
}
