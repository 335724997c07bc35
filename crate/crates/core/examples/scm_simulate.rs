//! Define a ground-truth SCM in JSON and draw observational and
//! interventional samples from it.

use abcd::belief::InterventionSpec;
use abcd::scm::{sample_truth, GroundTruthScm};

fn main() -> abcd::Result<()> {
    let scm = GroundTruthScm::from_json(
        r#"{"graph": {"d": 3, "edges": [[0, 1], [1, 2]]},
            "mechanisms": [{"node": 1, "expr": "2*tanh(p0)", "noise_sd": 0.2},
                           {"node": 2, "expr": "sin(p0) - 0.5*pow2(p0)", "noise_sd": 0.2}],
            "roots": [{"node": 0, "mean": 0.0, "sd": 1.0}]}"#,
    )?;
    for seed in 0..3 {
        println!("obs      {:?}", sample_truth(&scm, InterventionSpec::observational(), seed)?.values);
    }
    for seed in 0..3 {
        println!("do(X1=1) {:?}", sample_truth(&scm, InterventionSpec::intervene(1, 1.0), seed)?.values);
    }
    Ok(())
}
