//! Fit GP hyperparameters on noisy tanh data and predict.

use abcd::gp::{fit_hyperparams, FitBounds, GpDataset, GpPosterior};
use abcd::rng::stream;
use rand::Rng;

fn main() -> abcd::Result<()> {
    let mut r = stream(1, &[]);
    let xs: Vec<Vec<f64>> = (0..20).map(|_| vec![r.random_range(-3.0..3.0)]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x[0].tanh() + 0.2 * r.random_range(-1.0..1.0)).collect();
    let data = GpDataset::new(&xs, &ys)?;
    let h = fit_hyperparams(&data, &FitBounds::default(), 4, 7)?;
    println!("fitted {h:?}");
    let gp = GpPosterior::new(data, h)?;
    println!("log evidence {:.4}", gp.log_evidence());
    for x in [-2.0, 0.0, 2.0] {
        let p = gp.predict(&[x]);
        println!("f({x:+.1}) = {:.3} +- {:.3}  (truth {:.3})", p.mean, p.variance_f.sqrt(), 2.0 * f64::tanh(x));
    }
    Ok(())
}
