//! Independent reference computations for the acceptance suite. Nothing here
//! calls into the library's numerics.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Nodes and probability weights for `E[f(Z)]`, `Z ~ N(0, 1)`, via the
/// Golub-Welsch eigen-decomposition of the Hermite Jacobi matrix.
pub fn gauss_hermite_normal(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (std::f64::consts::SQRT_2 * eig.eigenvalues[k], v0 * v0)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Nodes and probability weights for `E[g(T)]`, `T ~ Gamma(shape a, rate 1)`,
/// from generalized Gauss-Laguerre with alpha = a - 1.
pub fn gauss_laguerre_gamma(n: usize, a: f64) -> Vec<(f64, f64)> {
    let alpha = a - 1.0;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        j[(k, k)] = 2.0 * k as f64 + alpha + 1.0;
        if k + 1 < n {
            let b = ((k as f64 + 1.0) * (k as f64 + 1.0 + alpha)).sqrt();
            j[(k, k + 1)] = b;
            j[(k + 1, k)] = b;
        }
    }
    let eig = SymmetricEigen::new(j);
    (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], v0 * v0)
        })
        .collect()
}

/// `E[f(V)]` for `V ~ N(mean, var)`.
pub fn expect_normal(mean: f64, var: f64, nodes: &[(f64, f64)], mut f: impl FnMut(f64) -> f64) -> f64 {
    nodes.iter().map(|&(z, w)| w * f(mean + var.sqrt() * z)).sum()
}

/// `E[f(V)]` for a Student-t with `dof`, location and squared scale, written
/// as a normal scale mixture: `V | tau ~ N(loc, scale2 / tau)`,
/// `tau ~ Gamma(dof / 2, rate dof / 2)`.
pub fn expect_student_t(dof: f64, loc: f64, scale2: f64, outer: usize, inner: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let gh = gauss_hermite_normal(inner);
    let rate = dof / 2.0;
    gauss_laguerre_gamma(outer, dof / 2.0)
        .into_iter()
        .map(|(x, w)| {
            let tau = x / rate;
            w * expect_normal(loc, scale2 / tau, &gh, &mut f)
        })
        .sum()
}

/// Squared-exponential kernel written out directly.
pub fn se(x: &[f64], y: &[f64], signal: f64, inv_ls: &[f64]) -> f64 {
    let q: f64 = x.iter().zip(y).zip(inv_ls).map(|((a, b), n)| n * (a - b) * (a - b)).sum();
    signal * (-q).exp()
}

pub fn noisy_gram(xs: &[Vec<f64>], signal: f64, inv_ls: &[f64], noise: f64) -> DMatrix<f64> {
    let n = xs.len();
    DMatrix::from_fn(n, n, |i, j| se(&xs[i], &xs[j], signal, inv_ls) + if i == j { noise } else { 0.0 })
}

/// Dense multivariate normal log-density of `y ~ N(0, cov)` via LU.
pub fn mvn_log_density(y: &[f64], cov: &DMatrix<f64>) -> f64 {
    let n = y.len();
    let lu = cov.clone().lu();
    let det = lu.determinant();
    let yv = DVector::from_column_slice(y);
    let sol = lu.solve(&yv).expect("covariance is nonsingular");
    -0.5 * yv.dot(&sol) - 0.5 * det.ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Latent posterior mean and variance at `x_star` by conditioning the joint
/// Gaussian of `(f*, y)` through its precision matrix.
pub fn conditioned(xs: &[Vec<f64>], y: &[f64], x_star: &[f64], signal: f64, inv_ls: &[f64], noise: f64) -> (f64, f64) {
    let n = xs.len();
    let mut joint = DMatrix::<f64>::zeros(n + 1, n + 1);
    joint[(0, 0)] = se(x_star, x_star, signal, inv_ls);
    for i in 0..n {
        let k = se(x_star, &xs[i], signal, inv_ls);
        joint[(0, i + 1)] = k;
        joint[(i + 1, 0)] = k;
        for j in 0..n {
            joint[(i + 1, j + 1)] = se(&xs[i], &xs[j], signal, inv_ls) + if i == j { noise } else { 0.0 };
        }
    }
    let prec = joint.try_inverse().expect("joint covariance is nonsingular");
    let var = 1.0 / prec[(0, 0)];
    let mean = -var * (0..n).map(|i| prec[(0, i + 1)] * y[i]).sum::<f64>();
    (mean, var)
}

/// All acyclic adjacency matrices on `d` nodes, by trying every matrix and
/// checking for a cycle with depth-first search.
pub fn brute_force_dags(d: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << (d * d)) {
        let adj: Vec<bool> = (0..d * d).map(|k| mask >> k & 1 == 1).collect();
        if (0..d).any(|i| adj[i * d + i]) {
            continue;
        }
        if !has_cycle(&adj, d) {
            out.push(adj);
        }
    }
    out
}

fn has_cycle(adj: &[bool], d: usize) -> bool {
    fn visit(u: usize, adj: &[bool], d: usize, state: &mut [u8]) -> bool {
        state[u] = 1;
        for v in 0..d {
            if adj[u * d + v] && (state[v] == 1 || (state[v] == 0 && visit(v, adj, d, state))) {
                return true;
            }
        }
        state[u] = 2;
        false
    }
    let mut state = vec![0u8; d];
    (0..d).any(|u| state[u] == 0 && visit(u, adj, d, &mut state))
}

/// One-sided sign test: `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    let mut c = 1.0f64;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            c = c * (n - k + 1) as f64 / k as f64;
        }
        if k >= wins {
            total += c;
        }
    }
    total / 2f64.powi(n as i32)
}

#[cfg(test)]
mod tests {}
