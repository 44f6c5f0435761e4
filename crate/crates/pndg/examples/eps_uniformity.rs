//! Error and moment behavior across the scaling parameter.
//!
//! Two experiments on a fixed mesh. First, the discretization error for
//! `k = 1` as `eps` drops seven orders of magnitude: it stays within a
//! small factor, while `k = 0` on the same data degrades. Second, the
//! discrete moment norms: the zeroth moment stays order one while every
//! higher moment scales linearly with `eps`, matching the oracle.
//!
//! Run with `cargo run --example eps_uniformity`.

use pndg::solver::SolverConfig;
use pndg::study::{
    moment_scaling_probe, run_convergence, smooth_fourier_forcing, MaterialSpec, Oracle,
    StudyConfig,
};

fn study(degree: usize, eps_values: Vec<f64>) -> Result<StudyConfig, pndg::error::Error> {
    let order = 3;
    let n_moments = (order + 1) * (order + 1);
    Ok(StudyConfig {
        dim: 1,
        order,
        degree,
        cells: vec![32],
        eps_values,
        materials: MaterialSpec::Constant {
            sigma_t: 2.0,
            sigma_a: 1.0,
        },
        oracle: Oracle::PnFourier(smooth_fourier_forcing(1, n_moments)?),
        solver: SolverConfig::direct(),
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps_values = vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

    println!("error at h = 1/32 as eps decreases");
    println!("    eps     err_l2 (k = 0)  err_l2 (k = 1)");
    let degraded = run_convergence(&study(0, eps_values.clone())?)?;
    let robust = run_convergence(&study(1, eps_values.clone())?)?;
    for (a, b) in degraded.runs.iter().zip(&robust.runs) {
        println!(
            "  {:>7.0e}    {:.4e}      {:.4e}",
            a.eps, a.errors.l2, b.errors.l2
        );
    }

    println!();
    println!("discrete moment scaling at h = 1/32, k = 1");
    println!("    eps     ||u_1||      max_i>=2 ||u_i||/eps");
    for record in moment_scaling_probe(&study(1, eps_values)?)? {
        println!(
            "  {:>7.0e}  {:.4e}     {:.4e}",
            record.eps, record.first, record.rest_over_eps
        );
    }
    Ok(())
}
