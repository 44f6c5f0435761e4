//! Convergence study in slab geometry.
//!
//! Solves the 1D moment system against the Fourier oracle on a sequence
//! of refined meshes for degrees 1 and 2, in both the relaxed and the
//! stiff regime, and tabulates errors with their observed orders. The
//! terminal order approaches `k + 1` at every `eps`.
//!
//! Run with `cargo run --example slab_convergence`.

use pndg::solver::SolverConfig;
use pndg::study::{
    run_convergence, smooth_fourier_forcing, MaterialSpec, Oracle, StudyConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let order = 3;
    let n_moments = (order + 1) * (order + 1);
    let eps_values = vec![1.0, 1e-3];

    for degree in [1usize, 2] {
        let study = StudyConfig {
            dim: 1,
            order,
            degree,
            cells: vec![8, 16, 32, 64],
            eps_values: eps_values.clone(),
            materials: MaterialSpec::Constant {
                sigma_t: 2.0,
                sigma_a: 1.0,
            },
            oracle: Oracle::PnFourier(smooth_fourier_forcing(1, n_moments)?),
            solver: SolverConfig::direct(),
        };
        let report = run_convergence(&study)?;

        println!("d = 1, N = {order}, k = {degree}");
        println!("    eps       h      err_l2      err_q       err_triple  EOC");
        for record in &report.runs {
            let eoc = record
                .eoc_l2
                .map(|e| format!("{e:.3}"))
                .unwrap_or_else(|| "  -  ".into());
            println!(
                "  {:>7.0e}  1/{:<4} {:.4e}  {:.4e}  {:.4e}  {eoc}",
                record.eps, record.cells, record.errors.l2, record.errors.q,
                record.errors.triple,
            );
        }
        println!();
    }
    Ok(())
}
