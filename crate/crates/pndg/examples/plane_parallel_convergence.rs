//! Convergence study in plane-parallel (2D) geometry.
//!
//! Refines a periodic Cartesian mesh and measures errors against the
//! Fourier oracle at a relaxed and a stiff scaling. The second-order
//! rate for `k = 1` is uniform in `eps`. The finest level is added only
//! in release builds; the systems there are large enough that the
//! iterative solver is the better choice, and debug-build arithmetic
//! would dominate the runtime.
//!
//! Run with `cargo run --release --example plane_parallel_convergence`.

use pndg::solver::SolverConfig;
use pndg::study::{
    run_convergence, smooth_fourier_forcing, MaterialSpec, Oracle, StudyConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let order = 3;
    let n_moments = (order + 1) * (order + 1);
    let cells = if cfg!(debug_assertions) {
        vec![4, 8, 16]
    } else {
        vec![4, 8, 16, 32]
    };

    let study = StudyConfig {
        dim: 2,
        order,
        degree: 1,
        cells,
        eps_values: vec![1.0, 1e-4],
        materials: MaterialSpec::Constant {
            sigma_t: 2.0,
            sigma_a: 1.0,
        },
        oracle: Oracle::PnFourier(smooth_fourier_forcing(2, n_moments)?),
        solver: SolverConfig::iterative(),
    };
    let report = run_convergence(&study)?;

    println!("d = 2, N = {order}, k = 1, GMRES with block-Jacobi preconditioning");
    println!("    eps       h      err_l2      err_q       err_triple  EOC    wall");
    for record in &report.runs {
        let eoc = record
            .eoc_l2
            .map(|e| format!("{e:.3}"))
            .unwrap_or_else(|| "  -  ".into());
        println!(
            "  {:>7.0e}  1/{:<4} {:.4e}  {:.4e}  {:.4e}  {eoc}  {:>5} ms",
            record.eps, record.cells, record.errors.l2, record.errors.q,
            record.errors.triple, record.wall_ms,
        );
    }
    Ok(())
}
