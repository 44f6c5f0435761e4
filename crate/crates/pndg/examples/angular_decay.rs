//! Closure error of the moment hierarchy.
//!
//! Compares exact kinetic moments with the P_N solution as the order
//! grows: the moment error decays rapidly for smooth isotropic forcing.
//! A second table shows the kinetic solution's anisotropy shrinking as
//! `eps` does, which is what makes low orders sufficient in the stiff
//! regime.
//!
//! Run with `cargo run --example angular_decay`.

use pndg::harmonics::sphere_quadrature;
use pndg::reference::kinetic_fourier_solve;
use pndg::study::{run_n_sweep, smooth_isotropic_forcing, NSweepConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 0.5;
    let sweep = NSweepConfig {
        dim: 1,
        orders: vec![1, 2, 3, 4, 5, 6, 7],
        sigma_t: 2.0,
        sigma_a: 1.0,
        eps,
        forcing: smooth_isotropic_forcing(1)?,
    };
    println!("kinetic vs P_N moment error at eps = {eps}");
    println!("    N    error        ratio");
    let mut previous: Option<f64> = None;
    for record in run_n_sweep(&sweep)? {
        let ratio = previous
            .map(|p| format!("{:.3}", record.moment_error / p))
            .unwrap_or_else(|| "  -  ".into());
        println!("  {:>3}   {:.4e}   {ratio}", record.order, record.moment_error);
        previous = Some(record.moment_error);
    }

    println!();
    println!("kinetic anisotropy of the kappa = 1 mode");
    println!("    eps     max|u - ubar| / max|ubar|");
    let quadrature = sphere_quadrature(40)?;
    let basis = pndg::harmonics::MomentBasis::new(7);
    for eps in [1.0, 1e-1, 1e-2, 1e-3] {
        let materials = pndg::assembly::MaterialField::constant(2.0, 1.0, eps)?;
        let kinetic =
            kinetic_fourier_solve(&basis, &materials, &smooth_isotropic_forcing(1)?, &quadrature)?;
        println!("  {:>7.0e}     {:.4e}", eps, kinetic.anisotropy(&[1], &quadrature)?);
    }
    Ok(())
}
