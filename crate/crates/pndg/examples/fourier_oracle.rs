//! Fourier reference solutions for constant cross sections.
//!
//! Builds a trigonometric forcing, solves the moment system exactly mode
//! by mode, and confirms the result by evaluating the strong-form
//! residual at random points. A second table compares the moments of the
//! exact kinetic solution with the P_N oracle for the same isotropic
//! forcing.
//!
//! Run with `cargo run --example fourier_oracle`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pndg::assembly::MaterialField;
use pndg::harmonics::{moment_matrices, sphere_quadrature, MomentBasis};
use pndg::reference::{
    kinetic_fourier_solve, pn_fourier_solve, strong_form_residual, FourierForcing,
};
use pndg::study::smooth_isotropic_forcing;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let basis = MomentBasis::new(3);
    let l = basis.len();
    let matrices = moment_matrices(&basis)?;
    let materials = MaterialField::constant(2.0, 1.0, 0.5)?;

    let mut forcing = FourierForcing::new(2, l)?;
    forcing.add_mode(&[0, 0], (0..l).map(|m| Complex64::new(1.0 / (1 + m) as f64, 0.0)).collect())?;
    forcing.add_mode(&[1, 2], (0..l).map(|m| Complex64::new(0.3, -0.2 / (1 + m) as f64)).collect())?;

    let exact = pn_fourier_solve(&matrices, &materials, &forcing)?;
    println!("moment norms of the P_3 solution, d = 2, eps = 0.5");
    for m in 0..4 {
        println!("  ||u_{m}|| = {:.6e}", exact.moment_norm(m));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        worst = worst.max(strong_form_residual(&exact, &matrices, &materials, &forcing, &x)?);
    }
    println!("largest strong-form residual at 200 random points: {worst:.3e}");

    println!();
    println!("kinetic vs P_N zeroth moment for isotropic forcing, d = 1");
    let forcing = smooth_isotropic_forcing(1)?;
    let quadrature = sphere_quadrature(40)?;
    println!("    N    ||ubar_kinetic - ubar_PN|| / ||ubar_kinetic||");
    for order in [1usize, 3, 5, 7] {
        let basis = MomentBasis::new(order);
        let matrices = moment_matrices(&basis)?;
        let kinetic = kinetic_fourier_solve(&basis, &materials, &forcing, &quadrature)?;
        let pn = pn_fourier_solve(&matrices, &materials, &forcing.moment_forcing(basis.len())?)?;
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for (kappa, coeffs) in kinetic.moments().modes() {
            let exact0 = coeffs[0];
            let pn0 = pn.mode(&kappa[..1]).map(|c| c[0]).unwrap_or_default();
            diff2 += (exact0 - pn0).norm_sqr();
            norm2 += exact0.norm_sqr();
        }
        println!("  {order:>3}    {:.4e}", (diff2 / norm2).sqrt());
    }
    Ok(())
}
