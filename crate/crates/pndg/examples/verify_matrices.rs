//! Structure and invariants of the moment matrices.
//!
//! Builds the flux matrices for orders up to 9, prints their sizes,
//! sparsity, and spectral norms, and runs the full invariant suite:
//! symmetry, block-tridiagonal sparsity, the degree recursion, and the
//! unit spectral-norm bound.
//!
//! Run with `cargo run --example verify_matrices`.

use pndg::cli::verify_matrix_suite;
use pndg::harmonics::{moment_matrices, MomentBasis};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("order    L   nnz(A1)  nnz(A2)  nnz(A3)    |A1|     |A2|     |A3|");
    for n in 1..=9 {
        let basis = MomentBasis::new(n);
        let matrices = moment_matrices(&basis)?;
        let nnz: Vec<usize> = (0..3)
            .map(|i| matrices.a(i).iter().filter(|v| **v != 0.0).count())
            .collect();
        println!(
            "{n:>5} {:>4}  {:>7}  {:>7}  {:>7}  {:.5}  {:.5}  {:.5}",
            basis.len(),
            nnz[0],
            nnz[1],
            nnz[2],
            matrices.spectral_norm(0),
            matrices.spectral_norm(1),
            matrices.spectral_norm(2),
        );
    }

    println!();
    let mut all_passed = true;
    for check in verify_matrix_suite(9)? {
        let verdict = if check.passed() { "PASS" } else { "FAIL" };
        all_passed &= check.passed();
        println!(
            "{verdict} {}: worst {:.3e}, allowed {:.3e}",
            check.name, check.worst, check.bound
        );
    }
    if !all_passed {
        return Err("matrix invariant suite failed".into());
    }
    Ok(())
}
