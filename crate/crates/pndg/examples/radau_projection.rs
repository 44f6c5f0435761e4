//! The Radau projection and its superconvergence properties.
//!
//! Projects a smooth function onto low-degree polynomials, checks the
//! two defining properties (exactness at the outflow endpoint and
//! orthogonality to all lower degrees), and tabulates the L2 error of
//! the elementwise projection under mesh refinement: it decays at order
//! `k + 1` even though the projection only uses `k - 1` orthogonality
//! conditions.
//!
//! Run with `cargo run --example radau_projection`.

use pndg::basis::{radau_project, RadauOutflow};
use pndg::quadrature::GaussLegendre;

fn legendre_orthonormal(k: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; k + 1];
    p[0] = 1.0;
    if k >= 1 {
        p[1] = x;
    }
    for j in 1..k {
        p[j + 1] = ((2 * j + 1) as f64 * x * p[j] - j as f64 * p[j - 1]) / (j + 1) as f64;
    }
    for (j, v) in p.iter_mut().enumerate() {
        *v *= ((2 * j + 1) as f64 / 2.0).sqrt();
    }
    p
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = |x: f64| (1.3 * x).exp();
    let rule = GaussLegendre::new(32)?;

    println!("defining properties for f(x) = exp(1.3 x) on [-1, 1]");
    println!("    k  outflow   |f(s) - Rf(s)|   max_j<k |(f - Rf, phi_j)|");
    for k in [1usize, 2, 3] {
        for outflow in [RadauOutflow::Left, RadauOutflow::Right] {
            let s = match outflow {
                RadauOutflow::Left => -1.0,
                RadauOutflow::Right => 1.0,
            };
            let coeffs = radau_project(f, k, outflow)?;
            let value = |x: f64| -> f64 {
                let phi = legendre_orthonormal(k, x);
                coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum()
            };
            let endpoint = (value(s) - f(s)).abs();
            let mut ortho = 0.0f64;
            for j in 0..k {
                let mut inner = 0.0;
                for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
                    inner += w * (f(x) - value(x)) * legendre_orthonormal(k, x)[j];
                }
                ortho = ortho.max(inner.abs());
            }
            let side = match outflow {
                RadauOutflow::Left => "left",
                RadauOutflow::Right => "right",
            };
            println!("  {k:>3}  {side:<7}  {endpoint:>10.3e}       {ortho:>10.3e}");
        }
    }

    println!();
    println!("elementwise projection error for f(x) = sin(2 pi x) on [0, 1]");
    println!("    k     h      L2 error     EOC");
    let fine = GaussLegendre::new(16)?;
    for k in [1usize, 2, 3] {
        let mut previous: Option<f64> = None;
        for cells in [4usize, 8, 16, 32] {
            let h = 1.0 / cells as f64;
            let mut total = 0.0;
            for e in 0..cells {
                let left = e as f64 * h;
                let local = |xi: f64| (std::f64::consts::TAU * (left + 0.5 * (xi + 1.0) * h)).sin();
                let coeffs = radau_project(local, k, RadauOutflow::Right)?;
                for (&xi, &w) in fine.nodes().iter().zip(fine.weights()) {
                    let phi = legendre_orthonormal(k, xi);
                    let proj: f64 = coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum();
                    total += 0.5 * h * w * (local(xi) - proj) * (local(xi) - proj);
                }
            }
            let error = total.sqrt();
            let eoc = previous
                .map(|p| format!("{:.3}", (p / error).log2()))
                .unwrap_or_else(|| "  -  ".into());
            println!("  {k:>3}  1/{cells:<4} {error:.4e}   {eoc}");
            previous = Some(error);
        }
    }
    Ok(())
}
