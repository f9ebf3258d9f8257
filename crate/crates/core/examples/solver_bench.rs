// Solver convergence profiling.
use nibb_core::burgers::*;
use nibb_core::measures::{GridDensity, Measure1D};
use std::time::Instant;

fn main() {
    let d = Measure1D::Density(GridDensity::semicircle(2.0).unwrap());
    let opts = SolveOptions { tol: 1e-2, ..Default::default() };
    let t0 = Instant::now();
    match solve_characteristics(&d, &d, &[0.25, 0.5, 0.75], &opts) {
        Ok(shape) => {
            println!(
                "sc->sc: {} iters, mismatch {:.2e}, residual {:.2e}, {:?}",
                shape.diagnostics.iterations,
                shape.diagnostics.final_mismatch,
                shape.diagnostics.continuity_residual,
                t0.elapsed()
            );
            let (a, b) = shape.edges[1];
            println!("  mid edges [{a:.4}, {b:.4}], s = {:.4}/{:.4}", shape.edge_coeffs[1].0, shape.edge_coeffs[1].1);
            let w01 = nibb_core::measures::wasserstein1(
                &Measure1D::Density(shape.densities[0].clone()),
                &Measure1D::Density(shape.densities[2].clone()),
            );
            println!("  t-symmetry W1(rho_0.25, rho_0.75) = {w01:.2e}");
        }
        Err(e) => println!("sc->sc FAILED after {:?}: {e}", t0.elapsed()),
    }

    // Asymmetric expansion: sc(1.0) to sc(1.5) shifted by +0.4.
    let a = GridDensity::semicircle(1.0).unwrap();
    let b_raw = GridDensity::semicircle(1.5).unwrap();
    let shift = 0.4;
    let b = GridDensity::new_normalized(
        b_raw.grid().iter().map(|x| x + shift).collect(),
        b_raw.values().to_vec(),
    ).unwrap();
    let opts = SolveOptions { tol: 1e-2, ..Default::default() };
    let t0 = Instant::now();
    match solve_characteristics(
        &Measure1D::Density(a),
        &Measure1D::Density(b),
        &[0.25, 0.5, 0.75],
        &opts,
    ) {
        Ok(shape) => {
            println!(
                "asym: {} iters, mismatch {:.2e}, residual {:.2e}, {:?}",
                shape.diagnostics.iterations,
                shape.diagnostics.final_mismatch,
                shape.diagnostics.continuity_residual,
                t0.elapsed()
            );
            for (k, t) in shape.times.iter().enumerate() {
                println!("  t={t}: mean {:.5} (want {:.5})", shape.densities[k].mean(), shift * t);
            }
        }
        Err(e) => println!("asym FAILED after {:?}: {e}", t0.elapsed()),
    }
}
