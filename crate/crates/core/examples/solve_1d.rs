//! One sample of the 1D surrogate: energy split and minimizer summary.

use rod_uq::fields::{sample_seed, FieldSampler, FieldSpec, MaterialSpec};
use rod_uq::geometry::make_disc;
use rod_uq::homog::minimizer_deviation;
use rod_uq::rod1d::{solve_with_energy, RodBC};

fn main() -> rod_uq::Result<()> {
    let section = make_disc(1.0)?;
    let bc = RodBC::tension(1.0, 1.0).with_twist(0.0, 0.5);
    let spec = FieldSpec {
        length: 1.0,
        n_cells: 2000,
        eps: 0.05,
        sigma1: 0.3,
        sigma2: 0.3,
        clip: None,
        material: MaterialSpec::deterministic(30.8, 66.6),
    };
    let sample = FieldSampler::new(spec)?.sample(sample_seed(42, 0))?;
    let (state, report) = solve_with_energy(&section, &sample, &bc, 2000)?;
    let t = report.terms.unwrap();
    println!("E = {:.6}", report.value);
    println!(
        "  stretch {:.6}  twist {:.6}  bend2 {:.6}  bend3 {:.6}",
        t.stretch, t.twist, t.bend2, t.bend3
    );
    println!("flexural means {:?}", state.flexural_means());
    println!(
        "deviation from the affine state {:.3e}",
        minimizer_deviation(&state, &bc)
    );
    let mid = state.grid.len() / 2;
    println!(
        "at x1 = {}: u = {:.5}, r = {:?}",
        state.grid[mid], state.u_bar[mid], state.r[mid]
    );
    Ok(())
}
