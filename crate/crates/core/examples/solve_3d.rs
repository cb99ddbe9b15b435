//! 3D reference energy of one sample against the 1D surrogate as the
//! thickness shrinks on a fixed mesh.

use rod_uq::fields::{sample_seed, FieldSample, FieldSampler, FieldSpec, MaterialSpec};
use rod_uq::geometry::{make_disc_mesh, IsotropicMaterial};
use rod_uq::rod1d::{effective_modulus_1d, RodBC};
use rod_uq::rod3d::{effective_modulus_3d, Solve3dConfig};

fn main() -> rod_uq::Result<()> {
    let cfg = Solve3dConfig::default();
    let section = make_disc_mesh(1.0, cfg.rings)?;
    let bc = RodBC::tension(1.0, -0.5);
    let spec = FieldSpec {
        length: 1.0,
        n_cells: cfg.n_layers,
        eps: 0.05,
        sigma1: 0.3,
        sigma2: 0.3,
        clip: None,
        material: MaterialSpec::deterministic(30.8, 66.6),
    };
    let sample = FieldSampler::new(spec)?.sample(sample_seed(42, 0))?;
    let zero = FieldSample::unperturbed(1.0, cfg.n_layers, IsotropicMaterial::new(30.8, 66.6)?);
    let e1 = effective_modulus_1d(&section, &sample, &bc, 2000)?.value;
    let e0 = effective_modulus_1d(&section, &zero, &bc, 2000)?.value;
    println!("1D: E^eps = {e1:.5}, unperturbed {e0:.5}");
    println!("h      E^eps,h     gap       unperturbed  CG iters");
    for h in [0.25, 0.1, 0.05, 0.025] {
        let r = effective_modulus_3d(&section, &sample, &bc, h, &cfg)?;
        let z = effective_modulus_3d(&section, &zero, &bc, h, &cfg)?;
        println!(
            "{h:<6} {:<11.5} {:<9.5} {:<12.5} {}",
            r.value,
            r.value - e1,
            z.value,
            r.iterations
        );
    }
    Ok(())
}
