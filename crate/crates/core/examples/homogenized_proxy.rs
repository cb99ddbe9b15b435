//! Deterministic proxy E0 for constant and random material, and the
//! constant-material energy gap predicted by the auxiliary corrector.

use rod_uq::fields::{
    sample_seed, FieldSampler, FieldSpec, LambdaLaw, MaterialModel, MaterialSpec,
};
use rod_uq::geometry::make_disc;
use rod_uq::homog::{
    corrector_energy_deficit, e0_closed_form, e0_system_solve, homogenized_coefficients,
};
use rod_uq::rod1d::{effective_modulus_1d, RodBC};

fn spec(model: MaterialModel) -> FieldSpec {
    FieldSpec {
        length: 1.0,
        n_cells: 1000,
        eps: 0.02,
        sigma1: 0.3,
        sigma2: 0.3,
        clip: Some(0.5),
        material: MaterialSpec {
            mu0: 30.8,
            lambda0: 66.6,
            model,
        },
    }
}

fn main() -> rod_uq::Result<()> {
    let section = make_disc(1.0)?;
    let bc = RodBC::tension(1.0, 1.0).with_twist(0.0, 0.5);
    let lognormal = MaterialModel::LognormalTransform {
        sigma_mu: 0.2,
        lambda: LambdaLaw::Proportional,
        upper_bounded: false,
    };
    for (name, model) in [
        ("constant", MaterialModel::Deterministic),
        ("log-normal", lognormal),
    ] {
        let c = homogenized_coefficients(&section, &spec(model))?;
        let closed = e0_closed_form(&section, &c, &bc);
        let solved = e0_system_solve(&section, &c, &bc, 500)?;
        println!(
            "{name:<11} a_hom {:.4}  mu_hom {:.4}  E0 {closed:.6} (system {:.6}, {:?})",
            c.a_hom, c.mu_hom, solved.value, c.source
        );
    }

    let s = spec(MaterialModel::Deterministic);
    let e0 = e0_closed_form(&section, &homogenized_coefficients(&section, &s)?, &bc);
    let sampler = FieldSampler::new(s)?;
    println!("\nsample  E0 - E          corrector prediction");
    for i in 0..5 {
        let sample = sampler.sample(sample_seed(42, i))?;
        let e = effective_modulus_1d(&section, &sample, &bc, 1000)?.value;
        let d = corrector_energy_deficit(&section, &sample, &bc, Some(1000))?;
        println!("{i:<7} {:<15.9} {d:.9}", e0 - e);
    }
    Ok(())
}
