//! L2 error of E^eps against E0 over a correlation-length grid, with the
//! corrector and RVE scalings. `cargo run --release --example rate_sweep -- 250`
//! runs the full ensemble size.

use rod_uq::fields::{FieldSpec, LambdaLaw, MaterialModel, MaterialSpec};
use rod_uq::geometry::make_disc;
use rod_uq::homog::{corrector_sweep, rate_sweep, RateSweepConfig};
use rod_uq::rod1d::RodBC;

fn main() -> rod_uq::Result<()> {
    let m: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(60);
    let lognormal = MaterialModel::LognormalTransform {
        sigma_mu: 0.2,
        lambda: LambdaLaw::Proportional,
        upper_bounded: false,
    };
    for (name, model) in [
        ("constant", MaterialModel::Deterministic),
        ("log-normal", lognormal),
    ] {
        let cfg = RateSweepConfig {
            section: make_disc(1.0)?,
            field: FieldSpec {
                length: 1.0,
                n_cells: 2000,
                eps: 0.01,
                sigma1: 0.3,
                sigma2: 0.3,
                clip: None,
                material: MaterialSpec {
                    mu0: 30.8,
                    lambda0: 66.6,
                    model,
                },
            },
            bc: RodBC::tension(1.0, 1.0),
            eps: vec![0.01, 0.02, 0.04, 0.08],
            n_elements: 2000,
            n_samples: m,
            seed_base: 42,
        };
        let r = rate_sweep(&cfg)?;
        let c = corrector_sweep(&cfg)?;
        println!("{name} material, E0 = {:.5}, M = {m}", r.e0);
        println!("  eps    L2 error    |Psi| mean   RVE rms");
        for (p, q) in r.points.iter().zip(&c.points) {
            println!(
                "  {:<6} {:<11.4e} {:<12.4e} {:.3e}",
                p.eps, p.l2_error, q.psi_norm_mean, q.rve_rms_error
            );
        }
        let rve = c
            .rve_fit
            .map(|f| format!("{:.3}", f.slope))
            .unwrap_or_else(|| "-".into());
        println!(
            "  slopes: energy {:.3} +/- {:.3}, Psi {:.3}, RVE {rve}\n",
            r.fit.slope, r.fit.slope_ci, c.psi_fit.slope
        );
    }
    Ok(())
}
