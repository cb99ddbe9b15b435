//! Systematic 3D-1D error over thicknesses and its power-law fit.

use rod_uq::fields::{FieldSpec, MaterialSpec};
use rod_uq::geometry::make_disc;
use rod_uq::mc::{h_sweep, EnsembleSetup};
use rod_uq::rod1d::RodBC;
use rod_uq::rod3d::Solve3dConfig;

fn main() -> rod_uq::Result<()> {
    let cfg = Solve3dConfig::default();
    let setup = EnsembleSetup {
        experiment: "example".into(),
        section: make_disc(1.0)?,
        field: FieldSpec {
            length: 1.0,
            n_cells: cfg.n_layers,
            eps: 0.05,
            sigma1: 0.3,
            sigma2: 0.3,
            clip: None,
            material: MaterialSpec::deterministic(30.8, 66.6),
        },
        bc: RodBC::tension(1.0, -0.5),
        n_elements_1d: 2000,
        h: 0.1,
        solve3d: cfg,
    };
    let (trend, _) = h_sweep(&setup, &[0.25, 0.1, 0.05], 10, 42)?;
    for (h, e) in trend.h.iter().zip(&trend.sys_error) {
        println!(
            "h = {h:<5} systematic error {e:.5}  fit {:.5}",
            trend.fit.predict(*h)
        );
    }
    println!(
        "error ~ {:.3} h^{:.3}",
        trend.fit.prefactor, trend.fit.slope
    );
    Ok(())
}
