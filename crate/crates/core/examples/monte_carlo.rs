//! 1D ensemble: fluctuation statistics and empirical CDF around E0.

use rod_uq::fields::{FieldSpec, MaterialSpec};
use rod_uq::geometry::make_disc;
use rod_uq::homog::{e0_closed_form, homogenized_coefficients};
use rod_uq::mc::{fluctuation_stats, run_ensemble, EnsembleSetup, ModelKind};
use rod_uq::rod1d::RodBC;
use rod_uq::rod3d::Solve3dConfig;
use rod_uq::stats::ecdf_eval;

fn main() -> rod_uq::Result<()> {
    let setup = EnsembleSetup {
        experiment: "example".into(),
        section: make_disc(1.0)?,
        field: FieldSpec {
            length: 1.0,
            n_cells: 2000,
            eps: 0.05,
            sigma1: 0.3,
            sigma2: 0.3,
            clip: None,
            material: MaterialSpec::deterministic(30.8, 66.6),
        },
        bc: RodBC::tension(1.0, -0.5),
        n_elements_1d: 2000,
        h: 0.1,
        solve3d: Solve3dConfig::default(),
    };
    let e0 = e0_closed_form(
        &setup.section,
        &homogenized_coefficients(&setup.section, &setup.field)?,
        &setup.bc,
    );
    let table = run_ensemble(ModelKind::OneD, 250, 42, &setup)?;
    let s = fluctuation_stats(&table.values("1d"), Some(e0), 42)?;
    println!(
        "M = {}, mean {:.5}, std {:.5}, E0 {e0:.5}, L2 error {:.5}",
        s.n,
        s.mean,
        s.variance.sqrt(),
        s.l2_error_vs_ref.unwrap()
    );
    for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let x = s.ecdf[((q * s.n as f64) as usize).min(s.n - 1)];
        println!("  F({x:.5}) = {:.3}", ecdf_eval(&s.ecdf, x));
    }
    Ok(())
}
