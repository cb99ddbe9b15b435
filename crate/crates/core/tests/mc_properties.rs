mod common;

use common::*;
use rod_uq::fields::{sample_seed, FieldSampler, MaterialModel};
use rod_uq::geometry::make_disc;
use rod_uq::mc::{
    fluctuation_stats, multifidelity, phi_fingerprint, read_energies_csv, run_ensemble,
    run_ensemble_multi_h, systematic_error, EnsembleSetup, ModelKind,
};
use rod_uq::rod1d::RodBC;
use rod_uq::rod3d::Solve3dConfig;

fn setup(n_cells: usize) -> EnsembleSetup {
    EnsembleSetup {
        experiment: "props".into(),
        section: make_disc(1.0).unwrap(),
        field: spec(n_cells, 0.1, MaterialModel::Deterministic),
        bc: RodBC::tension(1.0, 1.0),
        n_elements_1d: 2 * n_cells,
        h: 0.25,
        solve3d: Solve3dConfig {
            rings: 2,
            n_layers: n_cells,
            ..Default::default()
        },
    }
}

#[test]
fn sample_values_do_not_depend_on_ensemble_size() {
    let s = setup(40);
    let small = run_ensemble(ModelKind::OneD, 3, 42, &s).unwrap();
    let large = run_ensemble(ModelKind::OneD, 17, 42, &s).unwrap();
    assert_eq!(small.rows[..], large.rows[..3]);
    let other = run_ensemble(ModelKind::OneD, 3, 43, &s).unwrap();
    assert_ne!(small.rows[0].e, other.rows[0].e);
}

#[test]
fn single_sample_ensemble() {
    let s = setup(40);
    let t = run_ensemble(ModelKind::OneD, 1, 7, &s).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0].seed, sample_seed(7, 0));
    let st = fluctuation_stats(&t.values("1d"), None, 7).unwrap();
    assert_eq!(st.variance, 0.0);
    assert_eq!(st.fluctuation_ecdf, vec![0.0]);
    assert!(run_ensemble(ModelKind::OneD, 0, 7, &s).is_err());
}

#[test]
fn coupled_rows_share_the_sample() {
    let s = setup(8);
    let t = run_ensemble_multi_h(ModelKind::Coupled, 3, 1, &s, &[0.5, 0.25]).unwrap();
    assert_eq!(t.rows.len(), 9);
    for i in 0..3 {
        let fps: Vec<&String> = t
            .fingerprints
            .iter()
            .filter(|f| f.0 == i)
            .map(|f| &f.2)
            .collect();
        assert_eq!(fps.len(), 3);
        assert!(fps.iter().all(|f| *f == fps[0]));
        let direct = FieldSampler::new(s.field.clone())
            .unwrap()
            .sample(sample_seed(1, i as u64))
            .unwrap();
        assert_eq!(*fps[0], phi_fingerprint(&direct));
    }
    assert_ne!(t.fingerprints[0].2, t.fingerprints[3].2);
    assert_eq!(t.coupled_pairs().len(), 6);
}

#[test]
fn multifidelity_shift_identities() {
    let v1 = [1.0, 1.5, 0.25, 2.0, 0.75];
    let pairs = [(1.4, 1.0), (2.2, 1.5), (0.5, 0.25)];
    let est = multifidelity(&v1, &pairs).unwrap();
    let gap = (0.4 + 0.7 + 0.25) / 3.0;
    assert!((est.delta - gap).abs() < 1e-15);
    let (a, b) = (
        fluctuation_stats(&v1, None, 0).unwrap(),
        fluctuation_stats(&est.shifted_values, None, 0).unwrap(),
    );
    assert!((b.mean - a.mean - est.delta).abs() < 1e-14);
    assert!((b.variance - a.variance).abs() < 1e-14);
    assert!((systematic_error(&[1.0, 3.0], &[1.5]).unwrap() - 0.5).abs() < 1e-15);
    assert!(multifidelity(&v1, &[]).is_err());
}

#[test]
fn energies_csv_roundtrip() {
    let s = setup(40);
    let t = run_ensemble(ModelKind::OneD, 4, 3, &s).unwrap();
    let p = scratch("roundtrip").join("energies.csv");
    t.write_csv(&p).unwrap();
    assert_eq!(read_energies_csv(&p).unwrap(), t.rows);
}
