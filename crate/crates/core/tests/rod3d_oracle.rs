mod common;

use common::*;
use nalgebra::{Matrix3, Matrix6, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rod_uq::fields::{sample_seed, FieldSample, FieldSampler, MaterialModel};
use rod_uq::geometry::{make_disc_mesh, TriMesh};
use rod_uq::rod1d::{solve_with_energy, RodBC};
use rod_uq::rod3d::{
    assemble_3d, build_prism_mesh, effective_modulus_3d, element_matrix, recovery_ansatz, solve_3d,
    LayerCoefficients, Solve3dConfig,
};

/// `Cε·ε` with the engineering-shear Voigt matrix.
fn voigt_energy(f: &Matrix3<f64>, mu: f64, lambda: f64) -> f64 {
    let e = 0.5 * (f + f.transpose());
    let v = Vector6::new(
        e[(0, 0)],
        e[(1, 1)],
        e[(2, 2)],
        2.0 * e[(1, 2)],
        2.0 * e[(0, 2)],
        2.0 * e[(0, 1)],
    );
    let mut c = Matrix6::zeros();
    for i in 0..3 {
        for k in 0..3 {
            c[(i, k)] = if i == k { lambda + 2.0 * mu } else { lambda };
        }
        c[(i + 3, i + 3)] = mu;
    }
    v.dot(&(c * v))
}

#[test]
fn wedge_matrix_reproduces_linear_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mesh = TriMesh::new(vec![[0.1, -0.2], [0.9, 0.05], [0.3, 0.7]], vec![[0, 1, 2]]).unwrap();
    let tri = mesh.geometry(0);
    let (dx, length) = (0.13, 2.0);
    for trial in 0..20 {
        let g = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let shift = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        // first half with B = 0 and h = 1, then a general transformation
        let (h, phi) = if trial < 10 {
            (1.0, [0.0, 0.0])
        } else {
            (
                rng.gen_range(0.05..1.0),
                [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
            )
        };
        let c = LayerCoefficients {
            mu: MU,
            lambda: LAMBDA,
            phi,
        };
        let k = element_matrix(&tri, dx, &c, h, length);
        let mut x = [0.0; 18];
        for p in 0..6 {
            let y = tri.coords[p % 3];
            let pos = [if p < 3 { 0.0 } else { dx }, y[0], y[1]];
            for i in 0..3 {
                x[3 * p + i] = shift[i] + (0..3).map(|j| g[(i, j)] * pos[j]).sum::<f64>();
            }
        }
        let xkx: f64 = (0..18)
            .map(|p| (0..18).map(|q| x[p] * k[p][q] * x[q]).sum::<f64>())
            .sum();
        let mut ft = Matrix3::zeros();
        for i in 0..3 {
            ft[(i, 0)] = g[(i, 0)] - (phi[0] * g[(i, 1)] + phi[1] * g[(i, 2)]) / length;
            ft[(i, 1)] = g[(i, 1)] / h;
            ft[(i, 2)] = g[(i, 2)] / h;
        }
        let expected = tri.area * dx / length * voigt_energy(&ft, MU, LAMBDA);
        assert!(
            (xkx - expected).abs() <= 1e-10 * expected.abs().max(1e-8),
            "trial {trial}: {xkx} vs {expected}"
        );
        for p in 0..18 {
            for q in 0..18 {
                assert!((k[p][q] - k[q][p]).abs() <= 1e-12 * k[p][p].abs().max(1.0));
            }
        }
    }
}

#[test]
fn rigid_motions_cost_nothing() {
    let mesh = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
    let tri = mesh.geometry(0);
    let c = LayerCoefficients {
        mu: MU,
        lambda: LAMBDA,
        phi: [0.0, 0.0],
    };
    let k = element_matrix(&tri, 0.5, &c, 1.0, 1.0);
    // rotation about x₁ and a translation
    let mut x = [0.0; 18];
    for p in 0..6 {
        let y = tri.coords[p % 3];
        x[3 * p] = 0.3;
        x[3 * p + 1] = -y[1];
        x[3 * p + 2] = y[0];
    }
    let xkx: f64 = (0..18)
        .map(|p| (0..18).map(|q| x[p] * k[p][q] * x[q]).sum::<f64>())
        .sum();
    assert!(xkx.abs() < 1e-10);
}

#[test]
fn unperturbed_tension_approaches_proxy() {
    let s = make_disc_mesh(1.0, 3).unwrap();
    let cfg = Solve3dConfig {
        rings: 3,
        n_layers: 16,
        ..Default::default()
    };
    let bc = RodBC::tension(1.0, -0.5);
    let zero = FieldSample::unperturbed(1.0, 16, base());
    let e0 = young(MU, LAMBDA) * s.area * 0.25;
    let mut prev = f64::INFINITY;
    for h in [0.25, 0.1, 0.05] {
        let e = effective_modulus_3d(&s, &zero, &bc, h, &cfg).unwrap().value;
        assert!(e >= e0 * (1.0 - 1e-6), "h={h}: {e} below {e0}");
        assert!(e < prev);
        prev = e;
    }
    assert!(prev / e0 - 1.0 < 0.03);
}

#[test]
fn recovery_ansatz_bounds_minimum() {
    let s = make_disc_mesh(1.0, 3).unwrap();
    let mesh = build_prism_mesh(&s, 16, 1.0).unwrap();
    let bc = RodBC::tension(1.0, 0.8).with_twist(0.0, 0.4);
    for (k, model) in [MaterialModel::Deterministic, lognormal()]
        .into_iter()
        .enumerate()
    {
        let sample = FieldSampler::new(spec(16, 0.1, model))
            .unwrap()
            .sample(sample_seed(8, k as u64))
            .unwrap();
        for h in [0.3, 0.1] {
            let sys = assemble_3d(&mesh, &sample, &bc, h).unwrap();
            let (u, _) = solve_3d(&sys, 1e-10, 20_000).unwrap();
            let emin = sys.energy(&u);
            let (state, _) = solve_with_energy(&s, &sample, &bc, 160).unwrap();
            let ans = recovery_ansatz(&sys, &state).unwrap();
            assert!(sys.dirichlet_defect(&ans) < 1e-12);
            let eans = sys.energy(&ans);
            assert!(
                eans >= emin * (1.0 - 1e-8),
                "h={h}: ansatz {eans} below minimum {emin}"
            );
        }
    }
}
