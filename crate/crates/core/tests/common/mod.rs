#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rod_uq::fields::{FieldSample, FieldSpec, LambdaLaw, MaterialModel, MaterialSpec};
use rod_uq::geometry::IsotropicMaterial;
use rod_uq::rod1d::RodBC;

pub const MU: f64 = 30.8;
pub const LAMBDA: f64 = 66.6;

pub fn base() -> IsotropicMaterial {
    IsotropicMaterial::new(MU, LAMBDA).unwrap()
}

pub fn lognormal() -> MaterialModel {
    MaterialModel::LognormalTransform {
        sigma_mu: 0.2,
        lambda: LambdaLaw::Proportional,
        upper_bounded: false,
    }
}

pub fn spec(n_cells: usize, eps: f64, model: MaterialModel) -> FieldSpec {
    FieldSpec {
        length: 1.0,
        n_cells,
        eps,
        sigma1: 0.3,
        sigma2: 0.3,
        clip: None,
        material: MaterialSpec {
            mu0: MU,
            lambda0: LAMBDA,
            model,
        },
    }
}

/// `μ(3λ+2μ)/(λ+μ)`, written out again so oracles do not call the library.
pub fn young(mu: f64, lambda: f64) -> f64 {
    mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu)
}

/// Scratch directory under the target dir, emptied first.
pub fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

/// Dense KKT solve of min xᵀHx subject to fixed end dofs and zero flexural
/// means. Stretch coupling uses element-midpoint values of `r₂, r₃`, as the
/// P1 discretization does. Returns nodal `(ū, r₁, r₂, r₃)` and the minimum.
pub fn dense_oracle(
    n: usize,
    bc: &RodBC,
    area: f64,
    j: f64,
    int_x2sq: f64,
    int_x3sq: f64,
    sample: &FieldSample,
) -> (Vec<f64>, f64) {
    let len = bc.length;
    let h = len / n as f64;
    let per = n / sample.n_cells();
    let dim = 4 * (n + 1);
    let mut hm = DMatrix::<f64>::zeros(dim, dim);
    for e in 0..n {
        let c = e / per;
        let m = sample.material(c);
        let a = young(m.mu, m.lambda);
        let (p1, p2) = (sample.phi1[c], sample.phi2[c]);
        let (i0, i1) = (4 * e, 4 * (e + 1));
        let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
        rows.push((
            a * area,
            vec![
                (i0, -1.0 / h),
                (i1, 1.0 / h),
                (i0 + 3, 0.5 * p1 / len),
                (i1 + 3, 0.5 * p1 / len),
                (i0 + 2, -0.5 * p2 / len),
                (i1 + 2, -0.5 * p2 / len),
            ],
        ));
        rows.push((m.mu * j, vec![(i0 + 1, -1.0 / h), (i1 + 1, 1.0 / h)]));
        rows.push((a * int_x3sq, vec![(i0 + 2, -1.0 / h), (i1 + 2, 1.0 / h)]));
        rows.push((a * int_x2sq, vec![(i0 + 3, -1.0 / h), (i1 + 3, 1.0 / h)]));
        for (coef, row) in rows {
            for &(p, dp) in &row {
                for &(q, dq) in &row {
                    hm[(p, q)] += coef * h / len * dp * dq;
                }
            }
        }
    }
    // 8 end values + 2 means
    let nc = 10;
    let mut c = DMatrix::<f64>::zeros(nc, dim);
    let mut d = DVector::<f64>::zeros(nc);
    let ends = [(0, [0.0, bc.k0, 0.0, 0.0]), (n, [bc.t[0], bc.kl, 0.0, 0.0])];
    for (k, (node, vals)) in ends.iter().enumerate() {
        for t in 0..4 {
            c[(4 * k + t, 4 * node + t)] = 1.0;
            d[4 * k + t] = vals[t];
        }
    }
    for i in 0..=n {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        c[(8, 4 * i + 2)] = w;
        c[(9, 4 * i + 3)] = w;
    }
    let mut kkt = DMatrix::<f64>::zeros(dim + nc, dim + nc);
    kkt.view_mut((0, 0), (dim, dim)).copy_from(&(2.0 * &hm));
    kkt.view_mut((0, dim), (dim, nc)).copy_from(&c.transpose());
    kkt.view_mut((dim, 0), (nc, dim)).copy_from(&c);
    let mut rhs = DVector::<f64>::zeros(dim + nc);
    rhs.rows_mut(dim, nc).copy_from(&d);
    let sol = kkt.lu().solve(&rhs).expect("KKT matrix is regular");
    let x = sol.rows(0, dim).into_owned();
    let energy = x.dot(&(&hm * &x));
    (x.iter().copied().collect(), energy)
}
