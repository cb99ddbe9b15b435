//! Linear triangle meshes of planar cross-sections.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Edge-midpoint rule, exact for quadratics: `(barycentric weights, weight / area)`.
pub(crate) const EDGE_MIDPOINT_RULE: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    /// Node coordinates `(x2, x3)`.
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
}

/// Shape-function gradients and area of one P1 triangle.
#[derive(Clone, Copy, Debug)]
pub struct TriGeometry {
    pub area: f64,
    /// `grad[a] = (∂₂N_a, ∂₃N_a)`.
    pub grad: [[f64; 2]; 3],
    pub coords: [[f64; 2]; 3],
}

impl TriGeometry {
    pub fn point(&self, bary: &[f64; 3]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for a in 0..3 {
            p[0] += bary[a] * self.coords[a][0];
            p[1] += bary[a] * self.coords[a][1];
        }
        p
    }

    pub fn centroid(&self) -> [f64; 2] {
        self.point(&[1.0 / 3.0; 3])
    }
}

/// Moments of a region up to second order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub area: f64,
    pub first: [f64; 2],
    /// `∫x₂²`, `∫x₃²`, `∫x₂x₃`.
    pub second: [f64; 3],
}

impl TriMesh {
    pub fn new(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self { nodes, triangles };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::MeshQuality("mesh has no triangles".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&a| a >= self.nodes.len()) {
                return Err(Error::MeshQuality(format!(
                    "triangle {t} references a missing node"
                )));
            }
            let g = self.geometry(t);
            let scale = self.edge_lengths(t).iter().fold(0.0f64, |m, &l| m.max(l));
            if !(g.area > 1e-12 * scale * scale) {
                return Err(Error::MeshQuality(format!(
                    "triangle {t} is degenerate or clockwise (area {:e})",
                    g.area
                )));
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    fn edge_lengths(&self, t: usize) -> [f64; 3] {
        let [a, b, c] = self.triangles[t];
        let d = |p: usize, q: usize| {
            let (u, v) = (self.nodes[p], self.nodes[q]);
            ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt()
        };
        [d(a, b), d(b, c), d(c, a)]
    }

    pub fn max_edge(&self) -> f64 {
        (0..self.triangles.len())
            .flat_map(|t| self.edge_lengths(t))
            .fold(0.0, f64::max)
    }

    pub fn geometry(&self, t: usize) -> TriGeometry {
        let tri = self.triangles[t];
        let p = tri.map(|a| self.nodes[a]);
        let det =
            (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let area = 0.5 * det;
        let mut grad = [[0.0; 2]; 3];
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            grad[a] = [(p[b][1] - p[c][1]) / det, (p[c][0] - p[b][0]) / det];
        }
        TriGeometry {
            area,
            grad,
            coords: p,
        }
    }

    /// Exact moments; degree-2 polynomials integrate exactly on each triangle.
    pub fn moments(&self) -> Moments {
        let mut m = Moments::default();
        for t in 0..self.triangles.len() {
            let g = self.geometry(t);
            let x: [f64; 3] = g.coords.map(|p| p[0]);
            let y: [f64; 3] = g.coords.map(|p| p[1]);
            let second = |f: &[f64; 3], h: &[f64; 3]| {
                let s: f64 = (0..3).map(|a| f[a] * h[a]).sum();
                let sf: f64 = f.iter().sum();
                let sh: f64 = h.iter().sum();
                g.area / 12.0 * (s + sf * sh)
            };
            m.area += g.area;
            m.first[0] += g.area * x.iter().sum::<f64>() / 3.0;
            m.first[1] += g.area * y.iter().sum::<f64>() / 3.0;
            m.second[0] += second(&x, &x);
            m.second[1] += second(&y, &y);
            m.second[2] += second(&x, &y);
        }
        m
    }

    /// Diameter bound: the bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    /// Sorted node neighbour lists including the node itself.
    pub fn node_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = (0..self.nodes.len()).map(|a| vec![a]).collect();
        for tri in &self.triangles {
            for &a in tri {
                for &b in tri {
                    adj[a].push(b);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Boundary edges oriented counter-clockwise around the region.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let mut count: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                count.entry(key).or_insert((0, [a, b])).0 += 1;
            }
        }
        let mut edges: Vec<[usize; 2]> = count
            .into_values()
            .filter(|(c, _)| *c == 1)
            .map(|(_, e)| e)
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Red refinement: every triangle split into four through its edge midpoints.
    pub fn refine_uniform(&self) -> TriMesh {
        let mut nodes = self.nodes.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let (p, q) = (nodes[a], nodes[b]);
                nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            triangles.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        TriMesh { nodes, triangles }
    }

    pub fn refine_to(&self, target_h: f64) -> TriMesh {
        let mut mesh = self.clone();
        while mesh.max_edge() > target_h {
            mesh = mesh.refine_uniform();
        }
        mesh
    }

    /// Disc of radius `radius` meshed by `rings` concentric rings carrying `6k` nodes each;
    /// `6 rings²` triangles, boundary nodes on the circle.
    pub fn disc(radius: f64, rings: usize) -> Result<TriMesh> {
        if !(radius > 0.0) || rings == 0 {
            return Err(Error::InvalidArgument(format!(
                "disc mesh needs positive radius and rings (got {radius}, {rings})"
            )));
        }
        let mut nodes = vec![[0.0, 0.0]];
        let mut ring_start = vec![0usize];
        for k in 1..=rings {
            ring_start.push(nodes.len());
            let m = 6 * k;
            let r = radius * k as f64 / rings as f64;
            for j in 0..m {
                let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                nodes.push([r * th.cos(), r * th.sin()]);
            }
        }
        let mut triangles = Vec::with_capacity(6 * rings * rings);
        for k in 1..=rings {
            let outer_n = 6 * k;
            let inner_n = if k == 1 { 1 } else { 6 * (k - 1) };
            let outer = |j: usize| ring_start[k] + j % outer_n;
            let inner = |j: usize| ring_start[k - 1] + j % inner_n;
            if k == 1 {
                for j in 0..outer_n {
                    triangles.push([inner(0), outer(j), outer(j + 1)]);
                }
                continue;
            }
            // merge the two rings by angle
            let (mut i, mut o) = (0usize, 0usize);
            while i < inner_n || o < outer_n {
                let ang_i = (i + 1) as f64 / inner_n as f64;
                let ang_o = (o + 1) as f64 / outer_n as f64;
                if o < outer_n && (i >= inner_n || ang_o <= ang_i) {
                    triangles.push([inner(i), outer(o), outer(o + 1)]);
                    o += 1;
                } else {
                    triangles.push([inner(i), outer(o), inner(i + 1)]);
                    i += 1;
                }
            }
        }
        TriMesh::new(nodes, triangles)
    }

    /// Ear-clipping triangulation of a simple counter-clockwise polygon.
    pub fn from_polygon(vertices: &[[f64; 2]]) -> Result<TriMesh> {
        let n = vertices.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut triangles = Vec::with_capacity(n.saturating_sub(2));
        let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
            (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
        };
        while idx.len() > 3 {
            let m = idx.len();
            let mut clipped = false;
            for k in 0..m {
                let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
                let (a, b, c) = (vertices[ia], vertices[ib], vertices[ic]);
                if cross(a, b, c) <= 0.0 {
                    continue;
                }
                let blocked = idx.iter().any(|&p| {
                    if p == ia || p == ib || p == ic {
                        return false;
                    }
                    let q = vertices[p];
                    cross(a, b, q) >= 0.0 && cross(b, c, q) >= 0.0 && cross(c, a, q) >= 0.0
                });
                if !blocked {
                    triangles.push([ia, ib, ic]);
                    idx.remove(k);
                    clipped = true;
                    break;
                }
            }
            if !clipped {
                return Err(Error::InvalidGeometry(
                    "polygon could not be triangulated".into(),
                ));
            }
        }
        triangles.push([idx[0], idx[1], idx[2]]);
        TriMesh::new(vertices.to_vec(), triangles)
    }

    /// Writes `nodes.csv` (id, x2, x3) and `elements.csv` (id, n0, n1, n2) into `dir`.
    pub fn write_csv(&self, dir: &Path, prefix: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::fs::File::create(dir.join(format!("{prefix}nodes.csv")))?;
        writeln!(f, "id,x2,x3")?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(f, "{i},{},{}", p[0], p[1])?;
        }
        let mut f = std::fs::File::create(dir.join(format!("{prefix}elements.csv")))?;
        writeln!(f, "id,n0,n1,n2")?;
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(f, "{i},{},{},{}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Signed area of a closed polygon (positive when counter-clockwise).
pub fn polygon_signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (v[i], v[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

/// True when two non-adjacent edges intersect or any edge is degenerate.
pub fn polygon_self_intersects(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        let d = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    };
    let on_segment = |a: [f64; 2], b: [f64; 2], p: [f64; 2]| {
        p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1])
    };
    let intersects = |p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]| {
        let (o1, o2) = (orient(p1, p2, q1), orient(p1, p2, q2));
        let (o3, o4) = (orient(q1, q2, p1), orient(q1, q2, p2));
        if o1 != o2 && o3 != o4 {
            return true;
        }
        (o1 == 0 && on_segment(p1, p2, q1))
            || (o2 == 0 && on_segment(p1, p2, q2))
            || (o3 == 0 && on_segment(q1, q2, p1))
            || (o4 == 0 && on_segment(q1, q2, p2))
    };
    for i in 0..n {
        if v[i] == v[(i + 1) % n] {
            return true;
        }
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if intersects(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}
