//! Procedurally generated embedded patches with analytic adapted frames,
//! used by the pipeline and the refinement studies. All patches are open and
//! simply connected, so global smooth frames exist and integration of exact
//! one-forms is well posed.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::Edge;

/// An embedded patch: positions, connectivity, analytic orthonormal adapted
/// frames, and (when known in closed form) the second fundamental form in
/// those frames for cross-checks.
#[derive(Debug, Clone)]
pub struct GeomPatch {
    pub n: u32,
    pub p: u32,
    pub q: u32,
    pub positions: Vec<Vec<f64>>,
    pub faces: Vec<[usize; 3]>,
    /// set for p = 1 chains, which have no faces
    pub edges_override: Option<Vec<Edge>>,
    pub tangent_frames: Vec<Vec<Vec<f64>>>,
    pub normal_frames: Vec<Vec<Vec<f64>>>,
    /// analytic B, flattened like SpinorMesh::b, when available
    pub analytic_b: Option<Vec<Vec<f64>>>,
    /// representative mesh size (max edge length)
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Plane,
    Sphere,
    Cylinder,
    Catenoid,
    Torus,
    Arc,
}

impl Scenario {
    pub fn dims(self) -> (u32, u32, u32) {
        match self {
            Scenario::Plane | Scenario::Sphere | Scenario::Cylinder | Scenario::Catenoid => {
                (3, 2, 1)
            }
            Scenario::Torus => (4, 2, 2),
            Scenario::Arc => (2, 1, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Plane => "plane",
            Scenario::Sphere => "sphere",
            Scenario::Cylinder => "cylinder",
            Scenario::Catenoid => "catenoid",
            Scenario::Torus => "torus",
            Scenario::Arc => "arc",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Scenario> {
        match s {
            "plane" => Ok(Scenario::Plane),
            "sphere" => Ok(Scenario::Sphere),
            "cylinder" => Ok(Scenario::Cylinder),
            "catenoid" => Ok(Scenario::Catenoid),
            "torus" => Ok(Scenario::Torus),
            "arc" => Ok(Scenario::Arc),
            other => Err(Error::Config(format!("unknown scenario {other:?}"))),
        }
    }
}

/// Grid resolution at a refinement level: 4·2^level divisions per side.
pub fn divisions(level: u32) -> usize {
    4usize << level
}

struct Chart {
    n: usize,
    s_range: (f64, f64),
    t_range: (f64, f64),
    /// (s, t) → (position, tangent frame e_1 e_2, normal frame, analytic B or None)
    #[allow(clippy::type_complexity)]
    eval: Box<dyn Fn(f64, f64) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, Option<Vec<f64>>)>,
}

fn build_grid(chart: Chart, m: usize) -> GeomPatch {
    let (s0, s1) = chart.s_range;
    let (t0, t1) = chart.t_range;
    let mut positions = Vec::new();
    let mut tangent = Vec::new();
    let mut normal = Vec::new();
    let mut bs = Vec::new();
    let mut have_b = true;
    for i in 0..=m {
        let s = s0 + (s1 - s0) * i as f64 / m as f64;
        for j in 0..=m {
            let t = t0 + (t1 - t0) * j as f64 / m as f64;
            let (pos, tf, nf, b) = (chart.eval)(s, t);
            positions.push(pos);
            tangent.push(tf);
            normal.push(nf);
            match b {
                Some(b) => bs.push(b),
                None => have_b = false,
            }
        }
    }
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    let mut faces = Vec::with_capacity(2 * m * m);
    for i in 0..m {
        for j in 0..m {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let mut h = 0.0f64;
    let n = chart.n;
    for f in &faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let d: f64 = (0..n)
                .map(|k| (positions[a][k] - positions[b][k]).powi(2))
                .sum();
            h = h.max(d.sqrt());
        }
    }
    let q = normal[0].len() as u32;
    GeomPatch {
        n: n as u32,
        p: 2,
        q,
        positions,
        faces,
        edges_override: None,
        tangent_frames: tangent,
        normal_frames: normal,
        analytic_b: if have_b { Some(bs) } else { None },
        h,
    }
}

fn plane_patch(m: usize) -> GeomPatch {
    build_grid(
        Chart {
            n: 3,
            s_range: (0.0, 1.0),
            t_range: (0.0, 1.0),
            eval: Box::new(|s, t| {
                (
                    vec![s, t, 0.0],
                    vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
                    vec![vec![0.0, 0.0, 1.0]],
                    Some(vec![0.0; 4]),
                )
            }),
        },
        m,
    )
}

fn sphere_patch(m: usize) -> GeomPatch {
    use std::f64::consts::PI;
    build_grid(
        Chart {
            n: 3,
            s_range: (0.3 * PI, 0.7 * PI),
            t_range: (0.0, 0.5 * PI),
            eval: Box::new(|th, ph| {
                let (st, ct) = (th.sin(), th.cos());
                let (sp, cp) = (ph.sin(), ph.cos());
                let pos = vec![st * cp, st * sp, ct];
                let e1 = vec![ct * cp, ct * sp, -st];
                let e2 = vec![-sp, cp, 0.0];
                let nrm = pos.clone();
                // outward normal: B = -identity
                (
                    pos,
                    vec![e1, e2],
                    vec![nrm],
                    Some(vec![-1.0, 0.0, 0.0, -1.0]),
                )
            }),
        },
        m,
    )
}

fn cylinder_patch(m: usize) -> GeomPatch {
    build_grid(
        Chart {
            n: 3,
            s_range: (0.0, 1.2),
            t_range: (0.0, 1.2),
            eval: Box::new(|u, z| {
                let (su, cu) = (u.sin(), u.cos());
                (
                    vec![cu, su, z],
                    vec![vec![-su, cu, 0.0], vec![0.0, 0.0, 1.0]],
                    vec![vec![cu, su, 0.0]],
                    Some(vec![-1.0, 0.0, 0.0, 0.0]),
                )
            }),
        },
        m,
    )
}

fn catenoid_patch(m: usize) -> GeomPatch {
    build_grid(
        Chart {
            n: 3,
            s_range: (0.0, 1.0),
            t_range: (-0.5, 0.5),
            eval: Box::new(|u, v| {
                let (su, cu) = (u.sin(), u.cos());
                let (shv, chv) = (v.sinh(), v.cosh());
                let pos = vec![chv * cu, chv * su, v];
                let e1 = vec![-su, cu, 0.0];
                let e2 = vec![shv * cu / chv, shv * su / chv, 1.0 / chv];
                let nrm = vec![cu / chv, su / chv, -shv / chv];
                // minimal surface: principal curvatures ±1/cosh²v along
                // (e1, e2) with the outward normal above
                let k = 1.0 / (chv * chv);
                (
                    pos,
                    vec![e1, e2],
                    vec![nrm],
                    Some(vec![-k, 0.0, 0.0, k]),
                )
            }),
        },
        m,
    )
}

fn torus_patch(m: usize) -> GeomPatch {
    let s2 = std::f64::consts::SQRT_2;
    build_grid(
        Chart {
            n: 4,
            s_range: (0.0, 1.2),
            t_range: (0.0, 1.2),
            eval: Box::new(move |u, v| {
                let (su, cu) = (u.sin(), u.cos());
                let (sv, cv) = (v.sin(), v.cos());
                let pos = vec![cu / s2, su / s2, cv / s2, sv / s2];
                let e1 = vec![-su, cu, 0.0, 0.0];
                let e2 = vec![0.0, 0.0, -sv, cv];
                // n1 sign chosen so det[e1 e2 n1 n2] = +1
                let n1 = vec![-cu / s2, -su / s2, cv / s2, sv / s2];
                let n2 = vec![cu / s2, su / s2, cv / s2, sv / s2];
                // B^1 = diag(1, -1), B^2 = -identity in these frames
                (
                    pos,
                    vec![e1, e2],
                    vec![n1, n2],
                    Some(vec![1.0, 0.0, 0.0, -1.0, -1.0, 0.0, 0.0, -1.0]),
                )
            }),
        },
        m,
    )
}

/// p = 1 smoke case: a unit-circle arc in ℝ², chained edges instead of faces.
fn arc_patch(m: usize) -> GeomPatch {
    let mut positions = Vec::new();
    let mut tangent = Vec::new();
    let mut normal = Vec::new();
    let mut bs = Vec::new();
    for i in 0..=m {
        let t = i as f64 / m as f64;
        let (s, c) = (t.sin(), t.cos());
        positions.push(vec![c, s]);
        tangent.push(vec![vec![-s, c]]);
        // inward normal, so that det[t n] = +1; then B = +1
        normal.push(vec![vec![-c, -s]]);
        bs.push(vec![1.0]);
    }
    let edges = (0..m).map(|i| Edge { u: i, v: i + 1 }).collect();
    let h = 2.0 * (0.5 / m as f64).sin();
    GeomPatch {
        n: 2,
        p: 1,
        q: 1,
        positions,
        faces: Vec::new(),
        edges_override: Some(edges),
        tangent_frames: tangent,
        normal_frames: normal,
        analytic_b: Some(bs),
        h,
    }
}

pub fn generate(scenario: Scenario, level: u32) -> GeomPatch {
    let m = divisions(level);
    match scenario {
        Scenario::Plane => plane_patch(m),
        Scenario::Sphere => sphere_patch(m),
        Scenario::Cylinder => cylinder_patch(m),
        Scenario::Catenoid => catenoid_patch(m),
        Scenario::Torus => torus_patch(m),
        Scenario::Arc => arc_patch(m),
    }
}

/// Builds a patch from a raw triangle mesh in ℝ³: area-weighted vertex
/// normals and an arbitrary smooth-enough tangent frame per vertex.
pub fn patch_from_mesh(positions: Vec<Vec<f64>>, faces: Vec<[usize; 3]>) -> Result<GeomPatch> {
    let nv = positions.len();
    if positions.iter().any(|p| p.len() != 3) {
        return Err(Error::Parse("file meshes must be embedded in R^3".into()));
    }
    let mut normals = vec![[0.0f64; 3]; nv];
    for (fi, f) in faces.iter().enumerate() {
        if f.iter().any(|&i| i >= nv) {
            return Err(Error::Parse(format!("face {fi} references missing vertex")));
        }
        let a = &positions[f[0]];
        let b = &positions[f[1]];
        let c = &positions[f[2]];
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let area2 = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
        if area2 < 1e-14 {
            return Err(Error::DegenerateTriangle(fi));
        }
        for &vi in f {
            for k in 0..3 {
                normals[vi][k] += cross[k];
            }
        }
    }
    let mut tangent = Vec::with_capacity(nv);
    let mut normal = Vec::with_capacity(nv);
    for (vi, nrm) in normals.iter().enumerate() {
        let len = (nrm[0].powi(2) + nrm[1].powi(2) + nrm[2].powi(2)).sqrt();
        if len < 1e-14 {
            return Err(Error::Parse(format!("vertex {vi} has no incident faces")));
        }
        let n = [nrm[0] / len, nrm[1] / len, nrm[2] / len];
        // any axis not parallel to n seeds the tangent frame
        let seed = if n[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let d = seed[0] * n[0] + seed[1] * n[1] + seed[2] * n[2];
        let mut t1 = [seed[0] - d * n[0], seed[1] - d * n[1], seed[2] - d * n[2]];
        let tl = (t1[0].powi(2) + t1[1].powi(2) + t1[2].powi(2)).sqrt();
        for x in &mut t1 {
            *x /= tl;
        }
        let t2 = [
            n[1] * t1[2] - n[2] * t1[1],
            n[2] * t1[0] - n[0] * t1[2],
            n[0] * t1[1] - n[1] * t1[0],
        ];
        tangent.push(vec![t1.to_vec(), t2.to_vec()]);
        normal.push(vec![n.to_vec()]);
    }
    let mut h = 0.0f64;
    for f in &faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let d: f64 = (0..3)
                .map(|k| (positions[a][k] - positions[b][k]).powi(2))
                .sum();
            h = h.max(d.sqrt());
        }
    }
    Ok(GeomPatch {
        n: 3,
        p: 2,
        q: 1,
        positions,
        faces,
        edges_override: None,
        tangent_frames: tangent,
        normal_frames: normal,
        analytic_b: None,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn frame_det(patch: &GeomPatch, v: usize) -> f64 {
        let n = patch.n as usize;
        let mut cols: Vec<&Vec<f64>> = patch.tangent_frames[v].iter().collect();
        cols.extend(patch.normal_frames[v].iter());
        DMatrix::from_fn(n, n, |i, j| cols[j][i]).determinant()
    }

    fn check_orthonormal_oriented(patch: &GeomPatch) {
        let n = patch.n as usize;
        for v in 0..patch.positions.len() {
            let mut all: Vec<&Vec<f64>> = patch.tangent_frames[v].iter().collect();
            all.extend(patch.normal_frames[v].iter());
            assert_eq!(all.len(), n);
            for (i, a) in all.iter().enumerate() {
                for (j, b) in all.iter().enumerate() {
                    let d: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((d - expect).abs() < 1e-12, "v={v} i={i} j={j} d={d}");
                }
            }
            assert!((frame_det(patch, v) - 1.0).abs() < 1e-10, "v={v}");
        }
    }

    #[test]
    fn frames_orthonormal_all_scenarios() {
        for s in [
            Scenario::Plane,
            Scenario::Sphere,
            Scenario::Cylinder,
            Scenario::Catenoid,
            Scenario::Torus,
        ] {
            let patch = generate(s, 0);
            check_orthonormal_oriented(&patch);
            assert!(patch.analytic_b.is_some());
        }
        // arc: 1+1 frame in R^2
        let arc = generate(Scenario::Arc, 0);
        check_orthonormal_oriented(&arc);
    }

    #[test]
    fn refinement_halves_h() {
        for s in [Scenario::Sphere, Scenario::Torus] {
            let h2 = generate(s, 2).h;
            let h3 = generate(s, 3).h;
            let ratio = h2 / h3;
            assert!((ratio - 2.0).abs() < 0.05, "{s:?} ratio={ratio}");
        }
    }

    #[test]
    fn grid_counts() {
        let patch = generate(Scenario::Plane, 1);
        let m = divisions(1);
        assert_eq!(patch.positions.len(), (m + 1) * (m + 1));
        assert_eq!(patch.faces.len(), 2 * m * m);
    }

    #[test]
    fn file_patch_flat_square() {
        let positions = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ];
        let faces = vec![[0, 1, 2], [0, 2, 3]];
        let patch = patch_from_mesh(positions, faces).unwrap();
        check_orthonormal_oriented(&patch);
        for nf in &patch.normal_frames {
            assert!((nf[0][2] - 1.0).abs() < 1e-12);
        }
    }
}
