//! Reconstruction of the immersion from a spinor field: the closed ℝⁿ-valued
//! one-form ξ = ⟨⟨Xψ, ψ⟩⟩, its diagnostics, and least-squares integration
//! F = ∫ξ over the mesh graph.

use nalgebra::DMatrix;

use crate::clifford::{Multivector, C64};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::forward::estimate_b;
use crate::mesh::{SpinorField, SpinorMesh};

/// Discrete one-form: one ℝⁿ value per edge, oriented u → v, plus the
/// grade-leak diagnostic of the Clifford product that produced it.
#[derive(Debug, Clone)]
pub struct OneForm {
    pub n: u32,
    /// per-edge ξ value in ambient coordinates
    pub xi: Vec<Vec<f64>>,
    /// per-edge worst deviation of τ(ψ)Xψ from a real grade-1 element
    pub nonvec: Vec<f64>,
}

/// Evaluates ξ on every edge at the midpoint: ψ(u) is transported into v's
/// frame, averaged with ψ(v) (ψ(w) = Σ_α φ_α(w)), the edge vector is taken
/// in midpoint tangent coordinates, and ξ = grade-1 real part of τ(ψ)Xψ.
pub fn build_xi(mesh: &SpinorMesh, field: &SpinorField) -> Result<OneForm> {
    if field.values.len() != mesh.vertex_count() {
        return Err(Error::ShapeMismatch);
    }
    let p = mesh.p as usize;
    let results = map_indexed(mesh.edges.len(), |ei| {
        let e = mesh.edges[ei];
        let (xu, xv) = &mesh.edge_tan[ei];
        let g = mesh.transport(ei, true);
        let psi_u = g.gp(&field.sum_at(e.u)).unwrap();
        let psi = (&psi_u + &field.sum_at(e.v)).scale(C64::new(0.5, 0.0));
        let qt = &mesh.edge_qt[ei];
        let mut x = Multivector::zero(mesh.n);
        for a in 0..p {
            let mut tu = 0.0;
            for b in 0..p {
                tu += qt[(a, b)] * xu[b];
            }
            x.set(1 << a, C64::new(0.5 * (tu + xv[a]), 0.0));
        }
        let val = psi.tau().gp(&x.gp(&psi).unwrap()).unwrap();
        let (acc, worst) = val.vector_part();
        (acc, worst)
    });
    let mut xi = Vec::with_capacity(results.len());
    let mut nonvec = Vec::with_capacity(results.len());
    for (v, w) in results {
        xi.push(v);
        nonvec.push(w);
    }
    Ok(OneForm { n: mesh.n, xi, nonvec })
}

/// Per-face discrete closedness: the norm of the oriented sum of ξ around
/// each triangle boundary.
pub fn closedness_check(mesh: &SpinorMesh, form: &OneForm) -> Result<Vec<f64>> {
    let mut index = std::collections::BTreeMap::new();
    for (ei, e) in mesh.edges.iter().enumerate() {
        index.insert((e.u, e.v), ei);
    }
    let n = form.n as usize;
    let mut out = Vec::with_capacity(mesh.faces.len());
    for f in &mesh.faces {
        let mut acc = vec![0.0; n];
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let (ei, sign) = match index.get(&(a, b)) {
                Some(&ei) => (ei, 1.0),
                None => {
                    let &ei = index
                        .get(&(b, a))
                        .ok_or(Error::NonManifold(a, b))?;
                    (ei, -1.0)
                }
            };
            for k in 0..n {
                acc[k] += sign * form.xi[ei][k];
            }
        }
        out.push(acc.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    Ok(out)
}

/// Per-edge isometry defect |‖ξ‖² − h²| / h².
pub fn isometry_check(mesh: &SpinorMesh, form: &OneForm) -> Vec<f64> {
    mesh.edges
        .iter()
        .enumerate()
        .map(|(ei, _)| {
            let h2 = mesh.edge_lengths[ei].powi(2);
            let x2: f64 = form.xi[ei].iter().map(|x| x * x).sum();
            (x2 - h2).abs() / h2
        })
        .collect()
}

fn laplacian_apply(mesh: &SpinorMesh, x: &[f64]) -> Vec<f64> {
    map_indexed(x.len(), |v| {
        let mut acc = 0.0;
        for &(ei, _) in &mesh.vertex_edges[v] {
            let e = mesh.edges[ei];
            let other = if e.u == v { e.v } else { e.u };
            acc += x[v] - x[other];
        }
        acc
    })
}

fn cg_solve(mesh: &SpinorMesh, b: &[f64]) -> Vec<f64> {
    let nv = b.len();
    let mut x = vec![0.0; nv];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let b_norm = rs.sqrt().max(1e-300);
    let tol = 1e-13 * b_norm;
    for _ in 0..20 * nv {
        if rs.sqrt() < tol {
            break;
        }
        let ap = laplacian_apply(mesh, &p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap.abs() < 1e-300 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..nv {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..nv {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

/// Least-squares integration of ξ over the mesh graph: minimises
/// Σ_e ‖F(v) − F(u) − ξ_e‖² via the graph Laplacian normal equations
/// (conjugate gradient), gauged so that F(v₀) = 0. Also returns the final
/// objective value.
pub fn integrate(mesh: &SpinorMesh, form: &OneForm, gauge_vertex: usize) -> Result<(Vec<Vec<f64>>, f64)> {
    mesh.check_connected()?;
    let nv = mesh.vertex_count();
    if gauge_vertex >= nv {
        return Err(Error::ShapeMismatch);
    }
    let n = form.n as usize;
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut b = vec![0.0; nv];
        for (ei, e) in mesh.edges.iter().enumerate() {
            b[e.v] += form.xi[ei][k];
            b[e.u] -= form.xi[ei][k];
        }
        coords.push(cg_solve(mesh, &b));
    }
    let mut f = vec![vec![0.0; n]; nv];
    for v in 0..nv {
        for k in 0..n {
            f[v][k] = coords[k][v] - coords[k][gauge_vertex];
        }
    }
    let mut objective = 0.0;
    for (ei, e) in mesh.edges.iter().enumerate() {
        for k in 0..n {
            objective += (f[e.v][k] - f[e.u][k] - form.xi[ei][k]).powi(2);
        }
    }
    Ok((f, objective))
}

/// Rigid alignment of `a` onto `b` (rotation + translation, det +1) and the
/// root-mean-square distance after alignment. Returns (rms, aligned a).
pub fn procrustes(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch);
    }
    let n = a[0].len();
    let m = a.len() as f64;
    let mut ca = vec![0.0; n];
    let mut cb = vec![0.0; n];
    for (x, y) in a.iter().zip(b) {
        for k in 0..n {
            ca[k] += x[k] / m;
            cb[k] += y[k] / m;
        }
    }
    let mut h = DMatrix::<f64>::zeros(n, n);
    for (x, y) in a.iter().zip(b) {
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] += (x[i] - ca[i]) * (y[j] - cb[j]);
            }
        }
    }
    let svd = h.svd(true, true);
    let u = svd.u.as_ref().ok_or(Error::ShapeMismatch)?;
    let vt = svd.v_t.as_ref().ok_or(Error::ShapeMismatch)?;
    // rotation mapping centred a to centred b: R = Vᵗᵀ Uᵀ with det fix
    let mut r = vt.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut v = vt.transpose();
        for i in 0..n {
            v[(i, n - 1)] = -v[(i, n - 1)];
        }
        r = v * u.transpose();
    }
    let mut aligned = Vec::with_capacity(a.len());
    let mut sq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = cb[i];
            for j in 0..n {
                acc += r[(i, j)] * (x[j] - ca[j]);
            }
            out[i] = acc;
            sq += (acc - y[i]).powi(2);
        }
        aligned.push(out);
    }
    Ok(((sq / m).sqrt(), aligned))
}

/// Second-fundamental-form comparison between the original embedding and a
/// reconstruction `f` (already aligned to the original positions): both are
/// run through the same quadratic-fit estimator in the original frames.
/// Returns per-vertex |B_rec − B_orig| maxima and, for hypersurface patches
/// (q = 1), the per-vertex angle between original and reconstructed
/// area-weighted normals.
pub fn secondff_check(mesh: &SpinorMesh, f: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if f.len() != mesh.vertex_count() {
        return Err(Error::ShapeMismatch);
    }
    let p = mesh.p as usize;
    let q = mesh.q as usize;
    let nb = crate::forward::neighbors_of(mesh);
    let b_orig = estimate_b(
        &mesh.positions,
        &mesh.tangent_frames,
        &mesh.normal_frames,
        &nb,
        p,
        q,
    );
    let f_owned: Vec<Vec<f64>> = f.to_vec();
    let b_rec = estimate_b(
        &f_owned,
        &mesh.tangent_frames,
        &mesh.normal_frames,
        &nb,
        p,
        q,
    );
    let b_diff: Vec<f64> = b_orig
        .iter()
        .zip(&b_rec)
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        })
        .collect();

    let mut normal_angle = Vec::new();
    if q == 1 && mesh.n == 3 && !mesh.faces.is_empty() {
        let nv = mesh.vertex_count();
        let mut acc = vec![[0.0f64; 3]; nv];
        for face in &mesh.faces {
            let a = &f_owned[face[0]];
            let b = &f_owned[face[1]];
            let c = &f_owned[face[2]];
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let cross = [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ];
            for &vi in face {
                for k in 0..3 {
                    acc[vi][k] += cross[k];
                }
            }
        }
        for v in 0..nv {
            let len = (acc[v][0].powi(2) + acc[v][1].powi(2) + acc[v][2].powi(2)).sqrt();
            if len < 1e-14 {
                return Err(Error::DegenerateTriangle(v));
            }
            let orig = &mesh.normal_frames[v][0];
            let mut d = (acc[v][0] * orig[0] + acc[v][1] * orig[1] + acc[v][2] * orig[2]) / len;
            // reconstructed face orientation may be globally flipped
            d = d.abs().min(1.0);
            normal_angle.push(d.acos());
        }
    }
    Ok((b_diff, normal_angle))
}
