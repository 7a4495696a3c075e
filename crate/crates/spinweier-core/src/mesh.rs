//! Triangulated p-manifolds with adapted frames, per-edge Spin transport,
//! and the serialization formats (OBJ-subset meshes, text spinor fields,
//! CSV residual reports).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};


use crate::clifford::Multivector;
use crate::error::{Error, Result};
use crate::spin::{lambda, spin_lift, RMatrix, SpinElement};

/// Undirected edge with canonical orientation u → v, u < v.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

/// A discretized p-manifold carrying everything the spinorial pipeline
/// needs: adapted frames, second fundamental form samples, the U(1)
/// connection, and per-edge Spin lifts of the frame changes.
#[derive(Debug, Clone)]
pub struct SpinorMesh {
    pub n: u32,
    pub p: u32,
    pub q: u32,
    /// global positions in ℝ^n (empty in abstract reconstruction mode)
    pub positions: Vec<Vec<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// per-vertex tangent frame vectors e_1..e_p in global coordinates
    pub tangent_frames: Vec<Vec<Vec<f64>>>,
    /// per-vertex normal frame vectors f_1..f_q in global coordinates
    pub normal_frames: Vec<Vec<Vec<f64>>>,
    /// per-vertex second fundamental form, flattened [j*p*p + a*p + b]
    pub b: Vec<Vec<f64>>,
    /// per-edge U(1) connection sample A(edge)
    pub a_conn: Vec<f64>,
    /// per-edge lift of the adapted frame change u → v
    pub edge_lifts: Vec<SpinElement>,
    /// per-edge ℤ₂ sign flags for the lifts
    pub edge_signs: Vec<f64>,
    pub edge_lengths: Vec<f64>,
    /// tangent-frame coordinates of the edge vector at both endpoints
    pub edge_tan: Vec<(Vec<f64>, Vec<f64>)>,
    /// per-edge tangent block of the frame-change rotation (p × p)
    pub edge_qt: Vec<RMatrix>,
    /// per-edge normal block (q × q)
    pub edge_qn: Vec<RMatrix>,
    /// adjacency: per vertex, (edge index, +1 if the vertex is the tail u)
    pub vertex_edges: Vec<Vec<(usize, f64)>>,
}

impl SpinorMesh {
    pub fn vertex_count(&self) -> usize {
        self.tangent_frames.len()
    }

    /// Symmetric access to the stored B array.
    pub fn b_coeff(&self, vertex: usize, j: usize, a: usize, b: usize) -> f64 {
        let p = self.p as usize;
        self.b[vertex][j * p * p + a * p + b]
    }

    /// The signed transport multivector for an oriented traversal of edge
    /// `e`: forward (u → v) when `forward`, otherwise the inverse.
    pub fn transport(&self, e: usize, forward: bool) -> Multivector {
        let g = self.edge_lifts[e].mv().scale(self.edge_signs[e].into());
        if forward {
            g
        } else {
            g.tau()
        }
    }

    /// Checks edge-connectivity of the vertex set.
    pub fn check_connected(&self) -> Result<()> {
        let nv = self.vertex_count();
        if nv == 0 {
            return Ok(());
        }
        let mut seen = vec![false; nv];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(e, _) in &self.vertex_edges[v] {
                let Edge { u, v: w } = self.edges[e];
                let other = if u == v { w } else { u };
                if !seen[other] {
                    seen[other] = true;
                    count += 1;
                    stack.push(other);
                }
            }
        }
        if count != nv {
            return Err(Error::Disconnected);
        }
        Ok(())
    }
}

/// Builds the undirected edge list from triangles, rejecting edges shared by
/// more than two faces.
pub fn edges_from_faces(faces: &[[usize; 3]], nv: usize) -> Result<Vec<Edge>> {
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for f in faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            if a == b || a >= nv || b >= nv {
                return Err(Error::Parse(format!("bad face ({},{},{})", f[0], f[1], f[2])));
            }
            let key = (a.min(b), a.max(b));
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    for (&(u, v), &c) in &counts {
        if c > 2 {
            return Err(Error::NonManifold(u, v));
        }
    }
    Ok(counts.keys().map(|&(u, v)| Edge { u, v }).collect())
}

pub fn build_adjacency(edges: &[Edge], nv: usize) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); nv];
    for (i, e) in edges.iter().enumerate() {
        adj[e.u].push((i, 1.0));
        adj[e.v].push((i, -1.0));
    }
    adj
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rotation factor of a square matrix by SVD polar decomposition, with the
/// determinant forced to +1.
pub fn polar_rotation(m: &RMatrix) -> RMatrix {
    let k = m.nrows();
    if k == 0 {
        return RMatrix::identity(0, 0);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut r = &u * &vt;
    if r.determinant() < 0.0 {
        // flip the weakest singular direction
        let mut uf = u.clone();
        for i in 0..k {
            uf[(i, k - 1)] = -uf[(i, k - 1)];
        }
        r = &uf * &vt;
    }
    r
}

/// Populates edge geometry and Spin lifts from positions and frames: edge
/// lengths, tangent coordinates at both endpoints, and the adapted
/// frame-change rotation (polar factors of the tangent and normal
/// cross-Gram blocks) with its lift.
pub fn build_edge_transport(mesh: &mut SpinorMesh) -> Result<()> {
    let p = mesh.p as usize;
    let q = mesh.q as usize;
    let n = mesh.n as usize;
    mesh.edge_lengths.clear();
    mesh.edge_tan.clear();
    mesh.edge_lifts.clear();
    mesh.edge_signs.clear();
    mesh.edge_qt.clear();
    mesh.edge_qn.clear();
    for e in &mesh.edges {
        let (u, v) = (e.u, e.v);
        let vec: Vec<f64> = (0..n)
            .map(|i| mesh.positions[v][i] - mesh.positions[u][i])
            .collect();
        let h = dot(&vec, &vec).sqrt();
        if h == 0.0 {
            return Err(Error::DegenerateTriangle(u));
        }
        let xu: Vec<f64> = (0..p).map(|a| dot(&vec, &mesh.tangent_frames[u][a])).collect();
        let xv: Vec<f64> = (0..p).map(|a| dot(&vec, &mesh.tangent_frames[v][a])).collect();
        // cross-Gram blocks <frame_a(v), frame_b(u)>
        let mt = RMatrix::from_fn(p, p, |a, b| {
            dot(&mesh.tangent_frames[v][a], &mesh.tangent_frames[u][b])
        });
        let mn = RMatrix::from_fn(q, q, |a, b| {
            dot(&mesh.normal_frames[v][a], &mesh.normal_frames[u][b])
        });
        let qt = polar_rotation(&mt);
        let qn = polar_rotation(&mn);
        let mut r = RMatrix::identity(n, n);
        r.view_mut((0, 0), (p, p)).copy_from(&qt);
        r.view_mut((p, p), (q, q)).copy_from(&qn);
        let g = spin_lift(&r)?;
        mesh.edge_lengths.push(h);
        mesh.edge_tan.push((xu, xv));
        mesh.edge_lifts.push(g);
        mesh.edge_signs.push(1.0);
        mesh.edge_qt.push(qt);
        mesh.edge_qn.push(qn);
    }
    mesh.vertex_edges = build_adjacency(&mesh.edges, mesh.vertex_count());
    Ok(())
}

/// Per-face ℤ₂ holonomy diagnostic: how far the signed product of the three
/// boundary lifts sits from ±1, and whether the sign bookkeeping closes up.
pub fn face_holonomy(mesh: &SpinorMesh) -> Vec<f64> {
    let index: BTreeMap<(usize, usize), usize> = mesh
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| ((e.u, e.v), i))
        .collect();
    mesh.faces
        .iter()
        .map(|f| {
            let mut g = Multivector::one(mesh.n);
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let (idx, forward) = match index.get(&(a.min(b), a.max(b))) {
                    Some(&i) => (i, a < b),
                    None => unreachable!("face edge must exist"),
                };
                g = &mesh.transport(idx, forward) * &g;
            }
            let plus = (&g - &Multivector::one(mesh.n)).norm_inf();
            let minus = (&g + &Multivector::one(mesh.n)).norm_inf();
            plus.min(minus)
        })
        .collect()
}

/// Per-edge lift sanity: λ(g_e) must match the block frame-change rotation.
pub fn edge_lift_residual(mesh: &SpinorMesh) -> f64 {
    let p = mesh.p as usize;
    let q = mesh.q as usize;
    let n = mesh.n as usize;
    let mut worst = 0.0f64;
    for (i, g) in mesh.edge_lifts.iter().enumerate() {
        let mut r = RMatrix::identity(n, n);
        r.view_mut((0, 0), (p, p)).copy_from(&mesh.edge_qt[i]);
        r.view_mut((p, p), (q, q)).copy_from(&mesh.edge_qn[i]);
        worst = worst.max((lambda(g) - r).abs().max());
    }
    worst
}

/// Per-vertex spinor values, one multivector per ideal index.
#[derive(Debug, Clone)]
pub struct SpinorField {
    pub n: u32,
    /// values[vertex][spinor index]
    pub values: Vec<Vec<Multivector>>,
}

impl SpinorField {
    pub fn spinor_count(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Σ_i [φ_i] at one vertex.
    pub fn sum_at(&self, vertex: usize) -> Multivector {
        let mut s = Multivector::zero(self.n);
        for x in &self.values[vertex] {
            s = &s + x;
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Writes the OBJ subset: `v` lines with n coordinates, `f` lines with
/// 1-based triangle indices.
pub fn write_obj(w: &mut impl Write, positions: &[Vec<f64>], faces: &[[usize; 3]]) -> Result<()> {
    for pos in positions {
        write!(w, "v")?;
        for x in pos {
            write!(w, " {:.17e}", x)?;
        }
        writeln!(w)?;
    }
    for f in faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// Reads the OBJ subset back: only `v` and `f` records, triangles only;
/// vertex attributes after `/` are ignored.
pub fn read_obj(r: impl BufRead) -> Result<(Vec<Vec<f64>>, Vec<[usize; 3]>)> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let coords: std::result::Result<Vec<f64>, _> =
                    it.map(|t| t.parse::<f64>()).collect();
                let coords =
                    coords.map_err(|_| Error::Parse(format!("bad vertex line {line:?}")))?;
                if coords.is_empty() {
                    return Err(Error::Parse(format!("bad vertex line {line:?}")));
                }
                positions.push(coords);
            }
            Some("f") => {
                let idx: std::result::Result<Vec<usize>, Error> = it
                    .map(|t| {
                        t.split('/')
                            .next()
                            .unwrap_or("")
                            .parse::<usize>()
                            .map_err(|_| Error::Parse(format!("bad face line {line:?}")))
                    })
                    .collect();
                let idx = idx?;
                if idx.len() != 3 || idx.iter().any(|&i| i == 0) {
                    return Err(Error::Parse(format!(
                        "only triangles are supported: {line:?}"
                    )));
                }
                faces.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
            }
            // other record types (vn, vt, o, g, s, usemtl, …) are ignored
            _ => {}
        }
    }
    Ok((positions, faces))
}

/// Field format: blocks of `vertex <id>` / `spinor <k>` headers followed by
/// Multivector text lines.
pub fn write_field(w: &mut impl Write, field: &SpinorField) -> Result<()> {
    writeln!(w, "dim {}", field.n)?;
    for (v, spinors) in field.values.iter().enumerate() {
        writeln!(w, "vertex {v}")?;
        for (k, x) in spinors.iter().enumerate() {
            writeln!(w, "spinor {k}")?;
            write!(w, "{}", x.to_text())?;
        }
    }
    Ok(())
}

pub fn read_field(r: impl BufRead) -> Result<SpinorField> {
    let mut n: Option<u32> = None;
    let mut values: Vec<Vec<Multivector>> = Vec::new();
    let mut block = String::new();
    let mut open = false;

    fn flush(
        n: Option<u32>,
        values: &mut [Vec<Multivector>],
        block: &mut String,
        open: &mut bool,
    ) -> Result<()> {
        if *open {
            let dim = n.ok_or_else(|| Error::Parse("missing dim header".into()))?;
            let mv = Multivector::from_text(dim, block)?;
            values
                .last_mut()
                .ok_or_else(|| Error::Parse("spinor before vertex".into()))?
                .push(mv);
            block.clear();
            *open = false;
        }
        Ok(())
    }

    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        let mut it = t.split_whitespace();
        match it.next() {
            Some("dim") => {
                let d: u32 = it
                    .next()
                    .and_then(|x| x.parse().ok())
                    .ok_or_else(|| Error::Parse("bad dim header".into()))?;
                n = Some(d);
            }
            Some("vertex") => {
                flush(n, &mut values, &mut block, &mut open)?;
                values.push(Vec::new());
            }
            Some("spinor") => {
                flush(n, &mut values, &mut block, &mut open)?;
                open = true;
            }
            Some(_) if open => {
                block.push_str(t);
                block.push('\n');
            }
            _ => {}
        }
    }
    flush(n, &mut values, &mut block, &mut open)?;
    let n = n.ok_or_else(|| Error::Parse("missing dim header".into()))?;
    Ok(SpinorField { n, values })
}
