//! High-level drivers shared by the command-line front end and the
//! acceptance suite: forward extraction with residual reports, the
//! roundtrip reconstruction, and refinement studies.

use crate::config::{Geometry, ScenarioConfig};
use crate::error::Result;
use crate::forward::{
    dirac_check, forward_extract, gram_check, killing_residual, product_rule_check, Stats,
};
use crate::matrix_rep::{build_ideals, IdealSystem, MatrixRep};
use crate::mesh::{face_holonomy, read_obj, SpinorField, SpinorMesh};
use crate::reconstruct::{
    build_xi, closedness_check, integrate, isometry_check, procrustes, secondff_check, OneForm,
};
use crate::report::CsvReport;
use crate::scenarios::{generate, patch_from_mesh, GeomPatch};

/// Resolves the configured geometry into a patch.
pub fn build_patch(cfg: &ScenarioConfig) -> Result<GeomPatch> {
    match &cfg.geometry {
        Geometry::Builtin(s) => Ok(generate(*s, cfg.level)),
        Geometry::File(path) => {
            let file = std::io::BufReader::new(std::fs::File::open(path)?);
            let (positions, faces) = read_obj(file)?;
            patch_from_mesh(positions, faces)
        }
    }
}

/// Forward extraction plus every residual evaluated on the result.
pub struct ForwardRun {
    pub rep: MatrixRep,
    pub sys: IdealSystem,
    pub mesh: SpinorMesh,
    pub field: SpinorField,
    pub h: f64,
    pub killing: Vec<f64>,
    pub killing_stats: Stats,
    pub gram_dev: f64,
    pub holonomy: Stats,
    pub product_rule: Stats,
    /// (per-vertex residual, |φ| deviation) for surfaces in ℝ³
    pub dirac: Option<(Vec<f64>, f64)>,
}

pub fn run_forward(patch: &GeomPatch) -> Result<ForwardRun> {
    let rep = MatrixRep::build(patch.n)?;
    let sys = build_ideals(&rep);
    let (mesh, field) = forward_extract(patch, &sys)?;
    let killing = killing_residual(&mesh, &field)?;
    let killing_stats = Stats::from_values(&killing);
    let gram_dev = gram_check(&rep, &field)?;
    let holonomy = Stats::from_values(&face_holonomy(&mesh));
    let product_rule = Stats::from_values(&product_rule_check(&mesh, &field)?);
    let dirac = if mesh.n == 3 && mesh.p == 2 {
        Some(dirac_check(&rep, &mesh, &field)?)
    } else {
        None
    };
    Ok(ForwardRun {
        rep,
        sys,
        mesh,
        field,
        h: patch.h,
        killing,
        killing_stats,
        gram_dev,
        holonomy,
        product_rule,
        dirac,
    })
}

/// ξ construction, integration, and all reconstruction diagnostics.
pub struct RoundtripRun {
    pub form: OneForm,
    pub nonvec: Stats,
    pub closed: Vec<f64>,
    pub closed_stats: Stats,
    pub iso_stats: Stats,
    pub f: Vec<Vec<f64>>,
    pub objective: f64,
    pub rms: f64,
    pub aligned: Vec<Vec<f64>>,
    pub b_diff: Stats,
    pub normal_angle: Stats,
}

pub fn run_roundtrip(fwd: &ForwardRun, gauge_vertex: usize) -> Result<RoundtripRun> {
    let form = build_xi(&fwd.mesh, &fwd.field)?;
    let nonvec = Stats::from_values(&form.nonvec);
    let closed = if fwd.mesh.faces.is_empty() {
        Vec::new()
    } else {
        closedness_check(&fwd.mesh, &form)?
    };
    let closed_stats = Stats::from_values(&closed);
    let iso_stats = Stats::from_values(&isometry_check(&fwd.mesh, &form));
    let (f, objective) = integrate(&fwd.mesh, &form, gauge_vertex)?;
    let (rms, aligned) = procrustes(&f, &fwd.mesh.positions)?;
    let (b_diff, normal_angle) = secondff_check(&fwd.mesh, &aligned)?;
    Ok(RoundtripRun {
        form,
        nonvec,
        closed,
        closed_stats,
        iso_stats,
        f,
        objective,
        rms,
        aligned: aligned.clone(),
        b_diff: Stats::from_values(&b_diff),
        normal_angle: Stats::from_values(&normal_angle),
    })
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    pub gram_dev: f64,
    pub killing_mean: f64,
    pub killing_max: f64,
    pub nonvec_max: f64,
    pub closed_mean: f64,
    pub closed_max: f64,
    pub iso_max: f64,
    pub rms: f64,
    pub b_diff_mean: f64,
    pub dirac_mean: Option<f64>,
}

pub fn convergence_study(cfg: &ScenarioConfig) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::with_capacity(cfg.levels.len());
    for &level in &cfg.levels {
        let mut level_cfg = cfg.clone();
        level_cfg.level = level;
        let patch = build_patch(&level_cfg)?;
        let fwd = run_forward(&patch)?;
        let rt = run_roundtrip(&fwd, cfg.gauge_vertex.min(patch.positions.len() - 1))?;
        rows.push(ConvergenceRow {
            level,
            h: fwd.h,
            gram_dev: fwd.gram_dev,
            killing_mean: fwd.killing_stats.mean,
            killing_max: fwd.killing_stats.max,
            nonvec_max: rt.nonvec.max,
            closed_mean: rt.closed_stats.mean,
            closed_max: rt.closed_stats.max,
            iso_max: rt.iso_stats.max,
            rms: rt.rms,
            b_diff_mean: rt.b_diff.mean,
            dirac_mean: fwd.dirac.as_ref().map(|(r, _)| Stats::from_values(r).mean),
        });
    }
    Ok(rows)
}

pub fn forward_csv(fwd: &ForwardRun) -> CsvReport {
    let mut report = CsvReport::new();
    report.push("summary", "h", fwd.h);
    report.push("summary", "gram_dev_max", fwd.gram_dev);
    report.push("summary", "killing_max", fwd.killing_stats.max);
    report.push("summary", "killing_mean", fwd.killing_stats.mean);
    report.push("summary", "holonomy_max", fwd.holonomy.max);
    report.push("summary", "product_rule_max", fwd.product_rule.max);
    if let Some((res, dev)) = &fwd.dirac {
        let stats = Stats::from_values(res);
        report.push("summary", "dirac_max", stats.max);
        report.push("summary", "dirac_mean", stats.mean);
        report.push("summary", "norm_const_dev", *dev);
    }
    for (ei, r) in fwd.killing.iter().enumerate() {
        report.push(format!("edge_{ei}"), "killing", *r);
    }
    report
}

pub fn roundtrip_csv(rt: &RoundtripRun) -> CsvReport {
    let mut report = CsvReport::new();
    report.push("summary", "nonvec_max", rt.nonvec.max);
    report.push("summary", "closedness_max", rt.closed_stats.max);
    report.push("summary", "closedness_mean", rt.closed_stats.mean);
    report.push("summary", "isometry_max", rt.iso_stats.max);
    report.push("summary", "objective", rt.objective);
    report.push("summary", "rms_alignment", rt.rms);
    report.push("summary", "secondff_mean", rt.b_diff.mean);
    report.push("summary", "secondff_max", rt.b_diff.max);
    report.push("summary", "normal_angle_max", rt.normal_angle.max);
    for (fi, r) in rt.closed.iter().enumerate() {
        report.push(format!("face_{fi}"), "closedness", *r);
    }
    report
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> CsvReport {
    let mut report = CsvReport::new();
    for row in rows {
        let entity = format!("level_{}", row.level);
        report.push(&entity, "h", row.h);
        report.push(&entity, "gram_dev_max", row.gram_dev);
        report.push(&entity, "killing_mean", row.killing_mean);
        report.push(&entity, "killing_max", row.killing_max);
        report.push(&entity, "nonvec_max", row.nonvec_max);
        report.push(&entity, "closedness_mean", row.closed_mean);
        report.push(&entity, "closedness_max", row.closed_max);
        report.push(&entity, "isometry_max", row.iso_max);
        report.push(&entity, "rms_alignment", row.rms);
        report.push(&entity, "secondff_mean", row.b_diff_mean);
        if let Some(d) = row.dirac_mean {
            report.push(&entity, "dirac_mean", d);
        }
    }
    report
}
