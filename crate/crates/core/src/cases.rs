//! Benchmark definitions, analytic solutions, error norms and convergence
//! tables.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::field::{DgField, Staggering};
use crate::fieldops::SpdgOperators;
use crate::grid::{CellRef, StaggeredGrid};
use crate::imex::ImexScheme;
use crate::nssolver::{PhysicsConfig, Solver};
use crate::SpdgError;

/// Trigonometric stream function on the unit cube and its curl.
pub fn trig_field(x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let k = 2.0 * PI;
    let (sx, cx) = (k * x[0]).sin_cos();
    let (sy, cy) = (k * x[1]).sin_cos();
    let (sz, cz) = (k * x[2]).sin_cos();
    let psi = [-sx * cy * cz, 2.0 * cx * sy * cz, cx * cy * sz];
    let u = [
        2.0 * PI * cx * sy * sz,
        4.0 * PI * sx * cy * sz,
        -6.0 * PI * sx * sy * cz,
    ];
    (psi, u)
}

/// ABC flow on `[−π, π]³`: a Beltrami field with `ω = u`.
pub fn abc_exact(x: [f64; 3], t: f64, nu: f64) -> ([f64; 3], [f64; 3]) {
    let d = (-nu * t).exp();
    let u = [
        (x[2].sin() + x[1].cos()) * d,
        (x[0].sin() + x[2].cos()) * d,
        (x[1].sin() + x[0].cos()) * d,
    ];
    (u, u)
}

/// Two-dimensional Taylor-Green vortex, extruded in z.
pub fn tgv_exact(x: [f64; 3], t: f64, nu: f64) -> ([f64; 3], [f64; 3]) {
    let d = (-2.0 * nu * t).exp();
    let (sx, cx) = x[0].sin_cos();
    let (sy, cy) = x[1].sin_cos();
    ([sx * cy * d, -cx * sy * d, 0.0], [0.0, 0.0, 2.0 * sx * sy * d])
}

pub const SHEAR_THETA: f64 = 0.05;
pub const SHEAR_WIDTH: f64 = PI / 15.0;

fn sech(a: f64) -> f64 {
    if a.abs() > 350.0 {
        0.0
    } else {
        1.0 / a.cosh()
    }
}

/// Perturbed double shear layer on `[0, 2π]² × [0, 1]`: initial velocity.
pub fn shear_layer_velocity(x: [f64; 3]) -> [f64; 3] {
    let u = if x[1] <= PI {
        ((x[1] - PI / 2.0) / SHEAR_WIDTH).tanh()
    } else {
        ((3.0 * PI / 2.0 - x[1]) / SHEAR_WIDTH).tanh()
    };
    [u, SHEAR_THETA * x[0].sin(), 0.0]
}

/// Initial vorticity of the shear layer (curl of [`shear_layer_velocity`]).
pub fn shear_layer_init(x: [f64; 3]) -> [f64; 3] {
    let s = if x[1] <= PI {
        -sech((x[1] - PI / 2.0) / SHEAR_WIDTH).powi(2)
    } else {
        sech((3.0 * PI / 2.0 - x[1]) / SHEAR_WIDTH).powi(2)
    };
    [0.0, 0.0, SHEAR_THETA * x[0].cos() + s / SHEAR_WIDTH]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseKind {
    Trig,
    Abc,
    TaylorGreen,
    ShearLayer,
}

impl CaseKind {
    pub const ALL: [CaseKind; 4] = [CaseKind::Trig, CaseKind::Abc, CaseKind::TaylorGreen, CaseKind::ShearLayer];
}

impl FromStr for CaseKind {
    type Err = SpdgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trig" => Ok(CaseKind::Trig),
            "abc" => Ok(CaseKind::Abc),
            "tgv" | "taylor-green" => Ok(CaseKind::TaylorGreen),
            "shear" | "shear-layer" => Ok(CaseKind::ShearLayer),
            other => Err(SpdgError::InvalidArgument(format!(
                "unknown case '{other}' (expected trig, abc, tgv or shear)"
            ))),
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(CaseSpec::new(*self).name)
    }
}

/// A benchmark problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub kind: CaseKind,
    pub name: &'static str,
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub default_nu: f64,
    pub default_t_end: f64,
    pub recommended_counts: Vec<[usize; 3]>,
}

impl CaseSpec {
    pub fn new(kind: CaseKind) -> Self {
        let tp = 2.0 * PI;
        match kind {
            CaseKind::Trig => Self {
                kind,
                name: "trig",
                lower: [0.0; 3],
                upper: [1.0; 3],
                default_nu: 0.0,
                default_t_end: 0.0,
                recommended_counts: vec![[6; 3], [12; 3], [24; 3]],
            },
            CaseKind::Abc => Self {
                kind,
                name: "abc",
                lower: [-PI; 3],
                upper: [PI; 3],
                default_nu: 0.0,
                default_t_end: 0.1,
                recommended_counts: vec![[8; 3], [16; 3], [24; 3]],
            },
            CaseKind::TaylorGreen => Self {
                kind,
                name: "tgv",
                lower: [0.0; 3],
                upper: [tp, tp, 1.0],
                default_nu: 1e-2,
                default_t_end: 0.2,
                recommended_counts: vec![[48, 48, 4]],
            },
            CaseKind::ShearLayer => Self {
                kind,
                name: "shear",
                lower: [0.0; 3],
                upper: [tp, tp, 1.0],
                default_nu: 1e-2,
                default_t_end: 8.0,
                recommended_counts: vec![[80, 80, 4]],
            },
        }
    }

    pub fn grid(&self, counts: [usize; 3]) -> Result<StaggeredGrid, SpdgError> {
        StaggeredGrid::new(self.lower, self.upper, counts)
    }

    /// Velocity at `(x, t)`. Cases without a closed-form evolution return
    /// the initial field for every `t`.
    pub fn velocity(&self, x: [f64; 3], t: f64, nu: f64) -> [f64; 3] {
        match self.kind {
            CaseKind::Trig => trig_field(x).1,
            CaseKind::Abc => abc_exact(x, t, nu).0,
            CaseKind::TaylorGreen => tgv_exact(x, t, nu).0,
            CaseKind::ShearLayer => shear_layer_velocity(x),
        }
    }

    pub fn vorticity(&self, x: [f64; 3], t: f64, nu: f64) -> [f64; 3] {
        match self.kind {
            CaseKind::Trig => trig_vorticity(x),
            CaseKind::Abc => abc_exact(x, t, nu).1,
            CaseKind::TaylorGreen => tgv_exact(x, t, nu).1,
            CaseKind::ShearLayer => shear_layer_init(x),
        }
    }

    /// Stream function, where one is known in closed form.
    pub fn stream(&self, x: [f64; 3], t: f64, nu: f64) -> Option<[f64; 3]> {
        match self.kind {
            CaseKind::Trig => Some(trig_field(x).0),
            // curl u = u, so u itself is a stream function for the ABC flow.
            CaseKind::Abc => Some(abc_exact(x, t, nu).0),
            _ => None,
        }
    }

    /// Whether `velocity`/`vorticity` are exact for `t > 0`.
    pub fn has_exact_evolution(&self) -> bool {
        matches!(self.kind, CaseKind::Abc | CaseKind::TaylorGreen)
    }
}

/// Curl of the trigonometric velocity.
fn trig_vorticity(x: [f64; 3]) -> [f64; 3] {
    let k = 2.0 * PI;
    let (sx, cx) = (k * x[0]).sin_cos();
    let (sy, cy) = (k * x[1]).sin_cos();
    let (sz, cz) = (k * x[2]).sin_cos();
    // u = (2π cx sy sz, 4π sx cy sz, −6π sx sy cz)
    let du3_dy = -6.0 * PI * k * sx * cy * cz;
    let du2_dz = 4.0 * PI * k * sx * cy * cz;
    let du1_dz = 2.0 * PI * k * cx * sy * cz;
    let du3_dx = -6.0 * PI * k * cx * sy * cz;
    let du2_dx = 4.0 * PI * k * cx * cy * sz;
    let du1_dy = 2.0 * PI * k * cx * cy * sz;
    [du3_dy - du2_dz, du1_dz - du3_dx, du2_dx - du1_dy]
}

/// L1 and L∞ error of one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l1: f64,
    pub linf: f64,
}

/// Nodal norms: `L1 = Σ_cells Σ_l |e_l| w_l |C|`, `L∞ = max_l |e_l|`, with
/// `e_l` the difference to `exact` at DoF `l`. One entry per component.
pub fn error_norms<F>(ops: &SpdgOperators, field: &DgField, exact: F) -> Vec<ErrorNorms>
where
    F: Fn([f64; 3]) -> [f64; 3],
{
    let nc = field.ncomp();
    let vol = ops.grid().cell_volume();
    let mut out = vec![ErrorNorms { l1: 0.0, linf: 0.0 }; nc];
    for cell in 0..field.ncells() {
        for l in 0..ops.ndof() {
            let e = exact(ops.node_location(field.staggering(), cell, l));
            let w = ops.basis().node_weight(l) * vol;
            for c in 0..nc {
                let d = (field.get(cell, l, c) - e[c]).abs();
                out[c].l1 += d * w;
                out[c].linf = out[c].linf.max(d);
            }
        }
    }
    out
}

/// Norms of the polynomial error sampled at the `N+2`-point tensor Gauss
/// rule: `L1 ≈ ∫ |u_h − u|`, `L∞ = max` over those points.
pub fn error_norms_quadrature<F>(ops: &SpdgOperators, field: &DgField, exact: F) -> Vec<ErrorNorms>
where
    F: Fn([f64; 3]) -> [f64; 3],
{
    let b = ops.basis();
    let g = ops.grid();
    let n = b.n1d();
    let nc = field.ncomp();
    let qx = b.quad_nodes();
    let qw = b.quad_weights();
    let nq = qx.len();
    let phi: Vec<Vec<f64>> = qx.iter().map(|&x| b.values(x)).collect();
    let vol = g.cell_volume();
    let mut out = vec![ErrorNorms { l1: 0.0, linf: 0.0 }; nc];
    for cell in 0..field.ncells() {
        let i = g.cell_index(cell);
        let cref = CellRef {
            staggering: field.staggering(),
            index: [i[0] as i64, i[1] as i64, i[2] as i64],
        };
        let dofs = field.cell(cell);
        for q3 in 0..nq {
            for q2 in 0..nq {
                for q1 in 0..nq {
                    let mut val = [0.0; 3];
                    for l3 in 0..n {
                        for l2 in 0..n {
                            for l1 in 0..n {
                                let p = phi[q1][l1] * phi[q2][l2] * phi[q3][l3];
                                let l = l1 + n * (l2 + n * l3);
                                for c in 0..nc {
                                    val[c] += p * dofs[l * nc + c];
                                }
                            }
                        }
                    }
                    let e = exact(g.physical(cref, [qx[q1], qx[q2], qx[q3]]));
                    let w = qw[q1] * qw[q2] * qw[q3] * vol;
                    for c in 0..nc {
                        let d = (val[c] - e[c]).abs();
                        out[c].l1 += d * w;
                        out[c].linf = out[c].linf.max(d);
                    }
                }
            }
        }
    }
    out
}

/// Per-cell means of component `c` under the node weights.
fn cell_means(ops: &SpdgOperators, field: &DgField) -> Vec<[f64; 3]> {
    let nd = ops.ndof();
    let nc = field.ncomp();
    (0..field.ncells())
        .map(|cell| {
            let mut m = [0.0; 3];
            for l in 0..nd {
                let w = ops.basis().node_weight(l);
                for (c, mc) in m.iter_mut().enumerate().take(nc) {
                    *mc += w * field.get(cell, l, c);
                }
            }
            m
        })
        .collect()
}

/// Norms of the cell-mean error: `L1 = Σ_cells |ū_h − ū| |C|`,
/// `L∞ = max_cells |ū_h − ū|`, with `ū` from the `N+2`-point rule.
pub fn error_norms_cell_mean<F>(ops: &SpdgOperators, field: &DgField, exact: F) -> Vec<ErrorNorms>
where
    F: Fn([f64; 3]) -> [f64; 3] + Sync,
{
    let nc = field.ncomp();
    let exact_field = ops.l2_project(field.staggering(), nc, exact);
    let a = cell_means(ops, field);
    let b = cell_means(ops, &exact_field);
    let vol = ops.grid().cell_volume();
    let mut out = vec![ErrorNorms { l1: 0.0, linf: 0.0 }; nc];
    for (ma, mb) in a.iter().zip(&b) {
        for c in 0..nc {
            let d = (ma[c] - mb[c]).abs();
            out[c].l1 += d * vol;
            out[c].linf = out[c].linf.max(d);
        }
    }
    out
}

/// Where an error is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMetric {
    /// DoF values against the exact field at the nodes.
    Nodal,
    /// Polynomial values at the `N+2`-point tensor rule.
    Quadrature,
    /// Cell means.
    CellMean,
}

impl FromStr for ErrorMetric {
    type Err = SpdgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nodal" => Ok(ErrorMetric::Nodal),
            "quadrature" => Ok(ErrorMetric::Quadrature),
            "cell-mean" | "cell_mean" => Ok(ErrorMetric::CellMean),
            other => Err(SpdgError::InvalidArgument(format!(
                "unknown error metric '{other}' (expected nodal, quadrature or cell-mean)"
            ))),
        }
    }
}

pub fn error_norms_with<F>(metric: ErrorMetric, ops: &SpdgOperators, field: &DgField, exact: F) -> Vec<ErrorNorms>
where
    F: Fn([f64; 3]) -> [f64; 3] + Sync,
{
    match metric {
        ErrorMetric::Nodal => error_norms(ops, field, exact),
        ErrorMetric::Quadrature => error_norms_quadrature(ops, field, exact),
        ErrorMetric::CellMean => error_norms_cell_mean(ops, field, exact),
    }
}

/// `log(e_c/e_f) / log(h_c/h_f)`, or `None` when either error is at
/// round-off level or not positive.
pub fn observed_order(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> Option<f64> {
    const ROUNDOFF: f64 = 1e-13;
    if !(e_coarse > ROUNDOFF && e_fine > ROUNDOFF) {
        return None;
    }
    Some((e_coarse / e_fine).ln() / (h_coarse / h_fine).ln())
}

/// One grid level of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_h: usize,
    pub h: f64,
    /// `(label, L1, L1 order, L∞, L∞ order)` per reported quantity.
    pub quantities: Vec<QuantityError>,
    /// Largest div-curl residual seen at this level.
    pub divcurl: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantityError {
    pub label: String,
    pub l1: f64,
    pub order_l1: Option<f64>,
    pub linf: f64,
    pub order_linf: Option<f64>,
}

/// Output of one grid level of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub h: f64,
    pub errors: Vec<(String, ErrorNorms)>,
    pub divcurl: f64,
    /// Time steps taken (zero for steady studies).
    pub steps: usize,
}

/// Runs `runner` on each grid and attaches observed orders between
/// consecutive levels.
pub fn convergence_study<R, E>(grids: &[usize], mut runner: R) -> Result<Vec<ConvergenceRow>, E>
where
    R: FnMut(usize) -> Result<LevelResult, E>,
{
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(grids.len());
    for &n_h in grids {
        let level = runner(n_h)?;
        let quantities = level
            .errors
            .iter()
            .enumerate()
            .map(|(q, (label, e))| {
                let prev = rows.last().map(|r| (r.h, &r.quantities[q]));
                QuantityError {
                    label: label.clone(),
                    l1: e.l1,
                    order_l1: prev.and_then(|(h, p)| observed_order(p.l1, e.l1, h, level.h)),
                    linf: e.linf,
                    order_linf: prev.and_then(|(h, p)| observed_order(p.linf, e.linf, h, level.h)),
                }
            })
            .collect();
        rows.push(ConvergenceRow {
            n_h,
            h: level.h,
            quantities,
            divcurl: level.divcurl,
            steps: level.steps,
        });
    }
    Ok(rows)
}

/// Projects the trigonometric stream function and takes its discrete curl.
/// Returns `(Ψ_h, u_h)`.
pub fn trig_operator_fields(ops: &SpdgOperators) -> Result<(DgField, DgField), SpdgError> {
    let psi = ops.l2_project(Staggering::Primal, 3, |x| trig_field(x).0);
    let u = ops.curl(&psi)?;
    Ok((psi, u))
}

/// One level of the operator study on the trigonometric field: quadrature
/// errors of `Ψ₁`, nodal errors of `u₁ = (curl Ψ_h)₁`, and the div-curl
/// residual of `Ψ_h`.
pub fn operator_level(degree: usize, n_h: usize) -> Result<LevelResult, SpdgError> {
    let ops = SpdgOperators::new(CaseSpec::new(CaseKind::Trig).grid([n_h; 3])?, degree)?;
    let (psi, u) = trig_operator_fields(&ops)?;
    let e_psi = error_norms_quadrature(&ops, &psi, |x| trig_field(x).0)[0];
    let e_u = error_norms(&ops, &u, |x| trig_field(x).1)[0];
    Ok(LevelResult {
        h: ops.grid().h_max(),
        errors: vec![("u1".into(), e_u), ("psi1".into(), e_psi)],
        divcurl: ops.divcurl_residual(&psi)?.0,
        steps: 0,
    })
}

/// One level of the regularisation study: the well-prepared ABC vorticity
/// at `t = 0`, the stream solve with `δ = h^power`, and the error
/// `curl curl Ψ − ω` over all components.
pub fn delta_level(degree: usize, n_h: usize, power: u32) -> Result<LevelResult, SpdgError> {
    let case = CaseSpec::new(CaseKind::Abc);
    let ops = SpdgOperators::new(case.grid([n_h; 3])?, degree)?;
    let cfg = PhysicsConfig {
        delta_power: Some(power),
        ..Default::default()
    };
    let solver = Solver::init_well_prepared(ops, cfg, ImexScheme::Sp111, |x| case.velocity(x, 0.0, 0.0))?;
    let ops = solver.ops();
    let mut r = ops.double_curl(&solver.state.psi.field)?;
    r.axpy(-1.0, &solver.state.omega.field);
    let zero = |_: [f64; 3]| [0.0; 3];
    let e = error_norms(ops, &r, zero);
    let worst = e.iter().copied().fold(ErrorNorms { l1: 0.0, linf: 0.0 }, |a, b| ErrorNorms {
        l1: a.l1.max(b.l1),
        linf: a.linf.max(b.linf),
    });
    Ok(LevelResult {
        h: ops.grid().h_max(),
        errors: vec![("eps_delta".into(), worst)],
        divcurl: solver.involutions()?.max(),
        steps: 0,
    })
}

/// One level of a time-dependent study with a closed-form solution:
/// errors of `ω₁` and `u₁` at `t_end` under `metric`, the largest
/// involution residual over the run, and the step count.
pub fn solver_level(
    case: &CaseSpec,
    degree: usize,
    counts: [usize; 3],
    scheme: ImexScheme,
    cfg: &PhysicsConfig,
    metric: ErrorMetric,
) -> Result<LevelResult, SpdgError> {
    if !case.has_exact_evolution() {
        return Err(SpdgError::InvalidArgument(format!(
            "case '{}' has no closed-form solution to measure errors against",
            case.name
        )));
    }
    let ops = SpdgOperators::new(case.grid(counts)?, degree)?;
    let nu = cfg.nu;
    let mut solver = Solver::init_well_prepared(ops, cfg.clone(), scheme, |x| case.velocity(x, 0.0, nu))?;
    let mut divcurl = solver.involutions()?.max();
    let history = solver.run(&[], |_, _, _| Ok(())).map_err(|f| f.source)?;
    for d in &history {
        divcurl = divcurl.max(d.involutions.max());
    }
    let t = solver.state.t;
    let ops = solver.ops();
    let e_w = error_norms_with(metric, ops, &solver.state.omega.field, |x| case.vorticity(x, t, nu))[0];
    let e_u = error_norms_with(metric, ops, &solver.state.u, |x| case.velocity(x, t, nu))[0];
    Ok(LevelResult {
        h: ops.grid().h_max(),
        errors: vec![("omega1".into(), e_w), ("u1".into(), e_u)],
        divcurl,
        steps: history.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Central-difference Jacobian oracle.
    fn jacobian(f: &dyn Fn([f64; 3]) -> [f64; 3], x: [f64; 3]) -> [[f64; 3]; 3] {
        let h = 1e-5;
        let mut j = [[0.0; 3]; 3];
        for d in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let (fp, fm) = (f(xp), f(xm));
            for c in 0..3 {
                j[c][d] = (fp[c] - fm[c]) / (2.0 * h);
            }
        }
        j
    }

    fn curl_of(f: &dyn Fn([f64; 3]) -> [f64; 3], x: [f64; 3]) -> [f64; 3] {
        let j = jacobian(f, x);
        [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
    }

    fn div_of(f: &dyn Fn([f64; 3]) -> [f64; 3], x: [f64; 3]) -> f64 {
        let j = jacobian(f, x);
        j[0][0] + j[1][1] + j[2][2]
    }

    #[test]
    fn trig_field_examples() {
        let (psi, _) = trig_field([0.25, 0.0, 0.0]);
        assert!((psi[0] + 1.0).abs() < 1e-15);
        // All sines vanish at the origin.
        let (_, u) = trig_field([0.0, 0.0, 0.0]);
        assert_eq!(u[0].abs() + u[1].abs(), 0.0);
    }

    #[test]
    fn every_case_is_consistent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for kind in CaseKind::ALL {
            let c = CaseSpec::new(kind);
            for _ in 0..100 {
                let x: [f64; 3] = std::array::from_fn(|d| rng.gen_range(c.lower[d]..c.upper[d]));
                let t = if c.has_exact_evolution() { rng.gen_range(0.0..1.0) } else { 0.0 };
                let nu = 1e-2;
                let u = |p: [f64; 3]| c.velocity(p, t, nu);
                let w = curl_of(&u, x);
                let e = c.vorticity(x, t, nu);
                let scale = 1.0 + e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for k in 0..3 {
                    assert!((w[k] - e[k]).abs() < 1e-8 * scale, "{kind:?} vorticity");
                }
                assert!(div_of(&u, x).abs() < 1e-8 * scale, "{kind:?} divergence");
                if let Some(s) = c.stream(x, t, nu) {
                    let cs = curl_of(&|p| c.stream(p, t, nu).unwrap(), x);
                    let uv = u(x);
                    for k in 0..3 {
                        assert!((cs[k] - uv[k]).abs() < 1e-8 * scale, "{kind:?} stream");
                    }
                    assert!(s.iter().all(|v| v.is_finite()));
                }
            }
        }
    }

    #[test]
    fn abc_examples() {
        let x = [0.3, -1.2, 2.0];
        let (u0, w0) = abc_exact(x, 0.0, 5.0);
        let (u1, _) = abc_exact(x, 0.1, 1e-2);
        assert_eq!(u0, w0);
        for c in 0..3 {
            assert!((u1[c] - u0[c] * (-0.001f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn tgv_examples() {
        let (_, w) = tgv_exact([PI / 2.0, PI / 2.0, 0.3], 0.0, 0.0);
        assert!((w[2] - 2.0).abs() < 1e-15);
        let (u, _) = tgv_exact([0.4, 1.1, 0.2], 0.2, 1e-2);
        assert_eq!(u[2], 0.0);
        let (u0, _) = tgv_exact([0.4, 1.1, 0.2], 0.0, 1e-2);
        assert!((u[0] - u0[0] * (-0.004f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn shear_layer_examples() {
        let w = shear_layer_init([0.7, 2.0, 0.5]);
        assert_eq!((w[0], w[1]), (0.0, 0.0));
        let peak = shear_layer_init([PI / 2.0, PI / 2.0, 0.0]);
        assert!((peak[2] + 1.0 / SHEAR_WIDTH).abs() < 1e-12);
        assert!((1.0 / SHEAR_WIDTH - 15.0 / PI).abs() < 1e-12);
        let upper = shear_layer_init([PI / 2.0, 3.0 * PI / 2.0, 0.0]);
        assert!((upper[2] - 1.0 / SHEAR_WIDTH).abs() < 1e-12);
        assert_eq!(sech(400.0), 0.0);
        // Continuous across the branch switch.
        let a = shear_layer_velocity([0.0, PI, 0.0]);
        let b = shear_layer_velocity([0.0, PI + 1e-12, 0.0]);
        assert!((a[0] - b[0]).abs() < 1e-9);
    }

    #[test]
    fn case_names_parse() {
        for k in CaseKind::ALL {
            assert_eq!(k.to_string().parse::<CaseKind>().unwrap(), k);
        }
        assert!("nope".parse::<CaseKind>().is_err());
    }

    fn unit_ops(n: usize, cells: usize) -> SpdgOperators {
        SpdgOperators::new(StaggeredGrid::cube(0.0, 2.0, cells).unwrap(), n).unwrap()
    }

    #[test]
    fn error_norm_examples() {
        let ops = unit_ops(1, 3);
        let f = ops.interpolate(Staggering::Primal, 1, |x| [x[0] * x[1], 0.0, 0.0]);
        let e = error_norms(&ops, &f, |x| [x[0] * x[1], 0.0, 0.0]);
        assert_eq!(e[0], ErrorNorms { l1: 0.0, linf: 0.0 });
        let e = error_norms(&ops, &f, |x| [x[0] * x[1] - 0.25, 0.0, 0.0]);
        assert!((e[0].linf - 0.25).abs() < 1e-12);
        assert!((e[0].l1 - 0.25 * 8.0).abs() < 1e-12);
        let mut g = f.clone();
        g.set(5, 3, 0, g.get(5, 3, 0) + 0.7);
        let e = error_norms(&ops, &g, |x| [x[0] * x[1], 0.0, 0.0]);
        assert!((e[0].linf - 0.7).abs() < 1e-12);
        let q = error_norms_quadrature(&ops, &f, |x| [x[0] * x[1] - 0.25, 0.0, 0.0]);
        assert!((q[0].l1 - 2.0).abs() < 1e-12 && (q[0].linf - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cell_mean_errors_weight_each_node_by_its_quadrature_weight() {
        let ops = unit_ops(1, 3);
        let exact = |x: [f64; 3]| [x[0] * x[1], 0.0, 0.0];
        let f = ops.interpolate(Staggering::Primal, 1, exact);
        let e = error_norms_cell_mean(&ops, &f, |x| [x[0] * x[1] - 0.25, 0.0, 0.0]);
        assert!((e[0].l1 - 2.0).abs() < 1e-12 && (e[0].linf - 0.25).abs() < 1e-12);
        let mut g = f.clone();
        g.set(5, 3, 0, g.get(5, 3, 0) + 0.7);
        let e = error_norms_cell_mean(&ops, &g, exact);
        let w = ops.basis().node_weight(3);
        assert!((e[0].linf - 0.7 * w).abs() < 1e-12);
        assert!((e[0].l1 - 0.7 * w * ops.grid().cell_volume()).abs() < 1e-12);
        let m = error_norms_with(ErrorMetric::CellMean, &ops, &g, exact);
        assert_eq!(m, e);
    }

    #[test]
    fn observed_order_rules() {
        assert!((observed_order(4.0, 1.0, 2.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(observed_order(1e-15, 1e-16, 2.0, 1.0), None);
        assert_eq!(observed_order(0.0, 1.0, 2.0, 1.0), None);
    }

    #[test]
    fn exact_input_reports_no_orders() {
        let rows = convergence_study(&[2, 4], |n| {
            let ops = unit_ops(2, n);
            let f = ops.interpolate(Staggering::Primal, 1, |x| [x[0] * x[0], 0.0, 0.0]);
            let e = error_norms(&ops, &f, |x| [x[0] * x[0], 0.0, 0.0])[0];
            Ok::<_, SpdgError>(LevelResult {
                h: ops.grid().h_max(),
                errors: vec![("f".into(), e)],
                divcurl: 0.0,
                steps: 0,
            })
        })
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].quantities[0].order_l1, None);
        assert_eq!(rows[0].quantities[0].order_linf, None);
    }
}
