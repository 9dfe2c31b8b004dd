//! Local corner operators: divergence `D^{m,β}`, gradient `G^{m,β}` and
//! projection matrices, built by quadrature of the sub-cell weak form.
//!
//! For a target cell and its corner neighbour at offset `m`, the neighbour's
//! basis is evaluated in the target frame as `φ_l(ξ − m/2)` and integrated over
//! the sub-cube `ξ_d ∈ [(1+m_d)/4, (3+m_d)/4]`. The divergence weak form keeps
//! only faces on the outer boundary of the target cell.
//!
//! Every 3D operator factorises into 1D pieces, so two realisations exist:
//! [`KronKernels`] (sum-factorised, used by all global operators) and
//! [`OperatorSet`] (dense `(N+1)³ × (N+1)³` matrices assembled by full 3D
//! quadrature, used for cross-checks and debug dumps).

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::basis::{NodalBasis, TensorIndex};
use crate::grid::{CornerOffset, StaggeredGrid};
use crate::SpdgError;

/// `ε_{γμτ}` for one-based indices.
pub fn levi_civita(g: usize, m: usize, t: usize) -> Result<i8, SpdgError> {
    if !(1..=3).contains(&g) || !(1..=3).contains(&m) || !(1..=3).contains(&t) {
        return Err(SpdgError::InvalidArgument(format!(
            "Levi-Civita indices must lie in 1..=3, got ({g},{m},{t})"
        )));
    }
    let (g, m, t) = (g as i32, m as i32, t as i32);
    Ok(((g - m) * (m - t) * (t - g) / 2) as i8)
}

/// Index into per-sign tables: 0 for −1, 1 for +1.
#[inline]
fn sgn_idx(s: i8) -> usize {
    usize::from(s > 0)
}

/// Raw 1D sub-cell integrals on the unit interval.
///
/// `overlap[s][(k,l)] = ∫_{sub s} φ_k(ξ) φ_l(ξ − s/2) dξ` and
/// `deriv[s][(k,l)] = −∫_{sub s} φ_k'(ξ) φ_l(ξ − s/2) dξ + s φ_k(ξ_f) φ_l(½)`
/// with `ξ_f = (1+s)/2` the outer face.
#[derive(Debug, Clone)]
pub struct OneDimFactors {
    pub mass: DMatrix<f64>,
    pub mass_inv: DMatrix<f64>,
    pub overlap: [DMatrix<f64>; 2],
    pub deriv: [DMatrix<f64>; 2],
}

/// Quadrature of the sub-cell integrals for one side `s`.
fn sub_cell_integrals(basis: &NodalBasis, s: i8) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = basis.n1d();
    let mut overlap = DMatrix::zeros(n, n);
    let mut deriv = DMatrix::zeros(n, n);
    let sf = f64::from(s);
    let lo = (1.0 + sf) / 4.0;
    for (q, &chi) in basis.quad_nodes().iter().enumerate() {
        let w = 0.5 * basis.quad_weights()[q];
        let xi = lo + 0.5 * chi;
        let (pk, dk) = basis.eval(xi);
        let pl = basis.values(xi - 0.5 * sf);
        for k in 0..n {
            for l in 0..n {
                overlap[(k, l)] += w * pk[k] * pl[l];
                deriv[(k, l)] -= w * dk[k] * pl[l];
            }
        }
    }
    let pf = basis.values((1.0 + sf) / 2.0);
    let ph = basis.values(0.5);
    for k in 0..n {
        for l in 0..n {
            deriv[(k, l)] += sf * pf[k] * ph[l];
        }
    }
    (overlap, deriv)
}

impl OneDimFactors {
    /// Only the lower side is integrated. The upper side follows from
    /// `E^+ = (E^-)ᵀ` and `B^+ = −(B^-)ᵀ`, which hold exactly by a change of
    /// variables; building it that way makes the divergence and gradient
    /// factors bitwise equal, so curl images cancel without round-off.
    pub fn new(basis: &NodalBasis) -> Self {
        let mass = basis.mass_matrix_1d();
        let mass_inv = mass
            .clone()
            .cholesky()
            .expect("mass matrix is SPD")
            .inverse();
        let (ov, dv) = sub_cell_integrals(basis, -1);
        let overlap = [ov.clone(), ov.transpose()];
        let deriv = [dv.clone(), -dv.transpose()];
        Self {
            mass,
            mass_inv,
            overlap,
            deriv,
        }
    }
}

/// Row-major copy of a small square matrix.
fn flat(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            v.push(m[(r, c)]);
        }
    }
    v
}

/// Which family of local operator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Mass-inverted divergence factor `M⁻¹ D^{m,β} / |C|`.
    Divergence,
    /// Mass-inverted gradient factor `M⁻¹ G^{m,β} / |C|`, taken from the
    /// transposed divergence factors.
    Gradient,
}

/// Sum-factorised application of the mass-inverted local operators.
///
/// The divergence factor for direction `β` is
/// `(1/Δx_β) · ⊗_d F_d` with `F_β = M₁⁻¹ B^{m_β}` and `F_d = M₁⁻¹ E^{m_d}`
/// otherwise; the gradient factor uses `M₁⁻¹ (E^{−s})ᵀ` and `−M₁⁻¹ (B^{−s})ᵀ`.
#[derive(Debug, Clone)]
pub struct KronKernels {
    n: usize,
    inv_spacing: [f64; 3],
    div_overlap: [Vec<f64>; 2],
    div_deriv: [Vec<f64>; 2],
    grad_overlap: [Vec<f64>; 2],
    grad_deriv: [Vec<f64>; 2],
}

/// Maximum supported `(N+1)³`.
pub const MAX_NDOF: usize = 216;
/// Maximum supported degree.
pub const MAX_DEGREE: usize = 5;

impl KronKernels {
    pub fn new(basis: &NodalBasis, grid: &StaggeredGrid) -> Self {
        assert!(basis.degree() <= MAX_DEGREE, "degree above {MAX_DEGREE}");
        let f = OneDimFactors::new(basis);
        let mi = &f.mass_inv;
        let h = grid.spacing();
        let div_overlap = [flat(&(mi * &f.overlap[0])), flat(&(mi * &f.overlap[1]))];
        let div_deriv = [flat(&(mi * &f.deriv[0])), flat(&(mi * &f.deriv[1]))];
        let grad_overlap = [
            flat(&(mi * f.overlap[1].transpose())),
            flat(&(mi * f.overlap[0].transpose())),
        ];
        let grad_deriv = [
            flat(&(-(mi * f.deriv[1].transpose()))),
            flat(&(-(mi * f.deriv[0].transpose()))),
        ];
        Self {
            n: basis.n1d(),
            inv_spacing: [1.0 / h[0], 1.0 / h[1], 1.0 / h[2]],
            div_overlap,
            div_deriv,
            grad_overlap,
            grad_deriv,
        }
    }

    pub fn n1d(&self) -> usize {
        self.n
    }

    fn factors(&self, kind: KernelKind, m: CornerOffset, beta: usize) -> [&[f64]; 3] {
        let (ov, dv) = match kind {
            KernelKind::Divergence => (&self.div_overlap, &self.div_deriv),
            KernelKind::Gradient => (&self.grad_overlap, &self.grad_deriv),
        };
        std::array::from_fn(|d| {
            let s = sgn_idx(m.m[d]);
            if d == beta {
                dv[s].as_slice()
            } else {
                ov[s].as_slice()
            }
        })
    }

    /// Overlap-only factors: the projection from the neighbour at `m`.
    fn projection_factors(&self, m: CornerOffset) -> [&[f64]; 3] {
        std::array::from_fn(|d| self.div_overlap[sgn_idx(m.m[d])].as_slice())
    }

    /// `out[k] += scale · (K x)[k]` with `K` the derivative factor in
    /// zero-based direction `beta`; `x` is read as `x[l * stride + offset]`.
    #[allow(clippy::too_many_arguments)]
    pub fn apply(
        &self,
        kind: KernelKind,
        m: CornerOffset,
        beta: usize,
        scale: f64,
        x: &[f64],
        stride: usize,
        offset: usize,
        out: &mut [f64],
    ) {
        let f = self.factors(kind, m, beta);
        self.apply_factors(f, scale * self.inv_spacing[beta], x, stride, offset, out);
    }

    /// `out += scale · P^m x` where `P^m` projects from the neighbour at `m`.
    pub fn apply_projection(
        &self,
        m: CornerOffset,
        scale: f64,
        x: &[f64],
        stride: usize,
        offset: usize,
        out: &mut [f64],
    ) {
        let f = self.projection_factors(m);
        self.apply_factors(f, scale, x, stride, offset, out);
    }

    fn apply_factors(
        &self,
        f: [&[f64]; 3],
        scale: f64,
        x: &[f64],
        stride: usize,
        offset: usize,
        out: &mut [f64],
    ) {
        let n = self.n;
        let nd = n * n * n;
        let mut t1 = [0.0f64; MAX_NDOF];
        let mut t2 = [0.0f64; MAX_NDOF];
        // Contract l1.
        for l3 in 0..n {
            for l2 in 0..n {
                let base = n * (l2 + n * l3);
                for k1 in 0..n {
                    let row = &f[0][k1 * n..(k1 + 1) * n];
                    let mut s = 0.0;
                    for l1 in 0..n {
                        s += row[l1] * x[(base + l1) * stride + offset];
                    }
                    t1[base + k1] = s;
                }
            }
        }
        // Contract l2.
        for l3 in 0..n {
            for k2 in 0..n {
                let row = &f[1][k2 * n..(k2 + 1) * n];
                for k1 in 0..n {
                    let mut s = 0.0;
                    for l2 in 0..n {
                        s += row[l2] * t1[k1 + n * (l2 + n * l3)];
                    }
                    t2[k1 + n * (k2 + n * l3)] = s;
                }
            }
        }
        // Contract l3 and accumulate.
        let plane = n * n;
        for k3 in 0..n {
            let row = &f[2][k3 * n..(k3 + 1) * n];
            for p in 0..plane {
                let mut s = 0.0;
                for l3 in 0..n {
                    s += row[l3] * t2[p + plane * l3];
                }
                out[p + plane * k3] += scale * s;
            }
        }
        debug_assert!(out.len() >= nd);
    }
}

/// Dense local matrices with physical scaling, assembled by 3D quadrature.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub degree: usize,
    pub cell_volume: f64,
    /// Reference-cube mass matrix.
    pub mass: DMatrix<f64>,
    pub mass_inv: DMatrix<f64>,
    /// `divergence[m.id()][β]`, including the `|C|/Δx_β` factor.
    pub divergence: Vec<[DMatrix<f64>; 3]>,
    /// `gradient[m.id()][β] = −divergence[(−m).id()][β]ᵀ`.
    pub gradient: Vec<[DMatrix<f64>; 3]>,
    /// `projection[m.id()]`: mass-inverted projection from the neighbour at
    /// offset `m` onto the target cell.
    pub projection: Vec<DMatrix<f64>>,
}

/// Tensor quadrature on the sub-cube of corner `m`, in target coordinates.
fn subcube_points(basis: &NodalBasis, m: CornerOffset) -> Vec<([f64; 3], f64)> {
    let q = basis.quad_nodes();
    let w = basis.quad_weights();
    let nq = q.len();
    let mut pts = Vec::with_capacity(nq * nq * nq);
    for a in 0..nq {
        for b in 0..nq {
            for c in 0..nq {
                let chi = [q[c], q[b], q[a]];
                let xi = std::array::from_fn(|d| (1.0 + f64::from(m.m[d])) / 4.0 + 0.5 * chi[d]);
                pts.push((xi, w[a] * w[b] * w[c] / 8.0));
            }
        }
    }
    pts
}

/// Values and gradients of all 3D basis functions at `xi`.
fn eval3(basis: &NodalBasis, xi: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let n = basis.n1d();
    let e: Vec<(Vec<f64>, Vec<f64>)> = xi.iter().map(|&x| basis.eval(x)).collect();
    let nd = basis.ndof();
    let mut v = vec![0.0; nd];
    let mut g = vec![[0.0; 3]; nd];
    for l in 0..nd {
        let t = TensorIndex::from_flat(l, n);
        let (p1, d1) = (e[0].0[t.l1], e[0].1[t.l1]);
        let (p2, d2) = (e[1].0[t.l2], e[1].1[t.l2]);
        let (p3, d3) = (e[2].0[t.l3], e[2].1[t.l3]);
        v[l] = p1 * p2 * p3;
        g[l] = [d1 * p2 * p3, p1 * d2 * p3, p1 * p2 * d3];
    }
    (v, g)
}

fn shifted(xi: [f64; 3], m: CornerOffset) -> [f64; 3] {
    std::array::from_fn(|d| xi[d] - 0.5 * f64::from(m.m[d]))
}

/// Quadrature points on the outer face (normal direction `beta`) of the
/// sub-cube of corner `m`, with weights scaled to the reference face area.
fn outer_face_points(basis: &NodalBasis, m: CornerOffset, beta: usize) -> Vec<([f64; 3], f64)> {
    let q = basis.quad_nodes();
    let w = basis.quad_weights();
    let (d1, d2) = ((beta + 1) % 3, (beta + 2) % 3);
    let mut pts = Vec::new();
    for a in 0..q.len() {
        for b in 0..q.len() {
            let mut xi = [0.0; 3];
            xi[beta] = (1.0 + f64::from(m.m[beta])) / 2.0;
            xi[d1] = (1.0 + f64::from(m.m[d1])) / 4.0 + 0.5 * q[a];
            xi[d2] = (1.0 + f64::from(m.m[d2])) / 4.0 + 0.5 * q[b];
            pts.push((xi, w[a] * w[b] / 4.0));
        }
    }
    pts
}

/// Inner face (through the target centre) of the sub-cube of corner `m`.
fn inner_face_points(basis: &NodalBasis, m: CornerOffset, beta: usize) -> Vec<([f64; 3], f64)> {
    outer_face_points(basis, m, beta)
        .into_iter()
        .map(|(mut xi, w)| {
            xi[beta] = 0.5;
            (xi, w)
        })
        .collect()
}

impl OperatorSet {
    /// Assembles the divergence matrices from the weak form and derives the
    /// gradient and projection matrices.
    pub fn build(basis: &NodalBasis, grid: &StaggeredGrid) -> Self {
        let nd = basis.ndof();
        let vol = grid.cell_volume();
        let h = grid.spacing();
        let mass = basis.mass_matrix();
        let mass_inv = mass.clone().cholesky().expect("mass matrix is SPD").inverse();
        let mut divergence = Vec::with_capacity(8);
        let mut projection = Vec::with_capacity(8);
        for m in CornerOffset::ALL {
            let mut dm: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(nd, nd));
            let mut overlap = DMatrix::zeros(nd, nd);
            for (xi, w) in subcube_points(basis, m) {
                let (pk, gk) = eval3(basis, xi);
                let (pl, _) = eval3(basis, shifted(xi, m));
                for k in 0..nd {
                    for l in 0..nd {
                        let wl = w * pl[l];
                        overlap[(k, l)] += wl * pk[k];
                        for (beta, d) in dm.iter_mut().enumerate() {
                            d[(k, l)] -= wl * gk[k][beta];
                        }
                    }
                }
            }
            for (beta, d) in dm.iter_mut().enumerate() {
                let sign = f64::from(m.m[beta]);
                for (xi, w) in outer_face_points(basis, m, beta) {
                    let (pk, _) = eval3(basis, xi);
                    let (pl, _) = eval3(basis, shifted(xi, m));
                    for k in 0..nd {
                        for l in 0..nd {
                            d[(k, l)] += sign * w * pk[k] * pl[l];
                        }
                    }
                }
                *d *= vol / h[beta];
            }
            divergence.push(dm);
            projection.push(&mass_inv * overlap);
        }
        let gradient = Self::gradient_from_divergence(&divergence);
        Self {
            degree: basis.degree(),
            cell_volume: vol,
            mass,
            mass_inv,
            divergence,
            gradient,
            projection,
        }
    }

    /// `G^{m,β} = −(D^{−m,β})ᵀ`.
    pub fn gradient_from_divergence(div: &[[DMatrix<f64>; 3]]) -> Vec<[DMatrix<f64>; 3]> {
        CornerOffset::ALL
            .iter()
            .map(|m| std::array::from_fn(|b| -div[m.neg().id()][b].transpose()))
            .collect()
    }

    /// Independent quadrature realisation of the gradient matrices: the
    /// strong form on the sub-cube plus the jump of the neighbour data across
    /// the interior face of the target cell.
    pub fn gradient_by_quadrature(basis: &NodalBasis, grid: &StaggeredGrid) -> Vec<[DMatrix<f64>; 3]> {
        let nd = basis.ndof();
        let vol = grid.cell_volume();
        let h = grid.spacing();
        CornerOffset::ALL
            .iter()
            .map(|&m| {
                let mut gm: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(nd, nd));
                for (xi, w) in subcube_points(basis, m) {
                    let (pk, _) = eval3(basis, xi);
                    let (_, gl) = eval3(basis, shifted(xi, m));
                    for k in 0..nd {
                        for l in 0..nd {
                            for (beta, g) in gm.iter_mut().enumerate() {
                                g[(k, l)] += w * pk[k] * gl[l][beta];
                            }
                        }
                    }
                }
                for (beta, g) in gm.iter_mut().enumerate() {
                    let sign = f64::from(m.m[beta]);
                    for (xi, w) in inner_face_points(basis, m, beta) {
                        let (pk, _) = eval3(basis, xi);
                        let (pl, _) = eval3(basis, shifted(xi, m));
                        for k in 0..nd {
                            for l in 0..nd {
                                g[(k, l)] += sign * w * pk[k] * pl[l];
                            }
                        }
                    }
                    *g *= vol / h[beta];
                }
                gm
            })
            .collect()
    }

    /// Plain-text dump of every matrix, one entry per line:
    /// `<kind> <corner id> <beta> <row> <col> <value>`.
    pub fn dump_text(&self) -> String {
        let mut s = String::new();
        let nd = self.mass.nrows();
        let mut emit = |kind: &str, id: usize, beta: usize, m: &DMatrix<f64>| {
            for r in 0..nd {
                for c in 0..nd {
                    let _ = writeln!(s, "{kind} {id} {beta} {r} {c} {:.17e}", m[(r, c)]);
                }
            }
        };
        emit("mass", 0, 0, &self.mass);
        for id in 0..8 {
            for beta in 0..3 {
                emit("div", id, beta + 1, &self.divergence[id][beta]);
                emit("grad", id, beta + 1, &self.gradient[id][beta]);
            }
            emit("proj", id, 0, &self.projection[id]);
        }
        s
    }
}
