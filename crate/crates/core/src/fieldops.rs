//! Grid-wide application of the corner operators to DG fields.
//!
//! Every operator maps a field on one staggering to the other and computes
//! each target cell independently from its eight corner neighbours, so the
//! output is bitwise independent of the thread count.
//!
//! Two curls exist. [`SpdgOperators::curl`] applies the divergence factors
//! row-wise to the antisymmetric tensor of the input; [`SpdgOperators::curl_via_gradient`]
//! applies the transposed (gradient) factors. They agree bitwise, and the
//! structure-preserving divergence of a curl `C q` is
//! `D̃(C q) − D̃(C_G q)`, which needs the potential `q` (see [`Solenoidal`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::NodalBasis;
use crate::field::{DgField, Staggering};
use crate::grid::{CellRef, CornerOffset, StaggeredGrid};
use crate::opkernels::{levi_civita, KernelKind, KronKernels, MAX_DEGREE, MAX_NDOF};
use crate::SpdgError;

/// `(τ, γ, μ, ε_{γμτ})` for the six non-zero permutations, zero-based.
fn curl_terms() -> [(usize, usize, usize, f64); 6] {
    let mut out = [(0, 0, 0, 0.0); 6];
    let mut i = 0;
    for tau in 0..3 {
        for gamma in 0..3 {
            for mu in 0..3 {
                let e = levi_civita(gamma + 1, mu + 1, tau + 1).expect("in range");
                if e != 0 {
                    out[i] = (tau, gamma, mu, f64::from(e));
                    i += 1;
                }
            }
        }
    }
    out
}

/// A divergence-free field together with the field it is the curl of.
#[derive(Debug, Clone, PartialEq)]
pub struct Solenoidal {
    pub field: DgField,
    pub potential: DgField,
}

impl Solenoidal {
    /// `field = curl(potential)`.
    pub fn from_potential(ops: &SpdgOperators, potential: DgField) -> Result<Self, SpdgError> {
        let field = ops.curl(&potential)?;
        Ok(Self { field, potential })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            field: self.field.zeros_like(),
            potential: self.potential.zeros_like(),
        }
    }

    pub fn axpy(&mut self, a: f64, x: &Solenoidal) {
        self.field.axpy(a, &x.field);
        self.potential.axpy(a, &x.potential);
    }
}

/// Operators bound to one grid and degree.
#[derive(Debug, Clone)]
pub struct SpdgOperators {
    grid: StaggeredGrid,
    basis: NodalBasis,
    kernels: KronKernels,
    /// Neighbour ids for primal targets (entries are dual cells).
    nbr_primal: Vec<[usize; 8]>,
    /// Neighbour ids for dual targets (entries are primal cells).
    nbr_dual: Vec<[usize; 8]>,
    curl_terms: [(usize, usize, usize, f64); 6],
}

impl SpdgOperators {
    pub fn new(grid: StaggeredGrid, degree: usize) -> Result<Self, SpdgError> {
        if degree > MAX_DEGREE {
            return Err(SpdgError::InvalidArgument(format!(
                "degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        let basis = NodalBasis::new(degree);
        let kernels = KronKernels::new(&basis, &grid);
        let nbr_primal = grid.neighbor_table(Staggering::Primal);
        let nbr_dual = grid.neighbor_table(Staggering::Dual);
        Ok(Self {
            grid,
            basis,
            kernels,
            nbr_primal,
            nbr_dual,
            curl_terms: curl_terms(),
        })
    }

    pub fn grid(&self) -> &StaggeredGrid {
        &self.grid
    }

    pub fn basis(&self) -> &NodalBasis {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn ndof(&self) -> usize {
        self.basis.ndof()
    }

    pub fn zeros(&self, staggering: Staggering, ncomp: usize) -> DgField {
        DgField::zeros(staggering, ncomp, self.grid.n_cells(), self.ndof())
    }

    fn check(&self, f: &DgField, ncomp: Option<usize>, what: &str) -> Result<(), SpdgError> {
        if f.ncells() != self.grid.n_cells() || f.ndof() != self.ndof() {
            return Err(SpdgError::InvalidArgument(format!(
                "{what}: field shape does not match the operator grid/degree"
            )));
        }
        if let Some(c) = ncomp {
            if f.ncomp() != c {
                return Err(SpdgError::InvalidArgument(format!(
                    "{what}: expected {c} components, got {}",
                    f.ncomp()
                )));
            }
        }
        Ok(())
    }

    /// Runs `body(neighbour ids, out components)` for every target cell of the
    /// staggering opposite to `input`. `out` holds `ncomp_out` contiguous
    /// DoF blocks that are then interleaved into the output layout.
    fn per_cell<F>(&self, input: &DgField, ncomp_out: usize, body: F) -> DgField
    where
        F: Fn(&[usize; 8], &mut [[f64; MAX_NDOF]]) + Sync,
    {
        let target = input.staggering().opposite();
        let nbrs = match target {
            Staggering::Primal => &self.nbr_primal,
            Staggering::Dual => &self.nbr_dual,
        };
        let nd = self.ndof();
        let mut out = self.zeros(target, ncomp_out);
        out.data_mut()
            .par_chunks_mut(nd * ncomp_out)
            .zip(nbrs.par_iter())
            .for_each(|(chunk, nb)| {
                let mut buf = [[0.0f64; MAX_NDOF]; 3];
                body(nb, &mut buf[..ncomp_out]);
                for l in 0..nd {
                    for c in 0..ncomp_out {
                        chunk[l * ncomp_out + c] = buf[c][l];
                    }
                }
            });
        out
    }

    /// Non-corrected divergence `D̃ v`.
    pub fn divergence_tilde(&self, v: &DgField) -> Result<DgField, SpdgError> {
        self.check(v, Some(3), "divergence")?;
        let k = &self.kernels;
        Ok(self.per_cell(v, 1, |nb, out| {
            for m in CornerOffset::ALL {
                let x = v.cell(nb[m.id()]);
                for beta in 0..3 {
                    k.apply(KernelKind::Divergence, m, beta, 1.0, x, 3, beta, &mut out[0]);
                }
            }
        }))
    }

    pub fn gradient(&self, f: &DgField) -> Result<DgField, SpdgError> {
        self.check(f, Some(1), "gradient")?;
        let k = &self.kernels;
        Ok(self.per_cell(f, 3, |nb, out| {
            for m in CornerOffset::ALL {
                let x = f.cell(nb[m.id()]);
                for (beta, o) in out.iter_mut().enumerate() {
                    k.apply(KernelKind::Gradient, m, beta, 1.0, x, 1, 0, o);
                }
            }
        }))
    }

    fn curl_with(&self, v: &DgField, kind: KernelKind) -> Result<DgField, SpdgError> {
        self.check(v, Some(3), "curl")?;
        let k = &self.kernels;
        let terms = &self.curl_terms;
        Ok(self.per_cell(v, 3, |nb, out| {
            for m in CornerOffset::ALL {
                let x = v.cell(nb[m.id()]);
                for &(tau, gamma, mu, eps) in terms {
                    k.apply(kind, m, gamma, eps, x, 3, mu, &mut out[tau]);
                }
            }
        }))
    }

    /// Curl through the divergence factors (tensor route).
    pub fn curl(&self, v: &DgField) -> Result<DgField, SpdgError> {
        self.curl_with(v, KernelKind::Divergence)
    }

    /// Curl through the gradient factors `G = −(D^{−m})ᵀ`. The same operator
    /// as [`Self::curl`]; the one-dimensional factors are built so that both
    /// routes agree bitwise, which is what makes the corrected divergence of
    /// a curl exactly zero.
    pub fn curl_via_gradient(&self, v: &DgField) -> Result<DgField, SpdgError> {
        self.curl_with(v, KernelKind::Gradient)
    }

    pub fn double_curl(&self, v: &DgField) -> Result<DgField, SpdgError> {
        self.curl(&self.curl(v)?)
    }

    /// Structure-preserving divergence of `v`, given the potential `q` whose
    /// curl `v` is: `D̃ v − D̃(C_G q)`. Round-off for `v = curl(q)`.
    pub fn divergence_sp(&self, v: &DgField, potential: &DgField) -> Result<DgField, SpdgError> {
        self.check(potential, Some(3), "divergence_sp potential")?;
        if potential.staggering() != v.staggering().opposite() {
            return Err(SpdgError::InvalidArgument(
                "divergence_sp: potential must live on the opposite staggering".into(),
            ));
        }
        let mut d = self.divergence_tilde(v)?;
        let corr = self.divergence_tilde(&self.curl_via_gradient(potential)?)?;
        d.axpy(-1.0, &corr);
        Ok(d)
    }

    pub fn divergence_sp_of(&self, s: &Solenoidal) -> Result<DgField, SpdgError> {
        self.divergence_sp(&s.field, &s.potential)
    }

    /// `(max |div_sp(curl v)|, max |div_tilde(curl v)|)` over all DoFs.
    pub fn divcurl_residual(&self, v: &DgField) -> Result<(f64, f64), SpdgError> {
        let c = self.curl(v)?;
        let tilde = self.divergence_tilde(&c)?;
        let corr = self.divergence_tilde(&self.curl_via_gradient(v)?)?;
        let mut sp = tilde.clone();
        sp.axpy(-1.0, &corr);
        Ok((sp.linf(), tilde.linf()))
    }

    /// Mass-weighted L2 projection onto the opposite staggering.
    pub fn project(&self, f: &DgField) -> Result<DgField, SpdgError> {
        self.check(f, None, "project")?;
        let k = &self.kernels;
        let nc = f.ncomp();
        if nc > 3 {
            return Err(SpdgError::InvalidArgument("project: at most 3 components".into()));
        }
        Ok(self.per_cell(f, nc, |nb, out| {
            for m in CornerOffset::ALL {
                let x = f.cell(nb[m.id()]);
                for (c, o) in out.iter_mut().enumerate() {
                    k.apply_projection(m, 1.0, x, nc, c, o);
                }
            }
        }))
    }

    /// Mass-weighted inner product `Σ_cells |C| aᵀ M b` (the mass matrix is
    /// diagonal with the Gauss weights).
    pub fn inner(&self, a: &DgField, b: &DgField) -> f64 {
        debug_assert!(a.same_shape(b));
        let nd = self.ndof();
        let nc = a.ncomp();
        let w: Vec<f64> = (0..nd).map(|l| self.basis.node_weight(l)).collect();
        let mut s = 0.0;
        for cell in 0..a.ncells() {
            let (ca, cb) = (a.cell(cell), b.cell(cell));
            for l in 0..nd {
                for c in 0..nc {
                    s += w[l] * ca[l * nc + c] * cb[l * nc + c];
                }
            }
        }
        s * self.grid.cell_volume()
    }

    fn cell_ref(&self, staggering: Staggering, id: usize) -> CellRef {
        let i = self.grid.cell_index(id);
        CellRef {
            staggering,
            index: [i[0] as i64, i[1] as i64, i[2] as i64],
        }
    }

    /// Physical location of DoF `l` of cell `id`.
    pub fn node_location(&self, staggering: Staggering, id: usize, l: usize) -> [f64; 3] {
        self.grid
            .node_location(self.cell_ref(staggering, id), &self.basis, l)
    }

    /// Samples `f` at the nodes.
    pub fn interpolate<F>(&self, staggering: Staggering, ncomp: usize, f: F) -> DgField
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync,
    {
        let nd = self.ndof();
        let mut out = self.zeros(staggering, ncomp);
        out.data_mut()
            .par_chunks_mut(nd * ncomp)
            .enumerate()
            .for_each(|(id, chunk)| {
                for l in 0..nd {
                    let v = f(self.node_location(staggering, id, l));
                    chunk[l * ncomp..(l + 1) * ncomp].copy_from_slice(&v[..ncomp]);
                }
            });
        out
    }

    /// L2 projection of `f` using the `N+2`-point tensor rule.
    pub fn l2_project<F>(&self, staggering: Staggering, ncomp: usize, f: F) -> DgField
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync,
    {
        let b = &self.basis;
        let nd = self.ndof();
        let n = b.n1d();
        let qx = b.quad_nodes();
        let qw = b.quad_weights();
        let nq = qx.len();
        let phi: Vec<Vec<f64>> = qx.iter().map(|&x| b.values(x)).collect();
        let mut out = self.zeros(staggering, ncomp);
        out.data_mut()
            .par_chunks_mut(nd * ncomp)
            .enumerate()
            .for_each(|(id, chunk)| {
                let cell = self.cell_ref(staggering, id);
                for q3 in 0..nq {
                    for q2 in 0..nq {
                        for q1 in 0..nq {
                            let w = qw[q1] * qw[q2] * qw[q3];
                            let v = f(self.grid.physical(cell, [qx[q1], qx[q2], qx[q3]]));
                            for l3 in 0..n {
                                for l2 in 0..n {
                                    let p23 = phi[q2][l2] * phi[q3][l3] * w;
                                    for l1 in 0..n {
                                        let p = p23 * phi[q1][l1];
                                        let l = l1 + n * (l2 + n * l3);
                                        for c in 0..ncomp {
                                            chunk[l * ncomp + c] += p * v[c];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                for l in 0..nd {
                    let wl = b.node_weight(l);
                    for c in 0..ncomp {
                        chunk[l * ncomp + c] /= wl;
                    }
                }
            });
        out
    }

    /// Uniform `[0, 1)` values from a seeded ChaCha stream, in storage order.
    pub fn random_field(&self, staggering: Staggering, ncomp: usize, seed: u64) -> DgField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = self.zeros(staggering, ncomp);
        f.data_mut().iter_mut().for_each(|v| *v = rng.gen::<f64>());
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops(n: usize, cells: usize) -> SpdgOperators {
        let g = StaggeredGrid::new([0.0; 3], [1.0, 1.5, 0.75], [cells; 3]).unwrap();
        SpdgOperators::new(g, n).unwrap()
    }

    fn constant(o: &SpdgOperators, s: Staggering, nc: usize, c: f64) -> DgField {
        let mut f = o.zeros(s, nc);
        f.data_mut().iter_mut().for_each(|v| *v = c);
        f
    }

    #[test]
    fn curl_terms_cover_permutations() {
        let t = curl_terms();
        let plus: Vec<_> = t.iter().filter(|x| x.3 > 0.0).map(|x| (x.1, x.2, x.0)).collect();
        assert_eq!(plus, vec![(1, 2, 0), (2, 0, 1), (0, 1, 2)]);
    }

    #[test]
    fn constants_are_annihilated() {
        for n in 0..=3 {
            let o = ops(n, 3);
            let v = constant(&o, Staggering::Dual, 3, 2.5);
            assert!(o.divergence_tilde(&v).unwrap().linf() < 1e-12);
            assert!(o.curl(&v).unwrap().linf() < 1e-12);
            assert!(o.curl_via_gradient(&v).unwrap().linf() < 1e-12);
            let f = constant(&o, Staggering::Primal, 1, -1.5);
            assert!(o.gradient(&f).unwrap().linf() < 1e-12);
            let p = o.project(&f).unwrap();
            assert!(p.data().iter().all(|x| (x + 1.5).abs() < 1e-13));
            assert_eq!(p.staggering(), Staggering::Dual);
        }
    }

    #[test]
    fn rejects_wrong_component_counts() {
        let o = ops(1, 2);
        let s = o.zeros(Staggering::Primal, 1);
        assert!(o.divergence_tilde(&s).is_err());
        assert!(o.curl(&s).is_err());
        let v = o.zeros(Staggering::Primal, 3);
        assert!(o.gradient(&v).is_err());
        assert!(o.divergence_sp(&v, &v).is_err());
        let other = ops(2, 2).zeros(Staggering::Dual, 3);
        assert!(o.divergence_tilde(&other).is_err());
    }

    /// Cells whose eight neighbours do not wrap, for polynomial checks.
    fn interior(o: &SpdgOperators, target: Staggering) -> Vec<usize> {
        let c = o.grid().counts();
        (0..o.grid().n_cells())
            .filter(|&id| {
                let i = o.grid().cell_index(id);
                (0..3).all(|d| match target {
                    Staggering::Primal => i[d] >= 1,
                    Staggering::Dual => i[d] + 1 < c[d],
                })
            })
            .collect()
    }

    #[test]
    fn linear_field_has_unit_divergence_on_interior() {
        for n in 1..=3 {
            let o = ops(n, 4);
            // Unwrapped evaluation: only interior targets see a consistent field.
            let v = o.interpolate(Staggering::Dual, 3, |x| [x[0], 0.0, 0.0]);
            let d = o.divergence_tilde(&v).unwrap();
            for id in interior(&o, Staggering::Primal) {
                for l in 0..o.ndof() {
                    assert!((d.get(id, l, 0) - 1.0).abs() < 1e-12, "n={n}");
                }
            }
        }
    }

    #[test]
    fn linear_scalar_has_unit_gradient_on_interior() {
        for n in 1..=3 {
            let o = ops(n, 4);
            let f = o.interpolate(Staggering::Primal, 1, |x| [x[1], 0.0, 0.0]);
            let g = o.gradient(&f).unwrap();
            for id in interior(&o, Staggering::Dual) {
                for l in 0..o.ndof() {
                    assert!(g.get(id, l, 0).abs() < 1e-12);
                    assert!((g.get(id, l, 1) - 1.0).abs() < 1e-12);
                    assert!(g.get(id, l, 2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn projection_reproduces_linear_field() {
        let o = ops(1, 4);
        let f = o.interpolate(Staggering::Primal, 1, |x| [x[0], 0.0, 0.0]);
        let p = o.project(&f).unwrap();
        for id in interior(&o, Staggering::Dual) {
            for l in 0..o.ndof() {
                let x = o.node_location(Staggering::Dual, id, l);
                assert!((p.get(id, l, 0) - x[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn curls_agree_and_match_polynomial_curl() {
        let o = ops(2, 4);
        // curl (y z, x², 0) = (0, y, 2x − z)
        let v = o.interpolate(Staggering::Dual, 3, |x| [x[1] * x[2], x[0] * x[0], 0.0]);
        let c = o.curl(&v).unwrap();
        let cg = o.curl_via_gradient(&v).unwrap();
        assert_eq!(c, cg, "both curl routes are the same arithmetic");
        for id in interior(&o, Staggering::Primal) {
            for l in 0..o.ndof() {
                let x = o.node_location(Staggering::Primal, id, l);
                let e = [0.0, x[1], 2.0 * x[0] - x[2]];
                for k in 0..3 {
                    assert!((c.get(id, l, k) - e[k]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn divcurl_residual_separates_corrected_and_plain() {
        let o = ops(2, 4);
        let v = o.random_field(Staggering::Dual, 3, 3);
        let (sp, tilde) = o.divcurl_residual(&v).unwrap();
        assert!(sp < 1e-11, "sp={sp}");
        assert!(tilde > 1e-2, "tilde={tilde}");
        let z = o.zeros(Staggering::Dual, 3);
        assert_eq!(o.divcurl_residual(&z).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn degree_zero_correction_vanishes() {
        let o = ops(0, 4);
        let q = o.random_field(Staggering::Dual, 3, 9);
        let v = o.curl(&q).unwrap();
        let sp = o.divergence_sp(&v, &q).unwrap();
        let tilde = o.divergence_tilde(&v).unwrap();
        let mut d = sp.clone();
        d.axpy(-1.0, &tilde);
        assert!(d.linf() < 1e-15 * (1.0 + tilde.linf()) * 64.0);
    }

    #[test]
    fn l2_projection_is_exact_on_polynomials() {
        let o = ops(2, 3);
        let f = |x: [f64; 3]| [x[0] * x[0] - x[1] * x[2], 1.0 + x[2], 0.0];
        let a = o.l2_project(Staggering::Primal, 2, f);
        let b = o.interpolate(Staggering::Primal, 2, f);
        let mut d = a.clone();
        d.axpy(-1.0, &b);
        assert!(d.linf() < 1e-13);
    }

    #[test]
    fn inner_product_of_ones_is_volume() {
        let o = ops(3, 2);
        let f = constant(&o, Staggering::Dual, 1, 1.0);
        assert!((o.inner(&f, &f) - o.grid().domain_volume()).abs() < 1e-13);
    }

    #[test]
    fn random_field_is_seeded() {
        let o = ops(1, 2);
        assert_eq!(
            o.random_field(Staggering::Primal, 3, 1),
            o.random_field(Staggering::Primal, 3, 1)
        );
        assert_ne!(
            o.random_field(Staggering::Primal, 3, 1),
            o.random_field(Staggering::Primal, 3, 2)
        );
    }
}
