//! Nodal Lagrange basis through Gauss-Legendre points on the unit interval,
//! tensorised to the unit cube.
//!
//! Flat DoF index convention (used by every module): `l = l1 + n*(l2 + n*l3)`
//! with `n = N + 1` and zero-based `l1, l2, l3`, so `l1` runs fastest.

use nalgebra::DMatrix;

use crate::SpdgError;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Gauss-Legendre rule with `n` points mapped to `[0, 1]`.
///
/// Nodes are returned in increasing order; weights sum to one.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>), SpdgError> {
    if n == 0 {
        return Err(SpdgError::InvalidArgument(
            "Gauss-Legendre rule needs at least one point".into(),
        ));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n {
        // Chebyshev-like initial guess for the i-th root on [-1, 1], descending.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        // Store ascending on [0, 1].
        let j = n - 1 - i;
        nodes[j] = 0.5 * (x + 1.0);
        weights[j] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    Ok((nodes, weights))
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Multi-index of a tensor-product DoF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorIndex {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
}

impl TensorIndex {
    pub fn flat(self, n1d: usize) -> usize {
        self.l1 + n1d * (self.l2 + n1d * self.l3)
    }

    pub fn from_flat(flat: usize, n1d: usize) -> Self {
        Self {
            l1: flat % n1d,
            l2: (flat / n1d) % n1d,
            l3: flat / (n1d * n1d),
        }
    }
}

/// Degree-`N` nodal basis with its interpolation and integration rules.
#[derive(Debug, Clone)]
pub struct NodalBasis {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    quad_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
}

impl NodalBasis {
    pub fn new(degree: usize) -> Self {
        let (nodes, weights) = gauss_legendre(degree + 1).expect("n >= 1");
        let (quad_nodes, quad_weights) = gauss_legendre(degree + 2).expect("n >= 1");
        Self {
            degree,
            nodes,
            weights,
            quad_nodes,
            quad_weights,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of 1D basis functions, `N + 1`.
    pub fn n1d(&self) -> usize {
        self.degree + 1
    }

    /// Number of DoFs per cell and component, `(N + 1)^3`.
    pub fn ndof(&self) -> usize {
        self.n1d().pow(3)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integration rule with `N + 2` points.
    pub fn quad_nodes(&self) -> &[f64] {
        &self.quad_nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Reference coordinates of DoF `l`.
    pub fn node_coords(&self, l: usize) -> [f64; 3] {
        let t = TensorIndex::from_flat(l, self.n1d());
        [self.nodes[t.l1], self.nodes[t.l2], self.nodes[t.l3]]
    }

    /// Product of the 1D interpolation weights of DoF `l`.
    pub fn node_weight(&self, l: usize) -> f64 {
        let t = TensorIndex::from_flat(l, self.n1d());
        self.weights[t.l1] * self.weights[t.l2] * self.weights[t.l3]
    }

    /// Values and derivatives of all 1D basis functions at `xi`, which may lie
    /// outside `[0, 1]`.
    pub fn eval(&self, xi: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n1d();
        let mut values = vec![0.0; n];
        let mut derivs = vec![0.0; n];
        self.eval_into(xi, &mut values, &mut derivs);
        (values, derivs)
    }

    pub fn eval_into(&self, xi: f64, values: &mut [f64], derivs: &mut [f64]) {
        let x = &self.nodes;
        let n = x.len();
        for v in 0..n {
            let mut val = 1.0;
            let mut der = 0.0;
            for j in 0..n {
                if j == v {
                    continue;
                }
                let inv = 1.0 / (x[v] - x[j]);
                // Product rule accumulated on the fly.
                der = der * (xi - x[j]) * inv + val * inv;
                val *= (xi - x[j]) * inv;
            }
            values[v] = val;
            derivs[v] = der;
        }
    }

    /// Values only.
    pub fn values(&self, xi: f64) -> Vec<f64> {
        self.eval(xi).0
    }

    /// 1D mass matrix `∫ φ_k φ_l dξ` over `[0, 1]`. Diagonal up to round-off
    /// because the nodes are the Gauss points.
    pub fn mass_matrix_1d(&self) -> DMatrix<f64> {
        let n = self.n1d();
        let mut m = DMatrix::zeros(n, n);
        for (q, &xq) in self.quad_nodes.iter().enumerate() {
            let phi = self.values(xq);
            let w = self.quad_weights[q];
            for k in 0..n {
                for l in 0..n {
                    m[(k, l)] += w * phi[k] * phi[l];
                }
            }
        }
        m
    }

    /// 3D mass matrix on the unit reference cube, built by tensor quadrature.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        let n = self.n1d();
        let nd = self.ndof();
        let nq = self.quad_nodes.len();
        let phi: Vec<Vec<f64>> = self.quad_nodes.iter().map(|&x| self.values(x)).collect();
        let mut m = DMatrix::zeros(nd, nd);
        let mut vals = vec![0.0; nd];
        for q3 in 0..nq {
            for q2 in 0..nq {
                for q1 in 0..nq {
                    let w = self.quad_weights[q1] * self.quad_weights[q2] * self.quad_weights[q3];
                    for l in 0..nd {
                        let t = TensorIndex::from_flat(l, n);
                        vals[l] = phi[q1][t.l1] * phi[q2][t.l2] * phi[q3][t.l3];
                    }
                    for k in 0..nd {
                        let wk = w * vals[k];
                        for l in 0..nd {
                            m[(k, l)] += wk * vals[l];
                        }
                    }
                }
            }
        }
        m
    }

    /// Evaluates the nodal expansion `Σ_l φ_l(ξ) f_l` at a reference point.
    pub fn interpolate(&self, dofs: &[f64], xi: [f64; 3]) -> f64 {
        let n = self.n1d();
        let p1 = self.values(xi[0]);
        let p2 = self.values(xi[1]);
        let p3 = self.values(xi[2]);
        let mut s = 0.0;
        for l3 in 0..n {
            for l2 in 0..n {
                let w23 = p2[l2] * p3[l3];
                for l1 in 0..n {
                    s += p1[l1] * w23 * dofs[l1 + n * (l2 + n * l3)];
                }
            }
        }
        s
    }
}

/// Kronecker product `c ⊗ b ⊗ a` in the l1-fastest convention, i.e. the 3D
/// matrix whose `(k, l)` entry is `a[k1,l1] b[k2,l2] c[k3,l3]`.
pub fn kron3(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let nd = n * n * n;
    let mut out = DMatrix::zeros(nd, nd);
    for k in 0..nd {
        let tk = TensorIndex::from_flat(k, n);
        for l in 0..nd {
            let tl = TensorIndex::from_flat(l, n);
            out[(k, l)] = a[(tk.l1, tl.l1)] * b[(tk.l2, tl.l2)] * c[(tk.l3, tl.l3)];
        }
    }
    out
}
