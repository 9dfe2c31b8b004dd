//! IMEX Runge-Kutta stage machinery and the three supported tableau pairs.
//!
//! All three pairs are stiffly accurate with identical explicit and implicit
//! weights, so a step is `y⁺ = y + dt Σ_j b_j k_j` with merged stage fluxes
//! `k_j`.

use std::fmt;
use std::str::FromStr;

use crate::field::DgField;
use crate::fieldops::Solenoidal;
use crate::SpdgError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImexScheme {
    /// One-stage forward/backward Euler pair.
    Sp111,
    /// Two-stage, second order, L-stable DIRK pair.
    Lsdirk222,
    /// Four-stage, third order, stiffly accurate DIRK pair.
    Sadirk343,
}

impl ImexScheme {
    pub const ALL: [ImexScheme; 3] = [ImexScheme::Sp111, ImexScheme::Lsdirk222, ImexScheme::Sadirk343];

    pub fn name(self) -> &'static str {
        match self {
            ImexScheme::Sp111 => "sp111",
            ImexScheme::Lsdirk222 => "lsdirk222",
            ImexScheme::Sadirk343 => "sadirk343",
        }
    }
}

impl fmt::Display for ImexScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImexScheme {
    type Err = SpdgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sp111" => Ok(ImexScheme::Sp111),
            "lsdirk222" => Ok(ImexScheme::Lsdirk222),
            "sadirk343" => Ok(ImexScheme::Sadirk343),
            other => Err(SpdgError::InvalidArgument(format!(
                "unknown IMEX scheme '{other}' (expected sp111, lsdirk222 or sadirk343)"
            ))),
        }
    }
}

/// Explicit/implicit tableau pair with `s` stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherPair {
    pub stages: usize,
    /// Strictly lower triangular.
    pub a_ex: Vec<Vec<f64>>,
    /// Lower triangular.
    pub a_im: Vec<Vec<f64>>,
    pub b_ex: Vec<f64>,
    pub b_im: Vec<f64>,
    pub c_ex: Vec<f64>,
    pub c_im: Vec<f64>,
}

/// Diagonal coefficient of the four-stage pair, kept at the published six
/// digits rather than the exact root.
pub const SADIRK_GAMMA: f64 = 0.435866;

pub fn tableau(scheme: ImexScheme) -> ButcherPair {
    match scheme {
        ImexScheme::Sp111 => ButcherPair {
            stages: 1,
            a_ex: vec![vec![0.0]],
            a_im: vec![vec![1.0]],
            b_ex: vec![1.0],
            b_im: vec![1.0],
            c_ex: vec![0.0],
            c_im: vec![1.0],
        },
        ImexScheme::Lsdirk222 => {
            let g = 1.0 - 1.0 / 2f64.sqrt();
            let beta = 1.0 / (2.0 * g);
            ButcherPair {
                stages: 2,
                a_ex: vec![vec![0.0, 0.0], vec![beta, 0.0]],
                a_im: vec![vec![g, 0.0], vec![1.0 - g, g]],
                b_ex: vec![1.0 - g, g],
                b_im: vec![1.0 - g, g],
                c_ex: vec![0.0, beta],
                c_im: vec![g, 1.0],
            }
        }
        ImexScheme::Sadirk343 => {
            let g = SADIRK_GAMMA;
            let b = vec![0.0, 1.208496, -0.644363, g];
            ButcherPair {
                stages: 4,
                a_ex: vec![
                    vec![0.0, 0.0, 0.0, 0.0],
                    vec![g, 0.0, 0.0, 0.0],
                    vec![1.437745, -0.719812, 0.0, 0.0],
                    vec![0.916993, 0.5, -0.416993, 0.0],
                ],
                a_im: vec![
                    vec![g, 0.0, 0.0, 0.0],
                    vec![0.0, g, 0.0, 0.0],
                    vec![0.0, 0.282066, g, 0.0],
                    b.clone(),
                ],
                b_ex: b.clone(),
                b_im: b,
                c_ex: vec![0.0, g, 0.717933, 1.0],
                c_im: vec![g, g, 0.717933, 1.0],
            }
        }
    }
}

impl ButcherPair {
    /// Largest deviation between row sums and abscissae over both tables.
    pub fn row_sum_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.stages {
            let se: f64 = self.a_ex[i].iter().sum();
            let si: f64 = self.a_im[i].iter().sum();
            worst = worst.max((se - self.c_ex[i]).abs()).max((si - self.c_im[i]).abs());
        }
        worst
    }

    pub fn is_stiffly_accurate(&self) -> bool {
        self.a_im[self.stages - 1] == self.b_im
    }

    pub fn is_explicit_strictly_lower(&self) -> bool {
        (0..self.stages).all(|i| (i..self.stages).all(|j| self.a_ex[i][j] == 0.0))
    }

    pub fn is_implicit_lower(&self) -> bool {
        (0..self.stages).all(|i| ((i + 1)..self.stages).all(|j| self.a_im[i][j] == 0.0))
    }
}

/// Vector-space operations needed by the stage loop.
pub trait StageVector: Clone {
    fn axpy(&mut self, a: f64, x: &Self);
}

impl StageVector for f64 {
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl StageVector for Vec<f64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }
}

impl StageVector for DgField {
    fn axpy(&mut self, a: f64, x: &Self) {
        DgField::axpy(self, a, x);
    }
}

impl StageVector for Solenoidal {
    fn axpy(&mut self, a: f64, x: &Self) {
        Solenoidal::axpy(self, a, x);
    }
}

/// Data handed to the stage-flux callback.
///
/// The callback must return `k` solving
/// `k = F_ex(explicit_state) + F_im(implicit_base + implicit_weight · k)`.
#[derive(Debug)]
pub struct StageRequest<'a, T> {
    pub stage: usize,
    pub explicit_state: &'a T,
    pub implicit_base: &'a T,
    /// `dt · a_ii`.
    pub implicit_weight: f64,
    pub explicit_time: f64,
    pub implicit_time: f64,
}

/// Advances `state` from `t` by `dt`.
pub fn imex_advance<T, E, H>(state: &T, t: f64, dt: f64, tab: &ButcherPair, mut flux: H) -> Result<T, E>
where
    T: StageVector,
    H: FnMut(StageRequest<'_, T>) -> Result<T, E>,
{
    let s = tab.stages;
    let mut k: Vec<T> = Vec::with_capacity(s);
    for i in 0..s {
        let mut explicit_state = state.clone();
        let mut implicit_base = state.clone();
        for (j, kj) in k.iter().enumerate() {
            if tab.a_ex[i][j] != 0.0 {
                explicit_state.axpy(dt * tab.a_ex[i][j], kj);
            }
            if tab.a_im[i][j] != 0.0 {
                implicit_base.axpy(dt * tab.a_im[i][j], kj);
            }
        }
        let ki = flux(StageRequest {
            stage: i,
            explicit_state: &explicit_state,
            implicit_base: &implicit_base,
            implicit_weight: dt * tab.a_im[i][i],
            explicit_time: t + tab.c_ex[i] * dt,
            implicit_time: t + tab.c_im[i] * dt,
        })?;
        k.push(ki);
    }
    let mut next = state.clone();
    for (j, kj) in k.iter().enumerate() {
        if tab.b_im[j] != 0.0 {
            next.axpy(dt * tab.b_im[j], kj);
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    /// Linear split problem `y' = g(t) + λ_ex y + λ_im y` with the
    /// implicit part solved in closed form.
    fn step_linear(
        y: f64,
        t: f64,
        dt: f64,
        tab: &ButcherPair,
        lex: f64,
        lim: f64,
        g: &dyn Fn(f64) -> f64,
    ) -> f64 {
        imex_advance(&y, t, dt, tab, |r: StageRequest<'_, f64>| {
            Ok::<_, Infallible>(
                (g(r.explicit_time) + lex * r.explicit_state + lim * r.implicit_base)
                    / (1.0 - r.implicit_weight * lim),
            )
        })
        .unwrap()
    }

    fn integrate(tab: &ButcherPair, steps: usize, t_end: f64, lex: f64, lim: f64, g: &dyn Fn(f64) -> f64, y0: f64) -> f64 {
        let dt = t_end / steps as f64;
        let mut y = y0;
        for n in 0..steps {
            y = step_linear(y, n as f64 * dt, dt, tab, lex, lim, g);
        }
        y
    }

    fn observed_order(errors: &[f64]) -> f64 {
        let n = errors.len();
        (errors[n - 2] / errors[n - 1]).log2()
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in ImexScheme::ALL {
            assert_eq!(s.name().parse::<ImexScheme>().unwrap(), s);
        }
        assert!("rk4".parse::<ImexScheme>().is_err());
    }

    #[test]
    fn tableau_coefficients() {
        let t = tableau(ImexScheme::Sp111);
        assert_eq!((t.a_ex[0][0], t.a_im[0][0], t.b_im[0]), (0.0, 1.0, 1.0));
        let t = tableau(ImexScheme::Lsdirk222);
        let g = t.a_im[0][0];
        assert!((g - 0.2928932).abs() < 1e-7);
        assert_eq!(t.b_im, vec![1.0 - g, g]);
        let t = tableau(ImexScheme::Sadirk343);
        assert_eq!(t.b_im, vec![0.0, 1.208496, -0.644363, 0.435866]);
        assert_eq!(t.a_im[3], t.b_im);
    }

    #[test]
    fn structural_invariants() {
        for s in ImexScheme::ALL {
            let t = tableau(s);
            assert!(t.is_stiffly_accurate(), "{s}");
            assert!(t.is_explicit_strictly_lower(), "{s}");
            assert!(t.is_implicit_lower(), "{s}");
            assert_eq!(t.b_ex, t.b_im);
            assert!((t.b_im.iter().sum::<f64>() - 1.0).abs() < 2e-6);
        }
        assert!(tableau(ImexScheme::Sp111).row_sum_defect() < 1e-12);
        assert!(tableau(ImexScheme::Lsdirk222).row_sum_defect() < 1e-12);
        // Six-digit coefficients: consistent only to the published precision.
        assert!(tableau(ImexScheme::Sadirk343).row_sum_defect() < 2e-6);
    }

    #[test]
    fn backward_euler_step() {
        let t = tableau(ImexScheme::Sp111);
        let y = step_linear(1.0, 0.0, 0.1, &t, 0.0, -1.0, &|_| 0.0);
        assert!((y - 1.0 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn lsdirk_is_second_order_on_decay() {
        let t = tableau(ImexScheme::Lsdirk222);
        let errs: Vec<f64> = [10, 20, 40, 80]
            .iter()
            .map(|&n| (integrate(&t, n, 1.0, 0.0, -1.0, &|_| 0.0, 1.0) - (-1f64).exp()).abs())
            .collect();
        let p = observed_order(&errs);
        assert!((p - 2.0).abs() < 0.1, "order {p}");
    }

    #[test]
    fn explicit_parts_have_design_order_on_cosine() {
        // y' = w cos(w t) with no implicit part: the explicit tables alone.
        // The frequency keeps truncation errors above the 1e-6 consistency
        // defect of the six-digit coefficients.
        let w = 4.0;
        for (s, expect) in [(ImexScheme::Sp111, 1.0), (ImexScheme::Lsdirk222, 2.0), (ImexScheme::Sadirk343, 3.0)] {
            let t = tableau(s);
            let errs: Vec<f64> = [8, 16, 32]
                .iter()
                .map(|&n| (integrate(&t, n, 1.0, 0.0, 0.0, &|t| w * (w * t).cos(), 0.0) - w.sin()).abs())
                .collect();
            let p = observed_order(&errs);
            assert!(p > expect - 0.2, "{s}: order {p}");
        }
    }

    #[test]
    fn sadirk_on_prothero_robinson() {
        // y' = λ (y − sin wt) + w cos wt, y(0) = 0, exact y = sin wt; the
        // linear part is implicit, the forcing explicit.
        let (lam, w) = (-1.0, 4.0);
        let t = tableau(ImexScheme::Sadirk343);
        let g = move |s: f64| w * (w * s).cos() - lam * (w * s).sin();
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| (integrate(&t, n, 1.0, 0.0, lam, &g, 0.0) - w.sin()).abs())
            .collect();
        let p = observed_order(&errs);
        assert!(p >= 2.7, "order {p} errors {errs:?}");
    }

    /// Standalone DIRK on y' = λ y.
    fn dirk_step(y: f64, dt: f64, a: &[Vec<f64>], b: &[f64], lam: f64) -> f64 {
        let s = b.len();
        let mut k = vec![0.0; s];
        for i in 0..s {
            let base = y + dt * (0..i).map(|j| a[i][j] * k[j]).sum::<f64>();
            k[i] = lam * base / (1.0 - dt * a[i][i] * lam);
        }
        y + dt * (0..s).map(|j| b[j] * k[j]).sum::<f64>()
    }

    #[test]
    fn implicit_only_flux_reproduces_dirk() {
        for s in ImexScheme::ALL {
            let t = tableau(s);
            let (mut y1, mut y2) = (1.0, 1.0);
            for _ in 0..10 {
                y1 = step_linear(y1, 0.0, 0.3, &t, 0.0, -4.0, &|_| 0.0);
                y2 = dirk_step(y2, 0.3, &t.a_im, &t.b_im, -4.0);
            }
            assert!((y1 - y2).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn vector_state_matches_scalar() {
        let t = tableau(ImexScheme::Lsdirk222);
        let v = imex_advance(&vec![1.0, 2.0], 0.0, 0.1, &t, |r: StageRequest<'_, Vec<f64>>| {
            Ok::<_, Infallible>(
                r.implicit_base
                    .iter()
                    .map(|y| -y / (1.0 + r.implicit_weight))
                    .collect(),
            )
        })
        .unwrap();
        let s = step_linear(1.0, 0.0, 0.1, &t, 0.0, -1.0, &|_| 0.0);
        assert!((v[0] - s).abs() < 1e-15 && (v[1] - 2.0 * s).abs() < 1e-15);
    }

    #[test]
    fn flux_errors_propagate() {
        let t = tableau(ImexScheme::Sadirk343);
        let r: Result<f64, &str> = imex_advance(&1.0, 0.0, 0.1, &t, |req: StageRequest<'_, f64>| {
            if req.stage == 2 {
                Err("boom")
            } else {
                Ok(0.0)
            }
        });
        assert_eq!(r, Err("boom"));
    }
}
