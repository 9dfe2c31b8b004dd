//! Vortex-stream incompressible Navier-Stokes solver.
//!
//! The vorticity `ω` (primal) is evolved by IMEX Runge-Kutta with explicit
//! transport `curl(u × ω)` and implicit viscous `−ν curl curl ω`. After each
//! step the stream function solves `(curl curl + δ) Ψ = ω` and the velocity is
//! `u = curl Ψ`.
//!
//! Every solenoidal field is stored as a [`Solenoidal`] pair:
//! `ω = curl p`, `Ψ = curl φ`, `u = curl Ψ`. Stage increments are built as
//! exact curls of dual potentials, so the structure-preserving divergence of
//! all three fields stays at round-off for the whole run.

use std::fmt;

use crate::field::{DgField, Staggering};
use crate::fieldops::{Solenoidal, SpdgOperators};
use crate::imex::{imex_advance, ButcherPair, ImexScheme, StageRequest};
use crate::krylov::{gmres, gmres_measured, GmresConfig};
use crate::SpdgError;

/// Physical and numerical parameters of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsConfig {
    pub nu: f64,
    pub cfl: f64,
    /// Mesh Reynolds number of the artificial viscosity; `≥ 1e20` disables it.
    pub re_h: f64,
    pub t_end: f64,
    /// Add the artificial viscosity to `ν` in the implicit solve instead of
    /// treating it explicitly.
    pub implicit_artificial_viscosity: bool,
    /// Recompute the velocity before every explicit stage instead of once
    /// per step.
    pub refresh_velocity_per_stage: bool,
    /// `δ = h_min^p` in the stream solve; `None` means `p = N + 1`.
    pub delta_power: Option<u32>,
    pub viscous_tolerance: f64,
    pub gmres_restart: usize,
    pub gmres_max_iterations: usize,
}

/// Values at or above this disable the artificial viscosity.
pub const RE_H_OFF: f64 = 1e20;

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            nu: 0.0,
            cfl: 0.9,
            re_h: RE_H_OFF,
            t_end: 0.0,
            implicit_artificial_viscosity: false,
            refresh_velocity_per_stage: false,
            delta_power: None,
            viscous_tolerance: 1e-10,
            gmres_restart: 30,
            gmres_max_iterations: 5000,
        }
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<(), SpdgError> {
        let bad = |m: &str| Err(SpdgError::InvalidArgument(m.to_string()));
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return bad("nu must be finite and non-negative");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl must lie in (0, 1]");
        }
        if !(self.re_h > 0.0) {
            return bad("re_h must be positive");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and non-negative");
        }
        if !(self.viscous_tolerance > 0.0) {
            return bad("viscous tolerance must be positive");
        }
        if self.gmres_restart == 0 || self.gmres_max_iterations == 0 {
            return bad("GMRES restart and iteration bound must be positive");
        }
        Ok(())
    }

    pub fn artificial_viscosity_on(&self) -> bool {
        self.re_h < RE_H_OFF
    }
}

/// Solver state. All three fields are exact discrete curls of their stored
/// potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Vorticity (primal) with its dual potential.
    pub omega: Solenoidal,
    /// Stream function (primal) with its dual potential.
    pub psi: Solenoidal,
    /// Velocity (dual); its potential is `psi.field`.
    pub u: DgField,
    pub t: f64,
    pub step: usize,
}

impl SolverState {
    /// Velocity paired with its potential.
    pub fn velocity(&self) -> Solenoidal {
        Solenoidal {
            field: self.u.clone(),
            potential: self.psi.field.clone(),
        }
    }
}

/// L∞ norms of the structure-preserving divergences.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Involutions {
    pub omega: f64,
    pub u: f64,
    pub psi: f64,
}

impl Involutions {
    pub fn max(&self) -> f64 {
        self.omega.max(self.u).max(self.psi)
    }
}

/// One row of the per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub involutions: Involutions,
    pub gmres_visc_iters: usize,
    pub gmres_stream_iters: usize,
}

/// Failure inside [`Solver::run`], carrying the last completed state.
#[derive(Debug)]
pub struct RunFailure {
    pub source: SpdgError,
    pub state: Box<SolverState>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run aborted at step {} (t = {}): {}", self.state.step, self.state.t, self.source)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

#[derive(Debug, Clone)]
pub struct Solver {
    ops: SpdgOperators,
    cfg: PhysicsConfig,
    tableau: ButcherPair,
    pub state: SolverState,
}

/// Node-wise cross product of two 3-component fields on the same staggering.
pub fn cross(a: &DgField, b: &DgField) -> DgField {
    debug_assert!(a.same_shape(b) && a.ncomp() == 3);
    let mut out = a.zeros_like();
    for ((o, x), y) in out
        .data_mut()
        .chunks_exact_mut(3)
        .zip(a.data().chunks_exact(3))
        .zip(b.data().chunks_exact(3))
    {
        o[0] = x[1] * y[2] - x[2] * y[1];
        o[1] = x[2] * y[0] - x[0] * y[2];
        o[2] = x[0] * y[1] - x[1] * y[0];
    }
    out
}

fn wrap(template: &DgField, data: &[f64]) -> DgField {
    DgField::from_data(template.staggering(), template.ncomp(), template.ncells(), template.ndof(), data.to_vec())
        .expect("length fixed by the template")
}

impl Solver {
    /// Builds the well-prepared initial state from an analytic velocity.
    ///
    /// The velocity is L2-projected onto the dual space; `ω = curl u`, then Ψ
    /// is recovered and `u` is replaced by `curl Ψ`.
    pub fn init_well_prepared<F>(
        ops: SpdgOperators,
        cfg: PhysicsConfig,
        scheme: ImexScheme,
        u_exact: F,
    ) -> Result<Self, SpdgError>
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync,
    {
        cfg.validate()?;
        let u0 = ops.l2_project(Staggering::Dual, 3, u_exact);
        let omega = Solenoidal::from_potential(&ops, u0)?;
        let zero_primal = ops.zeros(Staggering::Primal, 3);
        let zero_dual = ops.zeros(Staggering::Dual, 3);
        let state = SolverState {
            omega,
            psi: Solenoidal {
                field: zero_primal,
                potential: zero_dual.clone(),
            },
            u: zero_dual,
            t: 0.0,
            step: 0,
        };
        let mut solver = Self {
            ops,
            cfg,
            tableau: crate::imex::tableau(scheme),
            state,
        };
        let (psi, _) = solver.solve_stream(&solver.state.omega, &solver.state.psi.potential)?;
        solver.state.u = solver.update_velocity(&psi.field)?;
        solver.state.psi = psi;
        Ok(solver)
    }

    pub fn ops(&self) -> &SpdgOperators {
        &self.ops
    }

    pub fn config(&self) -> &PhysicsConfig {
        &self.cfg
    }

    /// Largest cell edge, the length scale of the artificial viscosity.
    pub fn h(&self) -> f64 {
        self.ops.grid().h_max()
    }

    /// `δ` of the stream solve.
    pub fn stream_delta(&self) -> f64 {
        let p = self.cfg.delta_power.unwrap_or(self.ops.degree() as u32 + 1);
        self.ops.grid().h_min().powi(p as i32)
    }

    /// Absolute GMRES tolerance of the stream solve.
    pub fn stream_tolerance(&self) -> f64 {
        self.ops.grid().h_min().powi(self.ops.degree() as i32 + 2)
    }

    fn gmres_config(&self, tolerance: f64) -> GmresConfig {
        GmresConfig {
            tolerance,
            restart: self.cfg.gmres_restart,
            max_iterations: self.cfg.gmres_max_iterations,
        }
    }

    /// Electric-field analogue `u × P(ω)` on the dual grid.
    pub fn compute_e(&self, u: &DgField, omega: &DgField) -> Result<DgField, SpdgError> {
        let w = self.ops.project(omega)?;
        Ok(cross(u, &w))
    }

    /// Dual potential of the explicit right-hand side: the explicit flux is
    /// its curl, `curl(E) − (h/Re_h) curl curl ω`.
    pub fn explicit_potential(&self, u: &DgField, omega: &DgField) -> Result<DgField, SpdgError> {
        let mut x = self.compute_e(u, omega)?;
        if self.cfg.artificial_viscosity_on() && !self.cfg.implicit_artificial_viscosity {
            x.axpy(-self.h() / self.cfg.re_h, &self.ops.curl(omega)?);
        }
        Ok(x)
    }

    pub fn explicit_rhs(&self, u: &DgField, omega: &DgField) -> Result<DgField, SpdgError> {
        self.ops.curl(&self.explicit_potential(u, omega)?)
    }

    /// Viscosity of the implicit part.
    pub fn implicit_viscosity(&self) -> f64 {
        if self.cfg.artificial_viscosity_on() && self.cfg.implicit_artificial_viscosity {
            self.cfg.nu + self.h() / self.cfg.re_h
        } else {
            self.cfg.nu
        }
    }

    /// Solves `(I + ν c curl curl) z = rhs`; identity when `ν c = 0`.
    /// Returns the solution and the iteration count.
    pub fn implicit_solve(&self, rhs: &DgField, c: f64, nu: f64) -> Result<(DgField, usize), SpdgError> {
        let k = nu * c;
        if k == 0.0 {
            return Ok((rhs.clone(), 0));
        }
        let ops = &self.ops;
        let out = gmres(
            |x, y| {
                let f = wrap(rhs, x);
                let cc = ops.double_curl(&f).expect("shape fixed by construction");
                for ((yi, xi), ci) in y.iter_mut().zip(x).zip(cc.data()) {
                    *yi = xi + k * ci;
                }
            },
            rhs.data(),
            rhs.data(),
            &self.gmres_config(self.cfg.viscous_tolerance),
        )?;
        Ok((wrap(rhs, &out.solution), out.iterations))
    }

    /// Solves `(curl curl + δ) Ψ = ω` with `Ψ = curl φ`, starting from `φ0`.
    ///
    /// With `ω = curl p` the system is `curl((curl curl + δ) φ − p) = 0`,
    /// solved in the potential `φ` while residuals are measured on `Ψ`.
    pub fn solve_stream(&self, omega: &Solenoidal, phi0: &DgField) -> Result<(Solenoidal, usize), SpdgError> {
        let ops = &self.ops;
        let delta = self.stream_delta();
        let tmpl = &omega.potential;
        let out = gmres_measured(
            |q, cq, y| {
                let cc = ops.curl(&wrap(&omega.field, cq)).expect("shape fixed by construction");
                for ((yi, qi), ci) in y.iter_mut().zip(q).zip(cc.data()) {
                    *yi = ci + delta * qi;
                }
            },
            |q, y| {
                let c = ops.curl(&wrap(tmpl, q)).expect("shape fixed by construction");
                y.copy_from_slice(c.data());
            },
            tmpl.data(),
            phi0.data(),
            &self.gmres_config(self.stream_tolerance()),
        )?;
        let psi = Solenoidal::from_potential(ops, wrap(tmpl, &out.solution))?;
        Ok((psi, out.iterations))
    }

    pub fn update_velocity(&self, psi: &DgField) -> Result<DgField, SpdgError> {
        self.ops.curl(psi)
    }

    /// CFL time step from the nodal velocity maxima.
    pub fn compute_dt(&self, u: &DgField, t: f64) -> f64 {
        let dx = self.ops.grid().spacing();
        let rate: f64 = (0..3).map(|c| u.component_linf(c) / dx[c]).sum();
        let remaining = self.cfg.t_end - t;
        if rate > 0.0 {
            (self.cfg.cfl / rate).min(remaining)
        } else {
            remaining
        }
    }

    pub fn involutions(&self) -> Result<Involutions, SpdgError> {
        let s = &self.state;
        Ok(Involutions {
            omega: self.ops.divergence_sp_of(&s.omega)?.linf(),
            u: self.ops.divergence_sp(&s.u, &s.psi.field)?.linf(),
            psi: self.ops.divergence_sp_of(&s.psi)?.linf(),
        })
    }

    /// Advances by `dt`: IMEX update of `ω`, then stream solve and velocity.
    pub fn step(&mut self, dt: f64) -> Result<StepDiagnostics, SpdgError> {
        let nu = self.implicit_viscosity();
        let mut visc_iters = 0usize;
        let mut stream_iters = 0usize;
        let u_frozen = self.state.u.clone();
        let phi_start = self.state.psi.potential.clone();
        let next = {
            let this = &*self;
            imex_advance(
                &this.state.omega,
                this.state.t,
                dt,
                &this.tableau,
                |r: StageRequest<'_, Solenoidal>| -> Result<Solenoidal, SpdgError> {
                    let u = if this.cfg.refresh_velocity_per_stage && r.stage > 0 {
                        let (psi, it) = this.solve_stream(r.explicit_state, &phi_start)?;
                        stream_iters += it;
                        this.update_velocity(&psi.field)?
                    } else {
                        u_frozen.clone()
                    };
                    let mut k_pot = this.explicit_potential(&u, &r.explicit_state.field)?;
                    if nu > 0.0 {
                        let c = r.implicit_weight;
                        let z = if c > 0.0 {
                            let mut rhs = r.implicit_base.field.clone();
                            rhs.axpy(c, &this.ops.curl(&k_pot)?);
                            let (z, it) = this.implicit_solve(&rhs, c, nu)?;
                            visc_iters += it;
                            z
                        } else {
                            r.implicit_base.field.clone()
                        };
                        k_pot.axpy(-nu, &this.ops.curl(&z)?);
                    }
                    Solenoidal::from_potential(&this.ops, k_pot)
                },
            )?
        };
        let (psi, it) = self.solve_stream(&next, &self.state.psi.potential)?;
        stream_iters += it;
        let u = self.update_velocity(&psi.field)?;
        self.state.omega = next;
        self.state.psi = psi;
        self.state.u = u;
        self.state.t += dt;
        self.state.step += 1;
        Ok(StepDiagnostics {
            step: self.state.step,
            time: self.state.t,
            dt,
            involutions: self.involutions()?,
            gmres_visc_iters: visc_iters,
            gmres_stream_iters: stream_iters,
        })
    }

    /// Steps until `t_end`, landing exactly on every time in `stops` that
    /// lies inside the run. `on_step` sees each completed step and whether
    /// the step ended on a stop time.
    pub fn run<O>(&mut self, stops: &[f64], mut on_step: O) -> Result<Vec<StepDiagnostics>, RunFailure>
    where
        O: FnMut(&Solver, &StepDiagnostics, bool) -> Result<(), SpdgError>,
    {
        let t_end = self.cfg.t_end;
        let mut stops: Vec<f64> = stops.iter().copied().filter(|&s| s > self.state.t && s < t_end).collect();
        stops.sort_by(f64::total_cmp);
        stops.push(t_end);
        let mut history = Vec::new();
        let mut next_stop = 0usize;
        while self.state.t < t_end {
            let target = stops[next_stop];
            let mut dt = self.compute_dt(&self.state.u, self.state.t);
            let mut hit = false;
            if self.state.t + dt >= target {
                dt = target - self.state.t;
                hit = true;
            }
            if !(dt > 0.0) {
                break;
            }
            let fail = |s: &Solver, e: SpdgError| RunFailure {
                source: e,
                state: Box::new(s.state.clone()),
            };
            let diag = match self.step(dt) {
                Ok(d) => d,
                Err(e) => return Err(fail(self, e)),
            };
            if hit {
                // Remove drift so that stops are hit exactly.
                self.state.t = target;
                next_stop += 1;
            }
            let diag = StepDiagnostics { time: self.state.t, ..diag };
            if let Err(e) = on_step(self, &diag, hit) {
                return Err(fail(self, e));
            }
            history.push(diag);
        }
        Ok(history)
    }
}
