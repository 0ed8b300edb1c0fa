//! Implicit time integration with Newton's method per step.
//!
//! Crank-Nicolson evaluates every spatial term at `(u^{n+1} + u^n) / 2` and
//! solves for the midpoint pressure. BDF2 is fully implicit at `t^{n+1}`;
//! its first step is taken with Crank-Nicolson.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::debug;
use thiserror::Error;

use crate::assembly::sparse::CsrMatrix;
use crate::assembly::{
    assemble_divergence, assemble_graddiv, assemble_load, assemble_mass, assemble_viscous, nonlinear_jacobian,
    nonlinear_residual, FormKind,
};
use crate::fespace::{FieldCoeffs, TaylorHoodSpace};
use crate::linsolve::SolveError;

/// Body force `f(x, t)`.
pub type ForceFn = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    CrankNicolson,
    Bdf2,
}

impl TimeScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeScheme::CrankNicolson => "cn",
            TimeScheme::Bdf2 => "bdf2",
        }
    }
}

impl fmt::Display for TimeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TimeScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cn" | "crank-nicolson" | "crank_nicolson" => Ok(TimeScheme::CrankNicolson),
            "bdf2" => Ok(TimeScheme::Bdf2),
            _ => Err(format!("unknown time scheme '{s}' (expected cn or bdf2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_iter: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub form: FormKind,
    pub scheme: TimeScheme,
    pub dt: f64,
    pub nu: f64,
    /// grad-div stabilization parameter
    pub gamma: f64,
    pub newton: NewtonConfig,
    /// Start Newton from `2 u^n - u^{n-1}` instead of `u^n`.
    pub extrapolate: bool,
}

impl SchemeConfig {
    pub fn new(form: FormKind, scheme: TimeScheme, dt: f64, nu: f64) -> Self {
        SchemeConfig {
            form,
            scheme,
            dt,
            nu,
            gamma: 0.0,
            newton: NewtonConfig::default(),
            extrapolate: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransientState {
    pub t: f64,
    pub step: usize,
    pub u: FieldCoeffs,
    pub p: FieldCoeffs,
    pub u_prev: Option<FieldCoeffs>,
}

impl TransientState {
    pub fn new(u: FieldCoeffs, p: FieldCoeffs, t: f64) -> Self {
        TransientState {
            t,
            step: 0,
            u,
            p,
            u_prev: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub newton_iters: usize,
    /// Residual norm before each Newton update and after the last one.
    pub residuals: Vec<f64>,
    /// Largest `|(div u^{n+1}, q)|` over pressure basis functions.
    pub div_residual: f64,
    pub scheme_used: TimeScheme,
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("Newton did not converge at step {step} (t = {t}): residual history {residuals:?}")]
    NewtonDiverged { step: usize, t: f64, residuals: Vec<f64> },
    #[error("non-finite residual at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },
    #[error("linear solve failed at step {step}: {source}")]
    Solve { step: usize, source: SolveError },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub struct Integrator<'a> {
    space: &'a TaylorHoodSpace,
    config: SchemeConfig,
    mass: CsrMatrix,
    /// `nu A + gamma G`
    stiffness: CsrMatrix,
    div: CsrMatrix,
    force: Option<ForceFn>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl<'a> Integrator<'a> {
    pub fn new(space: &'a TaylorHoodSpace, config: SchemeConfig) -> Result<Self, StepError> {
        if !(config.dt > 0.0 && config.dt.is_finite()) {
            return Err(StepError::Config(format!("time step must be positive, got {}", config.dt)));
        }
        if config.nu < 0.0 || config.gamma < 0.0 {
            return Err(StepError::Config("viscosity and grad-div parameter must be nonnegative".into()));
        }
        let mass = assemble_mass(space);
        let mut stiffness = assemble_viscous(space);
        stiffness.scale(config.nu);
        if config.gamma > 0.0 {
            stiffness.add_scaled(config.gamma, &assemble_graddiv(space));
        }
        Ok(Integrator {
            space,
            config,
            mass,
            stiffness,
            div: assemble_divergence(space),
            force: None,
        })
    }

    pub fn with_force(mut self, force: ForceFn) -> Self {
        self.force = Some(force);
        self
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        self.space
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn divergence(&self) -> &CsrMatrix {
        &self.div
    }

    /// Largest `|(div u, q)|` over the free pressure basis.
    pub fn divergence_residual(&self, u: &FieldCoeffs) -> f64 {
        let mut r = vec![0.0; self.space.pressure_dof_count()];
        self.div.mul_vec_into(&u.values, &mut r);
        self.space
            .reduce_pressure_rows(&r)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Advances `state` by one step.
    pub fn step(&self, state: &mut TransientState) -> Result<StepReport, StepError> {
        let scheme = match (self.config.scheme, &state.u_prev) {
            (TimeScheme::Bdf2, Some(_)) => TimeScheme::Bdf2,
            _ => TimeScheme::CrankNicolson,
        };
        let dt = self.config.dt;
        let t_new = state.t + dt;
        let space = self.space;
        let layout = space.saddle_layout();
        let (nu_len, np_len) = (layout.velocity_len(), layout.pressure_len());

        // Time-derivative weights: du/dt ~ (a0 u + a1 u^n + a2 u^{n-1}) / dt
        // and the spatial argument w = c_new u + c_old u^n.
        let (a0, a1, a2, c_new) = match scheme {
            TimeScheme::CrankNicolson => (1.0, -1.0, 0.0, 0.5),
            TimeScheme::Bdf2 => (1.5, -2.0, 0.5, 1.0),
        };
        let c_old = 1.0 - c_new;
        let t_force = match scheme {
            TimeScheme::CrankNicolson => state.t + 0.5 * dt,
            TimeScheme::Bdf2 => t_new,
        };

        let mut history = self.mass.mul_vec(&state.u.values);
        history.iter_mut().for_each(|v| *v *= a1 / dt);
        if let (Some(prev), true) = (&state.u_prev, a2 != 0.0) {
            self.mass.mul_vec_add(a2 / dt, &prev.values, &mut history);
        }
        if let Some(f) = &self.force {
            let load = assemble_load(space, |x, t| f(x, t), t_force);
            for (h, l) in history.iter_mut().zip(load) {
                *h -= l;
            }
        }

        let mut u = match (&state.u_prev, self.config.extrapolate) {
            (Some(prev), true) => {
                let mut g = state.u.scaled(2.0);
                g.axpy(-1.0, prev);
                g
            }
            _ => state.u.clone(),
        };
        space.apply_constraints(&mut u, t_new);
        let mut p = state.p.clone();

        let mut k_lin = self.mass.clone();
        k_lin.scale(a0 / dt);
        k_lin.add_scaled(c_new, &self.stiffness);

        let w_of = |u: &FieldCoeffs| {
            if c_old == 0.0 {
                u.clone()
            } else {
                let mut w = u.scaled(c_new);
                w.axpy(c_old, &state.u);
                w
            }
        };
        let residual = |u: &FieldCoeffs, p: &FieldCoeffs, w: &FieldCoeffs| -> Vec<f64> {
            let mut mom = nonlinear_residual(space, self.config.form, w);
            self.mass.mul_vec_add(a0 / dt, &u.values, &mut mom);
            self.stiffness.mul_vec_add(1.0, &w.values, &mut mom);
            self.div.mul_transpose_add(-1.0, &p.values, &mut mom);
            for (m, h) in mom.iter_mut().zip(&history) {
                *m += h;
            }
            let mut cont = vec![0.0; space.pressure_dof_count()];
            self.div.mul_vec_add(-1.0, &u.values, &mut cont);
            let mut r = vec![0.0; layout.size()];
            layout.reduce_velocity(&mom, &mut r[..nu_len]);
            layout.reduce_pressure(&cont, &mut r[nu_len..]);
            r
        };

        let newton = self.config.newton;
        let mut w = w_of(&u);
        let mut r = residual(&u, &p, &w);
        let r0 = norm2(&r);
        let tol = newton.abs_tol.max(newton.rel_tol * r0);
        let mut residuals = vec![r0];
        let mut iters = 0;
        loop {
            let rn = *residuals.last().unwrap();
            if !rn.is_finite() {
                return Err(StepError::NonFinite { step: state.step + 1, t: t_new });
            }
            if iters >= 1 && rn <= tol {
                break;
            }
            if iters >= newton.max_iter {
                return Err(StepError::NewtonDiverged {
                    step: state.step + 1,
                    t: t_new,
                    residuals,
                });
            }
            let mut k = k_lin.clone();
            k.add_scaled(c_new, &nonlinear_jacobian(space, self.config.form, &w));
            let mat = layout.assemble(&k, &self.div);
            r.iter_mut().for_each(|v| *v = -*v);
            let (delta, _) = mat
                .solve(&r, 1e-12)
                .map_err(|source| StepError::Solve { step: state.step + 1, source })?;
            let fixed_zero = vec![0.0; space.fixed_dofs().len()];
            u.axpy(1.0, &space.expand_with(&delta[..nu_len], &fixed_zero));
            p.axpy(1.0, &layout.expand_pressure(&delta[nu_len..nu_len + np_len]));
            iters += 1;
            w = w_of(&u);
            r = residual(&u, &p, &w);
            residuals.push(norm2(&r));
        }
        space.normalize_pressure(&mut p);
        debug!(
            "step {} t={t_new:.6} scheme={scheme} newton={iters} residuals={residuals:?}",
            state.step + 1
        );

        let div_residual = self.divergence_residual(&u);
        let old = std::mem::replace(&mut state.u, u);
        state.u_prev = Some(old);
        state.p = p;
        state.t = t_new;
        state.step += 1;
        Ok(StepReport {
            newton_iters: iters,
            residuals,
            div_residual,
            scheme_used: scheme,
        })
    }

    /// Takes `n_steps` steps, calling `observer` after each.
    pub fn run<F>(&self, state: &mut TransientState, n_steps: usize, mut observer: F) -> Result<(), StepError>
    where
        F: FnMut(&TransientState, &StepReport),
    {
        for _ in 0..n_steps {
            let report = self.step(state)?;
            observer(state, &report);
        }
        Ok(())
    }

    /// Number of steps of size `dt` from `t0` to `t_end`.
    pub fn steps_between(&self, t0: f64, t_end: f64) -> usize {
        ((t_end - t0) / self.config.dt).round().max(0.0) as usize
    }
}

/// Kinetic energy `(u, u) / 2` through the mass matrix.
pub fn kinetic_energy(mass: &CsrMatrix, u: &FieldCoeffs) -> f64 {
    0.5 * mass.bilinear(&u.values, &u.values)
}
