//! Fast invariant suite behind `emaclab verify`.
//!
//! Each check runs on small meshes with seeded random data and reports a
//! pass/fail line; the full-size versions live in the acceptance tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{
    assemble_mass, assemble_viscous, eval_trilinear, nonlinear_jacobian, nonlinear_residual, FormKind,
};
use crate::bench::problems::{build_problem, LatticeBoundary, ProblemSpec};
use crate::diagnostics::Diagnostics;
use crate::fespace::{build_space, BcSpec, BoundaryCondition, FieldCoeffs, TaylorHoodSpace};
use crate::mesh::{generate_unit_square, BoundaryMarker};
use crate::timestep::{Integrator, SchemeConfig, TimeScheme, TransientState};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Unit square with homogeneous Dirichlet data on the whole boundary.
pub fn no_slip_square(n: usize) -> TaylorHoodSpace {
    let bc = BcSpec::new().with(BoundaryMarker::Wall, BoundaryCondition::no_slip());
    build_space(Arc::new(generate_unit_square(n)), &bc).expect("no-slip square space")
}

/// Unit square without velocity constraints.
pub fn natural_square(n: usize) -> TaylorHoodSpace {
    let bc = BcSpec::new().with(BoundaryMarker::Wall, BoundaryCondition::Natural);
    build_space(Arc::new(generate_unit_square(n)), &bc).expect("natural square space")
}

/// Uniform `[-1, 1]` values on free dofs, zero on constrained dofs.
pub fn random_field(space: &TaylorHoodSpace, rng: &mut impl Rng) -> FieldCoeffs {
    let free: Vec<f64> = (0..space.free_velocity_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    space.expand_with(&free, &vec![0.0; space.fixed_dofs().len()])
}

/// `|grad a|_{L2} |b|_{L2} |c|_{inf}`, the Hoelder bound of a trilinear term.
pub fn trilinear_scale(space: &TaylorHoodSpace, a: &FieldCoeffs, b: &FieldCoeffs, c: &FieldCoeffs) -> f64 {
    let grad = assemble_viscous(space).bilinear(&a.values, &a.values).sqrt();
    let l2 = assemble_mass(space).bilinear(&b.values, &b.values).sqrt();
    let sup = c.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    grad * l2 * sup
}

fn check_cancellation(samples: usize) -> Check {
    let space = no_slip_square(8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = random_field(&space, &mut rng);
        let v = random_field(&space, &mut rng);
        let emac = eval_trilinear(&space, FormKind::Emac, &v, &v, &v).abs() / trilinear_scale(&space, &v, &v, &v);
        let skew = eval_trilinear(&space, FormKind::Skew, &u, &v, &v).abs() / trilinear_scale(&space, &u, &v, &v);
        worst = worst.max(emac).max(skew);
    }
    Check {
        name: "EMAC c(v,v,v) and SKEW b*(u,v,v) vanish",
        passed: worst <= 1e-12,
        detail: format!("worst scaled value {worst:.3e} over {samples} samples"),
    }
}

fn check_momentum_nullity(samples: usize) -> Check {
    let space = no_slip_square(8);
    let nat = natural_square(8);
    let ws = [
        nat.interpolate_velocity(|_| [1.0, 0.0]),
        nat.interpolate_velocity(|_| [0.0, 1.0]),
        nat.interpolate_velocity(|p| [-p[1], p[0]]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut emac_worst, mut skew_hits) = (0.0f64, 0);
    for _ in 0..samples {
        let u = random_field(&space, &mut rng);
        let mut skew_max = 0.0f64;
        for w in &ws {
            let scale = trilinear_scale(&space, &u, &u, w);
            emac_worst = emac_worst.max(eval_trilinear(&space, FormKind::Emac, &u, &u, w).abs() / scale);
            skew_max = skew_max.max(eval_trilinear(&space, FormKind::Skew, &u, &u, w).abs() / scale);
        }
        if skew_max > 1e-6 {
            skew_hits += 1;
        }
    }
    Check {
        name: "EMAC nonlinearity is blind to momentum and angular momentum",
        passed: emac_worst <= 1e-12 && skew_hits == samples,
        detail: format!("EMAC worst {emac_worst:.3e}; SKEW nonzero on {skew_hits}/{samples}"),
    }
}

fn check_jacobian() -> Check {
    let space = natural_square(4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_field(&space, &mut rng);
    let d = random_field(&space, &mut rng);
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for form in FormKind::ALL {
        let jd = nonlinear_jacobian(&space, form, &u).mul_vec(&d.values);
        let mut up = u.clone();
        up.axpy(eps, &d);
        let mut um = u.clone();
        um.axpy(-eps, &d);
        let (rp, rm) = (nonlinear_residual(&space, form, &up), nonlinear_residual(&space, form, &um));
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..jd.len() {
            let fd = (rp[k] - rm[k]) / (2.0 * eps);
            num += (fd - jd[k]).powi(2);
            den += jd[k].powi(2);
        }
        worst = worst.max((num / den).sqrt());
    }
    Check {
        name: "Newton Jacobian matches central differences",
        passed: worst <= 1e-6,
        detail: format!("worst relative error {worst:.3e} over all forms"),
    }
}

fn check_energy_conservation() -> Check {
    let problem = build_problem(&ProblemSpec::LatticeVortex {
        n: 8,
        nu: 0.0,
        boundary: LatticeBoundary::NoSlip,
    })
    .expect("lattice problem");
    let space = &problem.space;
    let mut config = SchemeConfig::new(FormKind::Emac, TimeScheme::CrankNicolson, 1e-3, 0.0);
    config.newton.abs_tol = 1e-13;
    config.newton.rel_tol = 0.0;
    let integrator = Integrator::new(space, config).expect("integrator");
    let diag = Diagnostics::new(space);
    let e0 = diag.kinetic_energy(&problem.u0);
    let mut state = TransientState::new(problem.u0.clone(), problem.p0.clone(), 0.0);
    let (mut drift, mut div) = (0.0f64, 0.0f64);
    let result = integrator.run(&mut state, 20, |s, r| {
        drift = drift.max((diag.kinetic_energy(&s.u) - e0).abs() / e0);
        div = div.max(r.div_residual);
    });
    Check {
        name: "EMAC + CN conserves energy at zero viscosity",
        passed: result.is_ok() && drift <= 1e-8 && div <= 1e-9,
        detail: match result {
            Ok(()) => format!("relative drift {drift:.3e}, divergence residual {div:.3e} over 20 steps"),
            Err(e) => format!("run failed: {e}"),
        },
    }
}

/// Runs every check.
pub fn run_all() -> Vec<Check> {
    vec![
        check_cancellation(20),
        check_momentum_nullity(10),
        check_jacobian(),
        check_energy_conservation(),
    ]
}
