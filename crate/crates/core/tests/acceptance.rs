//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed.
//! The cylinder benchmark (criterion 9) takes hours and only runs when
//! `--ignored` or `--include-ignored` is passed; its failure is a warning.
//!
//! Bare numeric arguments select criteria (`-- 5 6`). Criterion 7 reads
//! the outputs of criterion 6, and criterion 10 covers the runs made in
//! the same invocation.
//!
//! Run outputs are kept under `$CARGO_TARGET_TMPDIR/acceptance/`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use emaclab::assembly::{assemble_mass, eval_trilinear, nonlinear_jacobian, nonlinear_residual, FormKind};
use emaclab::bench::config::shipped_mesh;
use emaclab::bench::output::CsvTable;
use emaclab::bench::{build_problem, run, LatticeBoundary, LatticeVortex, ProblemSpec, RunConfig};
use emaclab::diagnostics::{energy_lower_bound, momentum_lower_bound, Diagnostics};
use emaclab::fespace::FieldCoeffs;
use emaclab::timestep::{Integrator, SchemeConfig, TimeScheme, TransientState};
use emaclab::verify::{natural_square, no_slip_square, random_field, trilinear_scale};

const KH_RE: f64 = 100.0;
const DIV_TOL: f64 = 1e-9;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn out_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn run_config(name: &str, body: &str) -> RunConfig {
    let text = format!("{body}\noutput_dir = {}\n", out_dir(name).display());
    RunConfig::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Largest divergence residual over every step of the runs checked by
/// criterion 10, with the run that produced it.
#[derive(Default)]
struct DivTracker {
    worst: f64,
    source: String,
    runs: usize,
}

impl DivTracker {
    fn add(&mut self, name: &str, table: &CsvTable) {
        let d = table.column("div_residual").expect("div_residual column");
        let m = d.iter().fold(0.0f64, |m, v| m.max(*v));
        if m >= self.worst {
            self.worst = m;
            self.source = name.to_string();
        }
        self.runs += 1;
    }
}

/// Runs `config`, keeping the rows written before a failed step. Returns a
/// note when the run stopped early.
fn run_to_end(config: &RunConfig) -> Option<String> {
    match run(config) {
        Ok(_) => None,
        Err(e @ emaclab::bench::BenchError::Step(_)) => Some(e.to_string()),
        Err(e) => panic!("{}: {e}", config.output_dir.display()),
    }
}

fn csv_of(name: &str) -> CsvTable {
    let path = out_dir(name).join("diagnostics.csv");
    CsvTable::parse(&std::fs::read_to_string(&path).expect("csv")).expect("parse csv")
}

fn criterion1() -> Outcome {
    let space = no_slip_square(8);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut emac, mut skew) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let u = random_field(&space, &mut rng);
        let v = random_field(&space, &mut rng);
        emac = emac.max(eval_trilinear(&space, FormKind::Emac, &v, &v, &v).abs() / trilinear_scale(&space, &v, &v, &v));
        skew = skew.max(eval_trilinear(&space, FormKind::Skew, &u, &v, &v).abs() / trilinear_scale(&space, &u, &v, &v));
    }
    outcome(
        emac <= 1e-12 && skew <= 1e-12,
        format!("max scaled |c(v,v,v)| = {emac:.2e}, |b*(u,v,v)| = {skew:.2e} (tol 1e-12, 100 samples, n=8)"),
    )
}

fn criterion2() -> Outcome {
    let space = no_slip_square(16);
    let nat = natural_square(16);
    let ws = [
        nat.interpolate_velocity(|_| [1.0, 0.0]),
        nat.interpolate_velocity(|_| [0.0, 1.0]),
        nat.interpolate_velocity(|p| [-p[1], p[0]]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut emac, mut hits) = (0.0f64, 0);
    for _ in 0..20 {
        let u = random_field(&space, &mut rng);
        let mut s = 0.0f64;
        for w in &ws {
            let scale = trilinear_scale(&space, &u, &u, w);
            emac = emac.max(eval_trilinear(&space, FormKind::Emac, &u, &u, w).abs() / scale);
            s = s.max(eval_trilinear(&space, FormKind::Skew, &u, &u, w).abs() / scale);
        }
        if s > 1e-6 {
            hits += 1;
        }
    }
    outcome(
        emac <= 1e-12 && hits >= 15,
        format!("EMAC max scaled |c(u,u,w)| = {emac:.2e} (tol 1e-12); SKEW > 1e-6 on {hits}/20 fields (need 15)"),
    )
}

fn criterion3(div: &mut DivTracker) -> Outcome {
    let name = "c3-energy";
    let config = run_config(
        name,
        "problem = lattice_vortex\nn = 16\nnu = 0\nlattice_boundary = noslip\nform = emac\nscheme = cn\ndt = 0.001\nt_end = 0.1",
    );
    let problem = build_problem(&config.problem).expect("problem");
    let e0 = Diagnostics::new(&problem.space).kinetic_energy(&problem.u0);
    run(&config).expect("run");
    let table = csv_of(name);
    div.add(name, &table);
    let drift = table
        .column("E")
        .unwrap()
        .iter()
        .fold(0.0f64, |m, e| m.max((e - e0).abs() / e0));
    outcome(
        drift <= 1e-8,
        format!("relative energy drift {drift:.2e} over 100 steps (tol 1e-8)"),
    )
}

fn criterion4() -> Outcome {
    let space = natural_square(8);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let u = random_field(&space, &mut rng);
    let d = random_field(&space, &mut rng);
    let eps = 1e-6;
    let mut parts = Vec::new();
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
            num += ((rp[k] - rm[k]) / (2.0 * eps) - jd[k]).powi(2);
            den += jd[k].powi(2);
        }
        let rel = (num / den).sqrt();
        worst = worst.max(rel);
        parts.push(format!("{form} {rel:.1e}"));
    }
    outcome(
        worst <= 1e-6,
        format!("central-difference relative error: {} (tol 1e-6)", parts.join(", ")),
    )
}

fn l2_diff(mass: &emaclab::assembly::sparse::CsrMatrix, a: &FieldCoeffs, b: &FieldCoeffs) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    mass.bilinear(&d.values, &d.values).sqrt()
}

fn criterion5(div: &mut DivTracker) -> Outcome {
    // spatial: final-time L2 error against the exact solution
    let mut errs = Vec::new();
    for n in [8, 16, 32] {
        let name = format!("c5-space-n{n}");
        let config = run_config(
            &name,
            &format!("problem = lattice_vortex\nn = {n}\nnu = 0.01\nform = emac\nscheme = cn\ndt = 0.00025\nt_end = 0.25"),
        );
        run(&config).expect("run");
        let table = csv_of(&name);
        div.add(&name, &table);
        errs.push(*table.column("L2err").unwrap().last().unwrap());
    }
    let spatial: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();

    // temporal on n = 32: successive differences cancel the spatial error
    let problem = build_problem(&ProblemSpec::LatticeVortex {
        n: 32,
        nu: 0.01,
        boundary: LatticeBoundary::Exact,
    })
    .expect("problem");
    let exact = problem.exact.unwrap();
    let mass = assemble_mass(&problem.space);
    let dts = [0.01, 0.005, 0.0025];
    let mut finals = Vec::new();
    let mut exact_errs = Vec::new();
    let mut div_t = 0.0f64;
    for dt in dts {
        let cfg = SchemeConfig::new(FormKind::Emac, TimeScheme::CrankNicolson, dt, 0.01);
        let integ = Integrator::new(&problem.space, cfg).expect("integrator");
        let mut st = TransientState::new(problem.u0.clone(), problem.p0.clone(), 0.0);
        integ
            .run(&mut st, integ.steps_between(0.0, 0.25), |_, r| div_t = div_t.max(r.div_residual))
            .expect("run");
        let (l2, _) = emaclab::diagnostics::error_norms(&problem.space, &st.u, &exact.at(0.25));
        exact_errs.push(l2);
        finals.push(st.u);
    }
    if div_t > div.worst {
        div.worst = div_t;
        div.source = "c5-time".into();
    }
    let d1 = l2_diff(&mass, &finals[0], &finals[1]);
    let d2 = l2_diff(&mass, &finals[1], &finals[2]);
    let temporal = (d1 / d2).log2();
    let vs_exact: Vec<String> = exact_errs.iter().map(|e| format!("{e:.3e}")).collect();
    outcome(
        spatial.iter().all(|o| *o >= 2.7) && temporal >= 1.9,
        format!(
            "L2 errors {:.3e}, {:.3e}, {:.3e} -> orders {:.2}, {:.2} (need 2.7); CN self-convergence order {temporal:.2} \
             from dt = 0.01, 0.005, 0.0025 (need 1.9); errors vs exact {} are spatially dominated",
            errs[0],
            errs[1],
            errs[2],
            spatial[0],
            spatial[1],
            vs_exact.join(", ")
        ),
    )
}

fn lattice_body(form: &str) -> String {
    format!("problem = lattice_vortex\nn = 32\nnu = 1e-5\nform = {form}\nscheme = cn\ndt = 0.002\nt_end = 5")
}

fn criterion6(div: &mut DivTracker) -> Outcome {
    let mut stats = Vec::new();
    let mut notes = String::new();
    for form in ["emac", "skew"] {
        let name = format!("c6-{form}");
        let stopped = run_to_end(&run_config(&name, &lattice_body(form)));
        let table = csv_of(&name);
        div.add(&name, &table);
        let t_last = *table.column("t").unwrap().last().unwrap();
        // a run that cannot reach the final time has no finite final error
        let l2 = match &stopped {
            None => *table.column("L2err").unwrap().last().unwrap(),
            Some(e) => {
                notes.push_str(&format!("; {form} stopped after t = {t_last}: {e}"));
                f64::INFINITY
            }
        };
        let mang = table.column("Mang").unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        stats.push((l2, mang, stopped.is_none()));
    }
    let [(l2e, me, emac_ok), (l2s, ms, _)] = [stats[0], stats[1]];
    outcome(
        emac_ok && l2e < l2s && ms >= 10.0 * me,
        format!(
            "final L2 error EMAC {l2e:.3e} vs SKEW {l2s:.3e}; max |M_x| EMAC {me:.3e} vs SKEW {ms:.3e} (ratio {:.1}, need 10){notes}",
            ms / me
        ),
    )
}

fn criterion7() -> Outcome {
    let exact = LatticeVortex { nu: 1e-5 };
    let mut details = Vec::new();
    let mut violations = 0;
    for form in ["emac", "skew"] {
        let table = csv_of(&format!("c6-{form}"));
        let (t, e, mx, my, l2) = (
            table.column("t").unwrap(),
            table.column("E").unwrap(),
            table.column("Mx").unwrap(),
            table.column("My").unwrap(),
            table.column("L2err").unwrap(),
        );
        let (mut vm, mut ve, mut worst_ratio) = (0, 0, 0.0f64);
        for i in 0..t.len() {
            // the exact lattice vortex has zero momentum on the unit square
            let bm = momentum_lower_bound([mx[i], my[i]], 1.0);
            let be = energy_lower_bound(exact.energy(t[i]), e[i]);
            vm += usize::from(bm > l2[i]);
            ve += usize::from(be > l2[i]);
            worst_ratio = worst_ratio.max(bm.max(be) / l2[i]);
        }
        violations += vm + ve;
        details.push(format!(
            "{form}: {vm} momentum and {ve} energy violations over {} rows, max bound/error {worst_ratio:.3}",
            t.len()
        ));
    }
    outcome(violations == 0, details.join("; "))
}

fn criterion8(div: &mut DivTracker) -> Outcome {
    let problem = build_problem(&ProblemSpec::KelvinHelmholtz { n: 64, re: KH_RE }).expect("problem");
    let diag = Diagnostics::new(&problem.space);
    let m0 = diag.momentum(&problem.u0);
    let e0 = diag.kinetic_energy(&problem.u0);
    drop(diag);
    let mut drifts = Vec::new();
    let mut energy_rise = 0.0f64;
    let mut tol = 0.0;
    let mut stopped = Vec::new();
    for form in ["emac", "skew"] {
        let name = format!("c8-{form}");
        let config = run_config(
            &name,
            &format!("problem = kelvin_helmholtz\nn = 64\nre = {KH_RE}\nform = {form}\nscheme = bdf2\ndt = 0.002\nt_end = 5"),
        );
        tol = config.scheme.newton.abs_tol;
        if let Some(e) = run_to_end(&config) {
            stopped.push((form, format!("{form} stopped: {e}")));
        }
        let table = csv_of(&name);
        div.add(&name, &table);
        let (mx, my) = (table.column("Mx").unwrap(), table.column("My").unwrap());
        let drift = mx
            .iter()
            .zip(&my)
            .fold(0.0f64, |m, (x, y)| m.max((x - m0[0]).hypot(y - m0[1])));
        drifts.push(drift);
        if form == "emac" {
            let mut prev = e0;
            for e in table.column("E").unwrap() {
                energy_rise = energy_rise.max(e - prev);
                prev = e;
            }
        }
    }
    let (de, ds) = (drifts[0], drifts[1]);
    outcome(
        stopped.iter().all(|(f, _)| *f != "emac") && de <= 1e-8 && ds >= de && energy_rise <= 10.0 * tol,
        format!(
            "max |M - M(0)| EMAC {de:.2e} (tol 1e-8), SKEW {ds:.2e}; largest EMAC energy increase {energy_rise:.2e} (tol {:.0e}){}",
            10.0 * tol,
            stopped.iter().map(|(_, s)| format!("; {s}")).collect::<String>()
        ),
    )
}

fn criterion9() -> Outcome {
    let name = "c9-cylinder";
    let config = run_config(
        name,
        &format!(
            "problem = cylinder\nmesh_file = {}\nform = emac\nscheme = bdf2\ndt = 0.002\nt_end = 10\nstats_start = 7",
            shipped_mesh("cylinder-coarse.msh").display()
        ),
    );
    let result = run(&config).expect("run");
    let s = result.summary.expect("lift/drag summary");
    let (cd_ref, cl_ref) = (3.29116, 2.14404);
    let (ecd, ecl) = ((s.cd_max - cd_ref).abs() / cd_ref, (s.cl_max - cl_ref).abs() / cl_ref);
    outcome(
        ecd <= 0.10 && ecl <= 0.15,
        format!(
            "cd_max {:.5} ({:.1}% off 3.29116, tol 10%), cl_max {:.5} ({:.1}% off 2.14404, tol 15%)",
            s.cd_max,
            100.0 * ecd,
            s.cl_max,
            100.0 * ecl
        ),
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let with_cylinder = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");
    // `cargo test -- --list` and filters used by other targets: nothing to do
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    // bare numbers select criteria, as in `-- 5 7`; no selection runs all
    let selected: Vec<u32> = args.iter().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| selected.is_empty() || selected.contains(&n);
    let started = Instant::now();
    let mut div = DivTracker::default();
    let mut failed = Vec::new();
    let mut report = |n: u32, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {n}: {} {} [{:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.passed {
            failed.push(n);
        }
    };
    report(1, &mut criterion1);
    report(2, &mut criterion2);
    report(3, &mut || criterion3(&mut div));
    report(4, &mut criterion4);
    report(5, &mut || criterion5(&mut div));
    report(6, &mut || criterion6(&mut div));
    report(7, &mut criterion7);
    report(8, &mut || criterion8(&mut div));
    report(10, &mut || {
        outcome(
            div.worst <= DIV_TOL,
            format!(
                "max divergence residual {:.2e} over every step of {} runs (worst in {}, tol 1e-9)",
                div.worst, div.runs, div.source
            ),
        )
    });
    if with_cylinder && wanted(9) {
        let t = Instant::now();
        let o = criterion9();
        println!(
            "criterion 9: {} {} [{:.1} s]",
            if o.passed { "PASS" } else { "WARN" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    } else if wanted(9) {
        println!("criterion 9: NOT RUN (hours; pass --ignored to run it; a failure is a warning only)");
    }
    println!("acceptance finished in {:.1} s", started.elapsed().as_secs_f64());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
