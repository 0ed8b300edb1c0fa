//! Artifact contract of `bench::run`: CSV shape, determinism, manifest
//! completeness and fail-fast configuration errors.

use std::fs;

use emaclab::bench::output::{csv_columns, CsvTable};
use emaclab::bench::run::{CSV_FILE, MANIFEST_FILE};
use emaclab::bench::{run, BenchError, RunConfig};
use emaclab::mesh::{generate_unit_square, write_mesh};

fn lattice_config(dir: &std::path::Path, extra: &str) -> RunConfig {
    RunConfig::parse(&format!(
        "problem = lattice_vortex\nn = 8\nnu = 0.01\nform = emac\nscheme = cn\ndt = 0.01\nt_end = 0.1\noutput_dir = {}\n{extra}",
        dir.display()
    ))
    .unwrap()
}

#[test]
fn lattice_run_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&lattice_config(dir.path(), "")).unwrap();
    let text = fs::read_to_string(dir.path().join(CSV_FILE)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[0], csv_columns(true, false).join(","));
    assert_eq!(out.records.len(), 10);
    let table = CsvTable::parse(&text).unwrap();
    for (k, row) in table.rows.iter().enumerate() {
        assert!((row[0] - 0.01 * (k + 1) as f64).abs() < 1e-15);
        // E, enstrophy, div_residual are nonnegative
        assert!(row[1] >= 0.0 && row[2] >= 0.0 && row[6] >= 0.0);
    }
    // every float field carries 17 significant digits
    for field in lines[1].split(',').filter(|f| f.contains('e')) {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
}

#[test]
fn rerun_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&lattice_config(a.path(), "")).unwrap();
    run(&lattice_config(b.path(), "")).unwrap();
    let read = |d: &tempfile::TempDir| fs::read(d.path().join(CSV_FILE)).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn manifest_reproduces_the_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let config = lattice_config(dir.path(), "snapshot_interval = 5\ndiagnostics_interval = 2");
    let out = run(&config).unwrap();
    let manifest = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(manifest.starts_with("# emaclab "));
    assert_eq!(RunConfig::parse(&manifest).unwrap(), config);
    assert_eq!(out.records.len(), 5);
    assert_eq!(out.snapshot_paths.len(), 3);
    for p in &out.snapshot_paths {
        assert!(fs::read_to_string(p).unwrap().starts_with("# vtk DataFile Version 3.0"));
    }
}

#[test]
fn cylinder_on_square_mesh_fails_before_stepping() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = dir.path().join("square.msh");
    fs::write(&mesh_path, write_mesh(&generate_unit_square(4))).unwrap();
    let out_dir = dir.path().join("out");
    let config = RunConfig::parse(&format!(
        "problem = cylinder\nmesh_file = {}\ndt = 0.01\nt_end = 0.1\noutput_dir = {}",
        mesh_path.display(),
        out_dir.display()
    ))
    .unwrap();
    match run(&config) {
        Err(BenchError::Config(msg)) => assert!(msg.contains("cylinder"), "{msg}"),
        other => panic!("expected a configuration error, got {other:?}"),
    }
    assert!(!out_dir.exists());
}

#[test]
fn cylinder_run_reports_lift_and_drag() {
    let dir = tempfile::tempdir().unwrap();
    let config = emaclab::bench::preset("cylinder-desk")
        .unwrap()
        .with_overrides(&[
            "t_end=0.01".to_string(),
            "stats_start=0".to_string(),
            format!("output_dir={}", dir.path().display()),
        ])
        .unwrap();
    let out = run(&config).unwrap();
    let table = CsvTable::parse(&fs::read_to_string(&out.csv_path).unwrap()).unwrap();
    assert_eq!(table.columns, csv_columns(false, true));
    let cd = table.column("cd").unwrap();
    // no BDF2 history exists after the first step
    assert!(cd[0].is_nan());
    assert!(cd[1..].iter().all(|v| v.is_finite()));
    let s = out.summary.unwrap();
    assert!(s.cd_max.is_finite() && s.cl_max.is_finite());
}
