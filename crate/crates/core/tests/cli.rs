use std::io::Cursor;
use std::process::{Command, Output};

use sfwg::mesh::{build_polygonal, load_mesh, validate};
use sfwg::study::{parse_provenance, MeshFamily, OutputFormat, CSV_HEADER};

fn sfwg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfwg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn study_csv_rates_recompute_from_file() {
    let o = sfwg(&["study", "--example", "1", "--k", "2", "--levels", "2,4,8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows[0].join(","), CSV_HEADER);
    assert_eq!(rows.len(), 4);
    assert!(rows[1][3].is_empty() && rows[1][5].is_empty() && rows[1][7].is_empty());
    let num = |s: &str| s.parse::<f64>().unwrap();
    for i in 2..rows.len() {
        let dh = (num(rows[i - 1][1]) / num(rows[i][1])).ln();
        for (err, rate) in [(2, 3), (4, 5), (6, 7)] {
            let expect = (num(rows[i - 1][err]) / num(rows[i][err])).ln() / dh;
            assert_eq!(num(rows[i][rate]), expect, "row {i} column {rate}");
        }
    }
}

#[test]
fn provenance_reproduces_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.md");
    let o = sfwg(&[
        "study", "--example", "2", "--mesh", "poly", "--k", "3", "--levels", "2,3", "--tol", "1e-11", "--format",
        "markdown", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let cfg = parse_provenance(&text).unwrap();
    assert_eq!(cfg.example, 2);
    assert_eq!(cfg.mesh, MeshFamily::Polygonal);
    assert_eq!((cfg.k, cfg.j), (3, Some(7)));
    assert_eq!(cfg.levels, vec![2, 3]);
    assert_eq!(cfg.tol, 1e-11);
    assert_eq!(cfg.format, OutputFormat::Markdown);
    assert_eq!(text.lines().filter(|l| l.starts_with("| ")).count(), 3);
}

#[test]
fn config_errors_exit_2() {
    for args in [
        vec!["study", "--k", "1"],
        vec!["study", "--k", "3", "--j", "3"],
        vec!["study", "--levels", "4,2"],
        vec!["study", "--example", "5"],
        vec!["study", "--mesh", "hex"],
        vec!["study", "--format", "json"],
        vec!["study", "--mesh", "file:/nonexistent/mesh.txt"],
        vec!["study", "--workers", "0"],
        vec!["solve", "--n", "0"],
        vec!["mesh", "--family", "poly", "--n", "1"],
        vec!["study", "--no-such-flag"],
    ] {
        let o = sfwg(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn solver_failure_exits_3_with_partial_report() {
    let o = sfwg(&["study", "--levels", "1,2", "--tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.contains("# failed at n=1"));
    assert_eq!(text.lines().last().unwrap(), CSV_HEADER);
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed"));
}

#[test]
fn solve_prints_key_values() {
    let o = sfwg(&["solve", "--example", "1", "--k", "2", "--n", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let get = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}=")))
            .unwrap_or_else(|| panic!("{key} missing"))
            .to_string()
    };
    assert_eq!(get("j"), "4");
    assert_eq!(get("cells"), "128");
    let e: f64 = get("err_triple").parse().unwrap();
    assert!((e / 9.57e-3 - 1.0).abs() < 1e-3, "{e}");
}

#[test]
fn mesh_dump_round_trips() {
    let o = sfwg(&["mesh", "--family", "poly", "--n", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let loaded = load_mesh(Cursor::new(o.stdout)).unwrap();
    let built = build_polygonal(4).unwrap();
    assert!(validate(&loaded).is_empty());
    assert_eq!(loaded.vertices, built.vertices);
    assert_eq!(loaded.num_cells(), built.num_cells());
    assert_eq!(loaded.h, built.h);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tri.txt");
    assert_eq!(sfwg(&["mesh", "--n", "2", "--out", path.to_str().unwrap()]).status.code(), Some(0));
    let mesh_arg = format!("file:{}", path.display());
    let o = sfwg(&["solve", "--mesh", &mesh_arg, "--k", "2", "--j", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let direct = sfwg(&["solve", "--n", "2", "--k", "2"]);
    let errs = |o: &Output| stdout(o).lines().filter(|l| l.starts_with("err_")).map(String::from).collect::<Vec<_>>();
    assert_eq!(errs(&o), errs(&direct));
}
