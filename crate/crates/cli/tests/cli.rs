use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use quasilocal_core::grid::LatLonGrid;
use quasilocal_core::io::SurfaceFile;
use quasilocal_core::surface::{HSource, SurfaceSpec};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn quasilocal(args: &[&str], input: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasilocal"))
        .args(args)
        .arg("--input")
        .arg(input)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn small<'a>(cmd: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd, "--ntheta", "16", "--npsi", "16", "--steps", "100"];
    v.extend_from_slice(extra);
    v
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report_value(dir: &Path, key: &str) -> Option<String> {
    let text = fs::read_to_string(dir.join("report.txt")).unwrap();
    text.lines().find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
}

#[test]
fn verify_with_matching_mean_curvature_passes_with_zero_mass() {
    let dir = tempfile::tempdir().unwrap();
    let o = quasilocal(&small("verify", &[]), &data("round_sphere_reference.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report_value(dir.path(), "verify.passed").as_deref(), Some("true"));
    let csv = fs::read_to_string(dir.path().join("mass.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mass_cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with('m')).collect();
    assert!(!mass_cols.is_empty());
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        for &i in &mass_cols {
            assert_eq!(cells[i].parse::<f64>().unwrap(), 0.0, "{line}");
        }
    }
}

#[test]
fn axisymmetric_strategy_on_a_rotating_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let grid = LatLonGrid::new(16, 16).unwrap();
    let mut g_pp = Vec::new();
    for (_, _, th, ps) in grid.nodes() {
        g_pp.push((th.sin() * (1.0 + 0.1 * th.sin() * th.sin() * ps.cos())).powi(2));
    }
    let spec =
        SurfaceSpec::from_grid(grid, vec![1.0; 256], vec![0.0; 256], g_pp, HSource::ReferenceScaled { scale: 1.0 })
            .unwrap();
    let input = dir.path().join("lumpy.toml");
    fs::write(&input, SurfaceFile::from_spec(&spec, Some(1.0)).to_toml().unwrap()).unwrap();
    let o = quasilocal(&["embed", "--strategy", "axisymmetric"], &input, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("axisymmetric"), "{}", stderr(&o));
}

#[test]
fn inadmissible_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("deep.toml");
    fs::write(
        &input,
        "kind = \"preset\"\n[preset]\nname = \"band\"\nparams = { depth = 0.6, scale = 1.0 }\n\
         [hsource]\ntype = \"reference_scaled\"\n",
    )
    .unwrap();
    let o = quasilocal(&["embed", "--kappa", "0.05"], &input, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("admissibility"));
    assert_eq!(report_value(dir.path(), "admissibility.pass").as_deref(), Some("false"));
    assert!(!dir.path().join("embedding.tsv").exists());
}

#[test]
fn missing_input_exits_4_and_bad_options_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = quasilocal(&["embed"], &dir.path().join("absent.toml"), dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("absent.toml"));
    let o = quasilocal(&["embed", "--csv-stride", "0"], &data("spheroid.toml"), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = quasilocal(&["embed", "--strategy", "guess"], &data("spheroid.toml"), dir.path());
    assert_eq!(o.status.code(), Some(1));
}

const ARTEFACTS: [&str; 6] = ["report.txt", "embedding.tsv", "foliation.csv", "u.csv", "w.csv", "mass.csv"];

#[test]
fn reruns_are_bit_identical_and_hit_the_cache() {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    let args = small("report", &[]);
    let first = quasilocal(&args, &data("spheroid.toml"), &a);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert!(stderr(&first).contains("cache u: Miss"));
    let saved: Vec<Vec<u8>> = ARTEFACTS.iter().map(|f| fs::read(a.join(f)).unwrap()).collect();

    let again = quasilocal(&args, &data("spheroid.toml"), &a);
    assert_eq!(again.status.code(), Some(0));
    for stage in ["embedding", "u", "w"] {
        assert!(stderr(&again).contains(&format!("cache {stage}: Hit")), "{}", stderr(&again));
    }
    assert_eq!(first.stdout, again.stdout);

    let mut uncached = args.clone();
    uncached.push("--no-cache");
    let fresh = quasilocal(&uncached, &data("spheroid.toml"), &b);
    assert_eq!(fresh.status.code(), Some(0));
    assert!(!b.join("cache").exists());
    for (f, bytes) in ARTEFACTS.iter().zip(&saved) {
        assert_eq!(&fs::read(a.join(f)).unwrap(), bytes, "{f} changed on a cached rerun");
        assert_eq!(&fs::read(b.join(f)).unwrap(), bytes, "{f} differs without the cache");
    }
}

#[test]
fn changing_the_config_changes_the_hash_and_misses() {
    let dir = tempfile::tempdir().unwrap();
    let o = quasilocal(&small("solve-u", &[]), &data("band.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let h1 = report_value(dir.path(), "config.hash").unwrap();
    let o = quasilocal(&small("solve-u", &["--rmax", "6"]), &data("band.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("cache embedding: Hit"));
    assert!(stderr(&o).contains("cache u: Miss"));
    assert_ne!(report_value(dir.path(), "config.hash").unwrap(), h1);
}

#[test]
fn subcommands_write_their_stage_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let expect: [(&str, &[&str]); 4] = [
        ("embed", &["embedding.tsv", "report.txt"]),
        ("foliate", &["foliation.csv"]),
        ("solve-w", &["u.csv", "w.csv"]),
        ("mass", &["mass.csv"]),
    ];
    for (cmd, files) in expect {
        let out = dir.path().join(cmd);
        let o = quasilocal(&small(cmd, &[]), &data("round_sphere.toml"), &out);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        for f in files {
            assert!(out.join(f).exists(), "{cmd} did not write {f}");
        }
    }
    let mass = dir.path().join("mass");
    assert_eq!(report_value(&mass, "mass.P_class").as_deref(), Some("future_timelike"));
}

#[test]
fn general_strategy_runs_on_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "--ntheta", "12", "--npsi", "12", "--steps", "100", "--strategy", "general"];
    let o = quasilocal(&args, &data("spheroid.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report_value(dir.path(), "config.strategy").as_deref(), Some("general"));
}
