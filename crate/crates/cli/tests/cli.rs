use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ifm_core::kv::KvDocument;
use ifm_core::model::{ideal_params, probability_table, InterferometerParams};
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(name)
}

fn ifm<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifm"))
        .args(args)
        .output()
        .expect("run ifm")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn kv(text: &str) -> KvDocument {
    KvDocument::parse(text).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const REFERENCE_COUNTS: &str = "detector,config,counts
P1,transparent,3561
P2,transparent,793
P1,black,2073
P2,black,999
D,black,2253
P1,background,215
P2,background,59
D,background,1422
";

#[test]
fn reduce_csv_matches_golden_output() {
    let out = ifm(&[
        "reduce".as_ref(),
        data("reference_counts.csv").as_os_str(),
        "--format".as_ref(),
        "csv".as_ref(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let golden = "\
# object detector: predicted 833.3 +- 46.0003, observed 831 +- 60.6218, pull -0.0302239
object,group,probability,sigma
black,i,0.455392,0.0139679
black,ii,0.230392,0.00884956
black,iii,0.314216,0.0165353
transparent,i,0.820098,0.0203426
transparent,ii,0.179902,0.00775759
";
    assert_eq!(stdout(&out), golden);
}

#[test]
fn doubling_all_counts_keeps_probabilities_and_shrinks_sigmas() {
    let dir = TempDir::new().unwrap();
    let doubled: String = REFERENCE_COUNTS
        .lines()
        .map(|l| match l.rsplit_once(',') {
            Some((head, n)) if n.parse::<u64>().is_ok() => {
                format!("{head},{}\n", 2 * n.parse::<u64>().unwrap())
            }
            _ => format!("{l}\n"),
        })
        .collect();
    let a = ifm(&[
        "reduce".as_ref(),
        write(dir.path(), "a.csv", REFERENCE_COUNTS).as_os_str(),
    ]);
    let b = ifm(&[
        "reduce".as_ref(),
        write(dir.path(), "b.csv", &doubled).as_os_str(),
    ]);
    let (a, b) = (kv(&stdout(&a)), kv(&stdout(&b)));
    for key in [
        "black_p_i",
        "black_p_ii",
        "black_p_iii",
        "trans_p_i",
        "trans_p_ii",
    ] {
        let (va, vb) = (a.require_f64(key).unwrap(), b.require_f64(key).unwrap());
        assert!((va - vb).abs() < 1e-14, "{key}");
        let sigma = format!("{key}_sigma");
        let (sa, sb) = (
            a.require_f64(&sigma).unwrap(),
            b.require_f64(&sigma).unwrap(),
        );
        assert!((sa / sb - 2f64.sqrt()).abs() < 1e-12, "{sigma}: {sa} {sb}");
    }
}

#[test]
fn missing_background_rows_are_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let text: String = REFERENCE_COUNTS
        .lines()
        .filter(|l| !l.contains("background"))
        .map(|l| format!("{l}\n"))
        .collect();
    let out = ifm(&[
        "reduce".as_ref(),
        write(dir.path(), "c.csv", &text).as_os_str(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("background"), "{}", stderr(&out));
}

#[test]
fn malformed_count_tables_are_rejected_with_line_numbers() {
    let dir = TempDir::new().unwrap();
    for (bad, needle) in [
        (
            REFERENCE_COUNTS.replace("P2,black,999", "P2,black,-4"),
            "line 5",
        ),
        (
            REFERENCE_COUNTS.replace("P2,black,999", "P3,black,999"),
            "line 5",
        ),
        (format!("{REFERENCE_COUNTS}D,transparent,3\n"), "line 10"),
    ] {
        let out = ifm(&[
            "reduce".as_ref(),
            write(dir.path(), "m.csv", &bad).as_os_str(),
        ]);
        assert_eq!(code(&out), 1);
        assert!(stderr(&out).contains(needle), "{}", stderr(&out));
    }
}

#[test]
fn inconsistent_object_detector_counts_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let text = REFERENCE_COUNTS.replace("D,black,2253", "D,black,4000");
    let out = ifm(&[
        "reduce".as_ref(),
        write(dir.path(), "d.csv", &text).as_os_str(),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(kv(&stdout(&out)).get("consistent") == Some("false"));
}

#[test]
fn ideal_targets_calibrate_to_the_ideal_instrument() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("params.kv");
    let out = ifm(&[
        "calibrate".as_ref(),
        data("ideal_targets.kv").as_os_str(),
        "--out".as_ref(),
        out_path.as_os_str(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let params =
        InterferometerParams::from_kv(&kv(&fs::read_to_string(&out_path).unwrap())).unwrap();
    let fitted = probability_table(&params).unwrap();
    let ideal = probability_table(&ideal_params()).unwrap();
    for (a, b) in fitted.black.values().iter().zip(ideal.black.values()) {
        assert!((a - b).abs() < 1e-6);
    }
    assert!((params.coherence - 1.0).abs() < 1e-6);

    let manifest = kv(&fs::read_to_string(dir.path().join("params.kv.manifest")).unwrap());
    assert_eq!(manifest.get("command"), Some("calibrate"));
    assert_eq!(manifest.get("input.0.sha256").map(str::len), Some(64));
}

#[test]
fn calibration_above_bound_exits_with_three_and_still_writes_params() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("params.kv");
    let out = ifm(&[
        "calibrate".as_ref(),
        data("calibration_targets.kv").as_os_str(),
        "--out".as_ref(),
        out_path.as_os_str(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(out_path.exists());
    assert!(stderr(&out).contains("exit2_mean"));
}

#[test]
fn simulation_is_reproducible_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let out = ifm(&[
            "simulate".as_ref(),
            "--n".as_ref(),
            "20000".as_ref(),
            "--strategy".as_ref(),
            "purify:2".as_ref(),
            "--composition".as_ref(),
            "binomial".as_ref(),
            "--seed".as_ref(),
            seed.as_ref(),
            "--out".as_ref(),
            path.as_os_str(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read(&path).unwrap()
    };
    let a = run("a.kv", "7");
    let b = run("b.kv", "7");
    let c = run("c.kv", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let manifest = kv(&fs::read_to_string(dir.path().join("a.kv.manifest")).unwrap());
    assert_eq!(manifest.get("seed"), Some("7"));
    assert_eq!(manifest.get("param.strategy"), Some("purify:2"));
}

#[test]
fn simulation_csv_has_group_breakdown_and_pulls() {
    let out = ifm(&["simulate", "--n", "1000", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("group,black,transparent\n"));
    assert!(text.contains("\nquantity,simulated,expected,sigma,pull\n"));
}

#[test]
fn empty_ensembles_and_bad_strategies_are_usage_errors() {
    assert_eq!(code(&ifm(&["simulate", "--n", "0"])), 1);
    assert_eq!(
        code(&ifm(&["simulate", "--n", "10", "--strategy", "purify:0"])),
        1
    );
    assert_eq!(code(&ifm(&["simulate", "--n", "10", "--f", "1.5"])), 1);
    assert_eq!(code(&ifm(&["frobnicate"])), 1);
    assert_eq!(code(&ifm(&["--help"])), 0);
}

#[test]
fn curves_on_a_single_point_grid() {
    let out = ifm(&["curves", "--grid", "0.5:0.5:0.1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows,
        [
            "f_original,f_black_in_ii,sigma_ii,f_trans_in_i,sigma_i",
            "0.5,0.562044,0.0145485,0.643137,0.00901145"
        ]
    );
}

#[test]
fn curves_default_grid_and_svg() {
    let dir = TempDir::new().unwrap();
    let svg = dir.path().join("f.svg");
    let out = ifm(&["curves".as_ref(), "--svg".as_ref(), svg.as_os_str()]);
    assert_eq!(code(&out), 0);
    let rows = stdout(&out).lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 102);
    let drawing = fs::read_to_string(&svg).unwrap();
    assert!(drawing.starts_with("<svg"));
    assert!(drawing.contains("stroke-dasharray"));
    assert_eq!(drawing.matches("<polygon").count(), 2);
}

#[test]
fn undefined_curve_points_are_empty_fields() {
    let dir = TempDir::new().unwrap();
    let probs = write(
        dir.path(),
        "p.kv",
        "black_p_i=0.5\nblack_p_ii=0\nblack_p_iii=0.5\ntrans_p_i=1\ntrans_p_ii=0\n",
    );
    let out = ifm(&[
        "curves".as_ref(),
        "--probs".as_ref(),
        probs.as_os_str(),
        "--grid".as_ref(),
        "0:1:0.5".as_ref(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows: Vec<String> = stdout(&out)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(String::from)
        .collect();
    assert_eq!(rows[0], "0,0,0,1,0");
    assert!(rows[1].starts_with("0.5,,,"), "{}", rows[1]);
    assert_eq!(rows[2], "1,1,0,0,0");
}

#[test]
fn curves_accept_parameter_files() {
    let out = ifm(&[
        "curves".as_ref(),
        "--probs".as_ref(),
        data("ideal_params.kv").as_os_str(),
        "--grid".as_ref(),
        "0.5".as_ref(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // ideal instrument: group ii holds only black objects
    assert!(stdout(&out).lines().last().unwrap().starts_with("0.5,1,0,"));
}

#[test]
fn ideal_likelihood_ratio_is_flagged_unbounded() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("scan");
    let out = ifm(&[
        "optimize".as_ref(),
        "--params".as_ref(),
        data("ideal_params.kv").as_os_str(),
        "--points".as_ref(),
        "64".as_ref(),
        "--out".as_ref(),
        prefix.as_os_str(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("scan-summary.csv")).unwrap();
    assert!(
        summary.contains("\nlikelihood,1,,unbounded,false,0\n"),
        "{summary}"
    );
    let scan = fs::read_to_string(dir.path().join("scan-likelihood.csv")).unwrap();
    assert_eq!(scan.lines().count(), 65);
    assert!(scan.ends_with("1,,unbounded\n"));
    for name in ["enrichment", "correct"] {
        assert!(dir.path().join(format!("scan-{name}.csv")).exists());
    }
    assert!(dir.path().join("scan-summary.csv.manifest").exists());
}

#[test]
fn quiet_suppresses_the_summary_but_not_errors() {
    let path = data("reference_counts.csv");
    let loud = ifm(&["reduce".as_ref(), path.as_os_str()]);
    let quiet = ifm(&["reduce".as_ref(), path.as_os_str(), "-q".as_ref()]);
    assert!(stderr(&loud).contains("object detector"));
    assert!(stderr(&quiet).is_empty());
    assert_eq!(stdout(&loud), stdout(&quiet));
    let failing = ifm(&["--quiet", "reduce", "/nonexistent/counts.csv"]);
    assert_eq!(code(&failing), 1);
    assert!(stderr(&failing).contains("cannot read"));
}

#[test]
fn manifests_replay_to_identical_outputs() {
    let dir = TempDir::new().unwrap();
    let counts = write(dir.path(), "counts.csv", REFERENCE_COUNTS);
    let out_path = dir.path().join("probs.kv");
    let out = ifm(&[
        "reduce".as_ref(),
        counts.as_os_str(),
        "--exact".as_ref(),
        "--out".as_ref(),
        out_path.as_os_str(),
    ]);
    assert_eq!(code(&out), 0);
    let manifest = dir.path().join("probs.kv.manifest");
    let recorded = fs::read_to_string(&manifest).unwrap();
    assert!(recorded.contains("param.propagation=exact"));
    assert!(recorded.contains("output.0.sha256="));

    let replay = ifm(&["replay".as_ref(), manifest.as_os_str()]);
    assert_eq!(code(&replay), 0, "{}", stderr(&replay));
    assert!(stderr(&replay).contains("reproduced 1 output file(s) exactly"));
    assert_eq!(fs::read_to_string(&manifest).unwrap(), recorded);

    fs::write(&counts, REFERENCE_COUNTS.replace("3561", "3562")).unwrap();
    let replay = ifm(&["replay".as_ref(), manifest.as_os_str()]);
    assert_eq!(code(&replay), 1);
    assert!(stderr(&replay).contains("differs from the recorded run"));
}

#[test]
fn simulation_with_builtin_table_replays() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("sim.csv");
    let out = ifm(&[
        "simulate".as_ref(),
        "--n".as_ref(),
        "5000".as_ref(),
        "--format".as_ref(),
        "csv".as_ref(),
        "--out".as_ref(),
        out_path.as_os_str(),
    ]);
    assert_eq!(code(&out), 0);
    let manifest = dir.path().join("sim.csv.manifest");
    assert!(fs::read_to_string(&manifest)
        .unwrap()
        .contains("input.0.path=builtin:reference-table"));
    let replay = ifm(&["-q".as_ref(), "replay".as_ref(), manifest.as_os_str()]);
    assert_eq!(code(&replay), 0, "{}", stderr(&replay));
}

#[test]
fn default_curve_grid_reaches_the_reference_enrichment() {
    let out = ifm(&["curves"]);
    let text = stdout(&out);
    let row = text.lines().find(|l| l.starts_with("0.5,")).unwrap();
    assert!(row.starts_with("0.5,0.562"), "{row}");
    assert!(text.lines().any(|l| l.starts_with("0,0,0,")));
    assert!(text.lines().last().unwrap().starts_with("1,1,0,"));
}

#[test]
fn ideal_curve_is_one_above_zero_and_zero_at_zero() {
    let out = ifm(&[
        "curves".as_ref(),
        "--probs".as_ref(),
        data("ideal_params.kv").as_os_str(),
        "--grid".as_ref(),
        "0:1:0.25".as_ref(),
    ]);
    let text = stdout(&out);
    let black: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(black, ["0", "1", "1", "1", "1"]);
}

#[test]
fn one_point_scan_returns_that_point() {
    let out = ifm(&[
        "optimize".as_ref(),
        "--params".as_ref(),
        data("ideal_params.kv").as_os_str(),
        "--objective".as_ref(),
        "correct".as_ref(),
        "--points".as_ref(),
        "1".as_ref(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(
        stdout(&out).contains("\ncorrect,1,0.875,finite,false,0\n"),
        "{}",
        stdout(&out)
    );
}
