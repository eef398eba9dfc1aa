use std::process::{Command, Output};

fn fermilab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermilab"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SAMPLE: [&str; 9] = ["sample", "--potential", "x1^2", "--hbar", "0.1", "--trials", "4", "--seed", "99"];

#[test]
fn sampling_is_byte_identical_across_runs_and_thread_counts() {
    let a = fermilab(&SAMPLE);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let mut one_thread = SAMPLE.to_vec();
    one_thread.extend(["--threads", "1"]);
    let b = fermilab(&one_thread);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("# rng=chacha20\n# seed=99\n"));
    // Five points per configuration at ħ = 0.1, μ = 1.
    let rows = text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("sample_id")).count();
    assert_eq!(rows, 4 * 5);
}

#[test]
fn different_seeds_give_different_samples() {
    let a = fermilab(&SAMPLE);
    let mut other = SAMPLE;
    other[8] = "100";
    let b = fermilab(&other);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn variance_report_is_deterministic_under_threading() {
    let args = ["variance", "--mode", "free", "--dim", "2", "--wavenumber", "5", "--grid-step", "0.1"];
    let a = fermilab(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let mut single = args.to_vec();
    single.extend(["--threads", "1"]);
    assert_eq!(a.stdout, fermilab(&single).stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(fermilab(&["--help"]).status.code(), Some(0));
    assert_eq!(fermilab(&["--version"]).status.code(), Some(0));
    assert_eq!(fermilab(&["weyl", "--potential", "x1^2", "--hbar", "0.1"]).status.code(), Some(0));
    // Malformed input.
    assert_eq!(fermilab(&["weyl", "--potential", "x1 +", "--hbar", "0.1"]).status.code(), Some(1));
    assert_eq!(fermilab(&["weyl", "--potential", "x3", "--hbar", "0.1"]).status.code(), Some(1));
    assert_eq!(fermilab(&["weyl", "--potential", "x1^2", "--hbar", "-1"]).status.code(), Some(1));
    assert_eq!(fermilab(&["sample", "--potential", "x1^2"]).status.code(), Some(1));
    assert_eq!(fermilab(&["kernel", "--kind", "airy", "--n", "2"]).status.code(), Some(1));
    assert_eq!(fermilab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(fermilab(&["--threads", "0", "weyl", "--potential", "x1^2"]).status.code(), Some(1));
    // Numerical failure: the eigensolver cannot converge in one sweep.
    let out = fermilab(&[
        "weyl",
        "--potential",
        "x1^2 + x2^2",
        "--dim",
        "2",
        "--hbar",
        "0.05",
        "--dense-cutoff",
        "1",
        "--max-iterations",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn wall_time_goes_to_stderr_and_output_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("fermilab-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("weyl.csv");
    let out = fermilab(&["weyl", "--potential", "x1^2", "--hbar", "0.1", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("wall_time_s="));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("# experiment=weyl\n"));
    assert!(!csv.contains("wall_time"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn every_subcommand_runs_on_a_small_problem() {
    let cases: &[&[&str]] = &[
        &["kernel", "--kind", "edge", "--window", "-1:1:0.5"],
        &["kernel", "--kind", "free", "--n", "2", "--mu", "3", "--window", "-1:1:0.5"],
        &["kernel", "--kind", "projector", "--potential", "x1^2", "--hbar", "0.05", "--window", "-1:1:0.5"],
        &["kernel", "--kind", "projector", "--potential", "x1^2", "--x0", "1", "--window", "-1:1:0.5"],
        &["converge-bulk", "--potential", "x1^2", "--hbar", "0.05", "--probes", "5"],
        &["converge-edge", "--potential", "x1^2", "--hbar", "0.02", "--probes", "5"],
        &["variance", "--potential", "x1^2", "--hbar", "0.05"],
        &["variance", "--mode", "mesoscopic", "--potential", "x1^2", "--hbar", "0.02", "--width", "1"],
        &["seminorm", "--test-function", "indicator"],
        &["seminorm", "--test-function", "custom", "--expr", "1 - x1^2", "--eps", "1,0.5"],
        &["clt", "--potential", "x1^2", "--hbar", "0.05", "--trials", "50", "--seed", "1"],
        &["lln", "--potential", "x1^2", "--hbar", "0.1", "--trials", "10", "--seed", "1"],
        &["tail", "--potential", "x1^2", "--hbar", "0.1", "--trials", "100", "--seed", "1"],
        &["agmon", "--potential", "x1^2"],
    ];
    for args in cases {
        let out = fermilab(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{args:?}");
    }
}
