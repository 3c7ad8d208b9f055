use std::process::{Command, Output};

fn semeq(args: &[&str], dir: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semeq")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(semeq(&["--help"], p).status.code(), Some(0));
    assert_eq!(semeq(&["bogus"], p).status.code(), Some(1));
    assert_eq!(semeq(&["sweep-pilots", "--scenario", "mismatch", "--d", "7"], p).status.code(), Some(1));
    assert_eq!(semeq(&["sweep-pilots", "--pilots", "zero"], p).status.code(), Some(1));
    assert_eq!(semeq(&["sweep-pilots", "--config", "missing.cfg"], p).status.code(), Some(1));
    let out = semeq(&["eval", "--scenario", "mismatch", "--d", "8", "--model", "missing.eq"], p);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn params_accepts_other_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = semeq(&["params", "--d", "4", "--m", "2", "--channels", "3", "--channels-out", "1"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    let count = |arch: &str| {
        let line = text.lines().find(|l| l.starts_with(arch)).unwrap();
        line.split_whitespace().last().unwrap().replace(',', "").parse::<usize>().unwrap()
    };
    assert_eq!(count("linear"), 8);
    assert_eq!(count("mlp"), 4 * 4 + 4 + 4 * 2 + 2 + 1);
    assert_eq!(count("cnn1"), 3 * 25 + 1);
    assert_eq!(count("cnn2"), 3 * 3 * 25 + 3 + 3 * 25 + 1 + 1);
}

#[test]
fn gen_fit_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let common = ["--scenario", "mismatch", "--family", "orthogonal", "--d", "8", "--eval-count", "20"];
    let run = |extra: &[&str]| {
        let args: Vec<&str> = extra.iter().chain(common.iter()).copied().collect();
        let out = semeq(&args, p);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        stdout(&out)
    };
    run(&["gen", "--pilots", "32", "--out-dir", "."]);
    assert!(p.join("pilots.seql").exists() && p.join("eval.seql").exists());
    run(&[
        "fit",
        "--equalizer",
        "linear",
        "--pilots",
        "32",
        "--snr-align",
        "inf",
        "--pilot-file",
        "pilots.seql",
        "--out",
        "lin.eq",
    ]);
    let report = run(&["eval", "--snr-eval", "inf", "--model", "lin.eq", "--eval-file", "eval.seql"]);
    let psnr: f64 = report.split_whitespace().find_map(|kv| kv.strip_prefix("mean_psnr_db=")).unwrap().parse().unwrap();
    // 32 noiseless pilots pin down an 8×8 map; f32 storage limits the rest
    assert!(psnr > 60.0, "{report}");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("exp.cfg"),
        "# small sweep\nscenario = mismatch\nd = 8\nequalizer = none, linear\npilots = 8, 16\nseed = 1\neval_count = 10\n",
    )
    .unwrap();
    let out = semeq(&["sweep-snr", "--config", "exp.cfg", "--snr-align", "0,20", "--output", "out.csv"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(p.join("out.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("equalizer,n_pilots,snr_align_db"));
    // 2 equalizers × 2 SNRs at the largest N, one seed row and one mean row each
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(1) == Some("16")));

    let bad = semeq(&["sweep-snr", "--config", "exp.cfg", "--equalizer", "magic"], p);
    assert_eq!(bad.status.code(), Some(1));
}
