use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fusionbench::csvio::{read_bench_csv, read_confusion_csv, read_epochs_csv, read_params_csv, read_records};
use fusionbench::synth::SUMMARY_CSV_HEADER;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fusionbench"));
    c.env_remove("FUSIONBENCH_SEED");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const TINY: &str = "seed = 4\n\n[model]\nn_img = 3\nn_txt = 3\nproj = none\nhidden = 4\nclasses = 2\n\n\
[fusion]\nkind = elementwise, mcb, mutan\nmcb_d = 5\nt_q = 2\nt_v = 2\nt_o = 3\nrank = 2\n\n\
[task]\nn_q = 3\nn_v = 3\nclasses = 2\nrank = 1\nn_train = 20\nn_test = 10\n\n[train]\nepochs = 3\nbatch = 8\n";

#[test]
fn missing_config_is_exit_2_naming_path() {
    let out = bin().args(["params", "/no/such/run.cfg"]).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(text(&out.stderr).contains("/no/such/run.cfg"));
}

#[test]
fn bad_config_key_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, format!("{TINY}\nmomentum = 0.5\n")).unwrap();
    let out = bin().arg("params").arg(&path).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(text(&out.stderr).contains("momentum"));
}

#[test]
fn zero_trials_is_exit_2() {
    let out = bin().args(["gradcheck", "--trials", "0"]).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn params_needs_a_source() {
    assert_eq!(code(&bin().arg("params").output().unwrap()), 2);
    assert_eq!(code(&bin().args(["params", "--table", "xr"]).output().unwrap()), 2);
}

#[test]
fn params_single_config_round_trips() {
    let out = bin().arg("params").arg(config("lr-mutan.cfg")).output().unwrap();
    assert_eq!(code(&out), 0);
    let rows = read_params_csv(&text(&out.stdout)).unwrap();
    assert_eq!(rows.last().unwrap(), &("lr-mutan".to_string(), "total".to_string(), 4_375_829));
    assert!(text(&out.stderr).contains("reference 4.4M"));
}

#[test]
fn gradcheck_is_reproducible() {
    let run = || bin().args(["gradcheck", "--fusion", "mcb", "--trials", "15", "--seed", "3"]).output().unwrap();
    let (a, b) = (run(), run());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_flag_beats_env() {
    let env = bin()
        .args(["gradcheck", "--fusion", "mutan", "--trials", "3"])
        .env("FUSIONBENCH_SEED", "40")
        .output()
        .unwrap();
    let flag = bin()
        .args(["gradcheck", "--fusion", "mutan", "--trials", "3", "--seed", "40"])
        .env("FUSIONBENCH_SEED", "1")
        .output()
        .unwrap();
    let plain = bin().args(["gradcheck", "--fusion", "mutan", "--trials", "3"]).output().unwrap();
    assert_eq!(env.stdout, flag.stdout);
    assert_ne!(env.stdout, plain.stdout);
    let bad = bin().args(["gradcheck", "--trials", "1"]).env("FUSIONBENCH_SEED", "x").output().unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn bench_header_and_rows() {
    let out = bin()
        .args(["bench", "--fusion", "all", "--dims", "8,16", "--iters", "5", "--mutan-t", "4", "--mutan-t-o", "4", "--rank", "2"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    let csv = text(&out.stdout);
    assert!(csv.starts_with("fusion,dim,mode,ns_per_call\n"));
    let rows = read_bench_csv(&csv).unwrap();
    assert_eq!(rows.len(), 8);
    let modes: Vec<&str> = rows.iter().filter(|r| r.0 == "mcb").map(|r| r.2.as_str()).collect();
    assert_eq!(modes, ["direct", "frequency", "direct", "frequency"]);
}

#[test]
fn synth_writes_parseable_reports_and_refuses_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    std::fs::write(&cfg, TINY).unwrap();
    let out_dir = dir.path().join("nested/out");
    let run = |force: bool| {
        let mut c = bin();
        c.arg("synth").arg(&cfg).arg("--out").arg(&out_dir);
        if force {
            c.arg("--force");
        }
        c.output().unwrap()
    };
    let first = run(false);
    assert_eq!(code(&first), 0, "{}", text(&first.stderr));
    assert!(text(&first.stdout).contains("mutan: 3 epochs"));

    let summary = read_records(&std::fs::read_to_string(out_dir.join("summary.csv")).unwrap(), &SUMMARY_CSV_HEADER).unwrap();
    assert_eq!(summary.len(), 3);
    for label in ["elementwise", "mcb-d5", "mutan"] {
        let epochs = read_epochs_csv(&std::fs::read_to_string(out_dir.join(format!("{label}-epochs.csv"))).unwrap()).unwrap();
        assert_eq!(epochs.len(), 4);
        let conf =
            read_confusion_csv(&std::fs::read_to_string(out_dir.join(format!("{label}-confusion.csv"))).unwrap()).unwrap();
        assert_eq!(conf.iter().flatten().sum::<usize>(), 10);
        let audit = bin().arg("params").arg("--checkpoint").arg(out_dir.join(format!("{label}.ckpt"))).output().unwrap();
        assert_eq!(code(&audit), 0, "{}", text(&audit.stderr));
    }

    let again = run(false);
    assert_eq!(code(&again), 2);
    assert!(text(&again.stderr).contains("--force"));
    let before = std::fs::read(out_dir.join("mutan-epochs.csv")).unwrap();
    assert_eq!(code(&run(true)), 0);
    assert_eq!(std::fs::read(out_dir.join("mutan-epochs.csv")).unwrap(), before);
}

#[test]
fn synth_divergence_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hot.cfg");
    std::fs::write(&cfg, TINY.replace("epochs = 3", "epochs = 3\nlr = 1e300")).unwrap();
    let out = bin().arg("synth").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(text(&out.stderr).contains("diverged at epoch"));
}

#[test]
fn synth_without_task_is_exit_2() {
    let out = bin()
        .arg("synth")
        .arg(config("lr-baseline.cfg"))
        .arg("--out")
        .arg(std::env::temp_dir().join("fusionbench-unused"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
