//! Drives the `fiduciary` binary end to end and checks the exit-code contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fiduciary(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fiduciary")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_toy(dir: &Path) -> String {
    let p = dir.join("toy.json");
    fs::write(&p, r#"{"version":1,"H":1,"arms":[{"name":"a1","weights":[2,3]},{"name":"a2","weights":[1,1]}]}"#)
        .unwrap();
    p.display().to_string()
}

#[test]
fn gen_then_plan_and_tree() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("u.json");
    let inst = inst.to_str().unwrap();
    let o = fiduciary(&["gen", "--family", "uniform", "--k", "4", "--h", "40", "-o", inst]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = fiduciary(&["plan", "--inst", inst]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("U,alpha,beta,action,p_first,W,W_dec\n"));
    assert!(table.contains("\n0111,6,6,p_{2,4},1/10,57271/3255,"));

    let o = fiduciary(&["tree", "--inst", inst, "--branch", "6"]);
    assert_eq!(code(&o), 0);
    let tree = String::from_utf8(o.stdout).unwrap();
    assert!(tree.starts_with("[a1=6 1/41] U=0111 alpha=6 beta=6 action=p_{2,4}(1/10)"));

    let o = fiduciary(&["tree", "--inst", inst, "--branch", "41"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn gen_writes_exact_construction_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p5.json");
    let o = fiduciary(&["gen", "--family", "prop5", "--k", "10", "--h", "10", "--eps", "1/1000000", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let inst = fiduciary::instance::parse_instance(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(inst.k(), 10);
    assert_eq!(*inst.mu(1), fiduciary::rational::ratio(99_999, 100_000));
    assert_eq!(code(&fiduciary(&["gen", "--family", "prop5", "--k", "10", "--h", "10"])), 4);
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_toy(dir.path());
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let o = fiduciary(&[
            "simulate", "--inst", &inst, "--mech", "fee,greedy", "--n", "10,100", "--runs", "3000", "--seed", "42",
            "--threads", threads, "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("4", "b.csv");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "mech,n,runs,seed,mean,std_error,mean_n1,mean_n2,opt,opt_eair,gap");
    assert_eq!(lines.count(), 4);
}

#[test]
fn simulate_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_toy(dir.path());
    let trace = dir.path().join("trace.csv");
    let o = fiduciary(&["simulate", "--inst", &inst, "--mech", "fullx", "--n", "5", "--runs", "1", "--trace", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let t = fs::read_to_string(trace).unwrap();
    assert_eq!(t.lines().count(), 6);
    assert!(t.starts_with("round,agent,arm,reward,phase,portfolio\n1,1,1,"));
}

#[test]
fn audit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("u.json");
    let inst = inst.to_str().unwrap();
    assert_eq!(code(&fiduciary(&["gen", "--family", "uniform", "--k", "3", "--h", "30", "-o", inst])), 0);

    let o = fiduciary(&["audit", "--inst", inst, "--mech", "fee", "--episodes", "200", "--n", "30", "--seed", "7", "--check", "eair"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("round,constraint,margin_num,margin_den,pass\n1,eair,"));

    let o = fiduciary(&["audit", "--inst", inst, "--mech", "fullx", "--episodes", "50", "--n", "4", "--check", "epir"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&fiduciary(&["audit", "--inst", inst, "--check", "bogus"])), 4);
}

#[test]
fn ic_check_and_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_toy(dir.path());
    let o = fiduciary(&["ic-check", "--inst", &inst, "--mech", "icfee", "--n", "20"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("phase length B = 6"));
    assert_eq!(code(&fiduciary(&["ic-check", "--inst", &inst, "--mech", "fullx", "--n", "5"])), 2);
    assert_eq!(code(&fiduciary(&["ic-check", "--inst", &inst, "--n", "20", "--budget-nodes", "5"])), 3);
    assert_eq!(code(&fiduciary(&["--budget-states", "2", "plan", "--inst", &inst])), 3);
}

#[test]
fn ratios_table() {
    let o = fiduciary(&["ratios", "--family", "prop9_uniform", "--k", "2..4", "--h", "10", "--eps", "1/100"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().skip(1).all(|l| l.contains(",true,")));

    let dir = tempfile::tempdir().unwrap();
    let inst = write_toy(dir.path());
    let o = fiduciary(&["ratios", "--inst", &inst, "--mech", "fee", "--n", "10", "--runs", "100", "--check", "eair,ic", "--episodes", "20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().contains(",4/5,0.800000000,4/5,0.800000000,"));
    assert!(text.lines().nth(2).unwrap().contains(",pass,"));
}

#[test]
fn usage_errors_are_bad_input() {
    assert_eq!(code(&fiduciary(&[])), 4);
    assert_eq!(code(&fiduciary(&["simulate", "--inst", "x.json"])), 4);
    assert_eq!(code(&fiduciary(&["--help"])), 0);
}
