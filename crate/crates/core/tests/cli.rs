use std::path::Path;
use std::process::{Command, Output};

use rds_recapture::graph::Graph;

fn rdscr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdscr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("rdscr runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_graph(dir: &Path) {
    let out = rdscr(
        dir,
        &["generate", "--n", "3000", "--seed", "2", "-o", "g.txt"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn generate_ba_summary_and_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rdscr(
        tmp.path(),
        &[
            "generate", "--family", "ba", "--n", "500", "--attach", "3", "--seed", "1", "-o",
            "g.edges",
        ],
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("vertices:    500"), "{text}");
    assert!(text.contains("edges:       1494"), "{text}");
    let g = Graph::load_edge_list(tmp.path().join("g.edges")).unwrap();
    assert!(g.check_invariants());
    assert_eq!(g.vertex_count(), 500);
}

#[test]
fn generate_er() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rdscr(
        tmp.path(),
        &[
            "generate",
            "--family",
            "er",
            "--n",
            "1000",
            "--mean-degree",
            "8",
            "--seed",
            "7",
            "-o",
            "er.txt",
        ],
    );
    assert!(out.status.success());
    let g = Graph::load_edge_list(tmp.path().join("er.txt")).unwrap();
    assert_eq!(g.vertex_count(), 1000);
    assert!((g.mean_degree() - 8.0).abs() < 1.0);
}

#[test]
fn generate_rejects_bad_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rdscr(
        tmp.path(),
        &[
            "generate", "--family", "ba", "--n", "2", "--attach", "3", "-o", "x.txt",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error:"));
    assert!(!tmp.path().join("x.txt").exists());
}

#[test]
fn simulate_prints_both_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    small_graph(tmp.path());
    let out = rdscr(
        tmp.path(),
        &[
            "simulate", "--graph", "g.txt", "--n0", "300", "--kappa", "20",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("RDS full-knowledge (n1)"));
    assert!(text.contains("RDS + ANON/hashing (n3)"));
    assert!(text.contains("RDS + ANON/hashing (n3-bootstrap)"));
}

#[test]
fn tiny_hash_space_without_bootstrap_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    small_graph(tmp.path());
    let out = rdscr(
        tmp.path(),
        &[
            "simulate",
            "--graph",
            "g.txt",
            "--n0",
            "300",
            "--m",
            "10",
            "--no-bootstrap",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
    assert!(stdout(&out).contains("negative-denominator"));
    assert!(stderr(&out).starts_with("no estimate:"));
}

#[test]
fn simulate_rejects_missing_graph_and_bad_params() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rdscr(tmp.path(), &["simulate", "--graph", "missing.txt"]);
    assert_eq!(out.status.code(), Some(2));
    small_graph(tmp.path());
    let out = rdscr(
        tmp.path(),
        &["simulate", "--graph", "g.txt", "--reports", "0"],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = rdscr(
        tmp.path(),
        &["simulate", "--graph", "g.txt", "--false-matches", "bogus"],
    );
    assert_eq!(out.status.code(), Some(2));
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn estimate_rejects_too_many_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let reports: Vec<String> = (1..=26).map(|c| c.to_string()).collect();
    write(
        tmp.path(),
        "s.csv",
        &format!(
            "# rds-survey v1 m=100 p=25\nsubject_code,recruiter_row,report_codes\n5,,1\n7,0,{}\n",
            reports.join(";")
        ),
    );
    let out = rdscr(tmp.path(), &["estimate", "--survey", "s.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("record 1: 26 reports exceeds the limit p=25"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn estimate_rejects_empty_and_out_of_range() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "empty.csv",
        "# rds-survey v1 m=100\nsubject_code,recruiter_row,report_codes\n",
    );
    let out = rdscr(tmp.path(), &["estimate", "--survey", "empty.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no subjects"));

    // d=2 gives 16 codes
    write(
        tmp.path(),
        "tf.csv",
        "subject_code,recruiter_row,report_codes\n3,,17\n",
    );
    let out = rdscr(
        tmp.path(),
        &["estimate", "--survey", "tf.csv", "--telefunken-digits", "2"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("outside 1..=16"), "{}", stderr(&out));

    write(
        tmp.path(),
        "nom.csv",
        "subject_code,recruiter_row,report_codes\n3,,1\n",
    );
    let out = rdscr(tmp.path(), &["estimate", "--survey", "nom.csv"]);
    assert_eq!(out.status.code(), Some(2));

    write(tmp.path(), "fwd.csv", "# rds-survey v1 m=10\n3,1,\n4,,\n");
    let out = rdscr(tmp.path(), &["estimate", "--survey", "fwd.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not an earlier record"));
}

#[test]
fn estimate_without_positive_denominators_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    // nobody reports a captured code
    write(
        tmp.path(),
        "s.csv",
        "# rds-survey v1 m=1000 s=1 c=2 n0=3\n1,,500\n2,0,600\n3,0,700\n",
    );
    let out = rdscr(
        tmp.path(),
        &["estimate", "--survey", "s.csv", "--kappa", "5"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("unrecoverable-denominator"));
}

#[test]
fn sweep_config_errors_have_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "bad.toml",
        "population_sizes = [1000]\ngraphs_per_size = \"three\"\n",
    );
    let out = rdscr(
        tmp.path(),
        &["sweep", "--config", "bad.toml", "-o", "out.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn full_scale_preset_warns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rdscr(tmp.path(), &["preset", "--sweep", "s", "--scale", "full"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("# rds-sweep config v1"));
    write(tmp.path(), "full.toml", &stdout(&out));
    let out = rdscr(tmp.path(), &["sweep", "--config", "full.toml", "--dry-run"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("full scale"), "{}", stderr(&out));
    assert!(stdout(&out).contains("= 28000 trials"), "{}", stdout(&out));

    let out = rdscr(tmp.path(), &["preset", "--sweep", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_versioned_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let config = "population_sizes = [1200]\ngraphs_per_size = 1\ntrials_per_graph = 2\nmaster_seed = 3\nestimators = [\"n1\", \"n3\"]\n\n[baseline]\nn0 = 100\ns = 3\nc = 3\np = 10\nm = 500\n\n[sweep]\nparam = \"c\"\nvalues = [1, 3]\n";
    write(tmp.path(), "c.toml", config);
    let out = rdscr(
        tmp.path(),
        &[
            "sweep", "--config", "c.toml", "-o", "out.csv", "--long", "long.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(tmp.path().join("out.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# rds-sweep results v1");
    assert_eq!(
        lines[1],
        "pop_size,param,value,estimator,mean,stddev,n_trials,n_flagged"
    );
    assert_eq!(lines.len(), 2 + 2 * 2);
    assert!(lines[2].starts_with("1200,c,1,n1,"));
    let long = std::fs::read_to_string(tmp.path().join("long.csv")).unwrap();
    assert_eq!(long.lines().count(), 2 + 2 * 2 * 2);
}

#[test]
fn encode_phone_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rdscr(
        tmp.path(),
        &["encode-phone", "--digits", "2", "27", "5550100"],
    );
    assert!(out.status.success());
    // "27" -> 0b1100, stored shifted by one
    assert_eq!(stdout(&out), "27,13\n5550100,1\n");
    let out = rdscr(tmp.path(), &["encode-phone", "--digits", "2", "55-1"]);
    assert_eq!(out.status.code(), Some(2));
}
