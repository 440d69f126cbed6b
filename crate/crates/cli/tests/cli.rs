//! End-to-end tests driving the compiled binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rosterboa"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn generate(dir: &Path, name: &str, nurses: usize, tightness: f64, seed: u64) -> PathBuf {
    let path = dir.join(name);
    let output = run(
        &[
            "generate",
            "--nurses",
            &nurses.to_string(),
            "--tightness",
            &tightness.to_string(),
            "--seed",
            &seed.to_string(),
            "--out",
            path.to_str().unwrap(),
        ],
        dir,
    );
    assert_success(&output);
    path
}

#[test]
fn generate_writes_a_loadable_fixture_deterministically() {
    let dir = TempDir::new().unwrap();
    let a = generate(dir.path(), "a.txt", 25, 0.8, 7);
    let b = generate(dir.path(), "b.txt", 25, 0.8, 7);
    let c = generate(dir.path(), "c.txt", 25, 0.8, 8);
    let bytes_a = fs::read(&a).unwrap();
    assert_eq!(bytes_a, fs::read(&b).unwrap());
    assert_ne!(bytes_a, fs::read(&c).unwrap());
    let instance = rosterboa::fixture::load_instance_path(&a).unwrap();
    assert_eq!(instance.num_nurses(), 25);
}

#[test]
fn out_of_range_tightness_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let output = run(
        &["generate", "--tightness", "1.2", "--out", "x.txt"],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("tightness"));
}

#[test]
fn solve_emits_one_row_per_run_plus_a_summary() {
    let dir = TempDir::new().unwrap();
    let instance = generate(dir.path(), "ward.txt", 6, 0.7, 3);
    let output = run(
        &[
            "solve",
            instance.to_str().unwrap(),
            "--runs",
            "3",
            "--pop",
            "20",
            "--keep",
            "5",
            "--gens",
            "5",
            "--out",
            "res",
        ],
        dir.path(),
    );
    assert_success(&output);

    let results = fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "instance,seed,best,mean_final,feasible,generations,millis");
    for (run_index, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("ward,{run_index},")));
    }

    let summary = fs::read_to_string(dir.path().join("res/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "instance,best,mean,fea,hits,within3");
    // No reference optima: the hit columns stay empty.
    assert!(lines[1].ends_with(",,"));
}

#[test]
fn solve_is_reproducible_modulo_timing() {
    let dir = TempDir::new().unwrap();
    let instance = generate(dir.path(), "ward.txt", 5, 0.6, 1);
    for out in ["r1", "r2"] {
        let output = run(
            &[
                "solve",
                instance.to_str().unwrap(),
                "--runs",
                "2",
                "--pop",
                "20",
                "--keep",
                "5",
                "--gens",
                "5",
                "--trace",
                "--out",
                out,
            ],
            dir.path(),
        );
        assert_success(&output);
    }
    let strip_millis = |text: String| -> Vec<String> {
        text.lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    let r1 = strip_millis(fs::read_to_string(dir.path().join("r1/results.csv")).unwrap());
    let r2 = strip_millis(fs::read_to_string(dir.path().join("r2/results.csv")).unwrap());
    assert_eq!(r1, r2);
    // Summary and trace carry no timing and match byte for byte.
    assert_eq!(
        fs::read(dir.path().join("r1/summary.csv")).unwrap(),
        fs::read(dir.path().join("r2/summary.csv")).unwrap()
    );
    assert_eq!(
        fs::read(dir.path().join("r1/trace.csv")).unwrap(),
        fs::read(dir.path().join("r2/trace.csv")).unwrap()
    );
}

#[test]
fn oracle_feeds_the_hit_columns_of_solve() {
    let dir = TempDir::new().unwrap();
    // Three nurses keeps the assignment space within the oracle guard.
    let instance = generate(dir.path(), "tiny.txt", 3, 0.5, 1);
    let output = run(
        &[
            "oracle",
            instance.to_str().unwrap(),
            "--out",
            "optima.csv",
        ],
        dir.path(),
    );
    assert_success(&output);
    let optima = fs::read_to_string(dir.path().join("optima.csv")).unwrap();
    let mut lines = optima.lines();
    assert_eq!(lines.next(), Some("instance,fitness,assignment"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("tiny,"));
    let oracle_fitness: u64 = row.split(',').nth(1).unwrap().parse().unwrap();

    let instance_loaded = rosterboa::fixture::load_instance_path(&instance).unwrap();
    let (_, expected) = rosterboa::brute_force_optimum(&instance_loaded, 200).unwrap();
    assert_eq!(oracle_fitness, expected.fitness);

    let output = run(
        &[
            "solve",
            instance.to_str().unwrap(),
            "--runs",
            "3",
            "--gens",
            "30",
            "--optima",
            "optima.csv",
            "--out",
            "res",
        ],
        dir.path(),
    );
    assert_success(&output);
    let summary = fs::read_to_string(dir.path().join("res/summary.csv")).unwrap();
    let row = summary.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert!(!fields[4].is_empty(), "hits column empty: {row}");
    assert!(!fields[5].is_empty(), "within3 column empty: {row}");
    let hits: usize = fields[4].parse().unwrap();
    let within3: usize = fields[5].parse().unwrap();
    assert!(hits <= within3 && within3 <= 3);
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let dir = TempDir::new().unwrap();
    let instance = generate(dir.path(), "ward.txt", 4, 0.5, 2);
    fs::write(
        dir.path().join("solver.toml"),
        "gens = 3\nruns = 2\npop = 20\nkeep = 5\n",
    )
    .unwrap();

    let output = run(
        &[
            "solve",
            instance.to_str().unwrap(),
            "--config",
            "solver.toml",
            "--out",
            "from_config",
        ],
        dir.path(),
    );
    assert_success(&output);
    let results = fs::read_to_string(dir.path().join("from_config/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 3); // header + 2 runs
    for line in results.lines().skip(1) {
        let generations: usize = line.split(',').nth(5).unwrap().parse().unwrap();
        assert_eq!(generations, 3);
    }

    let output = run(
        &[
            "solve",
            instance.to_str().unwrap(),
            "--config",
            "solver.toml",
            "--gens",
            "5",
            "--runs",
            "1",
            "--out",
            "flag_wins",
        ],
        dir.path(),
    );
    assert_success(&output);
    let results = fs::read_to_string(dir.path().join("flag_wins/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 2);
    let generations: usize = results
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(5)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(generations, 5);
}

#[test]
fn unreadable_instances_are_skipped_with_a_nonzero_exit() {
    let dir = TempDir::new().unwrap();
    let good = generate(dir.path(), "good.txt", 4, 0.5, 2);
    let output = run(
        &[
            "solve",
            "missing.txt",
            good.to_str().unwrap(),
            "--runs",
            "1",
            "--pop",
            "20",
            "--keep",
            "5",
            "--gens",
            "2",
            "--out",
            "res",
        ],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("skipping"));
    let results = fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 2); // header + the good instance
}

#[test]
fn probability_dump_has_the_documented_table_shape() {
    let dir = TempDir::new().unwrap();
    let instance = generate(dir.path(), "toy.txt", 3, 0.5, 4);
    let output = run(
        &[
            "dump-probs",
            instance.to_str().unwrap(),
            "--gens",
            "30",
            "--pop",
            "40",
            "--keep",
            "10",
            "--out",
            "probs.csv",
            "--pgm",
            "probs.pgm",
        ],
        dir.path(),
    );
    assert_success(&output);

    let csv = fs::read_to_string(dir.path().join("probs.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "generation,position,parent_rule,rule,count_num,count_den,prob,gray"
    );
    // 3 nurses, 4 rules: 4 marginals + 2 transition tables of 16.
    let entries_per_generation = 4 + 2 * 16;
    assert_eq!(lines.len(), 1 + 30 * entries_per_generation);

    // Generation 0 is learned from a uniformly random population: the
    // first-position marginals hover around 1/4 (gray 64) and stay far
    // from saturation even with selection noise on 10 training strings.
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] == "0" && fields[2] == "-1" {
            let gray: i64 = fields[7].parse().unwrap();
            assert!(gray < 200, "gen-0 marginal gray {gray} looks converged");
        }
    }

    // A converged run pins at least one edge near probability one.
    let max_final_gray = lines[1..]
        .iter()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[0] == "29")
        .map(|f| f[7].parse::<i64>().unwrap())
        .max()
        .unwrap();
    assert!(max_final_gray >= 250, "final max gray {max_final_gray}");

    let pgm = fs::read_to_string(dir.path().join("probs.pgm")).unwrap();
    let mut header = pgm.lines();
    assert_eq!(header.next(), Some("P2"));
    assert_eq!(header.next(), Some(&*format!("30 {entries_per_generation}")));
    assert_eq!(header.next(), Some("255"));
    let values: Vec<i64> = pgm
        .lines()
        .skip(3)
        .flat_map(|l| l.split_whitespace().map(|v| v.parse().unwrap()))
        .collect();
    assert_eq!(values.len(), 30 * entries_per_generation);
    assert!(values.iter().all(|&v| (0..=255).contains(&v)));
}
