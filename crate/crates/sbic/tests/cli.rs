//! End-to-end tests of the command-line interface: exit codes, format
//! contracts, determinism, and the family pipelines.

use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use sbic::core::solver::{residual, solve};
use sbic::fileio::{build_input, parse_model_collection};

fn sbic_cmd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sbic"))
}

fn write_temp(content: &str) -> tempfile::NamedTempFile {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(content.as_bytes()).unwrap();
    file
}

fn run_solve(document: &str, extra: &[&str]) -> Output {
    let file = write_temp(document);
    sbic_cmd()
        .args(["solve", "--input"])
        .arg(file.path())
        .args(extra)
        .output()
        .expect("binary runs")
}

/// A 4-model chain shaped like the 5×3 reduced-rank problem with synthetic
/// log-likelihoods.
fn example_chain_document() -> String {
    let table: [&[&str]; 4] = [
        &["0"],
        &["3/2", "7/2"],
        &["3", "9/2", "6"],
        &["9/2", "11/2", "13/2", "15/2"],
    ];
    let dims = [0, 7, 12, 15];
    let loglik = [-350.0, -290.0, -268.0, -267.2];
    let models: Vec<String> = (0..4)
        .map(|i| {
            format!(
                r#"{{"id": "rank{i}", "loglik": {}, "dim": {}}}"#,
                loglik[i], dims[i]
            )
        })
        .collect();
    let order: Vec<String> = (0..3)
        .map(|i| format!(r#"["rank{i}", "rank{}"]"#, i + 1))
        .collect();
    let mut coefficients = Vec::new();
    for (i, row) in table.iter().enumerate() {
        for (j, lambda) in row.iter().enumerate() {
            coefficients.push(format!(
                r#"{{"i": "rank{i}", "j": "rank{j}", "lambda": "{lambda}", "m": {}}}"#,
                if i == 3 && j == 0 { 2 } else { 1 }
            ));
        }
    }
    format!(
        r#"{{"models": [{}], "order": [{}], "n": 143, "coefficients": [{}]}}"#,
        models.join(", "),
        order.join(", "),
        coefficients.join(", ")
    )
}

#[test]
fn solve_scores_the_example_chain() {
    let document = example_chain_document();
    let output = run_solve(&document, &[]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "id,loglik,bic,sbic,penalty,posterior_bic,posterior_sbic"
    );
    assert_eq!(stdout.lines().count(), 5);

    // the same input through the library: check agreement and the residual
    let file = parse_model_collection(&document).unwrap();
    let (input, labels) = build_input(&file).unwrap();
    let result = solve(&input).unwrap();
    assert!(residual(&input, &result) < 1e-9);
    for (idx, line) in stdout.lines().skip(1).enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], labels[idx]);
        let sbic_out: f64 = fields[3].parse().unwrap();
        assert!(
            (sbic_out - result.sbic[idx]).abs() < 1e-6 * result.sbic[idx].abs(),
            "row {idx}: {sbic_out} vs {}",
            result.sbic[idx]
        );
    }
}

#[test]
fn solve_single_regular_model_emits_equal_scores() {
    let document = r#"{
        "models": [{"id": "only", "loglik": -512.5, "dim": 4}],
        "order": [],
        "n": 200,
        "coefficients": [{"i": "only", "j": "only", "lambda": "2", "m": 1}]
    }"#;
    let output = run_solve(document, &[]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let row = stdout.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[2], fields[3], "bic and sbic columns must match");
    assert_eq!(fields[5], "1");
    assert_eq!(fields[6], "1");
}

#[test]
fn solve_reports_missing_coefficient_pairs() {
    // drop the (rank1, rank0) entry
    let document = example_chain_document().replace(
        r#"{"i": "rank1", "j": "rank0", "lambda": "3/2", "m": 1}, "#,
        "",
    );
    let output = run_solve(&document, &[]);
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(
        stderr.contains("i=1") && stderr.contains("j=0"),
        "stderr should name the missing pair: {stderr}"
    );
}

#[test]
fn solve_rejects_malformed_documents() {
    let output = run_solve("{ not json", &[]);
    assert_eq!(output.status.code(), Some(2));

    let unknown_key = r#"{"modelz": []}"#;
    let output = run_solve(unknown_key, &[]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("modelz"), "stderr: {stderr}");

    let unknown_id =
        example_chain_document().replace(r#"["rank0", "rank1"]"#, r#"["rank0", "rankX"]"#);
    let output = run_solve(&unknown_id, &[]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("rankX"), "stderr: {stderr}");
}

#[test]
fn solve_rejects_cycles_and_bad_samples() {
    let cyclic =
        example_chain_document().replace(r#""order": ["#, r#""order": [["rank3", "rank0"], "#);
    let output = run_solve(&cyclic, &[]);
    assert_eq!(output.status.code(), Some(3));

    let tiny_n = example_chain_document().replace(r#""n": 143"#, r#""n": 2"#);
    let output = run_solve(&tiny_n, &[]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn solve_json_format_is_structured() {
    let output = run_solve(&example_chain_document(), &["--format", "json"]);
    assert!(output.status.success());
    let value: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(value["n"], 143);
    assert_eq!(value["models"].as_array().unwrap().len(), 4);
    assert!(value["models"][0]["posterior_sbic"].is_number());
}

#[test]
fn identical_invocations_are_byte_identical() {
    let document = example_chain_document();
    let a = run_solve(&document, &[]);
    let b = run_solve(&document, &[]);
    assert_eq!(a.stdout, b.stdout);

    let run_mixture = || {
        let data = write_temp("1.0\n1.5\n2.0\n8.0\n8.5\n9.0\n9.5\n2.5\n");
        sbic_cmd()
            .args(["mixture", "--data"])
            .arg(data.path())
            .args(["--max-components", "2", "--restarts", "3", "--seed", "11"])
            .output()
            .unwrap()
    };
    let a = run_mixture();
    let b = run_mixture();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn resolved_seed_goes_to_stderr() {
    let data = write_temp("1.0\n2.0\n3.0\n4.0\n5.0\n6.0\n");
    let output = sbic_cmd()
        .args(["mixture", "--data"])
        .arg(data.path())
        .args(["--max-components", "1", "--restarts", "1", "--seed", "7"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("seed: 7"), "stderr: {stderr}");

    // with no --seed a fresh one is still reported
    let output = sbic_cmd()
        .args(["mixture", "--data"])
        .arg(data.path())
        .args(["--max-components", "1", "--restarts", "1"])
        .output()
        .unwrap();
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(
        stderr.lines().any(|l| l.starts_with("seed: ")),
        "stderr: {stderr}"
    );
}

#[test]
fn rrr_simulation_pipeline_selects_a_rank() {
    let output = sbic_cmd()
        .args([
            "rrr",
            "--simulate",
            "--n-dim",
            "5",
            "--m-dim",
            "3",
            "--singular-values",
            "1.0,0.5",
            "--samples",
            "80",
            "--seed",
            "3",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let value: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(value["models"].as_array().unwrap().len(), 4);
    assert!(value["selected"]["bic"].is_string());
    assert!(value["selected"]["sbic"].is_string());
}

#[test]
fn rrr_requires_its_simulation_flags() {
    let output = sbic_cmd()
        .args(["rrr", "--simulate", "--m-dim", "3"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("--n-dim"), "stderr: {stderr}");

    let output = sbic_cmd().args(["rrr"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn rrr_singular_design_is_a_numeric_failure() {
    // two identical covariate columns leave a rank-one Gram matrix
    let y1 = write_temp("1\n2\n3\n4\n5\n6\n");
    let y2 = write_temp("1,1\n2,2\n3,3\n4,4\n5,5\n6,6\n");
    let output = sbic_cmd()
        .args(["rrr", "--y1"])
        .arg(y1.path())
        .arg("--y2")
        .arg(y2.path())
        .args(["--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn factor_pipeline_runs_on_a_covariance() {
    let cov = write_temp(
        "1.0,0.3,0.3,0.3,0.3,0.3\n\
         0.3,1.0,0.3,0.3,0.3,0.3\n\
         0.3,0.3,1.0,0.3,0.3,0.3\n\
         0.3,0.3,0.3,1.0,0.3,0.3\n\
         0.3,0.3,0.3,0.3,1.0,0.3\n\
         0.3,0.3,0.3,0.3,0.3,1.0\n",
    );
    let output = sbic_cmd()
        .args(["factor", "--cov"])
        .arg(cov.path())
        .args(["--n", "120", "--restarts", "3", "--seed", "5"])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 6, "header + 4 rows + selection");

    // --cov without --n is an invocation error
    let cov2 = write_temp("1,0\n0,1\n");
    let output = sbic_cmd()
        .args(["factor", "--cov"])
        .arg(cov2.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // more than three factors is out of table range
    let output = sbic_cmd()
        .args(["factor", "--max-factors", "4", "--cov"])
        .arg(cov.path())
        .args(["--n", "120"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn factor_pipeline_accepts_raw_observations() {
    let mut rows = String::from("a,b,c,d,e,f\n");
    let mut state = 17u64;
    for _ in 0..80 {
        let mut row = Vec::new();
        for _ in 0..6 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            row.push(format!(
                "{:.4}",
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            ));
        }
        rows.push_str(&row.join(","));
        rows.push('\n');
    }
    let data = write_temp(&rows);
    let output = sbic_cmd()
        .args(["factor", "--data"])
        .arg(data.path())
        .args(["--max-factors", "2", "--restarts", "2", "--seed", "5"])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 5, "header + 3 rows + selection");

    // wrong variable count is a validation error
    let narrow = write_temp("1,2\n3,4\n5,6\n");
    let output = sbic_cmd()
        .args(["factor", "--data"])
        .arg(narrow.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn experiment_writes_the_two_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let freq_path = dir.path().join("freq.csv");
    let entropy_path = dir.path().join("entropy.csv");
    let output = sbic_cmd()
        .args([
            "experiment",
            "--n-dim",
            "3",
            "--m-dim",
            "2",
            "--singular-values",
            "1.0",
            "--sample-sizes",
            "20,30",
            "--replicates",
            "2",
            "--max-rank",
            "2",
            "--seed",
            "1",
        ])
        .arg("--out")
        .arg(&freq_path)
        .arg("--entropy-out")
        .arg(&entropy_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );

    let frequencies = std::fs::read_to_string(&freq_path).unwrap();
    assert!(frequencies.starts_with("sample_size,criterion,rank,count,relative_frequency\n"));
    // 2 sample sizes × 2 criteria × 3 ranks + header
    assert_eq!(frequencies.lines().count(), 13);
    let entropies = std::fs::read_to_string(&entropy_path).unwrap();
    assert!(entropies.starts_with("sample_size,criterion,entropy\n"));
    assert_eq!(entropies.lines().count(), 5);

    // identical invocation reproduces the files byte for byte
    let rerun_dir = tempfile::tempdir().unwrap();
    let rerun_freq = rerun_dir.path().join("freq.csv");
    let rerun_entropy = rerun_dir.path().join("entropy.csv");
    let output = sbic_cmd()
        .args([
            "experiment",
            "--n-dim",
            "3",
            "--m-dim",
            "2",
            "--singular-values",
            "1.0",
            "--sample-sizes",
            "20,30",
            "--replicates",
            "2",
            "--max-rank",
            "2",
            "--seed",
            "1",
        ])
        .arg("--out")
        .arg(&rerun_freq)
        .arg("--entropy-out")
        .arg(&rerun_entropy)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(frequencies, std::fs::read_to_string(&rerun_freq).unwrap());
    assert_eq!(entropies, std::fs::read_to_string(&rerun_entropy).unwrap());
}

#[test]
fn experiment_accepts_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_temp(
        r#"{"n_dim": 3, "m_dim": 2, "singular_values": [1.0],
            "sample_sizes": [25], "replicates": 2, "max_rank": 2, "seed": 9}"#,
    );
    let freq_path = dir.path().join("f.csv");
    let entropy_path = dir.path().join("e.csv");
    let output = sbic_cmd()
        .args(["experiment", "--config"])
        .arg(config.path())
        .arg("--out")
        .arg(&freq_path)
        .arg("--entropy-out")
        .arg(&entropy_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(
        stderr.contains("seed: 9"),
        "config seed is reported: {stderr}"
    );
    assert!(freq_path.exists() && entropy_path.exists());

    // replicates = 0 is caught by validation
    let bad = write_temp(
        r#"{"n_dim": 3, "m_dim": 2, "singular_values": [1.0],
            "sample_sizes": [25], "replicates": 0, "max_rank": 2}"#,
    );
    let output = sbic_cmd()
        .args(["experiment", "--config"])
        .arg(bad.path())
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .arg("--entropy-out")
        .arg(dir.path().join("y.csv"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn galaxies_flag_feeds_the_mixture_pipeline() {
    let output = sbic_cmd()
        .args([
            "mixture",
            "--galaxies",
            "--max-components",
            "3",
            "--restarts",
            "5",
            "--seed",
            "13",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 5, "header + 3 rows + selection");
    assert!(stdout.lines().last().unwrap().starts_with("# selected:"));
}

#[test]
fn solve_honors_the_output_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("scores.csv");
    let file = write_temp(&example_chain_document());
    let output = sbic_cmd()
        .args(["solve", "--input"])
        .arg(file.path())
        .arg("--output")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(output.stdout.is_empty());
    let written = std::fs::read_to_string(&out_path).unwrap();
    assert!(written.starts_with("id,loglik,bic,sbic,penalty,posterior_bic,posterior_sbic\n"));
    assert_eq!(written.lines().count(), 5);
}

#[test]
fn ragged_csv_is_a_schema_error() {
    let ragged = write_temp("1,2\n3\n");
    let output = sbic_cmd()
        .args(["factor", "--data"])
        .arg(ragged.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn experiment_config_conflicts_with_inline_flags() {
    let config = write_temp(
        r#"{"n_dim": 3, "m_dim": 2, "singular_values": [1.0],
            "sample_sizes": [25], "replicates": 2, "max_rank": 2}"#,
    );
    let output = sbic_cmd()
        .args(["experiment", "--config"])
        .arg(config.path())
        .args(["--replicates", "5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_an_io_error() {
    let output = sbic_cmd()
        .args(["solve", "--input"])
        .arg(Path::new("/nonexistent/input.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}
