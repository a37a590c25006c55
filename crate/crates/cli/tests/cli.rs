//! End-to-end tests driving the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const CORPUS: &str = concat!(
    r#"{"id":"c1","tokens":["you","are","zorg"],"annotators":["Hateful","Hateful","Hateful"],"target":"Women","rationales":[[2],[2],[2]],"source":"original"}"#,
    "\n",
    r#"{"id":"c2","tokens":["zorg","is","here"],"annotators":["Hateful","Hateful","Hateful"],"target":"Women","rationales":[[0],[0],[]],"source":"original"}"#,
    "\n",
    r#"{"id":"c3","tokens":["fine","words","only"],"annotators":["Normal","Normal","Normal"],"target":null,"rationales":[],"source":"original"}"#,
    "\n",
    r#"{"id":"c4","tokens":["bad","symbol",":)"],"annotators":["Hateful","Hateful","Offensive"],"rationales":[],"source":"original"}"#,
    "\n",
    r#"{"id":"c5","tokens":["www","example"],"annotators":["Hateful","Offensive","Normal"],"rationales":[],"source":"original"}"#,
    "\n",
);

const CANDIDATES: &str = concat!(
    r#"{"id":"k1","text":"zorg everywhere today","keyword":"zorg","model_ids":["m0","m1","m2","m3","m4"],"labels":["Hateful","Hateful","Hateful","Hateful","Hateful"],"attribution_scores":[0.4,0.05,0.02]}"#,
    "\n",
    r#"{"id":"k2","text":"zorg sometimes","keyword":"zorg","model_ids":["m0","m1","m2","m3","m4"],"labels":["Hateful","Hateful","Hateful","Hateful","Normal"]}"#,
    "\n",
    r#"{"id":"k3","text":"always zorg","keyword":"zorg","model_ids":["m0","m1","m2","m3","m4"],"labels":["Hateful","Offensive","hate","Hateful","Hateful"]}"#,
    "\n",
    r#"{"id":"k4","text":"maybe zorg","keyword":"zorg","model_ids":["m0","m1","m2","m3","m4"],"labels":["Hateful","Hateful","Hateful","Normal","Normal"]}"#,
    "\n",
);

fn maskeval(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskeval"))
        .args(args)
        .current_dir(dir)
        .env_remove("MASKEVAL_CONFIG")
        .output()
        .expect("binary runs")
}

fn maskeval_with_env(dir: &Path, args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskeval"))
        .args(args)
        .current_dir(dir)
        .env_remove("MASKEVAL_CONFIG")
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn ingest_filters_symbols_and_writes_masked_references() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "corpus.jsonl", CORPUS);

    let out = maskeval(
        tmp.path(),
        &["ingest", "--corpus", "corpus.jsonl", "--output", "out"],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let summary = stdout(&out);
    assert!(summary.contains("5 records parsed"), "{summary}");
    assert!(summary.contains("3 kept"), "{summary}");
    assert!(summary.contains("2 unanimously hateful"), "{summary}");

    let clean = std::fs::read_to_string(tmp.path().join("out/corpus_clean.jsonl")).unwrap();
    assert_eq!(clean.lines().count(), 3);
    assert!(!clean.contains("\"c4\""));
    assert!(!clean.contains("\"c5\""));

    let refs = std::fs::read_to_string(tmp.path().join("out/references.jsonl")).unwrap();
    assert!(
        refs.contains(r#"{"id":"c1","ref":"you are ***"}"#),
        "{refs}"
    );
    assert!(
        refs.contains(r#"{"id":"c2","ref":"*** is here"}"#),
        "{refs}"
    );
}

#[test]
fn ingest_overrides_take_precedence() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "corpus.jsonl", CORPUS);
    write(tmp.path(), "overrides.txt", "+c5\n-c3\n");

    let out = maskeval(
        tmp.path(),
        &[
            "ingest",
            "--corpus",
            "corpus.jsonl",
            "--overrides",
            "overrides.txt",
            "--output",
            "out",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let clean = std::fs::read_to_string(tmp.path().join("out/corpus_clean.jsonl")).unwrap();
    assert!(clean.contains("\"c5\""));
    assert!(!clean.contains("\"c3\""));
}

#[test]
fn ingest_is_idempotent_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "corpus.jsonl", CORPUS);
    let args = ["ingest", "--corpus", "corpus.jsonl", "--output", "out"];
    assert!(maskeval(tmp.path(), &args).status.success());
    let first = std::fs::read(tmp.path().join("out/corpus_clean.jsonl")).unwrap();
    let first_refs = std::fs::read(tmp.path().join("out/references.jsonl")).unwrap();
    assert!(maskeval(tmp.path(), &args).status.success());
    assert_eq!(
        first,
        std::fs::read(tmp.path().join("out/corpus_clean.jsonl")).unwrap()
    );
    assert_eq!(
        first_refs,
        std::fs::read(tmp.path().join("out/references.jsonl")).unwrap()
    );
}

#[test]
fn malformed_corpus_line_exits_one_with_line_number() {
    let tmp = TempDir::new().unwrap();
    let mut corpus = String::from(CORPUS);
    corpus.push_str("{\"id\":\"broken\"}\n");
    write(tmp.path(), "corpus.jsonl", &corpus);

    let out = maskeval(
        tmp.path(),
        &["ingest", "--corpus", "corpus.jsonl", "--output", "out"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 6"), "{}", stderr(&out));
}

#[test]
fn keywords_selects_ensemble_approved_terms() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "corpus.jsonl", CORPUS);
    write(
        tmp.path(),
        "verdicts.jsonl",
        concat!(
            r#"{"key":"zorg","model_ids":["m0","m1","m2","m3","m4"],"labels":["Hateful","Hateful","Offensive","Normal","Normal"]}"#,
            "\n",
            r#"{"key":"here","model_ids":["m0","m1","m2","m3","m4"],"labels":["Normal","Normal","Normal","Normal","Normal"]}"#,
            "\n",
        ),
    );

    let out = maskeval(
        tmp.path(),
        &[
            "keywords",
            "--corpus",
            "corpus.jsonl",
            "--verdicts",
            "verdicts.jsonl",
            "--min-count",
            "2",
            "--output",
            "out",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let keywords = std::fs::read_to_string(tmp.path().join("out/keywords.txt")).unwrap();
    assert_eq!(keywords, "zorg\n");
    assert!(
        stdout(&out).contains("1 keywords selected"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn filter_keeps_levels_at_or_above_threshold() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "candidates.jsonl", CANDIDATES);

    let out = maskeval(
        tmp.path(),
        &[
            "filter",
            "--candidates",
            "candidates.jsonl",
            "--min-level",
            "5",
            "--output",
            "out",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("2 at hate level >= 5"),
        "{}",
        stdout(&out)
    );

    let filtered =
        std::fs::read_to_string(tmp.path().join("out/candidates_filtered.jsonl")).unwrap();
    let ids: Vec<&str> = filtered
        .lines()
        .map(|l| if l.contains("\"k1\"") { "k1" } else { "k3" })
        .collect();
    assert_eq!(ids, ["k1", "k3"]);
    assert!(filtered.contains("\"hate_level\":5"));
}

#[test]
fn mask_applies_attribution_threshold() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "candidates.jsonl", CANDIDATES);

    let out = maskeval(
        tmp.path(),
        &[
            "mask",
            "--candidates",
            "candidates.jsonl",
            "--output",
            "out",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("1 masked at threshold 0.1"),
        "{}",
        stdout(&out)
    );
    assert!(stdout(&out).contains("3 skipped"), "{}", stdout(&out));

    let refs = std::fs::read_to_string(tmp.path().join("out/references_generated.jsonl")).unwrap();
    assert_eq!(refs, "{\"id\":\"k1\",\"ref\":\"*** everywhere today\"}\n");
}

#[test]
fn mask_external_scores_override_embedded_ones() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "candidates.jsonl", CANDIDATES);
    write(
        tmp.path(),
        "attributions.jsonl",
        concat!(
            r#"{"id":"k1","scores":[0.0,0.0,0.9]}"#,
            "\n",
            r#"{"id":"k2","scores":[0.3,0.0]}"#,
            "\n",
        ),
    );

    let out = maskeval(
        tmp.path(),
        &[
            "mask",
            "--candidates",
            "candidates.jsonl",
            "--attributions",
            "attributions.jsonl",
            "--output",
            "out",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let refs = std::fs::read_to_string(tmp.path().join("out/references_generated.jsonl")).unwrap();
    assert!(
        refs.contains(r#"{"id":"k1","ref":"zorg everywhere ***"}"#),
        "{refs}"
    );
    assert!(
        refs.contains(r#"{"id":"k2","ref":"*** sometimes"}"#),
        "{refs}"
    );
}

#[test]
fn curriculum_manifests_are_reproducible_under_a_seed() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "candidates.jsonl", CANDIDATES);
    write(
        tmp.path(),
        "plans.json",
        r#"[{"name":"tiny","stages":[{"levels":[4,5],"count":3}]}]"#,
    );

    let args = [
        "curriculum",
        "--candidates",
        "candidates.jsonl",
        "--plan",
        "tiny",
        "--plans-file",
        "plans.json",
        "--seed",
        "7",
        "--output",
        "out",
    ];
    let out = maskeval(tmp.path(), &args);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let first = std::fs::read(tmp.path().join("out/manifest_tiny.json")).unwrap();
    assert!(maskeval(tmp.path(), &args).status.success());
    let second = std::fs::read(tmp.path().join("out/manifest_tiny.json")).unwrap();
    assert_eq!(first, second);

    let manifest = String::from_utf8(first).unwrap();
    assert!(manifest.contains("\"plan_name\": \"tiny\""), "{manifest}");
    assert!(manifest.contains("\"seed\": 7"), "{manifest}");
}

#[test]
fn curriculum_shortfall_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "candidates.jsonl", CANDIDATES);

    let out = maskeval(
        tmp.path(),
        &[
            "curriculum",
            "--candidates",
            "candidates.jsonl",
            "--plan",
            "curriculum-2",
            "--output",
            "out",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("requested 1000"), "{}", stderr(&out));
}

#[test]
fn score_identity_corpus_reports_perfect_metrics() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "pairs.jsonl",
        concat!(
            r#"{"id":"s1","ref":"you are ***","hyp":"you are ***"}"#,
            "\n",
            r#"{"id":"s2","ref":"*** is here","hyp":"*** is here"}"#,
            "\n",
        ),
    );

    let out = maskeval(
        tmp.path(),
        &["score", "--pairs", "pairs.jsonl", "--output", "out"],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("pooled MAR 100.0, WER 0.0, UMWER 0.0"),
        "{text}"
    );
    assert!(text.contains("pooled (micro)"), "{text}");

    let report = std::fs::read_to_string(tmp.path().join("out/report.json")).unwrap();
    assert!(report.contains("\"wer\": 0.0"), "{report}");
    assert!(report.contains("\"mar\": 100.0"), "{report}");
}

#[test]
fn score_macro_flag_switches_aggregation() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "pairs.jsonl",
        concat!(
            // 2 errors over 10 tokens (WER 20), then 0 over 30
            r#"{"id":"s1","ref":"you are a *** and always will be *** ***","hyp":"you are a *** always will be *** *** ***"}"#,
            "\n",
            r#"{"id":"s2","ref":"a b c d e f g h i j k l m n o p q r s t u v w x y z aa bb cc dd","hyp":"a b c d e f g h i j k l m n o p q r s t u v w x y z aa bb cc dd"}"#,
            "\n",
        ),
    );

    let micro = maskeval(
        tmp.path(),
        &["score", "--pairs", "pairs.jsonl", "--output", "out"],
    );
    assert!(stdout(&micro).contains("WER 5.0"), "{}", stdout(&micro));

    let macro_run = maskeval(
        tmp.path(),
        &[
            "score",
            "--pairs",
            "pairs.jsonl",
            "--aggregation",
            "macro",
            "--output",
            "out",
        ],
    );
    assert!(
        stdout(&macro_run).contains("WER 10.0"),
        "{}",
        stdout(&macro_run)
    );
}

#[test]
fn prompts_bank_and_picks_are_stable() {
    let tmp = TempDir::new().unwrap();

    let bank = maskeval(tmp.path(), &["prompts"]);
    assert!(bank.status.success());
    let text = stdout(&bank);
    assert_eq!(text.trim_end().split("\n\n").count(), 15);
    assert!(text.starts_with("Can you transcribe the speech into a written format?"));

    let test_prompt = maskeval(tmp.path(), &["prompts", "--test-prompt"]);
    assert_eq!(
        stdout(&test_prompt).trim_end(),
        "Recognize the speech and give me the transcription. Hide hateful terms using ***."
    );

    let a = maskeval(tmp.path(), &["prompts", "--pick", "12", "--seed", "9"]);
    let b = maskeval(tmp.path(), &["prompts", "--pick", "12", "--seed", "9"]);
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("***"));
}

#[test]
fn generation_prompt_renders_and_redacts() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "corpus.jsonl", CORPUS);

    let raw = maskeval(
        tmp.path(),
        &[
            "prompts",
            "--keyword",
            "zorg",
            "--target",
            "Women",
            "--corpus",
            "corpus.jsonl",
            "--seed",
            "1",
        ],
    );
    assert!(raw.status.success(), "stderr: {}", stderr(&raw));
    let text = stdout(&raw);
    assert!(text.contains("Mandatory Keyword: zorg"), "{text}");
    assert!(text.contains("zorg"), "{text}");
    assert!(text.contains("Example 1:"), "{text}");

    let redacted = maskeval(
        tmp.path(),
        &[
            "prompts",
            "--keyword",
            "zorg",
            "--target",
            "Women",
            "--corpus",
            "corpus.jsonl",
            "--seed",
            "1",
            "--redact",
        ],
    );
    let text = stdout(&redacted);
    assert!(text.contains("Example 1: #"), "{text}");
    assert!(!text.contains("you are zorg"), "{text}");
    assert!(!text.contains("zorg is here"), "{text}");

    // with an explicit output file the raw text is written as-is
    let to_file = maskeval(
        tmp.path(),
        &[
            "prompts",
            "--keyword",
            "zorg",
            "--target",
            "Women",
            "--corpus",
            "corpus.jsonl",
            "--seed",
            "1",
            "--redact",
            "--out-file",
            "prompt.txt",
        ],
    );
    assert!(to_file.status.success());
    let contents = std::fs::read_to_string(tmp.path().join("prompt.txt")).unwrap();
    assert!(!contents.contains('#'), "{contents}");

    let missing_target = maskeval(
        tmp.path(),
        &["prompts", "--keyword", "zorg", "--corpus", "corpus.jsonl"],
    );
    assert_eq!(missing_target.status.code(), Some(1));
}

#[test]
fn config_file_and_flags_layer_correctly() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "candidates.jsonl", CANDIDATES);
    write(
        tmp.path(),
        "maskeval.toml",
        concat!(
            "[paths]\n",
            "candidates = \"candidates.jsonl\"\n",
            "output = \"cfg_out\"\n",
            "[thresholds]\n",
            "min_level = 4\n",
        ),
    );

    // config file supplies path, output dir, and threshold
    let from_config = maskeval(tmp.path(), &["--config", "maskeval.toml", "filter"]);
    assert!(
        from_config.status.success(),
        "stderr: {}",
        stderr(&from_config)
    );
    assert!(
        stdout(&from_config).contains("3 at hate level >= 4"),
        "{}",
        stdout(&from_config)
    );
    assert!(tmp
        .path()
        .join("cfg_out/candidates_filtered.jsonl")
        .exists());

    // flags win over the config file
    let with_flag = maskeval(
        tmp.path(),
        &["--config", "maskeval.toml", "filter", "--min-level", "5"],
    );
    assert!(
        stdout(&with_flag).contains("2 at hate level >= 5"),
        "{}",
        stdout(&with_flag)
    );

    // the env var provides the default config path
    let via_env = maskeval_with_env(tmp.path(), &["filter"], "MASKEVAL_CONFIG", "maskeval.toml");
    assert!(via_env.status.success(), "stderr: {}", stderr(&via_env));
    assert!(
        stdout(&via_env).contains("3 at hate level >= 4"),
        "{}",
        stdout(&via_env)
    );

    // provenance line shows the effective thresholds
    assert!(
        stderr(&from_config).contains("min_level=4"),
        "{}",
        stderr(&from_config)
    );
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = TempDir::new().unwrap();

    // unknown subcommand: usage, 64
    let unknown = maskeval(tmp.path(), &["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(64));
    assert!(
        stderr(&unknown).to_lowercase().contains("usage"),
        "{}",
        stderr(&unknown)
    );

    // missing input file: i/o, 2
    let missing = maskeval(tmp.path(), &["score", "--pairs", "nope.jsonl"]);
    assert_eq!(missing.status.code(), Some(2));

    // out-of-range threshold: validation, 1
    write(tmp.path(), "candidates.jsonl", CANDIDATES);
    let bad_level = maskeval(
        tmp.path(),
        &[
            "filter",
            "--candidates",
            "candidates.jsonl",
            "--min-level",
            "6",
        ],
    );
    assert_eq!(bad_level.status.code(), Some(1));

    // help is not an error
    let help = maskeval(tmp.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("score"));
}

#[test]
fn check_gradients_passes_and_prints_errors() {
    let tmp = TempDir::new().unwrap();
    let out = maskeval(tmp.path(), &["check-gradients", "--seeds", "25"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("25 seeds"), "{text}");
    assert!(text.contains("cross-entropy"), "{text}");
    assert!(text.contains("kl"), "{text}");
}
