//! Subcommand implementations.
//!
//! Every command reads its declared inputs, writes its declared outputs
//! under the output directory, and prints a one-line summary with counts
//! and paths. Outputs are byte-identical across runs given the same inputs,
//! config, and seed.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use maskeval::corpus::{
    self, build_masked_reference, is_unanimous_hateful, parse_corpus, serialize_record,
    SymbolPrefilter, UtteranceRecord,
};
use maskeval::curation::{
    self, build_curriculum, extract_frequent_terms, filter_candidates, load_plans,
    mask_by_attribution, parse_candidates, parse_verdicts, select_keywords, serialize_candidate,
    LabelMap, LevelSampling, PlanSpec, StopList,
};
use maskeval::metrics::{evaluate_corpus, parse_scoring_pairs};
use maskeval::objectives::run_gradient_suite;
use maskeval::prompts::{
    render_generation_prompt, select_example_pair, test_prompt, GenerationPromptInput, PromptBank,
};

use crate::config::PipelineConfig;
use crate::redact::redact_text;
use crate::CliError;

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn require(path: &Option<PathBuf>, what: &str, flag: &str) -> Result<PathBuf, CliError> {
    path.clone().ok_or_else(|| {
        CliError::Validation(format!(
            "{what} path required: pass --{flag} or set paths.{flag} in the config"
        ))
    })
}

fn report_line_errors(errors: &[corpus::LineError], what: &str) -> Result<(), CliError> {
    if errors.is_empty() {
        return Ok(());
    }
    for err in errors {
        eprintln!("{what} {err}");
    }
    Err(CliError::Validation(format!(
        "{} malformed {what} line(s)",
        errors.len()
    )))
}

fn load_prefilter(overrides: &Option<PathBuf>) -> Result<SymbolPrefilter, CliError> {
    let mut prefilter = SymbolPrefilter::default();
    if let Some(path) = overrides {
        prefilter.load_overrides(open(path)?)?;
    }
    Ok(prefilter)
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

pub fn ingest(config: &PipelineConfig, keep_all: bool) -> Result<(), CliError> {
    let corpus_path = require(&config.corpus, "corpus", "corpus")?;
    let parsed = parse_corpus(open(&corpus_path)?)?;
    report_line_errors(&parsed.line_errors, "corpus")?;

    let prefilter = load_prefilter(&config.overrides)?;
    let kept: Vec<&UtteranceRecord> = parsed
        .records
        .iter()
        .filter(|r| keep_all || prefilter.keep(r))
        .collect();
    let dropped = parsed.records.len() - kept.len();

    let clean_path = config.output.join("corpus_clean.jsonl");
    let mut clean = String::new();
    for record in &kept {
        clean.push_str(&serialize_record(record));
        clean.push('\n');
    }
    write_output(&clean_path, &clean)?;

    let unanimous: Vec<&&UtteranceRecord> =
        kept.iter().filter(|r| is_unanimous_hateful(r)).collect();
    let refs_path = config.output.join("references.jsonl");
    let mut refs = String::new();
    for record in &unanimous {
        let masked = build_masked_reference(record, config.annotator_votes)?;
        refs.push_str(&reference_line(&record.id, &masked.text()));
        refs.push('\n');
    }
    write_output(&refs_path, &refs)?;

    println!(
        "ingest: {} records parsed, {} kept ({} dropped by symbol filter), {} unanimously hateful -> {} and {}",
        parsed.records.len(),
        kept.len(),
        dropped,
        unanimous.len(),
        clean_path.display(),
        refs_path.display(),
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct RefLine<'a> {
    id: &'a str,
    #[serde(rename = "ref")]
    reference: &'a str,
}

/// `{"id": ..., "ref": ...}` in the scoring-input field order.
fn reference_line(id: &str, reference: &str) -> String {
    serde_json::to_string(&RefLine { id, reference }).expect("reference line serialization")
}

// ---------------------------------------------------------------------------
// keywords
// ---------------------------------------------------------------------------

pub fn keywords(
    config: &PipelineConfig,
    stoplist: &Option<PathBuf>,
    all_records: bool,
) -> Result<(), CliError> {
    let corpus_path = require(&config.corpus, "corpus", "corpus")?;
    let verdicts_path = require(&config.verdicts, "verdicts", "verdicts")?;

    let parsed = parse_corpus(open(&corpus_path)?)?;
    report_line_errors(&parsed.line_errors, "corpus")?;
    let records: Vec<UtteranceRecord> = if all_records {
        parsed.records
    } else {
        parsed
            .records
            .into_iter()
            .filter(is_unanimous_hateful)
            .collect()
    };

    let stop = match stoplist {
        Some(path) => {
            let contents = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            StopList::parse(&contents)
        }
        None => StopList::builtin(),
    };

    let terms = extract_frequent_terms(&records, config.min_count, &stop)?;
    let term_strings: Vec<String> = terms.iter().map(|t| t.term.clone()).collect();

    let verdicts = parse_verdicts(open(&verdicts_path)?, &LabelMap::default())?;
    let selected = select_keywords(&term_strings, &verdicts, config.keyword_votes)?;

    let out_path = config.output.join("keywords.txt");
    let mut contents = selected.join("\n");
    if !contents.is_empty() {
        contents.push('\n');
    }
    write_output(&out_path, &contents)?;

    println!(
        "keywords: {} hateful records, {} terms with count >= {}, {} keywords selected at >= {} of 5 votes -> {}",
        records.len(),
        terms.len(),
        config.min_count,
        selected.len(),
        config.keyword_votes,
        out_path.display(),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// candidates: shared ingest for filter / mask / curriculum
// ---------------------------------------------------------------------------

fn load_candidates(config: &PipelineConfig) -> Result<Vec<curation::CandidateRecord>, CliError> {
    let candidates_path = require(&config.candidates, "candidates", "candidates")?;
    let verdicts = match &config.verdicts {
        Some(path) => Some(parse_verdicts(open(path)?, &LabelMap::default())?),
        None => None,
    };
    let parsed = parse_candidates(
        open(&candidates_path)?,
        verdicts.as_ref(),
        &LabelMap::default(),
    )?;
    report_line_errors(&parsed.line_errors, "candidate")?;
    for id in &parsed.keyword_warnings {
        eprintln!("warning: candidate {id} does not contain its mandatory keyword");
    }
    Ok(parsed.candidates)
}

pub fn filter(config: &PipelineConfig) -> Result<(), CliError> {
    let candidates = load_candidates(config)?;
    let total = candidates.len();
    let kept = filter_candidates(candidates, config.min_level)?;

    let out_path = config.output.join("candidates_filtered.jsonl");
    let mut contents = String::new();
    for candidate in &kept {
        contents.push_str(&serialize_candidate(candidate));
        contents.push('\n');
    }
    write_output(&out_path, &contents)?;

    println!(
        "filter: {} candidates read, {} at hate level >= {} -> {}",
        total,
        kept.len(),
        config.min_level,
        out_path.display(),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// mask
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct AttributionLine {
    id: String,
    scores: Vec<f64>,
}

fn load_attributions(path: &Path) -> Result<HashMap<String, Vec<f64>>, CliError> {
    let mut out = HashMap::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: AttributionLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Validation(format!("attributions line {}: {e}", idx + 1)))?;
        if out.insert(raw.id.clone(), raw.scores).is_some() {
            return Err(CliError::Validation(format!(
                "duplicate attribution id {:?}",
                raw.id
            )));
        }
    }
    Ok(out)
}

pub fn mask(config: &PipelineConfig) -> Result<(), CliError> {
    let candidates = load_candidates(config)?;
    let external = match &config.attributions {
        Some(path) => load_attributions(path)?,
        None => HashMap::new(),
    };

    let mut masked_lines = String::new();
    let (mut masked_count, mut skipped) = (0usize, 0usize);
    for candidate in &candidates {
        // an external score file overrides scores embedded in the candidate
        let scores = external
            .get(&candidate.id)
            .or(candidate.attribution_scores.as_ref());
        let Some(scores) = scores else {
            skipped += 1;
            continue;
        };
        let masked = mask_by_attribution(
            candidate.id.as_str(),
            &candidate.tokens,
            scores,
            config.attribution,
        )?;
        masked_lines.push_str(&reference_line(&candidate.id, &masked.text()));
        masked_lines.push('\n');
        masked_count += 1;
    }

    let out_path = config.output.join("references_generated.jsonl");
    write_output(&out_path, &masked_lines)?;
    println!(
        "mask: {} candidates read, {} masked at threshold {} ({} skipped without attribution scores) -> {}",
        candidates.len(),
        masked_count,
        config.attribution,
        skipped,
        out_path.display(),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// curriculum
// ---------------------------------------------------------------------------

pub fn curriculum(
    config: &PipelineConfig,
    plan_name: &str,
    plans_file: &Option<PathBuf>,
    balance_levels: bool,
) -> Result<(), CliError> {
    let candidates = load_candidates(config)?;

    let plan: PlanSpec = match plans_file {
        Some(path) => {
            let plans = load_plans(open(path)?)?;
            plans
                .into_iter()
                .find(|p| p.name == plan_name)
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "plan {plan_name:?} not found in {}",
                        path.display()
                    ))
                })?
        }
        None => PlanSpec::builtin(plan_name).ok_or_else(|| {
            CliError::Validation(format!(
                "unknown plan {plan_name:?}; built-ins are {}",
                PlanSpec::builtin_names().join(", ")
            ))
        })?,
    };

    let mode = if balance_levels {
        LevelSampling::EqualPerLevel
    } else {
        LevelSampling::UniformOverUnion
    };
    let manifest = build_curriculum(&candidates, &plan, config.seed, mode)?;
    manifest.validate_against(&candidates)?;

    let out_path = config.output.join(format!("manifest_{plan_name}.json"));
    write_output(&out_path, &manifest.to_json())?;

    let shape: Vec<String> = manifest
        .stages
        .iter()
        .map(|s| format!("{:?}x{}", s.levels, s.sample_ids.len()))
        .collect();
    println!(
        "curriculum: plan {} seed {} stages {} -> {}",
        plan_name,
        config.seed,
        shape.join(" "),
        out_path.display(),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// prompts
// ---------------------------------------------------------------------------

pub struct PromptArgs {
    pub test_prompt: bool,
    pub pick: Option<u64>,
    pub keyword: Option<String>,
    pub target: Option<String>,
    pub bank_file: Option<PathBuf>,
    pub out_file: Option<PathBuf>,
}

pub fn prompts(config: &PipelineConfig, args: &PromptArgs) -> Result<(), CliError> {
    let bank = match &args.bank_file {
        Some(path) => PromptBank::from_reader(open(path)?)?,
        None => PromptBank::builtin(),
    };

    if args.test_prompt {
        println!("{}", test_prompt());
        return Ok(());
    }

    if let Some(index) = args.pick {
        let prompt = bank.pick(index, config.seed);
        println!("{}\t{}", prompt.index, prompt.text);
        return Ok(());
    }

    if let Some(keyword) = &args.keyword {
        let target = args.target.clone().ok_or_else(|| {
            CliError::Validation("--target is required with --keyword".to_string())
        })?;
        let corpus_path = require(&config.corpus, "corpus", "corpus")?;
        let parsed = parse_corpus(open(&corpus_path)?)?;
        report_line_errors(&parsed.line_errors, "corpus")?;
        let (mut example_1, mut example_2) =
            select_example_pair(&parsed.records, &target, config.seed)?;
        // raw hateful text may only reach explicit output files under --redact
        if config.redact && args.out_file.is_none() {
            example_1 = redact_text(&example_1);
            example_2 = redact_text(&example_2);
        }
        let rendered = render_generation_prompt(&GenerationPromptInput {
            example_1,
            example_2,
            keyword: keyword.clone(),
            shared_target: target,
        })?;
        match &args.out_file {
            Some(path) => {
                write_output(path, &format!("{rendered}\n"))?;
                println!(
                    "prompts: generation prompt for keyword written -> {}",
                    path.display()
                );
            }
            None => println!("{rendered}"),
        }
        return Ok(());
    }

    // default: emit the instruction bank
    let contents = bank.to_file_contents();
    match &args.out_file {
        Some(path) => {
            write_output(path, &contents)?;
            println!(
                "prompts: instruction bank of {} entries -> {}",
                bank.len(),
                path.display()
            );
        }
        None => print!("{contents}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

pub fn score(config: &PipelineConfig, pairs_path: &Path) -> Result<(), CliError> {
    let pairs = parse_scoring_pairs(open(pairs_path)?)?;
    let report = evaluate_corpus(&pairs, config.aggregation)?;

    let report_path = config.output.join("report.json");
    write_output(&report_path, &report.to_json())?;
    print!("{}", report.render_table());

    let pooled = &report.pooled;
    let mar = pooled
        .mar
        .map(|v| format!("{v:.1}"))
        .unwrap_or_else(|| "n/a".to_string());
    println!(
        "score: {} utterances, pooled MAR {}, WER {:.1}, UMWER {:.1} -> {}",
        report.per_utterance.len(),
        mar,
        pooled.wer,
        pooled.umwer,
        report_path.display(),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// check-gradients
// ---------------------------------------------------------------------------

pub fn check_gradients(config: &PipelineConfig, seeds: u64, eps: f64) -> Result<(), CliError> {
    let report = run_gradient_suite(config.seed..config.seed + seeds, eps)?;
    println!(
        "check-gradients: {} seeds, eps {:e}, max relative error cross-entropy {:.3e}, kl {:.3e}",
        report.seeds_run, eps, report.cross_entropy_max_rel_error, report.kl_max_rel_error,
    );
    let worst = report
        .cross_entropy_max_rel_error
        .max(report.kl_max_rel_error);
    if worst >= 1e-4 {
        return Err(CliError::Validation(format!(
            "gradient check failed: max relative error {worst:.3e} >= 1e-4"
        )));
    }
    Ok(())
}
