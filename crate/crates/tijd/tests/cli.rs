//! Black-box checks of the command-line interface: exit status
//! partition (0 model, 1 unsatisfiable, 2 error), output formats, and
//! the encode subcommand.

use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

const FACTS: &str = "
clause(s1). main_verb(s1,w1). aux_verb(w2,w1). s_adjunct(s1,a1).
verbt_word(w1,zijn). verbt_word(w2,zijn). adjt_word(a1,gisteren).
vform(w1,past_participle). vform(w2,present_tense).
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tijd"))
}

fn facts_file(contents: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn model_means_exit_zero_and_sorted_text() {
    let f = facts_file(FACTS);
    let out = run(&["solve", "--input", f.path().to_str().unwrap(), "--epoch", "2000-05-22"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("token_verb: [token_verb(w1,v_zijn),token_verb(w2,t_zijn)]"));
    assert!(text.contains("adjunct_verb: [adjunct_verb(a1,w1)]"));
    // one `name: [...]` line per nonempty predicate, sorted by name
    let names: Vec<&str> = text.lines().filter_map(|l| l.split(':').next()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn unsatisfiable_means_no_and_exit_one() {
    let f = facts_file(FACTS);
    let out = run(&[
        "solve",
        "--input",
        f.path().to_str().unwrap(),
        "--query",
        "utt(U) & sittime(evt(w1),T) & before(U,T)",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout(&out), "no\n");
}

#[test]
fn errors_mean_exit_two() {
    let out = run(&["solve", "--query", "utt("]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["solve", "--input", "/no/such/file"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["solve", "--epoch", "2000-13-01"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_input_yields_utterance_only_model() {
    let f = facts_file("");
    let out = run(&["solve", "--input", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(!text.trim().is_empty());
    for line in text.lines() {
        assert!(
            line.starts_with("sittime: [sittime(utt,"),
            "unexpected non-utterance atom line: {line}"
        );
    }
}

#[test]
fn epoch_anchors_labeled_times() {
    let f = facts_file("");
    let out = run(&["solve", "--input", f.path().to_str().unwrap(), "--epoch", "2024-03-01"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("ts(2024,3,1,"));
}

#[test]
fn json_output_is_stable_and_shaped() {
    let f = facts_file(FACTS);
    let arg = ["solve", "--input", f.path().to_str().unwrap(), "--format", "json"];
    let a = run(&arg);
    let b = run(&arg);
    assert_eq!(a.stdout, b.stdout, "output must be deterministic");

    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let models = v.as_array().unwrap();
    assert_eq!(models.len(), 1);
    let model = models[0].as_object().unwrap();
    let keys: Vec<&String> = model.keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted, "predicate keys must be in stable sorted order");
    let tv = model["token_verb"].as_array().unwrap();
    assert_eq!(tv.len(), 2);
    assert_eq!(tv[0]["functor"], "token_verb");
    // timestamps are calendar objects inside interval objects
    let sittime = &model["sittime"][0]["args"][1];
    assert!(sittime["start"]["year"].is_i64());
    assert!(sittime["end"]["hour"].is_i64());
}

#[test]
fn json_unsatisfiable_is_empty_array() {
    let f = facts_file(FACTS);
    let out = run(&[
        "solve",
        "--input",
        f.path().to_str().unwrap(),
        "--format",
        "json",
        "--query",
        "utt(U) & sittime(evt(w1),T) & before(U,T)",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v, serde_json::json!([]));
}

#[test]
fn all_models_enumerates_readings() {
    let f = facts_file(
        "main_verb(s1,w1). aux_verb(w2,w1). s_adjunct(s1,a1).
         verbt_word(w1,eten). verbt_word(w2,hebben). adjt_word(a1,om(4)).
         vform(w1,past_participle). vform(w2,past_tense).",
    );
    let out = run(&[
        "solve",
        "--input",
        f.path().to_str().unwrap(),
        "--all-models",
        "--max-models",
        "8",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn encode_feeds_solve() {
    let desc = facts_file(
        r#"{
            "clause": "s1",
            "verb_tokens": [
                {"token": "w1", "word": "zijn", "form": "past_participle"},
                {"token": "w2", "word": "zijn", "form": "present_tense"}
            ],
            "main_verb": "w1",
            "aux_verbs": [{"aux": "w2", "complement": "w1"}],
            "adjuncts": [{"token": "a1", "word": "gisteren"}]
        }"#,
    );
    let encoded = NamedTempFile::new().unwrap();
    let out = run(&[
        "encode",
        "--input",
        desc.path().to_str().unwrap(),
        "--output",
        encoded.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let solved = run(&["solve", "--input", encoded.path().to_str().unwrap()]);
    assert_eq!(solved.status.code(), Some(0));
    assert!(stdout(&solved).contains("adjunct_verb: [adjunct_verb(a1,w1)]"));
}

#[test]
fn encode_rejects_bad_descriptions() {
    let desc = facts_file(r#"{"clause": "s1", "verb_tokens": [], "main_verb": "w1"}"#);
    let out = run(&["encode", "--input", desc.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explicit_kb_paths_replace_the_default() {
    let kb = facts_file("p(X) <- q(X).");
    let f = facts_file("q(a).");
    let out = run(&[
        "solve",
        "--kb",
        kb.path().to_str().unwrap(),
        "--input",
        f.path().to_str().unwrap(),
        "--query",
        "p(a)",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}
