use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;
use std::sync::OnceLock;

use entlink::config::PipelineConfig;
use entlink::fixtures::{david_davis_politics_id, david_davis_probe, synthetic_corpus};
use entlink::pipeline;
use entlink::semantic::BagOfEmbeddings;
use entlink_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(entlink_last_error()) }.to_string_lossy().into_owned()
}

/// Corpus files plus a checkpoint trained on them, built once per test binary.
fn trained_dir() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("ffi-fixture");
        let corpus = synthetic_corpus(42);
        corpus.write(&dir).unwrap();
        let cfg = PipelineConfig::default();
        let ctx = BagOfEmbeddings::new(&corpus.vectors);
        let trained = pipeline::train(&corpus.kb, &corpus.mentions, &corpus.vectors, &ctx, &cfg).unwrap();
        trained
            .checkpoint(&cfg, &corpus.vectors)
            .save(&dir.join("model.json"))
            .unwrap();
        dir
    })
}

#[test]
fn fuzzy_score_matches_library() {
    let mut out = -1.0;
    let st = unsafe { entlink_fuzzy_score(c("Joe Adam").as_ptr(), c("joseph adam").as_ptr(), &mut out) };
    assert_eq!(st, EntlinkStatus::Ok);
    let want = entlink::similarity::fuzzy_score("joe adam", "joseph adam").unwrap().average;
    assert_eq!(out, want);
    assert_eq!(last_error(), "");

    let st = unsafe { entlink_fuzzy_score(c("same").as_ptr(), c("SAME").as_ptr(), &mut out) };
    assert_eq!(st, EntlinkStatus::Ok);
    assert_eq!(out, 1.0);
}

#[test]
fn null_and_utf8_errors() {
    let mut out = 0.0;
    let st = unsafe { entlink_fuzzy_score(ptr::null(), c("x").as_ptr(), &mut out) };
    assert_eq!(st, EntlinkStatus::NullPointer);
    assert!(last_error().contains("`a`"), "{}", last_error());

    let st = unsafe { entlink_fuzzy_score(c("x").as_ptr(), c("y").as_ptr(), ptr::null_mut()) };
    assert_eq!(st, EntlinkStatus::NullPointer);

    let bad = [0xffu8, 0xfe, 0];
    let st = unsafe { entlink_fuzzy_score(bad.as_ptr().cast::<c_char>(), c("x").as_ptr(), &mut out) };
    assert_eq!(st, EntlinkStatus::InvalidUtf8);

    let st = unsafe { entlink_fuzzy_score(c("").as_ptr(), c("  ").as_ptr(), &mut out) };
    assert_eq!(st, EntlinkStatus::InvalidArgument);
    assert!(!last_error().is_empty());

    // a success clears the message
    let st = unsafe { entlink_fuzzy_score(c("a").as_ptr(), c("a").as_ptr(), &mut out) };
    assert_eq!(st, EntlinkStatus::Ok);
    assert_eq!(last_error(), "");
}

#[test]
fn kb_candidates_as_json() {
    let jsonl = concat!(
        r#"{"id":"Q1","name":"Joseph Adam","description":"politician"}"#,
        "\n",
        r#"{"id":"Q2","name":"Elon Musk","description":"engineer"}"#,
        "\n",
        r#"{"id":"Q3","name":"Bill Gates","description":"programmer"}"#,
        "\n",
    );
    let mut kb = ptr::null_mut();
    let st = unsafe { entlink_kb_from_jsonl(c(jsonl).as_ptr(), &mut kb) };
    assert_eq!(st, EntlinkStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { entlink_kb_len(kb) }, 3);

    let mut json = ptr::null_mut();
    let st = unsafe { entlink_kb_candidates(kb, c("Joe Adam").as_ptr(), 0.5, &mut json) };
    assert_eq!(st, EntlinkStatus::Ok, "{}", last_error());
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { entlink_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 1, "{text}");
    assert_eq!(arr[0]["entity_id"], "Q1");

    let st = unsafe { entlink_kb_candidates(kb, c("x").as_ptr(), 1.5, &mut json) };
    assert_eq!(st, EntlinkStatus::InvalidArgument);
    let st = unsafe { entlink_kb_candidates(ptr::null(), c("x").as_ptr(), 0.5, &mut json) };
    assert_eq!(st, EntlinkStatus::NullPointer);

    unsafe { entlink_kb_free(kb) };
    unsafe { entlink_kb_free(ptr::null_mut()) };
    assert_eq!(unsafe { entlink_kb_len(ptr::null()) }, 0);
}

#[test]
fn kb_parse_and_io_errors() {
    let mut kb = ptr::null_mut();
    let st = unsafe { entlink_kb_from_jsonl(c("{\"id\":\"Q1\"}\nnot json\n").as_ptr(), &mut kb) };
    assert_eq!(st, EntlinkStatus::Parse);
    assert!(kb.is_null());
    assert!(last_error().contains("line 1"), "{}", last_error());

    let st = unsafe { entlink_kb_load(c("/nonexistent/entities.jsonl").as_ptr(), &mut kb) };
    assert_eq!(st, EntlinkStatus::Io);
    assert!(last_error().contains("/nonexistent/entities.jsonl"));
}

unsafe fn open_linker(dir: &Path) -> (EntlinkStatus, *mut EntlinkLinker) {
    let ck = c(dir.join("model.json").to_str().unwrap());
    let ent = c(dir.join("entities.jsonl").to_str().unwrap());
    let vec = c(dir.join("vectors.txt").to_str().unwrap());
    let mut linker = ptr::null_mut();
    let st = entlink_linker_open(ck.as_ptr(), ent.as_ptr(), vec.as_ptr(), &mut linker);
    (st, linker)
}

#[test]
fn linker_links_probe() {
    let dir = trained_dir();
    let (st, linker) = unsafe { open_linker(dir) };
    assert_eq!(st, EntlinkStatus::Ok, "{}", last_error());

    let probe = david_davis_probe(7);
    let mut d = EntlinkDecision {
        linked: 0,
        entity_id: ptr::null_mut(),
        has_score: 0,
        score: 0.0,
        candidate_count: 0,
    };
    let st = unsafe {
        entlink_link(
            linker,
            c(&probe.doc_id).as_ptr(),
            c(&probe.text).as_ptr(),
            c(&probe.context).as_ptr(),
            &mut d,
        )
    };
    assert_eq!(st, EntlinkStatus::Ok, "{}", last_error());
    assert_eq!(d.linked, 1);
    assert_eq!(d.has_score, 1);
    assert!(d.score > 0.5);
    assert!(d.candidate_count >= 2);
    let id = unsafe { CStr::from_ptr(d.entity_id) }.to_str().unwrap().to_owned();
    assert_eq!(id, david_davis_politics_id());
    unsafe { entlink_decision_clear(&mut d) };
    assert!(d.entity_id.is_null());

    // nothing in the KB resembles this: no candidates, no score
    let st = unsafe { entlink_link(linker, c("d").as_ptr(), c("qqqq zzzz").as_ptr(), ptr::null(), &mut d) };
    assert_eq!(st, EntlinkStatus::Ok, "{}", last_error());
    assert_eq!((d.linked, d.has_score, d.candidate_count), (0, 0, 0));
    assert!(d.entity_id.is_null());

    let st = unsafe { entlink_link(linker, c("d").as_ptr(), c("  ").as_ptr(), ptr::null(), &mut d) };
    assert_eq!(st, EntlinkStatus::InvalidArgument);
    let st = unsafe { entlink_link(ptr::null(), c("d").as_ptr(), c("x").as_ptr(), ptr::null(), &mut d) };
    assert_eq!(st, EntlinkStatus::NullPointer);

    unsafe { entlink_linker_free(linker) };
}

#[test]
fn linker_open_errors() {
    let dir = trained_dir();
    let tmp = tempfile::tempdir().unwrap();
    for f in ["model.json", "entities.jsonl", "vectors.txt"] {
        std::fs::copy(dir.join(f), tmp.path().join(f)).unwrap();
    }

    // vectors of the wrong width
    std::fs::write(tmp.path().join("vectors.txt"), "2 3\na 1 2 3\nb 4 5 6\n").unwrap();
    let (st, linker) = unsafe { open_linker(tmp.path()) };
    assert_eq!(st, EntlinkStatus::ShapeMismatch, "{}", last_error());
    assert!(linker.is_null());

    let text = std::fs::read_to_string(dir.join("model.json")).unwrap();
    std::fs::write(tmp.path().join("model.json"), text.replacen("\"version\": 1", "\"version\": 9", 1)).unwrap();
    let (st, _) = unsafe { open_linker(tmp.path()) };
    assert_eq!(st, EntlinkStatus::Checkpoint);
    assert!(last_error().contains("version 9"), "{}", last_error());
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(entlink_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "entlink.h"

int main(void) {
    double s = 0.0;
    if (entlink_fuzzy_score("david davis", "David Davis", &s) != ENTLINK_STATUS_OK || s != 1.0) return 1;
    if (entlink_fuzzy_score(NULL, "x", &s) != ENTLINK_STATUS_NULL_POINTER) return 2;
    if (entlink_last_error()[0] == '\0') return 3;
    EntlinkKb *kb = NULL;
    if (entlink_kb_from_jsonl("{\"id\":\"Q1\",\"name\":\"Joseph Adam\"}\n", &kb) != ENTLINK_STATUS_OK) return 4;
    if (entlink_kb_len(kb) != 1) return 5;
    char *json = NULL;
    if (entlink_kb_candidates(kb, "joe adam", 0.5, &json) != ENTLINK_STATUS_OK) return 6;
    printf("%s\n", json);
    entlink_string_free(json);
    entlink_kb_free(kb);
    return 0;
}
"#;

/// Compiles a C client against the generated header and the static library.
#[test]
fn c_client_builds_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libentlink_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("client.c");
    let bin = tmp.path().join("client");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("\"entity_id\":\"Q1\""), "{stdout}");
}
