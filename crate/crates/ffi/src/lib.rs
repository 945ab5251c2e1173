//! C ABI for entlink.
//!
//! Every fallible function returns an [`EntlinkStatus`]; on failure a
//! message is available from [`entlink_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.
//! Strings returned by the library are owned by the caller and released with
//! [`entlink_string_free`].

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use entlink::blocking::{BlockingConfig, BlockingIndex};
use entlink::checkpoint::Checkpoint;
use entlink::linker::{link_mention, LinkerModel};
use entlink::model::{load_entities, normalize, KnowledgeBase, Mention};
use entlink::semantic::{BagOfEmbeddings, ContextEncoder};
use entlink::similarity::fuzzy_score;
use entlink::vectors::{load_word_vectors, WordVectors};
use entlink::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntlinkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// A record or word-vector file failed to parse.
    Parse = 3,
    Io = 4,
    Checkpoint = 5,
    ShapeMismatch = 6,
    InvalidArgument = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> EntlinkStatus {
    match e {
        Error::Io(_) => EntlinkStatus::Io,
        Error::Checkpoint(_) => EntlinkStatus::Checkpoint,
        Error::ShapeMismatch(_) => EntlinkStatus::ShapeMismatch,
        Error::MalformedRecord { .. }
        | Error::DuplicateId(_)
        | Error::EmptyName(_)
        | Error::EmptyMentionText(_)
        | Error::BadHeader(_)
        | Error::DimMismatch { .. }
        | Error::DuplicateToken(_)
        | Error::NonFiniteValue(_)
        | Error::CountMismatch { .. } => EntlinkStatus::Parse,
        _ => EntlinkStatus::InvalidArgument,
    }
}

struct Failure(EntlinkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EntlinkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EntlinkStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            EntlinkStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(EntlinkStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(EntlinkStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(EntlinkStatus::NullPointer, format!("`{name}` is null")))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(EntlinkStatus::Internal, "string contains a nul byte".into()))
}

fn open(path: &str) -> Result<BufReader<File>, Failure> {
    File::open(Path::new(path))
        .map(BufReader::new)
        .map_err(|e| Failure(EntlinkStatus::Io, format!("{path}: {e}")))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn entlink_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn entlink_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn entlink_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Averaged cosine/Levenshtein/Jaro score of two strings after normalization.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn entlink_fuzzy_score(a: *const c_char, b: *const c_char, out: *mut f64) -> EntlinkStatus {
    guard(|| {
        let (a, b) = (str_arg(a, "a")?, str_arg(b, "b")?);
        let out = out_arg(out, "out")?;
        *out = fuzzy_score(&normalize(a), &normalize(b))?.average;
        Ok(())
    })
}

/// An in-memory knowledge base with its blocking index.
pub struct EntlinkKb {
    kb: KnowledgeBase,
    index: BlockingIndex,
}

impl EntlinkKb {
    fn new(kb: KnowledgeBase) -> Self {
        let index = BlockingIndex::new(&kb);
        Self { kb, index }
    }
}

/// Loads a JSONL entity file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn entlink_kb_load(path: *const c_char, out: *mut *mut EntlinkKb) -> EntlinkStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let kb = load_entities(open(path)?)?;
        *out = Box::into_raw(Box::new(EntlinkKb::new(kb)));
        Ok(())
    })
}

/// Parses JSONL entity records held in memory.
///
/// # Safety
/// `jsonl` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn entlink_kb_from_jsonl(jsonl: *const c_char, out: *mut *mut EntlinkKb) -> EntlinkStatus {
    guard(|| {
        let text = str_arg(jsonl, "jsonl")?;
        let out = out_arg(out, "out")?;
        let kb = load_entities(text.as_bytes())?;
        *out = Box::into_raw(Box::new(EntlinkKb::new(kb)));
        Ok(())
    })
}

/// Number of entities, or 0 for a null handle.
///
/// # Safety
/// `kb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn entlink_kb_len(kb: *const EntlinkKb) -> usize {
    kb.as_ref().map_or(0, |k| k.kb.len())
}

/// # Safety
/// `kb` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn entlink_kb_free(kb: *mut EntlinkKb) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// Blocking candidates for one mention as a JSON array of
/// `{"mention_index","entity_id","fuzzy_score"}`, best first.
///
/// # Safety
/// `kb` must be a live handle, `text` a NUL-terminated string and
/// `out_json` writable. Free the result with [`entlink_string_free`].
#[no_mangle]
pub unsafe extern "C" fn entlink_kb_candidates(
    kb: *const EntlinkKb,
    text: *const c_char,
    threshold: f64,
    out_json: *mut *mut c_char,
) -> EntlinkStatus {
    guard(|| {
        let kb = kb
            .as_ref()
            .ok_or_else(|| Failure(EntlinkStatus::NullPointer, "`kb` is null".into()))?;
        let text = normalize(str_arg(text, "text")?);
        let out = out_arg(out_json, "out_json")?;
        let cfg = BlockingConfig::new(threshold)?;
        let c = kb.index.candidates(0, &text, &cfg)?;
        *out = to_c_string(serde_json::to_string(&c).expect("candidates serialize"))?;
        Ok(())
    })
}

/// A trained model bound to a knowledge base and word vectors.
pub struct EntlinkLinker {
    model: LinkerModel,
    kb: EntlinkKb,
    vectors: WordVectors,
    anchors: HashMap<String, Vec<f64>>,
    blocking: BlockingConfig,
}

/// Opens a checkpoint together with the entity and word-vector files it
/// should serve. The blocking threshold is the one recorded in the checkpoint.
///
/// # Safety
/// All paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn entlink_linker_open(
    checkpoint: *const c_char,
    entities: *const c_char,
    vectors: *const c_char,
    out: *mut *mut EntlinkLinker,
) -> EntlinkStatus {
    guard(|| {
        let ck_path = str_arg(checkpoint, "checkpoint")?;
        let (ent_path, vec_path) = (str_arg(entities, "entities")?, str_arg(vectors, "vectors")?);
        let out = out_arg(out, "out")?;
        let ck = Checkpoint::load(Path::new(ck_path))?;
        let cfg = ck.pipeline_config()?;
        let kb = load_entities(open(ent_path)?)?;
        let vectors = load_word_vectors(open(vec_path)?)?;
        if vectors.dim() != ck.vectors.dim || vectors.dim() != ck.model.scorer.mention_proj.input_dim() {
            return Err(Failure(
                EntlinkStatus::ShapeMismatch,
                format!("word vectors are {}-d, checkpoint expects {}-d", vectors.dim(), ck.vectors.dim),
            ));
        }
        let anchors = ck.model.entity_encoder.encode_all(&vectors, &kb)?;
        *out = Box::into_raw(Box::new(EntlinkLinker {
            model: ck.model,
            kb: EntlinkKb::new(kb),
            vectors,
            anchors,
            blocking: cfg.blocking,
        }));
        Ok(())
    })
}

/// # Safety
/// `linker` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn entlink_linker_free(linker: *mut EntlinkLinker) {
    if !linker.is_null() {
        drop(Box::from_raw(linker));
    }
}

/// Outcome of linking one mention.
#[repr(C)]
#[derive(Debug)]
pub struct EntlinkDecision {
    /// 1 when an entity passed the decision threshold.
    pub linked: i32,
    /// Chosen entity id, or null. Owned; release with [`entlink_decision_clear`].
    pub entity_id: *mut c_char,
    /// 1 when `score` is meaningful (at least one candidate was scored).
    pub has_score: i32,
    /// Score of the chosen entity, or of the best rejected candidate.
    pub score: f64,
    pub candidate_count: usize,
}

/// Releases the strings inside a decision and resets it.
///
/// # Safety
/// `d` must be null or point to a decision filled by [`entlink_link`].
#[no_mangle]
pub unsafe extern "C" fn entlink_decision_clear(d: *mut EntlinkDecision) {
    if let Some(d) = d.as_mut() {
        entlink_string_free(d.entity_id);
        d.entity_id = ptr::null_mut();
        d.linked = 0;
        d.has_score = 0;
        d.score = 0.0;
        d.candidate_count = 0;
    }
}

/// Links one mention. `context` may be null.
///
/// # Safety
/// `linker` must be a live handle, strings NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn entlink_link(
    linker: *const EntlinkLinker,
    doc_id: *const c_char,
    text: *const c_char,
    context: *const c_char,
    out: *mut EntlinkDecision,
) -> EntlinkStatus {
    guard(|| {
        let l = linker
            .as_ref()
            .ok_or_else(|| Failure(EntlinkStatus::NullPointer, "`linker` is null".into()))?;
        let mention = Mention {
            doc_id: str_arg(doc_id, "doc_id")?.to_string(),
            text: normalize(str_arg(text, "text")?),
            context: if context.is_null() {
                String::new()
            } else {
                normalize(str_arg(context, "context")?)
            },
            gold_id: None,
        };
        if mention.text.is_empty() {
            return Err(Failure(EntlinkStatus::InvalidArgument, "mention text is empty".into()));
        }
        let out = out_arg(out, "out")?;
        let candidates = l.kb.index.candidates(0, &mention.text, &l.blocking)?;
        let ctx = BagOfEmbeddings::new(&l.vectors).encode(&mention)?;
        let d = link_mention(&l.model, 0, &mention, &ctx, &candidates, &l.kb.kb, &l.anchors)?;
        *out = EntlinkDecision {
            linked: i32::from(d.linked),
            entity_id: match d.entity_id {
                Some(id) => to_c_string(id)?,
                None => ptr::null_mut(),
            },
            has_score: i32::from(d.score.is_some()),
            score: d.score.unwrap_or(0.0),
            candidate_count: d.candidate_count,
        };
        Ok(())
    })
}
