use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use nframes::config::{EmbedderSpec, RunConfig};
use nframes::eval::make_folds;
use nframes::pipeline::{train, Dataset, Method, Predictor};
use nframes::rbf::{FrameDescriptions, FramePrediction};
use nframes::synthetic::{generate, SyntheticConfig};
use nframes_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    nf_string_free(p);
    s
}

fn last_error() -> String {
    let p = nf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

#[test]
fn scalar_helpers_match_the_library() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(nf_harmonic_f1(0.51, 0.76, &mut out), NfStatus::Ok);
        assert_eq!(out, nframes::eval::harmonic_f1(0.51, 0.76));
        assert_eq!(nf_harmonic_f1(1.5, 0.2, &mut out), NfStatus::InvalidInput);
        assert!(last_error().contains("[0, 1]"));

        assert_eq!(
            nf_rouge_l(c("EPA").as_ptr(), c("the EPA").as_ptr(), &mut out),
            NfStatus::Ok
        );
        assert_eq!(out, nframes::agreement::rouge_l("EPA", "the EPA"));

        let rows = c("[[true,true,null],[false,false,false],[true,false,true]]");
        assert_eq!(
            nf_krippendorff_alpha_json(rows.as_ptr(), &mut out),
            NfStatus::Ok
        );
        let m = nframes::agreement::ReliabilityMatrix::from_rows(vec![
            vec![Some(true), Some(true), None],
            vec![Some(false), Some(false), Some(false)],
            vec![Some(true), Some(false), Some(true)],
        ])
        .unwrap();
        assert_eq!(out, nframes::agreement::krippendorff_alpha(&m).unwrap());
        assert_eq!(
            nf_krippendorff_alpha_json(c("[[tru").as_ptr(), &mut out),
            NfStatus::Parse
        );
    }
}

#[test]
fn hash_embed_fills_the_buffer() {
    let mut buf = vec![f64::NAN; 40];
    unsafe {
        assert_eq!(
            nf_hash_embed(c("carbon tax").as_ptr(), 32, buf.as_mut_ptr(), buf.len()),
            NfStatus::Ok
        );
    }
    assert_eq!(
        &buf[..32],
        nframes::embed::hash_embed("carbon tax", 32).values()
    );
    assert!(buf[32].is_nan());
    unsafe {
        assert_eq!(
            nf_hash_embed(c("x").as_ptr(), 32, buf.as_mut_ptr(), 16),
            NfStatus::BufferTooSmall
        );
        assert_eq!(
            nf_hash_embed(c("x").as_ptr(), 4, buf.as_mut_ptr(), 16),
            NfStatus::InvalidInput
        );
        assert_eq!(
            nf_hash_embed(c("x").as_ptr(), 8, ptr::null_mut(), 16),
            NfStatus::NullPointer
        );
    }
}

#[test]
fn invalid_utf8_is_reported() {
    let bad = [0xffu8 as c_char, 0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            nf_rouge_l(bad.as_ptr(), c("x").as_ptr(), &mut out),
            NfStatus::InvalidUtf8
        );
    }
    assert!(last_error().contains("UTF-8"));
}

#[test]
fn aggregate_reproduces_fixture_labels() {
    let text = std::fs::read_to_string(fixture("annotations.jsonl")).unwrap();
    let mut out = ptr::null_mut();
    let labels = unsafe {
        assert_eq!(nf_aggregate_json(c(&text).as_ptr(), &mut out), NfStatus::Ok);
        take(out)
    };
    let expected = std::fs::read_to_string(fixture("expected_labels.jsonl")).unwrap();
    let got: Vec<serde_json::Value> = labels
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let want: Vec<serde_json::Value> = expected
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g["article_id"], w["article_id"]);
        assert_eq!(g["frames"], w["frames"]);
    }

    let unknown = r#"{"article_id":"a","annotator_id":"x","answers":{"ZZ9":true}}"#;
    unsafe {
        assert_eq!(
            nf_aggregate_json(c(unknown).as_ptr(), &mut out),
            NfStatus::InvalidInput
        );
        assert!(out.is_null());
        assert_eq!(
            nf_aggregate_json(c("{not json").as_ptr(), &mut out),
            NfStatus::Parse
        );
    }
}

#[test]
fn model_handle_round_trip() {
    let corpus = generate(
        &SyntheticConfig {
            n_articles: 40,
            ..Default::default()
        },
        &FrameDescriptions::canonical(),
    );
    let ids: Vec<String> = corpus.labels.iter().map(|l| l.article_id.clone()).collect();
    let fold = make_folds(&ids, 1, 3).unwrap().remove(0);
    let mut cfg = RunConfig {
        embedder: EmbedderSpec::Hash { dim: 32 },
        ..Default::default()
    };
    cfg.train.epochs = 3;
    let data = Dataset::new(corpus.articles.clone(), &corpus.labels).unwrap();
    let model = train(Method::Rbf, &cfg, &data, &fold, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();

    let test: Vec<_> = corpus.articles[..5].to_vec();
    let mut jsonl = Vec::new();
    nframes::jsonl::write_jsonl_to(&mut jsonl, &test).unwrap();
    let direct = Predictor::new(model).unwrap().predict(&test, true).unwrap();

    unsafe {
        let mut handle = ptr::null_mut();
        let path = c(dir.path().to_str().unwrap());
        assert_eq!(nf_model_load(path.as_ptr(), &mut handle), NfStatus::Ok);
        assert!(!handle.is_null());

        let mut out = ptr::null_mut();
        assert_eq!(nf_model_method(handle, &mut out), NfStatus::Ok);
        assert_eq!(take(out), "rbf");

        let articles = c(std::str::from_utf8(&jsonl).unwrap());
        assert_eq!(
            nf_model_predict_json(handle, articles.as_ptr(), 1, &mut out),
            NfStatus::Ok
        );
        let preds: Vec<FramePrediction> = take(out)
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(preds, direct);

        assert_eq!(
            nf_model_predict_json(handle, c("{\"id\":1}").as_ptr(), 0, &mut out),
            NfStatus::Parse
        );
        assert!(out.is_null());
        assert_eq!(
            nf_model_predict_json(ptr::null(), articles.as_ptr(), 0, &mut out),
            NfStatus::NullPointer
        );
        nf_model_free(handle);
    }
}

#[test]
fn load_reports_missing_files() {
    let mut handle = ptr::null_mut();
    unsafe {
        assert_eq!(
            nf_model_load(c("/no/such/model").as_ptr(), &mut handle),
            NfStatus::Io
        );
        assert_eq!(
            nf_model_load(ptr::null(), &mut handle),
            NfStatus::NullPointer
        );
    }
    assert!(handle.is_null());
    assert!(last_error().contains("null"));
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(nf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/nframes.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for f in [
        "nf_last_error_message",
        "nf_version",
        "nf_string_free",
        "nf_model_load",
        "nf_model_free",
        "nf_model_method",
        "nf_model_predict_json",
        "nf_harmonic_f1",
        "nf_rouge_l",
        "nf_krippendorff_alpha_json",
        "nf_hash_embed",
        "nf_aggregate_json",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(text.contains("typedef struct NfModel NfModel;"));
    assert!(text.contains("NF_STATUS_OK = 0"));
}

/// Compile and run a C program against the header and the shared library.
#[test]
fn c_program_links_and_runs() {
    let Ok(exe) = std::env::current_exe() else {
        return;
    };
    let Some(lib_dir) = exe.parent().and_then(Path::parent) else {
        return;
    };
    if !lib_dir.join("libnframes_ffi.so").exists()
        || Command::new("cc").arg("--version").output().is_err()
    {
        eprintln!("skipping: shared library or C compiler not available");
        return;
    }
    let out_dir = tempfile::tempdir().unwrap();
    let bin = out_dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new("cc")
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg("-L")
        .arg(lib_dir)
        .arg("-lnframes_ffi")
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lm")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
