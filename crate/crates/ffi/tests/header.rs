use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(crate_dir().join("include/promptseg.h")).unwrap();
    for symbol in [
        "typedef enum PsStatus",
        "PS_STATUS_OK = 0",
        "typedef struct PsPromptSet PsPromptSet",
        "typedef struct PsConfusion PsConfusion",
        "ps_last_error_message(void)",
        "ps_box_iou(",
        "ps_nms(",
        "ps_softmax(",
        "ps_prompt_set_load(",
        "ps_prompt_set_canonicalize(",
        "ps_prompt_set_free(",
        "ps_confusion_new(",
        "ps_confusion_accumulate(",
        "ps_confusion_report(",
        "ps_confusion_free(",
        "ps_run(",
        "ps_evaluate(",
    ] {
        assert!(header.contains(symbol), "missing `{symbol}`");
    }
}

/// `target/<profile>`, derived from this test executable's location.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let lib = profile_dir().join("libpromptseg_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.is_file() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("static library or C compiler unavailable, skipping");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new(&cc)
        .arg(crate_dir().join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
