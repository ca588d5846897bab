use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pf"))
        .args(args)
        .env_remove("PF_LLM_URL")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn workspace() -> tempfile::TempDir {
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/examples/gym");
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(src).unwrap() {
        let path = entry.unwrap().path();
        fs::copy(&path, dir.path().join(path.file_name().unwrap())).unwrap();
    }
    dir
}

fn file_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_json_report() {
    let ws = workspace();
    let out = pf(&["validate", ws.path().to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn validate_reports_broken_agent() {
    let ws = workspace();
    let agent = ws.path().join("gym.agent");
    let source = fs::read_to_string(&agent).unwrap();
    fs::write(&agent, source.replacen("-> Idle", "-> Nowhere", 1)).unwrap();
    let out = pf(&["validate", ws.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("Nowhere"));
}

#[test]
fn personalize_then_diff() {
    let ws = workspace();
    let dir = ws.path().to_str().unwrap();
    let out = pf(&["personalize", dir, "--map", "elderly", "--mock"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("3 predefined response(s) changed"));

    let base = ws.path().join("gym.agent");
    let adapted = ws.path().join("gym.elderly.agent");
    let out = pf(&[
        "diff",
        base.to_str().unwrap(),
        adapted.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let diff: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(diff["text_changes"].as_array().unwrap().len(), 3);

    // Derived files do not disturb later runs.
    let out = pf(&["validate", dir]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn generate_reuses_reviewed_agent() {
    let ws = workspace();
    let dir = ws.path().to_str().unwrap();
    assert!(pf(&["personalize", dir, "--map", "paraplegic", "--mock"])
        .status
        .success());
    let adapted = ws.path().join("gym.paraplegic.agent");
    let edited = fs::read_to_string(&adapted)
        .unwrap()
        .replacen("[", "[reviewed] [", 1);
    fs::write(&adapted, edited).unwrap();

    let out = pf(&["generate", dir, "--map", "paraplegic"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let bundle = fs::read_to_string(ws.path().join("gym.paraplegic.pab")).unwrap();
    assert!(bundle.contains("[reviewed]"));
}

#[test]
fn unknown_mapping_is_a_usage_error() {
    let ws = workspace();
    let before = file_names(ws.path());
    let out = pf(&[
        "generate",
        ws.path().to_str().unwrap(),
        "--map",
        "nobody",
        "--mock",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("elderly"));
    assert_eq!(file_names(ws.path()), before);
}

#[test]
fn missing_workspace_is_a_usage_error() {
    let out = pf(&["validate", "/definitely/not/here"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unconfigured_llm_writes_nothing() {
    let ws = workspace();
    let before = file_names(ws.path());
    let out = pf(&[
        "personalize",
        ws.path().to_str().unwrap(),
        "--map",
        "elderly",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(file_names(ws.path()), before);
}

#[test]
fn chat_with_mock_bundle() {
    use std::io::Write;
    use std::process::Stdio;

    let ws = workspace();
    let dir = ws.path().to_str().unwrap();
    assert!(pf(&["generate", dir, "--map", "elderly", "--mock"])
        .status
        .success());
    let bundle = ws.path().join("gym.elderly.pab");
    let mut child = Command::new(env!("CARGO_BIN_EXE_pf"))
        .args(["chat", bundle.to_str().unwrap(), "--mock"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"what should I eat\n/quit\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("agent>"));
    assert!(text.contains("spoken"));
}
