use std::path::Path;
use std::process::{Command, Output};

fn ca(project: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ca"))
        .arg("--project")
        .arg(project)
        .args(args)
        .env_remove("CA_PROVIDER")
        .env_remove("CA_FIXTURES")
        .output()
        .expect("run ca")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn init() -> (tempfile::TempDir, std::path::PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let project = tmp.path().join("bank");
    let o = ca(&project, &["init"]);
    assert!(o.status.success(), "{o:?}");
    (tmp, project)
}

#[test]
fn init_validate_train() {
    let (_tmp, p) = init();
    let o = ca(&p, &["validate"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ok: 5 intents"));
    let o = ca(&p, &["train"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("usable examples: 50"), "{out}");
    assert!(out.contains("leave-one-out accuracy: 0.900"), "{out}");
    assert_eq!(ca(&p, &["init"]).status.code(), Some(1));
}

#[test]
fn invalid_projects_exit_with_one() {
    let (_tmp, p) = init();
    let forms = std::fs::read_to_string(p.join("forms.yaml")).unwrap();
    std::fs::write(
        p.join("forms.yaml"),
        forms.replace("intent: transfer_money", "intent: no_such_intent"),
    )
    .unwrap();
    let o = ca(&p, &["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("no_such_intent"), "{}", stdout(&o));

    let o = ca(&p, &["serve", "--port", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("refusing to start"));

    let missing = p.join("nowhere");
    assert_eq!(ca(&missing, &["validate"]).status.code(), Some(1));
}

#[test]
fn provider_failures_exit_with_two() {
    let (_tmp, p) = init();
    let o = ca(&p, &["gen", "entities", "--domain", "agriculture"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no fixture"));

    std::fs::write(p.join("empty.yaml"), "fixtures: []\n").unwrap();
    let o = ca(
        &p,
        &[
            "--fixtures",
            p.join("empty.yaml").to_str().unwrap(),
            "gen",
            "persona",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{o:?}");
}

#[test]
fn generate_review_and_render() {
    let (_tmp, p) = init();
    let o = ca(
        &p,
        &[
            "gen",
            "localize",
            "--keys",
            "product_unavailable,reconsider_cancel,agent_handoff",
            "--locales",
            "de,de-CH-x-dialect,es,fr",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    assert_eq!(
        stdout(&o)
            .lines()
            .filter(|l| l.starts_with("staged"))
            .count(),
        12
    );

    let list = stdout(&ca(&p, &["review", "list"]));
    assert_eq!(list.lines().count(), 13);

    let o = ca(&p, &["review", "approve", "stg-0001"]);
    assert!(o.status.success(), "{o:?}");
    let o = ca(&p, &["review", "reject", "stg-0002"]);
    assert!(o.status.success());
    assert_eq!(
        ca(&p, &["review", "approve", "stg-0002"]).status.code(),
        Some(1)
    );
    assert_eq!(
        ca(&p, &["review", "reject", "stg-0999"]).status.code(),
        Some(1)
    );

    let templates = std::fs::read_to_string(p.join("templates.yaml")).unwrap();
    assert!(templates.contains("Es tut mir leid, Ihnen mitteilen zu m\u{fc}ssen"));
    assert!(!templates.contains("Ich bitte Sie inst\u{e4}ndig, die K\u{fc}ndigung"));
    assert_eq!(stdout(&ca(&p, &["review", "list"])).lines().count(), 11);
    assert_eq!(
        stdout(&ca(&p, &["review", "list", "--all"]))
            .lines()
            .count(),
        13
    );
    assert!(ca(&p, &["validate"]).status.success());
    assert!(p.join("llm_audit.jsonl").exists());
}

#[test]
fn chat_reads_stdin() {
    use std::io::Write;
    let (_tmp, p) = init();
    let mut child = Command::new(env!("CARGO_BIN_EXE_ca"))
        .arg("--project")
        .arg(&p)
        .arg("chat")
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(
            b"I need to close my bank account, what information do you need from me?\n/quit\n",
        )
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("reconsider"), "{}", stdout(&o));
}
