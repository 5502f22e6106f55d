use std::path::PathBuf;

use asymdelay::harness::{builtin, builtin_names, validate_scenario, Scenario};
use asymdelay::Error;

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn shipped_files_match_builtins() {
    for name in builtin_names() {
        let path = scenario_dir().join(format!("{name}.json"));
        assert!(validate_scenario(&path).unwrap().is_empty(), "{name}");
        assert_eq!(Scenario::load(&path).unwrap(), builtin(&name).unwrap(), "{name}");
    }
}

#[test]
fn validation_reports_field_paths_without_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin("spike_fig4").unwrap();
    s.m_events.push(asymdelay::AttackEvent::spike(-5.0, 10.0, 0.0));
    s.n_events = Some(vec![]);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, s.to_json()).unwrap();
    let problems = validate_scenario(&path).unwrap();
    let paths: Vec<&str> = problems.iter().map(|p| p.path.as_str()).collect();
    assert_eq!(paths, ["m_events[5].width_s", "n_events"]);

    std::fs::write(&path, "{ \"schema_version\": 1, ").unwrap();
    assert_eq!(validate_scenario(&path).unwrap().len(), 1);
    assert!(matches!(Scenario::load(&path), Err(Error::Schema(_))));
    assert!(matches!(validate_scenario(&dir.path().join("missing.json")), Err(Error::Io(_))));
}
