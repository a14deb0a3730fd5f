//! The command-line verbs, run as a subprocess.

mod common;

use std::process::Command;

use gazevo::core::cppn::{ActivationKind, ConnectionGene, Genome, Innovation, NodeId};
use gazevo::mesh_io::parse_stl;

fn gazevo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gazevo"))
}

#[test]
fn simulate_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let run = gazevo()
        .args(["simulate", "--target", "small-blue-oval", "--seed", "1", "--max-gens", "200", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.starts_with("target small-blue-oval seed 1: success after"), "{stdout}");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert_eq!(report["success"], true);
}

#[test]
fn simulate_with_no_generations_fails_immediately() {
    let run = gazevo().args(["simulate", "--target", "large-red-cone", "--max-gens", "0"]).output().unwrap();
    assert!(run.status.success());
    assert!(String::from_utf8(run.stdout).unwrap().contains("no success after 0 generations"));
}

#[test]
fn replay_and_export_a_recorded_session() {
    let store = tempfile::tempdir().unwrap();
    let session = common::record_scripted_session(store.path(), 3, 2);
    let run = gazevo().arg("replay").arg(&session).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8(run.stdout).unwrap().starts_with("replayed "));

    // any snapshot genome with a surface exports to a parseable STL
    let genomes = gazevo::store::snapshot_dir(&session, 0).join("genomes.json");
    let out = store.path().join("object.stl");
    let exported = (0..15).any(|i| {
        gazevo()
            .arg("export")
            .arg(&genomes)
            .args(["--index", &i.to_string(), "--resolution", "32", "--out"])
            .arg(&out)
            .status()
            .unwrap()
            .success()
    });
    assert!(exported);
    let stl = parse_stl(&std::fs::read(&out).unwrap()).unwrap();
    assert!(!stl.facets.is_empty());
}

#[test]
fn export_of_an_empty_object_fails() {
    let dir = tempfile::tempdir().unwrap();
    // a genome whose presence output is constantly negative
    let mut g = Genome::bare([ActivationKind::Linear; 4]);
    g.insert_connection(ConnectionGene {
        innovation: Innovation(0),
        source: NodeId::BIAS,
        target: NodeId::PRESENCE,
        weight: -1.0,
        enabled: true,
    });
    let genome = serde_json::to_string(&g).unwrap();
    let path = dir.path().join("g.json");
    std::fs::write(&path, genome).unwrap();
    let out = dir.path().join("o.stl");
    let run = gazevo().arg("export").arg(&path).arg("--out").arg(&out).output().unwrap();
    assert!(!run.status.success());
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&run.stderr).contains("no surface"));
}
