use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lodrefine::geometry::Vec3;
use lodrefine::model::{polygons_to_obj, CoarseModel};
use lodrefine::pointcloud::{write_ply, write_xyz, PointCloud};
use lodrefine::synth::{occluded_fixture, shifted_facade_box};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lodrefine"));
    c.env_remove("RUST_LOG");
    for (k, _) in std::env::vars() {
        if k.starts_with("LODREFINE_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn lodrefine")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_inputs(dir: &Path, model: &CoarseModel, cloud: &PointCloud) -> (PathBuf, PathBuf) {
    let m = dir.join(format!("{}.obj", model.id));
    std::fs::write(&m, polygons_to_obj(&model.faces, None)).unwrap();
    let c = dir.join(format!("{}.ply", model.id));
    write_ply(&c, &cloud.points, None).unwrap();
    (m, c)
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn refine_writes_model_report_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = shifted_facade_box(1);
    let (m, c) = write_inputs(tmp.path(), &fx.model, &fx.cloud);
    let out = tmp.path().join("out");
    let o = run(bin()
        .args(["refine", "--model"])
        .arg(&m)
        .arg("--cloud")
        .arg(&c)
        .arg("--out")
        .arg(&out)
        .args(["--dump-candidates", "--dump-confidence", "--debug-clusters"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "box.obj",
        "box.report.json",
        "box.match.json",
        "box.solve.json",
        "box.candidates.obj",
        "box.candidates.json",
        "box.confidence.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(out.join("box.clusters").is_dir());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("box.report.json")).unwrap()).unwrap();
    assert!(report["c2m_after"]["rmse"].as_f64().unwrap() < 0.02);
    assert_eq!(report["validity_after"]["watertight"], true);
    let mf = manifest(&out);
    assert_eq!(mf["command"], "refine");
    assert_eq!(mf["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(mf["buildings"][0]["status"], "refined");
    assert_eq!(mf["buildings"][0]["model_id"], "box");
}

#[test]
fn far_cloud_exits_with_no_match() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = shifted_facade_box(2);
    let far = fx.cloud.translated(&Vec3::new(200.0, 0.0, 0.0));
    let (m, c) = write_inputs(tmp.path(), &fx.model, &far);
    let out = tmp.path().join("out");
    let o = run(bin().args(["refine", "--model"]).arg(&m).arg("--cloud").arg(&c).arg("--out").arg(&out));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("NO_MATCH"));
    let mf = manifest(&out);
    assert_eq!(mf["buildings"][0]["status"], "failed");
    assert_eq!(mf["buildings"][0]["category"], "NO_MATCH");
}

#[test]
fn missing_input_exits_with_io_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["refine", "--model"])
        .arg(tmp.path().join("nope.obj"))
        .arg("--cloud")
        .arg(tmp.path().join("nope.ply"))
        .arg("--out")
        .arg(tmp.path().join("out")));
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[IO]"));
}

#[test]
fn malformed_cloud_exits_with_parse_code() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = shifted_facade_box(3);
    let (m, _) = write_inputs(tmp.path(), &fx.model, &fx.cloud);
    let c = tmp.path().join("bad.xyz");
    std::fs::write(&c, "1 2 3\n4 five 6\n").unwrap();
    let o = run(bin().args(["refine", "--model"]).arg(&m).arg("--cloud").arg(&c).arg("--out").arg(tmp.path()));
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn threshold_override_sources_and_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = occluded_fixture(4);
    let (m, c) = write_inputs(tmp.path(), &fx.model, &fx.cloud);
    let refine = |extra: &[&str], env: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["refine", "--model"]).arg(&m).arg("--cloud").arg(&c).arg("--out").arg(tmp.path().join("o"));
        cmd.args(extra);
        if let Some(v) = env {
            cmd.env("LODREFINE_SELECTION_TAU_COV", v);
        }
        code(&run(&mut cmd))
    };
    assert_eq!(refine(&[], None), 0);
    assert_eq!(refine(&["--set", "selection.tau_cov=0.9"], None), 3);
    assert_eq!(refine(&[], Some("0.9")), 3);
    // command line beats environment
    assert_eq!(refine(&["--set", "selection.tau_cov=0.3"], Some("0.9")), 0);
    // file sits below both
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(&cfg, "[selection]\ntau_cov = 0.9\n").unwrap();
    assert_eq!(refine(&["--config", cfg.to_str().unwrap()], None), 3);
    assert_eq!(refine(&["--config", cfg.to_str().unwrap()], Some("0.3")), 0);
    // unknown keys are rejected
    assert_eq!(refine(&["--set", "selection.nope=1"], None), 5);
    std::fs::write(&cfg, "[selection]\ntau = 0.9\n").unwrap();
    assert_eq!(refine(&["--config", cfg.to_str().unwrap()], None), 5);
}

#[test]
fn batch_routes_clouds_and_copies_the_rest() {
    let tmp = tempfile::tempdir().unwrap();
    let models_dir = tmp.path().join("models");
    std::fs::create_dir(&models_dir).unwrap();
    let fx = shifted_facade_box(5);
    let other = fx.model.translated(&Vec3::new(100.0, 0.0, 0.0));
    std::fs::write(models_dir.join("box.obj"), polygons_to_obj(&fx.model.faces, None)).unwrap();
    std::fs::write(models_dir.join("far.obj"), polygons_to_obj(&other.faces, None)).unwrap();
    let c = tmp.path().join("scan.xyz");
    write_xyz(&c, &fx.cloud.points).unwrap();
    let out = tmp.path().join("out");
    let o = run(bin()
        .args(["refine-batch", "--model"])
        .arg(&models_dir)
        .arg("--cloud")
        .arg(&c)
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("box.report.json").is_file());
    assert!(out.join("far.obj").is_file());
    assert!(!out.join("far.report.json").exists());
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_refined"], 1);
    assert_eq!(summary["n_skipped"], 1);
    let mf = manifest(&out);
    assert_eq!(mf["buildings"].as_array().unwrap().len(), 2);
}

#[test]
fn evaluate_sweep_export_and_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = shifted_facade_box(6);
    let (m, c) = write_inputs(tmp.path(), &fx.model, &fx.cloud);

    let o = run(bin().args(["evaluate", "--cloud"]).arg(&c).arg("--initial").arg(&m).arg("--refined").arg(&m));
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["c2m_before"], report["c2m_after"]);
    assert_eq!(report["delta_d"], 0.0);

    let sweep = tmp.path().join("sweep");
    let o = run(bin()
        .args(["sweep-tau", "--model"])
        .arg(&m)
        .arg("--cloud")
        .arg(&c)
        .args(["--taus", "0.2,0.4"])
        .arg("--out")
        .arg(&sweep));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(sweep.join("sweep.csv")).unwrap().lines().count(), 3);

    let lp = tmp.path().join("box.lp");
    let o = run(bin().args(["export-lp", "--model"]).arg(&m).arg("--cloud").arg(&c).arg("--out").arg(&lp));
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(&lp).unwrap().ends_with("End\n"));

    let dump = tmp.path().join("dump");
    let o = run(bin().args(["dump-candidates", "--model"]).arg(&m).arg("--cloud").arg(&c).arg("--out").arg(&dump));
    assert_eq!(code(&o), 0);
    assert!(dump.join("box.candidates.obj").is_file());
    assert!(dump.join("box.confidence.csv").is_file());
    assert_eq!(manifest(&dump)["command"], "dump-candidates");
}
