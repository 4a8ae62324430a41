use std::path::Path;
use std::process::{Command, Output};

use pstnet::cli::{load_campaign_config, TrainPlan};
use pstnet::sim::CampaignResult;

fn pstnet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pstnet"))
        .args(args)
        .current_dir(cwd)
        .env("PSTNET_OFFLINE", "1")
        .output()
        .unwrap()
}

fn stderr_first(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).lines().next().unwrap_or("").to_string()
}

const TINY: &str = "samples = 800\nseed = 2\nepochs = 4\n";

fn trained(dir: &Path) {
    std::fs::write(dir.join("tiny.cfg"), TINY).unwrap();
    let o = pstnet(&["train", "tiny.cfg", "--out", "models"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pstnet(&["train"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_first(&o).starts_with("error code=2 kind=usage message="), "{}", stderr_first(&o));
}

#[test]
fn unreadable_config_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pstnet(&["train", "nope.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr_first(&o).starts_with("error code=3 kind=config"));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
}

#[test]
fn train_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    let m = dir.path().join("models");
    let first = std::fs::read(m.join("pstnet.bin")).unwrap();
    assert!(first.len() < 2_560, "{} bytes", first.len());
    let card = std::fs::read_to_string(m.join("model_card.txt")).unwrap();
    for key in ["params_total", "params_gate", "params_experts", "params_film", "params_head", "serialized_bytes"] {
        assert!(card.lines().any(|l| l.starts_with(&format!("{key}\t"))), "{key}");
    }
    let history = std::fs::read_to_string(m.join("history.tsv")).unwrap();
    assert_eq!(history.lines().filter(|l| !l.starts_with('#')).count(), 4);

    let again = pstnet(&["train", "tiny.cfg", "--out", "models2"], dir.path());
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("models2/pstnet.bin")).unwrap(), first);
}

#[test]
fn campaign_lists_every_absent_model() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), "runs = 4\nestimators = pstnet, mlp, gbt, dryden\n").unwrap();
    let o = pstnet(&["campaign", "c.cfg", "--models", "empty"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let line = stderr_first(&o);
    for name in ["pstnet", "mlp", "gbt"] {
        assert!(line.contains(name), "{line}");
    }
    assert!(!line.contains("dryden"));
}

#[test]
fn two_model_campaign_table_matches_the_records() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    std::fs::write(dir.path().join("c.cfg"), "[campaign]\nruns = 18\nseed = 5\nestimators = pstnet, dryden\n").unwrap();
    let o = pstnet(&["campaign", "c.cfg", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    let table: Vec<&str> = summary
        .lines()
        .skip_while(|l| !l.starts_with("model\tparams"))
        .skip(1)
        .take_while(|l| !l.is_empty())
        .collect();
    assert_eq!(table.len(), 2, "{summary}");

    // the summary is a pure function of the records file
    let records = CampaignResult::from_tsv(&std::fs::read_to_string(out.join("results.tsv")).unwrap(), "dryden").unwrap();
    assert_eq!(records.runs.len(), 18);
    let recomputed = records.summary(5).unwrap();
    let delta = recomputed.comparison("pstnet").unwrap().mean_delta_pct;
    let row = table.iter().find(|l| l.starts_with("pstnet\t")).unwrap();
    let printed: f64 = row.split('\t').nth(5).unwrap().parse().unwrap();
    assert!((printed - delta).abs() < 0.005 + 1e-12, "{printed} vs {delta}");
    assert_eq!(recomputed.to_text(), summary);

    let cats = std::fs::read_to_string(out.join("per_category.tsv")).unwrap();
    assert_eq!(cats.lines().filter(|l| !l.starts_with('#')).count(), 6);
    let veh = std::fs::read_to_string(out.join("per_vehicle.tsv")).unwrap();
    assert_eq!(veh.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn infer_eval_and_grid_export_run_offline() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    let o = pstnet(&["infer", "--lat", "-33.5", "--lon", "151", "--level", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["k"].as_f64().unwrap() >= v["k_mo"].as_f64().unwrap());
    assert_eq!(v["source"], "fixture");

    let o = pstnet(&["infer", "--lat", "0", "--lon", "0", "--level", "8"], dir.path());
    assert_eq!(o.status.code(), Some(3));

    let o = pstnet(&["eval", "tiny.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().any(|l| l.starts_with("pstnet\t120\t")), "{text}");

    let o = pstnet(&["export-grid", "--level", "0", "--res", "5", "--bbox", "-10,-10,10,10", "--out", "g/grid.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = std::fs::read_to_string(dir.path().join("g/grid.tsv")).unwrap();
    assert_eq!(grid.lines().filter(|l| !l.starts_with('#')).count(), 16);
    assert!(grid.starts_with("# level=0 altitude_m=500 res=5 rows=4 cols=4 source=fixture"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let train = TrainPlan::load(&dir.join("train.cfg")).unwrap();
    assert_eq!((train.samples, train.train.epochs, train.baselines), (20_000, 300, true));
    let ablation = TrainPlan::load(&dir.join("train-unsupervised-gate.cfg")).unwrap();
    assert_eq!(ablation.train.lambda_gate, 0.0);
    let c = load_campaign_config(&dir.join("campaign.cfg")).unwrap();
    assert_eq!((c.runs, c.estimators.len(), c.reference.as_str()), (340, 5, "dryden"));
    let two = load_campaign_config(&dir.join("campaign-pstnet-dryden.cfg")).unwrap();
    assert_eq!(two.estimators, ["pstnet", "dryden"]);
}
