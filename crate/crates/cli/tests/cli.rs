use std::path::PathBuf;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lora-capacity");

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn lora(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("LORA_CAPACITY_CONFIG_DIR").output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn csv_outputs_start_with_the_schema_line() {
    for args in [vec!["toa"], vec!["sf-dist"], vec!["fig2", "--max-devices", "10"], vec!["table1", "--devices", "250"]]
    {
        let text = stdout(&lora(&args));
        assert!(text.starts_with("#schema=1\n"), "{args:?}");
    }
}

#[test]
fn table1_row_for_500_devices_and_30_bytes() {
    let text = stdout(&lora(&["table1", "--devices", "500", "--payloads", "30"]));
    let row: Vec<f64> = text.lines().nth(2).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[2] - 117.0).abs() < 117.0 * 0.05, "{row:?}");
    assert!((row[4] - 870.0).abs() < 870.0 * 0.05, "{row:?}");
    assert!((row[5] - 13.45).abs() < 0.5, "{row:?}");
}

#[test]
fn fig3_saturates_above_the_optimum() {
    let text = stdout(&lora(&["fig3", "--devices", "250", "--lambda-min", "5000", "--lambda-max", "100000"]));
    let thr: Vec<f64> = text.lines().skip(2).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(thr.len() > 5);
    assert!(thr.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-9), "{thr:?}");
}

#[test]
fn fig2_single_device_is_at_its_cap() {
    let text = stdout(&lora(&["fig2", "--max-devices", "1"]));
    let row: Vec<f64> = text.lines().nth(2).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[0], 1.0);
    assert_eq!(row[1], row[2]);
}

#[test]
fn simulated_columns_are_appended() {
    let text = stdout(&lora(&[
        "table1",
        "--devices",
        "250",
        "--payloads",
        "10",
        "--simulate",
        "2",
        "--sim-duration-s",
        "900",
    ]));
    assert!(text.lines().nth(1).unwrap().ends_with(",sim_per_node_pkt_per_h,sim_half_width"));
    assert_eq!(text.lines().nth(2).unwrap().split(',').count(), 9);
}

#[test]
fn empirical_sf_frequencies_are_close_to_the_analytic_ones() {
    let text = stdout(&lora(&["sf-dist", "--empirical", "200000"]));
    for line in text.lines().skip(2) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((f[1] - f[3]).abs() < 0.005, "{line}");
    }
    let single = stdout(&lora(&["sf-dist", "--preset", "single-ring"]));
    assert!(single.lines().nth(2).unwrap().starts_with("7,1.000000,"));
}

#[test]
fn config_errors_exit_with_2() {
    assert_eq!(lora(&["sf-dist", "--preset", "nowhere"]).status.code(), Some(2));
    assert_eq!(lora(&["table1", "--payloads", "60"]).status.code(), Some(2));
    assert_eq!(lora(&["simulate", "missing.toml"]).status.code(), Some(2));
    assert_eq!(lora(&["simulate"]).status.code(), Some(2));
    let bad = scratch("unknown-key.toml");
    std::fs::write(&bad, "[traffic]\nn_devices = 10\nlambda = 3\n").unwrap();
    assert_eq!(lora(&["simulate", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_3() {
    let target = scratch("no-such-dir").join("out.csv");
    let out = lora(&["toa", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_dir_variable_resolves_relative_paths() {
    let out = Command::new(BIN)
        .args(["simulate", "--seeds", "1", "--config", "example.toml"])
        .env("LORA_CAPACITY_CONFIG_DIR", scenarios())
        .output()
        .unwrap();
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("1,")).count(), 7);
}

#[test]
fn out_flag_matches_stdout() {
    let path = scratch("toa.csv");
    stdout(&lora(&["toa", "--out", path.to_str().unwrap()]));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout(&lora(&["toa"])));
}

#[test]
fn shipped_scenarios_run_and_pass_the_audit() {
    for name in ["example.toml", "smart-lighting-avalanche.toml", "metering-periodic.toml"] {
        let path = scenarios().join(name);
        let text = stdout(&lora(&["simulate", "--seeds", "1", "--audit", path.to_str().unwrap()]));
        assert!(text.lines().any(|l| l.starts_with("1,all,")), "{name}");
    }
}

#[test]
fn avalanche_reports_time_to_drain() {
    let path = scenarios().join("smart-lighting-avalanche.toml");
    let text = stdout(&lora(&["simulate", "--seeds", "1", path.to_str().unwrap()]));
    let header: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let total: Vec<&str> = text.lines().find(|l| l.starts_with("1,all,")).unwrap().split(',').collect();
    let drain: f64 = total[header.iter().position(|h| *h == "drain_time_s").unwrap()].parse().unwrap();
    assert!(drain > 0.0 && drain < 60.0, "{drain}");
}

#[test]
fn trace_file_is_written() {
    let trace = scratch("trace.csv");
    let path = scenarios().join("example.toml");
    stdout(&lora(&["simulate", "--seeds", "1", "--trace", trace.to_str().unwrap(), path.to_str().unwrap()]));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("#schema=1\ntime_us,"));
    assert!(text.lines().count() > 1000);
}

#[test]
fn sweep_over_ack_fraction_lowers_goodput() {
    let path = scenarios().join("example.toml");
    let text = stdout(&lora(&[
        "sweep",
        "--config",
        path.to_str().unwrap(),
        "--seeds",
        "2",
        "--param",
        "ack-fraction",
        "--values",
        "0,1",
    ]));
    assert!(text.lines().nth(1).unwrap().starts_with("ack_fraction,seed,"));
    let delivered = |v: &str| -> u64 {
        text.lines()
            .filter(|l| l.starts_with(&format!("{v},")) && l.contains(",all,"))
            .map(|l| l.split(',').nth(6).unwrap().parse::<u64>().unwrap())
            .sum()
    };
    assert!(delivered("1") < delivered("0"));
}
