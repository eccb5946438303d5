use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lightinject(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lightinject"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

const HEADER: &str = "sample_id,phase,step_index,injected_power_uW,exposure_s,insertion_loss_dB\n";

fn series(id: &str, offset: f64) -> String {
    let a = 19.53;
    (1..=10)
        .map(|i| {
            let p = 200.0 * i as f64;
            let l = a * (1.0 - (-p / 300.0f64).exp()) / (1.0 - (-2000.0 / 300.0f64).exp());
            format!("{id},alteration,{},{p},300,{:.3}\n", i - 1, l + offset)
        })
        .collect()
}

#[test]
fn empty_data_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "empty.csv", "");
    let cfg = write(dir.path(), "fit.cfg", &format!("data = {data}\n"));
    let o = lightinject(&["fit-modulator", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("schema"), "{}", stderr(&o));
}

#[test]
fn ingestion_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{HEADER}PM-5,alteration,0,200,300,-1\n");
    let data = write(dir.path(), "bad.csv", &text);
    let cfg = write(dir.path(), "fit.cfg", &format!("data = {data}\n"));
    let o = lightinject(&["fit-modulator", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn diverging_replicate_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{HEADER}{}{}", series("PM-5", 0.0), series("PM-5/r2", 0.5));
    let data = write(dir.path(), "rep.csv", &text);
    let cfg = write(dir.path(), "fit.cfg", &format!("data = {data}\n"));
    let o = lightinject(&["fit-modulator", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("PM-5,PM,") && rows[1].ends_with(",ok"));
    assert!(rows[2].starts_with("PM-5/r2,PM,"));
    assert!(rows[2].contains("replicate_divergence"), "{}", rows[2]);
}

#[test]
fn bundled_fit_reports_pm5() {
    let o = lightinject(&["fit-modulator"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with(
        "sample_id,kind,delta_loss_max_db,p0_uW,recovery_tau_s,rms_residual_db,validation_flags\n"
    ));
    let pm5 = out.lines().find(|l| l.starts_with("PM-5,")).unwrap();
    let a: f64 = pm5.split(',').nth(2).unwrap().parse().unwrap();
    assert!((a - 19.53).abs() <= 0.05, "{a}");
}

#[test]
fn single_zero_delta_point() {
    let o = lightinject(&["sweep-delta", "--delta-loss-db", "0"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[1], "1.00000000000e0");
    assert_eq!(cells[2], cells[3]);
    assert_eq!(cells[2], cells[4]);
    assert_eq!(cells[2], cells[5]);
}

#[test]
fn delta_sweep_crosses_zero_and_decreases() {
    let o = lightinject(&["sweep-delta", "--total-loss-db", "12.22"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<Vec<f64>> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 61);
    for w in rows.windows(2) {
        assert!(w[1][4] <= w[0][4]);
        assert!(w[1][5] >= 0.0);
    }
    let crossing = rows
        .windows(2)
        .find(|w| w[0][4] > 0.0 && w[1][4] <= 0.0)
        .unwrap();
    assert!(crossing[0][0] >= 4.0 && crossing[1][0] <= 6.0);
}

#[test]
fn loss_sweep_zero_column_and_three_db_cutoff() {
    let o = lightinject(&["sweep-loss", "--delta-loss-db", "0,3", "--workers", "2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<Vec<f64>> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 77 * 2);
    let mut last_positive = [0.0, 0.0];
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][4], pair[0][6]);
        assert_eq!(pair[0][4], pair[0][5]);
        for (slot, row) in pair.iter().enumerate() {
            if row[6] > 0.0 {
                last_positive[slot] = row[0];
            }
        }
    }
    assert!(rows[0][4] > 0.0);
    assert!(rows[rows.len() - 2][4] <= 0.0);
    assert!(last_positive[1] < last_positive[0]);
}

#[test]
fn defense_zero_budget_has_no_finite_stack() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.cfg", "budget_db = 0\n");
    let o = lightinject(&["evaluate-defense", "--config", &cfg]);
    assert!(o.status.success());
    assert!(
        stderr(&o).contains("no finite stack suffices"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn defense_finite_minimum_for_small_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.cfg",
        "budget_db = 0.1\ninjected_uw = 2000\nsample = PM-5\n",
    );
    let o = lightinject(&["evaluate-defense", "--config", &cfg]);
    assert!(o.status.success());
    let err = stderr(&o);
    let line = err
        .lines()
        .find(|l| l.contains("minimum total defense"))
        .unwrap();
    let value: f64 = line
        .rsplit(" is ")
        .next()
        .unwrap()
        .trim_end_matches(" dB")
        .parse()
        .unwrap();
    assert!(value > 0.0 && value.is_finite());
}

#[test]
fn monitor_before_defenses_detects_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.cfg",
        "monitor_position = before\nmonitor_threshold_uw = 1\ninjected_uw = 2000\nisolator_db = 20\nfilter_db = 10\n",
    );
    let o = lightinject(&["evaluate-defense", "--config", &cfg]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 13);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    assert!(rows[0].starts_with("2.00000000000e3,3.00000000000e1,2.00000000000e0,"));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rates.csv");
    let p = path.display().to_string();
    let o = lightinject(&["sweep-delta", "--delta-loss-db", "0:1:0.5", "--out", &p]);
    assert!(o.status.success());
    assert!(stdout(&o).is_empty());
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 4);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "total_loss_db = 12\nnonsense = 1\n");
    let o = lightinject(&["sweep-delta", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2: nonsense"), "{}", stderr(&o));

    let o = lightinject(&[
        "sweep-delta",
        "--total-loss-db",
        "12",
        "--link-loss-db",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = lightinject(&["sweep-delta", "--delta-loss-db", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lightinject(&["sweep-delta", "--total-loss-db", "10,12"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hopeless_channel_exits_4() {
    let o = lightinject(&[
        "sweep-delta",
        "--total-loss-db",
        "60",
        "--delta-loss-db",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn link_loss_adds_detector_loss() {
    let a = lightinject(&[
        "sweep-delta",
        "--link-loss-db",
        "10",
        "--delta-loss-db",
        "0",
    ]);
    let b = lightinject(&[
        "sweep-delta",
        "--total-loss-db",
        "12.2184874961635637",
        "--delta-loss-db",
        "0",
    ]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}
