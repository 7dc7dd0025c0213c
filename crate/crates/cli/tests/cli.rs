use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn linklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linklab"))
        .args(args)
        .output()
        .expect("spawn linklab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn flat_channel(dir: &Path) -> Output {
    linklab(&[
        "channel",
        "--grid-n",
        "64",
        "--duration",
        "0.001",
        "--turbulence-scale",
        "0",
        "-o",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn bounds_prints_csv_table() {
    let o = linklab(&["bounds", "--snr", "0,8"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "snr_db,crb,bpsk_as_written,bpsk_penalty,ber_theory");
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("8,"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&linklab(&["bogus"])), 1);
    assert_eq!(code(&linklab(&["link", "--set", "no-equals-sign"])), 1);
    assert_eq!(code(&linklab(&["link", "--set", "link.nope=3"])), 1);
    assert_eq!(code(&linklab(&["link", "--esn0", "not-a-number"])), 1);
    assert_eq!(code(&linklab(&["--help"])), 0);
}

#[test]
fn short_run_reports_no_lock() {
    let dir = tempfile::tempdir().unwrap();
    let o = linklab(&["link", "--duration", "1e-5", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report.is_object());
}

#[test]
fn turbulence_free_channel_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = flat_channel(dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for tag in ["ao", "noao"] {
        let csv = fs::read_to_string(dir.path().join(format!("channel_{tag}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t_s,rho_rel,rho_rel_db,phi_rad"));
        let rows: Vec<Vec<f64>> = lines
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 5);
        for r in rows {
            assert!((r[1] - 1.0).abs() < 1e-9 && r[3].abs() < 1e-9, "{r:?}");
        }
        let fsoc = fs::read(dir.path().join(format!("channel_{tag}.fsoc"))).unwrap();
        assert_eq!(&fsoc[..4], b"FSOC");
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&flat_channel(a.path())), 0);
    assert_eq!(code(&flat_channel(b.path())), 0);
    let chan = a.path().join("channel_ao.fsoc");
    for dir in [&a, &b] {
        let o = linklab(&[
            "link",
            "--channel",
            chan.to_str().unwrap(),
            "--duration",
            "2e-5",
            "--seed",
            "9",
            "-o",
            dir.path().to_str().unwrap(),
        ]);
        assert!(matches!(code(&o), 0 | 3));
    }
    for name in ["channel_ao.fsoc", "channel_noao.csv", "report.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn sweep_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = linklab(&[
        "sweep",
        "--snr",
        "6,10",
        "--seeds",
        "2",
        "--duration",
        "1e-5",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("snr_db,"), "{header}");
    assert_eq!(lines.count(), 4);
}

#[test]
fn config_flag_and_set_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(&path, "[link]\nesn0_db = 3.0\n").unwrap();
    let o = linklab(&["config", "-c", path.to_str().unwrap()]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("esn0_db = 3.0"));
    let o = linklab(&["config", "-c", path.to_str().unwrap(), "--set", "link.esn0_db=5"]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("esn0_db = 5.0"));
}
