//! Fixture generation and process helpers shared by the CLI tests.

use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

pub const PERIODS: [&str; 7] = [
    "Roman",
    "Gothic",
    "Renaissance",
    "Baroque",
    "Neoclassical",
    "Modern",
    "Contemporary",
];

pub const ROOF: [&str; 7] = [
    "spire",
    "dome",
    "flat roof",
    "sloped roof",
    "gabled roof",
    "mansard roof",
    "butterfly roof",
];

/// 40 records in four (decade, continent) strata of ten members each, so the
/// stratified split lands on exactly 24/8/8. Four records have no GPS, some
/// have no density, and renovation status rotates through all four values.
pub fn write_fixture(dir: &Path) {
    let strata: [(i32, &str); 4] = [
        (1900, "Europe"),
        (1720, "Europe"),
        (1450, "Asia"),
        (1980, "Americas"),
    ];
    let renovation = ["Never", "Renovated", "Rebuilt", "Unknown"];
    let views = [50u64, 500, 5_000, 50_000, 500_000];

    let mut manifest = String::new();
    let mut images = String::new();
    for i in 0..40usize {
        let (decade, continent) = strata[i / 10];
        let year = decade + (i % 10) as i32;
        let id = format!("b{i:02}");
        write!(
            manifest,
            "{{\"id\":\"{id}\",\"year\":{year},\"continent\":\"{continent}\",\
             \"pageviews\":{},\"renovation\":\"{}\"",
            views[i % 5],
            renovation[i % 4]
        )
        .unwrap();
        if i % 10 != 3 {
            let lat = -50.0 + 2.3 * i as f64;
            let lon = -120.0 + 5.1 * i as f64;
            write!(manifest, ",\"lat\":{lat},\"lon\":{lon}").unwrap();
        }
        if i % 7 != 6 {
            write!(manifest, ",\"density\":{}", 40.0 + 90.0 * i as f64).unwrap();
        }
        manifest.push_str("}\n");

        let s = (i / 10) as f64;
        images.push_str(&id);
        for k in 0..12 {
            let v = (s * 1.3 + k as f64 * 0.7).cos() + 0.2 * (i as f64 * 0.37 + k as f64).sin();
            write!(images, ",{v:.6}").unwrap();
        }
        images.push('\n');
    }
    std::fs::write(dir.join("manifest.jsonl"), manifest).unwrap();
    std::fs::write(dir.join("images.csv"), images).unwrap();

    let mut styles = String::new();
    for (i, name) in PERIODS.iter().enumerate() {
        styles.push_str(name);
        for k in 0..8 {
            write!(styles, ",{:.6}", (0.7 * i as f64 * k as f64 + i as f64).cos()).unwrap();
        }
        styles.push('\n');
    }
    std::fs::write(dir.join("styles.csv"), styles).unwrap();

    let mut reasons = String::new();
    for (j, label) in ROOF.iter().enumerate() {
        write!(reasons, "roof/{label}").unwrap();
        for k in 0..8 {
            let v = (0.3 * (j + 1) as f64 * (k + 1) as f64 - j as f64).sin();
            write!(reasons, ",{v:.6}").unwrap();
        }
        reasons.push('\n');
    }
    std::fs::write(dir.join("reasons.csv"), reasons).unwrap();

    std::fs::write(
        dir.join("train.cfg"),
        "epochs = 2\nbatch_size = 8\nlr_main = 1e-3\n",
    )
    .unwrap();
}

pub fn yearguessr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_yearguessr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary launches")
}

/// Run and demand success; returns stdout.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = yearguessr(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Run and demand a specific exit code; returns stdout and stderr combined.
pub fn fails_with(dir: &Path, args: &[&str], code: i32) -> String {
    let out = yearguessr(dir, args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "command {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}
