use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cscf_core::grid::{
    deserialize_tensor, read_image, serialize_tensor, write_image, Dictionary, Image,
};
use cscf_core::solver::{reconstruct, StageParams};
use cscf_core::vgii::{encode, TransferOp};

fn cscf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cscf"))
        .args(args)
        .env("CSCF_LOG", "info")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, pairs: usize, size: usize) {
    let o = cscf(&[
        "synth",
        "--out",
        p(dir),
        "--pairs",
        &pairs.to_string(),
        "--size",
        &size.to_string(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn patches_full_size_copies_input() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, 2, 16);
    let out = t.path().join("patches");
    let o = cscf(&[
        "patches",
        "--input",
        p(&data),
        "--out",
        p(&out),
        "--size",
        "16",
        "--count",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for m in ["vis", "ir"] {
        let a = fs::read(data.join(format!("scene_01_{m}.pgm"))).unwrap();
        let b = fs::read(out.join(format!("scene_01_p000_{m}.pgm"))).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn patches_are_deterministic_and_aligned() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    fs::create_dir_all(&data).unwrap();
    let vis = Image::from_fn(20, 24, |y, x| ((y * 24 + x) % 256) as f64 / 255.0);
    write_image(&vis, data.join("a_vis.pgm")).unwrap();
    write_image(&vis, data.join("a_ir.pgm")).unwrap();
    let run = |name: &str| {
        let out = t.path().join(name);
        let o = cscf(&[
            "patches",
            "--input",
            p(&data),
            "--out",
            p(&out),
            "--size",
            "8",
            "--count",
            "5",
            "--seed",
            "3",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for i in 0..5 {
        let v = fs::read(a.join(format!("a_p{i:03}_vis.pgm"))).unwrap();
        assert_eq!(v, fs::read(b.join(format!("a_p{i:03}_vis.pgm"))).unwrap());
        assert_eq!(v, fs::read(a.join(format!("a_p{i:03}_ir.pgm"))).unwrap());
    }
}

#[test]
fn zero_patches_write_nothing() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, 1, 16);
    let out = t.path().join("patches");
    let o = cscf(&[
        "patches",
        "--input",
        p(&data),
        "--out",
        p(&out),
        "--count",
        "0",
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn undersized_images_are_skipped() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, 1, 16);
    let out = t.path().join("patches");
    let o = cscf(&[
        "patches",
        "--input",
        p(&data),
        "--out",
        p(&out),
        "--size",
        "32",
        "--count",
        "2",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("WARN"));
    assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn learn_reports_high_psnr_on_planted_data() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, 8, 32);
    let out = t.path().join("run");
    let o = cscf(&[
        "learn",
        "--input",
        p(&data),
        "--out",
        p(&out),
        "--set",
        "atoms=4",
        "--set",
        "checkpoint=true",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("residuals.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iteration,ell_S,ell_D,psnr"));
    let last: Vec<f64> = lines
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last[0], 50.0);
    assert!(last[3] >= 40.0, "psnr {}", last[3]);
    let d: Dictionary = deserialize_tensor(out.join("dictionary.cscf")).unwrap();
    assert_eq!((d.atoms(), d.kernel()), (4, 5));
}

#[test]
fn zero_sweeps_copy_the_initial_dictionary() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, 1, 16);
    let init = t.path().join("init.cscf");
    let o = cscf(&[
        "synth",
        "--out",
        p(&t.path().join("d")),
        "--pairs",
        "1",
        "--size",
        "8",
    ]);
    assert!(o.status.success());
    fs::copy(t.path().join("d/planted_dictionary.cscf"), &init).unwrap();
    let out = t.path().join("run");
    let o = cscf(&[
        "learn",
        "--input",
        p(&data),
        "--out",
        p(&out),
        "--init",
        p(&init),
        "--set",
        "outer_iters=0",
        "--set",
        "atoms=4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(&init).unwrap(),
        fs::read(out.join("dictionary.cscf")).unwrap()
    );
}

#[test]
fn missing_partner_is_named() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, 2, 16);
    fs::remove_file(data.join("scene_01_ir.pgm")).unwrap();
    let o = cscf(&[
        "learn",
        "--input",
        p(&data),
        "--out",
        p(&t.path().join("run")),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("scene_01_vis.pgm"), "{}", stderr(&o));
}

#[test]
fn config_file_is_read_and_echoed() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, 1, 16);
    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, "# small run\natoms = 3\nouter_iters = 2\n").unwrap();
    let o = cscf(&[
        "learn",
        "--config",
        p(&cfg),
        "--input",
        p(&data),
        "--out",
        p(&t.path().join("run")),
        "--set",
        "outer_iters=1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = stderr(&o);
    assert!(log.contains("atoms = 3"));
    assert!(log.contains("outer_iters = 1"));
    let csv = fs::read_to_string(t.path().join("run/residuals.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    fs::write(&cfg, "atoms: 3\n").unwrap();
    let o = cscf(&["learn", "--config", p(&cfg), "--input", p(&data)]);
    assert!(!o.status.success());
}

#[test]
fn fit_transfer_echoes_default_ridge() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, 2, 16);
    let dict = t.path().join("dict.cscf");
    fs::copy(data.join("planted_dictionary.cscf"), &dict).unwrap();
    let out = t.path().join("run");
    let o = cscf(&[
        "fit-transfer",
        "--dict",
        p(&dict),
        "--input",
        p(&data),
        "--out",
        p(&out),
        "--set",
        "provider=calibrated",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("ridge = 0.000001"));
    let op: TransferOp = deserialize_tensor(out.join("transfer.cscf")).unwrap();
    assert_eq!(op.atoms(), 4);
    assert!((op.ridge() - 1e-6).abs() < 1e-12);
    assert!(out.join("film.cscf").is_file());
}

#[test]
fn constant_pair_gives_intercept_only_transfer() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    fs::create_dir_all(&data).unwrap();
    write_image(&Image::filled(8, 8, 0.4), data.join("c_vis.pgm")).unwrap();
    write_image(&Image::filled(8, 8, 0.6), data.join("c_ir.pgm")).unwrap();
    let dict = t.path().join("dict.cscf");
    serialize_tensor(&Dictionary::identity(3).unwrap(), &dict).unwrap();
    let out = t.path().join("run");
    let o = cscf(&[
        "fit-transfer",
        "--dict",
        p(&dict),
        "--input",
        p(&data),
        "--out",
        p(&out),
        "--ridge",
        "0.01",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let op: TransferOp = deserialize_tensor(out.join("transfer.cscf")).unwrap();
    // a constant channel is indistinguishable from the intercept, which is
    // unpenalized and absorbs all of it
    assert!(op.mix()[0].abs() < 1e-3, "{:?}", op.mix());
}

#[test]
fn identity_transfer_fuses_to_visible_resynthesis() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, 1, 16);
    let dict_path = data.join("planted_dictionary.cscf");
    let op_path = t.path().join("identity.cscf");
    serialize_tensor(&TransferOp::identity(4), &op_path).unwrap();
    let out = t.path().join("fused");
    let o = cscf(&[
        "fuse",
        "--dict",
        p(&dict_path),
        "--transfer",
        p(&op_path),
        "--input",
        p(&data),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dict: Dictionary = deserialize_tensor(&dict_path).unwrap();
    let vis = read_image(data.join("scene_00_vis.pgm")).unwrap();
    let code = encode(&vis, &dict, &StageParams::default(), 20).unwrap();
    let resynth = reconstruct(&dict, &code).unwrap();
    let fused = read_image(out.join("scene_00_fused.pgm")).unwrap();
    for (a, b) in fused.data().iter().zip(resynth.data()) {
        assert!((a - b.clamp(0.0, 1.0)).abs() <= 0.5 / 255.0 + 1e-9);
    }
    let report = fs::read_to_string(out.join("fusion_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
}

#[test]
fn empty_input_gives_empty_report() {
    let t = tempfile::tempdir().unwrap();
    let empty = t.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let dict = t.path().join("dict.cscf");
    serialize_tensor(&Dictionary::identity(3).unwrap(), &dict).unwrap();
    let op = t.path().join("op.cscf");
    serialize_tensor(&TransferOp::identity(1), &op).unwrap();
    let out = t.path().join("out");
    let o = cscf(&[
        "fuse",
        "--dict",
        p(&dict),
        "--transfer",
        p(&op),
        "--input",
        p(&empty),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("WARN"));
    let report = fs::read_to_string(out.join("fusion_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1);
}

#[test]
fn metrics_rows_and_missing_files() {
    let t = tempfile::tempdir().unwrap();
    let flat = t.path().join("flat.pgm");
    write_image(&Image::filled(8, 8, 0.3), &flat).unwrap();
    let ramp = t.path().join("ramp.pgm");
    write_image(
        &Image::from_fn(16, 16, |y, x| (y * 16 + x) as f64 / 255.0),
        &ramp,
    )
    .unwrap();
    let missing = t.path().join("missing.pgm");
    let o = cscf(&["metrics", p(&flat), p(&missing), p(&ramp)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.pgm"));
    let csv = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], "path,ag,en,sf,ei");
    assert!(rows[1].ends_with(",0,0,0,0"), "{}", rows[1]);
    let en: f64 = rows[2].split(',').nth(2).unwrap().parse().unwrap();
    assert!((en - 8.0).abs() < 1e-12);

    let out = t.path().join("report");
    let o = cscf(&["metrics", p(t.path()), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(out.join("metrics.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}
