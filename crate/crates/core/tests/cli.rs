use std::path::Path;
use std::process::{Command, Output};

fn fairmesh(args: &[&std::ffi::OsStr]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairmesh")).args(args).output().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<&std::ffi::OsStr> = ["synth", "--image-size", "160", "--out-dir"].iter().map(|s| s.as_ref()).collect();
    args.push(dir.as_os_str());
    args.extend(extra.iter().map(|s| std::ffi::OsStr::new(*s)));
    fairmesh(&args)
}

fn fair(data: &Path, mesh: &str, out: &Path, trace: &Path, extra: &[&str]) -> Output {
    let mesh = data.join(mesh);
    let cams = data.join("cams.txt");
    let images = data.join("images");
    let mut args: Vec<&std::ffi::OsStr> = vec![
        "fair".as_ref(),
        "--mesh".as_ref(),
        mesh.as_os_str(),
        "--cams".as_ref(),
        cams.as_os_str(),
        "--images".as_ref(),
        images.as_os_str(),
        "--out".as_ref(),
        out.as_os_str(),
        "--trace".as_ref(),
        trace.as_os_str(),
    ];
    args.extend(extra.iter().map(|s| std::ffi::OsStr::new(*s)));
    fairmesh(&args)
}

const CHEAP: &[&str] = &["--cell-size", "24", "--levels", "1", "--max-iters", "2", "--sweeps", "1"];

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(synth(&a, &["--perturb", "A:0.05"]).status.success());
    assert!(synth(&b, &["--perturb", "A:0.05"]).status.success());
    for file in ["cube.obj", "cube_perturbed.obj", "cams.txt", "images/view_00.pgm", "images/view_11.pgm"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert_ne!(
        std::fs::read(a.join("cube.obj")).unwrap(),
        std::fs::read(a.join("cube_perturbed.obj")).unwrap()
    );
}

#[test]
fn camera_image_count_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("scene");
    assert!(synth(&data, &[]).status.success());
    std::fs::remove_file(data.join("images/view_03.pgm")).unwrap();
    let out = fair(&data, "cube.obj", &dir.path().join("o.obj"), &dir.path().join("t.csv"), CHEAP);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind=validation"));
    assert!(!dir.path().join("o.obj").exists());
}

#[test]
fn bad_override_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("scene");
    assert!(synth(&data, &[]).status.success());
    let out = fair(&data, "cube.obj", &dir.path().join("o.obj"), &dir.path().join("t.csv"), &["--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fair_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("scene");
    assert!(synth(&data, &["--perturb", "A:0.04"]).status.success());
    let (mesh, trace) = (dir.path().join("o.obj"), dir.path().join("t.csv"));
    let out = fair(&data, "cube_perturbed.obj", &mesh, &trace, &[CHEAP, &["--k", "3"]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("sweep 0 max_motion="));
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.contains("k=3") && csv.contains("cell_size=24"), "{csv}");

    let plots = dir.path().join("plots");
    let report = |truth: bool| {
        let mut args: Vec<&std::ffi::OsStr> = vec!["report".as_ref(), "--trace".as_ref(), trace.as_os_str()];
        let truth_path = data.join("cube.obj");
        if truth {
            args.extend(["--truth".as_ref(), truth_path.as_os_str()]);
        }
        args.extend(["--out-dir".as_ref(), plots.as_os_str()]);
        fairmesh(&args)
    };
    let bare = report(false);
    assert!(bare.status.success());
    assert!(String::from_utf8_lossy(&bare.stdout).contains("notice"));
    assert!(plots.join("vertex0_energy.tsv").exists());
    assert!(!plots.join("vertex0_position_error.tsv").exists());
    assert!(report(true).status.success());
    let errors = std::fs::read_to_string(plots.join("vertex0_position_error.tsv")).unwrap();
    assert!(errors.lines().count() > 1);
}
