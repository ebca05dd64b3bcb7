use std::path::Path;
use std::process::{Command, Output};

fn arrowflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arrowflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    arrowflow(args, cwd).status.code().expect("exit code")
}

/// A small dipole field plus an arrow set placed on it.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&["synth", "--kind", "dipole", "--grid", "32x32x6", "--out", "f.vf2d"], d), 0);
    assert_eq!(code(&["generate", "--input", "f.vf2d", "--out", "a.txt"], d), 0);
    dir
}

/// Rewrites the arrow section of a set file, keeping the header intact.
fn edit_arrows(path: &Path, edit: impl FnOnce(&mut Vec<Vec<String>>)) {
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().position(|l| l.starts_with("arrows ")).unwrap();
    let mut blocks: Vec<Vec<String>> = Vec::new();
    for l in &lines[start + 1..lines.len() - 1] {
        if l.starts_with("arrow ") {
            blocks.push(vec![l.to_string()]);
        } else {
            blocks.last_mut().unwrap().push(l.to_string());
        }
    }
    edit(&mut blocks);
    let mut out: Vec<String> = lines[..start].iter().map(|s| s.to_string()).collect();
    out.push(format!("arrows {}", blocks.len()));
    out.extend(blocks.into_iter().flatten());
    out.push("end".into());
    std::fs::write(path, out.join("\n") + "\n").unwrap();
}

#[test]
fn synth_constant_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["synth", "--kind", "constant", "--param", "vx=0.3", "--param", "vy=-0.2", "--grid", "8x6x3", "--out", "c.vf2d"];
    assert_eq!(code(&args, d), 0);
    let f = arrowflow::field::VectorField2D::read_vf2d(d.join("c.vf2d")).unwrap();
    assert_eq!((f.grid().nx, f.grid().ny, f.grid().nt), (8, 6, 3));
    // Velocities are stored in single precision.
    let expected = arrowflow::geom::Vec2::new(0.3f32 as f64, -0.2f32 as f64);
    assert!(f.samples().iter().all(|v| *v == expected));
}

#[test]
fn bad_configuration_exits_2() {
    let dir = workspace();
    let d = dir.path();
    assert_eq!(code(&["synth", "--kind", "whirlpool", "--out", "x.vf2d"], d), 2);
    assert_eq!(code(&["generate", "--input", "f.vf2d", "--dsep", "0"], d), 2);
    assert_eq!(code(&["generate", "--input", "f.vf2d", "--dsep", "-1"], d), 2);
    assert_eq!(code(&["generate", "--input", "f.vf2d", "--set", "no_such_key=1"], d), 2);
    assert_eq!(code(&["frobnicate"], d), 2);
}

#[test]
fn missing_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["generate", "--input", "absent.vf2d"], dir.path()), 1);
}

#[test]
fn same_config_gives_identical_files() {
    let dir = workspace();
    let d = dir.path();
    assert_eq!(code(&["generate", "--input", "f.vf2d", "--out", "b.txt"], d), 0);
    assert_eq!(std::fs::read(d.join("a.txt")).unwrap(), std::fs::read(d.join("b.txt")).unwrap());
    assert_eq!(code(&["generate", "--input", "f.vf2d", "--out", "c.txt", "--rng-seed", "99"], d), 0);
    assert!(std::fs::read_to_string(d.join("c.txt")).unwrap().contains("rng_seed 99"));
}

#[test]
fn mismatched_field_exits_3() {
    let dir = workspace();
    let d = dir.path();
    assert_eq!(code(&["synth", "--kind", "source", "--grid", "32x32x6", "--out", "g.vf2d"], d), 0);
    assert_eq!(code(&["render", "--arrows", "a.txt", "--input", "g.vf2d", "--size", "32x32"], d), 3);
    assert_eq!(code(&["audit", "--arrows", "a.txt", "--input", "g.vf2d"], d), 3);
}

#[test]
fn damaged_arrow_file_exits_3() {
    let dir = workspace();
    let d = dir.path();
    let text = std::fs::read_to_string(d.join("a.txt")).unwrap();
    std::fs::write(d.join("a.txt"), text.replacen("d_sep ", "d_sep 1", 1)).unwrap();
    assert_eq!(code(&["audit", "--arrows", "a.txt", "--input", "f.vf2d"], d), 3);
}

#[test]
fn one_frame_per_step() {
    let dir = workspace();
    let d = dir.path();
    let args = ["render", "--arrows", "a.txt", "--input", "f.vf2d", "--frames-per-step", "1", "--size", "40x40", "--out", "fr"];
    assert_eq!(code(&args, d), 0);
    let pngs = std::fs::read_dir(d.join("fr"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert_eq!(pngs, 6);
    assert!(d.join("fr/frame_000005.png").exists());
    assert!(d.join("fr/manifest.txt").exists());
}

#[test]
fn valid_audit_passes_with_full_coverage() {
    let dir = workspace();
    let d = dir.path();
    assert_eq!(code(&["audit", "--arrows", "a.txt", "--input", "f.vf2d", "--oracle", "--out", "r.csv"], d), 0);
    let csv = std::fs::read_to_string(d.join("r.csv")).unwrap();
    let mut rows = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "coverage").unwrap();
    let mut n = 0;
    for row in rows {
        assert_eq!(row.split(',').nth(col).unwrap().parse::<f64>().unwrap(), 1.0);
        n += 1;
    }
    assert_eq!(n, 6);
}

#[test]
fn overlapping_arrows_fail_audit() {
    let dir = workspace();
    let d = dir.path();
    edit_arrows(&d.join("a.txt"), |blocks| {
        let mut copy = blocks[0].clone();
        let mut head: Vec<String> = copy[0].split(' ').map(String::from).collect();
        head[1] = "100000".into();
        copy[0] = head.join(" ");
        blocks.push(copy);
    });
    assert_eq!(code(&["audit", "--arrows", "a.txt", "--input", "f.vf2d"], d), 4);
}

#[test]
fn empty_set_fails_audit() {
    let dir = workspace();
    let d = dir.path();
    edit_arrows(&d.join("a.txt"), Vec::clear);
    assert_eq!(code(&["audit", "--arrows", "a.txt", "--input", "f.vf2d"], d), 4);
}
