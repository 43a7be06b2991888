use cuntzlab_ffi::*;
use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

fn c(re: f64, im: f64) -> CuntzComplex {
    CuntzComplex { re, im }
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe {
        cuntzlab_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn families_satisfy_the_relations() {
    unsafe {
        let mut fams = Vec::new();
        let mut f = ptr::null_mut();
        assert_eq!(cuntzlab_family_haar(3, &mut f), CuntzStatus::Ok);
        fams.push(f);
        let eta = [c(0.6, 0.0), c(0.0, 0.8)];
        assert_eq!(cuntzlab_family_weighted_haar(eta.as_ptr(), 2, &mut f), CuntzStatus::Ok);
        fams.push(f);
        assert_eq!(cuntzlab_family_nearest_neighbor(2, &mut f), CuntzStatus::Ok);
        fams.push(f);
        assert_eq!(cuntzlab_family_theta_gauge(2, 8, &mut f), CuntzStatus::Ok);
        fams.push(f);
        for f in fams {
            let (mut iso, mut comp) = (1.0, 1.0);
            assert_eq!(cuntzlab_family_cuntz_defect(f, 2, &mut iso, &mut comp), CuntzStatus::Ok);
            assert!(iso < 1e-12 && comp < 1e-12);
            let mut n = 0;
            assert_eq!(cuntzlab_family_base(f, &mut n), CuntzStatus::Ok);
            assert!(n == 2 || n == 3);
            cuntzlab_family_free(f);
        }
    }
}

#[test]
fn apply_and_adjoint_round_trip() {
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(cuntzlab_family_haar(2, &mut f), CuntzStatus::Ok);
        let v = [c(0.5, 0.0), c(0.5, 0.5)];
        let mut w = [c(0.0, 0.0); 4];
        let (mut written, mut level) = (0, 0);
        let st = cuntzlab_family_apply_s(f, 1, 1, v.as_ptr(), 2, w.as_mut_ptr(), 4, &mut written, &mut level);
        assert_eq!(st, CuntzStatus::Ok);
        assert_eq!((written, level), (4, 2));
        let mut back = [c(0.0, 0.0); 2];
        let st = cuntzlab_family_apply_s_star(f, 1, 2, w.as_ptr(), 4, back.as_mut_ptr(), 2, &mut written, &mut level);
        assert_eq!(st, CuntzStatus::Ok);
        assert_eq!((written, level), (2, 1));
        for (a, b) in v.iter().zip(&back) {
            assert!((a.re - b.re).abs() < 1e-12 && (a.im - b.im).abs() < 1e-12);
        }
        let st = cuntzlab_family_apply_s(f, 5, 1, v.as_ptr(), 2, w.as_mut_ptr(), 4, &mut written, &mut level);
        assert_eq!(st, CuntzStatus::InvalidArgument);
        assert!(last_error().contains("letter 5"));
        let st = cuntzlab_family_apply_s(f, 0, 1, v.as_ptr(), 2, w.as_mut_ptr(), 1, &mut written, &mut level);
        assert_eq!(st, CuntzStatus::BufferTooSmall);
        assert_eq!(written, 4);
        let st = cuntzlab_family_apply_s(f, 0, 2, v.as_ptr(), 2, w.as_mut_ptr(), 4, &mut written, &mut level);
        assert_eq!(st, CuntzStatus::InvalidArgument);
        cuntzlab_family_free(f);
    }
}

#[test]
fn eigen_residual_through_the_abi() {
    unsafe {
        let mut f = ptr::null_mut();
        let eta = [c(0.6, 0.0), c(0.0, 0.8)];
        assert_eq!(cuntzlab_family_weighted_haar(eta.as_ptr(), 2, &mut f), CuntzStatus::Ok);
        let conj = [c(0.6, 0.0), c(0.0, -0.8)];
        let mut r = 1.0;
        assert_eq!(cuntzlab_eigen_residual(f, conj.as_ptr(), 2, 2, &mut r), CuntzStatus::Ok);
        assert!(r < 1e-12);
        let far = [c(1.0, 0.0), c(0.0, 0.0)];
        assert_eq!(cuntzlab_eigen_residual(f, far.as_ptr(), 2, 2, &mut r), CuntzStatus::Ok);
        assert!(r > 1e-3);
        cuntzlab_family_free(f);
        let mut nn = ptr::null_mut();
        assert_eq!(cuntzlab_family_nearest_neighbor(2, &mut nn), CuntzStatus::Ok);
        assert_eq!(cuntzlab_eigen_residual(nn, conj.as_ptr(), 2, 0, &mut r), CuntzStatus::LevelTooLow);
        cuntzlab_family_free(nn);
    }
}

#[test]
fn states_evaluate_and_give_densities() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(cuntzlab_state_nearest_neighbor(2, &mut s), CuntzStatus::Ok);
        let (i, j) = ([0usize, 1], [0usize, 1]);
        let mut v = c(0.0, 0.0);
        assert_eq!(cuntzlab_state_eval(s, i.as_ptr(), j.as_ptr(), 2, &mut v), CuntzStatus::Ok);
        assert!(v.re > 0.0 && v.re <= 1.0);
        let mut rho = [c(0.0, 0.0); 16];
        let mut written = 0;
        assert_eq!(cuntzlab_state_density(s, 2, rho.as_mut_ptr(), 16, &mut written), CuntzStatus::Ok);
        assert_eq!(written, 16);
        let trace: f64 = (0..4).map(|k| rho[5 * k].re).sum();
        assert!((trace - 1.0).abs() < 1e-12);
        assert_eq!(cuntzlab_state_density(s, 2, rho.as_mut_ptr(), 3, &mut written), CuntzStatus::BufferTooSmall);
        cuntzlab_state_free(s);

        let sites = [c(1.0, 0.0), c(0.0, 0.0), c(0.6, 0.0), c(0.8, 0.0)];
        assert_eq!(cuntzlab_state_product(sites.as_ptr(), 2, 2, &mut s), CuntzStatus::Ok);
        let (i, j) = ([0usize, 1, 1], [0usize, 1, 0]);
        assert_eq!(cuntzlab_state_eval(s, i.as_ptr(), j.as_ptr(), 3, &mut v), CuntzStatus::Ok);
        assert!((v.re - 0.64 * 0.48).abs() < 1e-12 && v.im.abs() < 1e-12);
        cuntzlab_state_free(s);

        let eta = [c(0.6, 0.0), c(0.0, 0.8)];
        assert_eq!(cuntzlab_state_cuntz(eta.as_ptr(), 2, &mut s), CuntzStatus::Ok);
        let w = [1usize];
        assert_eq!(cuntzlab_state_eval(s, w.as_ptr(), w.as_ptr(), 1, &mut v), CuntzStatus::Ok);
        assert!((v.re - 0.64).abs() < 1e-12);
        cuntzlab_state_free(s);
    }
}

#[test]
fn hellinger_affinity_matches_the_closed_form() {
    let (p, q) = ([0.5, 0.5], [0.25, 0.75]);
    let mut a = 0.0;
    unsafe {
        assert_eq!(cuntzlab_hellinger_affinity(p.as_ptr(), q.as_ptr(), 2, &mut a), CuntzStatus::Ok);
    }
    assert!((a - ((1.0f64 / 8.0).sqrt() + (3.0f64 / 8.0).sqrt())).abs() < 1e-12);
    let bad = [0.5, 0.6];
    unsafe {
        assert_eq!(cuntzlab_hellinger_affinity(p.as_ptr(), bad.as_ptr(), 2, &mut a), CuntzStatus::InvalidArgument);
    }
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(cuntzlab_family_haar(2, ptr::null_mut()), CuntzStatus::NullPointer);
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(cuntzlab_family_cuntz_defect(ptr::null(), 1, &mut a, &mut b), CuntzStatus::NullPointer);
        assert!(last_error().contains("family"));
        assert_eq!(cuntzlab_state_eval(ptr::null(), ptr::null(), ptr::null(), 0, ptr::null_mut()), CuntzStatus::NullPointer);
        let mut v = c(0.0, 0.0);
        let mut s = ptr::null_mut();
        assert_eq!(cuntzlab_state_nearest_neighbor(2, &mut s), CuntzStatus::Ok);
        assert_eq!(cuntzlab_state_eval(s, ptr::null(), [0usize].as_ptr(), 1, &mut v), CuntzStatus::NullPointer);
        cuntzlab_state_free(s);
        cuntzlab_family_free(ptr::null_mut());
        cuntzlab_state_free(ptr::null_mut());
        assert_eq!(cuntzlab_family_haar(1, &mut ptr::null_mut()), CuntzStatus::InvalidArgument);
        assert_eq!(cuntzlab_last_error(ptr::null_mut(), 0), last_error().len());
    }
}

#[test]
fn runs_configs_and_reports_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("w.toml");
    std::fs::write(&cfg, "[experiment]\nkind = \"wold\"\nbases = [2]\ninputs = [\"s\"]\nlevel = 1\ndepth = 1\n").unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let out = CString::new(tmp.path().to_str().unwrap()).unwrap();
    let mut code = -1;
    unsafe {
        assert_eq!(cuntzlab_run_config(path.as_ptr(), out.as_ptr(), &mut code), CuntzStatus::Ok);
    }
    assert_eq!(code, 0);
    assert!(tmp.path().join("w.report.toml").exists());
    std::fs::write(&cfg, "[experiment]\nkind = \"nope\"\n").unwrap();
    unsafe {
        assert_eq!(cuntzlab_run_config(path.as_ptr(), out.as_ptr(), &mut code), CuntzStatus::Io);
    }
    assert_eq!(code, 2);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(cuntzlab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libcuntzlab_ffi.a");
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&compiler).arg("--version").output().is_err() {
        eprintln!("no C compiler found; skipping");
        return;
    }
    assert!(lib.exists(), "missing {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new(&compiler)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));
}
