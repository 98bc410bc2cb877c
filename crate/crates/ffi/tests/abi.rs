use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use dosefind_ffi::*;

fn last_error() -> String {
    let p = df_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn design() -> *mut DfDesign {
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { df_design_new(0.3, 0.0, 0.0, 3, 12, &mut d) },
        DfStatus::Ok
    );
    d
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(df_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn boundaries_decisions_and_elimination() {
    let d = design();
    let (mut e, mut de) = (0.0, 0.0);
    unsafe {
        assert_eq!(df_design_boundaries(d, &mut e, &mut de), DfStatus::Ok);
        assert!((e - 0.2365).abs() < 1e-4 && (de - 0.3585).abs() < 1e-4);

        let mut a = DfAction::Retain;
        assert_eq!(df_decide(d, 3, 0, &mut a), DfStatus::Ok);
        assert_eq!(a, DfAction::Escalate);
        assert_eq!(df_decide(d, 6, 2, &mut a), DfStatus::Ok);
        assert_eq!(a, DfAction::Retain);
        assert_eq!(df_decide(d, 3, 2, &mut a), DfStatus::Ok);
        assert_eq!(a, DfAction::Deescalate);
        assert_eq!(df_decide(d, 3, 4, &mut a), DfStatus::InvalidArgument);
        assert!(last_error().contains("4 DLTs"));

        let mut elim = false;
        assert_eq!(df_check_elimination(d, 3, 3, &mut elim), DfStatus::Ok);
        assert!(elim);
        assert_eq!(df_check_elimination(d, 3, 2, &mut elim), DfStatus::Ok);
        assert!(!elim);
        df_design_free(d);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(
            df_design_new(0.3, 0.3, 0.4, 3, 12, &mut d),
            DfStatus::InvalidDesign
        );
        assert!(d.is_null());
        assert!(last_error().contains("phi1"));
        assert_eq!(
            df_design_new(0.3, 0.0, 0.0, 3, 12, ptr::null_mut()),
            DfStatus::NullPointer
        );
        let mut a = DfAction::Retain;
        assert_eq!(df_decide(ptr::null(), 3, 0, &mut a), DfStatus::NullPointer);

        let good = design();
        assert_eq!(df_design_boundaries(good, &mut 0.0, &mut 0.0), DfStatus::Ok);
        assert!(df_last_error().is_null());
        df_design_free(good);
        df_design_free(ptr::null_mut());
    }
}

#[test]
fn trial_round_trip() {
    unsafe {
        let d = design();
        let mut t = ptr::null_mut();
        assert_eq!(df_trial_new(d, 6, &mut t), DfStatus::Ok);
        df_design_free(d);

        let mut dec = DfDecision {
            action: DfAction::Retain,
            next_dose: 0,
            first_eliminated: 0,
            status: DfTrialStatus::Running,
        };
        assert_eq!(df_trial_apply_cohort(t, 3, 0, &mut dec), DfStatus::Ok);
        assert_eq!((dec.action, dec.next_dose), (DfAction::Escalate, 2));
        assert_eq!(
            df_trial_apply_cohort(t, 4, 0, &mut dec),
            DfStatus::InvalidOutcome
        );
        for dlt in [0, 1, 1, 0, 2, 1, 0, 1, 0, 1, 0] {
            assert_eq!(
                df_trial_apply_cohort(t, 3, dlt, ptr::null_mut()),
                DfStatus::Ok
            );
        }
        let (mut st, mut dose) = (DfTrialStatus::Running, 0);
        assert_eq!(df_trial_status(t, &mut st, &mut dose), DfStatus::Ok);
        assert_eq!(st, DfTrialStatus::Completed);
        assert_eq!(
            df_trial_apply_cohort(t, 3, 0, &mut dec),
            DfStatus::NotRunning
        );

        let (mut n, mut m) = ([0u32; 6], [0u32; 6]);
        assert_eq!(
            df_trial_counts(t, n.as_mut_ptr(), m.as_mut_ptr(), 6),
            DfStatus::Ok
        );
        assert_eq!(n.iter().sum::<u32>(), 36);
        assert_eq!(
            df_trial_counts(t, n.as_mut_ptr(), m.as_mut_ptr(), 5),
            DfStatus::InvalidArgument
        );

        let mut mtd = 0;
        assert_eq!(df_trial_select_pava(t, &mut mtd), DfStatus::Ok);
        assert!((1..=6).contains(&mtd));

        let doses = [10.0, 20.0, 30.0, 45.0, 60.0, 80.0];
        let mut model = ptr::null_mut();
        assert_eq!(
            df_model_new(
                DfLink::Logit,
                doses.as_ptr(),
                6,
                3,
                -1.592,
                1.371,
                0.412,
                0.784,
                &mut model
            ),
            DfStatus::Ok
        );
        let mut drm = 0;
        assert_eq!(df_model_select(model, t, false, &mut drm), DfStatus::Ok);
        assert!((1..=6).contains(&drm));

        let mut means = [0.0; 6];
        assert_eq!(
            df_model_posterior_mean(model, n.as_ptr(), m.as_ptr(), 6, means.as_mut_ptr()),
            DfStatus::Ok
        );
        assert!(means.windows(2).all(|w| w[0] <= w[1]));

        df_model_free(model);
        df_trial_free(t);
    }
}

#[test]
fn model_validation() {
    let doses = [10.0, 20.0, 30.0];
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(
            df_model_new(
                DfLink::CLogLog,
                doses.as_ptr(),
                3,
                0,
                0.0,
                1.0,
                0.0,
                1.0,
                &mut model
            ),
            DfStatus::InvalidArgument
        );
        assert_eq!(
            df_model_new(
                DfLink::CLogLog,
                doses.as_ptr(),
                3,
                2,
                0.0,
                -1.0,
                0.0,
                1.0,
                &mut model
            ),
            DfStatus::InvalidModel
        );
        let unsorted = [10.0, 5.0, 30.0];
        assert_eq!(
            df_model_new(
                DfLink::CLogLog,
                unsorted.as_ptr(),
                3,
                2,
                0.0,
                1.0,
                0.0,
                1.0,
                &mut model
            ),
            DfStatus::InvalidGrid
        );
        assert!(model.is_null());
    }
}

#[test]
fn pava_through_the_abi() {
    let y = [0.3, 0.1, 0.2, 0.5];
    let w = [1.0, 1.0, 1.0, 1.0];
    let mut out = [0.0; 4];
    unsafe {
        assert_eq!(
            df_pava_fit(y.as_ptr(), w.as_ptr(), 4, out.as_mut_ptr()),
            DfStatus::Ok
        );
        assert_eq!(
            df_pava_fit(
                y.as_ptr(),
                [1.0, 0.0, 1.0, 1.0].as_ptr(),
                4,
                out.as_mut_ptr()
            ),
            DfStatus::InvalidArgument
        );
        assert_eq!(
            df_pava_fit(ptr::null(), w.as_ptr(), 4, out.as_mut_ptr()),
            DfStatus::NullPointer
        );
    }
    let expect = [0.2, 0.2, 0.2, 0.5];
    for (a, b) in out.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12);
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "dosefind.h"

int main(void) {
    DfDesign *d = NULL;
    if (df_design_new(0.3, 0.0, 0.0, 3, 12, &d) != DF_STATUS_OK) return 1;
    DfAction a;
    if (df_decide(d, 3, 0, &a) != DF_STATUS_OK || a != DF_ACTION_ESCALATE) return 2;
    if (df_decide(d, 3, 9, &a) != DF_STATUS_INVALID_ARGUMENT || df_last_error() == NULL) return 3;
    DfTrial *t = NULL;
    if (df_trial_new(d, 6, &t) != DF_STATUS_OK) return 4;
    DfDecision dec;
    if (df_trial_apply_cohort(t, 3, 3, &dec) != DF_STATUS_OK) return 5;
    if (dec.status != DF_TRIAL_STATUS_STOPPED_ALL_ELIMINATED || dec.first_eliminated != 1) return 6;
    unsigned int mtd = 7;
    if (df_trial_select_pava(t, &mtd) != DF_STATUS_OK || mtd != 0) return 7;
    df_trial_free(t);
    df_design_free(d);
    printf("%s\n", df_version());
    return 0;
}
"#;

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_staticlib() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libdosefind_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let dir = std::env::temp_dir().join(format!("dosefind-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("smoke.c");
    let exe = dir.join("smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler named cc");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        env!("CARGO_PKG_VERSION")
    );
    std::fs::remove_dir_all(&dir).ok();
}
