//! Builds a C program against the generated header and the static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "sufnec.h"

int main(void) {
    double w[3] = {1.0, 2.0, 3.0};
    double base[3] = {0.0, 0.0, 0.0};
    double x[3] = {1.0, 1.0, 1.0};
    SufnecModel *model = NULL;
    SufnecReference *ref = NULL;
    if (sufnec_model_linear_new(w, 3, 0.0, &model) != SUFNEC_STATUS_OK) return 10;
    if (sufnec_reference_constant_new(base, 3, &ref) != SUFNEC_STATUS_OK) return 11;

    SufnecSolverOptions opts = sufnec_solver_options_default();
    opts.tau = 1;
    opts.alpha = 1.0;
    size_t chosen[3];
    size_t len = 0;
    double objective = 0.0;
    if (sufnec_solve(model, ref, x, 3, &opts, chosen, 3, &len, &objective) != SUFNEC_STATUS_OK) return 12;

    SufnecDeviations dev;
    size_t keep[1] = {2};
    if (sufnec_deviations(model, ref, x, 3, keep, 1, SUFNEC_METRIC_ABSOLUTE_DIFFERENCE, 0.5, 10, 0, &dev) != SUFNEC_STATUS_OK) return 13;

    double short_x[1] = {1.0};
    double y = 0.0;
    SufnecStatus bad = sufnec_model_predict(model, short_x, 1, &y);
    printf("len=%zu index=%zu objective=%g suf=%g status=%d error=%s\n", len, chosen[0], objective, dev.delta_suf,
           (int)bad, sufnec_last_error());
    sufnec_model_free(model);
    sufnec_reference_free(ref);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<test binary>
    std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    let exe = work.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = target_dir().join("libsufnec_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "len=1 index=2 objective=3 suf=3 status=3 error=input shape mismatch: expected 3, got 1\n"
    );
}
