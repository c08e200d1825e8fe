use std::ffi::{CStr, CString};
use std::ptr;

use sufnec_ffi::*;

struct Fixture {
    model: *mut SufnecModel,
    reference: *mut SufnecReference,
}

impl Drop for Fixture {
    fn drop(&mut self) {
        unsafe {
            sufnec_model_free(self.model);
            sufnec_reference_free(self.reference);
        }
    }
}

fn linear(weights: &[f64], baseline: &[f64]) -> Fixture {
    let mut model = ptr::null_mut();
    let mut reference = ptr::null_mut();
    unsafe {
        assert_eq!(
            sufnec_model_linear_new(weights.as_ptr(), weights.len(), 0.5, &mut model),
            SufnecStatus::Ok
        );
        assert_eq!(
            sufnec_reference_constant_new(baseline.as_ptr(), baseline.len(), &mut reference),
            SufnecStatus::Ok
        );
    }
    Fixture { model, reference }
}

fn last_error() -> String {
    let p = sufnec_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn predict_and_dimension() {
    let f = linear(&[1.0, 2.0, 3.0], &[0.0; 3]);
    let mut y = 0.0;
    unsafe {
        assert_eq!(sufnec_model_dimension(f.model), 3);
        assert_eq!(sufnec_reference_dimension(f.reference), 3);
        assert_eq!(
            sufnec_model_predict(f.model, [1.0, 1.0, 1.0].as_ptr(), 3, &mut y),
            SufnecStatus::Ok
        );
        assert_eq!(y, 6.5);
        assert!(sufnec_last_error().is_null());
        assert_eq!(
            sufnec_model_predict(f.model, [1.0].as_ptr(), 1, &mut y),
            SufnecStatus::Shape
        );
        assert!(last_error().contains("expected 3"));
        assert_eq!(sufnec_model_dimension(ptr::null()), 0);
    }
}

#[test]
fn deviations_on_a_constant_baseline() {
    // f(x) = 6.5, f_∅ = 0.5, f_{0} = 1.5
    let f = linear(&[1.0, 2.0, 3.0], &[0.0; 3]);
    let x = [1.0, 1.0, 1.0];
    let mut out = SufnecDeviations::default();
    let status = unsafe {
        sufnec_deviations(
            f.model,
            f.reference,
            x.as_ptr(),
            3,
            [0usize].as_ptr(),
            1,
            SufnecMetric::AbsoluteDifference,
            0.25,
            10,
            0,
            &mut out,
        )
    };
    assert_eq!(status, SufnecStatus::Ok);
    assert_eq!(out.prediction, 6.5);
    assert_eq!(out.delta_suf, 5.0);
    assert_eq!(out.delta_nec, 5.0);
    assert_eq!(out.delta_uni, 5.0);
    assert_eq!(out.stderr_uni, 0.0);
}

#[test]
fn solve_into_a_caller_buffer() {
    let f = linear(&[4.0, 0.1, 2.0, 0.2], &[0.0; 4]);
    let x = [1.0; 4];
    let mut opts = sufnec_solver_options_default();
    opts.tau = 2;
    opts.alpha = 1.0;
    for strategy in [SufnecStrategy::Exhaustive, SufnecStrategy::GreedyForward] {
        opts.strategy = strategy;
        let mut buf = [usize::MAX; 4];
        let mut len = 0;
        let mut objective = f64::NAN;
        let status = unsafe {
            sufnec_solve(
                f.model,
                f.reference,
                x.as_ptr(),
                4,
                &opts,
                buf.as_mut_ptr(),
                buf.len(),
                &mut len,
                &mut objective,
            )
        };
        assert_eq!(status, SufnecStatus::Ok);
        assert_eq!(&buf[..len], &[0, 2]);
        assert!((objective - 0.3).abs() < 1e-12);

        let mut small = [0usize; 1];
        let status = unsafe {
            sufnec_solve(
                f.model,
                f.reference,
                x.as_ptr(),
                4,
                &opts,
                small.as_mut_ptr(),
                1,
                &mut len,
                ptr::null_mut(),
            )
        };
        assert_eq!(status, SufnecStatus::BufferTooSmall);
        assert_eq!(len, 2);
    }
}

#[test]
fn relaxed_needs_a_grid_for_total_variation() {
    let f = linear(&[1.0, 0.0, 0.0, 1.0], &[0.0; 4]);
    let x = [1.0; 4];
    let mut opts = sufnec_solver_options_default();
    opts.strategy = SufnecStrategy::RelaxedMask;
    opts.alpha = 1.0;
    let mut buf = [0usize; 4];
    let mut len = 0;
    let status = unsafe {
        sufnec_solve(
            f.model,
            f.reference,
            x.as_ptr(),
            4,
            &opts,
            buf.as_mut_ptr(),
            4,
            &mut len,
            ptr::null_mut(),
        )
    };
    assert_eq!(status, SufnecStatus::Config);
    assert!(last_error().contains("grid"));
    opts.grid_height = 2;
    opts.grid_width = 2;
    let status = unsafe {
        sufnec_solve(
            f.model,
            f.reference,
            x.as_ptr(),
            4,
            &opts,
            buf.as_mut_ptr(),
            4,
            &mut len,
            ptr::null_mut(),
        )
    };
    assert_eq!(status, SufnecStatus::Ok, "{}", last_error());
    assert!(len <= opts.tau);
}

#[test]
fn solver_errors_map_to_status_codes() {
    let f = linear(&[1.0, 2.0], &[0.0; 2]);
    let x = [1.0; 2];
    let mut len = 0;
    let mut opts = sufnec_solver_options_default();
    unsafe {
        assert_eq!(
            sufnec_solve(
                f.model,
                f.reference,
                x.as_ptr(),
                2,
                &opts,
                ptr::null_mut(),
                0,
                &mut len,
                ptr::null_mut()
            ),
            SufnecStatus::Config
        );
        opts.tau = 1;
        opts.alpha = 2.0;
        assert_eq!(
            sufnec_solve(
                f.model,
                f.reference,
                x.as_ptr(),
                2,
                &opts,
                ptr::null_mut(),
                0,
                &mut len,
                ptr::null_mut()
            ),
            SufnecStatus::Domain
        );
        assert_eq!(
            sufnec_solve(
                ptr::null(),
                f.reference,
                x.as_ptr(),
                2,
                &opts,
                ptr::null_mut(),
                0,
                &mut len,
                ptr::null_mut()
            ),
            SufnecStatus::NullPointer
        );
        assert_eq!(last_error(), "model is null");
    }
}

#[test]
fn shapley_pair_sums_to_the_total_deviation() {
    let mean = [0.0, 1.0, -1.0];
    let cov = [1.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 1.0];
    let mut reference = ptr::null_mut();
    let mut model = ptr::null_mut();
    let x = [0.5, 2.0, 0.0];
    unsafe {
        assert_eq!(
            sufnec_reference_gaussian_new(mean.as_ptr(), cov.as_ptr(), 3, &mut reference),
            SufnecStatus::Ok
        );
        assert_eq!(
            sufnec_model_linear_new([1.0, -2.0, 0.5].as_ptr(), 3, 0.0, &mut model),
            SufnecStatus::Ok
        );
        let (mut first, mut second) = (0.0, 0.0);
        let m = SufnecMetric::AbsoluteDifference;
        assert_eq!(
            sufnec_two_player_shapley(
                model,
                reference,
                x.as_ptr(),
                3,
                [0usize].as_ptr(),
                1,
                m,
                200,
                3,
                &mut first
            ),
            SufnecStatus::Ok
        );
        assert_eq!(
            sufnec_two_player_shapley(
                model,
                reference,
                x.as_ptr(),
                3,
                [1usize, 2].as_ptr(),
                2,
                m,
                200,
                3,
                &mut second
            ),
            SufnecStatus::Ok
        );
        let mut y = 0.0;
        sufnec_model_predict(model, x.as_ptr(), 3, &mut y);
        let f0: f64 = [1.0, -2.0, 0.5].iter().zip(&mean).map(|(w, m)| w * m).sum();
        assert!((first + second - (y - f0).abs()).abs() < 0.3, "{first} + {second}");
        assert_eq!(
            sufnec_two_player_shapley(
                model,
                reference,
                x.as_ptr(),
                3,
                [5usize].as_ptr(),
                1,
                m,
                10,
                0,
                &mut first
            ),
            SufnecStatus::Domain
        );
        sufnec_model_free(model);
        sufnec_reference_free(reference);
    }
}

#[test]
fn json_and_file_constructors() {
    let doc = CString::new(r#"{"type": "linear", "dims": [2], "weights": [1, 1]}"#).unwrap();
    let bad = CString::new("{").unwrap();
    let mut model = ptr::null_mut();
    let mut reference = ptr::null_mut();
    unsafe {
        assert_eq!(sufnec_model_from_json(doc.as_ptr(), &mut model), SufnecStatus::Ok);
        assert_eq!(sufnec_model_dimension(model), 2);
        sufnec_model_free(model);
        assert_eq!(sufnec_model_from_json(bad.as_ptr(), &mut model), SufnecStatus::Parse);
        assert_eq!(
            sufnec_model_from_json(ptr::null(), &mut model),
            SufnecStatus::NullPointer
        );
        let missing = CString::new("/nonexistent/model.json").unwrap();
        assert_eq!(sufnec_model_load(missing.as_ptr(), &mut model), SufnecStatus::Io);

        let gauss = CString::new(r#"{"mean": [0, 0], "cov": [[1, 0], [0, 1]]}"#).unwrap();
        assert_eq!(
            sufnec_reference_gaussian_from_json(gauss.as_ptr(), &mut reference),
            SufnecStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(sufnec_reference_dimension(reference), 2);
        sufnec_reference_free(reference);

        let data = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(
            sufnec_reference_empirical_new(
                data.as_ptr(),
                3,
                2,
                SufnecEmpiricalMode::PerFeatureMarginal,
                &mut reference
            ),
            SufnecStatus::Ok
        );
        assert_eq!(sufnec_reference_dimension(reference), 2);
        sufnec_reference_free(reference);
        assert_eq!(
            sufnec_reference_gaussian_new([0.0].as_ptr(), [-1.0].as_ptr(), 1, &mut reference),
            SufnecStatus::Config
        );
    }
}
