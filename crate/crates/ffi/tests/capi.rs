use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use aesa_core::data::ScoreScale;
use aesa_core::features::{save_layer_stack, LayerStack};
use aesa_core::model::{save_checkpoint, Checkpoint, Mode, ModelConfig, ModelParams};
use aesa_ffi::*;
use ndarray::Array3;

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(aesa_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

struct Fixture {
    _dir: tempfile::TempDir,
    checkpoint: Checkpoint,
    ckpt_path: CString,
    stack: LayerStack,
    stack_path: CString,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let params = ModelParams::init(&ModelConfig::tiny(3), 11).unwrap();
    let checkpoint = Checkpoint {
        params,
        scale: ScoreScale::default(),
    };
    let ckpt = dir.path().join("model.aesc");
    save_checkpoint(&checkpoint, &ckpt).unwrap();
    // Values exactly representable in f32 so the float-buffer path sees the same input.
    let values = Array3::from_shape_fn((3, 6, 8), |(l, t, d)| {
        ((l * 48 + t * 8 + d) % 17) as f64 / 8.0 - 1.0
    });
    let stack = LayerStack::new(values, "clip").unwrap();
    let stack_file = dir.path().join("clip.aesf");
    save_layer_stack(&stack, &stack_file).unwrap();
    Fixture {
        ckpt_path: c_path(&ckpt),
        stack_path: c_path(&stack_file),
        _dir: dir,
        checkpoint,
        stack,
    }
}

fn load(path: &CStr) -> *mut AesaModel {
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { aesa_model_load(path.as_ptr(), &mut model) },
        AesaStatus::Ok
    );
    assert!(!model.is_null());
    model
}

#[test]
fn predictions_match_the_core_library() {
    let fx = fixture();
    let model = load(&fx.ckpt_path);
    assert_eq!(unsafe { aesa_model_input_dim(model) }, 8);
    assert_eq!(unsafe { aesa_model_layer_count(model) }, 3);

    let pred = fx.checkpoint.params.forward(&fx.stack, Mode::Eval).unwrap();
    let expected: Vec<f64> = pred
        .clip_scores
        .0
        .iter()
        .map(|&s| fx.checkpoint.scale.denormalize(s).unwrap())
        .collect();

    let mut from_file = [0.0; AESA_AXIS_COUNT];
    let status =
        unsafe { aesa_model_predict_file(model, fx.stack_path.as_ptr(), from_file.as_mut_ptr()) };
    assert_eq!(status, AesaStatus::Ok, "{}", last_error());
    assert_eq!(from_file.to_vec(), expected);

    let floats: Vec<f32> = fx.stack.values().iter().map(|&v| v as f32).collect();
    let mut from_buffer = [0.0; AESA_AXIS_COUNT];
    let status =
        unsafe { aesa_model_predict(model, floats.as_ptr(), 3, 6, 8, from_buffer.as_mut_ptr()) };
    assert_eq!(status, AesaStatus::Ok);
    assert_eq!(from_buffer.to_vec(), expected);
    assert!(from_buffer.iter().all(|v| (1.0..=10.0).contains(v)));
    unsafe { aesa_model_free(model) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let fx = fixture();
    let mut model = ptr::null_mut();
    let missing = CString::new("/nonexistent/model.aesc").unwrap();
    assert_eq!(
        unsafe { aesa_model_load(missing.as_ptr(), &mut model) },
        AesaStatus::Io
    );
    assert!(model.is_null());
    assert!(last_error().contains("nonexistent"));

    // A layer-stack file is not a checkpoint.
    assert_eq!(
        unsafe { aesa_model_load(fx.stack_path.as_ptr(), &mut model) },
        AesaStatus::Format
    );
    assert_eq!(
        unsafe { aesa_model_load(ptr::null(), &mut model) },
        AesaStatus::NullPointer
    );

    let model = load(&fx.ckpt_path);
    assert_eq!(last_error(), "");
    let mut out = [0.0; AESA_AXIS_COUNT];
    let floats = vec![0.5f32; 2 * 4 * 8];
    let status = unsafe { aesa_model_predict(model, floats.as_ptr(), 2, 4, 8, out.as_mut_ptr()) };
    assert_eq!(status, AesaStatus::Shape);
    assert!(last_error().contains("layer"), "{}", last_error());

    let mut bad = vec![0.5f32; 3 * 4 * 8];
    bad[5] = f32::NAN;
    let status = unsafe { aesa_model_predict(model, bad.as_ptr(), 3, 4, 8, out.as_mut_ptr()) };
    assert_eq!(status, AesaStatus::NonFinite);
    let status = unsafe { aesa_model_predict(model, floats.as_ptr(), 3, 4, 8, ptr::null_mut()) };
    assert_eq!(status, AesaStatus::NullPointer);
    let status =
        unsafe { aesa_model_predict(ptr::null(), floats.as_ptr(), 3, 4, 8, out.as_mut_ptr()) };
    assert_eq!(status, AesaStatus::NullPointer);
    unsafe {
        aesa_model_free(model);
        aesa_model_free(ptr::null_mut());
    }
    assert_eq!(unsafe { aesa_model_input_dim(ptr::null()) }, 0);
}

#[test]
fn metrics_through_the_c_abi() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [1.0, 3.0, 2.0, 4.0];
    let mut out = 0.0;
    assert_eq!(
        unsafe { aesa_metric_ktau(x.as_ptr(), y.as_ptr(), 4, &mut out) },
        AesaStatus::Ok
    );
    assert!((out - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(
        unsafe { aesa_metric_srcc(x.as_ptr(), y.as_ptr(), 4, &mut out) },
        AesaStatus::Ok
    );
    assert!((out - 0.8).abs() < 1e-12);
    assert_eq!(
        unsafe { aesa_metric_pcc(x.as_ptr(), x.as_ptr(), 4, &mut out) },
        AesaStatus::Ok
    );
    assert!((out - 1.0).abs() < 1e-12);

    let flat = [2.0; 4];
    let status = unsafe { aesa_metric_pcc(x.as_ptr(), flat.as_ptr(), 4, &mut out) };
    assert_eq!(status, AesaStatus::UndefinedMetric);
    let status = unsafe { aesa_metric_pcc(x.as_ptr(), y.as_ptr(), 1, &mut out) };
    assert_eq!(status, AesaStatus::UndefinedMetric);
}

#[test]
fn axis_names() {
    let names: Vec<_> = (0..4)
        .map(|i| {
            unsafe { CStr::from_ptr(aesa_axis_name(i)) }
                .to_str()
                .unwrap()
        })
        .collect();
    assert_eq!(names, ["PQ", "PC", "CE", "CU"]);
    assert!(aesa_axis_name(4).is_null());
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/aesa.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for symbol in [
        "aesa_model_load",
        "aesa_model_predict",
        "aesa_model_predict_file",
        "aesa_metric_ktau",
        "aesa_last_error_message",
        "AESA_STATUS_SHAPE = 4",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }

    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("probe.c");
    std::fs::write(
        &source,
        "#include \"aesa.h\"\n\
         int probe(const char *path) {\n\
           AesaModel *m = NULL; double out[AESA_AXIS_COUNT];\n\
           if (aesa_model_load(path, &m) != AESA_STATUS_OK) return 1;\n\
           enum AesaStatus s = aesa_model_predict_file(m, path, out);\n\
           aesa_model_free(m);\n\
           return s == AESA_STATUS_OK ? 0 : 2;\n\
         }\n",
    )
    .unwrap();
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&compiler)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&source)
        .output()
    {
        Ok(result) => assert!(
            result.status.success(),
            "{}",
            String::from_utf8_lossy(&result.stderr)
        ),
        Err(e) => eprintln!("skipping C compile check: `{compiler}` unavailable ({e})"),
    }
}
