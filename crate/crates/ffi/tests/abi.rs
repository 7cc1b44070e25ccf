use std::ffi::{CStr, CString};
use std::ptr;

use harnet_ffi::*;

fn last_error() -> String {
    let p = harnet_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn gradient_image(n: usize) -> *mut HarnetImage {
    let px: Vec<f32> = (0..n * n).map(|i| ((i * 7) % 256) as f32).collect();
    let id = CString::new("grad").unwrap();
    let mut img = ptr::null_mut();
    let s = unsafe { harnet_image_new(id.as_ptr(), n, n, px.as_ptr(), HarnetScale::Raw255, 3.0, &mut img) };
    assert_eq!(s, HarnetStatus::Ok);
    img
}

fn pixels(img: *const HarnetImage) -> Vec<f32> {
    let n = unsafe { harnet_image_width(img) * harnet_image_height(img) };
    let mut buf = vec![0.0f32; n];
    assert_eq!(unsafe { harnet_image_pixels(img, buf.as_mut_ptr(), n) }, HarnetStatus::Ok);
    buf
}

#[test]
fn image_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("a.png").to_str().unwrap()).unwrap();
    let img = gradient_image(16);
    unsafe {
        assert_eq!(harnet_image_save(img, path.as_ptr()), HarnetStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(harnet_image_load(path.as_ptr(), &mut back), HarnetStatus::Ok);
        assert_eq!(harnet_image_width(back), 16);
        assert_eq!(pixels(back), pixels(img));
        let mut scale = HarnetScale::Unit;
        assert_eq!(harnet_image_scale(back, &mut scale), HarnetStatus::Ok);
        assert_eq!(scale, HarnetScale::Raw255);
        harnet_image_free(back);
        harnet_image_free(img);
    }
}

#[test]
fn untrained_model_is_identity_and_checkpoint_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.harn").to_str().unwrap()).unwrap();
    let img = gradient_image(24);
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(harnet_model_build(harnet_spec_desk(), 3, &mut model), HarnetStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(harnet_reconstruct(model, img, &mut out), HarnetStatus::Ok);
        for (a, b) in pixels(out).iter().zip(pixels(img)) {
            assert!((a - b).abs() < 1e-2, "{a} vs {b}");
        }
        assert_eq!(harnet_model_save(model, path.as_ptr()), HarnetStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(harnet_model_load(path.as_ptr(), &mut loaded), HarnetStatus::Ok);
        let mut spec = harnet_spec_paper();
        assert_eq!(harnet_model_spec(loaded, &mut spec), HarnetStatus::Ok);
        assert_eq!(spec, harnet_spec_desk());
        harnet_image_free(out);
        harnet_image_free(img);
        harnet_model_free(model);
        harnet_model_free(loaded);
    }
}

#[test]
fn metrics_match_the_library() {
    let img = gradient_image(32);
    let mut m = HarnetMetrics {
        noise_intensity: 0.0,
        contrast_rms: 0.0,
        connectivity: 0.0,
    };
    assert_eq!(unsafe { harnet_metrics(img, 0.3, &mut m) }, HarnetStatus::Ok);
    let px: Vec<f32> = (0..32 * 32).map(|i| ((i * 7) % 256) as f32).collect();
    let a = harnet::Angiogram::new("grad", 32, 32, px, harnet::IntensityScale::Raw255, 3.0).unwrap();
    let region = harnet::metrics::RegionSpec::centered(&a, 0.3);
    let r = harnet::metrics::MetricsReport::measure(&a, region, false).unwrap().value;
    assert_eq!(m.noise_intensity, r.noise_intensity);
    assert_eq!(m.contrast_rms, r.contrast_rms);
    assert_eq!(m.connectivity, r.connectivity);
    unsafe { harnet_image_free(img) };
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut img = ptr::null_mut();
        let px = [0.5f32; 4];
        assert_eq!(
            harnet_image_new(ptr::null(), 2, 2, ptr::null(), HarnetScale::Unit, 3.0, &mut img),
            HarnetStatus::NullPointer
        );
        assert!(last_error().contains("pixels"));
        assert_eq!(
            harnet_image_new(ptr::null(), 2, 2, px.as_ptr(), HarnetScale::Unit, -1.0, &mut img),
            HarnetStatus::InvalidArgument
        );
        assert!(img.is_null());

        let missing = CString::new("/nonexistent/dir/x.png").unwrap();
        assert_ne!(harnet_image_load(missing.as_ptr(), &mut img), HarnetStatus::Ok);

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.harn");
        std::fs::write(&junk, b"NOPE0000").unwrap();
        let junk = CString::new(junk.to_str().unwrap()).unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(harnet_model_load(junk.as_ptr(), &mut model), HarnetStatus::Checkpoint);
        assert!(model.is_null());

        let bad = HarnetModelSpec {
            low_level_channels: 0,
            block_count: 1,
            layers_per_block: 1,
            block_channels: 1,
        };
        assert_eq!(harnet_model_build(bad, 0, &mut model), HarnetStatus::InvalidArgument);

        let flat = [7.0f32; 64];
        assert_eq!(
            harnet_image_new(ptr::null(), 8, 8, flat.as_ptr(), HarnetScale::Raw255, 3.0, &mut img),
            HarnetStatus::Ok
        );
        let mut m = HarnetMetrics {
            noise_intensity: 0.0,
            contrast_rms: 0.0,
            connectivity: 0.0,
        };
        assert_eq!(harnet_metrics(img, 0.3, &mut m), HarnetStatus::Metric);
        let mut small = [0.0f32; 3];
        assert_eq!(harnet_image_pixels(img, small.as_mut_ptr(), 3), HarnetStatus::InvalidArgument);
        harnet_image_free(img);
        harnet_image_free(ptr::null_mut());
        harnet_model_free(ptr::null_mut());
        assert_eq!(harnet_image_width(ptr::null()), 0);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/harnet.h")).unwrap();
    for name in [
        "harnet_last_error_message",
        "harnet_version",
        "harnet_image_new",
        "harnet_image_load",
        "harnet_image_save",
        "harnet_image_width",
        "harnet_image_height",
        "harnet_image_scale",
        "harnet_image_pixels",
        "harnet_image_free",
        "harnet_spec_paper",
        "harnet_spec_desk",
        "harnet_model_build",
        "harnet_model_load",
        "harnet_model_save",
        "harnet_model_spec",
        "harnet_model_free",
        "harnet_reconstruct",
        "harnet_metrics",
        "typedef struct HarnetImage HarnetImage;",
        "typedef struct HarnetModel HarnetModel;",
        "HARNET_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name} missing from harnet.h");
    }
}

/// Compiles a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = std::env::var("CC").or_else(|_| which("cc")) else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libharnet_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let manifest = env!("CARGO_MANIFEST_DIR");
    let status = std::process::Command::new(cc)
        .arg(format!("{manifest}/tests/c/smoke.c"))
        .arg(format!("-I{manifest}/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn which(name: &str) -> Result<String, ()> {
    std::env::var_os("PATH")
        .and_then(|paths| {
            std::env::split_paths(&paths)
                .map(|p| p.join(name))
                .find(|p| p.is_file())
        })
        .map(|p| p.to_string_lossy().into_owned())
        .ok_or(())
}
