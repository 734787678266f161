#![no_main]
use libfuzzer_sys::fuzz_target;
use setslam_core::uq::DecomposedPoseSet;

fuzz_target!(|data: &str| {
    if let Ok(d) = DecomposedPoseSet::from_json(data) {
        assert!(d.rotation.radius >= 0.0);
        assert_eq!(DecomposedPoseSet::from_json(&d.to_json()).expect("roundtrip"), d);
    }
});
