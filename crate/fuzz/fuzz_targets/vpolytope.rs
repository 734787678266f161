#![no_main]
use libfuzzer_sys::fuzz_target;
use setslam_core::polytope::{diameter, VPolytope};

fuzz_target!(|data: &str| {
    if let Ok(v) = VPolytope::from_json(data) {
        assert_eq!(VPolytope::from_json(&v.to_json()).expect("roundtrip"), v);
        assert!(diameter(&v) >= 0.0);
    }
});
