#![no_main]
use libfuzzer_sys::fuzz_target;
use setslam_core::uq::PosePolytope;

fuzz_target!(|data: &str| {
    if let Ok(p) = PosePolytope::from_json(data) {
        assert_eq!(p.n_rows(), p.d().len());
        assert_eq!(PosePolytope::from_json(&p.to_json()).expect("roundtrip"), p);
    }
});
