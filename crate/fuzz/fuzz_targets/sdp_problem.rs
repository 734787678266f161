#![no_main]
use libfuzzer_sys::fuzz_target;
use setslam_core::sdp::SdpProblem;

fuzz_target!(|data: &str| {
    if let Ok(p) = SdpProblem::from_json(data) {
        p.validate().expect("parsed problems are valid");
        let _ = SdpProblem::from_json(&p.to_json()).expect("roundtrip");
    }
});
