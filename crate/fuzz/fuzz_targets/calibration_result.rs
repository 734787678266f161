#![no_main]
use libfuzzer_sys::fuzz_target;
use setslam_core::conformal::CalibrationResult;

fuzz_target!(|data: &str| {
    if let Ok(r) = serde_json::from_str::<CalibrationResult>(data) {
        let text = serde_json::to_string(&r).expect("serializes");
        let back: CalibrationResult = serde_json::from_str(&text).expect("roundtrip");
        assert_eq!(back.is_sentinel(), r.is_sentinel());
    }
});
