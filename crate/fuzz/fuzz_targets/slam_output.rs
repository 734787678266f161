#![no_main]
use libfuzzer_sys::fuzz_target;
use setslam_core::slam::SlamOutput;

fuzz_target!(|data: &str| {
    if let Ok(out) = SlamOutput::from_json(data) {
        assert_eq!(SlamOutput::from_json(&out.to_json()).expect("roundtrip"), out);
    }
});
