#![no_main]
use libfuzzer_sys::fuzz_target;
use setslam_core::conformal::{calibrate_records, parse_records, write_records, StereoRig};

fuzz_target!(|data: &str| {
    if let Ok(records) = parse_records(data) {
        assert_eq!(parse_records(&write_records(&records)).expect("roundtrip"), records);
        let _ = calibrate_records(&records, &StereoRig::horizontal(0.12), 0.1);
    }
});
