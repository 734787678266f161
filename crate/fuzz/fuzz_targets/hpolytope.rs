#![no_main]
use libfuzzer_sys::fuzz_target;
use setslam_core::polytope::HPolytope;

fuzz_target!(|data: &str| {
    if let Ok(p) = HPolytope::from_json(data) {
        let again = HPolytope::from_json(&p.to_json()).expect("serialized polytope parses");
        assert_eq!(p, again);
        let _ = p.is_empty();
    }
});
