#![no_main]
use libfuzzer_sys::fuzz_target;
use setslam_core::slam::SlamConfig;
use setslam_sim::SlamSimConfig;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = serde_json::from_str::<SlamSimConfig>(data) {
        let _ = cfg.world.validate();
    }
    let _ = serde_json::from_str::<SlamConfig>(data);
});
