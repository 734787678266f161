#![no_main]
use libfuzzer_sys::fuzz_target;
use setslam_sim::TrialConfig;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = serde_json::from_str::<TrialConfig>(data) {
        let _ = cfg.validate();
        let _ = cfg.trial_seed(usize::MAX);
    }
});
