#![no_main]

use libfuzzer_sys::fuzz_target;

use asyncgp_simnet::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ScenarioConfig::from_json_str(text) {
        // A valid scenario must re-serialize and re-validate cleanly.
        let echoed = cfg.to_json_pretty();
        let back = ScenarioConfig::from_json_str(&echoed).expect("echoed scenario must re-parse");
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.nodes.len(), cfg.nodes.len());
    }
});
