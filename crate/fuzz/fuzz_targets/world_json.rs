#![no_main]

use libfuzzer_sys::fuzz_target;
use mapless::sim::WorldSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(world) = WorldSpec::from_json(text) {
            let back = WorldSpec::from_json(&world.to_json()).expect("echoed world parses");
            assert_eq!(back.obstacles().len(), world.obstacles().len());
        }
    }
});
