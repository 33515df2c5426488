#![no_main]

use libfuzzer_sys::fuzz_target;
use mapless::eval::WaypointTask;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(task) = WaypointTask::from_json(text) {
            let _ = task.check_world(&mapless::sim::bundled::test_7x10(), 0.25);
        }
    }
});
