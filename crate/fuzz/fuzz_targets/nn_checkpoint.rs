#![no_main]

use libfuzzer_sys::fuzz_target;
use mapless::nn::checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = checkpoint::decode(data) {
        // whatever decodes must re-encode to a checkpoint that decodes the same
        let again = checkpoint::encode(&net);
        let back = checkpoint::decode(&again).expect("re-encoded checkpoint decodes");
        assert_eq!(checkpoint::encode(&back), again);
    }
});
