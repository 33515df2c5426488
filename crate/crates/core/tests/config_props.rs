//! Config parsing: echo round trip over random partial files.

use mapless::config::Config;
use proptest::prelude::*;

fn partial_config() -> impl Strategy<Value = String> {
    (
        proptest::option::of(0.05..1.5f64),
        proptest::option::of(1usize..2000),
        proptest::option::of(prop_oneof![Just("sync"), Just("async")]),
        proptest::option::of(proptest::collection::vec(1usize..600, 1..4)),
        proptest::option::of(0.5..0.999f64),
        proptest::option::of(2usize..40),
        proptest::option::of(0.01..1.0f64),
    )
        .prop_map(|(v_max, max_steps, mode, hidden, gamma, beams, ls)| {
            let mut s = String::new();
            if v_max.is_some() || max_steps.is_some() {
                s.push_str("[episode]\n");
                if let Some(v) = v_max {
                    s.push_str(&format!("v_max = {v:?}\n"));
                }
                if let Some(n) = max_steps {
                    s.push_str(&format!("max_steps = {n}\n"));
                }
            }
            if let Some(m) = mode {
                s.push_str(&format!("[run]\nmode = \"{m}\"\n"));
            }
            if let Some(h) = hidden {
                s.push_str(&format!("[network]\nactor_hidden = {h:?}\ncritic_hidden = {h:?}\n"));
            }
            if let Some(g) = gamma {
                s.push_str(&format!("[agent]\ngamma = {g:?}\n"));
            }
            if let Some(b) = beams {
                s.push_str(&format!("[lidar]\nn_beams = {b}\n"));
            }
            if let Some(l) = ls {
                s.push_str(&format!("[gp]\nlengthscale = {l:?}\n"));
            }
            s
        })
}

proptest! {
    #[test]
    fn echo_round_trip(text in partial_config()) {
        let first = Config::parse(&text).unwrap();
        let echoed = first.to_toml();
        prop_assert_eq!(Config::parse(&echoed).unwrap(), first);
    }
}

#[test]
fn default_echo_is_complete() {
    let echoed = Config::default().to_toml();
    // every key of every section appears
    let table: toml::Table = echoed.parse().unwrap();
    let json = serde_json::to_value(Config::default()).unwrap();
    let sections = json.as_object().unwrap();
    assert_eq!(table.len(), sections.len());
    for (name, fields) in sections {
        let echoed_keys = table[name].as_table().unwrap();
        for key in fields.as_object().unwrap().keys() {
            assert!(echoed_keys.contains_key(key), "{name}.{key} missing from echo");
        }
    }
}
