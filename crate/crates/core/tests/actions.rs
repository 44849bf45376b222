mod common;

use proptest::prelude::*;
use taskbot_core::action::{parse_action, scope_for, ActionCode, SessionPhase};

#[test]
fn generated_codes_round_trip_and_cover_every_kind() {
    let detail = common::check_action_roundtrip(10_000).unwrap_or_else(|e| panic!("{e}"));
    println!("{detail}");
}

#[test]
fn scope_grows_with_visible_results() {
    for phase in SessionPhase::ALL {
        for task in [false, true] {
            for visible in 0..3 {
                let fewer = scope_for(phase, task, visible);
                let more = scope_for(phase, task, visible + 1);
                assert!(more.is_superset(&fewer), "{phase:?} task={task} visible={visible}");
            }
        }
    }
}

#[test]
fn scopes_reject_unknown() {
    for (phase, task, visible) in common::all_scope_keys() {
        let scope = scope_for(phase, task, visible);
        assert!(!scope.contains(&ActionCode::Unknown("x".into())));
        assert!(scope.kinds().count() > 0);
    }
}

proptest! {
    #[test]
    fn parsing_never_panics_and_is_stable(text in "\\PC{0,40}") {
        let once = parse_action(&text);
        if let Ok(rendered) = once.render() {
            prop_assert_eq!(parse_action(&rendered), once);
        } else {
            prop_assert!(once.is_unknown());
        }
    }
}
