//! Human-readable rendering of a turn log.

use std::fmt::Write;

use taskbot_core::orchestrator::TurnRecord;

pub fn format_transcript(records: &[TurnRecord]) -> String {
    let mut out = String::new();
    for (i, record) in records.iter().enumerate() {
        let turn = &record.turn;
        let _ = writeln!(
            out,
            "--- turn {} @ {} ({:?})",
            i + 1,
            turn.timestamp,
            record.state.phase
        );
        let _ = writeln!(out, "user: {}", turn.user_utterance);
        let _ = writeln!(out, "action: {}  policy: {}", turn.action_code, turn.policy);
        if let Some(headline) = &turn.screen.headline {
            let _ = writeln!(out, "screen: {headline}");
        }
        for line in turn.system_response.lines() {
            let _ = writeln!(out, "bot: {line}");
        }
        if !turn.screen.options.is_empty() {
            let _ = writeln!(out, "options: {}", turn.screen.options.join(" | "));
        }
        for note in &turn.annotations {
            let _ = writeln!(out, "note: {note}");
        }
    }
    out
}
