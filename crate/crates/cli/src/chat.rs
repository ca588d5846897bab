use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::anyhow;
use pf_core::generate::{read_bundle, BundleError};
use pf_core::runtime::{
    ChatSession, EventPayload, GenerationAdapter, LlmGenerator, MockGenerator, RuntimeError,
    SessionEvent,
};

use crate::Failure;

fn print_events(events: &[SessionEvent]) {
    for event in events {
        match &event.payload {
            EventPayload::Message {
                text,
                retry_count,
                fallback,
                ..
            } => {
                let mut line = format!("agent> {text}");
                if *fallback {
                    line.push_str("  [fallback]");
                } else if *retry_count > 0 {
                    line.push_str(&format!("  [verified after {retry_count} retry(ies)]"));
                }
                println!("{line}");
            }
            EventPayload::ModalityHint(hint) => println!(
                "       (spoken: voice {}, speed {})",
                hint.voice_style, hint.voice_speed
            ),
            EventPayload::Error { message } => eprintln!("error: {message}"),
            EventPayload::SessionStarted { .. } | EventPayload::TypingStarted { .. } => {}
        }
    }
}

/// Line-based chat with a bundle; `/quit` or end of input stops.
pub fn chat(path: &Path, mock: bool) -> Result<(), Failure> {
    let bundle = read_bundle(path).map_err(|err| match err {
        e @ BundleError::Io { .. } => Failure::usage(e),
        e => Failure::invalid(e),
    })?;
    let adapter: Box<dyn GenerationAdapter> = if mock {
        Box::new(MockGenerator::new())
    } else {
        Box::new(LlmGenerator::from_env().map_err(Failure::adapter)?)
    };
    let mut session = ChatSession::create("terminal", Arc::new(bundle), adapter.as_ref()).map_err(
        |err| match err {
            e @ RuntimeError::Adapter(_) => Failure::adapter(e),
            e => Failure::invalid(e),
        },
    )?;
    println!(
        "chatting as {} (/quit to leave)",
        session.bundle().profile_label
    );
    print_events(session.events());

    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        print!("you> ");
        io::stdout()
            .flush()
            .map_err(|e| Failure::usage(anyhow!(e)))?;
        let Some(line) = lines.next() else { break };
        let line = line.map_err(|e| Failure::usage(anyhow!(e)))?;
        let text = line.trim();
        if text == "/quit" {
            break;
        }
        if text.is_empty() {
            continue;
        }
        let before = session.last_sequence();
        let _ = session.step(text, adapter.as_ref());
        print_events(session.events_after(before));
    }
    println!();
    Ok(())
}
