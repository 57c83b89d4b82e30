use anyhow::Result;
use svsprep::lexicon::{g2p_text, Lexicon};

/// Phone line and language-token line for one line of lyrics.
pub fn transcribe_line(text: &str, lexicon: &Lexicon) -> Result<[String; 2]> {
    let seq = g2p_text(text, lexicon)?;
    let tokens: Vec<String> = seq.language_tokens.iter().map(u8::to_string).collect();
    Ok([seq.phonemes.join(" "), tokens.join(" ")])
}

/// Two output lines per input line. Empty input still yields one pair.
pub fn run(text: &str, lexicon: &Lexicon) -> Result<String> {
    let mut lines: Vec<&str> = text.lines().collect();
    if lines.is_empty() {
        lines.push("");
    }
    let mut out = String::new();
    for line in lines {
        let [phones, tokens] = transcribe_line(line, lexicon)?;
        out.push_str(&phones);
        out.push('\n');
        out.push_str(&tokens);
        out.push('\n');
    }
    Ok(out)
}
