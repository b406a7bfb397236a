//! Plain-text MDP tables.
//!
//! ```text
//! mdp <n_states> <n_actions> <gamma>
//! <s> <a> <reward> <terminal 0|1> <next>:<prob> ...
//! ```
//!
//! One row per `(s, a)`, dummy state included; `#` starts a comment line.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::model::TabularMdp;
use crate::error::{Error, Result};

pub fn to_text(mdp: &TabularMdp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mdp {} {} {}", mdp.n_states(), mdp.n_actions(), mdp.gamma());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let _ = write!(
                out,
                "{s} {a} {} {}",
                mdp.reward(s, a),
                u8::from(mdp.is_terminal(s, a))
            );
            for (next, &p) in mdp.row(s, a).iter().enumerate() {
                if p != 0.0 {
                    let _ = write!(out, " {next}:{p}");
                }
            }
            out.push('\n');
        }
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} `{tok}`")))
}

pub fn from_text(text: &str) -> Result<TabularMdp> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("mdp") {
        return Err(parse_err(hline, "expected `mdp` header"));
    }
    let n: usize = num(toks.next(), hline, "state count")?;
    let na: usize = num(toks.next(), hline, "action count")?;
    let gamma: f64 = num(toks.next(), hline, "discount")?;

    let mut transitions = vec![0.0; n * na * n];
    let mut rewards = vec![0.0; n * na];
    let mut terminal = BTreeSet::new();
    let mut seen = vec![false; n * na];
    for (line, body) in lines {
        let mut toks = body.split_whitespace();
        let s: usize = num(toks.next(), line, "state")?;
        let a: usize = num(toks.next(), line, "action")?;
        if s >= n || a >= na {
            return Err(parse_err(line, format!("pair ({s}, {a}) out of range")));
        }
        let idx = s * na + a;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(parse_err(line, format!("duplicate row for ({s}, {a})")));
        }
        rewards[idx] = num(toks.next(), line, "reward")?;
        match toks.next() {
            Some("1") => {
                terminal.insert((s, a));
            }
            Some("0") => {}
            other => return Err(parse_err(line, format!("bad terminal flag {other:?}"))),
        }
        for tok in toks {
            let (next, p) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(line, format!("expected next:prob, got `{tok}`")))?;
            let next: usize = num(Some(next), line, "successor")?;
            let p: f64 = num(Some(p), line, "probability")?;
            if next >= n {
                return Err(parse_err(line, format!("successor {next} out of range")));
            }
            transitions[idx * n + next] += p;
        }
    }
    if let Some(missing) = seen.iter().position(|&x| !x) {
        return Err(parse_err(
            0,
            format!("missing row for ({}, {})", missing / na, missing % na),
        ));
    }
    TabularMdp::from_parts(n, na, transitions, rewards, terminal, gamma)
}
