//! Login-log grammar.
//!
//! Successful logins look like
//!
//! ```text
//! [Wed Oct 26 13:47:33 2016] LOGIN OK user_id=6834XIFTZ503 login_type=normal credential_source=LTI host=10.0.0.9 port=40001 UA=Mozilla/5.0 ...
//! ```
//!
//! and rejected passwords like
//!
//! ```text
//! [Wed Oct 26 13:48:32 2016] AUTH WwDB: password rejected, deferring to site_checkPassword user_id=1DWC8BNALJ04 login_type=normal credential_source=params 10.0.0.9 port=40001 UA=...
//! ```
//!
//! The server wraps long user-agent strings onto continuation lines that do
//! not start with a bracket; those are skipped.

use chrono::NaiveDateTime;
use serde::Serialize;

use super::{format_stamp, parse_bracket_stamp, MalformedLine};

const OK_MARKER: &str = "LOGIN OK";
const REJECTED_PREFIX: &str = "AUTH WwDB: password rejected, deferring to site_checkPassword";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoginEvent {
    pub local_stamp: NaiveDateTime,
    pub user_id: String,
    pub success: bool,
    pub login_type: String,
    pub credential_source: String,
    pub host: String,
    pub port: Option<u16>,
    pub user_agent: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoginLine {
    Event(LoginEvent),
    /// Blank lines, wrapped user-agent continuations, and record kinds that
    /// carry no login outcome (e.g. session timeouts).
    Skip,
}

impl LoginEvent {
    /// Canonical rendering. Failures use the rejected-password wording, in
    /// which the host appears without a `host=` key.
    pub fn to_line(&self) -> String {
        let mut line = format!("[{}] ", format_stamp(&self.local_stamp));
        if self.success {
            line.push_str(OK_MARKER);
        } else {
            line.push_str(REJECTED_PREFIX);
        }
        line.push_str(&format!(
            " user_id={} login_type={} credential_source={}",
            self.user_id, self.login_type, self.credential_source
        ));
        if !self.host.is_empty() {
            if self.success {
                line.push_str(&format!(" host={}", self.host));
            } else {
                line.push_str(&format!(" {}", self.host));
            }
        }
        if let Some(port) = self.port {
            line.push_str(&format!(" port={port}"));
        }
        line.push_str(&format!(" UA={}", self.user_agent));
        line
    }
}

fn is_failure_record(body: &str) -> bool {
    body.starts_with("AUTH ") || body.contains("LOGIN FAILED") || body.contains("rejected")
}

/// Parse one physical login-log line.
pub fn parse_login_line(line: &str) -> Result<LoginLine, MalformedLine> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if !line.starts_with('[') {
        return Ok(LoginLine::Skip);
    }
    let close = line
        .find(']')
        .ok_or_else(|| MalformedLine::new("unterminated bracket date"))?;
    let local_stamp = parse_bracket_stamp(&line[..=close])?;
    let body = line[close + 1..].trim_start();

    let success = if body.starts_with(OK_MARKER) || body.contains(" LOGIN OK ") {
        true
    } else if is_failure_record(body) {
        false
    } else {
        return Ok(LoginLine::Skip);
    };

    // Everything after `UA=` belongs to the user agent, spaces included.
    let (fields, user_agent) = match body.find(" UA=") {
        Some(i) => (&body[..i], &body[i + 4..]),
        None => match body.strip_prefix("UA=") {
            Some(ua) => ("", ua),
            None => (body, ""),
        },
    };

    let mut user_id = None;
    let mut login_type = String::new();
    let mut credential_source = String::new();
    let mut host = String::new();
    let mut port = None;
    let mut seen_user = false;
    for token in fields.split_whitespace() {
        match token.split_once('=') {
            Some(("user_id", v)) => {
                user_id = Some(v.to_string());
                seen_user = true;
            }
            Some(("login_type", v)) => login_type = v.to_string(),
            Some(("credential_source", v)) => credential_source = v.to_string(),
            Some(("host", v)) => host = v.to_string(),
            Some(("port", v)) => {
                port = Some(
                    v.parse()
                        .map_err(|_| MalformedLine::new(format!("bad port {v:?}")))?,
                )
            }
            Some(_) => {}
            // The failure wording lists the address as a bare token.
            None if seen_user && host.is_empty() && looks_like_host(token) => {
                host = token.to_string()
            }
            None => {}
        }
    }
    let user_id = match user_id {
        Some(u) if !u.is_empty() => u,
        _ => return Err(MalformedLine::new("login record without user_id")),
    };

    Ok(LoginLine::Event(LoginEvent {
        local_stamp,
        user_id,
        success,
        login_type,
        credential_source,
        host,
        port,
        user_agent: user_agent.to_string(),
    }))
}

fn looks_like_host(token: &str) -> bool {
    token.contains('.')
        && token
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'.' || b == b':' || b == b'-')
}
