//! Instance and profile files.
//!
//! Token files hold whitespace-separated decimal integers, the first being
//! the alphabet size. Byte files are raw bytes over an alphabet of 256.
//! Profiles are written as CSV with header `pos,value`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text_model::{DistanceProfile, IntString, ProfileKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InputFormat {
    #[default]
    Tokens,
    Bytes,
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tokens" => Ok(Self::Tokens),
            "bytes" => Ok(Self::Bytes),
            other => Err(format!("unknown input format '{other}' (tokens, bytes)")),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tokens => "tokens",
            Self::Bytes => "bytes",
        })
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_error(path: &Path, msg: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        msg,
    }
}

pub fn parse_tokens(path: &Path, content: &str) -> Result<IntString> {
    let mut tokens = content.split_ascii_whitespace().enumerate();
    let (_, first) = tokens
        .next()
        .ok_or_else(|| parse_error(path, "empty token stream".into()))?;
    let sigma: u32 = first
        .parse()
        .map_err(|_| parse_error(path, format!("token 1 '{first}' is not an alphabet size")))?;
    let symbols = tokens
        .map(|(i, tok)| {
            tok.parse::<u32>()
                .map_err(|_| parse_error(path, format!("token {} '{tok}' is not a symbol", i + 1)))
        })
        .collect::<Result<Vec<u32>>>()?;
    IntString::new(symbols, sigma).map_err(|e| parse_error(path, e.to_string()))
}

pub fn read_string(path: &Path, format: InputFormat) -> Result<IntString> {
    match format {
        InputFormat::Tokens => {
            let content = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            parse_tokens(path, &content)
        }
        InputFormat::Bytes => {
            let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
            IntString::new(bytes.into_iter().map(u32::from).collect(), 256)
        }
    }
}

pub fn format_tokens(s: &IntString) -> String {
    let mut out = s.sigma().to_string();
    for sym in s.symbols() {
        out.push(' ');
        out.push_str(&sym.to_string());
    }
    out.push('\n');
    out
}

pub fn write_tokens(path: &Path, s: &IntString) -> Result<()> {
    fs::write(path, format_tokens(s)).map_err(|e| io_error(path, e))
}

pub fn write_profile<W: Write>(mut out: W, profile: &DistanceProfile) -> std::io::Result<()> {
    writeln!(out, "pos,value")?;
    for (j, v) in profile.values().iter().enumerate() {
        match profile.kind() {
            ProfileKind::Exact => writeln!(out, "{j},{}", *v as u64)?,
            ProfileKind::Estimate => writeln!(out, "{j},{v}")?,
        }
    }
    Ok(())
}

pub fn write_profile_file(path: &Path, profile: &DistanceProfile) -> Result<()> {
    let mut buf = Vec::new();
    write_profile(&mut buf, profile).map_err(|e| io_error(path, e))?;
    fs::write(path, buf).map_err(|e| io_error(path, e))
}

pub fn read_profile_file(path: &Path) -> Result<Vec<f64>> {
    let content = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut lines = content.lines();
    if lines.next() != Some("pos,value") {
        return Err(parse_error(path, "missing 'pos,value' header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            line.split_once(',')
                .and_then(|(_, v)| v.parse::<f64>().ok())
                .ok_or_else(|| parse_error(path, format!("line {}: malformed row '{line}'", i + 2)))
        })
        .collect()
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}
