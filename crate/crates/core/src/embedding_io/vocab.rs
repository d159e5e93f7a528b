//! Token-id → byte-string table written by the exporter.
//!
//! One `<id>\t<escaped bytes>` line per token. Printable ASCII other than
//! backslash is literal; `\\` is a backslash and `\xHH` any other byte.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, ParseError, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: BTreeMap<u32, Vec<u8>>,
}

pub fn escape_token_bytes(raw: &[u8]) -> String {
    let mut out = String::with_capacity(raw.len());
    for &b in raw {
        match b {
            b'\\' => out.push_str("\\\\"),
            0x21..=0x7e => out.push(b as char),
            _ => out.push_str(&format!("\\x{b:02x}")),
        }
    }
    out
}

pub fn unescape_token(s: &str) -> std::result::Result<Vec<u8>, String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'\\' {
            out.push(bytes[i]);
            i += 1;
            continue;
        }
        match bytes.get(i + 1) {
            Some(b'\\') => {
                out.push(b'\\');
                i += 2;
            }
            Some(b'x') => {
                let hex = s.get(i + 2..i + 4).ok_or_else(|| format!("short \\x escape at column {i}"))?;
                let b = u8::from_str_radix(hex, 16).map_err(|_| format!("bad \\x escape {hex:?} at column {i}"))?;
                out.push(b);
                i += 4;
            }
            _ => return Err(format!("dangling backslash at column {i}")),
        }
    }
    Ok(out)
}

impl Vocabulary {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let fail = |line: usize, msg: String| Error::parse(path, ParseError::Other(format!("line {line}: {msg}")));
        let mut tokens = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (id, tok) = line
                .split_once('\t')
                .ok_or_else(|| fail(n + 1, "expected <id>\\t<token>".into()))?;
            let id: u32 = id.parse().map_err(|_| fail(n + 1, format!("bad id {id:?}")))?;
            let raw = unescape_token(tok).map_err(|m| fail(n + 1, m))?;
            if tokens.insert(id, raw).is_some() {
                return Err(fail(n + 1, format!("duplicate id {id}")));
            }
        }
        Ok(Self { tokens })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.tokens.contains_key(&id)
    }

    pub fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        self.tokens.get(&id).map(Vec::as_slice)
    }

    /// Concatenated token bytes as UTF-8; unknown ids render as `<unk:id>`.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut bytes = Vec::new();
        for &id in ids {
            match self.tokens.get(&id) {
                Some(b) => bytes.extend_from_slice(b),
                None => bytes.extend_from_slice(format!("<unk:{id}>").as_bytes()),
            }
        }
        String::from_utf8_lossy(&bytes).into_owned()
    }
}
