//! Invitation links: the URL-fragment grammar that carries a share's
//! folder name, Base32 share id, and one-time key.

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};

use super::WireError;

/// Characters escaped when writing fragment parameter values.
const VALUE_ESCAPES: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'%')
    .add(b'&')
    .add(b'=')
    .add(b'#')
    .add(b'+')
    .add(b'"')
    .add(b'<')
    .add(b'>');

/// Host used when formatting canonical links.
const LINK_HOST: &str = "https://link.getsync.com/";

/// A parsed invitation link.
///
/// `folder_name` (`f`), `share_id_b32` (`s`) and `one_time_key` (`i`) are
/// always present; a link without them cannot be redeemed. The rest are
/// optional, with `version` carried by v2.0 links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareLink {
    pub folder_name: String,
    pub size_hint: Option<String>,
    pub share_id_b32: String,
    pub one_time_key: String,
    pub server_peer_id: Option<String>,
    pub expiry: Option<i64>,
    pub version: Option<String>,
}

/// Parses an invitation URL's fragment parameters.
///
/// Parameters are split on `&`; the first occurrence of a name wins. Any
/// URL shape is accepted as long as a fragment is present and carries the
/// mandatory `f`, `s`, `i` trio.
pub fn parse_share_link(url: &str) -> Result<ShareLink, WireError> {
    let fragment = url.split_once('#').map(|(_, f)| f).unwrap_or("");
    let mut folder_name = None;
    let mut size_hint = None;
    let mut share_id_b32 = None;
    let mut one_time_key = None;
    let mut server_peer_id = None;
    let mut expiry_text: Option<String> = None;
    let mut version = None;
    for piece in fragment.split('&') {
        if piece.is_empty() {
            continue;
        }
        let (name, value) = piece.split_once('=').unwrap_or((piece, ""));
        let value = percent_decode_str(value).decode_utf8_lossy().into_owned();
        let slot = match name {
            "f" => &mut folder_name,
            "sz" => &mut size_hint,
            "s" => &mut share_id_b32,
            "i" => &mut one_time_key,
            "p" => &mut server_peer_id,
            "e" => &mut expiry_text,
            "v" => &mut version,
            _ => continue,
        };
        if slot.is_none() {
            *slot = Some(value);
        }
    }
    let expiry = match expiry_text {
        None => None,
        Some(text) => Some(text.parse::<i64>().map_err(|_| WireError::BadExpiry)?),
    };
    Ok(ShareLink {
        folder_name: folder_name.ok_or(WireError::MissingMandatoryField('f'))?,
        size_hint,
        share_id_b32: share_id_b32.ok_or(WireError::MissingMandatoryField('s'))?,
        one_time_key: one_time_key.ok_or(WireError::MissingMandatoryField('i'))?,
        server_peer_id,
        expiry,
        version,
    })
}

/// Formats a link in canonical parameter order: f, sz, s, i, p, e, v.
pub fn format_share_link(link: &ShareLink) -> String {
    let mut out = String::from(LINK_HOST);
    out.push('#');
    push_param(&mut out, "f", &link.folder_name);
    if let Some(sz) = &link.size_hint {
        push_param(&mut out, "sz", sz);
    }
    push_param(&mut out, "s", &link.share_id_b32);
    push_param(&mut out, "i", &link.one_time_key);
    if let Some(p) = &link.server_peer_id {
        push_param(&mut out, "p", p);
    }
    if let Some(e) = link.expiry {
        push_param(&mut out, "e", &e.to_string());
    }
    if let Some(v) = &link.version {
        push_param(&mut out, "v", v);
    }
    out
}

fn push_param(out: &mut String, name: &str, value: &str) {
    if !out.ends_with('#') {
        out.push('&');
    }
    out.push_str(name);
    out.push('=');
    out.push_str(&utf8_percent_encode(value, VALUE_ESCAPES).to_string());
}
