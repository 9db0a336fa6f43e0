use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{elements, Error, Result};

/// Recognised exchange-correlation tags of the UPF naming scheme.
pub const XC_TAGS: [&str; 6] = ["pbe", "pz", "vwn", "coulomb", "blyp", "pw91"];

/// Fields encoded in a `material.explanation.UPF` file name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoMeta {
    pub element: String,
    pub relativistic: bool,
    pub xc_tag: String,
    pub state_tags: Vec<char>,
    pub origin_tags: Vec<String>,
    /// Non-fatal findings such as an unrecognised element symbol.
    pub warnings: Vec<String>,
}

fn is_state_token(tok: &str) -> bool {
    !tok.is_empty()
        && tok.chars().all(|c| "spdfn".contains(c))
        && tok.chars().enumerate().all(|(i, c)| !tok[..i].contains(c))
}

/// Parses a UPF file name such as `Ge.pbe-mt_fhi.UPF`. Directory
/// components are ignored.
pub fn parse_upf_name(filename: &str) -> Result<PseudoMeta> {
    let name = Path::new(filename)
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or(filename);
    let stem = match name.len().checked_sub(4) {
        Some(cut) if name.is_char_boundary(cut) && name[cut..].eq_ignore_ascii_case(".upf") => {
            &name[..cut]
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "{filename:?} does not end in .UPF"
            )))
        }
    };
    let missing = |field| Error::MandatoryField {
        name: name.to_string(),
        field,
    };
    let (element, explanation) = match stem.split_once('.') {
        Some((e, x)) => (e, x),
        None => (stem, ""),
    };
    if element.is_empty() {
        return Err(missing("element"));
    }
    let mut warnings = Vec::new();
    if !elements::is_known(element) {
        let w = format!("unknown element symbol {element:?}");
        log::warn!("{name}: {w}");
        warnings.push(w);
    }
    let mut tokens = explanation.split('-').filter(|t| !t.is_empty()).peekable();
    let relativistic = tokens.next_if(|t| t.eq_ignore_ascii_case("rel")).is_some();
    let xc_tag = tokens
        .next()
        .map(|t| t.to_ascii_lowercase())
        .filter(|t| XC_TAGS.contains(&t.as_str()))
        .ok_or_else(|| missing("xc functional"))?;
    let mut state_tags = Vec::new();
    let mut origin_tags = Vec::new();
    for tok in tokens {
        if is_state_token(tok) {
            state_tags.extend(tok.chars());
        } else {
            origin_tags.push(tok.to_string());
        }
    }
    Ok(PseudoMeta {
        element: element.to_string(),
        relativistic,
        xc_tag,
        state_tags,
        origin_tags,
        warnings,
    })
}
