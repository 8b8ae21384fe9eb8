//! Recovery-label grammar used on constituent tree nodes.
//!
//! A tree label is a `+`-joined unary chain, outermost first. Each element is
//! a base category optionally followed by `-remote` and then `-ancestor1`:
//!
//! ```text
//! BASE ("+" BASE)* with per-element suffixes ("-remote")? ("-ancestor1")?
//! ```

use std::fmt;

/// Label of the tree root.
pub const ROOT: &str = "ROOT";

/// Marks a node that had at least one remote parent.
pub const REMOTE_SUFFIX: &str = "-remote";

/// Marks a node moved one edge down during discontinuity removal.
pub const ANCESTOR1_SUFFIX: &str = "-ancestor1";

/// Separator of collapsed unary chains.
pub const CHAIN_SEP: char = '+';

/// One element of a (possibly collapsed) tree label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelPart {
    pub base: String,
    pub remote: bool,
    pub ancestor1: bool,
}

impl LabelPart {
    pub fn new(base: impl Into<String>) -> Self {
        LabelPart {
            base: base.into(),
            remote: false,
            ancestor1: false,
        }
    }

    /// Parse a single chain element, peeling suffixes right to left.
    pub fn parse(s: &str) -> Self {
        let (rest, ancestor1) = match s.strip_suffix(ANCESTOR1_SUFFIX) {
            Some(rest) => (rest, true),
            None => (s, false),
        };
        let (base, remote) = match rest.strip_suffix(REMOTE_SUFFIX) {
            Some(base) => (base, true),
            None => (rest, false),
        };
        LabelPart {
            base: base.to_owned(),
            remote,
            ancestor1,
        }
    }
}

impl fmt::Display for LabelPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        if self.remote {
            f.write_str(REMOTE_SUFFIX)?;
        }
        if self.ancestor1 {
            f.write_str(ANCESTOR1_SUFFIX)?;
        }
        Ok(())
    }
}

/// Split a collapsed label into its chain elements, outermost first.
pub fn split_chain(label: &str) -> Vec<LabelPart> {
    label.split(CHAIN_SEP).map(LabelPart::parse).collect()
}

/// Join chain elements back into a single label.
pub fn join_chain(parts: &[LabelPart]) -> String {
    let mut out = String::new();
    for (idx, part) in parts.iter().enumerate() {
        if idx > 0 {
            out.push(CHAIN_SEP);
        }
        out.push_str(&part.to_string());
    }
    out
}

/// Strip recovery suffixes from a single (non-chain) label.
pub fn base_label(label: &str) -> &str {
    let rest = label.strip_suffix(ANCESTOR1_SUFFIX).unwrap_or(label);
    rest.strip_suffix(REMOTE_SUFFIX).unwrap_or(rest)
}

/// Whether `label` may be used as a category in an input graph.
pub fn is_valid_category(label: &str) -> bool {
    !label.is_empty()
        && label != ROOT
        && !label.contains(CHAIN_SEP)
        && !label
            .chars()
            .any(|c| c.is_whitespace() || c == '(' || c == ')')
        && !label.ends_with(REMOTE_SUFFIX)
        && !label.ends_with(ANCESTOR1_SUFFIX)
}

/// Whether a tree label matches the recovery-label grammar. `ROOT` may only
/// appear as the first element of the chain.
pub fn matches_grammar(label: &str) -> bool {
    split_chain(label).iter().enumerate().all(|(idx, part)| {
        if part.base == ROOT {
            idx == 0 && !part.remote && !part.ancestor1
        } else {
            is_valid_category(&part.base)
        }
    })
}
