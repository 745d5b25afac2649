//! Label-wise hostname matching with strict wildcard rules.
//!
//! A pattern may contain at most one `*`, and only as the entire leftmost
//! label of a name with at least two further labels. The wildcard stands for
//! exactly one non-empty label. No substring or regex matching is done, so
//! `mywebsite.com` never matches `mywebsite.com.evil.com`.

use std::fmt;

use crate::x509::canonical_dns_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternIssue {
    Empty,
    EmptyLabel,
    MultipleWildcards,
    WildcardNotLeftmost,
    PartialLabelWildcard,
    WildcardTooBroad,
}

impl fmt::Display for PatternIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Empty => "empty name",
            Self::EmptyLabel => "empty label",
            Self::MultipleWildcards => "more than one wildcard",
            Self::WildcardNotLeftmost => "wildcard not in the leftmost label",
            Self::PartialLabelWildcard => "wildcard does not cover a whole label",
            Self::WildcardTooBroad => "wildcard directly above a top-level label",
        })
    }
}

/// Checks that a (canonicalized) pattern obeys the wildcard rules.
pub fn check_pattern(pattern: &str) -> Result<(), PatternIssue> {
    if pattern.is_empty() {
        return Err(PatternIssue::Empty);
    }
    let labels: Vec<&str> = pattern.split('.').collect();
    if labels.iter().any(|l| l.is_empty()) {
        return Err(PatternIssue::EmptyLabel);
    }
    let stars = pattern.matches('*').count();
    if stars == 0 {
        return Ok(());
    }
    if stars > 1 {
        return Err(PatternIssue::MultipleWildcards);
    }
    if !labels[0].contains('*') {
        return Err(PatternIssue::WildcardNotLeftmost);
    }
    if labels[0] != "*" {
        return Err(PatternIssue::PartialLabelWildcard);
    }
    if labels.len() < 3 {
        return Err(PatternIssue::WildcardTooBroad);
    }
    Ok(())
}

/// True iff `pattern` is well-formed and matches `hostname` label by label.
pub fn matches(pattern: &str, hostname: &str) -> bool {
    let pattern = canonical_dns_name(pattern);
    let hostname = canonical_dns_name(hostname);
    if check_pattern(&pattern).is_err() || hostname.is_empty() {
        return false;
    }
    let p: Vec<&str> = pattern.split('.').collect();
    let h: Vec<&str> = hostname.split('.').collect();
    p.len() == h.len()
        && p.iter().zip(&h).enumerate().all(
            |(i, (pl, hl))| {
                if i == 0 && *pl == "*" {
                    !hl.is_empty()
                } else {
                    pl == hl
                }
            },
        )
}

/// Outcome of matching a hostname against a certificate's presented names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HostnameMatch {
    pub matched: Option<String>,
    /// Presented names that can never match because they break the wildcard rules.
    pub rejected_patterns: Vec<(String, PatternIssue)>,
}

pub fn match_any(presented: &[String], hostname: &str) -> HostnameMatch {
    let mut out = HostnameMatch::default();
    for name in presented {
        let canonical = canonical_dns_name(name);
        if let Err(issue) = check_pattern(&canonical) {
            out.rejected_patterns.push((name.clone(), issue));
            continue;
        }
        if out.matched.is_none() && matches(&canonical, hostname) {
            out.matched = Some(name.clone());
        }
    }
    out
}
