//! Traditional certificate validation, reported as independent failure reasons.
//!
//! Every criterion is always evaluated. The resulting six flags plus the
//! self-signed bit are the evidence the first-phase classifier consumes.

pub mod hostname;

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::x509::{canonical_dns_name, oid, CertificateView, KeyUsageBit};

const NOT_EVALUATED: &str = "absent; not evaluated";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    KeyUsage,
    ValidityDates,
    CriticalExtensions,
    HostnameValidation,
    BasicConstraints,
    NameConstraints,
}

impl Criterion {
    /// Fixed report order.
    pub const ALL: [Criterion; 6] = [
        Self::KeyUsage,
        Self::ValidityDates,
        Self::CriticalExtensions,
        Self::HostnameValidation,
        Self::BasicConstraints,
        Self::NameConstraints,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::KeyUsage => "key_usage",
            Self::ValidityDates => "validity_dates",
            Self::CriticalExtensions => "critical_extensions",
            Self::HostnameValidation => "hostname_validation",
            Self::BasicConstraints => "basic_constraints",
            Self::NameConstraints => "name_constraints",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub criterion: Criterion,
    pub failed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn pass(criterion: Criterion, detail: impl Into<String>) -> Self {
        Self { criterion, failed: false, detail: detail.into() }
    }

    fn fail(criterion: Criterion, detail: impl Into<String>) -> Self {
        Self { criterion, failed: true, detail: detail.into() }
    }

    fn from_problems(criterion: Criterion, problems: Vec<String>, ok_detail: impl Into<String>) -> Self {
        if problems.is_empty() {
            Self::pass(criterion, ok_detail)
        } else {
            Self::fail(criterion, problems.join("; "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// One entry per criterion, in [`Criterion::ALL`] order.
    pub results: Vec<CriterionResult>,
    pub self_signed: bool,
    pub evaluated_at: DateTime<Utc>,
    pub hostname: String,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| !r.failed)
    }

    pub fn failed(&self, criterion: Criterion) -> bool {
        self.result(criterion).is_some_and(|r| r.failed)
    }

    pub fn result(&self, criterion: Criterion) -> Option<&CriterionResult> {
        self.results.iter().find(|r| r.criterion == criterion)
    }

    pub fn failing(&self) -> Vec<Criterion> {
        self.results.iter().filter(|r| r.failed).map(|r| r.criterion).collect()
    }

    /// Builds a report directly from flags, e.g. for synthetic corpora.
    pub fn from_flags(flags: [bool; 6], self_signed: bool, hostname: &str, evaluated_at: DateTime<Utc>) -> Self {
        let results = Criterion::ALL
            .iter()
            .zip(flags)
            .map(|(&c, failed)| CriterionResult {
                criterion: c,
                failed,
                detail: if failed { "synthetic failure".into() } else { "ok".into() },
            })
            .collect();
        Self { results, self_signed, evaluated_at, hostname: hostname.to_owned() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub recognized_critical_oids: BTreeSet<String>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        let oids = [
            oid::BASIC_CONSTRAINTS,
            oid::KEY_USAGE,
            oid::SUBJECT_ALT_NAME,
            oid::NAME_CONSTRAINTS,
            oid::EXTENDED_KEY_USAGE,
            oid::CERTIFICATE_POLICIES,
        ];
        Self { recognized_critical_oids: oids.iter().map(|s| s.to_string()).collect() }
    }
}

fn cert_label(index: usize) -> String {
    if index == 0 {
        "leaf".into()
    } else {
        format!("chain[{index}]")
    }
}

/// Leaf needs digitalSignature or keyEncipherment; every issuer needs keyCertSign.
/// An absent extension is not evaluated.
pub fn check_key_usage(chain: &[CertificateView]) -> CriterionResult {
    let mut problems = Vec::new();
    let mut evaluated = false;
    for (i, cert) in chain.iter().enumerate() {
        let Some(ku) = cert.key_usage else { continue };
        evaluated = true;
        let ok = if i == 0 {
            ku.contains(KeyUsageBit::DigitalSignature) || ku.contains(KeyUsageBit::KeyEncipherment)
        } else {
            ku.contains(KeyUsageBit::KeyCertSign)
        };
        if !ok {
            let needed = if i == 0 { "digitalSignature or keyEncipherment" } else { "keyCertSign" };
            problems.push(format!("{} has KeyUsage {:?} without {needed}", cert_label(i), ku.names()));
        }
    }
    CriterionResult::from_problems(Criterion::KeyUsage, problems, if evaluated { "ok" } else { NOT_EVALUATED })
}

pub fn check_validity(cert: &CertificateView, now: DateTime<Utc>) -> CriterionResult {
    if now < cert.not_before {
        CriterionResult::fail(
            Criterion::ValidityDates,
            format!("not yet valid: notBefore {} is after {}", cert.not_before.to_rfc3339(), now.to_rfc3339()),
        )
    } else if now > cert.not_after {
        let days_expired = (now - cert.not_after).num_seconds().div_euclid(86_400).max(0);
        CriterionResult::fail(
            Criterion::ValidityDates,
            format!("expired: notAfter {}, days_expired={days_expired}", cert.not_after.to_rfc3339()),
        )
    } else {
        CriterionResult::pass(Criterion::ValidityDates, "ok")
    }
}

pub fn check_critical_extensions(cert: &CertificateView, recognized_oids: &BTreeSet<String>) -> CriterionResult {
    let unknown: Vec<&str> = cert
        .extensions
        .iter()
        .filter(|e| e.critical && !recognized_oids.contains(&e.oid))
        .map(|e| e.oid.as_str())
        .collect();
    if unknown.is_empty() {
        CriterionResult::pass(Criterion::CriticalExtensions, "ok")
    } else {
        CriterionResult::fail(Criterion::CriticalExtensions, format!("unrecognized critical extensions {unknown:?}"))
    }
}

/// Names the hostname check (and name constraints) apply to: SAN dNSNames, or the CN when there are none.
pub fn presented_names(cert: &CertificateView) -> Vec<String> {
    if cert.san_dns_names.is_empty() {
        cert.subject_cn.iter().cloned().collect()
    } else {
        cert.san_dns_names.clone()
    }
}

pub fn check_hostname(cert: &CertificateView, hostname: &str) -> CriterionResult {
    if canonical_dns_name(hostname).is_empty() {
        return CriterionResult::fail(Criterion::HostnameValidation, "empty hostname");
    }
    let names = presented_names(cert);
    let source = if cert.san_dns_names.is_empty() { "subject CN" } else { "SAN" };
    let m = hostname::match_any(&names, hostname);
    if let Some(name) = m.matched {
        return CriterionResult::pass(Criterion::HostnameValidation, format!("matched {source} entry {name}"));
    }
    let mut detail = format!("{hostname} matches no {source} entry in {names:?}");
    for (pattern, issue) in &m.rejected_patterns {
        detail.push_str(&format!("; invalid pattern {pattern}: {issue}"));
    }
    CriterionResult::fail(Criterion::HostnameValidation, detail)
}

/// Every issuer must be a CA, and a CA at chain index `i` with pathLen `p`
/// may have at most `p` intermediate CAs below it (`i - 1 <= p`).
pub fn check_basic_constraints(chain: &[CertificateView]) -> CriterionResult {
    let mut problems = Vec::new();
    for (i, cert) in chain.iter().enumerate().skip(1) {
        match cert.basic_constraints {
            None => problems.push(format!("{} issues certificates but has no BasicConstraints", cert_label(i))),
            Some(bc) if !bc.is_ca => problems.push(format!("{} issues certificates but cA is false", cert_label(i))),
            Some(bc) => {
                if let Some(p) = bc.path_len {
                    let below = i - 1;
                    if below > p as usize {
                        problems.push(format!(
                            "{} has pathLenConstraint {p} but {below} intermediate CAs follow it",
                            cert_label(i)
                        ));
                    }
                }
            }
        }
    }
    CriterionResult::from_problems(Criterion::BasicConstraints, problems, "ok")
}

fn within_subtree(name: &str, subtree: &str) -> bool {
    let subtree = canonical_dns_name(subtree);
    if subtree.is_empty() {
        return true;
    }
    match subtree.strip_prefix('.') {
        Some(_) => name.ends_with(&subtree),
        None => name == subtree || name.ends_with(&format!(".{subtree}")),
    }
}

pub fn check_name_constraints(chain: &[CertificateView]) -> CriterionResult {
    let Some(leaf) = chain.first() else {
        return CriterionResult::pass(Criterion::NameConstraints, NOT_EVALUATED);
    };
    let names: Vec<String> = presented_names(leaf).iter().map(|n| canonical_dns_name(n)).collect();
    let mut problems = Vec::new();
    let mut notes = Vec::new();
    let mut evaluated = false;
    for (i, ca) in chain.iter().enumerate().skip(1) {
        let Some(nc) = &ca.name_constraints else { continue };
        evaluated = true;
        if nc.has_base_distance {
            notes.push(format!("{} sets minimum/maximum BaseDistance (ignored)", cert_label(i)));
        }
        for name in &names {
            if !nc.permitted.is_empty() && !nc.permitted.iter().any(|s| within_subtree(name, s)) {
                problems.push(format!("{name} outside permitted subtrees {:?} of {}", nc.permitted, cert_label(i)));
            }
            if let Some(s) = nc.excluded.iter().find(|s| within_subtree(name, s)) {
                problems.push(format!("{name} within excluded subtree {s} of {}", cert_label(i)));
            }
        }
    }
    if problems.is_empty() {
        let mut detail = if evaluated { "ok".to_string() } else { NOT_EVALUATED.to_string() };
        for n in notes {
            detail.push_str("; ");
            detail.push_str(&n);
        }
        CriterionResult::pass(Criterion::NameConstraints, detail)
    } else {
        problems.extend(notes);
        CriterionResult::fail(Criterion::NameConstraints, problems.join("; "))
    }
}

pub fn is_self_signed(cert: &CertificateView) -> bool {
    cert.issuer_dn.canonical_eq(&cert.subject_dn)
        && match &cert.aki {
            None => true,
            Some(aki) => cert.ski.as_ref() == Some(aki),
        }
}

/// Runs every criterion over a leaf-first chain. Validity dates and critical
/// extensions are checked on every certificate; hostname on the leaf only.
///
/// # Panics
/// If `chain` is empty.
pub fn validate(
    chain: &[CertificateView],
    hostname: &str,
    now: DateTime<Utc>,
    config: &ValidationConfig,
) -> ValidationReport {
    assert!(!chain.is_empty(), "validate requires a non-empty chain");
    let leaf = &chain[0];

    let per_cert = |check: &dyn Fn(&CertificateView) -> CriterionResult, criterion: Criterion| {
        let problems: Vec<String> = chain
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let r = check(c);
                r.failed.then(|| format!("{}: {}", cert_label(i), r.detail))
            })
            .collect();
        CriterionResult::from_problems(criterion, problems, "ok")
    };

    let results = vec![
        check_key_usage(chain),
        per_cert(&|c| check_validity(c, now), Criterion::ValidityDates),
        per_cert(&|c| check_critical_extensions(c, &config.recognized_critical_oids), Criterion::CriticalExtensions),
        check_hostname(leaf, hostname),
        check_basic_constraints(chain),
        check_name_constraints(chain),
    ];
    ValidationReport { results, self_signed: is_self_signed(leaf), evaluated_at: now, hostname: hostname.to_owned() }
}
