//! Contamination blocklist.
//!
//! Benchmark-hosting sites must never be served to the agent: any browse of
//! a blocked host answers with a 404-equivalent error, and search results
//! pointing there are dropped. Membership is a suffix match on the
//! registrable domain, so subdomains are covered.

use std::collections::BTreeSet;

/// Hosts the agent must never receive content from.
#[derive(Debug, Clone)]
pub struct Blocklist {
    domains: BTreeSet<String>,
}

impl Blocklist {
    /// The default list: the two benchmark-hosting domains blocked during
    /// evaluation-adjacent browsing.
    pub fn default_hosts() -> Self {
        Blocklist::new(["huggingface.co", "gr.inc"])
    }

    pub fn new<I, S>(domains: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Blocklist {
            domains: domains
                .into_iter()
                .map(|d| d.as_ref().trim().trim_start_matches("www.").to_lowercase())
                .filter(|d| !d.is_empty())
                .collect(),
        }
    }

    pub fn empty() -> Self {
        Blocklist {
            domains: BTreeSet::new(),
        }
    }

    pub fn add(&mut self, domain: &str) {
        self.domains.insert(domain.trim().to_lowercase());
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().map(String::as_str)
    }

    /// True when the URL's host is a blocked domain or any subdomain of one.
    /// Unparseable URLs are not blocked here; they fail URL validation
    /// upstream.
    pub fn is_blocked(&self, url: &str) -> bool {
        let Ok(parsed) = url::Url::parse(url) else {
            return false;
        };
        let Some(host) = parsed.host_str() else {
            return false;
        };
        let host = host.to_lowercase();
        self.domains
            .iter()
            .any(|d| host == *d || host.ends_with(&format!(".{d}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn suffix_match_on_registrable_domain() {
        let b = Blocklist::default_hosts();
        assert!(b.is_blocked("https://huggingface.co/datasets/x"));
        assert!(b.is_blocked("https://www.huggingface.co/"));
        assert!(b.is_blocked("http://cdn.assets.gr.inc/page"));
        assert!(!b.is_blocked("https://nothuggingface.co/"));
        assert!(!b.is_blocked("https://gr.inc.example.org/"));
        assert!(!b.is_blocked("https://example.org/huggingface.co"));
    }

    proptest! {
        // Blocklist totality: any URL whose registrable domain is blocked is
        // caught, whatever the subdomain chain or path.
        #[test]
        fn generated_subdomains_all_blocked(
            subs in proptest::collection::vec("[a-z][a-z0-9]{0,8}", 0..4),
            path in "[a-zA-Z0-9/_.-]{0,32}",
            apex in prop_oneof![Just("huggingface.co"), Just("gr.inc")],
        ) {
            let host = if subs.is_empty() {
                apex.to_string()
            } else {
                format!("{}.{}", subs.join("."), apex)
            };
            let url = format!("https://{host}/{path}");
            prop_assert!(Blocklist::default_hosts().is_blocked(&url));
        }
    }
}
