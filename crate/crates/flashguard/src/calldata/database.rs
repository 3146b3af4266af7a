//! The signature database: selector classes keyed on flash-loan, transfer,
//! approval, and withdrawal functions, with per-provider flash-loan entries.
//!
//! The database is immutable once a run starts; concurrent readers share it
//! without synchronization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{compute_selector, CalldataError, Selector};

/// The four selector classes used for qualification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignatureClass {
    FlashLoan,
    Transfer,
    Approval,
    Withdrawal,
}

impl SignatureClass {
    pub const ALL: [SignatureClass; 4] = [
        SignatureClass::FlashLoan,
        SignatureClass::Transfer,
        SignatureClass::Approval,
        SignatureClass::Withdrawal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SignatureClass::FlashLoan => "flashLoan",
            SignatureClass::Transfer => "transfer",
            SignatureClass::Approval => "approval",
            SignatureClass::Withdrawal => "withdrawal",
        }
    }
}

impl fmt::Display for SignatureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignatureClass {
    type Err = CalldataError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flashLoan" => Ok(SignatureClass::FlashLoan),
            "transfer" => Ok(SignatureClass::Transfer),
            "approval" => Ok(SignatureClass::Approval),
            "withdrawal" => Ok(SignatureClass::Withdrawal),
            other => Err(CalldataError::UnknownClass(other.to_string())),
        }
    }
}

/// One database row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureEntry {
    pub class: SignatureClass,
    pub selector: Selector,
    pub signature: String,
    pub provider: Option<String>,
    /// 32-byte event-log signature, kept as opaque metadata. Detection keys
    /// on the 4-byte function selector because pending transactions expose
    /// calldata, not emitted events.
    pub event_signature: Option<String>,
}

/// Selector classes plus provider metadata. Class sets are pairwise disjoint.
#[derive(Debug, Clone, Default)]
pub struct SignatureDatabase {
    by_class: BTreeMap<SignatureClass, BTreeSet<Selector>>,
    entries: BTreeMap<Selector, SignatureEntry>,
}

impl SignatureDatabase {
    pub fn empty() -> SignatureDatabase {
        SignatureDatabase::default()
    }

    /// The shipped database: the canonical ERC20 selectors (derived from
    /// their signatures at construction) plus the two known provider-specific
    /// flash-loan selectors. Provider flash-loan entries keep their
    /// published selector values verbatim because their full canonical
    /// argument lists vary by provider.
    pub fn builtin() -> SignatureDatabase {
        let mut db = SignatureDatabase::empty();
        let derived = |sig: &str| compute_selector(sig).expect("builtin signature is canonical");

        db.register(SignatureEntry {
            class: SignatureClass::FlashLoan,
            selector: "1b8b5af1".parse().unwrap(),
            signature: "flashLoan(address,uint256,...)".to_string(),
            provider: Some("balancer".to_string()),
            event_signature: Some("0x0d7d7...95f0".to_string()),
        })
        .unwrap();
        db.register(SignatureEntry {
            class: SignatureClass::FlashLoan,
            selector: "c2b12a73".parse().unwrap(),
            signature: "flashLoan(address,uint256,...)".to_string(),
            provider: Some("dydx".to_string()),
            event_signature: Some("0xf4626...22ab".to_string()),
        })
        .unwrap();
        db.register(SignatureEntry {
            class: SignatureClass::Transfer,
            selector: derived("transfer(address,uint256)"),
            signature: "transfer(address,uint256)".to_string(),
            provider: None,
            event_signature: Some("0xddf25...b3ef".to_string()),
        })
        .unwrap();
        db.register(SignatureEntry {
            class: SignatureClass::Transfer,
            selector: derived("transferFrom(address,address,uint256)"),
            signature: "transferFrom(address,address,uint256)".to_string(),
            provider: None,
            event_signature: Some("0xddf25...b3ef".to_string()),
        })
        .unwrap();
        db.register(SignatureEntry {
            class: SignatureClass::Approval,
            selector: derived("approve(address,uint256)"),
            signature: "approve(address,uint256)".to_string(),
            provider: None,
            event_signature: Some("0x8c5be...b925".to_string()),
        })
        .unwrap();
        db.register(SignatureEntry {
            class: SignatureClass::Withdrawal,
            selector: derived("withdraw(uint256)"),
            signature: "withdraw(uint256)".to_string(),
            provider: None,
            event_signature: Some("0xe1fff...39db".to_string()),
        })
        .unwrap();
        db
    }

    /// Registers a new entry, e.g. an additional provider's flash-loan
    /// selector. Fails if the selector is already present (class sets must
    /// stay pairwise disjoint).
    pub fn register(&mut self, entry: SignatureEntry) -> Result<(), CalldataError> {
        if let Some(existing) = self.entries.get(&entry.selector) {
            return Err(CalldataError::DuplicateSelector {
                selector: entry.selector,
                existing_class: existing.class.as_str(),
            });
        }
        self.by_class
            .entry(entry.class)
            .or_default()
            .insert(entry.selector);
        self.entries.insert(entry.selector, entry);
        Ok(())
    }

    pub fn class_of(&self, selector: &Selector) -> Option<SignatureClass> {
        self.entries.get(selector).map(|e| e.class)
    }

    pub fn contains(&self, selector: &Selector) -> bool {
        self.entries.contains_key(selector)
    }

    pub fn class_set(&self, class: SignatureClass) -> impl Iterator<Item = &Selector> {
        self.by_class.get(&class).into_iter().flatten()
    }

    pub fn selectors(&self, class: SignatureClass) -> BTreeSet<Selector> {
        self.by_class.get(&class).cloned().unwrap_or_default()
    }

    pub fn provider_of(&self, selector: &Selector) -> Option<&str> {
        self.entries
            .get(selector)
            .and_then(|e| e.provider.as_deref())
    }

    pub fn entries(&self) -> impl Iterator<Item = &SignatureEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads the line-oriented file format:
    /// `class,selector_hex,canonical_signature,provider`
    /// with lowercase 8-hex-char selectors. Blank lines and `#` comments are
    /// skipped. When the signature is fully canonical (no elided arguments)
    /// the selector is re-derived and must match.
    pub fn load(path: &Path) -> Result<SignatureDatabase, CalldataError> {
        let file = std::fs::File::open(path).map_err(|e| CalldataError::Io(e.to_string()))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<SignatureDatabase, CalldataError> {
        let mut db = SignatureDatabase::empty();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| CalldataError::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            // Canonical signatures contain commas; rejoin the middle fields.
            if fields.len() < 4 {
                return Err(CalldataError::MalformedDatabaseLine {
                    line: lineno + 1,
                    reason: "expected class,selector,signature,provider".to_string(),
                });
            }
            let class: SignatureClass = fields[0].parse()?;
            let selector_hex = fields[1];
            if selector_hex.len() != 8 || selector_hex.chars().any(|c| c.is_ascii_uppercase()) {
                return Err(CalldataError::MalformedDatabaseLine {
                    line: lineno + 1,
                    reason: format!("selector must be 8 lowercase hex chars, got {selector_hex:?}"),
                });
            }
            let selector: Selector = selector_hex.parse()?;
            let signature = fields[2..fields.len() - 1].join(",");
            let provider = fields[fields.len() - 1];
            if !signature.contains("...") {
                let derived = compute_selector(&signature)?;
                if derived != selector {
                    return Err(CalldataError::MalformedDatabaseLine {
                        line: lineno + 1,
                        reason: format!(
                            "selector {selector} does not match signature {signature:?} ({derived})"
                        ),
                    });
                }
            }
            db.register(SignatureEntry {
                class,
                selector,
                signature,
                provider: if provider.is_empty() {
                    None
                } else {
                    Some(provider.to_string())
                },
                event_signature: None,
            })?;
        }
        Ok(db)
    }

    pub fn save(&self, path: &Path) -> Result<(), CalldataError> {
        let mut file = std::fs::File::create(path).map_err(|e| CalldataError::Io(e.to_string()))?;
        for entry in self.entries.values() {
            writeln!(
                file,
                "{},{},{},{}",
                entry.class,
                entry.selector.to_hex(),
                entry.signature,
                entry.provider.as_deref().unwrap_or("")
            )
            .map_err(|e| CalldataError::Io(e.to_string()))?;
        }
        Ok(())
    }
}
