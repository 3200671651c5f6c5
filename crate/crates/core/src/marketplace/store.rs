use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contract::{AgreementDocument, Bindings, GuaranteeOutcome, Tick};

/// Consumer-facing result of a pipeline run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainAgreement {
    pub document: AgreementDocument,
    pub service_agreement: AgreementDocument,
    pub guarantee_outcomes: Vec<GuaranteeOutcome>,
}

impl DomainAgreement {
    pub fn agreement_id(&self) -> &str {
        &self.document.context.agreement_id
    }

    pub fn to_canonical_json(&self) -> String {
        let canonical = DomainAgreement {
            document: self.document.clone().canonical(),
            service_agreement: self.service_agreement.clone().canonical(),
            guarantee_outcomes: self.guarantee_outcomes.clone(),
        };
        serde_json::to_string(&canonical).expect("agreement serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub agreement_id: String,
    pub provider_id: String,
    pub tick: Tick,
    pub results: Bindings,
}

/// Append-only agreement store, optionally mirrored to a directory as
/// `<root>/<domain>/<agreement_id>.json` plus `<root>/index.jsonl`.
#[derive(Debug, Default)]
pub struct AgreementStore {
    root: Option<PathBuf>,
    entries: Vec<(IndexEntry, DomainAgreement)>,
}

impl AgreementStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn at(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(AgreementStore {
            root: Some(root),
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn put(&mut self, agreement: DomainAgreement, tick: Tick, results: Bindings) -> io::Result<()> {
        let entry = IndexEntry {
            agreement_id: agreement.agreement_id().to_string(),
            provider_id: agreement.document.context.provider_id.clone(),
            tick,
            results,
        };
        if let Some(root) = &self.root {
            let dir = root.join(&agreement.document.context.domain_id);
            fs::create_dir_all(&dir)?;
            fs::write(
                dir.join(format!("{}.json", entry.agreement_id)),
                agreement.to_canonical_json(),
            )?;
            let mut index = OpenOptions::new()
                .create(true)
                .append(true)
                .open(root.join("index.jsonl"))?;
            writeln!(
                index,
                "{}",
                serde_json::to_string(&entry).expect("index serialization cannot fail")
            )?;
        }
        self.entries.push((entry, agreement));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &IndexEntry> {
        self.entries.iter().map(|(e, _)| e)
    }

    pub fn agreements(&self) -> impl Iterator<Item = &DomainAgreement> {
        self.entries.iter().map(|(_, a)| a)
    }
}
