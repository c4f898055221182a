use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmergencyDirectoryEntry {
    pub region_code: String,
    pub facility_name: String,
    pub phone: String,
    pub address: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DirectoryError {
    #[error("reading emergency directory: {0}")]
    Csv(#[from] csv::Error),
    #[error("emergency directory row {row}: {reason}")]
    Invalid { row: usize, reason: String },
}

/// Static region-code → emergency department table.
#[derive(Debug, Clone, Default)]
pub struct EmergencyDirectory {
    entries: BTreeMap<String, EmergencyDirectoryEntry>,
}

impl EmergencyDirectory {
    pub fn from_reader(reader: impl std::io::Read) -> Result<Self, DirectoryError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut entries = BTreeMap::new();
        for (i, row) in rdr.deserialize::<EmergencyDirectoryEntry>().enumerate() {
            let entry = row?;
            // header is line 1
            let row = i + 2;
            if entry.region_code.is_empty() {
                return Err(DirectoryError::Invalid {
                    row,
                    reason: "empty region_code".into(),
                });
            }
            if entry.phone.is_empty() {
                return Err(DirectoryError::Invalid {
                    row,
                    reason: "empty phone".into(),
                });
            }
            entries.insert(entry.region_code.clone(), entry);
        }
        Ok(Self { entries })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DirectoryError> {
        let file = std::fs::File::open(path.as_ref()).map_err(csv::Error::from)?;
        Self::from_reader(file)
    }

    /// The sample directory shipped with the crate. Facilities are fictitious.
    pub fn shipped() -> Self {
        Self::from_reader(crate::fixtures::EMERGENCY_DIRECTORY.as_bytes())
            .expect("shipped directory is valid")
    }

    pub fn lookup(&self, region_code: &str) -> Option<&EmergencyDirectoryEntry> {
        self.entries.get(region_code.trim())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
