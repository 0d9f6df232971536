use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::IngestError;
use crate::model::Proposal;

/// Reads a line-delimited JSON file of proposals, preserving order.
/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn load_proposals_file(path: &Path) -> Result<Vec<Proposal>, IngestError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::FileNotFound(path.to_path_buf()),
        _ => IngestError::Io(e),
    })?;
    let mut seen = HashSet::new();
    let mut proposals = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let number = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let proposal: Proposal =
            serde_json::from_str(&line).map_err(|e| IngestError::ParseError {
                line: number,
                message: e.to_string(),
            })?;
        proposal.validate().map_err(|e| IngestError::ParseError {
            line: number,
            message: e.to_string(),
        })?;
        if !seen.insert(proposal.id.clone()) {
            return Err(IngestError::DuplicateId(proposal.id));
        }
        proposals.push(proposal);
    }
    Ok(proposals)
}

pub fn write_proposals_file(path: &Path, proposals: &[Proposal]) -> Result<(), IngestError> {
    let mut out = BufWriter::new(File::create(path)?);
    for p in proposals {
        serde_json::to_writer(&mut out, p).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
