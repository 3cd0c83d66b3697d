use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::corpus::{AlignedRecord, Sample};
use crate::error::{Error, Result};

/// Serializes one JSON object per line.
pub fn to_jsonl_bytes<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let bytes = to_jsonl_bytes(items)?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

/// Reads and validates a corpus file.
pub fn read_records(path: &Path) -> Result<Vec<AlignedRecord>> {
    let records: Vec<AlignedRecord> = read_jsonl(path)?;
    records.iter().try_for_each(AlignedRecord::validate)?;
    Ok(records)
}

/// Reads and validates a sample file.
pub fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    let samples: Vec<Sample> = read_jsonl(path)?;
    samples.iter().try_for_each(|s| s.validate(None))?;
    Ok(samples)
}
