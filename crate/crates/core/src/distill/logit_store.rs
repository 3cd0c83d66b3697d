use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distill::LogitRecord;
use crate::error::{Error, Result};
use crate::model::checkpoint_cursor as Cursor;
use crate::scalar::Real;

pub const LOGIT_STORE_MAGIC: &[u8; 8] = b"LBMRCLOG";
pub const LOGIT_STORE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    teacher_id: String,
    #[serde(rename = "L")]
    max_len: usize,
    count: usize,
}

/// All logits produced by one teacher, keyed by sample id.
///
/// On disk: magic, `u64` header length, JSON header, the records
/// (`u32` id length, id bytes, `L` start then `L` end logits as `f64` LE),
/// an index of `(u32 id length, id, u64 offset)` entries, and finally the
/// `u64` offset of that index.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitStore<T> {
    teacher_id: String,
    max_len: usize,
    records: Vec<LogitRecord<T>>,
    index: HashMap<String, usize>,
}

impl<T: Real> LogitStore<T> {
    pub fn new(teacher_id: impl Into<String>, max_len: usize) -> Self {
        LogitStore { teacher_id: teacher_id.into(), max_len, records: Vec::new(), index: HashMap::new() }
    }

    pub fn teacher_id(&self) -> &str {
        &self.teacher_id
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LogitRecord<T>] {
        &self.records
    }

    pub fn insert(&mut self, sample_id: String, start_logits: Vec<T>, end_logits: Vec<T>) -> Result<()> {
        if start_logits.len() != self.max_len || end_logits.len() != self.max_len {
            return Err(Error::shape(format!("logits of length {} for a store of length {}", start_logits.len(), self.max_len)));
        }
        if start_logits.iter().chain(&end_logits).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite logits for {sample_id}")));
        }
        if self.index.contains_key(&sample_id) {
            return Err(Error::InvalidParameter(format!("duplicate sample id {sample_id}")));
        }
        self.index.insert(sample_id.clone(), self.records.len());
        self.records.push(LogitRecord { sample_id, teacher_id: self.teacher_id.clone(), start_logits, end_logits });
        Ok(())
    }

    pub fn get(&self, sample_id: &str) -> Option<&LogitRecord<T>> {
        self.index.get(sample_id).map(|&i| &self.records[i])
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            format_version: LOGIT_STORE_VERSION,
            teacher_id: self.teacher_id.clone(),
            max_len: self.max_len,
            count: self.records.len(),
        })?;
        let mut out = Vec::new();
        out.extend_from_slice(LOGIT_STORE_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let mut offsets = Vec::with_capacity(self.records.len());
        for r in &self.records {
            offsets.push(out.len() as u64);
            write_id(&mut out, &r.sample_id);
            for v in r.start_logits.iter().chain(&r.end_logits) {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        let index_offset = out.len() as u64;
        for (r, off) in self.records.iter().zip(offsets) {
            write_id(&mut out, &r.sample_id);
            out.extend_from_slice(&off.to_le_bytes());
        }
        out.extend_from_slice(&index_offset.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let header = read_header(&mut cur)?;
        let mut store = LogitStore::new(header.teacher_id, header.max_len);
        for _ in 0..header.count {
            let id = read_id(&mut cur)?;
            let start = read_floats(&mut cur, header.max_len)?;
            let end = read_floats(&mut cur, header.max_len)?;
            store.insert(id, start, end)?;
        }
        let index_start = cur.pos;
        for r in &store.records {
            if read_id(&mut cur)? != r.sample_id {
                return Err(Error::Format("logit index out of order".into()));
            }
            cur.u64()?;
        }
        if cur.u64()? as usize != index_start || cur.pos != bytes.len() {
            return Err(Error::Format("logit store trailer mismatch".into()));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn write_id(out: &mut Vec<u8>, id: &str) {
    out.extend_from_slice(&(id.len() as u32).to_le_bytes());
    out.extend_from_slice(id.as_bytes());
}

fn read_id(cur: &mut Cursor<'_>) -> Result<String> {
    let len = cur.u32()? as usize;
    String::from_utf8(cur.take(len)?.to_vec()).map_err(|_| Error::Format("sample id is not UTF-8".into()))
}

fn read_floats<T: Real>(cur: &mut Cursor<'_>, n: usize) -> Result<Vec<T>> {
    (0..n).map(|_| Ok(T::lit(f64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes"))))).collect()
}

fn read_header(cur: &mut Cursor<'_>) -> Result<Header> {
    if cur.take(8)? != LOGIT_STORE_MAGIC {
        return Err(Error::Format("not a logit store".into()));
    }
    let len = cur.u64()? as usize;
    let header: Header = serde_json::from_slice(cur.take(len)?)?;
    if header.format_version != LOGIT_STORE_VERSION {
        return Err(Error::Format(format!("unsupported logit store version {}", header.format_version)));
    }
    Ok(header)
}

/// Random access to a logit store file through its trailing index.
pub struct LogitStoreReader {
    file: File,
    teacher_id: String,
    max_len: usize,
    offsets: HashMap<String, u64>,
}

impl LogitStoreReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path)?;
        let mut head = vec![0u8; 16];
        file.read_exact(&mut head)?;
        let header_len = u64::from_le_bytes(head[8..16].try_into().expect("8 bytes")) as usize;
        head.resize(16 + header_len, 0);
        file.read_exact(&mut head[16..])?;
        let header = read_header(&mut Cursor { bytes: &head, pos: 0 })?;
        let total = file.seek(SeekFrom::End(0))?;
        if total < 8 {
            return Err(Error::Format("truncated logit store".into()));
        }
        file.seek(SeekFrom::End(-8))?;
        let mut trailer = [0u8; 8];
        file.read_exact(&mut trailer)?;
        let index_offset = u64::from_le_bytes(trailer);
        if index_offset > total - 8 {
            return Err(Error::Format("logit index offset out of range".into()));
        }
        let mut index = vec![0u8; (total - 8 - index_offset) as usize];
        file.seek(SeekFrom::Start(index_offset))?;
        file.read_exact(&mut index)?;
        let mut cur = Cursor { bytes: &index, pos: 0 };
        let mut offsets = HashMap::with_capacity(header.count);
        for _ in 0..header.count {
            let id = read_id(&mut cur)?;
            offsets.insert(id, cur.u64()?);
        }
        Ok(LogitStoreReader { file, teacher_id: header.teacher_id, max_len: header.max_len, offsets })
    }

    pub fn teacher_id(&self) -> &str {
        &self.teacher_id
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn get<T: Real>(&mut self, sample_id: &str) -> Result<Option<LogitRecord<T>>> {
        let Some(&offset) = self.offsets.get(sample_id) else { return Ok(None) };
        let size = 4 + sample_id.len() + 16 * self.max_len;
        let mut buf = vec![0u8; size];
        self.file.seek(SeekFrom::Start(offset))?;
        self.file.read_exact(&mut buf)?;
        let mut cur = Cursor { bytes: &buf, pos: 0 };
        if read_id(&mut cur)? != sample_id {
            return Err(Error::Format("logit index points at the wrong record".into()));
        }
        Ok(Some(LogitRecord {
            sample_id: sample_id.to_string(),
            teacher_id: self.teacher_id.clone(),
            start_logits: read_floats(&mut cur, self.max_len)?,
            end_logits: read_floats(&mut cur, self.max_len)?,
        }))
    }
}
