//! Document and blob persistence.
//!
//! Documents live in named collections keyed by string; keys sort lexicographically so
//! prefix scans double as simple secondary indexes (`<user_id>/...`, `<date>/...`).
//! Blobs are content-addressed by the SHA-256 of their bytes.
//!
//! The file backend keeps a full in-memory copy and writes through to disk, one JSON
//! file per document, replacing files atomically via rename.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{MealRecord, User, UserId};
use crate::error::StoreError;

pub mod collections {
    pub const USERS: &str = "users";
    pub const USERS_BY_EMAIL: &str = "users_by_email";
    pub const SESSIONS: &str = "sessions";
    pub const RECORDS: &str = "records";
    pub const OBSERVATIONS: &str = "observations";
    pub const DAILY: &str = "daily_aggregates";
    pub const MONTHLY: &str = "monthly_aggregates";
    pub const BADGES: &str = "badge_states";
    pub const MEDIA_ACL: &str = "media_acl";
}

/// Monotonic write counter returned by every successful write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Version(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    pub key: String,
    pub content_type: String,
    pub size_bytes: u64,
}

/// A stored document: key and raw JSON bytes.
pub type Entry = (String, Arc<[u8]>);
pub type Blob = (BlobRef, Arc<[u8]>);

pub trait Backend: Send + Sync {
    fn put(&self, collection: &str, key: &str, value: Vec<u8>) -> Result<Version, StoreError>;
    /// Fails with `AlreadyExists` if the key is present.
    fn insert_new(&self, collection: &str, key: &str, value: Vec<u8>) -> Result<Version, StoreError>;
    fn get(&self, collection: &str, key: &str) -> Result<Option<Arc<[u8]>>, StoreError>;
    fn delete(&self, collection: &str, key: &str) -> Result<bool, StoreError>;
    fn scan_prefix(&self, collection: &str, prefix: &str) -> Result<Vec<Entry>, StoreError>;
    fn put_blob(&self, meta: &BlobRef, bytes: &[u8]) -> Result<(), StoreError>;
    fn get_blob(&self, key: &str) -> Result<Option<Blob>, StoreError>;
}

type Collections = HashMap<String, BTreeMap<String, Arc<[u8]>>>;

#[derive(Default)]
struct MemState {
    docs: Collections,
    blobs: HashMap<String, (BlobRef, Arc<[u8]>)>,
}

#[derive(Default)]
pub struct MemoryBackend {
    state: RwLock<MemState>,
    version: AtomicU64,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }

    fn next_version(&self) -> Version {
        Version(self.version.fetch_add(1, Ordering::SeqCst) + 1)
    }

    fn read(&self) -> Result<std::sync::RwLockReadGuard<'_, MemState>, StoreError> {
        self.state.read().map_err(|_| StoreError::Unavailable("store lock poisoned".into()))
    }

    fn write(&self) -> Result<std::sync::RwLockWriteGuard<'_, MemState>, StoreError> {
        self.state.write().map_err(|_| StoreError::Unavailable("store lock poisoned".into()))
    }

    /// Applies a write under the state lock, running `persist` first so memory only
    /// changes once the durable copy has.
    fn write_with(
        &self,
        collection: &str,
        key: &str,
        value: Vec<u8>,
        create_only: bool,
        persist: impl FnOnce(&[u8]) -> Result<(), StoreError>,
    ) -> Result<Version, StoreError> {
        let mut state = self.write()?;
        let coll = state.docs.entry(collection.to_string()).or_default();
        if create_only && coll.contains_key(key) {
            return Err(StoreError::AlreadyExists(format!("{collection}/{key}")));
        }
        persist(&value)?;
        coll.insert(key.to_string(), value.into());
        Ok(self.next_version())
    }
}

impl Backend for MemoryBackend {
    fn put(&self, collection: &str, key: &str, value: Vec<u8>) -> Result<Version, StoreError> {
        self.write_with(collection, key, value, false, |_| Ok(()))
    }

    fn insert_new(&self, collection: &str, key: &str, value: Vec<u8>) -> Result<Version, StoreError> {
        self.write_with(collection, key, value, true, |_| Ok(()))
    }

    fn get(&self, collection: &str, key: &str) -> Result<Option<Arc<[u8]>>, StoreError> {
        Ok(self.read()?.docs.get(collection).and_then(|c| c.get(key)).cloned())
    }

    fn delete(&self, collection: &str, key: &str) -> Result<bool, StoreError> {
        Ok(self.write()?.docs.get_mut(collection).is_some_and(|c| c.remove(key).is_some()))
    }

    fn scan_prefix(&self, collection: &str, prefix: &str) -> Result<Vec<Entry>, StoreError> {
        let state = self.read()?;
        let Some(coll) = state.docs.get(collection) else {
            return Ok(Vec::new());
        };
        Ok(coll
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect())
    }

    fn put_blob(&self, meta: &BlobRef, bytes: &[u8]) -> Result<(), StoreError> {
        self.write()?.blobs.entry(meta.key.clone()).or_insert_with(|| (meta.clone(), bytes.into()));
        Ok(())
    }

    fn get_blob(&self, key: &str) -> Result<Option<Blob>, StoreError> {
        Ok(self.read()?.blobs.get(key).cloned())
    }
}

/// On-disk layout under `root`:
///
/// ```text
/// docs/<collection>/<hex(key)>.json
/// blobs/<first two hex chars>/<sha256>          raw bytes
/// blobs/<first two hex chars>/<sha256>.meta.json
/// ```
pub struct FileBackend {
    root: PathBuf,
    mem: MemoryBackend,
}

impl FileBackend {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("docs"))?;
        fs::create_dir_all(root.join("blobs"))?;
        let mem = MemoryBackend::new();
        {
            let mut state = mem.write()?;
            for entry in fs::read_dir(root.join("docs"))? {
                let entry = entry?;
                if !entry.file_type()?.is_dir() {
                    continue;
                }
                let collection = entry.file_name().to_string_lossy().into_owned();
                let coll = state.docs.entry(collection).or_default();
                for doc in fs::read_dir(entry.path())? {
                    let path = doc?.path();
                    let Some(stem) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".json")) else {
                        continue;
                    };
                    let Some(key) = hex::decode(stem).ok().and_then(|b| String::from_utf8(b).ok()) else {
                        tracing::warn!(path = %path.display(), "skipping document with undecodable name");
                        continue;
                    };
                    coll.insert(key, fs::read(&path)?.into());
                }
            }
        }
        Ok(Self { root, mem })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn doc_path(&self, collection: &str, key: &str) -> PathBuf {
        self.root.join("docs").join(collection).join(format!("{}.json", hex::encode(key)))
    }

    fn blob_path(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("__");
        self.root.join("blobs").join(shard).join(key)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths always have a parent");
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl Backend for FileBackend {
    fn put(&self, collection: &str, key: &str, value: Vec<u8>) -> Result<Version, StoreError> {
        let path = self.doc_path(collection, key);
        self.mem.write_with(collection, key, value, false, |bytes| write_atomic(&path, bytes))
    }

    fn insert_new(&self, collection: &str, key: &str, value: Vec<u8>) -> Result<Version, StoreError> {
        let path = self.doc_path(collection, key);
        self.mem.write_with(collection, key, value, true, |bytes| write_atomic(&path, bytes))
    }

    fn get(&self, collection: &str, key: &str) -> Result<Option<Arc<[u8]>>, StoreError> {
        self.mem.get(collection, key)
    }

    fn delete(&self, collection: &str, key: &str) -> Result<bool, StoreError> {
        let mut state = self.mem.write()?;
        let removed = state.docs.get_mut(collection).is_some_and(|c| c.remove(key).is_some());
        if removed {
            match fs::remove_file(self.doc_path(collection, key)) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(removed)
    }

    fn scan_prefix(&self, collection: &str, prefix: &str) -> Result<Vec<Entry>, StoreError> {
        self.mem.scan_prefix(collection, prefix)
    }

    fn put_blob(&self, meta: &BlobRef, bytes: &[u8]) -> Result<(), StoreError> {
        let path = self.blob_path(&meta.key);
        if !path.exists() {
            write_atomic(&path, bytes)?;
            let meta_json = serde_json::to_vec(meta).expect("BlobRef serializes");
            write_atomic(&path.with_extension("meta.json"), &meta_json)?;
        }
        Ok(())
    }

    fn get_blob(&self, key: &str) -> Result<Option<Blob>, StoreError> {
        if !is_blob_key(key) {
            return Ok(None);
        }
        let path = self.blob_path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let meta_path = path.with_extension("meta.json");
        let meta_bytes = fs::read(&meta_path)?;
        let meta = serde_json::from_slice(&meta_bytes)
            .map_err(|source| StoreError::Corrupt { key: key.to_string(), source })?;
        Ok(Some((meta, bytes.into())))
    }
}

fn is_blob_key(key: &str) -> bool {
    key.len() == 64 && key.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

pub const DEFAULT_MAX_BLOB_BYTES: usize = 5 * 1024 * 1024;

/// Typed facade over a [`Backend`]. Cheap to clone.
#[derive(Clone)]
pub struct Store {
    backend: Arc<dyn Backend>,
    max_blob_bytes: usize,
}

impl Store {
    pub fn new(backend: Arc<dyn Backend>, max_blob_bytes: usize) -> Self {
        Self { backend, max_blob_bytes }
    }

    pub fn in_memory() -> Self {
        Self::new(Arc::new(MemoryBackend::new()), DEFAULT_MAX_BLOB_BYTES)
    }

    pub fn open_dir(root: impl AsRef<Path>, max_blob_bytes: usize) -> Result<Self, StoreError> {
        Ok(Self::new(Arc::new(FileBackend::open(root)?), max_blob_bytes))
    }

    pub fn max_blob_bytes(&self) -> usize {
        self.max_blob_bytes
    }

    pub fn put_document<T: Serialize>(&self, collection: &str, key: &str, value: &T) -> Result<Version, StoreError> {
        self.backend.put(collection, key, encode(value))
    }

    pub fn insert_document<T: Serialize>(&self, collection: &str, key: &str, value: &T) -> Result<Version, StoreError> {
        self.backend.insert_new(collection, key, encode(value))
    }

    pub fn get_document<T: DeserializeOwned>(&self, collection: &str, key: &str) -> Result<T, StoreError> {
        self.find_document(collection, key)?
            .ok_or_else(|| StoreError::NotFound(format!("{collection}/{key}")))
    }

    pub fn find_document<T: DeserializeOwned>(&self, collection: &str, key: &str) -> Result<Option<T>, StoreError> {
        self.backend.get(collection, key)?.map(|b| decode(key, &b)).transpose()
    }

    pub fn delete_document(&self, collection: &str, key: &str) -> Result<bool, StoreError> {
        self.backend.delete(collection, key)
    }

    pub fn scan<T: DeserializeOwned>(&self, collection: &str, prefix: &str) -> Result<Vec<(String, T)>, StoreError> {
        self.backend
            .scan_prefix(collection, prefix)?
            .into_iter()
            .map(|(k, v)| decode(&k, &v).map(|t| (k, t)))
            .collect()
    }

    pub fn put_blob(&self, bytes: &[u8], content_type: &str) -> Result<BlobRef, StoreError> {
        if bytes.len() > self.max_blob_bytes {
            return Err(StoreError::BlobTooLarge { size: bytes.len(), limit: self.max_blob_bytes });
        }
        let meta = BlobRef {
            key: hex::encode(Sha256::digest(bytes)),
            content_type: content_type.to_string(),
            size_bytes: bytes.len() as u64,
        };
        self.backend.put_blob(&meta, bytes)?;
        Ok(meta)
    }

    pub fn get_blob(&self, key: &str) -> Result<(BlobRef, Arc<[u8]>), StoreError> {
        self.backend.get_blob(key)?.ok_or_else(|| StoreError::NotFound(format!("blob {key}")))
    }

    // Domain helpers.

    pub fn record_key(record: &MealRecord) -> String {
        format!("{}/{}", record.user_id, record.record_id)
    }

    pub fn put_record(&self, record: &MealRecord) -> Result<Version, StoreError> {
        self.insert_document(collections::RECORDS, &Self::record_key(record), record)
    }

    /// All records of one user, in unspecified order.
    pub fn user_records(&self, user: UserId) -> Result<Vec<MealRecord>, StoreError> {
        Ok(self.scan(collections::RECORDS, &format!("{user}/"))?.into_iter().map(|(_, r)| r).collect())
    }

    pub fn all_records(&self) -> Result<Vec<MealRecord>, StoreError> {
        Ok(self.scan(collections::RECORDS, "")?.into_iter().map(|(_, r)| r).collect())
    }

    /// The user's records with `local_date` in `[from, to]`, newest first.
    pub fn query_records(&self, user: UserId, from: NaiveDate, to: NaiveDate) -> Result<Vec<MealRecord>, StoreError> {
        if from > to {
            return Err(StoreError::InvalidRange { from, to });
        }
        let mut out: Vec<MealRecord> = self
            .user_records(user)?
            .into_iter()
            .filter(|r| (from..=to).contains(&r.local_date))
            .collect();
        out.sort_by(|a, b| b.submitted_at.cmp(&a.submitted_at).then(b.record_id.cmp(&a.record_id)));
        Ok(out)
    }

    pub fn get_user(&self, user: UserId) -> Result<User, StoreError> {
        self.get_document(collections::USERS, &user.to_string())
    }

    pub fn user_count(&self) -> Result<usize, StoreError> {
        Ok(self.backend.scan_prefix(collections::USERS, "")?.len())
    }
}

fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("domain documents always serialize")
}

fn decode<T: DeserializeOwned>(key: &str, bytes: &[u8]) -> Result<T, StoreError> {
    serde_json::from_slice(bytes).map_err(|source| StoreError::Corrupt { key: key.to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CompletionScores, RecordId};
    use chrono::{DateTime, Utc};

    const HK: chrono_tz::Tz = chrono_tz::Asia::Hong_Kong;

    fn record(user: UserId, at: &str) -> MealRecord {
        let at: DateTime<Utc> = at.parse().unwrap();
        MealRecord::new(RecordId::random(), user, at, HK, CompletionScores::new(80, 90, 100).unwrap(), "k")
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Doc {
        n: u32,
    }

    #[test]
    fn put_get_overwrite_and_missing() {
        let s = Store::in_memory();
        let v1 = s.put_document("c", "k", &Doc { n: 1 }).unwrap();
        assert_eq!(s.get_document::<Doc>("c", "k").unwrap(), Doc { n: 1 });
        let v2 = s.put_document("c", "k", &Doc { n: 2 }).unwrap();
        assert!(v2 > v1);
        assert_eq!(s.get_document::<Doc>("c", "k").unwrap(), Doc { n: 2 });
        assert!(matches!(s.get_document::<Doc>("c", "nope"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn insert_new_refuses_duplicates() {
        let s = Store::in_memory();
        s.insert_document("c", "k", &Doc { n: 1 }).unwrap();
        assert!(matches!(s.insert_document("c", "k", &Doc { n: 2 }), Err(StoreError::AlreadyExists(_))));
        assert_eq!(s.get_document::<Doc>("c", "k").unwrap(), Doc { n: 1 });
    }

    #[test]
    fn prefix_scan_is_bounded() {
        let s = Store::in_memory();
        for k in ["a/1", "a/2", "ab/1", "b/1"] {
            s.put_document("c", k, &Doc { n: 0 }).unwrap();
        }
        let keys: Vec<String> = s.scan::<Doc>("c", "a/").unwrap().into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys, ["a/1", "a/2"]);
    }

    #[test]
    fn query_records_filters_and_orders() {
        let s = Store::in_memory();
        let user = UserId::random();
        let other = UserId::random();
        assert!(s.query_records(user, d(2023, 3, 1), d(2023, 4, 30)).unwrap().is_empty());
        let r1 = record(user, "2023-03-20T04:00:00Z");
        let r2 = record(user, "2023-03-21T04:00:00Z");
        let r3 = record(user, "2023-03-25T04:00:00Z");
        for r in [&r1, &r2, &r3, &record(other, "2023-03-21T05:00:00Z")] {
            s.put_record(r).unwrap();
        }
        let got = s.query_records(user, d(2023, 3, 20), d(2023, 3, 22)).unwrap();
        assert_eq!(got, vec![r2, r1]);
        assert!(matches!(
            s.query_records(user, d(2023, 3, 22), d(2023, 3, 20)),
            Err(StoreError::InvalidRange { .. })
        ));
    }

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn blob_round_trip_and_limits() {
        let s = Store::new(Arc::new(MemoryBackend::new()), 1024);
        let bytes: Vec<u8> = (0..1024u32).map(|i| (i * 7) as u8).collect();
        let r = s.put_blob(&bytes, "image/jpeg").unwrap();
        assert_eq!(r.size_bytes, 1024);
        let (meta, back) = s.get_blob(&r.key).unwrap();
        assert_eq!(&*back, &bytes[..]);
        assert_eq!(meta.content_type, "image/jpeg");
        assert!(matches!(s.put_blob(&[0u8; 1025], "image/jpeg"), Err(StoreError::BlobTooLarge { limit: 1024, .. })));
        assert!(matches!(s.get_blob("0".repeat(64).as_str()), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn file_backend_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let user = UserId::random();
        let rec = record(user, "2023-03-20T04:00:00Z");
        let blob_key;
        {
            let s = Store::open_dir(dir.path(), DEFAULT_MAX_BLOB_BYTES).unwrap();
            s.put_document("c", "weird/key:1", &Doc { n: 9 }).unwrap();
            s.put_record(&rec).unwrap();
            blob_key = s.put_blob(b"\xff\xd8jpeg", "image/jpeg").unwrap().key;
            s.put_document("c", "gone", &Doc { n: 1 }).unwrap();
            assert!(s.delete_document("c", "gone").unwrap());
        }
        let s = Store::open_dir(dir.path(), DEFAULT_MAX_BLOB_BYTES).unwrap();
        assert_eq!(s.get_document::<Doc>("c", "weird/key:1").unwrap(), Doc { n: 9 });
        assert_eq!(s.user_records(user).unwrap(), vec![rec]);
        assert_eq!(&*s.get_blob(&blob_key).unwrap().1, b"\xff\xd8jpeg");
        assert!(s.find_document::<Doc>("c", "gone").unwrap().is_none());
        assert!(matches!(s.get_blob("../../etc/passwd"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn concurrent_inserts_admit_one_winner() {
        let s = Store::in_memory();
        let wins: usize = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..16)
                .map(|i| {
                    let s = s.clone();
                    scope.spawn(move || s.insert_document("c", "same", &Doc { n: i }).is_ok() as usize)
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).sum()
        });
        assert_eq!(wins, 1);
    }
}
