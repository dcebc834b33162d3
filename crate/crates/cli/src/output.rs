//! Output files with an embedded provenance header.
//!
//! Every file starts with (or, for JSON, wraps its body in) a header naming
//! the config hash, dataset manifest hash, code version and the sha256 of
//! the body, so `verify` can re-check a run directory file by file.
//!
//! * `.jsonl`: first line `{"mulprobe_header": {...}}`
//! * `.csv`: first line `# mulprobe_header {...}`
//! * `.md`: first line `<!-- mulprobe_header {...} -->`
//! * `.json`: `{"mulprobe_header": {...}, "body": ...}`; the body hash is
//!   over its canonical (sorted-key) serialization.
//!
//! Other files (exported media) are listed with their hashes in a headered
//! JSON index instead.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mulprobe_core::hash::sha256_hex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const HEADER_KEY: &str = "mulprobe_header";
pub const NO_MANIFEST: &str = "none";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHeader {
    pub kind: String,
    pub config_hash: String,
    pub manifest_hash: String,
    pub version: String,
    pub body_sha256: String,
}

/// Provenance shared by every file a stage writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: String,
    pub manifest_hash: String,
}

impl Stamp {
    fn header(&self, kind: &str, body_sha256: String) -> FileHeader {
        FileHeader {
            kind: kind.to_string(),
            config_hash: self.config_hash.clone(),
            manifest_hash: self.manifest_hash.clone(),
            version: mulprobe_core::VERSION.to_string(),
            body_sha256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
    Markdown,
    Json,
}

impl Format {
    pub fn of(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "jsonl" => Some(Self::Jsonl),
            "csv" => Some(Self::Csv),
            "md" => Some(Self::Markdown),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

/// Write via a temporary sibling and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().ok_or_else(|| CliError::io(path, "not a file path"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
        f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn header_line(h: &FileHeader) -> String {
    serde_json::to_string(h).expect("header serializes")
}

/// Body bytes with the header line prepended for line-oriented formats.
pub fn framed(format: Format, kind: &str, stamp: &Stamp, body: &[u8]) -> Vec<u8> {
    let h = stamp.header(kind, sha256_hex(body));
    let first = match format {
        Format::Jsonl => format!("{{\"{HEADER_KEY}\":{}}}\n", header_line(&h)),
        Format::Csv => format!("# {HEADER_KEY} {}\n", header_line(&h)),
        Format::Markdown => format!("<!-- {HEADER_KEY} {} -->\n", header_line(&h)),
        Format::Json => unreachable!("json bodies are wrapped, not framed"),
    };
    let mut out = first.into_bytes();
    out.extend_from_slice(body);
    out
}

pub struct Writer {
    pub root: PathBuf,
    pub stamp: Stamp,
}

impl Writer {
    pub fn new(root: impl Into<PathBuf>, stamp: Stamp) -> Self {
        Self { root: root.into(), stamp }
    }

    fn target(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn text(&self, rel: &str, kind: &str, body: &str) -> CliResult<PathBuf> {
        let path = self.target(rel);
        let format = Format::of(&path)
            .filter(|f| *f != Format::Json)
            .ok_or_else(|| CliError::validation(format!("{rel}: expected a .jsonl, .csv or .md file name")))?;
        write_atomic(&path, &framed(format, kind, &self.stamp, body.as_bytes()))?;
        Ok(path)
    }

    pub fn jsonl<T: Serialize>(&self, rel: &str, kind: &str, items: &[T]) -> CliResult<PathBuf> {
        self.text(rel, kind, &jsonl_body(items)?)
    }

    pub fn json<T: Serialize>(&self, rel: &str, kind: &str, body: &T) -> CliResult<PathBuf> {
        let path = self.target(rel);
        write_atomic(&path, &json_bytes(kind, &self.stamp, body)?)?;
        Ok(path)
    }

    /// Raw file plus nothing else; callers list it in a headered index.
    pub fn raw(&self, rel: &str, bytes: &[u8]) -> CliResult<String> {
        write_atomic(&self.target(rel), bytes)?;
        Ok(sha256_hex(bytes))
    }
}

pub fn jsonl_body<T: Serialize>(items: &[T]) -> CliResult<String> {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).map_err(|e| CliError::validation(e.to_string()))?);
        s.push('\n');
    }
    Ok(s)
}

pub fn json_bytes<T: Serialize>(kind: &str, stamp: &Stamp, body: &T) -> CliResult<Vec<u8>> {
    let v = serde_json::to_value(body).map_err(|e| CliError::validation(e.to_string()))?;
    let h = stamp.header(kind, sha256_hex(v.to_string()));
    let mut map = serde_json::Map::new();
    map.insert(HEADER_KEY.into(), serde_json::to_value(h).expect("header"));
    map.insert("body".into(), v);
    let mut out = serde_json::to_vec_pretty(&Value::Object(map)).expect("value serializes");
    out.push(b'\n');
    Ok(out)
}

/// A file split into its header and body.
#[derive(Debug)]
pub struct Parsed {
    pub header: FileHeader,
    /// Raw body bytes for line formats, canonical JSON for `.json`.
    pub body: Vec<u8>,
    pub json_body: Option<Value>,
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("{}: {msg}", path.display()))
}

pub fn parse_file(path: &Path) -> CliResult<Parsed> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let format = Format::of(path).ok_or_else(|| bad(path, "unknown output format"))?;
    if format == Format::Json {
        let mut v: Value = serde_json::from_slice(&bytes).map_err(|e| bad(path, e))?;
        let obj = v.as_object_mut().ok_or_else(|| bad(path, "not a JSON object"))?;
        let h = obj.remove(HEADER_KEY).ok_or_else(|| bad(path, "missing header"))?;
        let header: FileHeader = serde_json::from_value(h).map_err(|e| bad(path, e))?;
        let body = obj.remove("body").ok_or_else(|| bad(path, "missing body"))?;
        return Ok(Parsed { header, body: body.to_string().into_bytes(), json_body: Some(body) });
    }
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad(path, "missing header line"))?;
    let first = std::str::from_utf8(&bytes[..nl]).map_err(|e| bad(path, e))?;
    let json = match format {
        Format::Jsonl => {
            let v: Value = serde_json::from_str(first).map_err(|e| bad(path, e))?;
            v.get(HEADER_KEY).cloned().ok_or_else(|| bad(path, "missing header"))?.to_string()
        }
        Format::Csv => {
            first.strip_prefix(&format!("# {HEADER_KEY} ")).ok_or_else(|| bad(path, "missing header"))?.to_string()
        }
        Format::Markdown => first
            .strip_prefix(&format!("<!-- {HEADER_KEY} "))
            .and_then(|s| s.strip_suffix(" -->"))
            .ok_or_else(|| bad(path, "missing header"))?
            .to_string(),
        Format::Json => unreachable!(),
    };
    let header: FileHeader = serde_json::from_str(&json).map_err(|e| bad(path, e))?;
    Ok(Parsed { header, body: bytes[nl + 1..].to_vec(), json_body: None })
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let p = parse_file(path)?;
    let text = String::from_utf8(p.body).map_err(|e| bad(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(path, format!("line {}: {e}", i + 2))))
        .collect()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let p = parse_file(path)?;
    serde_json::from_value(p.json_body.expect("json body")).map_err(|e| bad(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub path: PathBuf,
    pub problems: Vec<String>,
}

/// Media index written next to exported raw files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaIndex {
    /// Relative file name to sha256.
    pub files: std::collections::BTreeMap<String, String>,
}

/// Re-check every headered file under `root`. `expect` gives the config
/// and manifest hashes the files must carry; manifest hash `none` is
/// accepted for stages that do not read the dataset.
pub fn verify_tree(root: &Path, expect: &Stamp) -> CliResult<Vec<Check>> {
    let mut out = Vec::new();
    let mut entries: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    entries.sort();
    for path in entries {
        let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
        if rel.starts_with("cache") || Format::of(&path).is_none() {
            continue;
        }
        let mut problems = Vec::new();
        match parse_file(&path) {
            Err(e) => problems.push(e.to_string()),
            Ok(p) => {
                let h = &p.header;
                if sha256_hex(&p.body) != h.body_sha256 {
                    problems.push("body hash mismatch".into());
                }
                if h.version != mulprobe_core::VERSION {
                    problems.push(format!("written by version {}, this is {}", h.version, mulprobe_core::VERSION));
                }
                if h.config_hash != expect.config_hash {
                    problems.push(format!(
                        "config hash {} does not match {}",
                        short(&h.config_hash),
                        short(&expect.config_hash)
                    ));
                }
                if h.manifest_hash != expect.manifest_hash && h.manifest_hash != NO_MANIFEST {
                    problems.push(format!(
                        "manifest hash {} does not match {}",
                        short(&h.manifest_hash),
                        short(&expect.manifest_hash)
                    ));
                }
                if h.kind == "media_index" {
                    if let Some(body) = p.json_body {
                        match serde_json::from_value::<MediaIndex>(body) {
                            Ok(idx) => {
                                let dir = path.parent().unwrap_or(root);
                                for (name, hash) in &idx.files {
                                    match fs::read(dir.join(name)) {
                                        Ok(b) if sha256_hex(&b) == *hash => {}
                                        Ok(_) => problems.push(format!("{name}: media hash mismatch")),
                                        Err(e) => problems.push(format!("{name}: {e}")),
                                    }
                                }
                            }
                            Err(e) => problems.push(e.to_string()),
                        }
                    }
                }
            }
        }
        out.push(Check { path: rel, problems });
    }
    Ok(out)
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stamp() -> Stamp {
        Stamp { config_hash: "c".repeat(64), manifest_hash: "m".repeat(64) }
    }

    #[test]
    fn every_format_round_trips_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let w = Writer::new(dir.path(), stamp());
        w.jsonl("a/items.jsonl", "items", &[1, 2, 3]).unwrap();
        w.text("b/table.csv", "table", "x,y\n1,2\n").unwrap();
        w.text("c/report.md", "report", "# Title\n").unwrap();
        w.json("d/obj.json", "obj", &serde_json::json!({"z": 1.5, "a": [1, 2]})).unwrap();
        assert_eq!(read_jsonl::<i32>(&dir.path().join("a/items.jsonl")).unwrap(), vec![1, 2, 3]);
        let v: Value = read_json(&dir.path().join("d/obj.json")).unwrap();
        assert_eq!(v["z"], 1.5);
        let checks = verify_tree(dir.path(), &stamp()).unwrap();
        assert_eq!(checks.len(), 4);
        assert!(checks.iter().all(|c| c.problems.is_empty()), "{checks:?}");
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let w = Writer::new(dir.path(), stamp());
        let p = w.text("t.csv", "t", "x\n1\n").unwrap();
        let mut s = fs::read_to_string(&p).unwrap();
        s.push_str("2\n");
        fs::write(&p, s).unwrap();
        let checks = verify_tree(dir.path(), &stamp()).unwrap();
        assert_eq!(checks[0].problems, vec!["body hash mismatch".to_string()]);
        let other = Stamp { config_hash: "x".repeat(64), ..stamp() };
        assert_eq!(verify_tree(dir.path(), &other).unwrap()[0].problems.len(), 2);
    }

    #[test]
    fn media_index_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let w = Writer::new(dir.path(), stamp());
        let h = w.raw("m/x.png", b"png").unwrap();
        let idx = MediaIndex { files: [("x.png".to_string(), h)].into() };
        w.json("m/index.json", "media_index", &idx).unwrap();
        assert!(verify_tree(dir.path(), &stamp()).unwrap().iter().all(|c| c.problems.is_empty()));
        fs::write(dir.path().join("m/x.png"), b"gif").unwrap();
        let checks = verify_tree(dir.path(), &stamp()).unwrap();
        assert_eq!(checks[0].problems, vec!["x.png: media hash mismatch".to_string()]);
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(&dir.path().join("x/y.txt"), b"1").unwrap();
        write_atomic(&dir.path().join("x/y.txt"), b"2").unwrap();
        let names: Vec<_> = fs::read_dir(dir.path().join("x")).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("y.txt")]);
        assert_eq!(fs::read(dir.path().join("x/y.txt")).unwrap(), b"2");
    }
}
