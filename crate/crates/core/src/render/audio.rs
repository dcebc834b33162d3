//! Spoken prompts by concatenating per-word WAV clips.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipIndex {
    pub sample_rate: u32,
    /// Word token → WAV file name relative to the library directory.
    pub clips: BTreeMap<String, String>,
}

/// Word clips, decoded to 16-bit mono samples at one shared rate.
#[derive(Debug, Clone, Default)]
pub struct ClipLibrary {
    pub sample_rate: u32,
    clips: BTreeMap<String, Vec<i16>>,
}

impl ClipLibrary {
    pub fn empty(sample_rate: u32) -> Self {
        Self { sample_rate, clips: BTreeMap::new() }
    }

    pub fn insert(&mut self, token: impl Into<String>, samples: Vec<i16>) {
        self.clips.insert(token.into(), samples);
    }

    pub fn get(&self, token: &str) -> Option<&[i16]> {
        self.clips.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// Load `<dir>/index.json` and every clip it lists.
    pub fn load(dir: &Path) -> Result<Self> {
        let index_path = dir.join(INDEX_FILE);
        let raw = std::fs::read(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let index: ClipIndex =
            serde_json::from_slice(&raw).map_err(|e| Error::json(index_path.display().to_string(), e))?;
        let mut lib = Self::empty(index.sample_rate);
        for (token, file) in &index.clips {
            let path = dir.join(file);
            let reader =
                hound::WavReader::open(&path).map_err(|e| Error::Render(format!("{}: {e}", path.display())))?;
            let spec = reader.spec();
            if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
                return Err(Error::Render(format!("{}: clips must be 16-bit PCM mono", path.display())));
            }
            if spec.sample_rate != index.sample_rate {
                return Err(Error::Render(format!(
                    "{}: sample rate {} differs from library rate {}",
                    path.display(),
                    spec.sample_rate,
                    index.sample_rate
                )));
            }
            let samples = reader
                .into_samples::<i16>()
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Render(format!("{}: {e}", path.display())))?;
            lib.insert(token.clone(), samples);
        }
        Ok(lib)
    }

    /// Write the library as a clip directory with an index.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut index = ClipIndex { sample_rate: self.sample_rate, clips: BTreeMap::new() };
        for (token, samples) in &self.clips {
            let name = format!("{token}.wav");
            let path: PathBuf = dir.join(&name);
            let bytes = encode_wav(samples, self.sample_rate)?;
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            index.clips.insert(token.clone(), name);
        }
        let path = dir.join(INDEX_FILE);
        let json = serde_json::to_vec_pretty(&index).map_err(|e| Error::json("clip index", e))?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    /// A tone library: every token gets a short sine burst whose pitch and
    /// length derive from the token text. Useful for exercising the audio
    /// path without recorded speech.
    pub fn synthetic<'a>(tokens: impl IntoIterator<Item = &'a str>, sample_rate: u32) -> Self {
        let mut lib = Self::empty(sample_rate);
        for t in tokens {
            let h = t.bytes().fold(17u32, |acc, b| acc.wrapping_mul(31).wrapping_add(b as u32));
            let freq = 220.0 + (h % 440) as f64;
            let len = (sample_rate as usize / 1000) * (120 + 15 * t.len());
            let samples = (0..len)
                .map(|i| {
                    let ph = 2.0 * std::f64::consts::PI * freq * i as f64 / sample_rate as f64;
                    (ph.sin() * 8000.0).round() as i16
                })
                .collect();
            lib.insert(t, samples);
        }
        lib
    }
}

pub fn encode_wav(samples: &[i16], sample_rate: u32) -> Result<Vec<u8>> {
    let spec =
        hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut cur = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut cur, spec).map_err(|e| Error::Render(e.to_string()))?;
        for &s in samples {
            w.write_sample(s).map_err(|e| Error::Render(e.to_string()))?;
        }
        w.finalize().map_err(|e| Error::Render(e.to_string()))?;
    }
    Ok(cur.into_inner())
}

/// Concatenate the clips for `tokens` with `gap_ms` of silence between
/// words. Fails listing every token without a clip.
pub fn concatenate(tokens: &[String], lib: &ClipLibrary, gap_ms: u32) -> Result<Vec<u8>> {
    let mut missing: Vec<&str> = tokens.iter().map(String::as_str).filter(|t| lib.get(t).is_none()).collect();
    missing.sort_unstable();
    missing.dedup();
    if !missing.is_empty() {
        return Err(Error::Render(format!("clip library is missing tokens: {}", missing.join(", "))));
    }
    let gap = vec![0i16; (lib.sample_rate as u64 * gap_ms as u64 / 1000) as usize];
    let mut out = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.extend_from_slice(&gap);
        }
        out.extend_from_slice(lib.get(t).expect("checked"));
    }
    encode_wav(&out, lib.sample_rate)
}

/// Duration in samples of a WAV produced by [`concatenate`].
pub fn wav_len_samples(bytes: &[u8]) -> Result<u32> {
    let r = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| Error::Render(e.to_string()))?;
    Ok(r.duration())
}
