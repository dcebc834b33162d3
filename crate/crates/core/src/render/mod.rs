//! Paired representations of one problem: numeral and word text, images of
//! both, and optional audio.

pub mod audio;
pub mod image;
pub mod words;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::Problem;
use crate::error::{Error, Result};
use crate::hash::sha256_hex;

pub use audio::ClipLibrary;
pub use image::{ImageFormat, StyleConfig};
pub use words::{parse_words, to_words, to_words_big};

/// Instruction sent alongside an image payload.
pub const IMAGE_INSTRUCTION: &str = "Answer the multiplication question shown in the image.";
/// Instruction sent alongside an audio payload.
pub const AUDIO_INSTRUCTION: &str = "Answer the multiplication question in the audio.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    NumeralText,
    WordText,
    NumeralImage,
    WordImage,
    Audio,
}

impl Representation {
    pub const ALL: [Representation; 5] =
        [Self::NumeralText, Self::WordText, Self::NumeralImage, Self::WordImage, Self::Audio];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NumeralText => "numeral_text",
            Self::WordText => "word_text",
            Self::NumeralImage => "numeral_image",
            Self::WordImage => "word_image",
            Self::Audio => "audio",
        }
    }

    pub fn is_text(&self) -> bool {
        matches!(self, Self::NumeralText | Self::WordText)
    }

    pub fn is_image(&self) -> bool {
        matches!(self, Self::NumeralImage | Self::WordImage)
    }

    /// Coarse channel used in report layouts: `text`, `image` or `audio`.
    pub fn modality(&self) -> &'static str {
        match self {
            Self::NumeralText | Self::WordText => "text",
            Self::NumeralImage | Self::WordImage => "image",
            Self::Audio => "audio",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown representation {s:?}")))
    }
}

/// Text prompt for a text representation.
pub fn render_prompt(p: &Problem, r: Representation) -> Result<String> {
    match r {
        Representation::NumeralText => Ok(format!("What is {} × {}?", p.a, p.b)),
        Representation::WordText => {
            Ok(format!("What is {} times {}?", to_words_big(p.a.value())?, to_words_big(p.b.value())?))
        }
        other => Err(Error::invalid(format!("{other} is not a text representation"))),
    }
}

/// The string drawn into an image representation.
pub fn image_text(p: &Problem, r: Representation) -> Result<String> {
    match r {
        Representation::NumeralImage => Ok(format!("{} × {} = ?", p.a, p.b)),
        Representation::WordImage => render_prompt(p, Representation::WordText),
        other => Err(Error::invalid(format!("{other} is not an image representation"))),
    }
}

pub fn render_image(p: &Problem, r: Representation, format: ImageFormat, style: &StyleConfig) -> Result<Vec<u8>> {
    let text = image_text(p, r)?;
    image::render_image_text(&text, format, style)
}

/// Word tokens spoken for the audio representation.
pub fn audio_tokens(p: &Problem) -> Result<Vec<String>> {
    Ok(words::word_tokens(&render_prompt(p, Representation::WordText)?))
}

pub fn render_audio(p: &Problem, clips: &ClipLibrary, gap_ms: u32) -> Result<Vec<u8>> {
    audio::concatenate(&audio_tokens(p)?, clips, gap_ms)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Text {
        text: String,
    },
    Bytes {
        media_type: String,
        #[serde(with = "crate::hash::hex_bytes")]
        bytes: Vec<u8>,
    },
}

impl Payload {
    pub fn as_bytes(&self) -> &[u8] {
        match self {
            Self::Text { text } => text.as_bytes(),
            Self::Bytes { bytes, .. } => bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedInstance {
    pub problem_id: String,
    pub representation: Representation,
    pub payload: Payload,
    pub payload_hash: String,
}

impl RenderedInstance {
    fn new(problem_id: &str, representation: Representation, payload: Payload) -> Self {
        let payload_hash = sha256_hex(payload.as_bytes());
        Self { problem_id: problem_id.to_string(), representation, payload, payload_hash }
    }

    pub fn hash_ok(&self) -> bool {
        sha256_hex(self.payload.as_bytes()) == self.payload_hash
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    pub image_format: ImageFormat,
    pub style: StyleConfig,
    /// Silence between spoken words.
    pub gap_ms: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { image_format: ImageFormat::Png, style: StyleConfig::default(), gap_ms: 80 }
    }
}

pub fn render(
    p: &Problem,
    r: Representation,
    opts: &RenderOptions,
    clips: Option<&ClipLibrary>,
) -> Result<RenderedInstance> {
    let payload = match r {
        Representation::NumeralText | Representation::WordText => Payload::Text { text: render_prompt(p, r)? },
        Representation::NumeralImage | Representation::WordImage => Payload::Bytes {
            media_type: opts.image_format.media_type().to_string(),
            bytes: render_image(p, r, opts.image_format, &opts.style)?,
        },
        Representation::Audio => {
            let lib = clips.ok_or_else(|| Error::Render("no clip library configured".into()))?;
            Payload::Bytes { media_type: "audio/wav".into(), bytes: render_audio(p, lib, opts.gap_ms)? }
        }
    };
    Ok(RenderedInstance::new(&p.id, r, payload))
}
