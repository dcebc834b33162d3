//! Deterministic equation images from an embedded 8×8 bitmap font.
//!
//! The same glyph raster backs both outputs: SVG draws each horizontal run
//! of set font pixels as a `<rect>`, PNG writes the scaled grayscale
//! raster. The rendered string is also stored as metadata (`<desc>` in SVG,
//! a `tEXt` chunk in PNG).

use std::fmt::Write as _;
use std::io::Cursor;

use font8x8::legacy::{BASIC_LEGACY, LATIN_LEGACY};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GLYPH: u32 = 8;
const PNG_TEXT_KEY: &str = "Description";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleConfig {
    /// Output pixels per font pixel.
    pub scale: u32,
    /// Margin around the text block, in output pixels.
    pub padding: u32,
    /// Blank font rows between wrapped lines.
    pub line_gap: u32,
    pub max_width: u32,
    pub max_height: u32,
    pub foreground: u8,
    pub background: u8,
    /// Break long text at spaces instead of rejecting it.
    pub wrap: bool,
}

impl Default for StyleConfig {
    fn default() -> Self {
        Self {
            scale: 3,
            padding: 12,
            line_gap: 3,
            max_width: 1024,
            max_height: 512,
            foreground: 0,
            background: 255,
            wrap: true,
        }
    }
}

impl StyleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale == 0 {
            return Err(Error::config("style.scale must be >= 1"));
        }
        if self.foreground == self.background {
            return Err(Error::config("style.foreground and style.background are identical"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Svg,
    Png,
}

impl ImageFormat {
    pub fn media_type(&self) -> &'static str {
        match self {
            Self::Svg => "image/svg+xml",
            Self::Png => "image/png",
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            Self::Svg => "svg",
            Self::Png => "png",
        }
    }
}

fn glyph(c: char) -> Option<[u8; 8]> {
    let cp = c as u32;
    match cp {
        0x20..=0x7e => Some(BASIC_LEGACY[cp as usize]),
        0xa0..=0xff => Some(LATIN_LEGACY[(cp - 0xa0) as usize]),
        _ => None,
    }
}

/// Layout in font-pixel units: which lines go where.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    lines: Vec<String>,
    cols: u32,
    rows: u32,
}

fn layout(text: &str, style: &StyleConfig) -> Result<Layout> {
    style.validate()?;
    if let Some(bad) = text.chars().find(|&c| glyph(c).is_none()) {
        return Err(Error::Render(format!("no glyph for {bad:?} in the embedded font")));
    }
    let cell = GLYPH * style.scale;
    let usable_w = style.max_width.saturating_sub(2 * style.padding);
    let max_chars = (usable_w / cell) as usize;
    let total_chars = text.chars().count() as u32;
    let lines = if !style.wrap || text.chars().count() <= max_chars {
        vec![text.to_string()]
    } else {
        wrap_words(text, max_chars)
    };
    let longest = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0) as u32;
    let n = lines.len() as u32;
    let rows = n * GLYPH + n.saturating_sub(1) * style.line_gap;
    let width = longest * cell + 2 * style.padding;
    let height = rows * style.scale + 2 * style.padding;
    if width > style.max_width || height > style.max_height {
        // Smallest canvas that holds the text on one line.
        let need_w = (total_chars * cell + 2 * style.padding).max(width);
        return Err(Error::Render(format!(
            "text of {total_chars} characters needs a {need_w}×{height} canvas at scale {}, \
             configured maximum is {}×{}",
            style.scale, style.max_width, style.max_height
        )));
    }
    Ok(Layout { lines, cols: longest * GLYPH, rows })
}

fn wrap_words(text: &str, max_chars: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut cur = String::new();
    for w in text.split(' ') {
        let extra = if cur.is_empty() { 0 } else { 1 };
        if !cur.is_empty() && cur.chars().count() + extra + w.chars().count() > max_chars {
            lines.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(w);
    }
    lines.push(cur);
    lines
}

// Set font pixels as (x, y) in font-pixel units, row-major order.
fn font_pixels(l: &Layout, style: &StyleConfig) -> Vec<(u32, u32)> {
    let mut px = Vec::new();
    for (li, line) in l.lines.iter().enumerate() {
        let y0 = li as u32 * (GLYPH + style.line_gap);
        for gy in 0..GLYPH {
            for (ci, c) in line.chars().enumerate() {
                let rows = glyph(c).expect("checked in layout");
                let bits = rows[gy as usize];
                for gx in 0..GLYPH {
                    if bits & (1 << gx) != 0 {
                        px.push((ci as u32 * GLYPH + gx, y0 + gy));
                    }
                }
            }
        }
    }
    px.sort_by_key(|&(x, y)| (y, x));
    px
}

/// Grayscale raster, one byte per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }
}

pub fn rasterize(text: &str, style: &StyleConfig) -> Result<Raster> {
    let l = layout(text, style)?;
    let s = style.scale;
    let width = l.cols * s + 2 * style.padding;
    let height = l.rows * s + 2 * style.padding;
    let mut pixels = vec![style.background; (width * height) as usize];
    for (fx, fy) in font_pixels(&l, style) {
        for dy in 0..s {
            let y = style.padding + fy * s + dy;
            let start = (y * width + style.padding + fx * s) as usize;
            pixels[start..start + s as usize].fill(style.foreground);
        }
    }
    Ok(Raster { width, height, pixels })
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn xml_unescape(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&quot;", "\"").replace("&amp;", "&")
}

fn gray(v: u8) -> String {
    format!("#{v:02x}{v:02x}{v:02x}")
}

pub fn render_svg(text: &str, style: &StyleConfig) -> Result<Vec<u8>> {
    let l = layout(text, style)?;
    let s = style.scale;
    let width = l.cols * s + 2 * style.padding;
    let height = l.rows * s + 2 * style.padding;
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" shape-rendering="crispEdges">"#
    )
    .unwrap();
    writeln!(out, "<desc>{}</desc>", xml_escape(text)).unwrap();
    writeln!(out, r#"<rect width="{width}" height="{height}" fill="{}"/>"#, gray(style.background)).unwrap();
    writeln!(out, r#"<g fill="{}">"#, gray(style.foreground)).unwrap();
    let px = font_pixels(&l, style);
    let mut i = 0;
    while i < px.len() {
        let (x0, y) = px[i];
        let mut j = i + 1;
        while j < px.len() && px[j].1 == y && px[j].0 == px[j - 1].0 + 1 {
            j += 1;
        }
        let run = (j - i) as u32;
        writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{s}"/>"#,
            style.padding + x0 * s,
            style.padding + y * s,
            run * s
        )
        .unwrap();
        i = j;
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out.into_bytes())
}

pub fn render_png(text: &str, style: &StyleConfig) -> Result<Vec<u8>> {
    let r = rasterize(text, style)?;
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, r.width, r.height);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        enc.add_text_chunk(PNG_TEXT_KEY.to_string(), text.to_string()).map_err(|e| Error::Render(e.to_string()))?;
        let mut w = enc.write_header().map_err(|e| Error::Render(e.to_string()))?;
        w.write_image_data(&r.pixels).map_err(|e| Error::Render(e.to_string()))?;
        w.finish().map_err(|e| Error::Render(e.to_string()))?;
    }
    Ok(buf)
}

pub fn render_image_text(text: &str, format: ImageFormat, style: &StyleConfig) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Svg => render_svg(text, style),
        ImageFormat::Png => render_png(text, style),
    }
}

/// Recover the embedded text of an image produced by this module.
pub fn embedded_text(bytes: &[u8]) -> Option<String> {
    if bytes.starts_with(b"\x89PNG") {
        let reader = png::Decoder::new(Cursor::new(bytes)).read_info().ok()?;
        return reader
            .info()
            .uncompressed_latin1_text
            .iter()
            .find(|c| c.keyword == PNG_TEXT_KEY)
            .map(|c| c.text.clone());
    }
    let s = std::str::from_utf8(bytes).ok()?;
    let start = s.find("<desc>")? + "<desc>".len();
    let end = s[start..].find("</desc>")? + start;
    Some(xml_unescape(&s[start..end]))
}

/// Decode a PNG written by [`render_png`] back into a raster.
pub fn decode_png(bytes: &[u8]) -> Result<Raster> {
    let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().map_err(|e| Error::Render(e.to_string()))?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Render("png too large".into()))?;
    let mut pixels = vec![0; size];
    let info = reader.next_frame(&mut pixels).map_err(|e| Error::Render(e.to_string()))?;
    pixels.truncate(info.buffer_size());
    Ok(Raster { width: info.width, height: info.height, pixels })
}
