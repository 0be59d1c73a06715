//! Binary PGM (`P5`) and PPM (`P6`) codecs, 8-bit only, plus an external conversion hook
//! for everything else.

use std::path::Path;
use std::process::Command;

use crate::error::{Error, Result};
use crate::image::Image8;

struct Header {
    channels: u8,
    width: u32,
    height: u32,
    payload_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::UnsupportedFormat("not a PNM file".into()));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        b'1'..=b'4' | b'7' => {
            return Err(Error::UnsupportedFormat(format!(
                "P{} (only binary P5/P6 are supported)",
                bytes[1] as char
            )))
        }
        _ => return Err(Error::UnsupportedFormat("not a PNM file".into())),
    };

    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // Whitespace and comments before each token.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => {
                    return Err(Error::CorruptHeader(format!(
                        "header ends before field {}",
                        k + 1
                    )))
                }
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let token = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = token
            .parse()
            .map_err(|_| Error::CorruptHeader(format!("field {} is not a number", k + 1)))?;
    }
    // Exactly one whitespace byte separates the header from the payload.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::CorruptHeader(
            "missing separator after maxval".into(),
        ));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::CorruptHeader(format!("image size {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval} (only 8-bit is supported)"
        )));
    }
    Ok(Header {
        channels,
        width,
        height,
        payload_offset: pos + 1,
    })
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image8> {
    let header = parse_header(bytes)?;
    let size = header.width as usize * header.height as usize * header.channels as usize;
    let payload = bytes
        .get(header.payload_offset..header.payload_offset + size)
        .ok_or_else(|| {
            Error::CorruptHeader(format!(
                "payload truncated: expected {size} bytes, found {}",
                bytes.len().saturating_sub(header.payload_offset)
            ))
        })?;
    Image8::new(
        header.width,
        header.height,
        header.channels,
        payload.to_vec(),
    )
}

pub fn encode_pnm(image: &Image8) -> Vec<u8> {
    let magic = if image.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

/// External converter: `program args... <input>` must write a PNM image to standard output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionHook {
    pub program: String,
    pub args: Vec<String>,
}

impl ConversionHook {
    /// Splits a command line on whitespace.
    pub fn parse(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidConfig("empty conversion command".into()))?;
        Ok(ConversionHook {
            program,
            args: parts.collect(),
        })
    }

    pub fn convert(&self, path: &Path) -> Result<Image8> {
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(path)
            .output()
            .map_err(|e| Error::file(path, e))?;
        if !output.status.success() {
            return Err(Error::file(
                path,
                std::io::Error::other(format!("conversion command exited with {}", output.status)),
            ));
        }
        decode_pnm(&output.stdout)
    }
}

pub fn is_pnm_path(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("pgm" | "ppm" | "pnm")
    )
}

/// Reads PGM/PPM natively; other extensions go through `hook` when one is configured.
pub fn read_image(path: impl AsRef<Path>, hook: Option<&ConversionHook>) -> Result<Image8> {
    let path = path.as_ref();
    if !is_pnm_path(path) {
        return match hook {
            Some(hook) => hook.convert(path),
            None => Err(Error::UnsupportedFormat(format!(
                "{} (configure a conversion hook for non-PNM images)",
                path.display()
            ))),
        };
    }
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_pnm(&bytes)
}

pub fn write_image(image: &Image8, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pnm(image)).map_err(|e| Error::file(path, e))
}
