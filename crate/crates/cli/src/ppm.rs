//! PPM images (P6 binary and P3 ASCII, maxval 255) and palette CSV.

use std::fs;
use std::path::Path;

use qsw_core::flows::RgbImage;

use crate::error::{CliError, ParseError, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, ParseError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.bytes.get(start) {
                None => ParseError::byte(start, format!("unexpected end of file, expected {what}")),
                Some(&b) => ParseError::byte(start, format!("expected {what}, found byte 0x{b:02x}")),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| ParseError::byte(start, format!("{what} is too large")))
    }
}

pub fn parse_ppm(bytes: &[u8]) -> Result<RgbImage, ParseError> {
    let binary = match bytes.get(..2) {
        Some(b"P6") => true,
        Some(b"P3") => false,
        _ => return Err(ParseError::byte(0, "not a PPM file (expected magic P6 or P3)")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space_and_comments();
    let at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(ParseError::byte(at, format!("maxval {maxval} unsupported, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(ParseError::byte(at, format!("empty image {width}x{height}")));
    }
    let count = width.checked_mul(height).filter(|n| n.checked_mul(3).is_some());
    let count = count.ok_or_else(|| ParseError::byte(at, "image dimensions overflow"))?;
    let mut pixels = Vec::with_capacity(count.min(1 << 24));
    if binary {
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(ParseError::byte(cur.pos, "expected one whitespace byte before pixel data")),
        }
        let data = &bytes[cur.pos..];
        if data.len() < 3 * count {
            return Err(ParseError::byte(
                bytes.len(),
                format!("pixel data truncated: {} of {} bytes", data.len(), 3 * count),
            ));
        }
        pixels.extend(data[..3 * count].chunks_exact(3).map(|c| [c[0], c[1], c[2]]));
    } else {
        for _ in 0..count {
            let mut px = [0u8; 3];
            for slot in &mut px {
                cur.skip_space_and_comments();
                let at = cur.pos;
                let v = cur.number("sample")?;
                *slot = u8::try_from(v)
                    .ok()
                    .filter(|_| v <= maxval)
                    .ok_or_else(|| ParseError::byte(at, format!("sample {v} exceeds maxval {maxval}")))?;
            }
            pixels.push(px);
        }
    }
    RgbImage::new(width, height, pixels).map_err(|e| ParseError::byte(0, e.to_string()))
}

pub fn encode_p6(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.pixels.iter().flatten());
    out
}

pub fn encode_p3(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P3\n{} {}\n255\n", image.width, image.height);
    for row in image.pixels.chunks(image.width) {
        let line: Vec<String> = row.iter().map(|p| format!("{} {} {}", p[0], p[1], p[2])).collect();
        out.push_str(&line.join("  "));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_ppm(&bytes).map_err(|e| CliError::parse(path, e))
}

/// Writes P3 when `ascii` is set, P6 otherwise.
pub fn write_ppm(path: &Path, image: &RgbImage, ascii: bool) -> Result<()> {
    let bytes = if ascii { encode_p3(image) } else { encode_p6(image) };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// `r,g,b` lines with a header row.
pub fn palette_csv(palette: &[[u8; 3]]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "g", "b"]).expect("in-memory write");
    for c in palette {
        w.serialize(c).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii")
}
