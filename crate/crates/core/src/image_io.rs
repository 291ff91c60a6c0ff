//! Writing rendered frames to disk.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raycast::Frame;

/// Binary PPM (P6); alpha is dropped.
pub fn encode_ppm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.to_rgb8());
    out
}

#[cfg(feature = "png")]
pub fn encode_png(frame: &Frame) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, frame.width, frame.height);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
        w.write_image_data(&frame.to_rgba8_straight()).map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(out)
}

#[cfg(not(feature = "png"))]
pub fn encode_png(_frame: &Frame) -> Result<Vec<u8>> {
    Err(Error::InvalidArgument("built without PNG support".into()))
}

/// Chooses the format from the extension: `.png` or PPM otherwise.
pub fn save_image(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png { encode_png(frame)? } else { encode_ppm(frame) };
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_header_and_payload() {
        let f = Frame::filled(2, 1, [1.0, 0.0, 0.5, 1.0]);
        let b = encode_ppm(&f);
        assert!(b.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&b[b.len() - 6..], &[255, 0, 128, 255, 0, 128]);
    }

    #[cfg(feature = "png")]
    #[test]
    fn png_signature() {
        let b = encode_png(&Frame::filled(3, 2, [0.2, 0.4, 0.6, 1.0])).unwrap();
        assert_eq!(&b[..8], b"\x89PNG\r\n\x1a\n");
    }
}
