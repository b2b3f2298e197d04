//! PNG codecs for masks, label maps, color images and map renderings.

use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, LabelMap, RealGrid, RgbImage, TargetIndex};

/// Largest number of targets an 8-bit label PNG can hold (index 0 is blank).
pub const MAX_LABELS: usize = 255;

struct Decoded {
    height: usize,
    width: usize,
    color: ColorType,
    depth: BitDepth,
    palette: Option<Vec<u8>>,
    data: Vec<u8>,
}

fn decode(bytes: &[u8], context: &str) -> Result<Decoded> {
    let fail = |e: png::DecodingError| Error::format(context, e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(fail)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(context, "image too large"))?;
    let mut data = vec![0; size];
    let frame = reader.next_frame(&mut data).map_err(fail)?;
    data.truncate(frame.buffer_size());
    let palette = reader.info().palette.as_ref().map(|p| p.to_vec());
    Ok(Decoded {
        height: frame.height as usize,
        width: frame.width as usize,
        color: frame.color_type,
        depth: frame.bit_depth,
        palette,
        data,
    })
}

fn encode(width: usize, height: usize, color: ColorType, palette: Option<Vec<u8>>, data: &[u8]) -> Result<Vec<u8>> {
    let (w, h) = match (u32::try_from(width), u32::try_from(height)) {
        (Ok(w), Ok(h)) => (w, h),
        _ => return Err(Error::domain(format!("{height}x{width} grid exceeds PNG limits"))),
    };
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, w, h);
        encoder.set_color(color);
        encoder.set_depth(BitDepth::Eight);
        if let Some(palette) = palette {
            encoder.set_palette(palette);
        }
        let fail = |e: png::EncodingError| Error::format("png encoder", e.to_string());
        let mut writer = encoder.write_header().map_err(fail)?;
        writer.write_image_data(data).map_err(fail)?;
        writer.finish().map_err(fail)?;
    }
    Ok(out)
}

fn require_eight_bit(d: &Decoded, context: &str) -> Result<()> {
    if d.depth != BitDepth::Eight {
        return Err(Error::format(
            context,
            format!("expected 8-bit samples, found {:?}", d.depth),
        ));
    }
    Ok(())
}

/// Decodes an 8-bit grayscale PNG; any nonzero sample is foreground.
pub fn decode_mask(bytes: &[u8], context: &str) -> Result<BinaryMask> {
    let d = decode(bytes, context)?;
    require_eight_bit(&d, context)?;
    if d.color != ColorType::Grayscale {
        return Err(Error::format(
            context,
            format!("mask must be grayscale, found {:?}", d.color),
        ));
    }
    BinaryMask::new(d.height, d.width, d.data.iter().map(|&v| v != 0).collect())
        .map_err(|e| Error::format(context, e.to_string()))
}

/// Encodes foreground as 255 and background as 0.
pub fn encode_mask(mask: &BinaryMask) -> Result<Vec<u8>> {
    let data: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode(mask.width(), mask.height(), ColorType::Grayscale, None, &data)
}

pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    decode_mask(&super::read_bytes(path)?, &path.display().to_string())
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    super::write_atomic(path, &encode_mask(mask)?)
}

/// Decodes 8-bit RGB, RGBA (alpha ignored), gray or gray+alpha. Gray
/// sources come back flagged with the channel replicated.
pub fn decode_image(bytes: &[u8], context: &str) -> Result<RgbImage> {
    let d = decode(bytes, context)?;
    require_eight_bit(&d, context)?;
    let n = d.height * d.width;
    let wrap = |e: Error| Error::format(context, e.to_string());
    let planes = |stride: usize| -> [Vec<u8>; 3] {
        let mut out = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for px in d.data.chunks_exact(stride) {
            for (c, plane) in out.iter_mut().enumerate() {
                plane.push(px[c]);
            }
        }
        out
    };
    match d.color {
        ColorType::Rgb | ColorType::Rgba => {
            let [r, g, b] = planes(if d.color == ColorType::Rgb { 3 } else { 4 });
            RgbImage::new(d.height, d.width, r, g, b).map_err(wrap)
        }
        ColorType::Grayscale => RgbImage::from_gray(d.height, d.width, d.data.clone()).map_err(wrap),
        ColorType::GrayscaleAlpha => {
            let gray = d.data.chunks_exact(2).map(|px| px[0]).collect();
            RgbImage::from_gray(d.height, d.width, gray).map_err(wrap)
        }
        other => Err(Error::format(context, format!("unsupported color type {other:?}"))),
    }
}

pub fn read_image(path: &Path) -> Result<RgbImage> {
    decode_image(&super::read_bytes(path)?, &path.display().to_string())
}

pub fn encode_image(image: &RgbImage) -> Result<Vec<u8>> {
    let [r, g, b] = image.channels();
    let data: Vec<u8> = (0..r.len()).flat_map(|i| [r[i], g[i], b[i]]).collect();
    encode(image.width(), image.height(), ColorType::Rgb, None, &data)
}

fn palette_color(index: usize) -> [u8; 3] {
    if index == 0 {
        return [0, 0, 0];
    }
    let k = index as u32;
    [
        (k.wrapping_mul(97).wrapping_add(60) % 256) as u8,
        (k.wrapping_mul(57).wrapping_add(140) % 256) as u8,
        (k.wrapping_mul(151).wrapping_add(200) % 256) as u8,
    ]
}

/// Indexed PNG: pixel value 0 is blank, value `t + 1` is target `t`.
pub fn encode_labels(labels: &LabelMap, target_count: usize) -> Result<Vec<u8>> {
    if target_count > MAX_LABELS {
        return Err(Error::domain(format!(
            "{target_count} targets exceed the {MAX_LABELS} an 8-bit label PNG can hold"
        )));
    }
    let mut data = Vec::with_capacity(labels.labels().len());
    for label in labels.labels() {
        data.push(match *label {
            None => 0,
            Some(t) if (t as usize) < target_count => t as u8 + 1,
            Some(t) => return Err(Error::domain(format!("label {t} outside {target_count} targets"))),
        });
    }
    let palette = (0..=target_count).flat_map(palette_color).collect();
    encode(
        labels.width(),
        labels.height(),
        ColorType::Indexed,
        Some(palette),
        &data,
    )
}

pub fn decode_labels(bytes: &[u8], context: &str) -> Result<LabelMap> {
    let d = decode(bytes, context)?;
    require_eight_bit(&d, context)?;
    if !matches!(d.color, ColorType::Indexed | ColorType::Grayscale) {
        return Err(Error::format(
            context,
            format!("label map must be indexed, found {:?}", d.color),
        ));
    }
    if let Some(palette) = &d.palette {
        let entries = palette.len() / 3;
        if let Some(&bad) = d.data.iter().find(|&&v| v as usize >= entries) {
            return Err(Error::format(
                context,
                format!("index {bad} outside palette of {entries}"),
            ));
        }
    }
    let labels = d
        .data
        .iter()
        .map(|&v| v.checked_sub(1).map(TargetIndex::from))
        .collect();
    LabelMap::new(d.height, d.width, labels).map_err(|e| Error::format(context, e.to_string()))
}

pub fn write_labels(path: &Path, labels: &LabelMap, target_count: usize) -> Result<()> {
    super::write_atomic(path, &encode_labels(labels, target_count)?)
}

pub fn read_labels(path: &Path) -> Result<LabelMap> {
    decode_labels(&super::read_bytes(path)?, &path.display().to_string())
}

/// Grayscale rendering of a [0, 1] grid, `value * 255` rounded half up.
pub fn encode_rendering(grid: &RealGrid) -> Result<Vec<u8>> {
    let data: Vec<u8> = grid
        .values()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8)
        .collect();
    encode(grid.width(), grid.height(), ColorType::Grayscale, None, &data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trip_and_nonzero_rule() {
        let mask = BinaryMask::from_rows(&["#..", ".##"]).unwrap();
        let bytes = encode_mask(&mask).unwrap();
        assert_eq!(decode_mask(&bytes, "t").unwrap(), mask);

        let ones = encode(2, 1, ColorType::Grayscale, None, &[1, 0]).unwrap();
        let read = decode_mask(&ones, "t").unwrap();
        assert!(read.get(0, 0) && !read.get(0, 1));
    }

    #[test]
    fn rgb_mask_is_format_error() {
        let rgb = encode(1, 1, ColorType::Rgb, None, &[1, 2, 3]).unwrap();
        let err = decode_mask(&rgb, "t").unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::Format);
    }

    #[test]
    fn image_round_trip_and_gray() {
        let image = RgbImage::new(1, 2, vec![1, 2], vec![3, 4], vec![5, 6]).unwrap();
        let back = decode_image(&encode_image(&image).unwrap(), "t").unwrap();
        assert_eq!(back, image);
        let gray = encode(2, 1, ColorType::Grayscale, None, &[7, 9]).unwrap();
        let back = decode_image(&gray, "t").unwrap();
        assert!(back.is_grayscale());
        assert_eq!(back.channels()[1], &[7, 9]);
    }

    #[test]
    fn label_round_trip() {
        let labels = LabelMap::new(1, 3, vec![None, Some(0), Some(2)]).unwrap();
        let bytes = encode_labels(&labels, 3).unwrap();
        assert_eq!(decode_labels(&bytes, "t").unwrap(), labels);
        assert!(encode_labels(&labels, 256).is_err());
    }

    #[test]
    fn rendering_rounds_half_up() {
        let grid = RealGrid::new(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        let d = decode(&encode_rendering(&grid).unwrap(), "t").unwrap();
        assert_eq!(d.data, vec![0, 128, 255]);
    }
}
