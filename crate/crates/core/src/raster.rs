//! RGBA raster buffer plus PNG/JPEG decoding and encoding.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot access image {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("cannot encode image: {0}")]
    Encode(String),
    #[error("invalid raster: {0}")]
    Invalid(String),
}

/// Row-major RGBA, 8 bits per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Png,
    Jpeg { quality: u8 },
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Invalid("image has zero area".into()));
        }
        let expected = width as usize * height as usize * 4;
        if pixels.len() != expected {
            return Err(RasterError::Invalid(format!(
                "pixel buffer has {} bytes, expected {expected}",
                pixels.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Self {
        let n = width as usize * height as usize;
        RasterImage::new(width, height, rgba.repeat(n)).expect("nonzero dimensions")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = self.offset(x, y);
        self.pixels[i..i + 4].try_into().unwrap()
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgba: [u8; 4]) {
        let i = self.offset(x, y);
        self.pixels[i..i + 4].copy_from_slice(&rgba);
    }

    /// Paints an axis-aligned rectangle, clipped to the image.
    pub fn fill_rect(&mut self, x: u32, y: u32, w: u32, h: u32, rgba: [u8; 4]) {
        for yy in y..(y.saturating_add(h)).min(self.height) {
            for xx in x..(x.saturating_add(w)).min(self.width) {
                self.set_pixel(xx, yy, rgba);
            }
        }
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x}, {y}) out of bounds"
        );
        (y as usize * self.width as usize + x as usize) * 4
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, RasterError> {
        Self::decode_named(bytes, Path::new("<memory>"))
    }

    fn decode_named(bytes: &[u8], path: &Path) -> Result<Self, RasterError> {
        let decode_err = |message: String| RasterError::Decode {
            path: path.to_path_buf(),
            message,
        };
        let reader = ImageReader::new(Cursor::new(bytes))
            .with_guessed_format()
            .map_err(|e| decode_err(e.to_string()))?;
        match reader.format() {
            Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
            other => return Err(decode_err(format!("unsupported format {other:?}"))),
        }
        let rgba = reader
            .decode()
            .map_err(|e| decode_err(e.to_string()))?
            .into_rgba8();
        let (w, h) = rgba.dimensions();
        RasterImage::new(w, h, rgba.into_raw())
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| RasterError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::decode_named(&bytes, path)
    }

    pub fn encode(&self, format: OutputFormat) -> Result<Vec<u8>, RasterError> {
        let mut out = Vec::new();
        match format {
            OutputFormat::Png => PngEncoder::new(&mut out)
                .write_image(
                    &self.pixels,
                    self.width,
                    self.height,
                    ExtendedColorType::Rgba8,
                )
                .map_err(|e| RasterError::Encode(e.to_string()))?,
            OutputFormat::Jpeg { quality } => {
                // JPEG has no alpha channel.
                let rgb: Vec<u8> = self
                    .pixels
                    .chunks_exact(4)
                    .flat_map(|p| [p[0], p[1], p[2]])
                    .collect();
                JpegEncoder::new_with_quality(&mut out, quality.clamp(1, 100))
                    .write_image(&rgb, self.width, self.height, ExtendedColorType::Rgb8)
                    .map_err(|e| RasterError::Encode(e.to_string()))?
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>, format: OutputFormat) -> Result<(), RasterError> {
        let path = path.as_ref();
        fs::write(path, self.encode(format)?).map_err(|source| RasterError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
