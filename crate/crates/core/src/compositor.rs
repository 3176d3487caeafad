//! Glyph rasterization and alpha compositing of the annotation.

use std::fs;
use std::path::{Path, PathBuf};

use ab_glyph::{point, Font, FontVec, GlyphId, PxScale};
use thiserror::Error;

use crate::layout::PlacementBox;
use crate::raster::RasterImage;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("cannot read font {path}: {message}")]
    Font { path: PathBuf, message: String },
    #[error("empty annotation")]
    EmptyAnnotation,
    #[error("font has no glyph for U+{:04X} {0:?}", *.0 as u32)]
    MissingGlyph(char),
    #[error("text has {text} glyphs but the placement was planned for {planned}")]
    GlyphCountMismatch { text: usize, planned: usize },
    #[error("invalid style: {0}")]
    Style(String),
}

/// A loaded outline font. Parsed once and shared read-only.
pub struct Typeface {
    font: FontVec,
    path: PathBuf,
}

impl std::fmt::Debug for Typeface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Typeface")
            .field("path", &self.path)
            .finish()
    }
}

impl Typeface {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RenderError> {
        let path = path.as_ref();
        let font_err = |message: String| RenderError::Font {
            path: path.to_path_buf(),
            message,
        };
        let bytes = fs::read(path).map_err(|e| font_err(e.to_string()))?;
        let font = FontVec::try_from_vec(bytes).map_err(|e| font_err(e.to_string()))?;
        if font.units_per_em().is_none() {
            return Err(font_err("font has no units-per-em".into()));
        }
        Ok(Typeface {
            font,
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn has_glyph(&self, c: char) -> bool {
        self.font.glyph_id(c) != GlyphId(0)
    }

    /// First code point of `text` the font cannot draw.
    pub fn missing_glyph(&self, text: &str) -> Option<char> {
        text.chars().find(|&c| !self.has_glyph(c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleConfig {
    pub font_path: PathBuf,
    pub fill_color: [u8; 4],
    pub outline_color: [u8; 4],
    /// `None` selects `max(2 px, 6 % of glyph height)`.
    pub outline_width: Option<u32>,
    pub opacity: f64,
}

impl StyleConfig {
    pub fn new(font_path: impl Into<PathBuf>) -> Self {
        StyleConfig {
            font_path: font_path.into(),
            fill_color: [255, 255, 255, 255],
            outline_color: [0, 0, 0, 255],
            outline_width: None,
            opacity: 1.0,
        }
    }

    pub fn outline_width_for(&self, glyph_height: u32) -> u32 {
        self.outline_width
            .unwrap_or_else(|| 2.max((0.06 * glyph_height as f64).round() as u32))
    }

    pub fn validate(&self, glyph_height: u32) -> Result<(), RenderError> {
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(RenderError::Style(format!(
                "opacity {} is outside [0, 1]",
                self.opacity
            )));
        }
        let outline = self.outline_width_for(glyph_height);
        if outline as f64 > glyph_height as f64 / 4.0 {
            return Err(RenderError::Style(format!(
                "outline width {outline} px exceeds a quarter of the {glyph_height} px glyph height"
            )));
        }
        Ok(())
    }
}

/// Fill and outline coverage of the rotated text, sized to the placement
/// bounds. Coverage values are in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphPatch {
    pub width: u32,
    pub height: u32,
    pub fill: Vec<f32>,
    pub outline: Vec<f32>,
    /// Top-left corner of the patch in image coordinates.
    pub origin: (u32, u32),
    /// Start of the text baseline, relative to the patch, before rotation
    /// about the patch center.
    pub baseline_origin: (f32, f32),
}

impl GlyphPatch {
    pub fn fill_at(&self, x: u32, y: u32) -> f32 {
        self.fill[(y * self.width + x) as usize]
    }
}

/// Rasterizes `text` as a row of square cells of `box.glyph_height` pixels,
/// dilates the fill into an outline band, then rotates both layers by
/// `box.angle` (counter-clockwise on screen) into the placement bounds.
pub fn render_text(
    text: &str,
    face: &Typeface,
    style: &StyleConfig,
    placement: &PlacementBox,
) -> Result<GlyphPatch, RenderError> {
    if text.is_empty() {
        return Err(RenderError::EmptyAnnotation);
    }
    if let Some(c) = face.missing_glyph(text) {
        return Err(RenderError::MissingGlyph(c));
    }
    let glyph_count = text.chars().count();
    if glyph_count != placement.glyph_count {
        return Err(RenderError::GlyphCountMismatch {
            text: glyph_count,
            planned: placement.glyph_count,
        });
    }
    style.validate(placement.glyph_height)?;

    let cell = placement.glyph_height as f32;
    let canvas_w = placement.glyph_height as usize * glyph_count;
    let canvas_h = placement.glyph_height as usize;
    let mut fill = vec![0f32; canvas_w * canvas_h];

    let font = &face.font;
    let upem = font.units_per_em().unwrap();
    let px_per_unit = cell / upem;
    let scale = PxScale::from(cell * font.height_unscaled() / upem);
    let ascent = font.ascent_unscaled();
    let descent = font.descent_unscaled();
    let baseline = cell * ascent / (ascent - descent);

    for (i, c) in text.chars().enumerate() {
        let id = font.glyph_id(c);
        let advance = font.h_advance_unscaled(id) * px_per_unit;
        let x0 = i as f32 * cell + (cell - advance) / 2.0;
        let glyph = id.with_scale_and_position(scale, point(x0, baseline));
        let Some(outlined) = font.outline_glyph(glyph) else {
            continue;
        };
        let bounds = outlined.px_bounds();
        outlined.draw(|gx, gy, coverage| {
            let x = bounds.min.x as i64 + gx as i64;
            let y = bounds.min.y as i64 + gy as i64;
            if x < 0 || y < 0 || x >= canvas_w as i64 || y >= canvas_h as i64 {
                return;
            }
            let slot = &mut fill[y as usize * canvas_w + x as usize];
            *slot = slot.max(coverage.clamp(0.0, 1.0));
        });
    }

    let radius = style.outline_width_for(placement.glyph_height);
    let outline = dilate(&fill, canvas_w, canvas_h, radius);

    let (pw, ph) = (placement.bounds.w, placement.bounds.h);
    let (sin, cos) = placement.angle.to_radians().sin_cos();
    let mut patch_fill = vec![0f32; pw as usize * ph as usize];
    let mut patch_outline = vec![0f32; pw as usize * ph as usize];
    for py in 0..ph {
        for px in 0..pw {
            let dx = px as f64 + 0.5 - pw as f64 / 2.0;
            let dy = py as f64 + 0.5 - ph as f64 / 2.0;
            // inverse of the on-screen counter-clockwise rotation (y down)
            let u = dx * cos - dy * sin;
            let v = dx * sin + dy * cos;
            let sx = u + canvas_w as f64 / 2.0 - 0.5;
            let sy = v + canvas_h as f64 / 2.0 - 0.5;
            let i = (py * pw + px) as usize;
            patch_fill[i] = sample(&fill, canvas_w, canvas_h, sx, sy);
            patch_outline[i] = sample(&outline, canvas_w, canvas_h, sx, sy);
        }
    }

    Ok(GlyphPatch {
        width: pw,
        height: ph,
        fill: patch_fill,
        outline: patch_outline,
        origin: (placement.bounds.x, placement.bounds.y),
        baseline_origin: (
            (pw as f32 - canvas_w as f32) / 2.0,
            (ph as f32 - canvas_h as f32) / 2.0 + baseline,
        ),
    })
}

/// Grayscale dilation with a disc of `radius` pixels.
fn dilate(src: &[f32], w: usize, h: usize, radius: u32) -> Vec<f32> {
    if radius == 0 {
        return src.to_vec();
    }
    let r = radius as i64;
    let offsets: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    let mut out = vec![0f32; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut best = 0f32;
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                    best = best.max(src[ny as usize * w + nx as usize]);
                }
            }
            out[y as usize * w + x as usize] = best;
        }
    }
    out
}

/// Bilinear sample with zero outside the buffer.
fn sample(buf: &[f32], w: usize, h: usize, x: f64, y: f64) -> f32 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = ((x - x0) as f32, (y - y0) as f32);
    let at = |xi: f64, yi: f64| -> f32 {
        if xi < 0.0 || yi < 0.0 || xi >= w as f64 || yi >= h as f64 {
            0.0
        } else {
            buf[yi as usize * w + xi as usize]
        }
    };
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1.0, y0) * fx;
    let bottom = at(x0, y0 + 1.0) * (1.0 - fx) + at(x0 + 1.0, y0 + 1.0) * fx;
    (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
}

/// Source-over blend of `color` at `alpha` onto a straight-alpha pixel.
fn blend(dst: [f64; 4], color: [u8; 4], alpha: f64) -> [f64; 4] {
    let src_a = alpha * color[3] as f64 / 255.0;
    if src_a <= 0.0 {
        return dst;
    }
    let dst_a = dst[3] / 255.0;
    let out_a = src_a + dst_a * (1.0 - src_a);
    let mut out = [0.0; 4];
    for ch in 0..3 {
        out[ch] = (color[ch] as f64 * src_a + dst[ch] * dst_a * (1.0 - src_a)) / out_a;
    }
    out[3] = out_a * 255.0;
    out
}

/// Blends the outline and then the fill onto `img` inside the patch
/// rectangle. Effective alpha is `coverage · opacity · color alpha`.
pub fn composite(img: &RasterImage, patch: &GlyphPatch, style: &StyleConfig) -> RasterImage {
    let mut out = img.clone();
    if style.opacity <= 0.0 {
        return out;
    }
    let (ox, oy) = patch.origin;
    for py in 0..patch.height {
        for px in 0..patch.width {
            let (x, y) = (ox + px, oy + py);
            if x >= img.width() || y >= img.height() {
                continue;
            }
            let i = (py * patch.width + px) as usize;
            let outline_a = patch.outline[i] as f64 * style.opacity;
            let fill_a = patch.fill[i] as f64 * style.opacity;
            if outline_a <= 0.0 && fill_a <= 0.0 {
                continue;
            }
            let p = img.pixel(x, y);
            let mut acc = p.map(f64::from);
            acc = blend(acc, style.outline_color, outline_a);
            acc = blend(acc, style.fill_color, fill_a);
            let rgba = acc.map(|v| v.round().clamp(0.0, 255.0) as u8);
            out.set_pixel(x, y, rgba);
        }
    }
    out
}
