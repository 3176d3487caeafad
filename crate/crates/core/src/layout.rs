//! Low-saliency placement: largest foreground region, quadrant choice and
//! text box planning.
//!
//! The largest region is found by Otsu binarization of the luma channel,
//! 4-connected labeling of the foreground (the minority class), and hole
//! filling of the biggest component.

use std::collections::VecDeque;
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::RasterImage;

pub const MAX_ANGLE_DEG: f64 = 10.0;
pub const MIN_GLYPH_FRACTION: f64 = 0.08;
pub const MAX_GLYPH_FRACTION: f64 = 0.14;
pub const MARGIN_FRACTION: f64 = 0.04;
pub const MIN_GLYPH_PX: u32 = 8;

/// Stream id for placement draws, so they never correlate with the matcher's
/// jitter draw for the same seed.
const PLACEMENT_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error(
        "text does not fit in quadrant {quadrant} ({quadrant_w}x{quadrant_h} px): \
         glyph height {glyph_height:.2} px is below the {MIN_GLYPH_PX} px minimum \
         (sampled {sampled:.2} px, {glyph_count} glyphs, margin {margin} px)"
    )]
    TooSmall {
        quadrant: QuadrantTag,
        quadrant_w: u32,
        quadrant_h: u32,
        glyph_height: f64,
        sampled: f64,
        glyph_count: usize,
        margin: u32,
    },
    #[error("glyph count must be at least 1")]
    NoGlyphs,
    #[error("cannot write mask {path}: {message}")]
    MaskDump { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuadrantTag {
    TL,
    TR,
    BL,
    BR,
}

impl fmt::Display for QuadrantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Preference order when quadrants tie.
pub const TIE_ORDER: [QuadrantTag; 4] = [
    QuadrantTag::BR,
    QuadrantTag::BL,
    QuadrantTag::TR,
    QuadrantTag::TL,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && y >= self.y && x - self.x < self.w && y - self.y < self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quadrant {
    pub tag: QuadrantTag,
    pub rect: Rect,
}

/// Splits at `floor(width/2)`, `floor(height/2)`; the right and bottom
/// quadrants take the odd column/row.
pub fn quadrants(width: u32, height: u32) -> [Quadrant; 4] {
    let (mx, my) = (width / 2, height / 2);
    let q = |tag, x, y, w, h| Quadrant {
        tag,
        rect: Rect { x, y, w, h },
    };
    [
        q(QuadrantTag::TL, 0, 0, mx, my),
        q(QuadrantTag::TR, mx, 0, width - mx, my),
        q(QuadrantTag::BL, 0, my, mx, height - my),
        q(QuadrantTag::BR, mx, my, width - mx, height - my),
    ]
}

pub fn quadrant(width: u32, height: u32, tag: QuadrantTag) -> Quadrant {
    quadrants(width, height)
        .into_iter()
        .find(|q| q.tag == tag)
        .unwrap()
}

/// Binary mask of the largest filled foreground region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
    area: usize,
}

impl ContourMask {
    pub fn empty(width: u32, height: u32) -> Self {
        ContourMask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
            area: 0,
        }
    }

    /// Builds a mask from raw bits without connectivity checks.
    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width as usize * height as usize);
        let area = bits.iter().filter(|&&b| b).count();
        ContourMask {
            width,
            height,
            bits,
            area,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn area(&self) -> usize {
        self.area
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_in(&self, rect: &Rect) -> usize {
        let mut n = 0;
        for y in rect.y..rect.y + rect.h {
            let row = y as usize * self.width as usize;
            n += self.bits[row + rect.x as usize..row + (rect.x + rect.w) as usize]
                .iter()
                .filter(|&&b| b)
                .count();
        }
        n
    }

    /// Writes the mask as a 1-bit grayscale PNG (set bits are white).
    pub fn write_png(&self, path: &Path) -> Result<(), LayoutError> {
        let err = |message: String| LayoutError::MaskDump {
            path: path.display().to_string(),
            message,
        };
        let file = File::create(path).map_err(|e| err(e.to_string()))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::One);
        let mut writer = encoder.write_header().map_err(|e| err(e.to_string()))?;
        let stride = (self.width as usize).div_ceil(8);
        let mut packed = vec![0u8; stride * self.height as usize];
        for y in 0..self.height as usize {
            for x in 0..self.width as usize {
                if self.bits[y * self.width as usize + x] {
                    packed[y * stride + x / 8] |= 0x80 >> (x % 8);
                }
            }
        }
        writer
            .write_image_data(&packed)
            .map_err(|e| err(e.to_string()))
    }
}

/// ITU-R BT.601 luma, rounded to the nearest integer.
pub fn luma(img: &RasterImage) -> Vec<u8> {
    img.pixels()
        .chunks_exact(4)
        .map(|p| ((299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32 + 500) / 1000) as u8)
        .collect()
}

/// Threshold `t` maximizing between-class variance, where the lower class is
/// `value <= t`. `None` when the histogram has a single occupied level.
pub fn otsu_threshold(histogram: &[u64; 256]) -> Option<u8> {
    let total: u64 = histogram.iter().sum();
    let weighted_total: f64 = histogram
        .iter()
        .enumerate()
        .map(|(v, &n)| v as f64 * n as f64)
        .sum();
    let (mut w0, mut sum0) = (0u64, 0f64);
    let mut best: Option<(u8, f64)> = None;
    for (t, &n) in histogram.iter().enumerate().take(255) {
        w0 += n;
        sum0 += t as f64 * n as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let mu0 = sum0 / w0 as f64;
        let mu1 = (weighted_total - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (mu0 - mu1) * (mu0 - mu1);
        if best.is_none_or(|(_, b)| between > b) {
            best = Some((t as u8, between));
        }
    }
    best.map(|(t, _)| t)
}

/// Foreground pixels after Otsu binarization. The smaller class is taken as
/// foreground; on an exact tie the dark class is.
pub fn binarize(img: &RasterImage) -> Vec<bool> {
    let y = luma(img);
    let mut histogram = [0u64; 256];
    for &v in &y {
        histogram[v as usize] += 1;
    }
    let Some(t) = otsu_threshold(&histogram) else {
        return vec![false; y.len()];
    };
    let dark: u64 = histogram[..=t as usize].iter().sum();
    let bright = y.len() as u64 - dark;
    let dark_is_fg = dark <= bright;
    y.iter().map(|&v| (v <= t) == dark_is_fg).collect()
}

/// Largest 4-connected foreground component with its holes filled. Ties on
/// area go to the component reached first in raster order.
pub fn largest_contour(img: &RasterImage) -> ContourMask {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let fg = binarize(img);
    let mut label = vec![0u32; w * h];
    let mut best: Option<(u32, usize)> = None;
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !fg[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if fg[j] && label[j] == 0 {
                    label[j] = next;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((next, size));
        }
    }
    let Some((keep, _)) = best else {
        return ContourMask::empty(img.width(), img.height());
    };
    let component: Vec<bool> = label.iter().map(|&l| l == keep).collect();
    ContourMask::from_bits(img.width(), img.height(), fill_holes(&component, w, h))
}

/// Marks every pixel not reachable from the border through non-region
/// pixels. The background is traversed 8-connected, the dual of the
/// region's 4-connectivity.
fn fill_holes(region: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if (x == 0 || y == 0 || x + 1 == w || y + 1 == h) && !region[y * w + x] {
                outside[y * w + x] = true;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !region[j] && !outside[j] {
                    outside[j] = true;
                    queue.push_back((nx as usize, ny as usize));
                }
            }
        }
    }
    outside.iter().map(|&o| !o).collect()
}

/// Mask pixel count per quadrant, in `TL, TR, BL, BR` order.
pub fn quadrant_counts(mask: &ContourMask) -> [(Quadrant, usize); 4] {
    quadrants(mask.width(), mask.height()).map(|q| (q, mask.count_in(&q.rect)))
}

/// The quadrant with the fewest mask pixels; ties resolve in the order
/// BR, BL, TR, TL.
pub fn select_quadrant(mask: &ContourMask) -> Quadrant {
    let counts = quadrant_counts(mask);
    let mut best: Option<(Quadrant, usize)> = None;
    for tag in TIE_ORDER {
        let (q, n) = counts.iter().find(|(q, _)| q.tag == tag).copied().unwrap();
        if best.is_none_or(|(_, b)| n < b) {
            best = Some((q, n));
        }
    }
    best.unwrap().0
}

/// Where and how the annotation is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementBox {
    pub quadrant: QuadrantTag,
    /// The image corner shared with the quadrant, in pixel-edge coordinates.
    pub anchor: (u32, u32),
    pub angle: f64,
    pub glyph_height: u32,
    pub glyph_count: usize,
    /// Axis-aligned bounds of the rotated text.
    pub bounds: Rect,
}

/// Axis-aligned size of a `glyph_count · h` by `h` text box rotated by
/// `angle_deg`, rounded up to whole pixels.
pub fn rotated_extent(glyph_count: usize, glyph_height: f64, angle_deg: f64) -> (u32, u32) {
    let (s, c) = angle_deg.to_radians().abs().sin_cos();
    let w = glyph_count as f64 * glyph_height;
    let h = glyph_height;
    // Tolerance keeps exact products like 2·40 from rounding up on fp noise.
    let up = |v: f64| (v - 1e-9).ceil().max(0.0) as u32;
    (up(w * c + h * s), up(w * s + h * c))
}

pub fn placement_margin(width: u32, height: u32) -> u32 {
    (MARGIN_FRACTION * width.min(height) as f64).ceil() as u32
}

/// Samples an angle in ±10° and a glyph height in 8–14 % of the image
/// height, shrinks the height until the rotated text fits the quadrant less
/// the margin, and pins the box to the quadrant's outer corner.
pub fn plan_placement(
    q: &Quadrant,
    glyph_count: usize,
    img_dims: (u32, u32),
    rng_seed: u64,
) -> Result<PlacementBox, LayoutError> {
    if glyph_count == 0 {
        return Err(LayoutError::NoGlyphs);
    }
    let (width, height) = img_dims;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(PLACEMENT_STREAM);
    let angle: f64 = rng.gen_range(-MAX_ANGLE_DEG..=MAX_ANGLE_DEG);
    let sampled: f64 =
        rng.gen_range(MIN_GLYPH_FRACTION * height as f64..=MAX_GLYPH_FRACTION * height as f64);

    let margin = placement_margin(width, height);
    let avail_w = q.rect.w.saturating_sub(2 * margin);
    let avail_h = q.rect.h.saturating_sub(2 * margin);
    let (s, c) = angle.to_radians().abs().sin_cos();
    let n = glyph_count as f64;
    let fit = (avail_w as f64 / (n * c + s)).min(avail_h as f64 / (n * s + c));
    let target = sampled.min(fit);

    let mut glyph_height = target.floor().max(0.0) as u32;
    while glyph_height >= MIN_GLYPH_PX {
        let (bw, bh) = rotated_extent(glyph_count, glyph_height as f64, angle);
        if bw <= avail_w && bh <= avail_h {
            break;
        }
        glyph_height -= 1;
    }
    if glyph_height < MIN_GLYPH_PX {
        return Err(LayoutError::TooSmall {
            quadrant: q.tag,
            quadrant_w: q.rect.w,
            quadrant_h: q.rect.h,
            glyph_height: target,
            sampled,
            glyph_count,
            margin,
        });
    }

    let (bw, bh) = rotated_extent(glyph_count, glyph_height as f64, angle);
    let (x, anchor_x) = match q.tag {
        QuadrantTag::TL | QuadrantTag::BL => (margin, 0),
        QuadrantTag::TR | QuadrantTag::BR => (width - margin - bw, width),
    };
    let (y, anchor_y) = match q.tag {
        QuadrantTag::TL | QuadrantTag::TR => (margin, 0),
        QuadrantTag::BL | QuadrantTag::BR => (height - margin - bh, height),
    };
    Ok(PlacementBox {
        quadrant: q.tag,
        anchor: (anchor_x, anchor_y),
        angle,
        glyph_height,
        glyph_count,
        bounds: Rect { x, y, w: bw, h: bh },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const WHITE: [u8; 4] = [255, 255, 255, 255];
    const BLACK: [u8; 4] = [0, 0, 0, 255];

    fn count_set(mask: &ContourMask, rect: Rect) -> usize {
        let mut n = 0;
        for y in rect.y..rect.y + rect.h {
            for x in rect.x..rect.x + rect.w {
                n += mask.get(x, y) as usize;
            }
        }
        n
    }

    #[test]
    fn uniform_images_have_empty_mask() {
        for color in [BLACK, WHITE, [90, 10, 200, 255]] {
            let mask = largest_contour(&RasterImage::filled(40, 30, color));
            assert_eq!(mask.area(), 0);
        }
    }

    #[test]
    fn single_square() {
        let mut img = RasterImage::filled(100, 100, WHITE);
        img.fill_rect(10, 10, 20, 20, BLACK);
        let mask = largest_contour(&img);
        assert_eq!(mask.area(), 400);
        assert_eq!(
            count_set(
                &mask,
                Rect {
                    x: 10,
                    y: 10,
                    w: 20,
                    h: 20
                }
            ),
            400
        );
    }

    #[test]
    fn keeps_larger_blob() {
        let mut img = RasterImage::filled(100, 100, WHITE);
        img.fill_rect(5, 5, 20, 20, BLACK);
        img.fill_rect(60, 60, 30, 30, BLACK);
        let mask = largest_contour(&img);
        assert_eq!(mask.area(), 900);
        assert_eq!(
            count_set(
                &mask,
                Rect {
                    x: 60,
                    y: 60,
                    w: 30,
                    h: 30
                }
            ),
            900
        );
    }

    #[test]
    fn holes_are_filled() {
        let mut img = RasterImage::filled(60, 60, WHITE);
        img.fill_rect(10, 10, 30, 30, BLACK);
        img.fill_rect(20, 20, 10, 10, WHITE);
        let mask = largest_contour(&img);
        assert_eq!(mask.area(), 900);
    }

    #[test]
    fn diagonal_pixels_are_separate_components() {
        // Two 2x2 blocks touching only at a corner: 4-connectivity keeps
        // them apart, so the larger block (3x3) wins alone.
        let mut img = RasterImage::filled(20, 20, WHITE);
        img.fill_rect(2, 2, 2, 2, BLACK);
        img.fill_rect(4, 4, 3, 3, BLACK);
        assert_eq!(largest_contour(&img).area(), 9);
    }

    #[test]
    fn bright_minority_is_foreground() {
        let mut img = RasterImage::filled(50, 50, BLACK);
        img.fill_rect(30, 30, 10, 10, WHITE);
        assert_eq!(largest_contour(&img).area(), 100);
    }

    #[test]
    fn otsu_on_bimodal_histogram() {
        let mut h = [0u64; 256];
        h[20] = 50;
        h[200] = 50;
        let t = otsu_threshold(&h).unwrap();
        assert!((20..200).contains(&(t as usize)));
        let mut flat = [0u64; 256];
        flat[7] = 10;
        assert_eq!(otsu_threshold(&flat), None);
    }

    #[test]
    fn quadrants_partition_odd_sizes() {
        let qs = quadrants(7, 5);
        assert_eq!(
            qs[0].rect,
            Rect {
                x: 0,
                y: 0,
                w: 3,
                h: 2
            }
        );
        assert_eq!(
            qs[3].rect,
            Rect {
                x: 3,
                y: 2,
                w: 4,
                h: 3
            }
        );
        let total: u64 = qs.iter().map(|q| q.rect.area()).sum();
        assert_eq!(total, 35);
    }

    #[test]
    fn blob_in_top_left_selects_bottom_right() {
        let mut img = RasterImage::filled(100, 80, WHITE);
        img.fill_rect(5, 5, 30, 20, BLACK);
        let mask = largest_contour(&img);
        assert_eq!(select_quadrant(&mask).tag, QuadrantTag::BR);
    }

    #[test]
    fn least_covered_quadrant_wins() {
        // Blob covers TL, TR, BL fully and 10 pixels of BR.
        let (w, h) = (40u32, 40u32);
        let mut bits = vec![false; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let in_br = x >= 20 && y >= 20;
                let br_sliver = (20..30).contains(&x) && y == 20;
                bits[(y * w + x) as usize] = !in_br || br_sliver;
            }
        }
        let mask = ContourMask::from_bits(w, h, bits);
        let counts = quadrant_counts(&mask);
        assert_eq!(counts[3].1, 10);
        assert_eq!(select_quadrant(&mask).tag, QuadrantTag::BR);

        // Same shape mirrored so BL is the sliver
        let mut bits = vec![false; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let in_bl = x < 20 && y >= 20;
                bits[(y * w + x) as usize] = !in_bl || (y == 39 && x < 3);
            }
        }
        assert_eq!(
            select_quadrant(&ContourMask::from_bits(w, h, bits)).tag,
            QuadrantTag::BL
        );
    }

    #[test]
    fn empty_mask_defaults_to_bottom_right() {
        assert_eq!(
            select_quadrant(&ContourMask::empty(10, 10)).tag,
            QuadrantTag::BR
        );
    }

    #[test]
    fn placement_is_deterministic() {
        let q = quadrant(640, 480, QuadrantTag::BR);
        let a = plan_placement(&q, 2, (640, 480), 7).unwrap();
        let b = plan_placement(&q, 2, (640, 480), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.anchor, (640, 480));
        assert!(a.angle.abs() <= MAX_ANGLE_DEG);
        assert!(a.glyph_height as f64 >= MIN_GLYPH_FRACTION * 480.0 - 1.0);
        assert!(a.glyph_height as f64 <= MAX_GLYPH_FRACTION * 480.0);
    }

    #[test]
    fn tiny_image_is_layout_error() {
        let q = quadrant(64, 48, QuadrantTag::BR);
        for seed in 0..50 {
            let err = plan_placement(&q, 1, (64, 48), seed).unwrap_err();
            match err {
                LayoutError::TooSmall {
                    sampled, quadrant, ..
                } => {
                    assert!((3.84..=6.72).contains(&sampled));
                    assert_eq!(quadrant, QuadrantTag::BR);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn long_text_shrinks_to_fit() {
        let q = quadrant(640, 480, QuadrantTag::TL);
        let p = plan_placement(&q, 12, (640, 480), 3).unwrap();
        let m = placement_margin(640, 480);
        assert!(p.bounds.x >= m && p.bounds.x + p.bounds.w <= 320 - m);
        assert!(p.glyph_height < (MIN_GLYPH_FRACTION * 480.0) as u32);
    }

    #[test]
    fn rotated_extent_at_zero_is_exact() {
        assert_eq!(rotated_extent(3, 40.0, 0.0), (120, 40));
    }

    #[test]
    fn writes_one_bit_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.png");
        let mut bits = vec![false; 9 * 3];
        bits[8] = true;
        bits[9] = true;
        let mask = ContourMask::from_bits(9, 3, bits);
        mask.write_png(&path).unwrap();
        let decoded = png::Decoder::new(std::io::BufReader::new(File::open(&path).unwrap()));
        let reader = decoded.read_info().unwrap();
        assert_eq!(reader.info().bit_depth, png::BitDepth::One);
        assert_eq!((reader.info().width, reader.info().height), (9, 3));
    }
}
