mod common;

use ideophone::layout::{
    placement_margin, quadrant, quadrant_counts, quadrants, MAX_ANGLE_DEG, MIN_GLYPH_PX, TIE_ORDER,
};
use ideophone::{
    largest_contour, plan_placement, select_quadrant, ContourMask, LayoutError, QuadrantTag,
    RasterImage,
};
use proptest::prelude::*;

const GRAY: [u8; 4] = [200, 200, 200, 255];
const DARK: [u8; 4] = [20, 20, 20, 255];

fn brute_count(mask: &ContourMask, tag: QuadrantTag) -> usize {
    let (w, h) = (mask.width(), mask.height());
    let (hw, hh) = (w / 2, h / 2);
    let mut n = 0;
    for y in 0..h {
        for x in 0..w {
            let t = match (x >= hw, y >= hh) {
                (false, false) => QuadrantTag::TL,
                (true, false) => QuadrantTag::TR,
                (false, true) => QuadrantTag::BL,
                (true, true) => QuadrantTag::BR,
            };
            if t == tag && mask.get(x, y) {
                n += 1;
            }
        }
    }
    n
}

proptest! {
    #[test]
    fn quadrants_tile_the_image(w in 1u32..200, h in 1u32..200) {
        let qs = quadrants(w, h);
        let total: u64 = qs.iter().map(|q| q.rect.area()).sum();
        prop_assert_eq!(total, w as u64 * h as u64);
        for y in 0..h {
            for x in 0..w {
                prop_assert_eq!(qs.iter().filter(|q| q.rect.contains(x, y)).count(), 1);
            }
        }
    }

    #[test]
    fn selected_quadrant_has_minimal_count(w in 2u32..60, h in 2u32..60, bits in prop::collection::vec(prop::bool::weighted(0.3), 3600)) {
        let bits: Vec<bool> = bits.into_iter().take((w * h) as usize).collect();
        let mask = ContourMask::from_bits(w, h, bits);
        let chosen = select_quadrant(&mask);
        let counts: Vec<usize> = TIE_ORDER.iter().map(|&t| brute_count(&mask, t)).collect();
        let min = *counts.iter().min().unwrap();
        prop_assert_eq!(brute_count(&mask, chosen.tag), min);
        // first in tie order among the minima
        let first = TIE_ORDER[counts.iter().position(|&c| c == min).unwrap()];
        prop_assert_eq!(chosen.tag, first);
        for (q, n) in quadrant_counts(&mask) {
            prop_assert_eq!(n, brute_count(&mask, q.tag));
        }
    }

    #[test]
    fn text_avoids_a_blob_confined_to_one_quadrant(
        w in 160u32..640,
        h in 160u32..480,
        which in 0usize..4,
        frac in (0.1f64..0.9, 0.1f64..0.9, 0.2f64..1.0, 0.2f64..1.0),
        glyphs in 1usize..6,
        seed in any::<u64>(),
    ) {
        let q = quadrant(w, h, TIE_ORDER[which]).rect;
        let bw = ((q.w as f64 * frac.2 * 0.5) as u32).max(2);
        let bh = ((q.h as f64 * frac.3 * 0.5) as u32).max(2);
        let bx = q.x + ((q.w - bw) as f64 * frac.0) as u32;
        let by = q.y + ((q.h - bh) as f64 * frac.1) as u32;
        let mut img = RasterImage::filled(w, h, GRAY);
        img.fill_rect(bx, by, bw, bh, DARK);
        let mask = largest_contour(&img);
        prop_assert_eq!(mask.area(), (bw * bh) as usize);
        let chosen = select_quadrant(&mask);
        prop_assert_ne!(chosen.tag, TIE_ORDER[which]);
        match plan_placement(&chosen, glyphs, (w, h), seed) {
            Ok(p) => prop_assert_eq!(mask.count_in(&p.bounds), 0),
            Err(LayoutError::TooSmall { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn placement_stays_inside_quadrant_margin(
        w in 20u32..1200,
        h in 20u32..900,
        tag in 0usize..4,
        glyphs in 1usize..9,
        seed in any::<u64>(),
    ) {
        let q = quadrant(w, h, TIE_ORDER[tag]);
        let m = placement_margin(w, h);
        match plan_placement(&q, glyphs, (w, h), seed) {
            Ok(p) => {
                let b = p.bounds;
                prop_assert!(b.x >= q.rect.x + m && b.y >= q.rect.y + m);
                prop_assert!(b.x + b.w + m <= q.rect.x + q.rect.w);
                prop_assert!(b.y + b.h + m <= q.rect.y + q.rect.h);
                prop_assert!(p.glyph_height >= MIN_GLYPH_PX);
                prop_assert!(p.glyph_height as f64 <= 0.14 * h as f64 + 1e-9);
                prop_assert!(p.angle.abs() <= MAX_ANGLE_DEG);
                prop_assert_eq!(plan_placement(&q, glyphs, (w, h), seed).unwrap(), p);
            }
            Err(LayoutError::TooSmall { quadrant, .. }) => prop_assert_eq!(quadrant, q.tag),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

#[test]
fn angles_are_centred_and_heights_in_range() {
    let (w, h) = (1000, 1000);
    let q = quadrant(w, h, QuadrantTag::BR);
    let n = 10_000u64;
    let mut sum = 0.0;
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for seed in 1..=n {
        let p = plan_placement(&q, 1, (w, h), seed).unwrap();
        assert!(p.angle.abs() <= MAX_ANGLE_DEG);
        assert!((80..=140).contains(&p.glyph_height), "{}", p.glyph_height);
        sum += p.angle;
        lo = lo.min(p.angle);
        hi = hi.max(p.angle);
    }
    let mean = sum / n as f64;
    assert!(mean.abs() <= 0.5, "mean angle {mean}");
    assert!(lo < -9.5 && hi > 9.5, "angles span [{lo}, {hi}]");
}
