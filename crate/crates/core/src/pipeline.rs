//! Placement and rendering of a chosen term onto a photo.

use crate::compositor::{composite, render_text, GlyphPatch, StyleConfig, Typeface};
use crate::layout::{largest_contour, plan_placement, select_quadrant, ContourMask, PlacementBox};
use crate::raster::RasterImage;
use crate::Error;

#[derive(Debug, Clone)]
pub struct Annotation {
    pub image: RasterImage,
    pub placement: PlacementBox,
    pub mask: ContourMask,
    pub patch: GlyphPatch,
}

/// Finds the quadrant least covered by the photo's largest region, plans the
/// text box there for `seed`, and composites `text` into it.
pub fn annotate_photo(
    img: &RasterImage,
    text: &str,
    face: &Typeface,
    style: &StyleConfig,
    seed: u64,
) -> Result<Annotation, Error> {
    let mask = largest_contour(img);
    let quadrant = select_quadrant(&mask);
    let placement = plan_placement(
        &quadrant,
        text.chars().count(),
        (img.width(), img.height()),
        seed,
    )?;
    let patch = render_text(text, face, style, &placement)?;
    let image = composite(img, &patch, style);
    Ok(Annotation {
        image,
        placement,
        mask,
        patch,
    })
}
