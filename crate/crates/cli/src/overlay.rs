//! Side-by-side style overlays: matched boundaries green, missed ground
//! truth blue, spurious predictions red, drawn over the grayscale image.

use neurometry_core::image_io::{encode_png_rgb, GrayImage};
use neurometry_core::masks::Instance;
use neurometry_core::matching::MatchResult;
use neurometry_core::Error;

pub const GREEN: [u8; 3] = [0, 255, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];
pub const RED: [u8; 3] = [255, 0, 0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn paint(&mut self, inst: &Instance, color: [u8; 3]) {
        let edge = inst.mask().boundary();
        let b = inst.bbox();
        for row in b.y..b.bottom() {
            for col in b.x..b.right() {
                if edge.get(row, col) {
                    let i = 3 * (row * self.width + col);
                    self.data[i..i + 3].copy_from_slice(&color);
                }
            }
        }
    }

    pub fn to_png(&self) -> Vec<u8> {
        encode_png_rgb(self.width, self.height, &self.data)
    }
}

/// Draws instance boundaries (foreground pixels 4-adjacent to background)
/// over the image. Later layers win: matched, then missed, then spurious.
pub fn render_overlay(
    img: &GrayImage,
    m: &MatchResult,
    gt: &[Instance],
    pred: &[Instance],
) -> Result<RgbImage, Error> {
    if let Some(bad) = gt
        .iter()
        .chain(pred)
        .find(|i| i.mask().dims() != img.dims())
    {
        return Err(Error::DimensionMismatch {
            left_w: img.width(),
            left_h: img.height(),
            right_w: bad.mask().width(),
            right_h: bad.mask().height(),
        });
    }
    let mut out = RgbImage {
        width: img.width(),
        height: img.height(),
        data: img.pixels().iter().flat_map(|&v| [v, v, v]).collect(),
    };
    let find = |list: &[Instance], id: u32| list.iter().find(|i| i.id() == id).cloned();
    for pair in &m.pairs {
        for inst in [find(gt, pair.gt_id), find(pred, pair.pred_id)]
            .into_iter()
            .flatten()
        {
            out.paint(&inst, GREEN);
        }
    }
    for id in &m.unmatched_gt {
        if let Some(inst) = find(gt, *id) {
            out.paint(&inst, BLUE);
        }
    }
    for id in &m.unmatched_pred {
        if let Some(inst) = find(pred, *id) {
            out.paint(&inst, RED);
        }
    }
    Ok(out)
}
