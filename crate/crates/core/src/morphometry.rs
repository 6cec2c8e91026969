//! Per-cell measurements: bounding-box length and width, pixel area, and
//! intensity statistics over the mask.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::GrayImage;
use crate::masks::Instance;

/// The six quantities measured for every cell.
///
/// Length is the bounding-box height and width the bounding-box width, both
/// axis-aligned. The mean intensity keeps full precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub length: u32,
    pub width: u32,
    pub area: u64,
    pub min_intensity: u8,
    pub mean_intensity: f64,
    pub max_intensity: u8,
}

impl Measurements {
    /// Values in report order: length, width, area, min, mean, max intensity.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.length as f64,
            self.width as f64,
            self.area as f64,
            self.min_intensity as f64,
            self.mean_intensity,
            self.max_intensity as f64,
        ]
    }
}

pub fn measure_instance(inst: &Instance, img: &GrayImage) -> Result<Measurements> {
    let mask = inst.mask();
    if mask.dims() != img.dims() {
        return Err(Error::mismatch(mask.dims(), img.dims()));
    }
    let bbox = inst.bbox();
    let (mut lo, mut hi, mut sum, mut count) = (u8::MAX, u8::MIN, 0u64, 0u64);
    for row in bbox.y..bbox.bottom() {
        for col in bbox.x..bbox.right() {
            if mask.get(row, col) {
                let v = img.get(row, col);
                lo = lo.min(v);
                hi = hi.max(v);
                sum += v as u64;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(Measurements {
        length: bbox.h as u32,
        width: bbox.w as u32,
        area: count,
        min_intensity: lo,
        mean_intensity: sum as f64 / count as f64,
        max_intensity: hi,
    })
}

/// Measures every instance; records come back ordered by id.
pub fn measure_all(instances: &[Instance], img: &GrayImage) -> Result<Vec<(u32, Measurements)>> {
    let mut out = instances
        .iter()
        .map(|inst| {
            measure_instance(inst, img)
                .map(|m| (inst.id(), m))
                .map_err(|e| Error::InInstance {
                    id: inst.id(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}
