//! Binary-mask primitives: connected components, bounding boxes, area and IoU.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major boolean raster marking one instance's pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

/// Tight axis-aligned box over the foreground of a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BBox {
    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    /// Overlapping region of two boxes, if any.
    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x0 < x1 && y0 < y1).then(|| BBox {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }
}

/// Pixel adjacency used for component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::InvalidValue(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidValue(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    /// Tight bounding box of the foreground.
    pub fn bounding_box(&self) -> Result<BBox> {
        let mut min_row = usize::MAX;
        let mut max_row = 0;
        let mut min_col = usize::MAX;
        let mut max_col = 0;
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let (row, col) = (i / self.width, i % self.width);
            min_row = min_row.min(row);
            max_row = max_row.max(row);
            min_col = min_col.min(col);
            max_col = max_col.max(col);
        }
        if min_row == usize::MAX {
            return Err(Error::EmptyMask);
        }
        Ok(BBox {
            x: min_col,
            y: min_row,
            w: max_col - min_col + 1,
            h: max_row - min_row + 1,
        })
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::mismatch(self.dims(), other.dims()));
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count() as u64)
    }

    /// Intersection over union; zero when both masks are empty.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64> {
        self.check_dims(other)?;
        let (mut inter, mut union) = (0u64, 0u64);
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as u64;
            union += (a || b) as u64;
        }
        Ok(ratio(inter, union))
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_dims(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// Clears every pixel that is set in `other`.
    pub fn subtract(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_dims(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= !b;
        }
        Ok(())
    }

    /// Shifts the foreground by (dx, dy); pixels leaving the canvas are dropped.
    pub fn translate(&self, dx: isize, dy: isize) -> BinaryMask {
        let mut out = BinaryMask::new(self.width, self.height);
        for row in 0..self.height {
            for col in 0..self.width {
                if !self.get(row, col) {
                    continue;
                }
                let (r, c) = (row as isize + dy, col as isize + dx);
                if r >= 0 && c >= 0 && (r as usize) < self.height && (c as usize) < self.width {
                    out.set(r as usize, c as usize, true);
                }
            }
        }
        out
    }

    /// Nearest-neighbour resize with center-aligned sampling.
    pub fn resize_nearest(&self, out_w: usize, out_h: usize) -> Result<BinaryMask> {
        if out_w == 0 || out_h == 0 {
            return Err(Error::ZeroDimension(out_w, out_h));
        }
        if (out_w, out_h) == self.dims() {
            return Ok(self.clone());
        }
        let cols = crate::image_io::nearest_indices(self.width, out_w);
        let rows = crate::image_io::nearest_indices(self.height, out_h);
        Ok(BinaryMask::from_fn(out_w, out_h, |r, c| {
            self.get(rows[r], cols[c])
        }))
    }

    /// Morphological dilation with a (2r+1)x(2r+1) square structuring element.
    pub fn dilate(&self, radius: usize) -> BinaryMask {
        self.square_filter(radius, false)
    }

    /// Morphological erosion with a (2r+1)x(2r+1) square structuring element.
    /// Pixels outside the canvas count as background.
    pub fn erode(&self, radius: usize) -> BinaryMask {
        self.square_filter(radius, true)
    }

    // Separable box min/max: a row pass followed by a column pass.
    fn square_filter(&self, radius: usize, erode: bool) -> BinaryMask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = self.dims();
        let pass = |get: &dyn Fn(usize) -> bool, len: usize| -> Vec<bool> {
            let mut prefix = vec![0usize; len + 1];
            for i in 0..len {
                prefix[i + 1] = prefix[i] + get(i) as usize;
            }
            (0..len)
                .map(|i| {
                    let lo = i.saturating_sub(radius);
                    let hi = (i + radius + 1).min(len);
                    let count = prefix[hi] - prefix[lo];
                    if erode {
                        i >= radius && i + radius < len && count == 2 * radius + 1
                    } else {
                        count > 0
                    }
                })
                .collect()
        };
        let mut tmp = vec![false; w * h];
        for row in 0..h {
            let line = pass(&|c| self.bits[row * w + c], w);
            tmp[row * w..(row + 1) * w].copy_from_slice(&line);
        }
        let mut out = vec![false; w * h];
        for col in 0..w {
            let line = pass(&|r| tmp[r * w + col], h);
            for (row, v) in line.into_iter().enumerate() {
                out[row * w + col] = v;
            }
        }
        BinaryMask {
            width: w,
            height: h,
            bits: out,
        }
    }

    /// Foreground pixels with at least one 4-neighbour in the background
    /// (out-of-canvas neighbours count as background).
    pub fn boundary(&self) -> BinaryMask {
        let (w, h) = self.dims();
        BinaryMask::from_fn(w, h, |row, col| {
            if !self.get(row, col) {
                return false;
            }
            row == 0
                || col == 0
                || row + 1 == h
                || col + 1 == w
                || !self.get(row - 1, col)
                || !self.get(row + 1, col)
                || !self.get(row, col - 1)
                || !self.get(row, col + 1)
        })
    }

    /// Binary PGM (P5, maxval 255) with foreground written as 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }
}

pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One segmented cell: a nonempty mask with its cached bounding box and area.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    id: u32,
    mask: BinaryMask,
    bbox: BBox,
    area: u64,
}

impl Instance {
    pub fn new(id: u32, mask: BinaryMask) -> Result<Self> {
        let bbox = mask.bounding_box()?;
        let area = mask.area();
        Ok(Instance {
            id,
            mask,
            bbox,
            area,
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    pub fn into_mask(self) -> BinaryMask {
        self.mask
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn area(&self) -> u64 {
        self.area
    }

    pub fn with_id(mut self, id: u32) -> Self {
        self.id = id;
        self
    }

    /// IoU restricted to the overlap of the two bounding boxes.
    pub fn iou(&self, other: &Instance) -> Result<f64> {
        self.mask.check_dims(&other.mask)?;
        let inter = match self.bbox.intersect(&other.bbox) {
            None => 0,
            Some(b) => {
                let mut n = 0u64;
                for row in b.y..b.bottom() {
                    for col in b.x..b.right() {
                        n += (self.mask.get(row, col) && other.mask.get(row, col)) as u64;
                    }
                }
                n
            }
        };
        Ok(ratio(inter, self.area + other.area - inter))
    }
}

/// Foreground pixel count.
pub fn area(mask: &BinaryMask) -> u64 {
    mask.area()
}

pub fn bounding_box(mask: &BinaryMask) -> Result<BBox> {
    mask.bounding_box()
}

pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.iou(b)
}

/// Union of all instance masks on a `width` x `height` canvas.
pub fn union_mask(instances: &[Instance], width: usize, height: usize) -> Result<BinaryMask> {
    let mut out = BinaryMask::new(width, height);
    for inst in instances {
        out.union_with(inst.mask())?;
    }
    Ok(out)
}

/// Splits a mask into maximal connected foreground regions.
///
/// Ids start at 1 and follow the raster-scan order of each component's
/// first pixel.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Instance> {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };
    let mut next = 1u32;
    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        let label = next;
        next += 1;
        let mut component = BinaryMask::new(w, h);
        labels[start] = label;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            component.bits[i] = true;
            let (row, col) = ((i / w) as isize, (i % w) as isize);
            for &(dr, dc) in offsets {
                let (r, c) = (row + dr, col + dc);
                if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
                    continue;
                }
                let j = r as usize * w + c as usize;
                if mask.bits[j] && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        out.push(Instance::new(label, component).expect("component contains its seed pixel"));
    }
    out
}
