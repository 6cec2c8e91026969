//! Seeded synthetic neuron-like scenes and prediction perturbations.
//!
//! All randomness comes from [`SplitMix64`]:
//!
//! ```text
//! state = state + 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! return z ^ (z >> 31)
//! ```
//!
//! (wrapping 64-bit arithmetic). A unit float is `(next >> 11) * 2^-53`, a
//! float in `[a, b)` is `a + (b - a) * unit`, and an integer in `[lo, hi]`
//! is `lo + next % (hi - lo + 1)`.
//!
//! A scene draws its cells one after another. Per placement attempt the
//! draws are, in order: soma center x then y (kept at least the larger
//! radius away from the border), the two soma radii, the soma rotation in
//! `[0, pi)`, the cell intensity, the neurite count, and per neurite its
//! direction in `[0, 2 pi)`, length, and bend in `[-0.5, 0.5)` radians
//! applied at the neurite's midpoint. An attempt is rejected when its soma
//! (grown by one pixel) touches an existing cell or its neurites touch an
//! existing soma (grown by one pixel); after 200 rejected attempts
//! generation fails. Neurites may cross earlier neurites; the later cell
//! wins those pixels. Finally one noise value in `[-a, a]` is drawn per
//! pixel in raster order and added to the background or cell intensity.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::GrayImage;
use crate::masks::{BBox, BinaryMask, Instance};

const MAX_ATTEMPTS: usize = 200;
const SPURIOUS_RADIUS: (u64, u64) = (2, 4);

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in [lo, hi].
    pub fn int_in(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.next_u64() % (hi - lo + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub n_cells: usize,
    pub soma_radius_range: [f64; 2],
    pub neurites_per_cell: [u32; 2],
    pub neurite_length_range: [f64; 2],
    pub neurite_thickness: f64,
    pub foreground_intensity_range: [u8; 2],
    pub background_level: u8,
    pub noise_amplitude: u8,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: 256,
            height: 256,
            n_cells: 8,
            soma_radius_range: [7.0, 12.0],
            neurites_per_cell: [1, 3],
            neurite_length_range: [15.0, 40.0],
            neurite_thickness: 2.0,
            foreground_intensity_range: [120, 230],
            background_level: 20,
            noise_amplitude: 10,
            seed: 1,
        }
    }
}

impl SceneConfig {
    /// Collects every invalid field instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.width < 32 {
            errs.push(format!("width: must be at least 32, got {}", self.width));
        }
        if self.height < 32 {
            errs.push(format!("height: must be at least 32, got {}", self.height));
        }
        let [r0, r1] = self.soma_radius_range;
        if !(r0.is_finite() && r1.is_finite() && r0 >= 1.0 && r0 <= r1) {
            errs.push(format!(
                "soma_radius_range: need 1 <= lo <= hi, got [{r0}, {r1}]"
            ));
        } else if 2.0 * r1 >= self.width.min(self.height) as f64 {
            errs.push("soma_radius_range: soma does not fit on the canvas".into());
        }
        let [n0, n1] = self.neurites_per_cell;
        if n0 > n1 {
            errs.push(format!("neurites_per_cell: lo {n0} exceeds hi {n1}"));
        }
        let [l0, l1] = self.neurite_length_range;
        if !(l0.is_finite() && l1.is_finite() && l0 >= 0.0 && l0 <= l1) {
            errs.push(format!(
                "neurite_length_range: need 0 <= lo <= hi, got [{l0}, {l1}]"
            ));
        }
        if !(self.neurite_thickness.is_finite() && self.neurite_thickness > 0.0) {
            errs.push(format!(
                "neurite_thickness: must be positive, got {}",
                self.neurite_thickness
            ));
        }
        let [f0, f1] = self.foreground_intensity_range;
        if f0 > f1 {
            errs.push(format!(
                "foreground_intensity_range: lo {f0} exceeds hi {f1}"
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbSpec {
    pub dilate_px: usize,
    pub erode_px: usize,
    pub drop_prob: f64,
    pub split_prob: f64,
    pub spurious_count: usize,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.dilate_px > 0 && self.erode_px > 0 {
            errs.push("dilate_px/erode_px: at most one may be nonzero".to_string());
        }
        for (name, p) in [
            ("drop_prob", self.drop_prob),
            ("split_prob", self.split_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                errs.push(format!("{name}: must lie in [0, 1], got {p}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Pixels whose centers fall inside a rotated ellipse.
fn ellipse_mask(w: usize, h: usize, cx: f64, cy: f64, rx: f64, ry: f64, theta: f64) -> BinaryMask {
    let (s, c) = theta.sin_cos();
    let reach = rx.max(ry);
    let mut m = BinaryMask::new(w, h);
    for (row, col) in pixels_near(w, h, cx - reach, cy - reach, cx + reach, cy + reach) {
        let dx = col as f64 + 0.5 - cx;
        let dy = row as f64 + 0.5 - cy;
        let u = (dx * c + dy * s) / rx;
        let v = (-dx * s + dy * c) / ry;
        if u * u + v * v <= 1.0 {
            m.set(row, col, true);
        }
    }
    m
}

/// Pixels whose centers lie within `half` of the segment a-b.
fn stroke_segment(m: &mut BinaryMask, a: (f64, f64), b: (f64, f64), half: f64) {
    let (w, h) = m.dims();
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let cells = pixels_near(
        w,
        h,
        a.0.min(b.0) - half,
        a.1.min(b.1) - half,
        a.0.max(b.0) + half,
        a.1.max(b.1) + half,
    );
    for (row, col) in cells {
        let (px, py) = (col as f64 + 0.5, row as f64 + 0.5);
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
        };
        let (qx, qy) = (a.0 + t * dx - px, a.1 + t * dy - py);
        if qx * qx + qy * qy <= half * half {
            m.set(row, col, true);
        }
    }
}

/// Canvas pixels whose centers may fall in the given box.
fn pixels_near(
    w: usize,
    h: usize,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
) -> impl Iterator<Item = (usize, usize)> {
    let clamp = |v: f64, hi: usize| v.max(0.0).min(hi as f64) as usize;
    let (c0, c1) = (clamp(x0.floor() - 1.0, w), clamp(x1.ceil() + 1.0, w));
    let (r0, r1) = (clamp(y0.floor() - 1.0, h), clamp(y1.ceil() + 1.0, h));
    (r0..r1).flat_map(move |r| (c0..c1).map(move |c| (r, c)))
}

fn touches(a: &BinaryMask, b: &BinaryMask) -> bool {
    a.bits().iter().zip(b.bits()).any(|(&x, &y)| x && y)
}

/// Draws a scene. Instance ids follow drawing order starting at 1, and
/// instances are pairwise disjoint.
pub fn generate_scene(cfg: &SceneConfig) -> Result<(GrayImage, Vec<Instance>)> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let mut rng = SplitMix64::new(cfg.seed);
    let mut occupied = BinaryMask::new(w, h);
    let mut somas_grown = BinaryMask::new(w, h);
    // (mask, bounding box when drawn, intensity)
    let mut cells: Vec<(BinaryMask, BBox, u8)> = Vec::with_capacity(cfg.n_cells);
    let [r_lo, r_hi] = cfg.soma_radius_range;

    while cells.len() < cfg.n_cells {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            let cx = rng.uniform(r_hi, w as f64 - r_hi);
            let cy = rng.uniform(r_hi, h as f64 - r_hi);
            let rx = rng.uniform(r_lo, r_hi);
            let ry = rng.uniform(r_lo, r_hi);
            let theta = rng.uniform(0.0, PI);
            let [f_lo, f_hi] = cfg.foreground_intensity_range;
            let intensity = rng.int_in(f_lo as u64, f_hi as u64) as u8;
            let [n_lo, n_hi] = cfg.neurites_per_cell;
            let n_neurites = rng.int_in(n_lo as u64, n_hi as u64);

            let soma = ellipse_mask(w, h, cx, cy, rx, ry, theta);
            let mut neurites = BinaryMask::new(w, h);
            let half = cfg.neurite_thickness / 2.0;
            for _ in 0..n_neurites {
                let dir = rng.uniform(0.0, 2.0 * PI);
                let len = rng.uniform(cfg.neurite_length_range[0], cfg.neurite_length_range[1]);
                let bend = rng.uniform(-0.5, 0.5);
                let mid = (cx + 0.5 * len * dir.cos(), cy + 0.5 * len * dir.sin());
                let end = (
                    mid.0 + 0.5 * len * (dir + bend).cos(),
                    mid.1 + 0.5 * len * (dir + bend).sin(),
                );
                stroke_segment(&mut neurites, (cx, cy), mid, half);
                stroke_segment(&mut neurites, mid, end, half);
            }
            let soma_grown = soma.dilate(1);
            if soma.is_empty()
                || touches(&soma_grown, &occupied)
                || touches(&neurites, &somas_grown)
            {
                continue;
            }
            let mut shape = soma;
            shape.union_with(&neurites)?;
            let bbox = shape.bounding_box()?;
            for (earlier, earlier_box, _) in cells.iter_mut() {
                if let Some(overlap) = bbox.intersect(earlier_box) {
                    for row in overlap.y..overlap.bottom() {
                        for col in overlap.x..overlap.right() {
                            if shape.get(row, col) {
                                earlier.set(row, col, false);
                            }
                        }
                    }
                }
            }
            occupied.union_with(&shape)?;
            somas_grown.union_with(&soma_grown)?;
            cells.push((shape, bbox, intensity));
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::Placement {
                placed: cells.len(),
                requested: cfg.n_cells,
            });
        }
    }

    let mut base = vec![cfg.background_level as i32; w * h];
    for (mask, _, intensity) in &cells {
        for (i, _) in mask.bits().iter().enumerate().filter(|(_, &b)| b) {
            base[i] = *intensity as i32;
        }
    }
    let amp = cfg.noise_amplitude as u64;
    let pixels = base
        .into_iter()
        .map(|v| {
            let noise = rng.int_in(0, 2 * amp) as i32 - amp as i32;
            (v + noise).clamp(0, 255) as u8
        })
        .collect();
    let image = GrayImage::new(w, h, pixels)?;
    let instances = cells
        .into_iter()
        .enumerate()
        .map(|(i, (mask, _, _))| Instance::new(i as u32 + 1, mask))
        .collect::<Result<Vec<_>>>()?;
    Ok((image, instances))
}

/// Pixels whose centers lie within `radius` of (cx, cy).
pub fn disk_mask(w: usize, h: usize, cx: f64, cy: f64, radius: f64) -> BinaryMask {
    ellipse_mask(w, h, cx, cy, radius, radius, 0.0)
}

/// Applies prediction-style errors to ground-truth instances.
///
/// Per instance, in order: one draw decides dropping, one decides
/// splitting; a kept instance is dilated or eroded (square element), and a
/// split one is cut at its bounding-box midline across the longer side
/// into two pieces. Instances that erode away are omitted. Then
/// `spurious_count` disks (radius 2 to 4, center anywhere on the canvas:
/// draws radius, x, y) are appended. Output ids are renumbered from 1.
pub fn perturb(
    gt: &[Instance],
    spec: &PerturbSpec,
    canvas: (usize, usize),
) -> Result<Vec<Instance>> {
    spec.validate()?;
    let (w, h) = canvas;
    let mut rng = SplitMix64::new(spec.seed);
    let mut masks = Vec::new();
    for inst in gt {
        let drop = rng.unit() < spec.drop_prob;
        let split = rng.unit() < spec.split_prob;
        if drop {
            continue;
        }
        let mask = if spec.dilate_px > 0 {
            inst.mask().dilate(spec.dilate_px)
        } else {
            inst.mask().erode(spec.erode_px)
        };
        let Ok(bbox) = mask.bounding_box() else {
            continue;
        };
        if split && (bbox.w > 1 || bbox.h > 1) {
            let (mw, mh) = mask.dims();
            let (first, second) = if bbox.w >= bbox.h {
                let cut = bbox.x + bbox.w / 2;
                (
                    BinaryMask::from_fn(mw, mh, |r, c| c < cut && mask.get(r, c)),
                    BinaryMask::from_fn(mw, mh, |r, c| c >= cut && mask.get(r, c)),
                )
            } else {
                let cut = bbox.y + bbox.h / 2;
                (
                    BinaryMask::from_fn(mw, mh, |r, c| r < cut && mask.get(r, c)),
                    BinaryMask::from_fn(mw, mh, |r, c| r >= cut && mask.get(r, c)),
                )
            };
            masks.extend([first, second].into_iter().filter(|m| !m.is_empty()));
        } else {
            masks.push(mask);
        }
    }
    for _ in 0..spec.spurious_count {
        let r = rng.int_in(SPURIOUS_RADIUS.0, SPURIOUS_RADIUS.1) as f64;
        let cx = rng.uniform(0.0, w as f64);
        let cy = rng.uniform(0.0, h as f64);
        let blob = disk_mask(w, h, cx, cy, r);
        if !blob.is_empty() {
            masks.push(blob);
        }
    }
    masks
        .into_iter()
        .enumerate()
        .map(|(i, m)| Instance::new(i as u32 + 1, m))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 0 of the reference SplitMix64.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn zero_cells_gives_background_only() {
        let cfg = SceneConfig {
            n_cells: 0,
            noise_amplitude: 3,
            background_level: 50,
            ..SceneConfig::default()
        };
        let (img, cells) = generate_scene(&cfg).unwrap();
        assert!(cells.is_empty());
        assert!(img.pixels().iter().all(|&p| (47..=53).contains(&p)));
    }

    #[test]
    fn scenes_are_deterministic() {
        let cfg = SceneConfig::default();
        let a = generate_scene(&cfg).unwrap();
        let b = generate_scene(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&SceneConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn cells_are_disjoint_and_fill_the_union() {
        let cfg = SceneConfig {
            n_cells: 3,
            ..SceneConfig::default()
        };
        let (_, cells) = generate_scene(&cfg).unwrap();
        assert_eq!(cells.len(), 3);
        let union = crate::masks::union_mask(&cells, cfg.width, cfg.height).unwrap();
        let total: u64 = cells.iter().map(Instance::area).sum();
        assert_eq!(total, union.area());
    }

    #[test]
    fn overcrowded_canvas_reports_progress() {
        let cfg = SceneConfig {
            width: 32,
            height: 32,
            n_cells: 50,
            soma_radius_range: [6.0, 6.0],
            neurites_per_cell: [0, 0],
            ..SceneConfig::default()
        };
        match generate_scene(&cfg) {
            Err(Error::Placement {
                placed,
                requested: 50,
            }) => assert!(placed < 50 && placed > 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_fields_are_listed() {
        let cfg = SceneConfig {
            width: 8,
            neurites_per_cell: [3, 1],
            ..SceneConfig::default()
        };
        let Err(Error::Config(errs)) = cfg.validate() else {
            panic!("expected config error");
        };
        assert!(errs.iter().any(|e| e.starts_with("width")));
        assert!(errs.iter().any(|e| e.starts_with("neurites_per_cell")));
        let spec = PerturbSpec {
            dilate_px: 1,
            erode_px: 1,
            drop_prob: 2.0,
            ..PerturbSpec::default()
        };
        let Err(Error::Config(errs)) = spec.validate() else {
            panic!("expected config error");
        };
        assert_eq!(errs.len(), 2);
    }

    fn two_cells() -> Vec<Instance> {
        let cfg = SceneConfig {
            n_cells: 2,
            ..SceneConfig::default()
        };
        generate_scene(&cfg).unwrap().1
    }

    #[test]
    fn identity_and_drop_all() {
        let gt = two_cells();
        assert_eq!(
            perturb(&gt, &PerturbSpec::default(), (256, 256)).unwrap(),
            gt
        );
        let spec = PerturbSpec {
            drop_prob: 1.0,
            ..PerturbSpec::default()
        };
        assert!(perturb(&gt, &spec, (256, 256)).unwrap().is_empty());
    }

    #[test]
    fn erosion_of_a_disk_is_a_subset() {
        let disk = Instance::new(1, disk_mask(20, 20, 10.0, 10.0, 5.0)).unwrap();
        let spec = PerturbSpec {
            erode_px: 1,
            ..PerturbSpec::default()
        };
        let pred = perturb(std::slice::from_ref(&disk), &spec, (20, 20)).unwrap();
        let eroded = &pred[0];
        assert!(eroded.area() < disk.area());
        assert_eq!(
            eroded.mask().intersection_count(disk.mask()).unwrap(),
            eroded.area()
        );
        assert_eq!(
            eroded.iou(&disk).unwrap(),
            eroded.area() as f64 / disk.area() as f64
        );
    }

    #[test]
    fn split_and_spurious() {
        let gt = two_cells();
        let spec = PerturbSpec {
            split_prob: 1.0,
            spurious_count: 2,
            seed: 9,
            ..PerturbSpec::default()
        };
        let pred = perturb(&gt, &spec, (256, 256)).unwrap();
        assert_eq!(pred.len(), 6);
        let halves: u64 = pred[..4].iter().map(Instance::area).sum();
        assert_eq!(halves, gt.iter().map(Instance::area).sum::<u64>());
        assert!(pred[4..].iter().all(|b| b.bbox().w <= 9 && b.bbox().h <= 9));
        let ids: Vec<u32> = pred.iter().map(Instance::id).collect();
        assert_eq!(ids, vec![1, 2, 3, 4, 5, 6]);
    }
}
