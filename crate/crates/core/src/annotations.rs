//! Annotation documents and their conversion to binary instance masks.
//!
//! Three JSON layouts are understood:
//!
//! * canonical polygons:
//!   `{"image": {"width": W, "height": H}, "instances": [{"id": 1, "class": "neuron", "rings": [[[x, y], ...]]}]}`
//! * a Darwin-style export, of which only `image.{width,height}` and
//!   `annotations[].polygon.path[].{x,y}` (or `polygon.paths`) are read;
//! * RLE masks: `{"width": W, "height": H, "runs": [[value, length], ...]}`
//!   for a single binary raster, or
//!   `{"width": W, "height": H, "instances": [{"id": 1, "runs": [...]}]}`
//!   for one run list per instance.
//!
//! Coordinates are in pixels, x to the right and y downward, with the origin
//! at the top-left corner of the top-left pixel.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::masks::{connected_components, BinaryMask, Connectivity, Instance};

pub type Point = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonInstance {
    pub id: u32,
    pub class_name: String,
    pub rings: Vec<Vec<Point>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    pub image_width: usize,
    pub image_height: usize,
    pub instances: Vec<PolygonInstance>,
}

/// One instance of a multi-instance RLE document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleInstance {
    pub id: u32,
    pub runs: Vec<(u8, u64)>,
}

/// Any supported annotation or prediction file.
#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Polygons(AnnotationSet),
    Rle {
        width: usize,
        height: usize,
        runs: Vec<(u8, u64)>,
    },
    RleInstances {
        width: usize,
        height: usize,
        instances: Vec<RleInstance>,
    },
}

/// Instances decoded from a document, plus the ids of any instance whose
/// mask came out empty (fully clipped, or vanished when resized).
#[derive(Debug, Clone)]
pub struct LoadedInstances {
    pub width: usize,
    pub height: usize,
    pub instances: Vec<Instance>,
    pub dropped: Vec<u32>,
}

fn annotation_err(msg: impl Into<String>) -> Error {
    Error::Annotation(msg.into())
}

fn instance_err(index: usize, msg: impl Into<String>) -> Error {
    Error::Instance {
        index,
        reason: msg.into(),
    }
}

fn get_dim(obj: &Value, key: &str, ctx: &str) -> Result<usize> {
    let v = obj
        .get(key)
        .ok_or_else(|| annotation_err(format!("missing key \"{ctx}{key}\"")))?;
    v.as_u64()
        .filter(|&n| n >= 1)
        .map(|n| n as usize)
        .ok_or_else(|| annotation_err(format!("\"{ctx}{key}\" must be a positive integer")))
}

fn get_id(obj: &Value, index: usize) -> Result<u32> {
    let v = obj
        .get("id")
        .ok_or_else(|| instance_err(index, "missing key \"id\""))?;
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| instance_err(index, "\"id\" must be a non-negative 32-bit integer"))
}

fn coord(v: &Value, index: usize) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| instance_err(index, "vertex coordinates must be numbers"))?;
    if !x.is_finite() || x < -1.0 {
        return Err(instance_err(
            index,
            format!("vertex coordinate {x} below -1"),
        ));
    }
    Ok(x)
}

fn check_rings(rings: &[Vec<Point>], index: usize) -> Result<()> {
    if rings.is_empty() {
        return Err(instance_err(index, "no rings"));
    }
    if let Some(bad) = rings.iter().find(|r| r.len() < 3) {
        return Err(instance_err(
            index,
            format!("ring with {} vertices (need at least 3)", bad.len()),
        ));
    }
    Ok(())
}

fn check_unique(instances: &[PolygonInstance]) -> Result<()> {
    let mut seen = HashSet::new();
    for (index, inst) in instances.iter().enumerate() {
        if !seen.insert(inst.id) {
            return Err(Error::DuplicateId { id: inst.id, index });
        }
    }
    Ok(())
}

fn parse_canonical(doc: &Value) -> Result<AnnotationSet> {
    let image = doc
        .get("image")
        .ok_or_else(|| annotation_err("missing key \"image\""))?;
    let image_width = get_dim(image, "width", "image.")?;
    let image_height = get_dim(image, "height", "image.")?;
    let list = doc["instances"]
        .as_array()
        .ok_or_else(|| annotation_err("\"instances\" must be an array"))?;
    let mut instances = Vec::with_capacity(list.len());
    for (index, item) in list.iter().enumerate() {
        let id = get_id(item, index)?;
        let class_name = match item.get("class") {
            None => "neuron".to_string(),
            Some(v) => v
                .as_str()
                .ok_or_else(|| instance_err(index, "\"class\" must be a string"))?
                .to_string(),
        };
        let rings_v = item
            .get("rings")
            .ok_or_else(|| instance_err(index, "missing key \"rings\""))?
            .as_array()
            .ok_or_else(|| instance_err(index, "\"rings\" must be an array"))?;
        let mut rings = Vec::with_capacity(rings_v.len());
        for ring in rings_v {
            let ring = ring
                .as_array()
                .ok_or_else(|| instance_err(index, "each ring must be an array of [x, y]"))?;
            let mut pts = Vec::with_capacity(ring.len());
            for p in ring {
                match p.as_array().map(Vec::as_slice) {
                    Some([x, y]) => pts.push((coord(x, index)?, coord(y, index)?)),
                    _ => return Err(instance_err(index, "vertex must be a [x, y] pair")),
                }
            }
            rings.push(pts);
        }
        check_rings(&rings, index)?;
        instances.push(PolygonInstance {
            id,
            class_name,
            rings,
        });
    }
    check_unique(&instances)?;
    Ok(AnnotationSet {
        image_width,
        image_height,
        instances,
    })
}

fn parse_darwin_path(path: &Value, index: usize) -> Result<Vec<Point>> {
    let pts = path
        .as_array()
        .ok_or_else(|| instance_err(index, "polygon path must be an array"))?;
    pts.iter()
        .map(|p| {
            let x = p
                .get("x")
                .ok_or_else(|| instance_err(index, "vertex missing \"x\""))?;
            let y = p
                .get("y")
                .ok_or_else(|| instance_err(index, "vertex missing \"y\""))?;
            Ok((coord(x, index)?, coord(y, index)?))
        })
        .collect()
}

fn parse_darwin(doc: &Value) -> Result<AnnotationSet> {
    let image = doc
        .get("image")
        .ok_or_else(|| annotation_err("missing key \"image\""))?;
    let image_width = get_dim(image, "width", "image.")?;
    let image_height = get_dim(image, "height", "image.")?;
    let list = doc["annotations"]
        .as_array()
        .ok_or_else(|| annotation_err("\"annotations\" must be an array"))?;
    let mut instances = Vec::new();
    for (index, item) in list.iter().enumerate() {
        // Non-polygon annotations (tags, boxes) carry no mask.
        let Some(polygon) = item.get("polygon") else {
            continue;
        };
        let rings = if let Some(path) = polygon.get("path") {
            vec![parse_darwin_path(path, index)?]
        } else if let Some(paths) = polygon.get("paths").and_then(Value::as_array) {
            paths
                .iter()
                .map(|p| parse_darwin_path(p, index))
                .collect::<Result<_>>()?
        } else {
            return Err(instance_err(index, "polygon without \"path\" or \"paths\""));
        };
        check_rings(&rings, index)?;
        let class_name = item
            .get("name")
            .and_then(Value::as_str)
            .unwrap_or("neuron")
            .to_string();
        instances.push(PolygonInstance {
            id: instances.len() as u32 + 1,
            class_name,
            rings,
        });
    }
    Ok(AnnotationSet {
        image_width,
        image_height,
        instances,
    })
}

fn parse_runs(v: &Value, ctx: &str) -> Result<Vec<(u8, u64)>> {
    let list = v
        .as_array()
        .ok_or_else(|| annotation_err(format!("{ctx}\"runs\" must be an array")))?;
    list.iter()
        .map(|run| match run.as_array().map(Vec::as_slice) {
            Some([value, len]) => {
                let value = value
                    .as_u64()
                    .filter(|&b| b <= 1)
                    .ok_or_else(|| annotation_err(format!("{ctx}run value must be 0 or 1")))?;
                let len = len
                    .as_u64()
                    .ok_or_else(|| annotation_err(format!("{ctx}run length must be a count")))?;
                Ok((value as u8, len))
            }
            _ => Err(annotation_err(format!(
                "{ctx}run must be a [value, length] pair"
            ))),
        })
        .collect()
}

/// Parses an annotation set (canonical or Darwin-style polygons).
pub fn parse_annotations(text: &str) -> Result<AnnotationSet> {
    match parse_document(text)? {
        Document::Polygons(set) => Ok(set),
        _ => Err(annotation_err("expected a polygon annotation document")),
    }
}

/// Parses any supported document, telling the layouts apart by their keys.
pub fn parse_document(text: &str) -> Result<Document> {
    let doc: Value = serde_json::from_str(text)?;
    if !doc.is_object() {
        return Err(annotation_err("top-level value must be an object"));
    }
    if doc.get("annotations").is_some() {
        return parse_darwin(&doc).map(Document::Polygons);
    }
    if doc.get("image").is_some() {
        return parse_canonical(&doc).map(Document::Polygons);
    }
    let width = get_dim(&doc, "width", "")?;
    let height = get_dim(&doc, "height", "")?;
    if let Some(runs) = doc.get("runs") {
        let runs = parse_runs(runs, "")?;
        check_run_total(&runs, width, height)?;
        return Ok(Document::Rle {
            width,
            height,
            runs,
        });
    }
    let list = doc
        .get("instances")
        .and_then(Value::as_array)
        .ok_or_else(|| annotation_err("missing key \"image\", \"runs\" or \"instances\""))?;
    let mut instances = Vec::with_capacity(list.len());
    let mut seen = HashSet::new();
    for (index, item) in list.iter().enumerate() {
        let id = get_id(item, index)?;
        if !seen.insert(id) {
            return Err(Error::DuplicateId { id, index });
        }
        let runs = item
            .get("runs")
            .ok_or_else(|| instance_err(index, "missing key \"runs\""))?;
        let runs = parse_runs(runs, &format!("instance {index}: "))?;
        check_run_total(&runs, width, height).map_err(|e| instance_err(index, e.to_string()))?;
        instances.push(RleInstance { id, runs });
    }
    Ok(Document::RleInstances {
        width,
        height,
        instances,
    })
}

/// Canonical JSON encoding of an annotation set.
pub fn serialize_annotations(set: &AnnotationSet) -> String {
    let instances: Vec<Value> = set
        .instances
        .iter()
        .map(|inst| {
            let rings: Vec<Vec<[f64; 2]>> = inst
                .rings
                .iter()
                .map(|r| r.iter().map(|&(x, y)| [x, y]).collect())
                .collect();
            json!({"id": inst.id, "class": inst.class_name, "rings": rings})
        })
        .collect();
    json!({
        "image": {"width": set.image_width, "height": set.image_height},
        "instances": instances,
    })
    .to_string()
}

/// JSON for a single binary RLE mask.
pub fn serialize_rle(mask: &BinaryMask) -> String {
    json!({"width": mask.width(), "height": mask.height(), "runs": encode_rle(mask)}).to_string()
}

/// JSON for a list of instances, one run list each.
pub fn serialize_rle_instances(width: usize, height: usize, instances: &[Instance]) -> String {
    let list: Vec<RleInstance> = instances
        .iter()
        .map(|inst| RleInstance {
            id: inst.id(),
            runs: encode_rle(inst.mask()),
        })
        .collect();
    json!({"width": width, "height": height, "instances": list}).to_string()
}

fn check_run_total(runs: &[(u8, u64)], width: usize, height: usize) -> Result<()> {
    let actual = runs
        .iter()
        .try_fold(0u64, |acc, &(_, n)| acc.checked_add(n))
        .unwrap_or(u64::MAX);
    let expected = (width * height) as u64;
    if actual != expected {
        return Err(Error::RleLength { expected, actual });
    }
    Ok(())
}

/// Row-major run-length decoding.
pub fn decode_rle(runs: &[(u8, u64)], width: usize, height: usize) -> Result<BinaryMask> {
    check_run_total(runs, width, height)?;
    let mut bits = Vec::with_capacity(width * height);
    for &(value, len) in runs {
        if value > 1 {
            return Err(Error::InvalidValue(format!(
                "run value {value} is not 0 or 1"
            )));
        }
        bits.extend(std::iter::repeat_n(value == 1, len as usize));
    }
    BinaryMask::from_bits(width, height, bits)
}

/// Row-major run-length encoding with maximal runs.
pub fn encode_rle(mask: &BinaryMask) -> Vec<(u8, u64)> {
    let mut runs: Vec<(u8, u64)> = Vec::new();
    for &b in mask.bits() {
        let v = b as u8;
        match runs.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => runs.push((v, 1)),
        }
    }
    runs
}

/// Fills the pixels whose centers lie inside any ring under the nonzero
/// winding rule, clipped to a `width` x `height` canvas.
pub fn rasterize(inst: &PolygonInstance, width: usize, height: usize) -> Result<BinaryMask> {
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension(width, height));
    }
    let mut mask = BinaryMask::new(width, height);
    for ring in &inst.rings {
        fill_ring(&mut mask, ring);
    }
    Ok(mask)
}

fn fill_ring(mask: &mut BinaryMask, ring: &[Point]) {
    if ring.len() < 3 {
        return;
    }
    let (width, height) = mask.dims();
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in ring {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    // Rows whose center py = row + 0.5 satisfies min_y <= py < max_y.
    let row_lo = ((min_y - 0.5).ceil().max(0.0) as usize).min(height);
    let row_hi = ((max_y - 0.5).ceil().max(0.0) as usize).min(height);
    // Left of every vertex the winding is zero, right of every vertex too.
    let col_lo = ((min_x - 0.5).floor().max(0.0) as usize).min(width);
    let col_hi = ((max_x + 0.5).ceil().max(0.0) as usize).min(width);
    if row_lo >= row_hi || col_lo >= col_hi {
        return;
    }
    let mut diff = vec![0i32; col_hi - col_lo + 1];
    for row in row_lo..row_hi {
        let py = row as f64 + 0.5;
        diff.iter_mut().for_each(|d| *d = 0);
        for (i, &(x0, y0)) in ring.iter().enumerate() {
            let (x1, y1) = ring[(i + 1) % ring.len()];
            let dir = if y0 <= py && py < y1 {
                1
            } else if y1 <= py && py < y0 {
                -1
            } else {
                continue;
            };
            // Exact side test; true for a prefix of columns.
            let left = |col: usize| {
                let px = col as f64 + 0.5;
                let side = (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0);
                if dir > 0 {
                    side > 0.0
                } else {
                    side < 0.0
                }
            };
            let x_cross = x0 + (py - y0) * (x1 - x0) / (y1 - y0);
            let mut k = ((x_cross - 0.5).ceil().max(0.0) as usize).min(width);
            while k > 0 && !left(k - 1) {
                k -= 1;
            }
            while k < width && left(k) {
                k += 1;
            }
            if k > col_lo {
                diff[0] += dir;
                diff[k.min(col_hi) - col_lo] -= dir;
            }
        }
        let mut winding = 0;
        for col in col_lo..col_hi {
            winding += diff[col - col_lo];
            if winding != 0 {
                mask.set(row, col, true);
            }
        }
    }
}

/// Exact polygon form of a mask: one rectangle ring per maximal block of
/// identical horizontal runs on consecutive rows. Rasterizing the result
/// reproduces the mask pixel for pixel.
pub fn rings_from_mask(mask: &BinaryMask) -> Vec<Vec<Point>> {
    // (col_start, col_end, first_row) of blocks still growing downward.
    let mut open: Vec<(usize, usize, usize)> = Vec::new();
    let mut rings = Vec::new();
    let close = |(c0, c1, r0): (usize, usize, usize), r1: usize, rings: &mut Vec<Vec<Point>>| {
        let (x0, x1, y0, y1) = (c0 as f64, c1 as f64, r0 as f64, r1 as f64);
        rings.push(vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]);
    };
    for row in 0..=mask.height() {
        let mut runs = Vec::new();
        if row < mask.height() {
            let mut col = 0;
            while col < mask.width() {
                if mask.get(row, col) {
                    let start = col;
                    while col < mask.width() && mask.get(row, col) {
                        col += 1;
                    }
                    runs.push((start, col));
                } else {
                    col += 1;
                }
            }
        }
        let mut next_open = Vec::with_capacity(runs.len());
        for &(c0, c1) in &runs {
            match open.iter().position(|&(a, b, _)| a == c0 && b == c1) {
                Some(i) => next_open.push(open.swap_remove(i)),
                None => next_open.push((c0, c1, row)),
            }
        }
        for block in open.drain(..) {
            close(block, row, &mut rings);
        }
        open = next_open;
    }
    rings.sort_by(|a, b| {
        let key = |r: &Vec<Point>| (r[0].1 as usize, r[0].0 as usize);
        key(a).cmp(&key(b))
    });
    rings
}

impl Document {
    /// Native raster size declared by the document.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Document::Polygons(set) => (set.image_width, set.image_height),
            Document::Rle { width, height, .. } | Document::RleInstances { width, height, .. } => {
                (*width, *height)
            }
        }
    }

    /// Decodes every instance at native resolution, optionally resizing each
    /// mask (nearest) to `target`. A single-raster RLE is split into
    /// connected components.
    pub fn to_instances(
        &self,
        target: Option<(usize, usize)>,
        connectivity: Connectivity,
    ) -> Result<LoadedInstances> {
        let (width, height) = self.dims();
        let (out_w, out_h) = target.unwrap_or((width, height));
        let mut loaded = LoadedInstances {
            width: out_w,
            height: out_h,
            instances: Vec::new(),
            dropped: Vec::new(),
        };
        let mut push = |id: u32, mask: BinaryMask| -> Result<()> {
            let mask = mask.resize_nearest(out_w, out_h)?;
            match Instance::new(id, mask) {
                Ok(inst) => loaded.instances.push(inst),
                Err(Error::EmptyMask) => loaded.dropped.push(id),
                Err(e) => return Err(e),
            }
            Ok(())
        };
        match self {
            Document::Polygons(set) => {
                for poly in &set.instances {
                    push(poly.id, rasterize(poly, width, height)?)?;
                }
            }
            Document::Rle { runs, .. } => {
                let mask = decode_rle(runs, width, height)?;
                for comp in connected_components(&mask, connectivity) {
                    let id = comp.id();
                    push(id, comp.into_mask())?;
                }
            }
            Document::RleInstances { instances, .. } => {
                for inst in instances {
                    push(inst.id, decode_rle(&inst.runs, width, height)?)?;
                }
            }
        }
        loaded.instances.sort_by_key(Instance::id);
        Ok(loaded)
    }
}
