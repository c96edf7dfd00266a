//! Evaluation metrics: point-set distances, box overlap and detection AP,
//! pose accuracy with symmetry handling, voxel labelling and navigation.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{canonicalize_symmetric, Ray, Rotation3, Vec3};

/// Box with yaw-only orientation. `size` holds full side lengths along the
/// box's local x, y and z axes; yaw rotates local x toward world y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox3 {
    pub center: Vec3,
    pub size: Vec3,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub class: u32,
    #[serde(default = "one")]
    pub score: f64,
}

fn one() -> f64 {
    1.0
}

impl OrientedBox3 {
    pub fn new(center: Vec3, size: Vec3, yaw: f64) -> Self {
        Self { center, size, yaw, class: 0, score: 1.0 }
    }

    pub fn with_class(mut self, class: u32) -> Self {
        self.class = class;
        self
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.size.min_element() > 0.0 && self.size.is_finite() && self.center.is_finite()) {
            return Err(invalid(format!("box size must be positive, got {:?}", self.size)));
        }
        if !self.yaw.is_finite() {
            return Err(invalid("box yaw must be finite"));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.size.x * self.size.y * self.size.z
    }

    /// World point to box-local coordinates.
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        let d = p - self.center;
        Vec3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }

    fn local_dir(&self, v: Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * v.x + s * v.y, -s * v.x + c * v.y, v.z)
    }

    /// Footprint corners in the xy plane, counter-clockwise.
    pub fn footprint(&self) -> [(f64, f64); 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hx, hy) = (0.5 * self.size.x, 0.5 * self.size.y);
        [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
            .map(|(x, y)| (self.center.x + c * x - s * y, self.center.y + s * x + c * y))
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let f = self.footprint();
        let (z0, z1) = self.z_range();
        let mut out = [Vec3::ZERO; 8];
        for (i, (x, y)) in f.iter().enumerate() {
            out[i] = Vec3::new(*x, *y, z0);
            out[i + 4] = Vec3::new(*x, *y, z1);
        }
        out
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.center.z - 0.5 * self.size.z, self.center.z + 0.5 * self.size.z)
    }

    /// Closed containment.
    pub fn contains(&self, p: Vec3) -> bool {
        let q = self.to_local(p).abs();
        q.x <= 0.5 * self.size.x && q.y <= 0.5 * self.size.y && q.z <= 0.5 * self.size.z
    }

    /// Parameter interval where the ray is inside the box, if any.
    pub fn intersect_ray(&self, ray: &Ray) -> Option<(f64, f64)> {
        let o = self.to_local(ray.origin);
        let d = self.local_dir(ray.direction());
        let half = self.size * 0.5;
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for a in 0..3 {
            if d[a] == 0.0 {
                if o[a].abs() > half[a] {
                    return None;
                }
                continue;
            }
            let ta = (-half[a] - o[a]) / d[a];
            let tb = (half[a] - o[a]) / d[a];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
        (t1 >= t0).then_some((t0, t1))
    }
}

/// Symmetric Chamfer distance: mean squared nearest-neighbour distance in
/// both directions, summed.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(directed_mean_sq(a, b) + directed_mean_sq(b, a))
}

fn directed_mean_sq(from: &[Vec3], to: &[Vec3]) -> f64 {
    let nearest: Vec<f64> =
        from.par_iter().map(|p| to.iter().map(|q| p.distance_squared(*q)).fold(f64::INFINITY, f64::min)).collect();
    nearest.iter().sum::<f64>() / from.len() as f64
}

fn cross2(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn polygon_area(p: &[(f64, f64)]) -> f64 {
    let n = p.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % n]);
            a.0 * b.1 - a.1 * b.0
        })
        .sum();
    0.5 * twice.abs()
}

/// Sutherland–Hodgman clip of `subject` by the convex counter-clockwise
/// polygon `clip`.
fn clip_polygon(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (dc, dp) = (cross2(a, b, cur), cross2(a, b, prev));
            if dc >= 0.0 {
                if dp < 0.0 {
                    out.push(intersect(prev, cur, dp, dc));
                }
                out.push(cur);
            } else if dp >= 0.0 {
                out.push(intersect(prev, cur, dp, dc));
            }
        }
    }
    out
}

fn intersect(p: (f64, f64), q: (f64, f64), dp: f64, dq: f64) -> (f64, f64) {
    let t = dp / (dp - dq);
    (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
}

/// Exact overlap volume of two yaw boxes.
pub fn intersection_volume(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
    let (az0, az1) = a.z_range();
    let (bz0, bz1) = b.z_range();
    let dz = az1.min(bz1) - az0.max(bz0);
    if dz <= 0.0 {
        return 0.0;
    }
    polygon_area(&clip_polygon(&a.footprint(), &b.footprint())) * dz
}

/// Intersection over union of two yaw boxes.
pub fn iou3d(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
    let inter = intersection_volume(a, b);
    let union = a.volume() + b.volume() - inter;
    if !(union > 0.0) {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub ap: f64,
    pub recall: f64,
}

/// All-point interpolated AP from ranked true/false-positive flags.
pub fn average_precision(ranked_tp: &[bool], n_gt: usize) -> ApResult {
    if n_gt == 0 || ranked_tp.is_empty() {
        return ApResult { ap: 0.0, recall: 0.0 };
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(ranked_tp.len());
    for (i, &hit) in ranked_tp.iter().enumerate() {
        tp += hit as usize;
        points.push((tp as f64 / n_gt as f64, tp as f64 / (i + 1) as f64));
    }
    // precision envelope from the right
    for i in (0..points.len().saturating_sub(1)).rev() {
        points[i].1 = points[i].1.max(points[i + 1].1);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &(r, p) in &points {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    ApResult { ap, recall: tp as f64 / n_gt as f64 }
}

fn box_key(b: &OrientedBox3) -> [f64; 7] {
    [b.center.x, b.center.y, b.center.z, b.size.x, b.size.y, b.size.z, b.yaw]
}

/// Descending score; exact ties fall back to geometry so the ranking does
/// not depend on input order.
fn rank_boxes(preds: &[OrientedBox3]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&preds[i], &preds[j]);
        b.score.total_cmp(&a.score).then(a.class.cmp(&b.class)).then_with(|| lex(&box_key(a), &box_key(b)))
    });
    order
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Greedy one-to-one matching in descending score. `accept` returns a cost
/// for an admissible pair; the cheapest unmatched GT wins, lowest index on
/// ties.
fn greedy_match<F>(order: &[usize], n_gt: usize, accept: F) -> Vec<bool>
where
    F: Fn(usize, usize) -> Option<f64>,
{
    let mut taken = vec![false; n_gt];
    order
        .iter()
        .map(|&p| {
            let best = (0..n_gt)
                .filter(|&g| !taken[g])
                .filter_map(|g| accept(p, g).map(|c| (c, g)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match best {
                Some((_, g)) => {
                    taken[g] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// Class-aware detection AP at one IoU threshold over all classes pooled.
pub fn detection_ap(preds: &[OrientedBox3], gts: &[OrientedBox3], iou_thresh: f64) -> Result<ApResult> {
    if !(iou_thresh > 0.0 && iou_thresh < 1.0) {
        return Err(invalid(format!("IoU threshold must be in (0, 1), got {iou_thresh}")));
    }
    for b in preds.iter().chain(gts) {
        b.validate()?;
    }
    let order = rank_boxes(preds);
    let tp = greedy_match(&order, gts.len(), |p, g| {
        if preds[p].class != gts[g].class {
            return None;
        }
        let iou = iou3d(&preds[p], &gts[g]);
        (iou >= iou_thresh).then_some(-iou)
    });
    Ok(average_precision(&tp, gts.len()))
}

/// Per-class AP over classes present in the ground truth, plus their mean.
pub fn detection_ap_per_class(
    preds: &[OrientedBox3],
    gts: &[OrientedBox3],
    iou_thresh: f64,
) -> Result<(BTreeMap<u32, ApResult>, ApResult)> {
    let mut per_class = BTreeMap::new();
    for class in gts.iter().map(|b| b.class).collect::<std::collections::BTreeSet<_>>() {
        let p: Vec<_> = preds.iter().copied().filter(|b| b.class == class).collect();
        let g: Vec<_> = gts.iter().copied().filter(|b| b.class == class).collect();
        per_class.insert(class, detection_ap(&p, &g, iou_thresh)?);
    }
    Ok((per_class.clone(), mean_ap(per_class.values())))
}

fn mean_ap<'a>(vals: impl ExactSizeIterator<Item = &'a ApResult>) -> ApResult {
    let n = vals.len();
    if n == 0 {
        return ApResult { ap: 0.0, recall: 0.0 };
    }
    let (ap, recall) = vals.fold((0.0, 0.0), |(a, r), v| (a + v.ap, r + v.recall));
    ApResult { ap: ap / n as f64, recall: recall / n as f64 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub rotation: Rotation3,
    pub translation: Vec3,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub class: u32,
    #[serde(default = "one")]
    pub score: f64,
}

impl PoseRecord {
    pub fn new(rotation: Rotation3, translation: Vec3) -> Self {
        Self { rotation, translation, scale: 1.0, class: 0, score: 1.0 }
    }
}

/// Rotation error in degrees and translation error in centimetres. With a
/// symmetry axis (object frame), the rotation error is minimised over spins
/// about that axis.
pub fn pose_errors(pred: &PoseRecord, gt: &PoseRecord, symmetric_axis: Option<Vec3>) -> Result<(f64, f64)> {
    let rel = gt.rotation.inverse().compose(&pred.rotation);
    let rel = match symmetric_axis {
        Some(axis) => canonicalize_symmetric(&rel, axis)?,
        None => rel,
    };
    let deg = rel.angle().to_degrees();
    let cm = pred.translation.distance(gt.translation) * 100.0;
    Ok((deg, cm))
}

/// Pose AP: a prediction is correct when it matches an unclaimed GT of its
/// class with rotation error < `deg_thresh` and translation error
/// < `cm_thresh`.
pub fn pose_ap(
    preds: &[PoseRecord],
    gts: &[PoseRecord],
    deg_thresh: f64,
    cm_thresh: f64,
    symmetric_classes: &BTreeMap<u32, Vec3>,
) -> Result<f64> {
    if !(deg_thresh > 0.0 && cm_thresh > 0.0) {
        return Err(invalid("pose thresholds must be positive"));
    }
    let errors: Vec<Vec<Option<(f64, f64)>>> = preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| {
                    if p.class != g.class {
                        return Ok(None);
                    }
                    pose_errors(p, g, symmetric_classes.get(&g.class).copied()).map(Some)
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&preds[i], &preds[j]);
        b.score
            .total_cmp(&a.score)
            .then(a.class.cmp(&b.class))
            .then_with(|| lex(&a.rotation.to_row_major(), &b.rotation.to_row_major()))
            .then_with(|| lex(&a.translation.to_array(), &b.translation.to_array()))
    });
    let tp = greedy_match(&order, gts.len(), |p, g| {
        let (deg, cm) = errors[p][g]?;
        (deg < deg_thresh && cm < cm_thresh).then_some(deg + cm)
    });
    Ok(average_precision(&tp, gts.len()).ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelLabelMetrics {
    pub miou: f64,
    pub macc: f64,
    pub acc: f64,
    /// Per-class `(iou, acc)` for classes present in the ground truth.
    pub per_class: BTreeMap<u32, (f64, f64)>,
}

/// Segmentation metrics over 0-based labels in `[0, n_classes)`.
pub fn voxel_label_metrics(pred: &[u32], gt: &[u32], n_classes: u32) -> Result<VoxelLabelMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::DimsMismatch(format!("pred has {} voxels, gt has {}", pred.len(), gt.len())));
    }
    if gt.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(&label) = pred.iter().chain(gt).find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange { label, n_classes });
    }
    let n = n_classes as usize;
    let mut confusion = vec![0u64; n * n];
    for (&p, &g) in pred.iter().zip(gt) {
        confusion[g as usize * n + p as usize] += 1;
    }
    let mut per_class = BTreeMap::new();
    let mut correct = 0u64;
    for c in 0..n {
        let tp = confusion[c * n + c];
        correct += tp;
        let gt_count: u64 = confusion[c * n..(c + 1) * n].iter().sum();
        if gt_count == 0 {
            continue;
        }
        let pred_count: u64 = (0..n).map(|g| confusion[g * n + c]).sum();
        let iou = tp as f64 / (gt_count + pred_count - tp) as f64;
        per_class.insert(c as u32, (iou, tp as f64 / gt_count as f64));
    }
    let k = per_class.len() as f64;
    Ok(VoxelLabelMetrics {
        miou: per_class.values().map(|v| v.0).sum::<f64>() / k,
        macc: per_class.values().map(|v| v.1).sum::<f64>() / k,
        acc: correct as f64 / gt.len() as f64,
        per_class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub positions: Vec<Vec3>,
    pub reference: Vec<Vec3>,
    pub goal: Vec3,
    #[serde(default = "default_success_threshold")]
    pub success_threshold: f64,
}

fn default_success_threshold() -> f64 {
    3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavMetrics {
    pub sr: f64,
    pub spl: f64,
    pub ndtw: f64,
    pub tl: f64,
    pub ne: f64,
}

pub fn path_length(path: &[Vec3]) -> f64 {
    path.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Dynamic time warping cost with Euclidean point distances.
pub fn dtw(a: &[Vec3], b: &[Vec3]) -> f64 {
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for p in a {
        let mut cur = vec![f64::INFINITY; m + 1];
        for j in 1..=m {
            cur[j] = p.distance(b[j - 1]) + prev[j].min(cur[j - 1]).min(prev[j - 1]);
        }
        prev = cur;
    }
    prev[m]
}

pub fn nav_metrics(t: &Trajectory) -> Result<NavMetrics> {
    let (Some(last), false) = (t.positions.last(), t.reference.is_empty()) else {
        return Err(Error::EmptyPath);
    };
    if !(t.success_threshold > 0.0) {
        return Err(invalid("success threshold must be positive"));
    }
    let ne = last.distance(t.goal);
    let sr = if ne < t.success_threshold { 1.0 } else { 0.0 };
    let tl = path_length(&t.positions);
    let l = path_length(&t.reference);
    let denom = tl.max(l);
    let spl = if denom > 0.0 { sr * l / denom } else { sr };
    let ndtw = (-dtw(&t.positions, &t.reference) / (t.reference.len() as f64 * t.success_threshold)).exp();
    Ok(NavMetrics { sr, spl, ndtw, tl, ne })
}
