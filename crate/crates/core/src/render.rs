//! Volume rendering for bounded and unbounded scenes.
//!
//! Samples along a ray are composited front to back with
//! `w_i = α_i Π_{j<i}(1 − α_j)` and `α_i = 1 − exp(−σ_i δ_i)`. Unbounded
//! scenes split each ray at the unit sphere: a near field is sampled in `t`
//! inside the sphere and a far field is sampled uniformly in inverse radius
//! outside it. Far-field densities are therefore per unit of inverse radius.
//! Scene editing adds an object field sampled only inside boxes and removes
//! the near field from those boxes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::RadianceField;
use crate::math::{pixel_ray, Intrinsics, Pose, Ray, Rgb, Vec3};
use crate::metrics::OrientedBox3;
use crate::util::stream_rng;

/// Density written into pruned samples. Compositing clamps densities at
/// zero, so pruned samples contribute nothing.
pub const SUPPRESSED_SIGMA: f64 = -1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub near: f64,
    pub far: f64,
    pub n_coarse: usize,
    /// Importance samples added to the near segment; zero disables the
    /// fine pass.
    pub n_fine: usize,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { near: 0.02, far: 3.0, n_coarse: 64, n_fine: 0, seed: 0 }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return Err(invalid(format!("need 0 < near < far, got near={} far={}", self.near, self.far)));
        }
        if self.n_coarse == 0 {
            return Err(invalid("n_coarse must be at least 1"));
        }
        Ok(())
    }
}

/// Sorted sample distances along a ray and the segment length owned by each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RaySamples {
    pub t_values: Vec<f64>,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeResult {
    pub color: Rgb,
    pub acc: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderResult {
    pub color: Rgb,
    /// Total accumulated opacity.
    pub acc: f64,
    /// Opacity accumulated by near-field samples only.
    pub acc_near: f64,
}

fn ray_words(ray: &Ray) -> [u64; 6] {
    let o = ray.origin;
    let d = ray.direction();
    [o.x, o.y, o.z, d.x, d.y, d.z].map(f64::to_bits)
}

fn ray_rng(ray: &Ray, seed: u64, stream: u64) -> ChaCha8Rng {
    let w = ray_words(ray);
    stream_rng(seed, &[w[0], w[1], w[2], w[3], w[4], w[5], stream])
}

/// One uniform draw per equal-width stratum of `[lo, hi]`.
fn stratified_in(lo: f64, hi: f64, n: usize, rng: &mut ChaCha8Rng) -> RaySamples {
    let width = (hi - lo) / n as f64;
    let t_values: Vec<f64> = (0..n)
        .map(|i| {
            let u: f64 = rng.random();
            lo + (i as f64 + u) * width
        })
        .collect();
    let deltas = deltas_to(&t_values, hi);
    RaySamples { t_values, deltas }
}

fn deltas_to(t: &[f64], end: f64) -> Vec<f64> {
    t.iter().enumerate().map(|(i, &ti)| t.get(i + 1).copied().unwrap_or(end) - ti).collect()
}

/// `cfg.n_coarse` jittered samples in `[near, far]`; deterministic in
/// `(ray, cfg.seed)`.
pub fn stratified_samples(ray: &Ray, cfg: &RenderConfig) -> Result<RaySamples> {
    cfg.validate()?;
    let mut rng = ray_rng(ray, cfg.seed, 0);
    Ok(stratified_in(cfg.near, cfg.far, cfg.n_coarse, &mut rng))
}

/// `α = 1 − exp(−σ δ)`.
pub fn alpha_from_sigma(sigma: f64, delta: f64) -> Result<f64> {
    if sigma < 0.0 || sigma.is_nan() {
        return Err(Error::NegativeDensity(sigma));
    }
    if !(delta > 0.0) {
        return Err(invalid(format!("segment length must be positive, got {delta}")));
    }
    Ok(-(-sigma * delta).exp_m1())
}

fn alpha_clamped(sigma: f64, delta: f64) -> f64 {
    let s = if sigma > 0.0 { sigma } else { 0.0 };
    -(-s * delta).exp_m1()
}

/// Front-to-back alpha compositing. Negative densities are clamped to zero.
pub fn composite(colors: &[Rgb], sigmas: &[f64], deltas: &[f64]) -> Result<CompositeResult> {
    if colors.len() != sigmas.len() || sigmas.len() != deltas.len() {
        return Err(Error::LengthMismatch(format!(
            "colors {}, sigmas {}, deltas {}",
            colors.len(),
            sigmas.len(),
            deltas.len()
        )));
    }
    let mut acc = Accumulator::default();
    let weights =
        colors.iter().zip(sigmas).zip(deltas).map(|((c, &s), &d)| acc.push(*c, alpha_clamped(s, d))).collect();
    Ok(CompositeResult { color: acc.color, acc: acc.acc, weights })
}

#[derive(Debug, Clone, Copy)]
struct Accumulator {
    transmittance: f64,
    color: Rgb,
    acc: f64,
}

impl Default for Accumulator {
    fn default() -> Self {
        Self { transmittance: 1.0, color: [0.0; 3], acc: 0.0 }
    }
}

impl Accumulator {
    fn push(&mut self, c: Rgb, alpha: f64) -> f64 {
        let w = alpha * self.transmittance;
        for (out, ci) in self.color.iter_mut().zip(c) {
            *out += w * ci;
        }
        self.acc += w;
        self.transmittance *= 1.0 - alpha;
        w
    }
}

/// Inverted-sphere remap of a point outside the unit sphere to
/// `(unit direction, 1/r)`.
pub fn contract_nerfpp(x: Vec3) -> Result<[f64; 4]> {
    let r = x.norm();
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InsideUnitSphere(r));
    }
    let u = x / r;
    Ok([u.x, u.y, u.z, 1.0 / r])
}

/// Forward distance at which the ray reaches radius `r` (origin inside).
fn t_at_radius(ray: &Ray, r: f64) -> f64 {
    let o = ray.origin;
    let b = o.dot(ray.direction());
    let c = o.norm_squared() - r * r;
    -b + (b * b - c).sqrt()
}

/// Far-segment samples: stratified in inverse radius over `(0, 1]`,
/// returned in increasing `t`. Deltas are measured in inverse radius; the
/// last one runs to `1/r = 0`.
pub fn far_samples(ray: &Ray, cfg: &RenderConfig) -> Result<(RaySamples, Vec<f64>)> {
    cfg.validate()?;
    let r0 = ray.origin.norm();
    if !(r0 < 1.0) {
        return Err(Error::OriginOutsideSphere(r0));
    }
    let mut rng = ray_rng(ray, cfg.seed, 2);
    let n = cfg.n_coarse;
    let inv_r: Vec<f64> = (0..n)
        .map(|i| {
            let u: f64 = rng.random();
            1.0 - (i as f64 + u) / n as f64
        })
        .collect();
    let deltas = (0..n).map(|i| inv_r[i] - inv_r.get(i + 1).copied().unwrap_or(0.0)).collect();
    let t_values = inv_r.iter().map(|&s| t_at_radius(ray, 1.0 / s)).collect();
    Ok((RaySamples { t_values, deltas }, inv_r))
}

/// Near-segment samples in `[near, min(far, t_sphere)]`; empty when the
/// segment is empty.
pub fn near_samples(ray: &Ray, cfg: &RenderConfig) -> Result<RaySamples> {
    cfg.validate()?;
    let r0 = ray.origin.norm();
    if !(r0 < 1.0) {
        return Err(Error::OriginOutsideSphere(r0));
    }
    let hi = cfg.far.min(t_at_radius(ray, 1.0));
    if !(hi > cfg.near) {
        return Ok(RaySamples::default());
    }
    let mut rng = ray_rng(ray, cfg.seed, 1);
    Ok(stratified_in(cfg.near, hi, cfg.n_coarse, &mut rng))
}

/// Inverse-CDF draws from piecewise-constant weights over `edges`
/// (`edges.len() == weights.len() + 1`), one per equal-mass stratum.
fn sample_pdf(edges: &[f64], weights: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if n == 0 || !(total > 0.0) {
        return Vec::new();
    }
    let mut cdf = Vec::with_capacity(weights.len() + 1);
    cdf.push(0.0);
    let mut run = 0.0;
    for w in weights {
        run += w / total;
        cdf.push(run);
    }
    (0..n)
        .map(|i| {
            let u = ((i as f64 + rng.random::<f64>()) / n as f64).min(run);
            let k = cdf.partition_point(|&c| c <= u).clamp(1, weights.len());
            let (c0, c1) = (cdf[k - 1], cdf[k]);
            let f = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
            edges[k - 1] + f * (edges[k] - edges[k - 1])
        })
        .collect()
}

/// Adds importance samples drawn from the coarse weights of `field`.
fn refine<F: RadianceField + ?Sized>(
    field: &F,
    ray: &Ray,
    coarse: RaySamples,
    end: f64,
    cfg: &RenderConfig,
) -> RaySamples {
    if cfg.n_fine == 0 || coarse.t_values.is_empty() {
        return coarse;
    }
    let d = ray.direction();
    let weights: Vec<f64> = {
        let mut acc = Accumulator::default();
        coarse
            .t_values
            .iter()
            .zip(&coarse.deltas)
            .map(|(&t, &dt)| {
                let s = field.eval(ray.at(t), d);
                acc.push(s.color, alpha_clamped(s.sigma, dt))
            })
            .collect()
    };
    let mut edges = coarse.t_values.clone();
    edges.push(end);
    let mut rng = ray_rng(ray, cfg.seed, 3);
    let mut t = coarse.t_values;
    t.extend(sample_pdf(&edges, &weights, cfg.n_fine, &mut rng));
    t.sort_by(f64::total_cmp);
    t.dedup();
    t.retain(|&v| v < end);
    let deltas = deltas_to(&t, end);
    RaySamples { t_values: t, deltas }
}

/// Renders a single bounded field over `[near, far]`.
pub fn render_ray<F: RadianceField + ?Sized>(field: &F, ray: &Ray, cfg: &RenderConfig) -> Result<RenderResult> {
    let coarse = stratified_samples(ray, cfg)?;
    let samples = refine(field, ray, coarse, cfg.far, cfg);
    let d = ray.direction();
    let mut acc = Accumulator::default();
    for (&t, &dt) in samples.t_values.iter().zip(&samples.deltas) {
        let s = field.eval(ray.at(t), d);
        acc.push(s.color, alpha_clamped(s.sigma, dt));
    }
    Ok(RenderResult { color: acc.color, acc: acc.acc, acc_near: acc.acc })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Stream {
    Object = 0,
    Near = 1,
    Far = 2,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    t: f64,
    stream: Stream,
    color: Rgb,
    sigma: f64,
    delta: f64,
}

fn composite_entries(mut entries: Vec<Entry>) -> RenderResult {
    // ties at equal t: object, then near, then far
    entries.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.stream.cmp(&b.stream)));
    let mut acc = Accumulator::default();
    let mut acc_near = 0.0;
    for e in &entries {
        let w = acc.push(e.color, alpha_clamped(e.sigma, e.delta));
        if e.stream == Stream::Near {
            acc_near += w;
        }
    }
    RenderResult { color: acc.color, acc: acc.acc, acc_near }
}

fn near_entries<F: RadianceField + ?Sized>(
    field: &F,
    ray: &Ray,
    cfg: &RenderConfig,
    boxes: &[OrientedBox3],
) -> Result<Vec<Entry>> {
    let coarse = near_samples(ray, cfg)?;
    let end = coarse.t_values.last().zip(coarse.deltas.last()).map(|(t, d)| t + d);
    let samples = match end {
        Some(end) => refine(field, ray, coarse, end, cfg),
        None => coarse,
    };
    let d = ray.direction();
    let positions: Vec<Vec3> = samples.t_values.iter().map(|&t| ray.at(t)).collect();
    let queried: Vec<_> = positions.iter().map(|&p| field.eval(p, d)).collect();
    let sigmas: Vec<f64> = queried.iter().map(|s| s.sigma).collect();
    let sigmas = prune_rays_in_boxes(&positions, &sigmas, boxes);
    Ok(samples
        .t_values
        .iter()
        .zip(&samples.deltas)
        .zip(queried.iter().zip(sigmas))
        .map(|((&t, &delta), (s, sigma))| Entry { t, stream: Stream::Near, color: s.color, sigma, delta })
        .collect())
}

fn far_entries<F: RadianceField + ?Sized>(field: &F, ray: &Ray, cfg: &RenderConfig) -> Result<Vec<Entry>> {
    let (samples, _) = far_samples(ray, cfg)?;
    let d = ray.direction();
    Ok(samples
        .t_values
        .iter()
        .zip(&samples.deltas)
        .map(|(&t, &delta)| {
            let s = field.eval(ray.at(t), d);
            Entry { t, stream: Stream::Far, color: s.color, sigma: s.sigma, delta }
        })
        .collect())
}

fn object_entries<F: RadianceField + ?Sized>(
    field: &F,
    boxes: &[OrientedBox3],
    ray: &Ray,
    cfg: &RenderConfig,
) -> Vec<Entry> {
    let d = ray.direction();
    let mut out = Vec::new();
    for (i, b) in boxes.iter().enumerate() {
        let Some((t0, t1)) = b.intersect_ray(ray) else { continue };
        let (lo, hi) = (t0.max(cfg.near), t1.min(cfg.far));
        if !(hi > lo) {
            continue;
        }
        let mut rng = ray_rng(ray, cfg.seed, 16 + i as u64);
        let s = stratified_in(lo, hi, cfg.n_coarse, &mut rng);
        for (&t, &delta) in s.t_values.iter().zip(&s.deltas) {
            let q = field.eval(ray.at(t), d);
            out.push(Entry { t, stream: Stream::Object, color: q.color, sigma: q.sigma, delta });
        }
    }
    out
}

/// Near field inside the unit sphere, far field behind it; the far color is
/// attenuated by the near transmittance.
pub fn render_ray_nearfar<N, F>(near_field: &N, far_field: &F, ray: &Ray, cfg: &RenderConfig) -> Result<RenderResult>
where
    N: RadianceField + ?Sized,
    F: RadianceField + ?Sized,
{
    let mut entries = near_entries(near_field, ray, cfg, &[])?;
    entries.extend(far_entries(far_field, ray, cfg)?);
    Ok(composite_entries(entries))
}

/// Replaces the density of every sample inside any (closed) box with
/// [`SUPPRESSED_SIGMA`].
pub fn prune_rays_in_boxes(positions: &[Vec3], sigmas: &[f64], boxes: &[OrientedBox3]) -> Vec<f64> {
    positions
        .iter()
        .zip(sigmas)
        .map(|(p, &s)| if boxes.iter().any(|b| b.contains(*p)) { SUPPRESSED_SIGMA } else { s })
        .collect()
}

/// Editable-scene rendering: objects inside `boxes`, near background with
/// the boxes carved out, and far background, composited along one merged
/// sample list.
pub fn render_composed<O, N, F>(
    object_field: &O,
    near_field: &N,
    far_field: &F,
    boxes: &[OrientedBox3],
    ray: &Ray,
    cfg: &RenderConfig,
) -> Result<RenderResult>
where
    O: RadianceField + ?Sized,
    N: RadianceField + ?Sized,
    F: RadianceField + ?Sized,
{
    let mut entries = object_entries(object_field, boxes, ray, cfg);
    entries.extend(near_entries(near_field, ray, cfg, boxes)?);
    entries.extend(far_entries(far_field, ray, cfg)?);
    Ok(composite_entries(entries))
}

/// Distortion regularizer over intervals `[s_i, s_{i+1}]` with weights `w_i`.
pub fn distortion_reg(s: &[f64], w: &[f64]) -> Result<f64> {
    if s.len() != w.len() + 1 {
        return Err(Error::LengthMismatch(format!("need len(s) = len(w) + 1, got {} and {}", s.len(), w.len())));
    }
    if s.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(invalid("interval edges must be strictly increasing"));
    }
    if w.iter().any(|&v| !(v >= 0.0)) {
        return Err(invalid("weights must be non-negative"));
    }
    let mid: Vec<f64> = s.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    let mut cross = 0.0;
    for i in 0..w.len() {
        for j in 0..w.len() {
            cross += w[i] * w[j] * (mid[i] - mid[j]).abs();
        }
    }
    let own: f64 = w.iter().zip(s.windows(2)).map(|(wi, p)| wi * wi * (p[1] - p[0])).sum();
    Ok(cross + own / 3.0)
}

/// A rendered view: per-pixel color and accumulated opacity, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub width: u32,
    pub height: u32,
    pub color: Vec<Rgb>,
    pub acc: Vec<f64>,
}

impl RenderedImage {
    pub fn mean_acc(&self) -> f64 {
        self.acc.iter().sum::<f64>() / self.acc.len() as f64
    }
}

/// Renders every pixel of a camera in parallel with `shade`.
pub fn render_image<S>(k: &Intrinsics, pose: &Pose, shade: S) -> Result<RenderedImage>
where
    S: Fn(&Ray) -> Result<RenderResult> + Sync,
{
    k.validate()?;
    let n = k.width as usize * k.height as usize;
    let results: Vec<RenderResult> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (u, v) = (i % k.width as usize, i / k.width as usize);
            shade(&pixel_ray(k, pose, (u as f64, v as f64)))
        })
        .collect::<Result<_>>()?;
    Ok(RenderedImage {
        width: k.width,
        height: k.height,
        color: results.iter().map(|r| r.color).collect(),
        acc: results.iter().map(|r| r.acc).collect(),
    })
}
