//! Analytic Hough parameterization, quantization conventions and ground-truth
//! label construction.
//!
//! A straight line is represented in normal form `x*cos(theta) + y*sin(theta) = r`
//! with `theta` in `[0, pi)` and signed `r`. The half-turn range avoids the
//! double representation of each line: `(theta + pi, -r)` names the same line,
//! so conversions always canonicalize to `theta` in `[0, pi)`.
//!
//! Quantization:
//! - theta bin `k` has center `k * pi / theta_bins`,
//! - r bin `i` has center `r_min + i * (r_max - r_min) / (r_bins - 1)`,
//! - continuous values round to the nearest bin center, ties toward the
//!   lower index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Where image coordinate `(0, 0)` sits when evaluating the normal form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Pixel `(0, 0)` is the origin; `r` spans roughly `[-W, diag]`.
    TopLeft,
    /// The image center is the origin; `r` spans `[-diag/2, diag/2]`.
    Center,
}

/// Quantization and coordinate conventions binding an image grid to the
/// `(theta, r)` parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughSpec {
    pub theta_bins: usize,
    pub r_bins: usize,
    pub image_width: usize,
    pub image_height: usize,
    /// Signed distance covered by the first r bin center.
    pub r_min: f64,
    /// Signed distance covered by the last r bin center.
    pub r_max: f64,
    pub origin: Origin,
}

/// Nearest integer with ties toward the lower value.
#[inline]
pub(crate) fn nearest_tie_down(t: f64) -> i64 {
    (t - 0.5).ceil() as i64
}

impl HoughSpec {
    /// Center-origin spec with a symmetric r range covering the image diagonal.
    pub fn centered(theta_bins: usize, r_bins: usize, width: usize, height: usize) -> Result<Self> {
        let half_diag = ((width * width + height * height) as f64).sqrt() / 2.0;
        HoughSpec {
            theta_bins,
            r_bins,
            image_width: width,
            image_height: height,
            r_min: -half_diag,
            r_max: half_diag,
            origin: Origin::Center,
        }
        .validated()
    }

    /// Top-left-origin spec; r must cover `[-W, diag]` so the range is
    /// `[-diag, diag]` for simplicity.
    pub fn top_left(theta_bins: usize, r_bins: usize, width: usize, height: usize) -> Result<Self> {
        let diag = ((width * width + height * height) as f64).sqrt();
        HoughSpec {
            theta_bins,
            r_bins,
            image_width: width,
            image_height: height,
            r_min: -diag,
            r_max: diag,
            origin: Origin::TopLeft,
        }
        .validated()
    }

    /// Validate bin counts, range ordering and full grid coverage: every pixel
    /// of the bound grid must map into `[r_min, r_max]` for every theta bin.
    pub fn validated(self) -> Result<Self> {
        if self.theta_bins < 2 || self.r_bins < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 bins per axis, got theta={} r={}",
                self.theta_bins, self.r_bins
            )));
        }
        if !(self.r_min < self.r_max) {
            return Err(Error::InvalidConfig(format!(
                "r_min {} must be below r_max {}",
                self.r_min, self.r_max
            )));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::InvalidConfig("empty image grid".into()));
        }
        // r is linear in (x, y), so extremes over the rectangle sit at corners.
        let (cx, cy) = self.origin_offset();
        let xs = [-cx, (self.image_width - 1) as f64 - cx];
        let ys = [-cy, (self.image_height - 1) as f64 - cy];
        for k in 0..self.theta_bins {
            let (sin, cos) = self.theta_center(k).sin_cos();
            for &x in &xs {
                for &y in &ys {
                    let r = x * cos + y * sin;
                    if r < self.r_min || r > self.r_max {
                        return Err(Error::OutOfRange(format!(
                            "pixel maps to r={r:.3} outside [{}, {}] at theta bin {k}",
                            self.r_min, self.r_max
                        )));
                    }
                }
            }
        }
        Ok(self)
    }

    /// Offset subtracted from image coordinates before applying the normal form.
    pub fn origin_offset(&self) -> (f64, f64) {
        match self.origin {
            Origin::TopLeft => (0.0, 0.0),
            Origin::Center => (
                (self.image_width - 1) as f64 / 2.0,
                (self.image_height - 1) as f64 / 2.0,
            ),
        }
    }

    #[inline]
    pub fn theta_step(&self) -> f64 {
        std::f64::consts::PI / self.theta_bins as f64
    }

    #[inline]
    pub fn r_step(&self) -> f64 {
        (self.r_max - self.r_min) / (self.r_bins - 1) as f64
    }

    /// Angle at the center of theta bin `k`.
    #[inline]
    pub fn theta_center(&self, k: usize) -> f64 {
        k as f64 * self.theta_step()
    }

    /// Signed distance at the center of r bin `i`.
    #[inline]
    pub fn r_center(&self, i: usize) -> f64 {
        self.r_min + i as f64 * self.r_step()
    }

    /// Nearest r bin for a continuous signed distance already in the spec's
    /// origin convention. The value must lie in `[r_min, r_max]`.
    pub fn r_to_bin(&self, r: f64) -> Result<usize> {
        if r < self.r_min || r > self.r_max || !r.is_finite() {
            return Err(Error::OutOfRange(format!(
                "r={r} outside [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        let t = (r - self.r_min) / self.r_step();
        Ok(nearest_tie_down(t).clamp(0, self.r_bins as i64 - 1) as usize)
    }

    /// Nearest r bin without the range check (used by accumulator tables that
    /// validate coverage at construction).
    #[inline]
    pub(crate) fn r_to_bin_unchecked(&self, r: f64) -> i64 {
        nearest_tie_down((r - self.r_min) / self.r_step())
    }

    /// Diagonal of the bound image in pixels.
    pub fn diagonal(&self) -> f64 {
        let w = self.image_width as f64;
        let h = self.image_height as f64;
        (w * w + h * h).sqrt()
    }
}

/// A straight line in normal form over top-left image coordinates:
/// `x*cos(theta) + y*sin(theta) = rho`, `theta` in `[0, pi)`.
///
/// The frame is always the image's own top-left frame; specs with a different
/// origin convention convert internally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub theta: f64,
    pub rho: f64,
}

impl Line {
    /// Canonicalize an arbitrary `(angle, distance)` pair into
    /// `theta in [0, pi)` with the matching sign of `rho`.
    pub fn new(theta: f64, rho: f64) -> Self {
        let mut t = theta.rem_euclid(std::f64::consts::PI * 2.0);
        let mut r = rho;
        if t >= std::f64::consts::PI {
            t -= std::f64::consts::PI;
            r = -r;
        }
        // rem_euclid can return the modulus itself when the input is a tiny
        // negative number.
        if t >= std::f64::consts::PI {
            t = 0.0;
            r = -r;
        }
        Line { theta: t, rho: r }
    }

    /// Line through two distinct points in top-left image coordinates.
    pub fn through(p1: (f64, f64), p2: (f64, f64)) -> Result<Self> {
        let dx = p2.0 - p1.0;
        let dy = p2.1 - p1.1;
        let norm = (dx * dx + dy * dy).sqrt();
        if norm < 1e-12 {
            return Err(Error::DegenerateLane { id: None });
        }
        // Normal is the direction rotated by 90 degrees.
        let nx = dy / norm;
        let ny = -dx / norm;
        let rho = nx * p1.0 + ny * p1.1;
        let theta = ny.atan2(nx);
        Ok(Line::new(theta, rho))
    }

    /// Vertical line `x = c`.
    pub fn vertical(c: f64) -> Self {
        Line { theta: 0.0, rho: c }
    }

    /// Horizontal line `y = c`.
    pub fn horizontal(c: f64) -> Self {
        Line {
            theta: std::f64::consts::FRAC_PI_2,
            rho: c,
        }
    }

    /// Signed distance from a point (top-left coordinates) to the line.
    #[inline]
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        let (sin, cos) = self.theta.sin_cos();
        x * cos + y * sin - self.rho
    }

    /// Whether the line meets the closed rectangle `[0, w-1] x [0, h-1]`.
    pub fn intersects_rect(&self, w: usize, h: usize) -> bool {
        let xs = [0.0, (w - 1) as f64];
        let ys = [0.0, (h - 1) as f64];
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &x in &xs {
            for &y in &ys {
                let d = self.signed_distance(x, y);
                min = min.min(d);
                max = max.max(d);
            }
        }
        min <= 0.0 && max >= 0.0
    }
}

/// A quantized point in parameter space with a detection score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughPoint {
    pub theta_idx: usize,
    pub r_idx: usize,
    pub score: f32,
}

impl HoughPoint {
    pub fn new(theta_idx: usize, r_idx: usize, score: f32) -> Self {
        HoughPoint {
            theta_idx,
            r_idx,
            score,
        }
    }

    pub fn validate(&self, spec: &HoughSpec) -> Result<()> {
        if self.theta_idx >= spec.theta_bins || self.r_idx >= spec.r_bins {
            return Err(Error::OutOfRange(format!(
                "hough point ({}, {}) outside {}x{} grid",
                self.theta_idx, self.r_idx, spec.theta_bins, spec.r_bins
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::OutOfRange(format!(
                "score {} outside [0, 1]",
                self.score
            )));
        }
        Ok(())
    }
}

/// An ordered lane point sequence with strictly increasing y.
#[derive(Debug, Clone, PartialEq)]
pub struct LanePolyline {
    pub id: u32,
    points: Vec<(f64, f64)>,
}

impl LanePolyline {
    pub fn new(id: u32, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "lane {id} needs at least 2 points, got {}",
                points.len()
            )));
        }
        for pair in points.windows(2) {
            if pair[1].1 <= pair[0].1 {
                return Err(Error::InvalidConfig(format!(
                    "lane {id} y values must strictly increase ({} then {})",
                    pair[0].1, pair[1].1
                )));
            }
        }
        Ok(LanePolyline { id, points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn y_min(&self) -> f64 {
        self.points[0].1
    }

    pub fn y_max(&self) -> f64 {
        self.points[self.points.len() - 1].1
    }

    /// Linear interpolation of x at height y; `None` outside the lane's extent.
    pub fn x_at(&self, y: f64) -> Option<f64> {
        if y < self.y_min() || y > self.y_max() {
            return None;
        }
        let idx = self.points.partition_point(|p| p.1 < y);
        if idx == 0 {
            return Some(self.points[0].0);
        }
        let (x0, y0) = self.points[idx - 1];
        if idx == self.points.len() {
            return Some(self.points[idx - 1].0);
        }
        let (x1, y1) = self.points[idx];
        let t = (y - y0) / (y1 - y0);
        Some(x0 + t * (x1 - x0))
    }

    /// True when every point lies inside `[0, w-1] x [0, h-1]`.
    pub fn inside(&self, w: usize, h: usize) -> bool {
        self.points.iter().all(|&(x, y)| {
            x >= 0.0 && x <= (w - 1) as f64 && y >= 0.0 && y <= (h - 1) as f64
        })
    }
}

/// A set of lane polylines with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaneSet {
    pub lanes: Vec<LanePolyline>,
}

impl LaneSet {
    pub fn new(lanes: Vec<LanePolyline>) -> Result<Self> {
        let mut ids: Vec<u32> = lanes.iter().map(|l| l.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != lanes.len() {
            return Err(Error::InvalidConfig("duplicate lane ids".into()));
        }
        Ok(LaneSet { lanes })
    }

    pub fn empty() -> Self {
        LaneSet { lanes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }
}

/// Ground-truth Hough probability map plus the exact peak list.
#[derive(Debug, Clone, PartialEq)]
pub struct HoughLabel {
    pub map: Grid,
    pub peaks: Vec<HoughPoint>,
}

/// Fraction of a lane's vertical extent sampled when reducing it to a single
/// Hough point (the near-straight bottom part).
pub const DEFAULT_BOTTOM_FRACTION: f64 = 0.5;

/// Number of equally spaced samples taken over that bottom portion.
pub const DEFAULT_SAMPLE_COUNT: usize = 10;

/// Continuous `(theta, r)` of a line in the spec's origin convention; no
/// quantization yet.
fn line_to_continuous(line: &Line, spec: &HoughSpec) -> (f64, f64) {
    let (cx, cy) = spec.origin_offset();
    let (sin, cos) = line.theta.sin_cos();
    // Shifting coordinates by (-cx, -cy) shifts rho by -(cx*cos + cy*sin).
    (line.theta, line.rho - (cx * cos + cy * sin))
}

/// Quantize a continuous canonical `(theta, r)` pair to the nearest bins.
/// Rounding theta may wrap past the last bin, which aliases to
/// `(theta - pi, -r)`.
fn quantize(theta: f64, r: f64, spec: &HoughSpec) -> Result<HoughPoint> {
    let mut k = nearest_tie_down(theta / spec.theta_step());
    let mut r = r;
    if k >= spec.theta_bins as i64 {
        k -= spec.theta_bins as i64;
        r = -r;
    }
    if k < 0 {
        // theta is canonical so this only happens for values within rounding
        // error below zero.
        k = 0;
    }
    let r_idx = spec.r_to_bin(r)?;
    Ok(HoughPoint::new(k as usize, r_idx, 1.0))
}

/// Map a line to the nearest `(theta, r)` bin pair.
///
/// The continuous parameters are computed first and each axis is rounded to
/// its nearest bin, ties toward the lower index.
pub fn line_to_hough(line: &Line, spec: &HoughSpec) -> Result<HoughPoint> {
    if !line.intersects_rect(spec.image_width, spec.image_height) {
        return Err(Error::OutOfRange(format!(
            "line (theta={:.4}, rho={:.2}) misses the {}x{} image",
            line.theta, line.rho, spec.image_width, spec.image_height
        )));
    }
    let (theta, r) = line_to_continuous(line, spec);
    quantize(theta, r, spec)
}

/// The bin-center line of a Hough point, in top-left image coordinates.
pub fn hough_to_line(point: &HoughPoint, spec: &HoughSpec) -> Result<Line> {
    point.validate(spec)?;
    let theta = spec.theta_center(point.theta_idx);
    let r = spec.r_center(point.r_idx);
    let (cx, cy) = spec.origin_offset();
    let (sin, cos) = theta.sin_cos();
    Ok(Line::new(theta, r + cx * cos + cy * sin))
}

/// Reduce a lane polyline to a single Hough point.
///
/// The lane is resampled at `sample_count` equally spaced heights over the
/// lower `bottom_fraction` of its own vertical extent; each adjacent sample
/// pair defines a line whose continuous `(theta, r)` is taken; the arithmetic
/// mean of those parameters is quantized to a bin.
pub fn lane_to_hough_point_with(
    lane: &LanePolyline,
    sample_count: usize,
    bottom_fraction: f64,
    spec: &HoughSpec,
) -> Result<HoughPoint> {
    if sample_count < 2 {
        return Err(Error::InvalidConfig(format!(
            "sample_count must be at least 2, got {sample_count}"
        )));
    }
    if !(bottom_fraction > 0.0 && bottom_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "bottom_fraction must be in (0, 1], got {bottom_fraction}"
        )));
    }
    let y_hi = lane.y_max();
    let y_lo = y_hi - bottom_fraction * (y_hi - lane.y_min());
    let step = (y_hi - y_lo) / (sample_count - 1) as f64;
    let samples: Vec<(f64, f64)> = (0..sample_count)
        .map(|s| {
            let y = y_lo + s as f64 * step;
            let x = lane.x_at(y).expect("sample inside extent");
            (x, y)
        })
        .collect();

    // Mean of per-pair (theta, r). Parameters of later pairs are unwrapped to
    // the alias closest to the first pair so that lanes straddling the
    // theta = 0 wrap still average correctly.
    let mut sum_theta = 0.0;
    let mut sum_r = 0.0;
    let mut first: Option<f64> = None;
    for pair in samples.windows(2) {
        let seg = Line::through(pair[0], pair[1]).map_err(|_| Error::DegenerateLane {
            id: Some(lane.id),
        })?;
        let (mut theta, mut r) = line_to_continuous(&seg, spec);
        if let Some(t0) = first {
            if theta - t0 > std::f64::consts::FRAC_PI_2 {
                theta -= std::f64::consts::PI;
                r = -r;
            } else if t0 - theta > std::f64::consts::FRAC_PI_2 {
                theta += std::f64::consts::PI;
                r = -r;
            }
        } else {
            first = Some(theta);
        }
        sum_theta += theta;
        sum_r += r;
    }
    let n = (sample_count - 1) as f64;
    let mean_theta = sum_theta / n;
    let mean_r = sum_r / n;
    // Re-canonicalize: unwrapping may have left theta slightly outside [0, pi).
    let (theta, r) = if mean_theta < 0.0 {
        (mean_theta + std::f64::consts::PI, -mean_r)
    } else if mean_theta >= std::f64::consts::PI {
        (mean_theta - std::f64::consts::PI, -mean_r)
    } else {
        (mean_theta, mean_r)
    };
    quantize(theta, r, spec)
}

/// [`lane_to_hough_point_with`] using the default bottom fraction.
pub fn lane_to_hough_point(
    lane: &LanePolyline,
    sample_count: usize,
    spec: &HoughSpec,
) -> Result<HoughPoint> {
    lane_to_hough_point_with(lane, sample_count, DEFAULT_BOTTOM_FRACTION, spec)
}

/// Gaussian splat value at squared bin distance `d2` for a given radius.
/// Sigma follows the usual keypoint-heatmap convention of radius / 3.
fn splat_value(d2: f64, radius: usize) -> f32 {
    let sigma = radius as f64 / 3.0;
    (-d2 / (2.0 * sigma * sigma)).exp() as f32
}

/// Build the ground-truth Hough probability map for a lane set.
///
/// Each lane contributes an unnormalized Gaussian bump of the given radius at
/// its Hough point; overlapping bumps combine by elementwise max, so peak
/// cells hold exactly 1.0.
pub fn render_hough_label(
    lanes: &LaneSet,
    spec: &HoughSpec,
    splat_radius: usize,
) -> Result<HoughLabel> {
    let mut map = Grid::zeros(spec.theta_bins, spec.r_bins);
    let mut peaks = Vec::with_capacity(lanes.len());
    let radius = splat_radius.max(1) as i64;
    for lane in &lanes.lanes {
        let peak = lane_to_hough_point(lane, DEFAULT_SAMPLE_COUNT, spec).map_err(|e| match e {
            Error::OutOfRange(msg) => Error::OutOfRange(format!("lane {}: {msg}", lane.id)),
            Error::DegenerateLane { .. } => Error::DegenerateLane { id: Some(lane.id) },
            other => other,
        })?;
        let (pk, pr) = (peak.theta_idx as i64, peak.r_idx as i64);
        for dk in -radius..=radius {
            let k = pk + dk;
            if k < 0 || k >= spec.theta_bins as i64 {
                continue;
            }
            for dr in -radius..=radius {
                let r = pr + dr;
                if r < 0 || r >= spec.r_bins as i64 {
                    continue;
                }
                let v = splat_value((dk * dk + dr * dr) as f64, splat_radius.max(1));
                let cell = map.at_mut(k as usize, r as usize);
                if v > *cell {
                    *cell = v;
                }
            }
        }
        peaks.push(peak);
    }
    Ok(HoughLabel { map, peaks })
}

/// Rasterize the bin-center line of each peak into a binary grid.
///
/// The spec's image rectangle is mapped onto `out_shape`; a pixel is set when
/// its center lies within `thickness / 2` of any peak line, measured in
/// output pixels.
pub fn render_line_map(
    peaks: &[HoughPoint],
    spec: &HoughSpec,
    out_shape: (usize, usize),
    thickness: f64,
) -> Result<Grid> {
    let (out_h, out_w) = out_shape;
    let mut map = Grid::zeros(out_h, out_w);
    if out_h == 0 || out_w == 0 {
        return Ok(map);
    }
    let sx = out_w as f64 / spec.image_width as f64;
    let sy = out_h as f64 / spec.image_height as f64;
    let to_out = |(x, y): (f64, f64)| ((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
    let half = thickness / 2.0;
    for peak in peaks {
        let line = hough_to_line(peak, spec)?;
        // Two well-separated points on the line, transformed into output
        // coordinates; a line stays a line under axis scaling.
        let (sin, cos) = line.theta.sin_cos();
        let base = (line.rho * cos, line.rho * sin);
        let dir = (-sin, cos);
        let span = spec.diagonal().max(1.0);
        let p1 = to_out((base.0 - dir.0 * span, base.1 - dir.1 * span));
        let p2 = to_out((base.0 + dir.0 * span, base.1 + dir.1 * span));
        let out_line = Line::through(p1, p2)?;
        for y in 0..out_h {
            for x in 0..out_w {
                if out_line.signed_distance(x as f64, y as f64).abs() <= half {
                    *map.at_mut(y, x) = 1.0;
                }
            }
        }
    }
    Ok(map)
}
