//! Deep Hough transform: the forward accumulator from Euclidean feature maps
//! into `(theta, r)` parameter space, its exact adjoint (the reverse Hough
//! transform), and hierarchical multi-scale aggregation.
//!
//! The operator is a 0/1 linear map: for every pixel and every theta bin the
//! pixel's channel vector is added into exactly one `(theta, r)` cell, so the
//! adjoint is the transpose scatter and also serves as the gradient. Sums are
//! accumulated in f64 and emitted as f32; both kernels fix their summation
//! order per output cell, so results are bitwise reproducible at any thread
//! count.

use crate::error::{Error, Result};
use crate::grid::Tensor3;
use crate::hough::HoughSpec;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Precomputed pixel-to-bin lookup for one spatial grid under one spec.
///
/// `forward` is theta-major: entry `k * (h*w) + p` is the r bin pixel `p`
/// feeds under theta bin `k`. `reverse_*` is the exact transpose in CSR form:
/// for each `(theta, r)` cell, the list of contributing pixels.
#[derive(Debug, Clone)]
pub struct BinTable {
    theta_bins: usize,
    r_bins: usize,
    height: usize,
    width: usize,
    forward: Vec<u32>,
    reverse_offsets: Vec<u32>,
    reverse_pixels: Vec<u32>,
}

impl BinTable {
    /// Build the lookup for `spec` over the spatial grid it binds.
    ///
    /// Fails if the spec does not cover the grid (some pixel maps outside
    /// `[r_min, r_max]` for some theta) or the shapes disagree.
    pub fn build(spec: &HoughSpec, spatial_shape: (usize, usize)) -> Result<Self> {
        let (h, w) = spatial_shape;
        if spec.image_height != h || spec.image_width != w {
            return Err(Error::shape(
                format!("spec bound to {}x{}", spec.image_height, spec.image_width),
                format!("grid {h}x{w}"),
            ));
        }
        let n = h * w;
        let theta = spec.theta_bins;
        let r_bins = spec.r_bins;
        let (cx, cy) = spec.origin_offset();

        let mut forward = vec![0u32; theta * n];
        for k in 0..theta {
            let (sin, cos) = spec.theta_center(k).sin_cos();
            let row = &mut forward[k * n..(k + 1) * n];
            for y in 0..h {
                let ys = (y as f64 - cy) * sin;
                for x in 0..w {
                    let r = (x as f64 - cx) * cos + ys;
                    let bin = spec.r_to_bin_unchecked(r);
                    if bin < 0 || bin >= r_bins as i64 || r < spec.r_min || r > spec.r_max {
                        return Err(Error::OutOfRange(format!(
                            "pixel ({x}, {y}) maps to r={r:.3} outside [{}, {}] at theta bin {k}",
                            spec.r_min, spec.r_max
                        )));
                    }
                    row[y * w + x] = bin as u32;
                }
            }
        }

        // Transpose into CSR reverse lists, cell-major (k * r_bins + r).
        let cells = theta * r_bins;
        let mut counts = vec![0u32; cells];
        for k in 0..theta {
            for p in 0..n {
                counts[k * r_bins + forward[k * n + p] as usize] += 1;
            }
        }
        let mut reverse_offsets = vec![0u32; cells + 1];
        for i in 0..cells {
            reverse_offsets[i + 1] = reverse_offsets[i] + counts[i];
        }
        let mut cursor: Vec<u32> = reverse_offsets[..cells].to_vec();
        let mut reverse_pixels = vec![0u32; theta * n];
        for k in 0..theta {
            for p in 0..n {
                let cell = k * r_bins + forward[k * n + p] as usize;
                reverse_pixels[cursor[cell] as usize] = p as u32;
                cursor[cell] += 1;
            }
        }

        Ok(BinTable {
            theta_bins: theta,
            r_bins,
            height: h,
            width: w,
            forward,
            reverse_offsets,
            reverse_pixels,
        })
    }

    pub fn theta_bins(&self) -> usize {
        self.theta_bins
    }

    pub fn r_bins(&self) -> usize {
        self.r_bins
    }

    pub fn spatial_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// The r bin pixel `p` (flat index) feeds under theta bin `k`.
    #[inline]
    pub fn r_bin_of(&self, p: usize, k: usize) -> usize {
        self.forward[k * self.height * self.width + p] as usize
    }

    /// Pixels contributing to cell `(k, r)`; the transpose of the forward map.
    pub fn pixels_of(&self, k: usize, r: usize) -> &[u32] {
        let cell = k * self.r_bins + r;
        let lo = self.reverse_offsets[cell] as usize;
        let hi = self.reverse_offsets[cell + 1] as usize;
        &self.reverse_pixels[lo..hi]
    }

    fn check_spatial(&self, t: &Tensor3) -> Result<()> {
        if t.height() != self.height || t.width() != self.width {
            return Err(Error::shape(
                format!("spatial {}x{}", self.height, self.width),
                format!("{}x{}", t.height(), t.width()),
            ));
        }
        Ok(())
    }

    fn check_hough(&self, t: &Tensor3) -> Result<()> {
        if t.height() != self.theta_bins || t.width() != self.r_bins {
            return Err(Error::shape(
                format!("hough {}x{}", self.theta_bins, self.r_bins),
                format!("{}x{}", t.height(), t.width()),
            ));
        }
        Ok(())
    }
}

/// One output row of the forward accumulator: all r bins of channel plane
/// `input_plane` under theta bin `k`.
fn accumulate_theta_row(out_row: &mut [f32], input_plane: &[f32], table_row: &[u32]) {
    let mut acc = vec![0.0f64; out_row.len()];
    for (p, &bin) in table_row.iter().enumerate() {
        acc[bin as usize] += input_plane[p] as f64;
    }
    for (o, a) in out_row.iter_mut().zip(&acc) {
        *o = *a as f32;
    }
}

/// Deep Hough transform: scatter-add every pixel's channel vector into one
/// `(theta, r)` cell per theta bin. Pure summation, no normalization; channel
/// count is preserved.
pub fn dht_forward(features: &Tensor3, table: &BinTable) -> Result<Tensor3> {
    table.check_spatial(features)?;
    let c = features.channels();
    let n = features.plane_len();
    let theta = table.theta_bins;
    let r_bins = table.r_bins;
    let mut out = Tensor3::zeros(c, theta, r_bins);

    // One contiguous output row per (channel, theta) pair; each row has a
    // single writer and a fixed pixel order, hence bitwise determinism.
    let run = |(row_idx, out_row): (usize, &mut [f32])| {
        let ch = row_idx / theta;
        let k = row_idx % theta;
        accumulate_theta_row(
            out_row,
            &features.data()[ch * n..(ch + 1) * n],
            &table.forward[k * n..(k + 1) * n],
        );
    };
    #[cfg(feature = "parallel")]
    out.data_mut()
        .par_chunks_mut(r_bins)
        .enumerate()
        .for_each(run);
    #[cfg(not(feature = "parallel"))]
    out.data_mut().chunks_mut(r_bins).enumerate().for_each(run);

    Ok(out)
}

/// One output spatial row of the adjoint: `out[p] = sum_k hough[k, rbin(p, k)]`.
fn spread_spatial_row(out_row: &mut [f32], hough_plane: &[f32], table: &BinTable, row_start: usize) {
    let n = table.height * table.width;
    let w = out_row.len();
    let mut acc = vec![0.0f64; w];
    for k in 0..table.theta_bins {
        let hough_row = &hough_plane[k * table.r_bins..(k + 1) * table.r_bins];
        let table_row = &table.forward[k * n + row_start..k * n + row_start + w];
        for (a, &bin) in acc.iter_mut().zip(table_row) {
            *a += hough_row[bin as usize] as f64;
        }
    }
    for (o, a) in out_row.iter_mut().zip(&acc) {
        *o = *a as f32;
    }
}

/// Reverse Hough transform: the exact adjoint (transpose) of [`dht_forward`]
/// under the standard inner product. Spreads every parameter cell's value
/// along its image line.
pub fn rht_reverse(hough: &Tensor3, table: &BinTable) -> Result<Tensor3> {
    table.check_hough(hough)?;
    let c = hough.channels();
    let plane = table.theta_bins * table.r_bins;
    let w = table.width;
    let mut out = Tensor3::zeros(c, table.height, w);

    let run = |(row_idx, out_row): (usize, &mut [f32])| {
        let ch = row_idx / table.height;
        let y = row_idx % table.height;
        spread_spatial_row(
            out_row,
            &hough.data()[ch * plane..(ch + 1) * plane],
            table,
            y * w,
        );
    };
    #[cfg(feature = "parallel")]
    out.data_mut().par_chunks_mut(w).enumerate().for_each(run);
    #[cfg(not(feature = "parallel"))]
    out.data_mut().chunks_mut(w).enumerate().for_each(run);

    Ok(out)
}

/// Gradient of [`dht_forward`] with respect to its input: the adjoint applied
/// to the upstream gradient. Same contract as [`rht_reverse`]; named
/// separately so the pipeline's backward pass reads as such.
pub fn dht_backward(upstream_grad: &Tensor3, table: &BinTable) -> Result<Tensor3> {
    rht_reverse(upstream_grad, table)
}

/// Bilinear upsampling, align-corners-false: source coordinate of output
/// pixel `d` is `(d + 0.5) * src/dst - 0.5`, clamped to the source. Exact on
/// constants and the identity at equal sizes.
pub fn upsample_bilinear(input: &Tensor3, target: (usize, usize)) -> Result<Tensor3> {
    let (th, tw) = target;
    let (c, sh, sw) = input.shape();
    if th < sh || tw < sw {
        return Err(Error::InvalidConfig(format!(
            "upsample target {th}x{tw} below source {sh}x{sw}"
        )));
    }
    if (th, tw) == (sh, sw) {
        return Ok(input.clone());
    }
    let ys = axis_weights(th, sh);
    let xs = axis_weights(tw, sw);
    let mut out = Tensor3::zeros(c, th, tw);
    for ch in 0..c {
        let src = input.channel(ch);
        let dst = out.channel_mut(ch);
        for (dy, &(y0, y1, fy)) in ys.iter().enumerate() {
            let r0 = &src[y0 * sw..y0 * sw + sw];
            let r1 = &src[y1 * sw..y1 * sw + sw];
            let dst_row = &mut dst[dy * tw..(dy + 1) * tw];
            for (dx, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = r0[x0] as f64 + fx * (r0[x1] as f64 - r0[x0] as f64);
                let bot = r1[x0] as f64 + fx * (r1[x1] as f64 - r1[x0] as f64);
                dst_row[dx] = (top + fy * (bot - top)) as f32;
            }
        }
    }
    Ok(out)
}

/// Per-axis source indices and interpolation weight for align-corners-false
/// bilinear resampling.
fn axis_weights(dst: usize, src: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Adjoint of [`upsample_bilinear`]: scatter each output gradient back to the
/// source corners with the interpolation weights.
pub fn upsample_bilinear_backward(grad_out: &Tensor3, source_shape: (usize, usize)) -> Result<Tensor3> {
    let (sh, sw) = source_shape;
    let (c, th, tw) = grad_out.shape();
    if th < sh || tw < sw {
        return Err(Error::InvalidConfig(format!(
            "upsample target {th}x{tw} below source {sh}x{sw}"
        )));
    }
    if (th, tw) == (sh, sw) {
        return Ok(grad_out.clone());
    }
    let ys = axis_weights(th, sh);
    let xs = axis_weights(tw, sw);
    let mut out = Tensor3::zeros(c, sh, sw);
    for ch in 0..c {
        let mut acc = vec![0.0f64; sh * sw];
        let g = grad_out.channel(ch);
        for (dy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (dx, &(x0, x1, fx)) in xs.iter().enumerate() {
                let v = g[dy * tw + dx] as f64;
                acc[y0 * sw + x0] += v * (1.0 - fy) * (1.0 - fx);
                acc[y0 * sw + x1] += v * (1.0 - fy) * fx;
                acc[y1 * sw + x0] += v * fy * (1.0 - fx);
                acc[y1 * sw + x1] += v * fy * fx;
            }
        }
        for (o, a) in out.channel_mut(ch).iter_mut().zip(&acc) {
            *o = *a as f32;
        }
    }
    Ok(out)
}

/// Hierarchical aggregation: per-scale DHT, bilinear upsampling of each Hough
/// feature to `target_shape` and channel concatenation.
///
/// Exactly three scales, at descending resolutions. The learned fusion
/// convolution lives in the network; this returns the concatenated stack.
pub fn multi_scale_dht(
    features: &[Tensor3],
    tables: &[BinTable],
    target_shape: (usize, usize),
) -> Result<Tensor3> {
    if features.len() != 3 || tables.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "multi-scale aggregation takes exactly 3 scales, got {} features / {} tables",
            features.len(),
            tables.len()
        )));
    }
    let mut per_scale = Vec::with_capacity(3);
    for (f, t) in features.iter().zip(tables) {
        per_scale.push(upsample_bilinear(&dht_forward(f, t)?, target_shape)?);
    }
    Tensor3::concat_channels(&[&per_scale[0], &per_scale[1], &per_scale[2]])
}

/// Throughput report for the accumulator benchmark.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub forward_secs: f64,
    pub reverse_secs: f64,
    /// Pixel-theta scatter operations per second (forward pass).
    pub pixels_theta_per_sec: f64,
    /// Relative error of `sum(DHT x) = theta_bins * sum(x)`.
    pub mass_identity_rel_err: f64,
}

/// Time `iters` forward/adjoint passes over deterministic pseudo-data and
/// verify the mass identity on the run's own output.
pub fn bench_accumulator(spec: &HoughSpec, channels: usize, iters: usize) -> Result<BenchReport> {
    let shape = (spec.image_height, spec.image_width);
    let table = BinTable::build(spec, shape)?;
    let n = channels * shape.0 * shape.1;
    let data: Vec<f32> = (0..n)
        .map(|i| ((i as u64).wrapping_mul(2654435761) % 1000) as f32 / 1000.0)
        .collect();
    let input = Tensor3::from_vec(channels, shape.0, shape.1, data)?;

    let t0 = std::time::Instant::now();
    let mut hough = dht_forward(&input, &table)?;
    for _ in 1..iters.max(1) {
        hough = dht_forward(&input, &table)?;
    }
    let forward_secs = t0.elapsed().as_secs_f64();

    let t1 = std::time::Instant::now();
    let mut back = rht_reverse(&hough, &table)?;
    for _ in 1..iters.max(1) {
        back = rht_reverse(&hough, &table)?;
    }
    let reverse_secs = t1.elapsed().as_secs_f64();
    let _ = back;

    let expected = spec.theta_bins as f64 * input.sum();
    let got = hough.sum();
    let mass_identity_rel_err = if expected == 0.0 {
        got.abs()
    } else {
        ((got - expected) / expected).abs()
    };
    let ops = (iters.max(1) * channels * shape.0 * shape.1 * spec.theta_bins) as f64;
    Ok(BenchReport {
        forward_secs,
        reverse_secs,
        pixels_theta_per_sec: ops / forward_secs.max(1e-12),
        mass_identity_rel_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hough::{line_to_hough, HoughPoint, Line, Origin};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_spec(theta: usize, r: usize, h: usize, w: usize) -> HoughSpec {
        HoughSpec::centered(theta, r, w, h).unwrap()
    }

    fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor3 {
        let data = (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor3::from_vec(c, h, w, data).unwrap()
    }

    /// Unit-scale values on the 2^-10 lattice: the accumulator only adds, so
    /// every partial sum stays exactly representable in f32 and identities
    /// hold to f64 precision instead of f32 rounding noise.
    fn random_lattice_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor3 {
        let data = (0..c * h * w)
            .map(|_| (rng.random_range(-1.0f32..1.0) * 1024.0).round() / 1024.0)
            .collect();
        Tensor3::from_vec(c, h, w, data).unwrap()
    }

    #[test]
    fn table_on_1x1_grid() {
        let spec = small_spec(16, 8, 1, 1);
        let table = BinTable::build(&spec, (1, 1)).unwrap();
        // The sole pixel is the origin: r = 0 for every theta.
        let mid = spec.r_to_bin(0.0).unwrap();
        for k in 0..16 {
            assert_eq!(table.r_bin_of(0, k), mid);
        }
    }

    #[test]
    fn table_matches_naive_recompute() {
        let spec = small_spec(16, 16, 8, 8);
        let table = BinTable::build(&spec, (8, 8)).unwrap();
        let (cx, cy) = spec.origin_offset();
        for k in 0..16 {
            let theta = spec.theta_center(k);
            for y in 0..8 {
                for x in 0..8 {
                    let r = (x as f64 - cx) * theta.cos() + (y as f64 - cy) * theta.sin();
                    let expect = spec.r_to_bin(r).unwrap();
                    assert_eq!(table.r_bin_of(y * 8 + x, k), expect, "k={k} x={x} y={y}");
                }
            }
        }
    }

    #[test]
    fn table_rejects_uncovered_spec() {
        let spec = HoughSpec {
            theta_bins: 8,
            r_bins: 8,
            image_width: 8,
            image_height: 8,
            r_min: -2.0,
            r_max: 2.0,
            origin: Origin::Center,
        };
        assert!(BinTable::build(&spec, (8, 8)).is_err());
    }

    #[test]
    fn reverse_lists_are_exact_transpose() {
        let spec = small_spec(12, 17, 6, 5);
        let table = BinTable::build(&spec, (6, 5)).unwrap();
        let mut hits = 0;
        for k in 0..12 {
            for r in 0..17 {
                for &p in table.pixels_of(k, r) {
                    assert_eq!(table.r_bin_of(p as usize, k), r);
                    hits += 1;
                }
            }
        }
        assert_eq!(hits, 12 * 30);
    }

    #[test]
    fn zero_in_zero_out() {
        let spec = small_spec(10, 11, 4, 4);
        let table = BinTable::build(&spec, (4, 4)).unwrap();
        let zero = Tensor3::zeros(2, 4, 4);
        assert_eq!(dht_forward(&zero, &table).unwrap().sum(), 0.0);
        let zero_h = Tensor3::zeros(2, 10, 11);
        assert_eq!(rht_reverse(&zero_h, &table).unwrap().sum(), 0.0);
    }

    #[test]
    fn single_pixel_mass_and_support() {
        let spec = small_spec(14, 15, 5, 5);
        let table = BinTable::build(&spec, (5, 5)).unwrap();
        let mut x = Tensor3::zeros(1, 5, 5);
        *x.at_mut(0, 2, 3) = 2.5;
        let g = dht_forward(&x, &table).unwrap();
        assert_abs_diff_eq!(g.sum(), 2.5 * 14.0, epsilon = 1e-9);
        let nonzero = g.data().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzero, 14);
    }

    #[test]
    fn line_image_argmax_hits_line_bin() {
        for size in [6usize, 16, 32, 64] {
            let spec = HoughSpec::centered(size * 2, size * 2 + 1, size, size).unwrap();
            let table = BinTable::build(&spec, (size, size)).unwrap();
            let line = Line::through((1.0, 0.0), ((size - 1) as f64, (size - 2) as f64)).unwrap();
            let mut img = Tensor3::zeros(1, size, size);
            for y in 0..size {
                for x in 0..size {
                    if line.signed_distance(x as f64, y as f64).abs() <= 0.5 {
                        *img.at_mut(0, y, x) = 1.0;
                    }
                }
            }
            let g = dht_forward(&img, &table).unwrap();
            let flat = g.channel_grid(0).argmax();
            let (k, r) = (flat / spec.r_bins, flat % spec.r_bins);
            let expect = line_to_hough(&line, &spec).unwrap();
            // The expected bin must attain the max even if a discretization
            // tie puts the first argmax elsewhere.
            let max_v = g.channel_grid(0).max_value();
            assert!(
                (k, r) == (expect.theta_idx, expect.r_idx)
                    || g.at(0, expect.theta_idx, expect.r_idx) == max_v,
                "size {size}: argmax ({k}, {r}) vs expected ({}, {})",
                expect.theta_idx,
                expect.r_idx
            );
        }
    }

    #[test]
    fn one_hot_reverse_is_rasterized_line() {
        let spec = small_spec(20, 21, 9, 9);
        let table = BinTable::build(&spec, (9, 9)).unwrap();
        let point = HoughPoint::new(5, 12, 1.0);
        let mut h = Tensor3::zeros(1, 20, 21);
        *h.at_mut(0, 5, 12) = 1.0;
        let spatial = rht_reverse(&h, &table).unwrap();
        for p in 0..81 {
            let expect = if table.r_bin_of(p, 5) == point.r_idx {
                1.0
            } else {
                0.0
            };
            assert_eq!(spatial.data()[p], expect);
        }
    }

    #[test]
    fn adjoint_identity_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = small_spec(18, 25, 7, 10);
        let table = BinTable::build(&spec, (7, 10)).unwrap();
        for _ in 0..20 {
            let x = random_lattice_tensor(&mut rng, 3, 7, 10);
            let y = random_lattice_tensor(&mut rng, 3, 18, 25);
            let lhs = dht_forward(&x, &table).unwrap().dot(&y);
            let rhs = x.dot(&rht_reverse(&y, &table).unwrap());
            let denom = lhs.abs().max(rhs.abs()).max(1e-12);
            assert!(
                ((lhs - rhs) / denom).abs() < 1e-6,
                "adjoint mismatch {lhs} vs {rhs}"
            );
        }
        // Continuous inputs: the identity holds up to f32 emission, measured
        // against the operand norms.
        for _ in 0..20 {
            let x = random_tensor(&mut rng, 3, 7, 10);
            let y = random_tensor(&mut rng, 3, 18, 25);
            let ax = dht_forward(&x, &table).unwrap();
            let aty = rht_reverse(&y, &table).unwrap();
            let lhs = ax.dot(&y);
            let rhs = x.dot(&aty);
            let scale = (ax.dot(&ax).sqrt() * y.dot(&y).sqrt())
                .max(x.dot(&x).sqrt() * aty.dot(&aty).sqrt())
                .max(1e-12);
            assert!(
                ((lhs - rhs) / scale).abs() < 1e-6,
                "adjoint mismatch {lhs} vs {rhs} at scale {scale}"
            );
        }
    }

    #[test]
    fn linearity_and_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = small_spec(15, 19, 6, 6);
        let table = BinTable::build(&spec, (6, 6)).unwrap();
        let x = random_tensor(&mut rng, 2, 6, 6);
        let y = random_tensor(&mut rng, 2, 6, 6);
        let (a, b) = (0.7f32, -1.3f32);
        let mixed: Vec<f32> = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(&u, &v)| a * u + b * v)
            .collect();
        let mixed = Tensor3::from_vec(2, 6, 6, mixed).unwrap();
        let lhs = dht_forward(&mixed, &table).unwrap();
        let gx = dht_forward(&x, &table).unwrap();
        let gy = dht_forward(&y, &table).unwrap();
        for i in 0..lhs.data().len() {
            let want = a * gx.data()[i] + b * gy.data()[i];
            assert_abs_diff_eq!(lhs.data()[i], want, epsilon = 1e-4);
        }
        let rel = (lhs.sum() - 15.0 * mixed.sum()).abs() / (15.0 * mixed.sum()).abs().max(1e-12);
        assert!(rel < 1e-6);
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = small_spec(30, 41, 12, 16);
        let table = BinTable::build(&spec, (12, 16)).unwrap();
        let x = random_tensor(&mut rng, 4, 12, 16);
        let a = dht_forward(&x, &table).unwrap();
        let b = dht_forward(&x, &table).unwrap();
        assert_eq!(a.data(), b.data());
        let ra = rht_reverse(&a, &table).unwrap();
        let rb = rht_reverse(&b, &table).unwrap();
        assert_eq!(ra.data(), rb.data());
    }

    #[test]
    fn backward_of_sum_is_theta_bins() {
        // d/dx sum(DHT x) = theta_bins everywhere: an upstream gradient of
        // ones spreads back one hit per theta.
        let spec = small_spec(13, 23, 5, 7);
        let table = BinTable::build(&spec, (5, 7)).unwrap();
        let ones = Tensor3::from_vec(1, 13, 23, vec![1.0; 13 * 23]).unwrap();
        let g = dht_backward(&ones, &table).unwrap();
        for &v in g.data() {
            assert_eq!(v, 13.0);
        }
        let zero = Tensor3::zeros(1, 13, 23);
        assert_eq!(dht_backward(&zero, &table).unwrap().sum(), 0.0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        // Scalar loss L(x) = <DHT x, y> for fixed y; grad = RHT y. Lattice
        // inputs and a power-of-two step keep the linear map's central
        // difference free of rounding noise.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = small_spec(12, 13, 6, 6);
        let table = BinTable::build(&spec, (6, 6)).unwrap();
        let x = random_lattice_tensor(&mut rng, 1, 6, 6);
        let y = random_lattice_tensor(&mut rng, 1, 12, 13);
        let analytic = dht_backward(&y, &table).unwrap();
        let h = 1.0f32 / 1024.0;
        for p in 0..36 {
            let mut xp = x.clone();
            xp.data_mut()[p] += h;
            let mut xm = x.clone();
            xm.data_mut()[p] -= h;
            let lp = dht_forward(&xp, &table).unwrap().dot(&y);
            let lm = dht_forward(&xm, &table).unwrap().dot(&y);
            let fd = (lp - lm) / (2.0 * h as f64);
            let a = analytic.data()[p] as f64;
            let denom = a.abs().max(fd.abs()).max(1e-6);
            assert!(
                ((a - fd) / denom).abs() < 1e-4,
                "coord {p}: analytic {a} fd {fd}"
            );
        }
    }

    #[test]
    fn upsample_constant_and_identity() {
        let c = Tensor3::from_vec(1, 2, 2, vec![3.5; 4]).unwrap();
        let up = upsample_bilinear(&c, (5, 7)).unwrap();
        for &v in up.data() {
            assert_eq!(v, 3.5);
        }
        let same = upsample_bilinear(&c, (2, 2)).unwrap();
        assert_eq!(same.data(), c.data());
        assert!(upsample_bilinear(&c, (1, 2)).is_err());
    }

    #[test]
    fn upsample_ramp_closed_form() {
        // 2x2 ramp [[0,1],[2,3]] to 4x4; align-corners-false coordinates are
        // {0, 0.25, 0.75, 1} per axis and the ramp is bilinear, so the output
        // is 2*yc + xc.
        let ramp = Tensor3::from_vec(1, 2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let up = upsample_bilinear(&ramp, (4, 4)).unwrap();
        let coords = [0.0f32, 0.25, 0.75, 1.0];
        for (dy, &yc) in coords.iter().enumerate() {
            for (dx, &xc) in coords.iter().enumerate() {
                assert_abs_diff_eq!(up.at(0, dy, dx), 2.0 * yc + xc, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn upsample_backward_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(&mut rng, 2, 3, 4);
        let gy = random_tensor(&mut rng, 2, 7, 9);
        let up = upsample_bilinear(&x, (7, 9)).unwrap();
        let gx = upsample_bilinear_backward(&gy, (3, 4)).unwrap();
        let lhs = up.dot(&gy);
        let rhs = x.dot(&gx);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-6 * lhs.abs().max(1.0));
    }

    #[test]
    fn multi_scale_matches_primitive_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shapes = [(8usize, 12usize), (4, 6), (2, 3)];
        let mut tables = Vec::new();
        let mut feats = Vec::new();
        for (i, &(h, w)) in shapes.iter().enumerate() {
            let spec = HoughSpec::centered(16 >> i, (17 >> i).max(2), w, h).unwrap();
            tables.push(BinTable::build(&spec, (h, w)).unwrap());
            feats.push(random_tensor(&mut rng, 2, h, w));
        }
        let target = (16, 17);
        let got = multi_scale_dht(&feats, &tables, target).unwrap();
        assert_eq!(got.shape(), (6, 16, 17));
        // Independent composition of the two primitives.
        for s in 0..3 {
            let one =
                upsample_bilinear(&dht_forward(&feats[s], &tables[s]).unwrap(), target).unwrap();
            for c in 0..2 {
                assert_eq!(got.channel(s * 2 + c), one.channel(c), "scale {s} ch {c}");
            }
        }
        // Zero inputs give zero output.
        let zeros: Vec<Tensor3> = shapes
            .iter()
            .map(|&(h, w)| Tensor3::zeros(2, h, w))
            .collect();
        assert_eq!(multi_scale_dht(&zeros, &tables, target).unwrap().sum(), 0.0);
        // Scale-count mismatch.
        assert!(multi_scale_dht(&feats[..2], &tables, target).is_err());
    }

    #[test]
    fn multi_scale_target_equal_largest_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec0 = HoughSpec::centered(14, 15, 10, 8).unwrap();
        let spec1 = HoughSpec::centered(7, 8, 5, 4).unwrap();
        let spec2 = HoughSpec::centered(4, 4, 3, 2).unwrap();
        let tables = [
            BinTable::build(&spec0, (8, 10)).unwrap(),
            BinTable::build(&spec1, (4, 5)).unwrap(),
            BinTable::build(&spec2, (2, 3)).unwrap(),
        ];
        let feats = [
            random_tensor(&mut rng, 1, 8, 10),
            random_tensor(&mut rng, 1, 4, 5),
            random_tensor(&mut rng, 1, 2, 3),
        ];
        let got = multi_scale_dht(&feats, &tables, (14, 15)).unwrap();
        let direct = dht_forward(&feats[0], &tables[0]).unwrap();
        assert_eq!(got.channel(0), direct.channel(0));
    }

    #[test]
    fn bench_reports_clean_mass_identity() {
        let spec = HoughSpec::centered(24, 25, 16, 16).unwrap();
        let report = bench_accumulator(&spec, 1, 2).unwrap();
        assert!(report.mass_identity_rel_err < 1e-6);
        assert!(report.pixels_theta_per_sec > 0.0);
    }
}
