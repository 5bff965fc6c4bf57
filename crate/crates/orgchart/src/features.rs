//! Corner detection: Harris and Shi-Tomasi responses over the local
//! structure tensor, quality filtering with non-maximum suppression, and
//! bounding-box corner refinement.

use crate::error::{Diagnostic, DiagnosticKind, Error, Result};
use crate::imaging::Raster;
use crate::model::BBox;

/// Eigenvalues of the gaussian-weighted second-moment matrix at a pixel,
/// ordered `lambda1 >= lambda2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureTensor {
    pub lambda1: f64,
    pub lambda2: f64,
    pub window: u32,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerParams {
    /// Harris constant.
    pub k: f64,
    /// Acceptance threshold as a fraction of the maximum response.
    pub quality: f64,
    /// Minimum Euclidean distance between accepted corners.
    pub min_distance: f64,
    /// Odd patch size for the tensor window.
    pub window: u32,
    /// Gaussian weighting scale.
    pub sigma: f64,
}

impl Default for CornerParams {
    fn default() -> Self {
        Self {
            k: 0.04,
            quality: 0.01,
            min_distance: 7.0,
            window: 5,
            sigma: 1.0,
        }
    }
}

impl CornerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.quality > 0.0 && self.quality < 1.0) {
            return Err(Error::BadCornerParams(format!(
                "quality must be in (0,1), got {}",
                self.quality
            )));
        }
        if self.min_distance < 1.0 {
            return Err(Error::BadCornerParams(format!(
                "min_distance must be >= 1, got {}",
                self.min_distance
            )));
        }
        if !(self.k > 0.0 && self.k < 0.25) {
            return Err(Error::BadCornerParams(format!(
                "k must be in (0, 0.25), got {}",
                self.k
            )));
        }
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::BadWindow(self.window));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerPoint {
    pub x: u32,
    pub y: u32,
    pub response: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    Harris,
    ShiTomasi,
}

impl Detector {
    fn response(self, a: f64, b: f64, c: f64, k: f64) -> f64 {
        match self {
            Detector::Harris => a * c - b * b - k * (a + c) * (a + c),
            Detector::ShiTomasi => {
                // min eigenvalue of [a b; b c]
                0.5 * ((a + c) - ((a - c) * (a - c) + 4.0 * b * b).sqrt())
            }
        }
    }
}

/// `R = lambda1 * lambda2 - k (lambda1 + lambda2)^2`. Negative on edges.
pub fn harris_response(t: &StructureTensor, k: f64) -> f64 {
    t.lambda1 * t.lambda2 - k * (t.lambda1 + t.lambda2) * (t.lambda1 + t.lambda2)
}

/// `R = min(lambda1, lambda2)`. Zero on edges instead of negative.
pub fn shi_tomasi_response(t: &StructureTensor) -> f64 {
    t.lambda1.min(t.lambda2)
}

fn gaussian_weights_2d(window: u32, sigma: f64) -> Vec<f64> {
    let half = i64::from(window / 2);
    let mut w = Vec::with_capacity((window * window) as usize);
    let mut sum = 0.0;
    for dy in -half..=half {
        for dx in -half..=half {
            let g = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            w.push(g);
            sum += g;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Sobel x-gradient at (x, y) with replicated edges, on intensities
/// normalized to [0, 1]. Kernel scaled by 1/8 so gradients stay in [-1, 1].
fn sobel_at(gray: &Raster, x: i64, y: i64) -> (f64, f64) {
    let p = |dx: i64, dy: i64| f64::from(gray.get_clamped(x + dx, y + dy)) / 255.0;
    let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
    let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
    (gx / 8.0, gy / 8.0)
}

/// Second-moment matrix entries (a, b, c) = (sum Ix^2, sum IxIy, sum Iy^2)
/// under gaussian weights centered at (x, y).
fn tensor_entries(gray: &Raster, x: u32, y: u32, params: &CornerParams) -> (f64, f64, f64) {
    let half = i64::from(params.window / 2);
    let weights = gaussian_weights_2d(params.window, params.sigma);
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    let mut wi = 0;
    for dy in -half..=half {
        for dx in -half..=half {
            let (gx, gy) = sobel_at(gray, i64::from(x) + dx, i64::from(y) + dy);
            let w = weights[wi];
            wi += 1;
            a += w * gx * gx;
            b += w * gx * gy;
            c += w * gy * gy;
        }
    }
    (a, b, c)
}

/// Eigenvalues of the local second-moment matrix at (x, y).
pub fn structure_tensor(
    gray: &Raster,
    x: u32,
    y: u32,
    params: &CornerParams,
) -> Result<StructureTensor> {
    params.validate()?;
    let half = params.window / 2;
    if x < half || y < half || x + half >= gray.width() || y + half >= gray.height() {
        return Err(Error::OutOfBorder {
            x,
            y,
            window: params.window,
        });
    }
    let (a, b, c) = tensor_entries(gray, x, y, params);
    let d = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    Ok(StructureTensor {
        lambda1: 0.5 * ((a + c) + d),
        lambda2: 0.5 * ((a + c) - d),
        window: params.window,
        sigma: params.sigma,
    })
}

/// Dense corner-response map. Computing it once and reusing it for corner
/// listing and bbox refinement avoids re-evaluating the tensor per call.
#[derive(Debug, Clone)]
pub struct ResponseMap {
    width: u32,
    height: u32,
    margin: u32,
    values: Vec<f64>,
    max_response: f64,
}

impl ResponseMap {
    pub fn compute(gray: &Raster, params: &CornerParams, detector: Detector) -> Result<Self> {
        params.validate()?;
        let w = gray.width() as usize;
        let h = gray.height() as usize;
        let margin = params.window / 2;

        // Gradient product maps, then separable gaussian smoothing: equal to
        // the direct windowed sum at interior pixels.
        let mut ix2 = vec![0f64; w * h];
        let mut ixy = vec![0f64; w * h];
        let mut iy2 = vec![0f64; w * h];
        for y in 0..h {
            for x in 0..w {
                let (gx, gy) = sobel_at(gray, x as i64, y as i64);
                ix2[y * w + x] = gx * gx;
                ixy[y * w + x] = gx * gy;
                iy2[y * w + x] = gy * gy;
            }
        }
        let kernel = gaussian_kernel_1d(params.window, params.sigma);
        let a = smooth_separable(&ix2, w, h, &kernel);
        let b = smooth_separable(&ixy, w, h, &kernel);
        let c = smooth_separable(&iy2, w, h, &kernel);

        let mut values = vec![0f64; w * h];
        let mut max_response = 0f64;
        let m = margin as usize;
        for y in m..h - m {
            for x in m..w - m {
                let r = detector.response(a[y * w + x], b[y * w + x], c[y * w + x], params.k);
                values[y * w + x] = r;
                if r > max_response {
                    max_response = r;
                }
            }
        }
        Ok(Self {
            width: gray.width(),
            height: gray.height(),
            margin,
            values,
            max_response,
        })
    }

    pub fn max_response(&self) -> f64 {
        self.max_response
    }

    pub fn response_at(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// Local maxima above `quality * max_response`, accepted greedily by
    /// descending response (ties by y then x) with a minimum-distance
    /// exclusion. Deterministic for a fixed image.
    pub fn good_features(&self, params: &CornerParams) -> Vec<CornerPoint> {
        let threshold = params.quality * self.max_response;
        if self.max_response <= 0.0 {
            return Vec::new();
        }
        let w = self.width as usize;
        let mut candidates: Vec<CornerPoint> = Vec::new();
        for y in self.margin..self.height - self.margin {
            for x in self.margin..self.width - self.margin {
                let r = self.values[y as usize * w + x as usize];
                if r <= threshold {
                    continue;
                }
                let mut is_max = true;
                'nbr: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= i64::from(self.width) || ny >= i64::from(self.height)
                        {
                            continue;
                        }
                        if self.values[ny as usize * w + nx as usize] > r {
                            is_max = false;
                            break 'nbr;
                        }
                    }
                }
                if is_max {
                    candidates.push(CornerPoint { x, y, response: r });
                }
            }
        }
        candidates.sort_by(|p, q| {
            q.response
                .partial_cmp(&p.response)
                .expect("responses are finite")
                .then(p.y.cmp(&q.y))
                .then(p.x.cmp(&q.x))
        });
        let min_d2 = params.min_distance * params.min_distance;
        let mut accepted: Vec<CornerPoint> = Vec::new();
        for cand in candidates {
            let ok = accepted.iter().all(|a| {
                let dx = f64::from(a.x) - f64::from(cand.x);
                let dy = f64::from(a.y) - f64::from(cand.y);
                dx * dx + dy * dy >= min_d2
            });
            if ok {
                accepted.push(cand);
            }
        }
        accepted
    }

    /// Strongest response in the square ROI around (cx, cy), if any pixel
    /// beats `threshold`. Ties resolve to the smallest (y, x).
    fn best_in_roi(&self, cx: u32, cy: u32, radius: u32, threshold: f64) -> Option<(u32, u32)> {
        let x0 = cx.saturating_sub(radius).max(self.margin);
        let y0 = cy.saturating_sub(radius).max(self.margin);
        let x1 = (cx + radius).min(self.width.saturating_sub(self.margin + 1));
        let y1 = (cy + radius).min(self.height.saturating_sub(self.margin + 1));
        let mut best: Option<(u32, u32, f64)> = None;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let r = self.response_at(x, y);
                if r <= threshold {
                    continue;
                }
                match best {
                    Some((_, _, br)) if br >= r => {}
                    _ => best = Some((x, y, r)),
                }
            }
        }
        best.map(|(x, y, _)| (x, y))
    }

    /// Re-anchors the box's upper-left and bottom-right corners to the
    /// strongest nearby corner response. Corners with no response above the
    /// quality threshold stay put; a degenerate refinement keeps the
    /// original box and reports a warning.
    pub fn refine_bbox(
        &self,
        bbox: BBox,
        roi_radius: u32,
        quality: f64,
    ) -> (BBox, Option<Diagnostic>) {
        let threshold = quality * self.max_response;
        let (mut x1, mut y1) = (bbox.x1, bbox.y1);
        // Bottom-right corner pixel is (x2-1, y2-1) under the half-open box.
        let (mut bx, mut by) = (bbox.x2 - 1, bbox.y2 - 1);
        let mut any = false;
        if let Some((nx, ny)) = self.best_in_roi(bbox.x1, bbox.y1, roi_radius, threshold) {
            x1 = nx;
            y1 = ny;
            any = true;
        }
        if let Some((nx, ny)) = self.best_in_roi(bbox.x2 - 1, bbox.y2 - 1, roi_radius, threshold) {
            bx = nx;
            by = ny;
            any = true;
        }
        if !any {
            return (bbox, None);
        }
        if x1 >= bx || y1 >= by {
            return (
                bbox,
                Some(Diagnostic::new(
                    DiagnosticKind::DegenerateRefinement,
                    vec![],
                    format!(
                        "refined corners ({x1},{y1})-({bx},{by}) collapse; keeping original box"
                    ),
                )),
            );
        }
        (
            BBox {
                x1,
                y1,
                x2: bx + 1,
                y2: by + 1,
            },
            None,
        )
    }
}

fn gaussian_kernel_1d(size: u32, sigma: f64) -> Vec<f64> {
    let half = f64::from(size / 2);
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let d = f64::from(i) - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

fn smooth_separable(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let half = kernel.len() as i64 / 2;
    let mut horiz = vec![0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in kernel.iter().enumerate() {
                let sx = (x as i64 + k as i64 - half).clamp(0, w as i64 - 1) as usize;
                acc += wk * src[y * w + sx];
            }
            horiz[y * w + x] = acc;
        }
    }
    let mut out = vec![0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in kernel.iter().enumerate() {
                let sy = (y as i64 + k as i64 - half).clamp(0, h as i64 - 1) as usize;
                acc += wk * horiz[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Detects corners over the whole image. Thin wrapper that computes the
/// response map and filters it; callers doing repeated queries should hold
/// a [`ResponseMap`] instead.
pub fn good_features(
    gray: &Raster,
    params: &CornerParams,
    detector: Detector,
) -> Result<Vec<CornerPoint>> {
    if gray.width() < params.window || gray.height() < params.window {
        return Ok(Vec::new());
    }
    Ok(ResponseMap::compute(gray, params, detector)?.good_features(params))
}

/// Refines a detected box against corner responses with default parameters
/// and the Shi-Tomasi detector.
pub fn refine_bbox_corners(
    gray: &Raster,
    bbox: BBox,
    roi_radius: u32,
) -> Result<(BBox, Option<Diagnostic>)> {
    let params = CornerParams::default();
    let map = ResponseMap::compute(gray, &params, Detector::ShiTomasi)?;
    Ok(map.refine_bbox(bbox, roi_radius, params.quality))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw_rect_outline(img: &mut Raster, b: BBox) {
        for x in b.x1..b.x2 {
            img.set_gray(x, b.y1, 0);
            img.set_gray(x, b.y2 - 1, 0);
        }
        for y in b.y1..b.y2 {
            img.set_gray(b.x1, y, 0);
            img.set_gray(b.x2 - 1, y, 0);
        }
    }

    #[test]
    fn tensor_zero_on_constant_image() {
        let g = Raster::filled(21, 21, 180);
        let t = structure_tensor(&g, 10, 10, &CornerParams::default()).unwrap();
        assert!(t.lambda1.abs() < 1e-12);
        assert!(t.lambda2.abs() < 1e-12);
    }

    #[test]
    fn tensor_edge_has_one_dominant_eigenvalue() {
        let mut g = Raster::filled(21, 21, 255);
        for y in 0..21 {
            for x in 10..21 {
                g.set_gray(x, y, 0);
            }
        }
        let t = structure_tensor(&g, 10, 10, &CornerParams::default()).unwrap();
        assert!(t.lambda1 > 1e-4);
        assert!(t.lambda2 < 1e-6 * t.lambda1.max(1.0));
    }

    #[test]
    fn tensor_corner_has_two_eigenvalues() {
        // Filled quadrant: dark where x >= 10 and y >= 10.
        let mut g = Raster::filled(21, 21, 255);
        for y in 10..21 {
            for x in 10..21 {
                g.set_gray(x, y, 0);
            }
        }
        let t = structure_tensor(&g, 10, 10, &CornerParams::default()).unwrap();
        assert!(t.lambda2 > 0.1 * t.lambda1, "{t:?}");
        assert!(t.lambda1 >= t.lambda2);
        assert!(t.lambda2 >= -1e-9);
    }

    #[test]
    fn response_formulas() {
        let t = |l1: f64, l2: f64| StructureTensor {
            lambda1: l1,
            lambda2: l2,
            window: 5,
            sigma: 1.0,
        };
        assert_eq!(harris_response(&t(0.0, 0.0), 0.04), 0.0);
        assert!((harris_response(&t(4.0, 0.0), 0.04) + 0.64).abs() < 1e-12);
        assert!((harris_response(&t(2.0, 2.0), 0.04) - 3.36).abs() < 1e-12);
        assert_eq!(shi_tomasi_response(&t(0.0, 0.0)), 0.0);
        assert_eq!(shi_tomasi_response(&t(4.0, 0.0)), 0.0);
        assert_eq!(shi_tomasi_response(&t(2.0, 2.0)), 2.0);
    }

    #[test]
    fn constant_image_yields_no_corners() {
        let g = Raster::filled(64, 64, 128);
        for det in [Detector::Harris, Detector::ShiTomasi] {
            let pts = good_features(&g, &CornerParams::default(), det).unwrap();
            assert!(pts.is_empty());
        }
    }

    #[test]
    fn rectangle_outline_yields_four_corners() {
        let mut g = Raster::filled(100, 80, 255);
        let b = BBox::new(20, 15, 75, 60).unwrap();
        draw_rect_outline(&mut g, b);
        let truth = [(20u32, 15u32), (74, 15), (20, 59), (74, 59)];
        for det in [Detector::Harris, Detector::ShiTomasi] {
            let pts = good_features(&g, &CornerParams::default(), det).unwrap();
            assert_eq!(pts.len(), 4, "{det:?}: {pts:?}");
            for (tx, ty) in truth {
                let hit = pts.iter().any(|p| {
                    (f64::from(p.x) - f64::from(tx)).abs() <= 2.0
                        && (f64::from(p.y) - f64::from(ty)).abs() <= 2.0
                });
                assert!(hit, "{det:?}: vertex ({tx},{ty}) not found in {pts:?}");
            }
        }
    }

    #[test]
    fn min_distance_suppresses_near_duplicates() {
        let mut g = Raster::filled(120, 80, 255);
        // Two rectangles 3 px apart share a near-duplicate corner pair.
        draw_rect_outline(&mut g, BBox::new(20, 20, 50, 50).unwrap());
        draw_rect_outline(&mut g, BBox::new(53, 20, 83, 50).unwrap());
        let params = CornerParams::default();
        let pts = good_features(&g, &params, Detector::ShiTomasi).unwrap();
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                let dx = f64::from(p.x) - f64::from(q.x);
                let dy = f64::from(p.y) - f64::from(q.y);
                assert!(
                    (dx * dx + dy * dy).sqrt() >= params.min_distance,
                    "{p:?} vs {q:?}"
                );
            }
        }
        // The adjacent corner pairs collapse: fewer than 8 points survive.
        assert!(pts.len() < 8, "{pts:?}");
        assert!(pts.len() >= 4);
    }

    #[test]
    fn raising_quality_never_adds_corners() {
        let mut g = Raster::filled(100, 80, 255);
        draw_rect_outline(&mut g, BBox::new(10, 10, 50, 40).unwrap());
        draw_rect_outline(&mut g, BBox::new(60, 30, 90, 70).unwrap());
        let mut prev = usize::MAX;
        for q in [0.005, 0.01, 0.05, 0.2, 0.8] {
            let params = CornerParams {
                quality: q,
                ..CornerParams::default()
            };
            let n = good_features(&g, &params, Detector::ShiTomasi).unwrap().len();
            assert!(n <= prev, "quality {q} raised corner count to {n}");
            prev = n;
        }
    }

    #[test]
    fn refine_recovers_offset_bbox() {
        let mut g = Raster::filled(120, 100, 255);
        let truth = BBox::new(30, 25, 90, 75).unwrap();
        draw_rect_outline(&mut g, truth);
        let offset = BBox::new(33, 28, 93, 78).unwrap();
        let (refined, warn) = refine_bbox_corners(&g, offset, 5).unwrap();
        assert!(warn.is_none());
        assert!((i64::from(refined.x1) - i64::from(truth.x1)).abs() <= 1);
        assert!((i64::from(refined.y1) - i64::from(truth.y1)).abs() <= 1);
        assert!((i64::from(refined.x2) - i64::from(truth.x2)).abs() <= 1);
        assert!((i64::from(refined.y2) - i64::from(truth.y2)).abs() <= 1);
    }

    #[test]
    fn refine_exact_bbox_stays_put() {
        let mut g = Raster::filled(120, 100, 255);
        let truth = BBox::new(30, 25, 90, 75).unwrap();
        draw_rect_outline(&mut g, truth);
        let (refined, warn) = refine_bbox_corners(&g, truth, 5).unwrap();
        assert!(warn.is_none());
        assert!((i64::from(refined.x1) - i64::from(truth.x1)).abs() <= 1);
        assert!((i64::from(refined.y1) - i64::from(truth.y1)).abs() <= 1);
        assert!((i64::from(refined.x2) - i64::from(truth.x2)).abs() <= 1);
        assert!((i64::from(refined.y2) - i64::from(truth.y2)).abs() <= 1);
    }

    #[test]
    fn refine_blank_region_unchanged() {
        let mut g = Raster::filled(200, 100, 255);
        draw_rect_outline(&mut g, BBox::new(10, 10, 40, 40).unwrap());
        let blank = BBox::new(120, 30, 180, 80).unwrap();
        let (refined, _) = refine_bbox_corners(&g, blank, 5).unwrap();
        assert_eq!(refined, blank);
    }
}
