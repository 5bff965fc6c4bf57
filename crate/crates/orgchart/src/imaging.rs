//! Raster buffers, grayscale conversion, histograms, and binarization.
//!
//! Binarization is the hinge of the whole extraction: the traversal walks
//! foreground pixels, so the threshold decides which connections survive.
//! Four strategies live here: a fixed global threshold, adaptive mean and
//! gaussian thresholds, whole-image Otsu, and Otsu restricted to windows
//! pooled around junction points.

use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit raster, 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::RasterShape {
                width,
                height,
                channels,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Gray raster filled with a constant intensity.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            channels: 1,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// First-channel value at (x, y). For gray rasters this is the intensity.
    pub fn get(&self, x: u32, y: u32) -> u8 {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels as usize;
        self.data[idx]
    }

    pub fn set_gray(&mut self, x: u32, y: u32, value: u8) {
        debug_assert_eq!(self.channels, 1);
        let idx = y as usize * self.width as usize + x as usize;
        self.data[idx] = value;
    }

    /// Intensity with indices clamped to the image bounds.
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let cx = x.clamp(0, i64::from(self.width) - 1) as u32;
        let cy = y.clamp(0, i64::from(self.height) - 1) as u32;
        self.get(cx, cy)
    }

    /// Decodes a PNG. RGBA is flattened over white; 16-bit inputs are
    /// rescaled to 8-bit.
    pub fn load_png(path: &Path) -> Result<Raster> {
        let img = image::open(path)?;
        let raster = match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Raster::new(w, h, 1, g.into_raw())?
            }
            image::DynamicImage::ImageRgba8(rgba) => {
                let (w, h) = rgba.dimensions();
                let mut data = Vec::with_capacity(w as usize * h as usize * 3);
                for p in rgba.pixels() {
                    let a = f64::from(p[3]) / 255.0;
                    for c in 0..3 {
                        let v = f64::from(p[c]) * a + 255.0 * (1.0 - a);
                        data.push(v.round().clamp(0.0, 255.0) as u8);
                    }
                }
                Raster::new(w, h, 3, data)?
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                Raster::new(w, h, 3, rgb.into_raw())?
            }
        };
        Ok(raster)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        match self.channels {
            1 => {
                let img = image::GrayImage::from_raw(self.width, self.height, self.data.clone())
                    .expect("raster shape validated at construction");
                img.save(path)?;
            }
            3 => {
                let img = image::RgbImage::from_raw(self.width, self.height, self.data.clone())
                    .expect("raster shape validated at construction");
                img.save(path)?;
            }
            c => return Err(Error::UnsupportedChannels(c)),
        }
        Ok(())
    }
}

/// Converts to a single luma channel with `round(0.299 R + 0.587 G + 0.114 B)`;
/// gray input is returned unchanged.
pub fn grayscale(img: &Raster) -> Result<Raster> {
    match img.channels {
        1 => Ok(img.clone()),
        3 => {
            let mut data = Vec::with_capacity(img.width as usize * img.height as usize);
            for px in img.data.chunks_exact(3) {
                let v = 0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2]);
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
            Raster::new(img.width, img.height, 1, data)
        }
        c => Err(Error::UnsupportedChannels(c)),
    }
}

/// 256-bin intensity histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: [u64; 256],
    total: u64,
}

impl Histogram {
    pub fn from_counts(bins: [u64; 256]) -> Self {
        let total = bins.iter().sum();
        Self { bins, total }
    }

    pub fn from_gray(img: &Raster) -> Result<Self> {
        if img.channels != 1 {
            return Err(Error::UnsupportedChannels(img.channels));
        }
        let mut bins = [0u64; 256];
        for &v in &img.data {
            bins[v as usize] += 1;
        }
        Ok(Self::from_counts(bins))
    }

    pub fn count(&self, intensity: u8) -> u64 {
        self.bins[intensity as usize]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// P(i) = count(i) / total.
    pub fn probability(&self, intensity: u8) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.bins[intensity as usize] as f64 / self.total as f64
        }
    }
}

/// Otsu split at threshold `t`: class 1 holds intensities <= t, class 2
/// the rest. Empty classes contribute zero weighted variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub t: u8,
    /// Weighted within-class variance at `t`.
    pub sigma_w2: f64,
    pub w1: f64,
    pub w2: f64,
    pub sigma1_2: f64,
    pub sigma2_2: f64,
}

/// Minimizes the weighted within-class variance
/// `sigma_w2(t) = w1(t) sigma1_2(t) + w2(t) sigma2_2(t)` over all
/// thresholds whose low class is nonempty, returning the smallest
/// minimizer. Restricting to `w1(t) > 0` keeps the degenerate
/// single-intensity histogram deterministic: all pixels at v yield t = v.
pub fn otsu_threshold(hist: &Histogram) -> Result<ThresholdResult> {
    if hist.total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let total = hist.total as f64;

    // Prefix sums over counts, i*count, i^2*count.
    let mut cnt = 0u64;
    let mut sum = 0f64;
    let mut sumsq = 0f64;
    let grand_sum: f64 = hist
        .bins
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let grand_sumsq: f64 = hist
        .bins
        .iter()
        .enumerate()
        .map(|(i, &c)| (i * i) as f64 * c as f64)
        .sum();

    let mut best: Option<ThresholdResult> = None;
    for t in 0usize..=255 {
        cnt += hist.bins[t];
        sum += t as f64 * hist.bins[t] as f64;
        sumsq += (t * t) as f64 * hist.bins[t] as f64;
        if cnt == 0 {
            continue;
        }
        let n1 = cnt as f64;
        let n2 = total - n1;
        let w1 = n1 / total;
        let w2 = n2 / total;
        let sigma1_2 = (sumsq / n1 - (sum / n1).powi(2)).max(0.0);
        let sigma2_2 = if n2 > 0.0 {
            let s2 = grand_sum - sum;
            let sq2 = grand_sumsq - sumsq;
            (sq2 / n2 - (s2 / n2).powi(2)).max(0.0)
        } else {
            0.0
        };
        let sigma_w2 = w1 * sigma1_2 + w2 * sigma2_2;
        let better = match &best {
            None => true,
            Some(b) => sigma_w2 < b.sigma_w2,
        };
        if better {
            best = Some(ThresholdResult {
                t: t as u8,
                sigma_w2,
                w1,
                w2,
                sigma1_2,
                sigma2_2,
            });
        }
    }
    Ok(best.expect("total > 0 guarantees at least one candidate"))
}

/// Binary image: 0 = foreground (ink), 255 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new_background(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![255; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_foreground(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize] == 0
    }

    pub fn set_foreground(&mut self, x: u32, y: u32, fg: bool) {
        let idx = y as usize * self.width as usize + x as usize;
        self.data[idx] = if fg { 0 } else { 255 };
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 0).count()
    }

    pub fn to_raster(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.clone(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_raster().save_png(path)
    }
}

/// Maps intensities <= t to foreground (dark ink on light background).
pub fn binarize(gray: &Raster, t: u8) -> Result<BinaryMask> {
    if gray.channels != 1 {
        return Err(Error::UnsupportedChannels(gray.channels));
    }
    let data = gray.data.iter().map(|&v| if v <= t { 0 } else { 255 }).collect();
    Ok(BinaryMask {
        width: gray.width,
        height: gray.height,
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptiveMode {
    Mean,
    Gaussian,
}

/// Local thresholding: a pixel is foreground iff its intensity is at most
/// the windowed (mean | gaussian-weighted mean) minus `c`. Borders are
/// handled by edge replication; gaussian sigma is `window / 6`.
pub fn adaptive_threshold(
    gray: &Raster,
    window: u32,
    c: f64,
    mode: AdaptiveMode,
) -> Result<BinaryMask> {
    if gray.channels != 1 {
        return Err(Error::UnsupportedChannels(gray.channels));
    }
    if window < 3 || window % 2 == 0 {
        return Err(Error::BadWindow(window));
    }
    let half = i64::from(window / 2);
    let w = gray.width as usize;
    let h = gray.height as usize;

    let weights: Vec<f64> = match mode {
        AdaptiveMode::Mean => vec![1.0 / f64::from(window); window as usize],
        AdaptiveMode::Gaussian => gaussian_kernel(window, f64::from(window) / 6.0),
    };

    // Separable smoothing with clamped indices: horizontal, then vertical.
    let mut horiz = vec![0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in weights.iter().enumerate() {
                let sx = x as i64 + k as i64 - half;
                acc += wk * f64::from(gray.get_clamped(sx, y as i64));
            }
            horiz[y * w + x] = acc;
        }
    }
    let mut data = vec![255u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in weights.iter().enumerate() {
                let sy = (y as i64 + k as i64 - half).clamp(0, h as i64 - 1) as usize;
                acc += wk * horiz[sy * w + x];
            }
            let v = f64::from(gray.data[y * w + x]);
            if v <= acc - c {
                data[y * w + x] = 0;
            }
        }
    }
    Ok(BinaryMask {
        width: gray.width,
        height: gray.height,
        data,
    })
}

fn gaussian_kernel(size: u32, sigma: f64) -> Vec<f64> {
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

/// Otsu on the pooled histogram of `window`-sized regions centered at the
/// given points. Overlapping windows count each pixel once; windows are
/// clipped to the raster. The resulting threshold leans toward the chart
/// ink because the pooled pixels sit on and around the drawing.
pub fn junction_window_otsu(
    gray: &Raster,
    points: &[(u32, u32)],
    window: u32,
) -> Result<ThresholdResult> {
    if gray.channels != 1 {
        return Err(Error::UnsupportedChannels(gray.channels));
    }
    if window < 3 || window % 2 == 0 {
        return Err(Error::BadWindow(window));
    }
    if points.is_empty() {
        return Err(Error::NoJunctionPoints);
    }
    let half = i64::from(window / 2);
    let w = i64::from(gray.width);
    let h = i64::from(gray.height);
    let mut seen = vec![false; gray.width as usize * gray.height as usize];
    let mut bins = [0u64; 256];
    for &(px, py) in points {
        let x0 = (i64::from(px) - half).max(0);
        let x1 = (i64::from(px) + half).min(w - 1);
        let y0 = (i64::from(py) - half).max(0);
        let y1 = (i64::from(py) + half).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let idx = y as usize * gray.width as usize + x as usize;
                if !seen[idx] {
                    seen[idx] = true;
                    bins[gray.data[idx] as usize] += 1;
                }
            }
        }
    }
    otsu_threshold(&Histogram::from_counts(bins))
}
