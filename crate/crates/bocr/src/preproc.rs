//! Page-to-line segmentation and conversion of line images into the
//! network's column features.
//!
//! Segmentation works in two phases. Phase one binarizes the page with a
//! global Otsu threshold, splits it into a few vertical strips, takes the
//! horizontal ink-projection profile of each strip and marks whitespace
//! valleys; per-strip text bands are stitched into page-wide bands by
//! overlap voting. Phase two cleans the guess: tiny or nearly inkless
//! bands are dropped as artifacts, bands much taller than the median are
//! split at their internal profile minimum (touching lines), and thin
//! neighbors separated by a sliver of a gap are merged back (over-splits).
//! All thresholds live in [`SegmentConfig`] and are engineering defaults,
//! not constants of nature.

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Height every line image is normalized to before feature extraction.
pub const NORMALIZED_HEIGHT: usize = 48;

/// A text-line window on the page; half-open in both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineBox {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl LineBox {
    pub fn height(&self) -> usize {
        self.bottom - self.top
    }

    pub fn vertical_center(&self) -> f64 {
        (self.top + self.bottom) as f64 / 2.0
    }

    pub fn contains_row(&self, y: f64) -> bool {
        y >= self.top as f64 && y < self.bottom as f64
    }
}

/// Width-ordered sequence of 48-value column vectors, ink ≈ 1, paper ≈ 0.
pub type FeatureSequence = Vec<Vec<f64>>;

/// Tuning knobs for [`segment_lines`].
#[derive(Debug, Clone)]
pub struct SegmentConfig {
    /// Vertical strips the page is divided into for phase one.
    pub strips: usize,
    /// A profile row is a valley when its ink count is below this fraction
    /// of the strip width.
    pub valley_ink_ratio: f64,
    /// Rows covered by at least this many strip bands count as text.
    pub min_strip_votes: usize,
    /// Bands shorter than this fraction of the median height are rejected
    /// as artifacts.
    pub min_height_ratio: f64,
    /// Bands with less ink than this fraction of their area are rejected.
    pub min_ink_density: f64,
    /// Bands taller than this multiple of the median height are split at
    /// their internal profile minimum.
    pub split_height_ratio: f64,
    /// Adjacent bands closer than this fraction of the median height are
    /// merged, provided one of them is thin.
    pub merge_gap_ratio: f64,
    /// A band counts as thin for merging below this fraction of the median
    /// height; keeps the merge from undoing a touching-line split.
    pub merge_thin_ratio: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            strips: 4,
            valley_ink_ratio: 0.02,
            min_strip_votes: 1,
            min_height_ratio: 0.25,
            min_ink_density: 0.005,
            split_height_ratio: 1.8,
            merge_gap_ratio: 0.15,
            merge_thin_ratio: 0.5,
        }
    }
}

/// Global Otsu threshold; pixels at or below it count as ink. Returns the
/// first argmax of the between-class variance, so a blank page yields a
/// threshold with no ink below it.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let mut hist = [0u64; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let total = img.pixels().len() as f64;
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &n)| v as f64 * n as f64)
        .sum();

    let mut best_t = 0u8;
    let mut best_var = -1.0;
    let mut weight_low = 0.0;
    let mut sum_low = 0.0;
    for (t, &count) in hist.iter().enumerate().take(255) {
        weight_low += count as f64;
        sum_low += t as f64 * count as f64;
        let weight_high = total - weight_low;
        if weight_low == 0.0 || weight_high == 0.0 {
            continue;
        }
        let mean_low = sum_low / weight_low;
        let mean_high = (total_sum - sum_low) / weight_high;
        let var = weight_low * weight_high * (mean_low - mean_high).powi(2);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    best_t
}

/// Maximal runs of `true` as half-open `[start, end)` intervals.
fn runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &on) in mask.iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, mask.len()));
    }
    out
}

fn median(mut values: Vec<usize>) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

/// Locate text lines on a page, top to bottom.
pub fn segment_lines(page: &GrayImage, config: &SegmentConfig) -> Result<Vec<LineBox>> {
    if config.strips == 0 {
        return Err(Error::InvalidInput("segment: strips must be >= 1".into()));
    }
    let (w, h) = (page.width(), page.height());
    let threshold = otsu_threshold(page);
    let is_ink = |p: u8| p <= threshold;

    // Phase 1: per-strip profiles, valley detection, overlap voting.
    let mut votes = vec![0usize; h];
    for s in 0..config.strips {
        let x0 = s * w / config.strips;
        let x1 = ((s + 1) * w / config.strips).max(x0 + 1).min(w);
        let strip_w = (x1 - x0) as f64;
        let mut text_row = vec![false; h];
        for (y, row_is_text) in text_row.iter_mut().enumerate() {
            let ink = page.row(y)[x0..x1].iter().filter(|&&p| is_ink(p)).count();
            *row_is_text = (ink as f64) >= config.valley_ink_ratio * strip_w;
        }
        for (start, end) in runs(&text_row) {
            for v in &mut votes[start..end] {
                *v += 1;
            }
        }
    }
    let text_mask: Vec<bool> = votes.iter().map(|&v| v >= config.min_strip_votes).collect();
    let mut bands = runs(&text_mask);
    if bands.is_empty() {
        return Ok(Vec::new());
    }

    // Full-width profile reused by phase 2.
    let profile: Vec<usize> = (0..h)
        .map(|y| page.row(y).iter().filter(|&&p| is_ink(p)).count())
        .collect();
    let band_ink = |band: &(usize, usize)| -> usize { profile[band.0..band.1].iter().sum() };

    let med = median(bands.iter().map(|b| b.1 - b.0).collect());

    // Phase 2a: artifact rejection.
    bands.retain(|band| {
        let height = band.1 - band.0;
        let area = (height * w) as f64;
        (height as f64) >= config.min_height_ratio * med
            && band_ink(band) as f64 >= config.min_ink_density * area
    });
    if bands.is_empty() {
        return Ok(Vec::new());
    }

    // Phase 2b: split touching lines at the interior profile minimum
    // (searched in the middle 60% so the split cannot shave off an edge).
    let mut queue: Vec<(usize, usize)> = bands;
    let mut split_done: Vec<(usize, usize)> = Vec::new();
    while let Some(band) = queue.pop() {
        let height = band.1 - band.0;
        if (height as f64) <= config.split_height_ratio * med || height < 4 {
            split_done.push(band);
            continue;
        }
        let lo = band.0 + height / 5;
        let hi = band.1 - height / 5;
        let cut = (lo..hi)
            .min_by_key(|&y| (profile[y], y))
            .expect("nonempty interior");
        if cut <= band.0 || cut + 1 >= band.1 {
            split_done.push(band);
            continue;
        }
        queue.push((band.0, cut));
        queue.push((cut + 1, band.1));
    }
    split_done.sort_unstable();

    // Phase 2c: merge over-split slivers.
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for band in split_done {
        match merged.last_mut() {
            Some(prev)
                if ((band.0 - prev.1) as f64) < config.merge_gap_ratio * med
                    && ((band.1 - band.0).min(prev.1 - prev.0) as f64)
                        < config.merge_thin_ratio * med =>
            {
                prev.1 = band.1;
            }
            _ => merged.push(band),
        }
    }

    // Horizontal extent from the ink columns of each band.
    let mut boxes = Vec::with_capacity(merged.len());
    for (top, bottom) in merged {
        let mut left = w;
        let mut right = 0;
        for y in top..bottom {
            for (x, &p) in page.row(y).iter().enumerate() {
                if is_ink(p) {
                    left = left.min(x);
                    right = right.max(x + 1);
                }
            }
        }
        if left >= right {
            continue;
        }
        boxes.push(LineBox {
            top: top.saturating_sub(1),
            bottom: (bottom + 1).min(h),
            left: left.saturating_sub(1),
            right: (right + 1).min(w),
        });
    }
    Ok(boxes)
}

/// Rescale a line image to the standard height, preserving aspect ratio.
/// An already 48-pixel-tall line is returned unchanged, bit for bit.
pub fn normalize_line(line: &GrayImage) -> GrayImage {
    if line.height() == NORMALIZED_HEIGHT {
        return line.clone();
    }
    let scale = NORMALIZED_HEIGHT as f64 / line.height() as f64;
    let new_width = ((line.width() as f64 * scale).round() as usize).max(1);
    line.resize_bilinear(new_width, NORMALIZED_HEIGHT)
        .expect("target dimensions are nonzero")
}

/// Column features of a height-48 line: frame `t` is column `t` with each
/// value `(255 - intensity) / 255`, so ink reads high and paper zero.
pub fn extract_features(line: &GrayImage) -> Result<FeatureSequence> {
    if line.height() != NORMALIZED_HEIGHT {
        return Err(Error::InvalidInput(format!(
            "extract_features: line height {} is not {NORMALIZED_HEIGHT}; normalize first",
            line.height()
        )));
    }
    let mut frames = Vec::with_capacity(line.width());
    for x in 0..line.width() {
        let frame: Vec<f64> = (0..NORMALIZED_HEIGHT)
            .map(|y| (255 - line.get(x, y)) as f64 / 255.0)
            .collect();
        frames.push(frame);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// White page with solid black bands at the given `[top, bottom)` row
    /// ranges, spanning columns 10..width-10.
    fn page_with_bands(width: usize, height: usize, bands: &[(usize, usize)]) -> GrayImage {
        let mut img = GrayImage::filled(width, height, 255).unwrap();
        for &(top, bottom) in bands {
            for y in top..bottom {
                for x in 10..width - 10 {
                    img.set(x, y, 0);
                }
            }
        }
        img
    }

    #[test]
    fn single_band_found_within_two_pixels() {
        let page = page_with_bands(200, 100, &[(40, 60)]);
        let boxes = segment_lines(&page, &SegmentConfig::default()).unwrap();
        assert_eq!(boxes.len(), 1);
        let b = boxes[0];
        assert!(b.top >= 38 && b.top <= 42, "top {}", b.top);
        assert!(b.bottom >= 58 && b.bottom <= 62, "bottom {}", b.bottom);
        assert!(b.left >= 8 && b.left <= 12);
        assert!(b.right >= 188 && b.right <= 192);
    }

    #[test]
    fn two_bands_in_top_to_bottom_order() {
        let page = page_with_bands(200, 150, &[(20, 40), (90, 110)]);
        let boxes = segment_lines(&page, &SegmentConfig::default()).unwrap();
        assert_eq!(boxes.len(), 2);
        assert!(boxes[0].bottom <= boxes[1].top);
        assert!(boxes[0].contains_row(30.0));
        assert!(boxes[1].contains_row(100.0));
    }

    #[test]
    fn blank_page_yields_no_boxes() {
        let page = GrayImage::filled(120, 80, 255).unwrap();
        let boxes = segment_lines(&page, &SegmentConfig::default()).unwrap();
        assert!(boxes.is_empty());
    }

    #[test]
    fn boxes_are_disjoint_and_sorted() {
        let page = page_with_bands(300, 400, &[(10, 40), (70, 100), (140, 170), (300, 330)]);
        let boxes = segment_lines(&page, &SegmentConfig::default()).unwrap();
        assert_eq!(boxes.len(), 4);
        for pair in boxes.windows(2) {
            assert!(pair[0].bottom <= pair[1].top);
        }
    }

    #[test]
    fn touching_lines_split_at_profile_minimum() {
        // Two 20-row bands connected by a thin 2-row bridge become one
        // 42-row band; with two reference bands the median stays 20-ish
        // and the tall band must be split.
        let mut page = page_with_bands(200, 300, &[(30, 50), (100, 120), (170, 212)]);
        // Thin the middle of the tall band so a clear valley exists.
        for y in 188..194 {
            for x in 10..190 {
                page.set(x, y, if x < 30 { 0 } else { 255 });
            }
        }
        let boxes = segment_lines(&page, &SegmentConfig::default()).unwrap();
        assert_eq!(boxes.len(), 4, "{boxes:?}");
    }

    #[test]
    fn speck_artifacts_are_rejected()  {
        let mut page = page_with_bands(200, 200, &[(40, 60), (120, 140)]);
        // A 1-row speck: far below 25% of the median band height.
        for x in 90..96 {
            page.set(x, 90, 0);
        }
        let boxes = segment_lines(&page, &SegmentConfig::default()).unwrap();
        assert_eq!(boxes.len(), 2);
    }

    #[test]
    fn rejects_zero_strips() {
        let page = GrayImage::filled(10, 10, 255).unwrap();
        let cfg = SegmentConfig {
            strips: 0,
            ..SegmentConfig::default()
        };
        assert!(segment_lines(&page, &cfg).is_err());
    }

    #[test]
    fn normalize_exact_downscale() {
        let line = GrayImage::filled(200, 96, 128).unwrap();
        let out = normalize_line(&line);
        assert_eq!(out.height(), 48);
        assert_eq!(out.width(), 100);
    }

    #[test]
    fn normalize_identity_is_bit_exact() {
        let pixels: Vec<u8> = (0..48 * 33).map(|i| (i * 7 % 256) as u8).collect();
        let line = GrayImage::new(33, 48, pixels).unwrap();
        let out = normalize_line(&line);
        assert_eq!(out, line);
    }

    #[test]
    fn normalize_exact_upscale() {
        let line = GrayImage::filled(50, 24, 0).unwrap();
        let out = normalize_line(&line);
        assert_eq!(out.height(), 48);
        assert_eq!(out.width(), 100);
    }

    #[test]
    fn normalize_width_never_below_one() {
        let line = GrayImage::filled(1, 500, 0).unwrap();
        let out = normalize_line(&line);
        assert_eq!(out.height(), 48);
        assert_eq!(out.width(), 1);
    }

    #[test]
    fn features_polarity_and_range() {
        let mut line = GrayImage::filled(3, 48, 255).unwrap();
        for y in 0..48 {
            line.set(1, y, 0);
            line.set(2, y, 127);
        }
        let feats = extract_features(&line).unwrap();
        assert_eq!(feats.len(), 3);
        assert!(feats[0].iter().all(|&v| v == 0.0));
        assert!(feats[1].iter().all(|&v| v == 1.0));
        let mid = 128.0 / 255.0;
        assert!(feats[2].iter().all(|&v| (v - mid).abs() < 1e-12));
        for frame in &feats {
            assert_eq!(frame.len(), 48);
            assert!(frame.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn features_reject_wrong_height() {
        let line = GrayImage::filled(5, 47, 255).unwrap();
        assert!(extract_features(&line).is_err());
    }
}
