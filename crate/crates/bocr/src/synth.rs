//! Deterministic synthetic text-line and page generator.
//!
//! Real scanned corpora are external; this module fabricates desk-scale
//! training, validation and test sets with exact ground truth. Glyphs are
//! procedural — seeded random strokes on a 32-pixel grid — so the
//! repository needs no fonts or rasterization libraries, and any two
//! glyphs are guaranteed to differ in at least 10% of their pixels. Lines
//! composed from the atlas can be degraded with Gaussian intensity noise,
//! uniform scaling and per-glyph baseline jitter. Everything is a pure
//! function of its seeds: regenerating a corpus is bit-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::codec::LabelAlphabet;
use crate::error::{Error, Result};
use crate::image::{save_pgm, GrayImage};
use crate::preproc::LineBox;
use crate::rng::Rng;

/// Height of every glyph mask.
pub const GLYPH_HEIGHT: usize = 32;
/// Horizontal white margin on rendered lines.
const LINE_MARGIN_X: usize = 6;
/// Vertical margins chosen so clean lines come out 48 pixels tall and the
/// height normalizer is an identity on them.
const LINE_MARGIN_Y: usize = 8;
/// Gap between consecutive glyphs.
const GLYPH_GAP: usize = 3;
/// Advance width of the space class (it has no ink).
const SPACE_WIDTH: usize = 10;

/// One binary glyph mask, row-major `GLYPH_HEIGHT × width`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glyph {
    pub width: usize,
    pub mask: Vec<bool>,
}

impl Glyph {
    fn ink_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&b| b).count() as f64 / self.mask.len() as f64
    }
}

/// Per-codepoint glyphs of uniform height plus the spacing rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphAtlas {
    glyphs: BTreeMap<char, Glyph>,
    style_seed: u64,
}

impl GlyphAtlas {
    pub fn glyph(&self, c: char) -> Option<&Glyph> {
        self.glyphs.get(&c)
    }

    /// Number of codepoint entries (the space entry has an empty mask).
    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }

    pub fn inter_glyph_gap(&self) -> usize {
        GLYPH_GAP
    }
}

/// Fraction of differing pixels over the union canvas (aligned left,
/// padded with background).
fn mask_difference(a: &Glyph, b: &Glyph) -> f64 {
    let width = a.width.max(b.width);
    let mut differing = 0usize;
    for y in 0..GLYPH_HEIGHT {
        for x in 0..width {
            let pa = x < a.width && a.mask[y * a.width + x];
            let pb = x < b.width && b.mask[y * b.width + x];
            if pa != pb {
                differing += 1;
            }
        }
    }
    differing as f64 / (GLYPH_HEIGHT * width) as f64
}

/// Stamp a thick segment from `(x0, y0)` to `(x1, y1)` into `mask`.
fn draw_stroke(mask: &mut [bool], width: usize, x0: i64, y0: i64, x1: i64, y1: i64) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
    for s in 0..=steps {
        let x = x0 + (x1 - x0) * s / steps;
        let y = y0 + (y1 - y0) * s / steps;
        for dy in 0..2i64 {
            for dx in 0..2i64 {
                let (px, py) = (x + dx, y + dy);
                if px >= 0 && (px as usize) < width && py >= 0 && (py as usize) < GLYPH_HEIGHT {
                    mask[py as usize * width + px as usize] = true;
                }
            }
        }
    }
}

fn generate_glyph(rng: &mut Rng) -> Glyph {
    loop {
        let width = 10 + rng.below(5);
        let mut mask = vec![false; GLYPH_HEIGHT * width];
        let strokes = 4 + rng.below(3);
        for _ in 0..strokes {
            let x0 = rng.below(width) as i64;
            let y0 = rng.below(GLYPH_HEIGHT) as i64;
            let x1 = rng.below(width) as i64;
            let y1 = rng.below(GLYPH_HEIGHT) as i64;
            draw_stroke(&mut mask, width, x0, y0, x1, y1);
        }
        let glyph = Glyph { width, mask };
        // Enough ink to be visible and distinguishable, not a blot.
        if (0.18..=0.55).contains(&glyph.ink_fraction()) {
            return glyph;
        }
    }
}

/// Build procedural glyphs for every symbol of `alphabet`. The space
/// symbol renders as a blank-width gap; every other pair of glyphs must
/// differ in at least 10% of pixels, enforced by regeneration.
pub fn build_glyph_atlas(alphabet: &LabelAlphabet, style_seed: u64) -> Result<GlyphAtlas> {
    let mut rng = Rng::derived(style_seed, 0x617474);
    let mut ordered: Vec<(char, Glyph)> = Vec::with_capacity(alphabet.symbol_count());

    for &c in alphabet.symbols() {
        if c == ' ' {
            ordered.push((
                c,
                Glyph {
                    width: SPACE_WIDTH,
                    mask: vec![false; GLYPH_HEIGHT * SPACE_WIDTH],
                },
            ));
            continue;
        }
        let mut candidate = generate_glyph(&mut rng);
        let mut retries = 0;
        while ordered
            .iter()
            .any(|(_, existing)| mask_difference(existing, &candidate) < 0.10)
        {
            retries += 1;
            if retries > 64 {
                return Err(Error::Generation(format!(
                    "could not draw a distinguishable glyph for U+{:04X} after {retries} tries",
                    c as u32
                )));
            }
            candidate = generate_glyph(&mut rng);
        }
        ordered.push((c, candidate));
    }

    Ok(GlyphAtlas {
        glyphs: ordered.into_iter().collect(),
        style_seed,
    })
}

/// Degradations applied when rendering. Ranges are capped at mild values;
/// the point is realistic wobble, not destruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degrade {
    /// Gaussian intensity noise sigma, in intensity units out of 255. 0
    /// disables; at most 20.
    pub noise_sigma: f64,
    /// Uniform scale jitter: the whole line is scaled by a factor drawn
    /// from `[1 - s, 1 + s]`. 0 disables; at most 0.25.
    pub scale_jitter: f64,
    /// Per-glyph vertical offset in pixels. 0 disables; at most 2.
    pub baseline_jitter: usize,
}

impl Degrade {
    pub fn none() -> Self {
        Degrade {
            noise_sigma: 0.0,
            scale_jitter: 0.0,
            baseline_jitter: 0,
        }
    }

    pub fn is_none(&self) -> bool {
        self.noise_sigma == 0.0 && self.scale_jitter == 0.0 && self.baseline_jitter == 0
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=20.0).contains(&self.noise_sigma)
            || !(0.0..=0.25).contains(&self.scale_jitter)
            || self.baseline_jitter > 2
        {
            return Err(Error::InvalidInput(format!(
                "degradation out of range: {self:?} (noise ≤ 20, scale ≤ 0.25, jitter ≤ 2)"
            )));
        }
        Ok(())
    }
}

/// One training/validation/test unit.
#[derive(Debug, Clone)]
pub struct LineRecord {
    pub image: GrayImage,
    pub truth: String,
    pub id: String,
    pub degrade: Degrade,
}

/// Add clamped Gaussian intensity noise to every pixel.
pub fn add_gaussian_noise(img: &GrayImage, sigma: f64, seed: u64) -> GrayImage {
    if sigma == 0.0 {
        return img.clone();
    }
    let mut rng = Rng::derived(seed, 0x6e6f6973);
    let pixels: Vec<u8> = img
        .pixels()
        .iter()
        .map(|&p| (p as f64 + sigma * rng.normal()).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(img.width(), img.height(), pixels).expect("shape unchanged")
}

/// Render `text` with the atlas. Without degradations the output is a pure
/// black/white image of height 48 whose width is the sum of advances plus
/// margins. The ground truth is `text`, exactly.
pub fn render_line(atlas: &GlyphAtlas, text: &str, degrade: Degrade, seed: u64) -> Result<LineRecord> {
    degrade.validate()?;
    let mut advances = Vec::new();
    for (offset, c) in text.chars().enumerate() {
        match atlas.glyph(c) {
            Some(g) => advances.push((c, g.width)),
            None => {
                return Err(Error::UnsupportedSymbol {
                    codepoint: c as u32,
                    offset,
                })
            }
        }
    }

    let glyph_span: usize = advances.iter().map(|(_, w)| w).sum::<usize>()
        + GLYPH_GAP * advances.len().saturating_sub(1);
    let width = glyph_span.max(1) + 2 * LINE_MARGIN_X;
    let height = GLYPH_HEIGHT + 2 * LINE_MARGIN_Y;
    let mut img = GrayImage::filled(width, height, 255)?;

    let mut rng = Rng::derived(seed, 0x6c696e65);
    let mut cursor = LINE_MARGIN_X;
    for (c, advance) in advances {
        let glyph = atlas.glyph(c).expect("validated above");
        let dy: i64 = if degrade.baseline_jitter > 0 {
            let j = degrade.baseline_jitter as i64;
            rng.below((2 * j + 1) as usize) as i64 - j
        } else {
            0
        };
        for y in 0..GLYPH_HEIGHT {
            let py = y as i64 + LINE_MARGIN_Y as i64 + dy;
            if py < 0 || py as usize >= height {
                continue;
            }
            for x in 0..glyph.width {
                if glyph.mask[y * glyph.width + x] {
                    img.set(cursor + x, py as usize, 0);
                }
            }
        }
        cursor += advance + GLYPH_GAP;
    }

    if degrade.scale_jitter > 0.0 {
        let factor = rng.uniform(1.0 - degrade.scale_jitter, 1.0 + degrade.scale_jitter);
        let nw = ((width as f64 * factor).round() as usize).max(1);
        let nh = ((height as f64 * factor).round() as usize).max(1);
        img = img.resize_bilinear(nw, nh)?;
    }
    if degrade.noise_sigma > 0.0 {
        img = add_gaussian_noise(&img, degrade.noise_sigma, rng.next_u64());
    }

    Ok(LineRecord {
        image: img,
        truth: text.to_string(),
        id: format!("line-{seed:016x}"),
        degrade,
    })
}

/// Sizes of the three corpus splits.
#[derive(Debug, Clone, Copy)]
pub struct CorpusCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Three disjoint line sets with exact ground truth.
#[derive(Debug)]
pub struct Corpus {
    pub train: Vec<LineRecord>,
    pub val: Vec<LineRecord>,
    pub test: Vec<LineRecord>,
}

/// Deterministic pseudo-word list over the alphabet's non-space symbols,
/// word lengths 2-5. Corpus text has to come from somewhere; for purely
/// synthetic alphabets there is no dictionary to borrow.
pub fn derive_word_list(alphabet: &LabelAlphabet, count: usize, seed: u64) -> Result<Vec<String>> {
    let symbols: Vec<char> = alphabet
        .symbols()
        .iter()
        .copied()
        .filter(|c| !c.is_whitespace())
        .collect();
    if symbols.is_empty() {
        return Err(Error::InvalidInput(
            "alphabet has no non-whitespace symbols to build words from".into(),
        ));
    }
    let mut rng = Rng::derived(seed, 0x776f7264);
    Ok((0..count)
        .map(|_| {
            let len = 2 + rng.below(4);
            (0..len).map(|_| symbols[rng.below(symbols.len())]).collect()
        })
        .collect())
}

fn random_sentence(words: &[String], rng: &mut Rng) -> String {
    let n = 3 + rng.below(6); // 3..=8 words
    let mut parts = Vec::with_capacity(n);
    for _ in 0..n {
        parts.push(words[rng.below(words.len())].as_str());
    }
    parts.join(" ")
}

/// Generate `counts` lines per split from random 3-8 word sentences over
/// `words`. Splits are disjoint by construction: ids are prefixed per
/// split and every line draws from its own seed stream.
pub fn generate_corpus(
    atlas: &GlyphAtlas,
    words: &[String],
    counts: CorpusCounts,
    seed: u64,
    degrade: Degrade,
) -> Result<Corpus> {
    if words.is_empty() {
        return Err(Error::InvalidInput("generate_corpus: empty word list".into()));
    }
    let split = |name: &str, tag: u64, count: usize| -> Result<Vec<LineRecord>> {
        let mut records = Vec::with_capacity(count);
        for i in 0..count {
            let line_seed = Rng::derived(seed, tag ^ (i as u64) << 8).next_u64();
            let mut text_rng = Rng::derived(line_seed, 0x74657874);
            let text = random_sentence(words, &mut text_rng);
            let mut record = render_line(atlas, &text, degrade, line_seed)?;
            record.id = format!("{name}-{i:05}");
            records.push(record);
        }
        Ok(records)
    };
    Ok(Corpus {
        train: split("train", 1, counts.train)?,
        val: split("val", 2, counts.val)?,
        test: split("test", 3, counts.test)?,
    })
}

/// A page composed of rendered lines at known positions.
#[derive(Debug)]
pub struct PageFixture {
    pub image: GrayImage,
    pub boxes: Vec<LineBox>,
    pub truths: Vec<String>,
    pub id: String,
}

/// Compose multi-line pages with known geometry for segmentation tests.
/// Lines are clean renders; `noise_sigma > 0` degrades the whole page.
pub fn generate_pages(
    atlas: &GlyphAtlas,
    words: &[String],
    page_count: usize,
    lines_per_page: (usize, usize),
    seed: u64,
    noise_sigma: f64,
) -> Result<Vec<PageFixture>> {
    if words.is_empty() {
        return Err(Error::InvalidInput("generate_pages: empty word list".into()));
    }
    let (min_lines, max_lines) = lines_per_page;
    if min_lines == 0 || max_lines < min_lines {
        return Err(Error::InvalidInput(format!(
            "generate_pages: bad line range {min_lines}..={max_lines}"
        )));
    }
    let margin = 16usize;
    let mut pages = Vec::with_capacity(page_count);
    for p in 0..page_count {
        let mut rng = Rng::derived(seed, 0x70616765 ^ (p as u64) << 4);
        let n_lines = min_lines + rng.below(max_lines - min_lines + 1);
        let mut lines = Vec::with_capacity(n_lines);
        for _ in 0..n_lines {
            let line_seed = rng.next_u64();
            let mut text_rng = Rng::derived(line_seed, 0x74657874);
            let text = random_sentence(words, &mut text_rng);
            lines.push(render_line(atlas, &text, Degrade::none(), line_seed)?);
        }

        let gaps: Vec<usize> = (0..n_lines).map(|_| 20 + rng.below(21)).collect();
        let width = lines.iter().map(|l| l.image.width()).max().unwrap() + 2 * margin;
        let height =
            2 * margin + lines.iter().map(|l| l.image.height()).sum::<usize>()
                + gaps[..n_lines - 1].iter().sum::<usize>();
        let mut image = GrayImage::filled(width, height, 255)?;
        let mut boxes = Vec::with_capacity(n_lines);
        let mut truths = Vec::with_capacity(n_lines);
        let mut cursor = margin;
        for (i, line) in lines.iter().enumerate() {
            for y in 0..line.image.height() {
                for x in 0..line.image.width() {
                    image.set(margin + x, cursor + y, line.image.get(x, y));
                }
            }
            boxes.push(LineBox {
                top: cursor,
                bottom: cursor + line.image.height(),
                left: margin,
                right: margin + line.image.width(),
            });
            truths.push(line.truth.clone());
            cursor += line.image.height() + gaps[i];
        }
        if noise_sigma > 0.0 {
            image = add_gaussian_noise(&image, noise_sigma, rng.next_u64());
        }
        pages.push(PageFixture {
            image,
            boxes,
            truths,
            id: format!("page-{p:04}"),
        });
    }
    Ok(pages)
}

/// Write a corpus in the training manifest layout:
///
/// ```text
/// <dir>/images/<id>.pgm
/// <dir>/truths/<id>.gt.txt
/// <dir>/{train,val,test}.tsv      image-path <TAB> truth-path
/// ```
///
/// Paths inside the manifests are relative to `dir`.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    std::fs::create_dir_all(dir.join("images"))?;
    std::fs::create_dir_all(dir.join("truths"))?;
    for (manifest_name, records) in [
        ("train.tsv", &corpus.train),
        ("val.tsv", &corpus.val),
        ("test.tsv", &corpus.test),
    ] {
        let mut manifest = String::new();
        for record in records {
            let image_rel = format!("images/{}.pgm", record.id);
            let truth_rel = format!("truths/{}.gt.txt", record.id);
            save_pgm(&record.image, dir.join(&image_rel))?;
            std::fs::write(dir.join(&truth_rel), &record.truth)?;
            let _ = writeln!(manifest, "{image_rel}\t{truth_rel}");
        }
        std::fs::write(dir.join(manifest_name), manifest)?;
    }
    Ok(())
}

/// Write page fixtures with their geometry sidecars
/// (`top,bottom,left,right` per line).
pub fn write_pages(dir: &Path, pages: &[PageFixture]) -> Result<()> {
    std::fs::create_dir_all(dir.join("pages"))?;
    for page in pages {
        save_pgm(&page.image, dir.join(format!("pages/{}.pgm", page.id)))?;
        let mut sidecar = String::new();
        for b in &page.boxes {
            let _ = writeln!(sidecar, "{},{},{},{}", b.top, b.bottom, b.left, b.right);
        }
        std::fs::write(dir.join(format!("pages/{}.boxes.txt", page.id)), sidecar)?;
    }
    Ok(())
}
