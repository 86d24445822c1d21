//! Sequence datasets: IDX ingestion, synthetic digit generation, resize +
//! scanline flattening, stratified partitioning into clients, the
//! variable-length (VL) and fixed-length (FL) federated constructions, and
//! the temporal-heterogeneity metric.
//!
//! Construction is seed-deterministic. A builder derives its internal
//! streams from the seed it is given: `[1]` partition shuffles, `[2]`
//! per-image training sizes, `[3]` per-image test sizes, `[4]` the FL
//! menu-to-client assignment.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::rng::{derive_seed, Rng};
use crate::Result;

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
const DIGIT_CLASSES: usize = 10;

/// Square grayscale image with intensities in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub side: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(side: usize, pixels: Vec<f64>) -> Self {
        assert!(side >= 1, "image side must be >= 1");
        assert_eq!(pixels.len(), side * side, "pixel count != side^2");
        GrayImage { side, pixels }
    }

    fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.side + x]
    }
}

/// One training example: a T x d feature block plus a class label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSequence {
    /// Row-major `length x dim`.
    pub features: Vec<f64>,
    pub length: usize,
    pub dim: usize,
    pub label: usize,
}

/// All examples held by one client.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientDataset {
    pub client_id: usize,
    pub examples: Vec<LabeledSequence>,
}

impl ClientDataset {
    /// Empirical distribution of this client's sequence lengths over the
    /// given support. Panics if an example's length is off the support.
    pub fn length_distribution(&self, support: &[usize]) -> LengthDistribution {
        LengthDistribution::from_lengths(self.examples.iter().map(|e| e.length), support)
    }
}

/// N client datasets plus a shared test set.
#[derive(Clone, Debug, PartialEq)]
pub struct FederatedDataset {
    pub clients: Vec<ClientDataset>,
    pub test_set: Vec<LabeledSequence>,
    /// Admissible sequence lengths, ascending.
    pub length_menu: Vec<usize>,
    pub classes: usize,
    pub dim: usize,
}

impl FederatedDataset {
    /// Check the structural invariants: equal per-client example counts,
    /// identical per-client label histograms, and every length on the menu.
    pub fn validate(&self) -> Result<()> {
        let first = self.clients.first().ok_or(Error::NoClients)?;
        let hist = |c: &ClientDataset| {
            let mut h = vec![0usize; self.classes];
            for e in &c.examples {
                h[e.label] += 1;
            }
            h
        };
        let reference = hist(first);
        for c in &self.clients {
            if c.examples.is_empty() {
                return Err(Error::EmptyClient { client: c.client_id });
            }
            if c.examples.len() != first.examples.len() || hist(c) != reference {
                return Err(Error::InvalidConfig(alloc::format!(
                    "client {} differs in size or label histogram",
                    c.client_id
                )));
            }
        }
        for e in self.clients.iter().flat_map(|c| &c.examples).chain(&self.test_set) {
            if !self.length_menu.contains(&e.length) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "sequence length {} is not on the menu",
                    e.length
                )));
            }
            if e.label >= self.classes {
                return Err(Error::InvalidLabel { label: e.label, classes: self.classes });
            }
        }
        Ok(())
    }
}

/// Empirical distribution of sequence lengths over an explicit support.
#[derive(Clone, Debug, PartialEq)]
pub struct LengthDistribution {
    pub support: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl LengthDistribution {
    pub fn from_lengths(lengths: impl Iterator<Item = usize>, support: &[usize]) -> Self {
        let mut counts = vec![0usize; support.len()];
        let mut total = 0usize;
        for len in lengths {
            let i = support
                .iter()
                .position(|&s| s == len)
                .unwrap_or_else(|| panic!("length {len} not in support"));
            counts[i] += 1;
            total += 1;
        }
        assert!(total > 0, "empty length sample");
        let probabilities = counts.iter().map(|&c| c as f64 / total as f64).collect();
        LengthDistribution { support: support.to_vec(), probabilities }
    }
}

/// Entropy gap between the uniform distribution on the support and the
/// empirical distribution, in nats: `ln |support| - H(dist)` with
/// `0 ln 0 = 0`. Zero iff uniform; `ln |support|` for a point mass.
pub fn temporal_heterogeneity(dist: &LengthDistribution) -> Result<f64> {
    if dist.support.is_empty() {
        return Err(Error::EmptyMenu);
    }
    let sum: f64 = dist.probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || dist.probabilities.iter().any(|&p| p < 0.0) {
        return Err(Error::NotADistribution { sum });
    }
    let mut entropy = 0.0;
    for &p in &dist.probabilities {
        if p > 0.0 {
            entropy -= p * libm::log(p);
        }
    }
    let gap = libm::log(dist.support.len() as f64) - entropy;
    Ok(if gap < 0.0 { 0.0 } else { gap })
}

fn read_u32_be(bytes: &[u8], at: usize) -> Result<u32> {
    if bytes.len() < at + 4 {
        return Err(Error::IdxTruncated { needed: at + 4, available: bytes.len() });
    }
    Ok(u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap()))
}

/// Parse a pair of IDX streams (big-endian; magic 0x00000803 for images,
/// 0x00000801 for labels) into unit-intensity images with digit labels.
pub fn load_idx_images(
    image_bytes: &[u8],
    label_bytes: &[u8],
) -> Result<Vec<(GrayImage, usize)>> {
    let magic = read_u32_be(image_bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::IdxBadMagic { expected: IDX_IMAGE_MAGIC, got: magic });
    }
    let count = read_u32_be(image_bytes, 4)? as usize;
    let rows = read_u32_be(image_bytes, 8)?;
    let cols = read_u32_be(image_bytes, 12)?;
    if rows != cols || rows == 0 {
        return Err(Error::IdxNotSquare { rows, cols });
    }
    let side = rows as usize;

    let lmagic = read_u32_be(label_bytes, 0)?;
    if lmagic != IDX_LABEL_MAGIC {
        return Err(Error::IdxBadMagic { expected: IDX_LABEL_MAGIC, got: lmagic });
    }
    let lcount = read_u32_be(label_bytes, 4)? as usize;
    if count != lcount {
        return Err(Error::IdxCountMismatch { images: count, labels: lcount });
    }

    let need = 16 + count * side * side;
    if image_bytes.len() < need {
        return Err(Error::IdxTruncated { needed: need, available: image_bytes.len() });
    }
    let lneed = 8 + count;
    if label_bytes.len() < lneed {
        return Err(Error::IdxTruncated { needed: lneed, available: label_bytes.len() });
    }

    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let base = 16 + i * side * side;
        let pixels = image_bytes[base..base + side * side]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        let label = label_bytes[8 + i] as usize;
        if label >= DIGIT_CLASSES {
            return Err(Error::InvalidLabel { label, classes: DIGIT_CLASSES });
        }
        out.push((GrayImage::new(side, pixels), label));
    }
    Ok(out)
}

// Seven-segment layout, (A, B, C, D, E, F, G) per digit.
const SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, true, true, true, false],    // 0
    [false, true, true, false, false, false, false], // 1
    [true, true, false, true, true, false, true],   // 2
    [true, true, true, true, false, false, true],   // 3
    [false, true, true, false, false, true, true],  // 4
    [true, false, true, true, false, true, true],   // 5
    [true, false, true, true, true, true, true],    // 6
    [true, true, true, false, false, false, false], // 7
    [true, true, true, true, true, true, true],     // 8
    [true, true, true, true, false, true, true],    // 9
];

/// Procedurally drawn 28x28 digit glyphs (seven-segment style with
/// jittered geometry, intensity and pixel noise). Labels cycle through the
/// ten classes, so the histogram is exactly balanced whenever 10 | n.
/// Deterministic per seed; used as the offline stand-in for real digits.
pub fn generate_synthetic_digits(count: usize, seed: u64) -> Vec<(GrayImage, usize)> {
    assert!(count >= 1, "count must be >= 1");
    const SIDE: usize = 28;
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let label = i % DIGIT_CLASSES;
        let dx = rng.next_below(3) as isize - 1;
        let dy = rng.next_below(3) as isize - 1;
        let thick = 2 + rng.next_below(2) as usize;
        let ink = rng.range_f64(0.75, 1.0);

        let left = (7 + dx) as usize;
        let right = (20 + dx) as usize;
        let top = (4 + dy) as usize;
        let mid = (13 + dy) as usize;
        let bot = (22 + dy) as usize;

        let mut pixels = vec![0.0f64; SIDE * SIDE];
        let mut rect = |y0: usize, y1: usize, x0: usize, x1: usize| {
            for y in y0..=y1.min(SIDE - 1) {
                for x in x0..=x1.min(SIDE - 1) {
                    pixels[y * SIDE + x] = ink;
                }
            }
        };
        let on = SEGMENTS[label];
        if on[0] {
            rect(top, top + thick - 1, left, right); // A
        }
        if on[1] {
            rect(top, mid, right - thick + 1, right); // B
        }
        if on[2] {
            rect(mid, bot, right - thick + 1, right); // C
        }
        if on[3] {
            rect(bot - thick + 1, bot, left, right); // D
        }
        if on[4] {
            rect(mid, bot, left, left + thick - 1); // E
        }
        if on[5] {
            rect(top, mid, left, left + thick - 1); // F
        }
        if on[6] {
            rect(mid - thick / 2, mid - thick / 2 + thick - 1, left, right); // G
        }
        for p in pixels.iter_mut() {
            let noisy = *p + rng.range_f64(0.0, 0.10);
            *p = noisy.clamp(0.0, 1.0);
        }
        out.push((GrayImage::new(SIDE, pixels), label));
    }
    out
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Bilinear resize on a corner-aligned sampling grid: destination pixel
/// (i, j) samples source coordinate (i, j) * (s_src - 1) / (s_dst - 1).
/// The lerp form preserves constant images exactly and resizing to the
/// same side is the identity; a single-pixel target samples the top-left
/// corner.
pub fn resize_image(img: &GrayImage, target_side: usize) -> GrayImage {
    assert!(target_side >= 1, "target side must be >= 1");
    let s1 = img.side;
    let s2 = target_side;
    let scale = if s2 > 1 { (s1 - 1) as f64 / (s2 - 1) as f64 } else { 0.0 };
    let mut pixels = Vec::with_capacity(s2 * s2);
    for oy in 0..s2 {
        let sy = oy as f64 * scale;
        let y0 = libm::floor(sy) as usize;
        let y1 = (y0 + 1).min(s1 - 1);
        let fy = sy - y0 as f64;
        for ox in 0..s2 {
            let sx = ox as f64 * scale;
            let x0 = libm::floor(sx) as usize;
            let x1 = (x0 + 1).min(s1 - 1);
            let fx = sx - x0 as f64;
            let topv = lerp(img.get(y0, x0), img.get(y0, x1), fx);
            let botv = lerp(img.get(y1, x0), img.get(y1, x1), fx);
            pixels.push(lerp(topv, botv, fy).clamp(0.0, 1.0));
        }
    }
    GrayImage { side: s2, pixels }
}

/// Row-major traversal of the image, top-left to bottom-right, as a
/// length-side^2 feature sequence of width 1.
pub fn flatten_scanline(img: &GrayImage) -> Vec<f64> {
    img.pixels.clone()
}

/// Split example indices into `n_clients` groups with identical label
/// histograms and equal sizes. Within each class the surplus
/// `count mod n_clients` highest-index examples are dropped first, then
/// the remainder is shuffled and dealt in equal consecutive chunks.
pub fn stratified_partition(
    labels: &[usize],
    n_clients: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if n_clients == 0 {
        return Err(Error::NoClients);
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let mut rng = Rng::new(seed);
    let mut clients: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    for class in classes {
        let mut idxs: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let keep = idxs.len() - idxs.len() % n_clients;
        idxs.truncate(keep);
        rng.shuffle(&mut idxs);
        let per = keep / n_clients;
        for (c, chunk) in idxs.chunks(per.max(1)).enumerate().take(n_clients) {
            if per > 0 {
                clients[c].extend_from_slice(chunk);
            }
        }
    }
    Ok(clients)
}

fn to_sequence(img: &GrayImage, side: usize, label: usize) -> LabeledSequence {
    let resized = resize_image(img, side);
    let features = flatten_scanline(&resized);
    LabeledSequence { length: features.len(), features, dim: 1, label }
}

fn class_count(pairs: &[(GrayImage, usize)]) -> usize {
    pairs.iter().map(|(_, l)| l + 1).max().unwrap_or(0)
}

struct Partitioned {
    clients: Vec<Vec<usize>>,
    classes: usize,
}

fn partition_train(
    train: &[(GrayImage, usize)],
    test: &[(GrayImage, usize)],
    n_clients: usize,
    seed: u64,
) -> Result<Partitioned> {
    if n_clients == 0 {
        return Err(Error::NoClients);
    }
    let labels: Vec<usize> = train.iter().map(|(_, l)| *l).collect();
    let clients = stratified_partition(&labels, n_clients, derive_seed(seed, &[1]))?;
    for (c, idxs) in clients.iter().enumerate() {
        if idxs.is_empty() {
            return Err(Error::EmptyClient { client: c });
        }
    }
    let classes = class_count(train).max(class_count(test));
    Ok(Partitioned { clients, classes })
}

/// Build the variable-length federation: stratified split, then every
/// image (train and test alike) independently resized to a uniformly
/// random menu side. Heterogeneity exists both within and across clients.
pub fn build_vl_dataset(
    train: &[(GrayImage, usize)],
    test: &[(GrayImage, usize)],
    n_clients: usize,
    size_menu: &[usize],
    seed: u64,
) -> Result<FederatedDataset> {
    if size_menu.is_empty() {
        return Err(Error::EmptyMenu);
    }
    let part = partition_train(train, test, n_clients, seed)?;
    let mut sizes_rng = Rng::from_stream(seed, &[2]);
    let clients = part
        .clients
        .iter()
        .enumerate()
        .map(|(client_id, idxs)| ClientDataset {
            client_id,
            examples: idxs
                .iter()
                .map(|&i| {
                    let side = size_menu[sizes_rng.next_below(size_menu.len() as u64) as usize];
                    to_sequence(&train[i].0, side, train[i].1)
                })
                .collect(),
        })
        .collect();
    Ok(FederatedDataset {
        clients,
        test_set: resize_test_vl(test, size_menu, seed),
        length_menu: menu_lengths(size_menu),
        classes: part.classes,
        dim: 1,
    })
}

/// Build the fixed-length federation: stratified split, one menu side per
/// client (menu shuffled by the seed), every image in a client resized to
/// that client's side. Heterogeneity exists only across clients. The test
/// set keeps the per-image random rule so both constructions are evaluated
/// on the same kind of test data.
pub fn build_fl_dataset(
    train: &[(GrayImage, usize)],
    test: &[(GrayImage, usize)],
    n_clients: usize,
    size_menu: &[usize],
    seed: u64,
) -> Result<FederatedDataset> {
    if size_menu.is_empty() {
        return Err(Error::EmptyMenu);
    }
    if size_menu.len() != n_clients {
        return Err(Error::MenuSizeMismatch { menu: size_menu.len(), clients: n_clients });
    }
    let part = partition_train(train, test, n_clients, seed)?;
    let mut assignment: Vec<usize> = size_menu.to_vec();
    Rng::from_stream(seed, &[4]).shuffle(&mut assignment);
    let clients = part
        .clients
        .iter()
        .enumerate()
        .map(|(client_id, idxs)| ClientDataset {
            client_id,
            examples: idxs
                .iter()
                .map(|&i| to_sequence(&train[i].0, assignment[client_id], train[i].1))
                .collect(),
        })
        .collect();
    Ok(FederatedDataset {
        clients,
        test_set: resize_test_vl(test, size_menu, seed),
        length_menu: menu_lengths(size_menu),
        classes: part.classes,
        dim: 1,
    })
}

fn resize_test_vl(
    test: &[(GrayImage, usize)],
    size_menu: &[usize],
    seed: u64,
) -> Vec<LabeledSequence> {
    let mut rng = Rng::from_stream(seed, &[3]);
    test.iter()
        .map(|(img, label)| {
            let side = size_menu[rng.next_below(size_menu.len() as u64) as usize];
            to_sequence(img, side, *label)
        })
        .collect()
}

fn menu_lengths(size_menu: &[usize]) -> Vec<usize> {
    let mut lengths: Vec<usize> = size_menu.iter().map(|s| s * s).collect();
    lengths.sort_unstable();
    lengths.dedup();
    lengths
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_streams(images: &[(Vec<u8>, u8)], side: usize) -> (Vec<u8>, Vec<u8>) {
        let mut im = Vec::new();
        im.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        im.extend_from_slice(&(images.len() as u32).to_be_bytes());
        im.extend_from_slice(&(side as u32).to_be_bytes());
        im.extend_from_slice(&(side as u32).to_be_bytes());
        let mut lb = Vec::new();
        lb.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        lb.extend_from_slice(&(images.len() as u32).to_be_bytes());
        for (pixels, label) in images {
            im.extend_from_slice(pixels);
            lb.push(*label);
        }
        (im, lb)
    }

    #[test]
    fn idx_roundtrip_single_image() {
        let (im, lb) = idx_streams(&[(vec![0u8; 28 * 28], 7)], 28);
        let out = load_idx_images(&im, &lb).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].1, 7);
        assert!(out[0].0.pixels.iter().all(|&p| p == 0.0));
        assert_eq!(out[0].0.side, 28);
    }

    #[test]
    fn idx_error_paths_are_distinct() {
        let (im, lb) = idx_streams(&[(vec![255u8; 4], 3)], 2);
        // label magic where an image magic should be
        let err = load_idx_images(&lb, &lb).unwrap_err();
        assert!(matches!(err, Error::IdxBadMagic { expected: IDX_IMAGE_MAGIC, .. }));
        // count mismatch: labels advertise 9, images 10
        let (im10, _) = idx_streams(&(0..10).map(|i| (vec![0u8; 4], i as u8)).collect::<Vec<_>>(), 2);
        let (_, lb9) = idx_streams(&(0..9).map(|i| (vec![0u8; 4], i as u8)).collect::<Vec<_>>(), 2);
        assert_eq!(
            load_idx_images(&im10, &lb9).unwrap_err(),
            Error::IdxCountMismatch { images: 10, labels: 9 }
        );
        // truncated payload
        let err = load_idx_images(&im[..im.len() - 1], &lb).unwrap_err();
        assert!(matches!(err, Error::IdxTruncated { .. }));
        // non-square
        let mut bad = im.clone();
        bad[8..12].copy_from_slice(&3u32.to_be_bytes());
        assert!(matches!(load_idx_images(&bad, &lb).unwrap_err(), Error::IdxNotSquare { .. }));
    }

    #[test]
    fn synthetic_digits_deterministic_and_balanced() {
        let a = generate_synthetic_digits(100, 1);
        let b = generate_synthetic_digits(100, 1);
        assert_eq!(a, b);
        let mut hist = [0usize; 10];
        for (img, label) in &a {
            hist[*label] += 1;
            assert!(img.pixels.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
        assert!(hist.iter().all(|&c| c == 10));
        assert_ne!(generate_synthetic_digits(100, 2), a);
    }

    #[test]
    fn resize_identity_and_constants() {
        let img = GrayImage::new(9, (0..81).map(|i| (i % 7) as f64 / 7.0).collect());
        assert_eq!(resize_image(&img, 9), img);
        let flat = GrayImage::new(6, vec![0.321; 36]);
        for s in [1, 2, 5, 6, 13] {
            let r = resize_image(&flat, s);
            assert!(r.pixels.iter().all(|&p| p == 0.321), "side {s}");
        }
    }

    // independent oracle: textbook weighted form of bilinear sampling
    fn bilinear_oracle(img: &GrayImage, s2: usize) -> Vec<f64> {
        let s1 = img.side;
        let scale = if s2 > 1 { (s1 - 1) as f64 / (s2 - 1) as f64 } else { 0.0 };
        let mut out = Vec::new();
        for oy in 0..s2 {
            for ox in 0..s2 {
                let (sy, sx) = (oy as f64 * scale, ox as f64 * scale);
                let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                let (y1, x1) = ((y0 + 1).min(s1 - 1), (x0 + 1).min(s1 - 1));
                let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
                out.push(
                    img.get(y0, x0) * (1.0 - fx) * (1.0 - fy)
                        + img.get(y0, x1) * fx * (1.0 - fy)
                        + img.get(y1, x0) * (1.0 - fx) * fy
                        + img.get(y1, x1) * fx * fy,
                );
            }
        }
        out
    }

    #[test]
    fn resize_matches_sampling_oracle_and_keeps_ramps_monotone() {
        // 28x28 linear ramp along rows
        let img = GrayImage::new(28, (0..28 * 28).map(|i| (i % 28) as f64 / 27.0).collect());
        for s in [14, 17, 21, 24, 28] {
            let r = resize_image(&img, s);
            let want = bilinear_oracle(&img, s);
            for (got, want) in r.pixels.iter().zip(&want) {
                assert!((got - want).abs() < 1e-12);
            }
            for row in r.pixels.chunks(s) {
                for w in row.windows(2) {
                    assert!(w[1] >= w[0], "row not monotone at side {s}");
                }
            }
        }
    }

    #[test]
    fn scanline_flattening() {
        let img = GrayImage::new(2, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(flatten_scanline(&img), vec![0.1, 0.2, 0.3, 0.4]);
        let img28 = GrayImage::new(28, vec![0.0; 784]);
        assert_eq!(flatten_scanline(&img28).len(), 784);
        let img14 = resize_image(&img28, 14);
        assert_eq!(flatten_scanline(&img14).len(), 196);
    }

    #[test]
    fn partition_exact_and_trimmed() {
        // 100 examples, 10 per class, 5 clients -> 20 each, 2 per class
        let labels: Vec<usize> = (0..100).map(|i| i / 10).collect();
        let parts = stratified_partition(&labels, 5, 11).unwrap();
        assert_eq!(parts.len(), 5);
        for p in &parts {
            assert_eq!(p.len(), 20);
            let mut hist = [0usize; 10];
            for &i in p {
                hist[labels[i]] += 1;
            }
            assert!(hist.iter().all(|&c| c == 2));
        }
        assert_eq!(parts, stratified_partition(&labels, 5, 11).unwrap());

        // one class with 11 examples: exactly one trimmed, the highest index
        let mut labels101 = labels.clone();
        labels101.push(0);
        let parts = stratified_partition(&labels101, 5, 11).unwrap();
        let total: usize = parts.iter().map(|p| p.len()).sum();
        assert_eq!(total, 100);
        assert!(parts.iter().all(|p| !p.contains(&100)));
    }

    #[test]
    fn partition_rejects_zero_clients() {
        assert_eq!(stratified_partition(&[0, 1], 0, 0), Err(Error::NoClients));
    }

    #[test]
    fn vl_dataset_shape() {
        let train = generate_synthetic_digits(200, 3);
        let test = generate_synthetic_digits(50, 4);
        let menu = [14, 17, 21, 24, 28];
        let ds = build_vl_dataset(&train, &test, 5, &menu, 9).unwrap();
        ds.validate().unwrap();
        assert_eq!(ds.length_menu, vec![196, 289, 441, 576, 784]);
        assert_eq!(ds.clients.len(), 5);
        assert!(ds.clients.iter().all(|c| c.examples.len() == 40));
        for e in ds.clients.iter().flat_map(|c| &c.examples) {
            assert!(ds.length_menu.contains(&e.length));
        }
        assert_eq!(ds, build_vl_dataset(&train, &test, 5, &menu, 9).unwrap());
    }

    #[test]
    fn fl_dataset_is_length_pure_per_client() {
        let train = generate_synthetic_digits(200, 3);
        let test = generate_synthetic_digits(50, 4);
        let menu = [14, 17, 21, 24, 28];
        let ds = build_fl_dataset(&train, &test, 5, &menu, 9).unwrap();
        ds.validate().unwrap();
        let mut seen = Vec::new();
        for c in &ds.clients {
            let mut lens: Vec<usize> = c.examples.iter().map(|e| e.length).collect();
            lens.sort_unstable();
            lens.dedup();
            assert_eq!(lens.len(), 1, "client {} mixes lengths", c.client_id);
            seen.push(lens[0]);
        }
        seen.sort_unstable();
        assert_eq!(seen, vec![196, 289, 441, 576, 784]);
        // degenerate per-client distribution has the full entropy gap
        for c in &ds.clients {
            let g = temporal_heterogeneity(&c.length_distribution(&ds.length_menu)).unwrap();
            assert_eq!(g, libm::log(5.0));
        }
        assert_eq!(
            build_fl_dataset(&train, &test, 3, &menu, 9).unwrap_err(),
            Error::MenuSizeMismatch { menu: 5, clients: 3 }
        );
    }

    #[test]
    fn heterogeneity_metric_values() {
        let uniform = LengthDistribution {
            support: vec![1, 2, 3, 4, 5],
            probabilities: vec![0.2; 5],
        };
        assert!(temporal_heterogeneity(&uniform).unwrap().abs() < 1e-12);

        let point = LengthDistribution {
            support: vec![1, 2, 3, 4, 5],
            probabilities: vec![0.0, 0.0, 1.0, 0.0, 0.0],
        };
        assert_eq!(temporal_heterogeneity(&point).unwrap(), libm::log(5.0));

        // hand-checked: ln 5 - ln 2
        let half = LengthDistribution {
            support: vec![1, 2, 3, 4, 5],
            probabilities: vec![0.5, 0.5, 0.0, 0.0, 0.0],
        };
        let want = libm::log(5.0) - libm::log(2.0);
        assert!((temporal_heterogeneity(&half).unwrap() - want).abs() < 1e-12);
        assert!((want - 0.916291).abs() < 1e-6);

        let bad = LengthDistribution { support: vec![1], probabilities: vec![0.7] };
        assert!(matches!(temporal_heterogeneity(&bad), Err(Error::NotADistribution { .. })));
    }

    #[test]
    fn vl_clients_see_every_length() {
        // with >= 200 examples per client every menu length appears
        let train = generate_synthetic_digits(1000, 5);
        let test = generate_synthetic_digits(10, 6);
        let menu = [14, 17, 21, 24, 28];
        for seed in 0..10 {
            let ds = build_vl_dataset(&train, &test, 5, &menu, seed).unwrap();
            for c in &ds.clients {
                let dist = c.length_distribution(&ds.length_menu);
                assert!(
                    dist.probabilities.iter().all(|&p| p > 0.0),
                    "seed {seed} client {} misses a length",
                    c.client_id
                );
            }
        }
    }
}
