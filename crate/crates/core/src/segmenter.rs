//! Top-down segmentation: region growing at the pyramid top, then a
//! level-by-level descent that upsamples the label map, re-examines the
//! pixels that disagree with their inherited region and seeds new regions.
//!
//! Everything is 4-connected, neighbors are visited up, left, right, down,
//! and ties always go to the lowest label, so output is a pure function of
//! the input bytes and [`SegParams`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pyramid::{build_pyramid, halve};
use crate::raster::Raster;

/// Region identifier within one level. Valid labels start at 1.
pub type Label = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SegmentError {
    #[error("dimension mismatch: reference {reference:?} does not halve to coarse {coarse:?}")]
    DimensionMismatch {
        reference: (usize, usize),
        coarse: (usize, usize),
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("coarse label {0} has no region statistics")]
    MissingStats(Label),
}

/// Tolerances driving segmentation. Intensities are compared in gray levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegParams {
    /// Admission tolerance for region growing around the running region mean.
    pub tau_seg: u32,
    /// A pixel deviates from its inherited region when it differs from the
    /// region mean by more than this.
    pub tau_refine: u32,
    /// Smallest cluster of unresolved pixels that may become a new region.
    pub min_seed: usize,
    pub max_refine_passes: usize,
    pub top_max_pixels: usize,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            tau_seg: 12,
            tau_refine: 12,
            min_seed: 4,
            max_refine_passes: 5,
            top_max_pixels: crate::pyramid::DEFAULT_TOP_MAX_PIXELS,
        }
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.min_seed < 1 {
            return Err(SegmentError::InvalidParams(
                "min_seed must be at least 1".into(),
            ));
        }
        if self.max_refine_passes < 1 {
            return Err(SegmentError::InvalidParams(
                "max_refine_passes must be at least 1".into(),
            ));
        }
        if self.top_max_pixels < 1 {
            return Err(SegmentError::InvalidParams(
                "top_max_pixels must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-pixel region labels for one level.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<Label>,
    next_label: Label,
}

impl LabelMap {
    /// Wraps a label buffer. Returns `None` if the buffer does not match the
    /// dimensions or holds a zero label. `next_label` becomes `max + 1`.
    pub fn from_labels(width: usize, height: usize, labels: Vec<Label>) -> Option<Self> {
        if width == 0 || height == 0 || labels.len() != width * height || labels.contains(&0) {
            return None;
        }
        let next_label = labels.iter().copied().max().unwrap_or(0) + 1;
        Some(Self {
            width,
            height,
            labels,
            next_label,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    /// Smallest label id never issued for this map.
    pub fn next_label(&self) -> Label {
        self.next_label
    }

    /// Labels present, ascending.
    pub fn distinct_labels(&self) -> Vec<Label> {
        let set: BTreeSet<Label> = self.labels.iter().copied().collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStat {
    pub pixel_count: usize,
    pub intensity_sum: u64,
    pub mean_intensity: f64,
    /// Mean pixel index `(x, y)`.
    pub centroid: (f64, f64),
}

/// Statistics for every label present in a [`LabelMap`], keyed by label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionStats {
    regions: BTreeMap<Label, RegionStat>,
}

impl RegionStats {
    /// Computes statistics of `labels` against the intensities of `reference`.
    ///
    /// Panics if the dimensions differ.
    pub fn compute(labels: &LabelMap, reference: &Raster) -> Self {
        assert_eq!(
            labels.dims(),
            reference.dims(),
            "label map and raster differ in size"
        );
        let mut acc: BTreeMap<Label, (usize, u64, u64, u64)> = BTreeMap::new();
        let w = labels.width;
        for (i, (&l, &v)) in labels.labels.iter().zip(reference.pixels()).enumerate() {
            let e = acc.entry(l).or_default();
            e.0 += 1;
            e.1 += u64::from(v);
            e.2 += (i % w) as u64;
            e.3 += (i / w) as u64;
        }
        let regions = acc
            .into_iter()
            .map(|(l, (count, sum, sx, sy))| {
                let c = count as f64;
                (
                    l,
                    RegionStat {
                        pixel_count: count,
                        intensity_sum: sum,
                        mean_intensity: sum as f64 / c,
                        centroid: (sx as f64 / c, sy as f64 / c),
                    },
                )
            })
            .collect();
        Self { regions }
    }

    pub fn get(&self, label: Label) -> Option<&RegionStat> {
        self.regions.get(&label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, &RegionStat)> {
        self.regions.iter().map(|(&l, s)| (l, s))
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn total_pixels(&self) -> usize {
        self.regions.values().map(|s| s.pixel_count).sum()
    }
}

/// Segmentation of one pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSegmentation {
    /// Pyramid index, 0 = original image.
    pub level: usize,
    pub labels: LabelMap,
    pub stats: RegionStats,
}

/// Diagnostics of a single [`expand_level`] call.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpandReport {
    /// Deviant pixel count before the first refinement pass, then after each pass.
    pub deviant_per_pass: Vec<usize>,
    /// Regions born from clusters of at least `min_seed` deviant pixels.
    pub born: usize,
    /// Undersized deviant clusters folded into a neighboring region.
    pub forced: usize,
    /// Undersized clusters promoted to regions because nothing settled touched them.
    pub promoted: usize,
    /// Disconnected label fragments given their own label.
    pub split: usize,
    /// Pairwise merges of adjacent regions with close means.
    pub merged: usize,
}

/// 4-neighbors in visiting order: up, left, right, down.
#[inline]
fn neighbors(i: usize, w: usize, h: usize) -> [Option<usize>; 4] {
    let (x, y) = (i % w, i / w);
    [
        (y > 0).then(|| i - w),
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y + 1 < h).then(|| i + w),
    ]
}

/// `|v - sum/count| <= tau`, evaluated exactly.
#[inline]
fn within(v: u8, sum: u64, count: u64, tau: u32) -> bool {
    (i128::from(v) * i128::from(count) - i128::from(sum)).unsigned_abs()
        <= u128::from(tau) * u128::from(count)
}

#[inline]
fn deviation(v: u8, sum: u64, count: u64) -> f64 {
    (i128::from(v) * i128::from(count) - i128::from(sum)).unsigned_abs() as f64 / count as f64
}

/// Incremental-mean region growing over the `eligible` pixels.
///
/// Seeds are taken in row-major order; a neighbor joins when it lies within
/// `tau` of the current region mean, which updates on every admission.
/// Returns each region's pixel indices in admission order.
fn grow_regions(pixels: &[u8], w: usize, h: usize, eligible: &[bool], tau: u32) -> Vec<Vec<usize>> {
    let n = pixels.len();
    let mut taken = vec![false; n];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !eligible[seed] || taken[seed] {
            continue;
        }
        taken[seed] = true;
        let mut members = vec![seed];
        let mut sum = u64::from(pixels[seed]);
        let mut count = 1u64;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for nb in neighbors(p, w, h).into_iter().flatten() {
                if !eligible[nb] || taken[nb] || !within(pixels[nb], sum, count, tau) {
                    continue;
                }
                taken[nb] = true;
                sum += u64::from(pixels[nb]);
                count += 1;
                members.push(nb);
                queue.push_back(nb);
            }
        }
        regions.push(members);
    }
    regions
}

/// Segments the pyramid top by incremental-mean region growing with `tau_seg`.
/// Labels are issued in seed-scan order starting at 1.
pub fn segment_top(r: &Raster, p: &SegParams) -> (LabelMap, RegionStats) {
    let (w, h) = r.dims();
    let eligible = vec![true; r.pixel_count()];
    let regions = grow_regions(r.pixels(), w, h, &eligible, p.tau_seg);
    let mut labels = vec![0; r.pixel_count()];
    for (k, members) in regions.iter().enumerate() {
        let label = k as Label + 1;
        for &i in members {
            labels[i] = label;
        }
    }
    let lm = LabelMap {
        width: w,
        height: h,
        labels,
        next_label: regions.len() as Label + 1,
    };
    let stats = RegionStats::compute(&lm, r);
    (lm, stats)
}

/// Expands a coarse segmentation onto the next finer level.
pub fn expand_level(
    coarse: (&LabelMap, &RegionStats),
    reference: &Raster,
    p: &SegParams,
) -> Result<(LabelMap, RegionStats), SegmentError> {
    expand_level_with_report(coarse, reference, p).map(|(lm, rs, _)| (lm, rs))
}

/// Running (sum, count) per label, indexed by label id.
struct Accumulators(Vec<(u64, u64)>);

impl Accumulators {
    fn add(&mut self, label: Label, v: u8) {
        let idx = label as usize;
        if idx >= self.0.len() {
            self.0.resize(idx + 1, (0, 0));
        }
        self.0[idx].0 += u64::from(v);
        self.0[idx].1 += 1;
    }

    fn get(&self, label: Label) -> (u64, u64) {
        self.0.get(label as usize).copied().unwrap_or((0, 0))
    }
}

/// Compares `|a_sum/a_count - b_sum/b_count|` against another such gap exactly.
fn mean_gap(a: (u64, u64), b: (u64, u64)) -> (u128, u128) {
    let num =
        (i128::from(a.0) * i128::from(b.1) - i128::from(b.0) * i128::from(a.1)).unsigned_abs();
    (num, u128::from(a.1) * u128::from(b.1))
}

fn gap_less(x: (u128, u128), y: (u128, u128)) -> bool {
    x.0 * y.1 < y.0 * x.1
}

/// [`expand_level`] that also reports what the refinement did.
///
/// Steps, in order:
/// 1. nearest-neighbor 2x upscale of the coarse labels;
/// 2. pixels farther than `tau_refine` from their inherited region mean are
///    marked deviant; the rest are settled;
/// 3. up to `max_refine_passes` row-major passes move each deviant pixel to
///    the settled 4-neighbor region with the nearest mean, if that mean is
///    within `tau_refine`; means are refreshed between passes;
/// 4. the remaining deviant pixels are grouped by region growing (`tau_seg`);
///    groups of at least `min_seed` pixels become new regions, smaller ones
///    join the adjacent region with the nearest mean;
/// 5. disconnected fragments of one label are relabeled, and adjacent
///    regions whose means lie within `tau_seg` are merged into the lower label.
pub fn expand_level_with_report(
    coarse: (&LabelMap, &RegionStats),
    reference: &Raster,
    p: &SegParams,
) -> Result<(LabelMap, RegionStats, ExpandReport), SegmentError> {
    let (coarse_lm, coarse_stats) = coarse;
    let (w, h) = reference.dims();
    if (halve(w), halve(h)) != coarse_lm.dims() {
        return Err(SegmentError::DimensionMismatch {
            reference: (w, h),
            coarse: coarse_lm.dims(),
        });
    }
    let px = reference.pixels();
    let n = px.len();
    let cw = coarse_lm.width;
    let mut report = ExpandReport::default();

    let mut labels = Vec::with_capacity(n);
    for y in 0..h {
        let row = &coarse_lm.labels[(y / 2) * cw..(y / 2 + 1) * cw];
        labels.extend((0..w).map(|x| row[x / 2]));
    }
    let mut next = coarse_lm.next_label;

    let mut deviant = vec![false; n];
    let mut settled = Accumulators(vec![(0, 0); next as usize]);
    let mut deviant_count = 0usize;
    for i in 0..n {
        let l = labels[i];
        let s = coarse_stats.get(l).ok_or(SegmentError::MissingStats(l))?;
        if within(px[i], s.intensity_sum, s.pixel_count as u64, p.tau_refine) {
            settled.add(l, px[i]);
        } else {
            deviant[i] = true;
            deviant_count += 1;
        }
    }
    report.deviant_per_pass.push(deviant_count);

    for _ in 0..p.max_refine_passes {
        if deviant_count == 0 {
            break;
        }
        let snapshot = settled.0.clone();
        let mut moved = 0;
        for i in 0..n {
            if !deviant[i] {
                continue;
            }
            let mut best: Option<(f64, Label)> = None;
            for nb in neighbors(i, w, h).into_iter().flatten() {
                if deviant[nb] {
                    continue;
                }
                let l = labels[nb];
                let (s, c) = snapshot.get(l as usize).copied().unwrap_or((0, 0));
                if c == 0 {
                    continue;
                }
                let d = deviation(px[i], s, c);
                if best.is_none_or(|(bd, bl)| d < bd || (d == bd && l < bl)) {
                    best = Some((d, l));
                }
            }
            if let Some((_, l)) = best {
                let (s, c) = snapshot[l as usize];
                if within(px[i], s, c, p.tau_refine) {
                    labels[i] = l;
                    deviant[i] = false;
                    settled.add(l, px[i]);
                    moved += 1;
                }
            }
        }
        deviant_count -= moved;
        report.deviant_per_pass.push(deviant_count);
        if moved == 0 {
            break;
        }
    }

    if deviant_count > 0 {
        let clusters = grow_regions(px, w, h, &deviant, p.tau_seg);
        let mut small = Vec::new();
        for cluster in clusters {
            if cluster.len() >= p.min_seed {
                let l = next;
                next += 1;
                for &i in &cluster {
                    labels[i] = l;
                    deviant[i] = false;
                    settled.add(l, px[i]);
                }
                report.born += 1;
            } else {
                small.push(cluster);
            }
        }

        while !small.is_empty() {
            let mut pending = Vec::new();
            let mut progressed = false;
            for cluster in small {
                let own = cluster
                    .iter()
                    .fold((0u64, 0u64), |(s, c), &i| (s + u64::from(px[i]), c + 1));
                let mut best: Option<((u128, u128), Label)> = None;
                for &i in &cluster {
                    for nb in neighbors(i, w, h).into_iter().flatten() {
                        if deviant[nb] {
                            continue;
                        }
                        let l = labels[nb];
                        let gap = mean_gap(own, settled.get(l));
                        let better = match best {
                            None => true,
                            Some((bg, bl)) => gap_less(gap, bg) || (!gap_less(bg, gap) && l < bl),
                        };
                        if better {
                            best = Some((gap, l));
                        }
                    }
                }
                match best {
                    Some((_, l)) => {
                        for &i in &cluster {
                            labels[i] = l;
                            deviant[i] = false;
                            settled.add(l, px[i]);
                        }
                        report.forced += 1;
                        progressed = true;
                    }
                    None => pending.push(cluster),
                }
            }
            if !progressed && !pending.is_empty() {
                // Nothing settled borders any remaining cluster.
                let cluster = pending.remove(0);
                let l = next;
                next += 1;
                for &i in &cluster {
                    labels[i] = l;
                    deviant[i] = false;
                    settled.add(l, px[i]);
                }
                report.promoted += 1;
            }
            small = pending;
        }
    }

    // Without deviants the level is a plain upscale of a valid partition;
    // leave it alone.
    if report.deviant_per_pass[0] > 0 {
        report.split = split_disconnected(&mut labels, w, h, &mut next);
        report.merged = merge_similar(&mut labels, px, w, h, next, p.tau_seg);
    }

    let lm = LabelMap {
        width: w,
        height: h,
        labels,
        next_label: next,
    };
    let stats = RegionStats::compute(&lm, reference);
    Ok((lm, stats, report))
}

/// Gives every 4-connected fragment after the first (in row-major
/// discovery order) of each label a fresh label. Returns the number of fragments relabeled.
fn split_disconnected(labels: &mut [Label], w: usize, h: usize, next: &mut Label) -> usize {
    let n = labels.len();
    let mut seen = vec![false; n];
    let mut claimed = BTreeSet::new();
    let mut stack = Vec::new();
    let mut split = 0;
    for seed in 0..n {
        if seen[seed] {
            continue;
        }
        let original = labels[seed];
        let target = if claimed.insert(original) {
            original
        } else {
            split += 1;
            *next += 1;
            *next - 1
        };
        seen[seed] = true;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            labels[p] = target;
            for nb in neighbors(p, w, h).into_iter().flatten() {
                if !seen[nb] && labels[nb] == original {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
    }
    split
}

fn find(parent: &mut [Label], mut l: Label) -> Label {
    while parent[l as usize] != l {
        let up = parent[parent[l as usize] as usize];
        parent[l as usize] = up;
        l = up;
    }
    l
}

/// Repeatedly merges adjacent regions whose means differ by at most `tau`,
/// closest pairs first, lower label surviving. Returns the number of merges.
fn merge_similar(
    labels: &mut [Label],
    px: &[u8],
    w: usize,
    h: usize,
    next: Label,
    tau: u32,
) -> usize {
    let mut acc = Accumulators(vec![(0, 0); next as usize]);
    for (&l, &v) in labels.iter().zip(px) {
        acc.add(l, v);
    }
    let mut edges = BTreeSet::new();
    for i in 0..labels.len() {
        let (x, y) = (i % w, i / w);
        if x + 1 < w && labels[i] != labels[i + 1] {
            let (a, b) = (labels[i], labels[i + 1]);
            edges.insert((a.min(b), a.max(b)));
        }
        if y + 1 < h && labels[i] != labels[i + w] {
            let (a, b) = (labels[i], labels[i + w]);
            edges.insert((a.min(b), a.max(b)));
        }
    }

    let mut parent: Vec<Label> = (0..next).collect();
    let mut merges = 0;
    loop {
        let mut candidates: Vec<((u128, u128), Label, Label)> = edges
            .iter()
            .filter_map(|&(a, b)| {
                let (sa, ca) = acc.get(a);
                let (sb, cb) = acc.get(b);
                let gap = mean_gap((sa, ca), (sb, cb));
                (gap.0 <= u128::from(tau) * gap.1).then_some((gap, a, b))
            })
            .collect();
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|x, y| {
            (x.0 .0 * y.0 .1)
                .cmp(&(y.0 .0 * x.0 .1))
                .then(x.1.cmp(&y.1))
                .then(x.2.cmp(&y.2))
        });
        let mut touched = BTreeSet::new();
        for (_, a, b) in candidates {
            if touched.contains(&a) || touched.contains(&b) {
                continue;
            }
            touched.insert(a);
            touched.insert(b);
            parent[b as usize] = a;
            let (sb, cb) = acc.get(b);
            acc.0[a as usize].0 += sb;
            acc.0[a as usize].1 += cb;
            acc.0[b as usize] = (0, 0);
            merges += 1;
        }
        edges = edges
            .into_iter()
            .filter_map(|(a, b)| {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                (ra != rb).then(|| (ra.min(rb), ra.max(rb)))
            })
            .collect();
    }
    if merges > 0 {
        for l in labels.iter_mut() {
            *l = find(&mut parent, *l);
        }
    }
    merges
}

/// Runs the full descent. Returns one entry per pyramid level, top first.
pub fn extract_segments(r: &Raster, p: &SegParams) -> Result<Vec<LevelSegmentation>, SegmentError> {
    p.validate()?;
    let pyramid = build_pyramid(r, p.top_max_pixels);
    let top_index = pyramid.len() - 1;
    let (lm, stats) = segment_top(pyramid.top(), p);
    let mut out = Vec::with_capacity(pyramid.len());
    out.push(LevelSegmentation {
        level: top_index,
        labels: lm,
        stats,
    });
    for level in (0..top_index).rev() {
        let prev = out.last().expect("top pushed");
        let (lm, stats) = expand_level((&prev.labels, &prev.stats), &pyramid.levels()[level], p)?;
        out.push(LevelSegmentation {
            level,
            labels: lm,
            stats,
        });
    }
    Ok(out)
}
