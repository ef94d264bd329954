//! Per-level object list: simplified attributes of every region plus its
//! relations to neighbors at the same level and to its parent one level up.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::pyramid::halve;
use crate::segmenter::{Label, LabelMap, RegionStats};

/// A region at a given pyramid level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionId {
    pub level: usize,
    pub label: Label,
}

impl RegionId {
    pub fn new(level: usize, label: Label) -> Self {
        Self { level, label }
    }
}

impl std::fmt::Display for RegionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}:{}", self.level, self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    SubPartOf,
    LeftOf,
    Above,
    AdjacentTo,
    Contains,
}

impl RelationKind {
    pub const ALL: [RelationKind; 5] = [
        RelationKind::SubPartOf,
        RelationKind::LeftOf,
        RelationKind::Above,
        RelationKind::AdjacentTo,
        RelationKind::Contains,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::SubPartOf => "sub_part_of",
            RelationKind::LeftOf => "left_of",
            RelationKind::Above => "above",
            RelationKind::AdjacentTo => "adjacent_to",
            RelationKind::Contains => "contains",
        }
    }
}

/// `source kind target`, e.g. "this region is left_of target".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relation {
    pub kind: RelationKind,
    pub target: RegionId,
    /// Overlap fraction for `sub_part_of`, shared-border fraction for
    /// `adjacent_to` and `contains`, 1.0 for the directional kinds.
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionDescriptor {
    pub id: RegionId,
    pub area: usize,
    pub area_fraction: f64,
    /// Normalized to `[0, 1]`, x rightward, y downward, pixel centers at `(i + 0.5) / n`.
    pub centroid: (f64, f64),
    pub mean_intensity: f64,
    pub parent: Option<RegionId>,
    pub relations: Vec<Relation>,
}

impl RegionDescriptor {
    pub fn relations_of(&self, kind: RelationKind) -> impl Iterator<Item = &Relation> {
        self.relations.iter().filter(move |r| r.kind == kind)
    }

    pub fn has_relation(&self, kind: RelationKind, target: RegionId) -> bool {
        self.relations
            .iter()
            .any(|r| r.kind == kind && r.target == target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationParams {
    /// Minimum normalized centroid offset for `left_of` / `above`.
    pub directional_gap: f64,
}

impl Default for RelationParams {
    fn default() -> Self {
        Self {
            directional_gap: 0.1,
        }
    }
}

/// One descriptor per region of the level, in label order.
///
/// The parent is the coarse label that covers most of the region's pixels
/// under the `(x / 2, y / 2)` projection, lowest label on ties; it is also
/// recorded as a `sub_part_of` relation whose strength is that coverage.
///
/// Panics if `coarse` is not the halved size of `labels`.
pub fn register_level(
    level_index: usize,
    labels: &LabelMap,
    stats: &RegionStats,
    coarse: Option<&LabelMap>,
) -> Vec<RegionDescriptor> {
    let (w, h) = labels.dims();
    let total = (w * h) as f64;

    let mut parents: BTreeMap<Label, (Label, usize)> = BTreeMap::new();
    if let Some(coarse) = coarse {
        assert_eq!(
            coarse.dims(),
            (halve(w), halve(h)),
            "coarse map is not the next level up"
        );
        let mut overlap: BTreeMap<(Label, Label), usize> = BTreeMap::new();
        for y in 0..h {
            for x in 0..w {
                *overlap
                    .entry((labels.get(x, y), coarse.get(x / 2, y / 2)))
                    .or_default() += 1;
            }
        }
        // Iteration is by (label, coarse label) ascending, so strict `>` keeps the lowest on ties.
        for ((l, cl), count) in overlap {
            let e = parents.entry(l).or_insert((cl, count));
            if count > e.1 {
                *e = (cl, count);
            }
        }
    }

    stats
        .iter()
        .map(|(label, s)| {
            let parent = parents
                .get(&label)
                .map(|&(cl, count)| (RegionId::new(level_index + 1, cl), count));
            RegionDescriptor {
                id: RegionId::new(level_index, label),
                area: s.pixel_count,
                area_fraction: s.pixel_count as f64 / total,
                centroid: (
                    (s.centroid.0 + 0.5) / w as f64,
                    (s.centroid.1 + 0.5) / h as f64,
                ),
                mean_intensity: s.mean_intensity,
                parent: parent.map(|(id, _)| id),
                relations: parent
                    .map(|(id, count)| Relation {
                        kind: RelationKind::SubPartOf,
                        target: id,
                        strength: count as f64 / s.pixel_count as f64,
                    })
                    .into_iter()
                    .collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl BBox {
    fn strictly_inside(&self, outer: &BBox) -> bool {
        outer.x0 < self.x0 && self.x1 < outer.x1 && outer.y0 < self.y0 && self.y1 < outer.y1
    }
}

/// Adds the within-level relations to descriptors of one level.
///
/// * `adjacent_to`: the regions share at least one pixel edge; strength is
///   shared edges over the border length (edges against other regions) of
///   the smaller region. Symmetric.
/// * `left_of` / `above`: evaluated for adjacent pairs only. A is left of B
///   when B's centroid lies more than `directional_gap` to the right and
///   the horizontal offset dominates; `above` likewise with the vertical
///   offset strictly dominating.
/// * `contains`: B's bounding box lies strictly inside A's and they are adjacent.
///
/// Relations end up sorted by kind, then target.
pub fn compute_relations(
    mut descriptors: Vec<RegionDescriptor>,
    labels: &LabelMap,
    params: &RelationParams,
) -> Vec<RegionDescriptor> {
    let (w, h) = labels.dims();
    let px = labels.labels();
    let mut shared: BTreeMap<(Label, Label), usize> = BTreeMap::new();
    let mut border: BTreeMap<Label, usize> = BTreeMap::new();
    let mut boxes: BTreeMap<Label, BBox> = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let l = px[i];
            boxes
                .entry(l)
                .and_modify(|b| {
                    b.x0 = b.x0.min(x);
                    b.x1 = b.x1.max(x);
                    b.y0 = b.y0.min(y);
                    b.y1 = b.y1.max(y);
                })
                .or_insert(BBox {
                    x0: x,
                    y0: y,
                    x1: x,
                    y1: y,
                });
            let right = (x + 1 < w).then(|| px[i + 1]);
            let below = (y + 1 < h).then(|| px[i + w]);
            for other in [right, below].into_iter().flatten() {
                if other != l {
                    *shared.entry((l.min(other), l.max(other))).or_default() += 1;
                    *border.entry(l).or_default() += 1;
                    *border.entry(other).or_default() += 1;
                }
            }
        }
    }

    let index: BTreeMap<Label, usize> = descriptors
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.label, i))
        .collect();
    let level = descriptors.first().map_or(0, |d| d.id.level);
    let gap = params.directional_gap;

    for (&(a, b), &edges) in &shared {
        let (Some(&ia), Some(&ib)) = (index.get(&a), index.get(&b)) else {
            continue;
        };
        let (da, db) = (&descriptors[ia], &descriptors[ib]);
        let smaller = if (db.area, b) < (da.area, a) { b } else { a };
        let strength = edges as f64 / border[&smaller] as f64;
        let (ca, cb) = (da.centroid, db.centroid);
        let (dx, dy) = (cb.0 - ca.0, cb.1 - ca.1);

        let mut add = |from: usize, kind: RelationKind, to: Label, strength: f64| {
            descriptors[from].relations.push(Relation {
                kind,
                target: RegionId::new(level, to),
                strength,
            });
        };
        add(ia, RelationKind::AdjacentTo, b, strength);
        add(ib, RelationKind::AdjacentTo, a, strength);
        if dy.abs() <= dx.abs() {
            if dx > gap {
                add(ia, RelationKind::LeftOf, b, 1.0);
            } else if -dx > gap {
                add(ib, RelationKind::LeftOf, a, 1.0);
            }
        }
        if dx.abs() < dy.abs() {
            if dy > gap {
                add(ia, RelationKind::Above, b, 1.0);
            } else if -dy > gap {
                add(ib, RelationKind::Above, a, 1.0);
            }
        }
        if boxes[&b].strictly_inside(&boxes[&a]) {
            add(ia, RelationKind::Contains, b, strength);
        } else if boxes[&a].strictly_inside(&boxes[&b]) {
            add(ib, RelationKind::Contains, a, strength);
        }
    }

    for d in &mut descriptors {
        d.relations.sort_by_key(|r| (r.kind, r.target));
    }
    descriptors
}
