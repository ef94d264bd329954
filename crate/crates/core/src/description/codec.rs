//! Canonical text form of [`ImageDescription`].
//!
//! Compact JSON, keys in declaration order of the wire structs below, reals
//! with exactly 6 decimals:
//!
//! ```text
//! {"version":"pid-1",
//!  "meta":{"width":W,"height":H,"params":{"tau_seg":..,"tau_refine":..,"min_seed":..,
//!          "max_refine_passes":..,"top_max_pixels":..}},
//!  "levels":[{"level":L,"width":w,"height":h,
//!             "regions":[{"label":l,"area":n,"area_fraction":f,"centroid":[x,y],
//!                         "mean_intensity":m,"parent":p|null,
//!                         "relations":[{"kind":k,"target":[level,label],"strength":s}]}],
//!             "support":[[label,run_length],...]}],
//!  "density":[{"level":L,"bytes":b,"density":d}]}      (optional)
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    density_profile, DescriptionError, DescriptionMeta, ImageDescription, LevelDensity,
    LevelDescription, RegionSupport, Run, FORMAT_VERSION,
};
use crate::canonical::{quantize, Fixed6};
use crate::pyramid::level_dims;
use crate::registry::{RegionDescriptor, RegionId, Relation, RelationKind};
use crate::segmenter::{Label, SegParams};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireDescription {
    version: String,
    meta: WireMeta,
    levels: Vec<WireLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    density: Option<Vec<WireDensity>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireMeta {
    width: usize,
    height: usize,
    params: WireParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireParams {
    tau_seg: u32,
    tau_refine: u32,
    min_seed: usize,
    max_refine_passes: usize,
    top_max_pixels: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct WireLevel {
    level: usize,
    width: usize,
    height: usize,
    pub(super) regions: Vec<WireRegion>,
    pub(super) support: Vec<(Label, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct WireRegion {
    label: Label,
    area: usize,
    area_fraction: Fixed6,
    centroid: (Fixed6, Fixed6),
    mean_intensity: Fixed6,
    parent: Option<Label>,
    relations: Vec<WireRelation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRelation {
    kind: RelationKind,
    target: (usize, Label),
    strength: Fixed6,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireDensity {
    level: usize,
    bytes: usize,
    density: Fixed6,
}

pub(super) fn wire_level(l: &LevelDescription) -> WireLevel {
    WireLevel {
        level: l.level,
        width: l.width,
        height: l.height,
        regions: l
            .regions
            .iter()
            .map(|d| WireRegion {
                label: d.id.label,
                area: d.area,
                area_fraction: Fixed6(d.area_fraction),
                centroid: (Fixed6(d.centroid.0), Fixed6(d.centroid.1)),
                mean_intensity: Fixed6(d.mean_intensity),
                parent: d.parent.map(|p| p.label),
                relations: d
                    .relations
                    .iter()
                    .map(|r| WireRelation {
                        kind: r.kind,
                        target: (r.target.level, r.target.label),
                        strength: Fixed6(r.strength),
                    })
                    .collect(),
            })
            .collect(),
        support: l
            .support
            .runs()
            .iter()
            .map(|r| (r.label, r.length))
            .collect(),
    }
}

/// Canonical text of `d`. Equal descriptions give identical bytes.
pub fn serialize(d: &ImageDescription) -> String {
    let wire = WireDescription {
        version: FORMAT_VERSION.to_string(),
        meta: WireMeta {
            width: d.meta.width,
            height: d.meta.height,
            params: WireParams {
                tau_seg: d.meta.params.tau_seg,
                tau_refine: d.meta.params.tau_refine,
                min_seed: d.meta.params.min_seed,
                max_refine_passes: d.meta.params.max_refine_passes,
                top_max_pixels: d.meta.params.top_max_pixels,
            },
        },
        levels: d.levels.iter().map(wire_level).collect(),
        density: d.density.as_ref().map(|ds| {
            ds.iter()
                .map(|x| WireDensity {
                    level: x.level,
                    bytes: x.bytes,
                    density: Fixed6(x.density),
                })
                .collect()
        }),
    };
    serde_json::to_string(&wire).expect("validated descriptions hold finite reals")
}

fn invariant(msg: impl Into<String>) -> DescriptionError {
    DescriptionError::InvariantViolation(msg.into())
}

/// Parses and fully validates a description.
pub fn deserialize(text: &str) -> Result<ImageDescription, DescriptionError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| DescriptionError::Schema(e.to_string()))?;
    match value.get("version") {
        Some(serde_json::Value::String(v)) if v == FORMAT_VERSION => {}
        Some(serde_json::Value::String(v)) => return Err(DescriptionError::Version(v.clone())),
        Some(_) => return Err(DescriptionError::Schema("version must be a string".into())),
        None => return Err(DescriptionError::Schema("missing version".into())),
    }
    let wire: WireDescription =
        serde_json::from_value(value).map_err(|e| DescriptionError::Schema(e.to_string()))?;

    let WireParams {
        tau_seg,
        tau_refine,
        min_seed,
        max_refine_passes,
        top_max_pixels,
    } = wire.meta.params;
    let params = SegParams {
        tau_seg,
        tau_refine,
        min_seed,
        max_refine_passes,
        top_max_pixels,
    };
    params.validate().map_err(|e| invariant(e.to_string()))?;
    let (width, height) = (wire.meta.width, wire.meta.height);
    if width == 0 || height == 0 {
        return Err(invariant(format!("image dimensions {width}x{height}")));
    }
    let dims = level_dims(width, height, params.top_max_pixels);
    if wire.levels.len() != dims.len() {
        return Err(invariant(format!(
            "{} levels stored, {} implied by dimensions and parameters",
            wire.levels.len(),
            dims.len()
        )));
    }
    let top = dims.len() - 1;

    let mut levels: Vec<LevelDescription> = Vec::with_capacity(dims.len());
    // Labels of the level above, for parent checks.
    let mut above: Option<BTreeSet<Label>> = None;
    for (k, wl) in wire.levels.into_iter().enumerate() {
        let index = top - k;
        if wl.level != index {
            return Err(invariant(format!(
                "level {} stored at position {k}",
                wl.level
            )));
        }
        if (wl.width, wl.height) != dims[index] {
            return Err(invariant(format!(
                "level {index} is {}x{}, expected {:?}",
                wl.width, wl.height, dims[index]
            )));
        }
        let level = decode_level(index, wl, above.as_ref(), index == top)?;
        above = Some(level.regions.iter().map(|d| d.id.label).collect());
        levels.push(level);
    }

    let mut desc = ImageDescription {
        meta: DescriptionMeta {
            width,
            height,
            params,
        },
        levels,
        density: None,
    };
    if let Some(stored) = wire.density {
        let stored: Vec<LevelDensity> = stored
            .into_iter()
            .map(|x| LevelDensity {
                level: x.level,
                width: 0,
                height: 0,
                bytes: x.bytes,
                density: x.density.0,
            })
            .collect();
        let expected = density_profile(&desc);
        let matches = stored.len() == expected.len()
            && stored
                .iter()
                .zip(&expected)
                .all(|(s, e)| s.level == e.level && s.bytes == e.bytes && s.density == e.density);
        if !matches {
            return Err(invariant(
                "stored density profile does not match the levels",
            ));
        }
        desc.density = Some(expected);
    }
    Ok(desc)
}

fn decode_level(
    index: usize,
    wl: WireLevel,
    above: Option<&BTreeSet<Label>>,
    is_top: bool,
) -> Result<LevelDescription, DescriptionError> {
    let (w, h) = (wl.width, wl.height);
    let support = RegionSupport::from_runs(
        wl.support
            .iter()
            .map(|&(label, length)| Run { label, length })
            .collect(),
    );
    support
        .validate(w * h)
        .map_err(|e| invariant(format!("level {index} support: {e}")))?;

    // Per-label area and coordinate sums straight from the runs.
    let mut sums: BTreeMap<Label, (usize, u64, u64)> = BTreeMap::new();
    let mut pos = 0usize;
    for run in support.runs() {
        let e = sums.entry(run.label).or_default();
        e.0 += run.length;
        for i in pos..pos + run.length {
            e.1 += (i % w) as u64;
            e.2 += (i / w) as u64;
        }
        pos += run.length;
    }

    let labels: BTreeSet<Label> = wl.regions.iter().map(|r| r.label).collect();
    if labels.len() != wl.regions.len() || !wl.regions.windows(2).all(|p| p[0].label < p[1].label) {
        return Err(invariant(format!(
            "level {index} regions are not in strictly ascending label order"
        )));
    }
    if labels.iter().ne(sums.keys()) {
        return Err(invariant(format!(
            "level {index}: descriptor labels differ from support labels"
        )));
    }

    let total = (w * h) as f64;
    let mut regions = Vec::with_capacity(wl.regions.len());
    for r in wl.regions {
        let at = |m: &str| invariant(format!("level {index} label {}: {m}", r.label));
        let (count, sx, sy) = sums[&r.label];
        if r.area != count {
            return Err(at(&format!("area {} but support covers {count}", r.area)));
        }
        if r.area_fraction.0 != quantize(count as f64 / total) {
            return Err(at("area_fraction inconsistent with area"));
        }
        let c = count as f64;
        let centroid = (
            quantize((sx as f64 / c + 0.5) / w as f64),
            quantize((sy as f64 / c + 0.5) / h as f64),
        );
        if (r.centroid.0 .0, r.centroid.1 .0) != centroid {
            return Err(at("centroid inconsistent with support"));
        }
        if !(0.0..=255.0).contains(&r.mean_intensity.0) {
            return Err(at("mean_intensity outside [0, 255]"));
        }
        let parent = match (r.parent, is_top) {
            (None, true) => None,
            (Some(p), false) => {
                if !above.is_some_and(|a| a.contains(&p)) {
                    return Err(at(&format!("parent {p} does not exist")));
                }
                Some(RegionId::new(index + 1, p))
            }
            (Some(_), true) => return Err(at("top-level region has a parent")),
            (None, false) => return Err(at("missing parent")),
        };
        let mut relations = Vec::with_capacity(r.relations.len());
        for rel in r.relations {
            let target = RegionId::new(rel.target.0, rel.target.1);
            let ok_target = match rel.kind {
                RelationKind::SubPartOf => Some(target) == parent,
                _ => {
                    target.level == index
                        && target.label != r.label
                        && labels.contains(&target.label)
                }
            };
            if !ok_target {
                return Err(at(&format!("bad {} target {target}", rel.kind.as_str())));
            }
            if !(rel.strength.0 > 0.0 && rel.strength.0 <= 1.0) {
                return Err(at("relation strength outside (0, 1]"));
            }
            relations.push(Relation {
                kind: rel.kind,
                target,
                strength: rel.strength.0,
            });
        }
        if !relations
            .windows(2)
            .all(|p| (p[0].kind, p[0].target) < (p[1].kind, p[1].target))
        {
            return Err(at("relations not in canonical order"));
        }
        regions.push(RegionDescriptor {
            id: RegionId::new(index, r.label),
            area: r.area,
            area_fraction: r.area_fraction.0,
            centroid,
            mean_intensity: r.mean_intensity.0,
            parent,
            relations,
        });
    }
    Ok(LevelDescription {
        level: index,
        width: w,
        height: h,
        regions,
        support,
    })
}
