//! Parameter resolution: flags, then config file, then defaults.

use std::path::{Path, PathBuf};

use infoscribe_core::SegParams;
use serde::Deserialize;

/// Names the config file to use when `--config` is absent.
pub const CONFIG_ENV: &str = "INFOSCRIBE_CONFIG";

/// Everything `extract` accepts, all optional. Config files use the same
/// names as the long flags, with underscores.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub tau_seg: Option<u32>,
    pub tau_refine: Option<u32>,
    pub min_seed: Option<usize>,
    pub max_refine_passes: Option<usize>,
    pub top_max_pixels: Option<usize>,
    pub jobs: Option<usize>,
}

impl Overrides {
    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        Overrides {
            tau_seg: self.tau_seg.or(base.tau_seg),
            tau_refine: self.tau_refine.or(base.tau_refine),
            min_seed: self.min_seed.or(base.min_seed),
            max_refine_passes: self.max_refine_passes.or(base.max_refine_passes),
            top_max_pixels: self.top_max_pixels.or(base.top_max_pixels),
            jobs: self.jobs.or(base.jobs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolved {
    pub params: SegParams,
    pub jobs: usize,
}

pub fn load_file(path: &Path) -> Result<Overrides, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
}

/// `explicit` is the `--config` flag; otherwise the environment is consulted.
pub fn resolve(flags: Overrides, explicit: Option<&Path>) -> Result<Resolved, String> {
    let file = match explicit.map(Path::to_path_buf).or_else(|| {
        std::env::var_os(CONFIG_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    }) {
        Some(path) => load_file(&path)?,
        None => Overrides::default(),
    };
    let o = flags.over(file);
    let d = SegParams::default();
    let params = SegParams {
        tau_seg: o.tau_seg.unwrap_or(d.tau_seg),
        tau_refine: o.tau_refine.unwrap_or(d.tau_refine),
        min_seed: o.min_seed.unwrap_or(d.min_seed),
        max_refine_passes: o.max_refine_passes.unwrap_or(d.max_refine_passes),
        top_max_pixels: o.top_max_pixels.unwrap_or(d.top_max_pixels),
    };
    params.validate().map_err(|e| e.to_string())?;
    let jobs = o.jobs.unwrap_or(1);
    if jobs == 0 {
        return Err("jobs must be at least 1".into());
    }
    Ok(Resolved { params, jobs })
}
