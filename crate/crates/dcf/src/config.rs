//! Run configuration: built-in defaults, then a `key = value` file, then
//! command-line overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use deform_dcf_core::deformation::TransformMode;
use deform_dcf_core::features::FeatureKind;
use deform_dcf_core::tracker::{PartGrid, TrackerConfig};

use crate::assets::{colornames_path, load_colornames};
use crate::error::{Error, Result};

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "parts",
    "lambda_p",
    "transform",
    "scales",
    "scale_step",
    "scale_penalty",
    "features",
    "cell_size",
    "padding",
    "cg_init_iters",
    "cg_init_tol",
    "cg_update_iters",
    "cg_update_tol",
    "bb_max_iters",
    "bb_initial_step",
    "bb_min_step",
    "bb_max_step",
    "bb_backtrack",
    "learning_rate",
    "memory_capacity",
    "sigma_factor",
    "reg_min",
    "reg_edge",
    "part_radius_factor",
    "min_cells",
    "max_cells",
    "cosine_window",
    "colornames_path",
    "features_path",
];

#[derive(Clone, Debug, PartialEq)]
#[derive(Default)]
pub struct RunConfig {
    /// Tracker settings; the Color Names table is attached by [`RunConfig::tracker_config`].
    pub tracker: TrackerConfig,
    /// Color Names table; defaults to the assets directory.
    pub colornames_path: Option<PathBuf>,
    /// `DFF1` file with one feature frame per sequence frame.
    pub features_path: Option<PathBuf>,
}


fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_parts(value: &str) -> Result<PartGrid> {
    match value {
        "auto" => Ok(PartGrid::Auto),
        "root" | "none" => Ok(PartGrid::RootOnly),
        _ => {
            let (c, r) = value.split_once('x').ok_or_else(|| Error::Config(format!("parts: expected auto, root or CxR, got {value:?}")))?;
            Ok(PartGrid::Fixed { cols: num("parts", c)?, rows: num("parts", r)? })
        }
    }
}

fn parse_features(value: &str) -> Result<Vec<FeatureKind>> {
    value
        .split(',')
        .map(|s| match s.trim() {
            "gray" | "grayscale" => Ok(FeatureKind::Grayscale),
            "cn" | "colornames" => Ok(FeatureKind::ColorNames),
            "precomputed" => Ok(FeatureKind::Precomputed),
            other => Err(Error::Config(format!("features: unknown kind {other:?}"))),
        })
        .collect()
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.tracker;
        let value = value.trim();
        match key {
            "parts" => t.parts = parse_parts(value)?,
            "lambda_p" => t.lambda_p = num(key, value)?,
            "transform" => {
                t.transform = match value {
                    "affine" => TransformMode::Affine,
                    "identity" => TransformMode::Identity,
                    _ => return Err(Error::Config(format!("transform: expected affine or identity, got {value:?}"))),
                }
            }
            "scales" => t.scales = num(key, value)?,
            "scale_step" => t.scale_step = num(key, value)?,
            "scale_penalty" => t.scale_penalty = num(key, value)?,
            "features" => t.features.kinds = parse_features(value)?,
            "cell_size" => t.features.cell_size = num(key, value)?,
            "padding" => t.features.padding = num(key, value)?,
            "cg_init_iters" => t.cg_init.max_iter = num(key, value)?,
            "cg_init_tol" => t.cg_init.tol = num(key, value)?,
            "cg_update_iters" => t.cg_update.max_iter = num(key, value)?,
            "cg_update_tol" => t.cg_update.tol = num(key, value)?,
            "bb_max_iters" => t.bb.max_iters = num(key, value)?,
            "bb_initial_step" => t.bb.initial_step = num(key, value)?,
            "bb_min_step" => t.bb.min_step = num(key, value)?,
            "bb_max_step" => t.bb.max_step = num(key, value)?,
            "bb_backtrack" => t.bb.backtrack = num(key, value)?,
            "learning_rate" => t.learning_rate = num(key, value)?,
            "memory_capacity" => t.memory_capacity = num(key, value)?,
            "sigma_factor" => t.sigma_factor = num(key, value)?,
            "reg_min" => t.reg_min = num(key, value)?,
            "reg_edge" => t.reg_edge = num(key, value)?,
            "part_radius_factor" => t.part_radius_factor = num(key, value)?,
            "min_cells" => t.min_cells = num(key, value)?,
            "max_cells" => t.max_cells = num(key, value)?,
            "cosine_window" => t.cosine_window = num(key, value)?,
            "colornames_path" => self.colornames_path = Some(value.into()),
            "features_path" => self.features_path = Some(value.into()),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        self.apply_text(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Defaults, then `file`, then `overrides` (`key=value`), later layers
    /// winning.
    pub fn layered(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    /// Validated tracker settings with the Color Names table loaded when the
    /// feature set uses it.
    pub fn tracker_config(&self) -> Result<TrackerConfig> {
        let mut t = self.tracker.clone();
        if t.features.kinds.contains(&FeatureKind::ColorNames) {
            let path = colornames_path(self.colornames_path.as_deref());
            t.colornames = Some(Arc::new(load_colornames(path)?));
        }
        if t.features.kinds.contains(&FeatureKind::Precomputed) && self.features_path.is_none() {
            return Err(Error::Config("precomputed features need features_path".into()));
        }
        t.validate()?;
        Ok(t)
    }
}
