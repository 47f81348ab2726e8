//! Loading and assembly shared between subcommands.

use crate::args::SplitArg;
use std::path::Path;
use yearguessr_core::embed::read_embeddings;
use yearguessr_core::model::{load_params, reason_rows, style_rows, CheckpointMeta, Model};
use yearguessr_core::record::{read_manifest, BuildingRecord, ReasonBank, Split, StyleTaxonomy};
use yearguessr_core::{Error, Real, RealModel, Result};

/// Manifest records, optionally restricted to one split label.
pub fn load_records(path: &Path, split: Option<SplitArg>) -> Result<Vec<BuildingRecord>> {
    let records = read_manifest(path)?;
    let Some(want) = split else {
        return Ok(records);
    };
    let want: Split = want.into();
    let kept: Vec<BuildingRecord> = records
        .into_iter()
        .filter(|r| r.split == Some(want))
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty {
            context: format!("no records labeled {want} in {}", path.display()),
        });
    }
    Ok(kept)
}

/// The frozen taxonomy and reason bank every command shares.
pub fn taxonomy_and_bank() -> (StyleTaxonomy, ReasonBank) {
    (StyleTaxonomy::default_seven(), ReasonBank::roof_default())
}

/// Anchor rows resolved against taxonomy and bank order.
pub fn load_anchors(
    styles: &Path,
    reasons: &Path,
    taxonomy: &StyleTaxonomy,
    bank: &ReasonBank,
) -> Result<(Vec<Vec<Real>>, Vec<Vec<Real>>)> {
    let style_m = read_embeddings(styles)?;
    let reason_m = read_embeddings(reasons)?;
    Ok((style_rows(&style_m, taxonomy)?, reason_rows(&reason_m, bank)?))
}

/// Rebuild a model from a checkpoint plus anchor files.
pub fn load_model(
    checkpoint: &Path,
    styles: &Path,
    reasons: &Path,
) -> Result<(RealModel, CheckpointMeta)> {
    let (params, rff, meta) = load_params::<Real>(checkpoint)?;
    let (taxonomy, bank) = taxonomy_and_bank();
    meta.validate(&taxonomy, &bank)?;
    let (style_anchors, reason_anchors) = load_anchors(styles, reasons, &taxonomy, &bank)?;
    let model = Model::new(params, rff, style_anchors, reason_anchors, taxonomy, bank)?;
    Ok((model, meta))
}
