use crate::args::TrainArgs;
use crate::{data, io};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use yearguessr_core::embed::read_embeddings;
use yearguessr_core::geo::RffParams;
use yearguessr_core::model::{save_params, CheckpointMeta, Model, ModelParams, ModelShape};
use yearguessr_core::record::{validate_manifest, BuildingRecord, Split, YearRange};
use yearguessr_core::seed::sub_seed;
use yearguessr_core::train::{build_samples, train_loop, EpochLog, TrainConfig};
use yearguessr_core::{Error, Real, Result};

pub fn run(a: &TrainArgs) -> Result<()> {
    let records = data::load_records(&a.manifest, None)?;
    let report = validate_manifest(&records, YearRange::default());
    if !report.is_ok() {
        eprint!("{report}");
        return Err(Error::InvalidConfig(format!(
            "manifest failed validation with {} issue(s)",
            report.issues.len()
        )));
    }
    let cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io::io_err(path, e))?;
            TrainConfig::parse(&text)?
        }
        None => TrainConfig::default(),
    };
    cfg.validate()?;

    let (taxonomy, bank) = data::taxonomy_and_bank();
    let images = read_embeddings(&a.images)?;
    let (styles, reasons) = data::load_anchors(&a.styles, &a.reasons, &taxonomy, &bank)?;
    let d = styles[0].len();
    let shape = ModelShape {
        d_img: images.dim(),
        d,
        rff_features: a.rff_features,
        regressor_hidden: a.hidden,
        n_periods: taxonomy.len(),
        n_subcats: bank.total_subcategories(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(a.seed, "init"));
    let params = ModelParams::init(&shape, &mut rng)?;
    let rff = RffParams::new(a.rff_features, a.rff_sigma, sub_seed(a.seed, "rff"))?;
    let mut model = Model::new(params, rff, styles, reasons, taxonomy, bank)?;

    // A labeled manifest trains on Train and tracks Val MAE. An unlabeled
    // one trains on everything.
    let labeled = records.iter().any(|r| r.split.is_some());
    let (train_recs, val_recs): (Vec<BuildingRecord>, Vec<BuildingRecord>) = if labeled {
        (
            records
                .iter()
                .filter(|r| r.split == Some(Split::Train))
                .cloned()
                .collect(),
            records
                .iter()
                .filter(|r| r.split == Some(Split::Val))
                .cloned()
                .collect(),
        )
    } else {
        (records, Vec::new())
    };
    let train_set = build_samples::<Real>(&train_recs, &images, &model.taxonomy)?;
    let val_set = build_samples::<Real>(&val_recs, &images, &model.taxonomy)?;

    print!("{}", cfg.render());
    println!("seed = {}", a.seed);
    println!(
        "training on {} samples, validating on {}",
        train_set.len(),
        val_set.len()
    );

    let logs = train_loop(&mut model, &train_set, &val_set, &cfg, a.seed)?;

    let meta = CheckpointMeta::describe(a.seed, &model.taxonomy, &model.bank);
    io::write_atomic_with(&a.out, |tmp| save_params(tmp, &model.params, &model.rff, &meta))?;
    if let Some(path) = &a.loss_log {
        io::write_atomic(path, &loss_log_bytes(a.seed, &logs)?)?;
    }
    if let Some(last) = logs.last() {
        match last.val_mae {
            Some(v) => println!(
                "epoch {}: total loss {:.6}, val mae {:.3}",
                last.epoch, last.total, v
            ),
            None => println!("epoch {}: total loss {:.6}", last.epoch, last.total),
        }
    }
    println!("wrote checkpoint to {}", a.out.display());
    Ok(())
}

/// First line records the seed, then one JSON object per epoch.
fn loss_log_bytes(seed: u64, logs: &[EpochLog]) -> Result<Vec<u8>> {
    let mut out = format!("{{\"seed\":{seed}}}\n").into_bytes();
    for log in logs {
        let line = serde_json::to_string(log)
            .map_err(|e| Error::InvalidConfig(format!("loss log serialization: {e}")))?;
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    Ok(out)
}
