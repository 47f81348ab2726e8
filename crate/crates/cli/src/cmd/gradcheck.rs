use crate::args::GradcheckArgs;
use crate::data;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yearguessr_core::geo::RffParams;
use yearguessr_core::model::{Model, ModelParams, ModelShape};
use yearguessr_core::seed::sub_seed;
use yearguessr_core::train::{finite_difference_check, SampleInput, TrainConfig};
use yearguessr_core::{Error, Real, RealModel, Result};

pub fn run(a: &GradcheckArgs) -> Result<u8> {
    for (name, v) in [
        ("--img-dim", a.img_dim),
        ("--dim", a.dim),
        ("--rff-features", a.rff_features),
        ("--hidden", a.hidden),
        ("--batch", a.batch),
    ] {
        if v == 0 {
            return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
        }
    }
    if !(a.h > 0.0 && a.h.is_finite()) {
        return Err(Error::InvalidConfig("--h must be a positive number".into()));
    }
    if !(a.tolerance > 0.0 && a.tolerance.is_finite()) {
        return Err(Error::InvalidConfig(
            "--tolerance must be a positive number".into(),
        ));
    }
    let (mut model, batch) = synthetic(a)?;
    let cfg = TrainConfig::default();
    let report = finite_difference_check(&mut model, &batch, &cfg, a.h, a.stride)?;
    println!(
        "checked {} parameters: worst relative error {:.3e} at {}[{}]",
        report.checked, report.worst_rel, report.worst_tensor, report.worst_index
    );
    if report.worst_rel > a.tolerance {
        println!("FAIL: exceeds tolerance {:.3e}", a.tolerance);
        return Ok(2);
    }
    println!("OK: within tolerance {:.3e}", a.tolerance);
    Ok(0)
}

/// A randomly initialized model and batch. Years cycle through the periods
/// so every logit matters; the last sample has no GPS to cover the
/// image-only path.
fn synthetic(a: &GradcheckArgs) -> Result<(RealModel, Vec<SampleInput<Real>>)> {
    let (taxonomy, bank) = data::taxonomy_and_bank();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(a.seed, "init"));
    let shape = ModelShape {
        d_img: a.img_dim,
        d: a.dim,
        rff_features: a.rff_features,
        regressor_hidden: a.hidden,
        n_periods: taxonomy.len(),
        n_subcats: bank.total_subcategories(),
    };
    let params = ModelParams::init(&shape, &mut rng)?;
    let rff = RffParams::new(a.rff_features, 1.0, sub_seed(a.seed, "rff"))?;
    let mut draw = |n: usize| -> Vec<Real> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    };
    let styles: Vec<Vec<Real>> = (0..shape.n_periods).map(|_| draw(a.dim)).collect();
    let reasons: Vec<Vec<Real>> = (0..shape.n_subcats).map(|_| draw(a.dim)).collect();
    let model = Model::new(params, rff, styles, reasons, taxonomy, bank)?;
    let batch = (0..a.batch)
        .map(|i| -> Result<SampleInput<Real>> {
            let period = &model.taxonomy.periods()[i % model.taxonomy.len()];
            let year = rng.random_range(period.start..period.end);
            Ok(SampleInput {
                id: format!("synthetic-{i}"),
                image: (0..a.img_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                gps: if i + 1 == a.batch {
                    None
                } else {
                    Some((
                        rng.random_range(-80.0..80.0),
                        rng.random_range(-170.0..170.0),
                    ))
                },
                year: Real::from(year),
                target: model.taxonomy.period_of_year(year)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((model, batch))
}
