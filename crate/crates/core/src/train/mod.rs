//! Training engine: composite loss, exact reverse-mode gradients, and a
//! deterministic loop with per-group learning rates.

pub mod backward;
pub mod loss;
pub mod optim;

pub use backward::{finite_difference_check, forward_batch, GradCheckReport, GradientSet};
pub use loss::LossBreakdown;
pub use optim::{lr_at, optimizer_step, AdamState};

use crate::embed::EmbeddingMatrix;
use crate::error::Error;
use crate::head::regressor_forward;
use crate::model::Model;
use crate::record::{BuildingRecord, StyleTaxonomy};
use crate::scalar::Scalar;
use crate::seed::sub_seed;
use crate::Result;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// All training hyperparameters. Every field has a default; a config file
/// overrides fields by `key = value` lines using exactly these field names.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Learning rate for everything except the adapter.
    pub lr_main: f64,
    /// Learning rate for the adapter.
    pub lr_adapter: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Epoch interval between learning-rate decays.
    pub scheduler_step: usize,
    /// Multiplicative decay applied every `scheduler_step` epochs.
    pub scheduler_gamma: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Contrastive temperature.
    pub tau: f64,
    /// Scale inside the year-distance negative weights.
    pub beta: f64,
    /// Width of the soft target distribution over period midpoints, in years.
    pub sigma_kl: f64,
    pub w_ce: f64,
    pub w_kl: f64,
    pub w_reg: f64,
    pub w_fcrc: f64,
    /// Variance-rectified first steps instead of plain bias correction.
    pub rectify: bool,
    /// Skip updates to the location network (the fusion projection still
    /// trains).
    pub freeze_location: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_main: 1e-4,
            lr_adapter: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            scheduler_step: 60,
            scheduler_gamma: 0.1,
            batch_size: 64,
            epochs: 50,
            tau: 0.07,
            beta: 1.0,
            sigma_kl: 50.0,
            w_ce: 1.0,
            w_kl: 1.0,
            w_reg: 1.0,
            w_fcrc: 1.0,
            rectify: false,
            freeze_location: false,
        }
    }
}

impl TrainConfig {
    /// Parse `key = value` lines over the defaults. Blank lines and `#`
    /// comments are skipped. Unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::InvalidConfig(format!("repeated key `{key}`")));
            }
            let bad = |what: &str| {
                Error::InvalidConfig(format!("line {}: `{key}` is not {what}", lineno + 1))
            };
            macro_rules! num {
                ($field:ident, $ty:ty, $what:expr) => {
                    cfg.$field = value.parse::<$ty>().map_err(|_| bad($what))?
                };
            }
            match key {
                "lr_main" => num!(lr_main, f64, "a number"),
                "lr_adapter" => num!(lr_adapter, f64, "a number"),
                "beta1" => num!(beta1, f64, "a number"),
                "beta2" => num!(beta2, f64, "a number"),
                "scheduler_step" => num!(scheduler_step, usize, "an integer"),
                "scheduler_gamma" => num!(scheduler_gamma, f64, "a number"),
                "batch_size" => num!(batch_size, usize, "an integer"),
                "epochs" => num!(epochs, usize, "an integer"),
                "tau" => num!(tau, f64, "a number"),
                "beta" => num!(beta, f64, "a number"),
                "sigma_kl" => num!(sigma_kl, f64, "a number"),
                "w_ce" => num!(w_ce, f64, "a number"),
                "w_kl" => num!(w_kl, f64, "a number"),
                "w_reg" => num!(w_reg, f64, "a number"),
                "w_fcrc" => num!(w_fcrc, f64, "a number"),
                "rectify" => num!(rectify, bool, "true or false"),
                "freeze_location" => num!(freeze_location, bool, "true or false"),
                _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr_main", self.lr_main),
            ("lr_adapter", self.lr_adapter),
            ("scheduler_gamma", self.scheduler_gamma),
            ("tau", self.tau),
            ("beta", self.beta),
            ("sigma_kl", self.sigma_kl),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1)")));
            }
        }
        for (name, v) in [
            ("w_ce", self.w_ce),
            ("w_kl", self.w_kl),
            ("w_reg", self.w_reg),
            ("w_fcrc", self.w_fcrc),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.scheduler_step == 0 {
            return Err(Error::InvalidConfig("scheduler_step must be >= 1".into()));
        }
        Ok(())
    }

    /// Render in the same `key = value` form [`TrainConfig::parse`] accepts.
    pub fn render(&self) -> String {
        format!(
            "lr_main = {}\nlr_adapter = {}\nbeta1 = {}\nbeta2 = {}\nscheduler_step = {}\n\
             scheduler_gamma = {}\nbatch_size = {}\nepochs = {}\ntau = {}\nbeta = {}\n\
             sigma_kl = {}\nw_ce = {}\nw_kl = {}\nw_reg = {}\nw_fcrc = {}\nrectify = {}\n\
             freeze_location = {}\n",
            self.lr_main,
            self.lr_adapter,
            self.beta1,
            self.beta2,
            self.scheduler_step,
            self.scheduler_gamma,
            self.batch_size,
            self.epochs,
            self.tau,
            self.beta,
            self.sigma_kl,
            self.w_ce,
            self.w_kl,
            self.w_reg,
            self.w_fcrc,
            self.rectify,
            self.freeze_location,
        )
    }
}

/// One training (or validation) example in model-ready form.
#[derive(Debug, Clone)]
pub struct SampleInput<T> {
    pub id: String,
    pub image: Vec<T>,
    pub gps: Option<(T, T)>,
    /// Ground-truth construction year.
    pub year: T,
    /// Ground-truth period index under the taxonomy.
    pub target: usize,
}

/// Join records with their image embeddings and resolve period targets.
pub fn build_samples<T: Scalar>(
    records: &[BuildingRecord],
    images: &EmbeddingMatrix,
    taxonomy: &StyleTaxonomy,
) -> Result<Vec<SampleInput<T>>> {
    records
        .iter()
        .map(|r| {
            let row = images.index_of(&r.id).ok_or_else(|| Error::UnknownId {
                id: r.id.clone(),
                context: "image embedding file".into(),
            })?;
            Ok(SampleInput {
                id: r.id.clone(),
                image: images.row_scalar(row),
                gps: r.gps().map(|(lat, lon)| {
                    (T::from_f64_lossy(lat), T::from_f64_lossy(lon))
                }),
                year: T::from_f64_lossy(f64::from(r.year)),
                target: taxonomy.period_of_year(r.year)?,
            })
        })
        .collect()
}

/// Point estimate for one sample under the current parameters.
pub fn sample_year_hat<T: Scalar>(model: &Model<T>, s: &SampleInput<T>) -> Result<T> {
    let z = model.embed(&s.image, s.gps)?;
    let sims = crate::head::similarity_vector(&z, &model.styles, &model.reasons)?;
    let head = regressor_forward(&model.params.regressor, &sims)?;
    crate::head::predict_year(&head.probs, model.midpoints(), &model.params.regressor.delta)
}

/// Loss components for one epoch. Components are unweighted means over the
/// epoch's samples; `total` applies the configured weights.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub ce: f64,
    pub kl: f64,
    pub reg: f64,
    pub fcrc: f64,
    pub total: f64,
    pub val_mae: Option<f64>,
}

/// Run the optimization loop. Batch order reshuffles every epoch from a
/// single stream seeded off the master seed, so runs are reproducible
/// bit for bit.
pub fn train_loop<T: Scalar>(
    model: &mut Model<T>,
    train: &[SampleInput<T>],
    val: &[SampleInput<T>],
    cfg: &TrainConfig,
    master_seed: u64,
) -> Result<Vec<EpochLog>> {
    cfg.validate()?;
    if cfg.epochs > 0 && train.is_empty() {
        return Err(Error::Empty {
            context: "training set".into(),
        });
    }
    let mut state = AdamState::zeros_like(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(master_seed, "shuffle"));
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut ce, mut kl, mut reg, mut fcrc, mut total) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<SampleInput<T>> =
                chunk.iter().map(|&i| train[i].clone()).collect();
            let fw = forward_batch(model, &batch, cfg)?;
            let t = fw.loss.total.to_f64_lossy();
            if !t.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    detail: format!("total = {t}"),
                });
            }
            let grads = backward::backward(model, &batch, &fw, cfg)?;
            grads.check_finite()?;
            optimizer_step(&mut model.params, &grads, &mut state, cfg, epoch)?;
            let m = batch.len() as f64;
            ce += fw.loss.ce.to_f64_lossy() * m;
            kl += fw.loss.kl.to_f64_lossy() * m;
            reg += fw.loss.reg.to_f64_lossy() * m;
            fcrc += fw.loss.fcrc.to_f64_lossy() * m;
            total += t * m;
        }
        let n = train.len() as f64;
        let val_mae = if val.is_empty() {
            None
        } else {
            let mut acc = 0.0;
            for s in val {
                let y_hat = sample_year_hat(model, s)?.to_f64_lossy();
                acc += (y_hat - s.year.to_f64_lossy()).abs();
            }
            Some(acc / val.len() as f64)
        };
        logs.push(EpochLog {
            epoch,
            ce: ce / n,
            kl: kl / n,
            reg: reg / n,
            fcrc: fcrc / n,
            total: total / n,
            val_mae,
        });
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, ModelParams, ModelShape};
    use crate::record::{ReasonBank, StyleTaxonomy};
    use rand::Rng;

    fn tiny_model(seed: u64) -> Model<f64> {
        let shape = ModelShape {
            d_img: 5,
            d: 6,
            rff_features: 3,
            regressor_hidden: 12,
            n_periods: 7,
            n_subcats: 7,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(&shape, &mut rng).unwrap();
        let anchors = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..7)
                .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        };
        let styles = anchors(&mut rng);
        let reasons = anchors(&mut rng);
        Model::new(
            params,
            crate::geo::RffParams::new(3, 1.0, seed).unwrap(),
            styles,
            reasons,
            StyleTaxonomy::default_seven(),
            ReasonBank::roof_default(),
        )
        .unwrap()
    }

    fn tiny_samples(n: usize, seed: u64) -> Vec<SampleInput<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let taxonomy = StyleTaxonomy::default_seven();
        (0..n)
            .map(|i| {
                let year = rng.random_range(800..2024);
                SampleInput {
                    id: format!("b{i}"),
                    image: (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    gps: if i % 4 == 3 {
                        None
                    } else {
                        Some((rng.random_range(-80.0..80.0), rng.random_range(-170.0..170.0)))
                    },
                    year: f64::from(year),
                    target: taxonomy.period_of_year(year).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn defaults_match_documented_values() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_main, 1e-4);
        assert_eq!(c.lr_adapter, 1e-5);
        assert_eq!(c.beta1, 0.9);
        assert_eq!(c.beta2, 0.999);
        assert_eq!(c.scheduler_step, 60);
        assert_eq!(c.scheduler_gamma, 0.1);
        assert_eq!(c.batch_size, 64);
        assert_eq!(c.epochs, 50);
        assert_eq!(c.tau, 0.07);
        assert_eq!(c.beta, 1.0);
        assert_eq!(c.sigma_kl, 50.0);
        assert_eq!((c.w_ce, c.w_kl, c.w_reg, c.w_fcrc), (1.0, 1.0, 1.0, 1.0));
        assert!(!c.rectify);
        assert!(!c.freeze_location);
    }

    #[test]
    fn config_parses_overrides_and_rejects_junk() {
        let cfg = TrainConfig::parse("epochs = 3\n# comment\n\ntau=0.1\nrectify = true\n").unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.tau, 0.1);
        assert!(cfg.rectify);
        assert_eq!(cfg.lr_main, 1e-4);
        assert!(TrainConfig::parse("nope = 1").is_err());
        assert!(TrainConfig::parse("tau = frog").is_err());
        assert!(TrainConfig::parse("tau = 0.1\ntau = 0.2").is_err());
        assert!(TrainConfig::parse("tau = -1").is_err());
        assert!(TrainConfig::parse("batch_size = 0").is_err());
    }

    #[test]
    fn config_render_round_trips() {
        let mut cfg = TrainConfig::default();
        cfg.epochs = 7;
        cfg.freeze_location = true;
        cfg.tau = 0.05;
        assert_eq!(TrainConfig::parse(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn build_samples_joins_and_flags_missing_ids() {
        use crate::record::{BuildingRecord, Continent};
        let rec = |id: &str, year: i32| BuildingRecord {
            id: id.into(),
            year,
            lat: Some(10.0),
            lon: Some(20.0),
            continent: Continent::Europe,
            pageviews: 5,
            density: None,
            renovation: Default::default(),
            split: None,
        };
        let m = EmbeddingMatrix::new(
            vec!["a".into(), "b".into()],
            2,
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let taxonomy = StyleTaxonomy::default_seven();
        let samples: Vec<SampleInput<f64>> =
            build_samples(&[rec("a", 1200), rec("b", 1960)], &m, &taxonomy).unwrap();
        assert_eq!(samples[0].image, vec![1.0, 2.0]);
        assert_eq!(samples[0].target, 1);
        assert_eq!(samples[1].target, 6);
        assert_eq!(samples[0].gps, Some((10.0, 20.0)));
        let err = build_samples::<f64>(&[rec("zzz", 1200)], &m, &taxonomy);
        assert!(matches!(err, Err(Error::UnknownId { .. })));
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let mut model = tiny_model(1);
        let before = model.params.clone();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let logs = train_loop(&mut model, &tiny_samples(4, 2), &[], &cfg, 99).unwrap();
        assert!(logs.is_empty());
        assert_eq!(model.params, before);
    }

    #[test]
    fn same_seed_reproduces_parameters_bit_for_bit() {
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let samples = tiny_samples(10, 3);
        let run = |seed: u64| {
            let mut model = tiny_model(7);
            train_loop(&mut model, &samples, &samples[..3], &cfg, seed).unwrap();
            model
                .params
                .tensors()
                .into_iter()
                .flat_map(|(_, t)| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
                .collect::<Vec<u64>>()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn loss_moves_downhill_on_a_tiny_fixture() {
        let mut model = tiny_model(5);
        let cfg = TrainConfig {
            epochs: 12,
            batch_size: 8,
            lr_main: 1e-2,
            lr_adapter: 1e-3,
            ..TrainConfig::default()
        };
        let samples = tiny_samples(16, 11);
        let logs = train_loop(&mut model, &samples, &[], &cfg, 1).unwrap();
        assert_eq!(logs.len(), 12);
        assert!(logs.last().unwrap().total < logs[0].total);
        assert!(logs.iter().all(|l| l.val_mae.is_none()));
    }

    #[test]
    fn validation_mae_is_reported_when_requested() {
        let mut model = tiny_model(6);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let samples = tiny_samples(8, 12);
        let logs = train_loop(&mut model, &samples, &samples[..2], &cfg, 1).unwrap();
        let mae = logs[0].val_mae.unwrap();
        assert!(mae.is_finite() && mae > 0.0);
    }
}
