//! Contract suite for the library's behavioral guarantees, one test per
//! criterion. Every numeric claim is checked against an independently
//! coded oracle or a hand-computed fixture, never against the code under
//! test. Each test prints a `PASS` line (visible with `--nocapture`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeMap;
use std::time::Instant;
use yearguessr_core::embed::{read_embeddings, write_embeddings, EmbeddingMatrix};
use yearguessr_core::error::Error;
use yearguessr_core::eval::{evaluate, stratified_split, EvalReport, Metrics, PredictedYear};
use yearguessr_core::geo::RffParams;
use yearguessr_core::head::predict_year;
use yearguessr_core::model::{Model, ModelParams, ModelShape};
use yearguessr_core::record::{
    BuildingRecord, Continent, ReasonBank, Renovation, Split, StyleTaxonomy,
};
use yearguessr_core::seed::sub_seed;
use yearguessr_core::train::loss::{fcrc_loss, lambda_weights};
use yearguessr_core::train::{
    finite_difference_check, lr_at, optimizer_step, train_loop, AdamState, GradientSet,
    SampleInput, TrainConfig,
};
use yearguessr_core::Real;

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_anchors(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<Real>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Freshly initialized model with random nonzero anchors. The fusion
/// projection starts at exact zeros, as in any real training run.
fn synthetic_model(shape: &ModelShape, seed: u64) -> Model<Real> {
    let mut rng = seeded(seed);
    let params = ModelParams::init(shape, &mut rng).unwrap();
    let styles = random_anchors(&mut rng, shape.n_periods, shape.d);
    let reasons = random_anchors(&mut rng, shape.n_subcats, shape.d);
    Model::new(
        params,
        RffParams::new(shape.rff_features, 1.0, seed ^ 0x5eed).unwrap(),
        styles,
        reasons,
        StyleTaxonomy::default_seven(),
        ReasonBank::roof_default(),
    )
    .unwrap()
}

#[test]
fn a01_gradient_fidelity() {
    let shape = ModelShape {
        d_img: 10,
        d: 8,
        rff_features: 4,
        regressor_hidden: 16,
        n_periods: 7,
        n_subcats: 7,
    };
    let mut model = synthetic_model(&shape, 11);
    let taxonomy = model.taxonomy.clone();
    let mut rng = seeded(12);
    // Four samples across distinct periods, one without GPS, so every loss
    // component and both embedding paths carry gradient.
    let batch: Vec<SampleInput<Real>> = (0..4)
        .map(|i| {
            let p = &taxonomy.periods()[i * 2];
            let year = rng.random_range(p.start..p.end);
            SampleInput {
                id: format!("g{i}"),
                image: (0..shape.d_img).map(|_| rng.random_range(-1.0..1.0)).collect(),
                gps: if i == 3 {
                    None
                } else {
                    Some((rng.random_range(-80.0..80.0), rng.random_range(-170.0..170.0)))
                },
                year: f64::from(year),
                target: taxonomy.period_of_year(year).unwrap(),
            }
        })
        .collect();
    let cfg = TrainConfig::default();
    assert_eq!([cfg.w_ce, cfg.w_kl, cfg.w_reg, cfg.w_fcrc], [1.0; 4]);
    let start = Instant::now();
    let report = finite_difference_check(&mut model, &batch, &cfg, 1e-5, 1).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(report.checked, model.params.param_count());
    assert!(
        report.worst_rel < 1e-4,
        "worst rel err {:.3e} at {}[{}]",
        report.worst_rel,
        report.worst_tensor,
        report.worst_index
    );
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "A1 gradient fidelity: PASS ({} params, worst rel err {:.3e}, {:.2}s)",
        report.checked,
        report.worst_rel,
        elapsed.as_secs_f64()
    );
}

#[test]
fn a02_location_neutral_at_init() {
    let shape = ModelShape {
        d_img: 12,
        d: 8,
        rff_features: 6,
        regressor_hidden: 16,
        n_periods: 7,
        n_subcats: 7,
    };
    let model = synthetic_model(&shape, 21);
    let mut rng = seeded(22);
    let bits = |v: &[Real]| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
    for i in 0..100 {
        let image: Vec<Real> = (0..shape.d_img).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gps = match i {
            0 => (90.0, 180.0),
            1 => (-90.0, -180.0),
            2 => (0.0, 0.0),
            _ => (rng.random_range(-90.0..90.0), rng.random_range(-180.0..180.0)),
        };
        let with = model.predict(&image, Some(gps)).unwrap();
        let without = model.predict(&image, None).unwrap();
        assert_eq!(with.year_hat.to_bits(), without.year_hat.to_bits(), "record {i}");
        assert_eq!(with.coarse, without.coarse, "record {i}");
        assert_eq!(bits(&with.probs), bits(&without.probs), "record {i}");
        assert_eq!(bits(&with.style_sims), bits(&without.style_sims), "record {i}");
        assert_eq!(bits(&with.reason_sims), bits(&without.reason_sims), "record {i}");
    }
    println!("A2 location neutrality at init: PASS (100 records bitwise identical)");
}

/// Distance-proportional negative weights, written without looking at the
/// library: zero at the anchor, uniform fallback when every label matches.
fn oracle_lambda(years: &[f64], anchor: usize, beta: f64) -> Vec<f64> {
    let m = years.len();
    let mut row = vec![0.0; m];
    if m < 2 {
        return row;
    }
    let mut tot = 0.0;
    for (j, y) in years.iter().enumerate() {
        if j != anchor {
            tot += beta * (y - years[anchor]).abs();
        }
    }
    for (j, slot) in row.iter_mut().enumerate() {
        if j == anchor {
            continue;
        }
        *slot = if tot == 0.0 {
            1.0 / (m as f64 - 1.0)
        } else {
            beta * (years[j] - years[anchor]).abs() / tot
        };
    }
    row
}

/// Plain double-loop batch loss with unshifted exponentials.
fn oracle_fcrc(cos: &[Vec<f64>], years: &[f64], tau: f64, beta: f64) -> f64 {
    let m = years.len();
    let mut acc = 0.0;
    for i in 0..m {
        if m < 2 {
            continue;
        }
        let lam = oracle_lambda(years, i, beta);
        let f_ii = (cos[i][i] / tau).exp();
        let mut denom = f_ii;
        for j in 0..m {
            if j != i {
                denom += lam[j] * ((cos[i][j] / tau).exp());
            }
        }
        acc += -(f_ii / denom).ln();
    }
    acc / m as f64
}

#[test]
fn a03_contrastive_loss_oracle() {
    let mut rng = seeded(31);
    let (tau, beta) = (0.07, 1.0);
    for case in 0..200 {
        let m = rng.random_range(1..=8usize);
        let years: Vec<f64> = (0..m).map(|_| f64::from(rng.random_range(800..=2024))).collect();
        let cos: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let lib = fcrc_loss(&cos, &years, tau, beta).unwrap();
        let want = oracle_fcrc(&cos, &years, tau, beta);
        assert!(
            (lib - want).abs() < 1e-12,
            "case {case} m={m}: {lib} vs {want}"
        );
        if m == 1 {
            assert_eq!(lib, 0.0, "case {case}");
        }
        for i in 0..m {
            let lam = lambda_weights(&years, i, beta).unwrap();
            assert_eq!(lam[i], 0.0, "case {case} anchor {i}");
            if m >= 2 {
                let mut sum = 0.0;
                for w in &lam {
                    sum += w;
                }
                assert!((sum - 1.0).abs() < 1e-12, "case {case} anchor {i}: {sum}");
                let mine = oracle_lambda(&years, i, beta);
                for j in 0..m {
                    assert!((lam[j] - mine[j]).abs() < 1e-12, "case {case} [{i}][{j}]");
                }
            }
        }
    }
    // All labels equal: every row falls back to uniform weight over the rest.
    let flat = vec![1900.0; 5];
    for i in 0..5 {
        let lam = lambda_weights(&flat, i, beta).unwrap();
        for (j, w) in lam.iter().enumerate() {
            if j == i {
                assert_eq!(*w, 0.0);
            } else {
                assert_eq!(*w, 0.25);
            }
        }
    }
    // Two samples with the same label score their shared anchor equally, so
    // each term is -ln(1/2) and the batch mean is exactly ln 2.
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let pair = vec![1500.0, 1500.0];
        let c0 = rng.random_range(-1.0..1.0);
        let c1 = rng.random_range(-1.0..1.0);
        let cos = vec![vec![c0, c0], vec![c1, c1]];
        let lib = fcrc_loss(&cos, &pair, tau, beta).unwrap();
        worst = worst.max((lib - std::f64::consts::LN_2).abs());
    }
    assert!(worst < 1e-12, "worst ln2 deviation {worst:.3e}");
    println!("A3 contrastive loss oracle: PASS (200 batches within 1e-12, ln 2 fixture holds)");
}

#[test]
fn a04_year_readout_range() {
    let taxonomy = StyleTaxonomy::default_seven();
    let mids = taxonomy.midpoints();
    assert_eq!(mids, [975.0, 1275.0, 1500.0, 1675.0, 1800.0, 1900.0, 1987.0]);
    let delta = vec![0.0; 7];
    let mut rng = seeded(41);
    for _ in 0..1000 {
        let raw: Vec<f64> = (0..7).map(|_| rng.random_range(1e-6..1.0)).collect();
        let mut tot = 0.0;
        for x in &raw {
            tot += x;
        }
        let probs: Vec<f64> = raw.iter().map(|x| x / tot).collect();
        let y = predict_year(&probs, &mids, &delta).unwrap();
        assert!((975.0..=1987.0).contains(&y), "readout {y}");
    }
    for k in 0..7 {
        let mut one_hot = vec![0.0; 7];
        one_hot[k] = 1.0;
        assert_eq!(predict_year(&one_hot, &mids, &delta).unwrap(), mids[k]);
    }
    println!("A4 year readout range: PASS (1000 simplices inside [975, 1987], one-hot exact)");
}

struct OracleRow {
    id: String,
    year: i32,
    year_hat: f64,
    gt_p: usize,
    pred_p: usize,
    abin: usize,
    pbin: usize,
    dens: Option<usize>,
    renov: Renovation,
}

const PERIOD_NAMES: [&str; 7] = [
    "Roman",
    "Gothic",
    "Renaissance",
    "Baroque",
    "Neoclassical",
    "Modern",
    "Contemporary",
];

fn oracle_style_period(year: i32) -> usize {
    if year >= 1950 {
        6
    } else if year >= 1850 {
        5
    } else if year >= 1750 {
        4
    } else if year >= 1600 {
        3
    } else if year >= 1400 {
        2
    } else if year >= 1150 {
        1
    } else {
        0
    }
}

fn oracle_analysis_bin(year: i32) -> usize {
    if year < 1150 {
        0
    } else if year < 1400 {
        1
    } else if year < 1600 {
        2
    } else if year < 1800 {
        3
    } else if year < 1900 {
        4
    } else if year < 1950 {
        5
    } else {
        6
    }
}

fn oracle_pop_bin(views: u64) -> usize {
    if views < 100 {
        0
    } else if views < 1_000 {
        1
    } else if views < 10_000 {
        2
    } else if views < 100_000 {
        3
    } else {
        4
    }
}

fn oracle_density(d: f64) -> usize {
    if d < 300.0 {
        0
    } else if d <= 1500.0 {
        1
    } else {
        2
    }
}

fn oracle_metrics(rows: &[&OracleRow]) -> Metrics {
    let n = rows.len();
    if n == 0 {
        return Metrics {
            n: 0,
            mae: None,
            ia5: None,
            ia20: None,
            ia50: None,
            ia100: None,
            cls_acc: None,
        };
    }
    let mut acc = 0.0;
    for r in rows {
        acc += (f64::from(r.year) - r.year_hat).abs();
    }
    let ia = |k: f64| {
        let hits = rows
            .iter()
            .filter(|r| (f64::from(r.year) - r.year_hat).abs() <= k)
            .count();
        100.0 * hits as f64 / n as f64
    };
    let cls_hits = rows.iter().filter(|r| r.gt_p == r.pred_p).count();
    Metrics {
        n,
        mae: Some(acc / n as f64),
        ia5: Some(ia(5.0)),
        ia20: Some(ia(20.0)),
        ia50: Some(ia(50.0)),
        ia100: Some(ia(100.0)),
        cls_acc: Some(100.0 * cls_hits as f64 / n as f64),
    }
}

fn filtered(rows: &[OracleRow], keep: impl Fn(&OracleRow) -> bool) -> Vec<&OracleRow> {
    rows.iter().filter(|r| keep(r)).collect()
}

/// Brute-force recomputation of the whole report: own bin rules, own group
/// filters, sequential means over id-sorted rows.
fn oracle_report(records: &[BuildingRecord], preds: &[PredictedYear], seed: u64) -> EvalReport {
    let mut rows: Vec<OracleRow> = records
        .iter()
        .map(|rec| {
            let p = preds.iter().find(|p| p.id == rec.id).unwrap();
            let pred_p = match &p.coarse_period {
                Some(name) => PERIOD_NAMES.iter().position(|n| *n == name.as_str()).unwrap(),
                None => oracle_style_period(p.year_hat.round().clamp(800.0, 2024.0) as i32),
            };
            OracleRow {
                id: rec.id.clone(),
                year: rec.year,
                year_hat: p.year_hat,
                gt_p: oracle_style_period(rec.year),
                pred_p,
                abin: oracle_analysis_bin(rec.year),
                pbin: oracle_pop_bin(rec.pageviews),
                dens: rec.density.map(oracle_density),
                renov: rec.renovation,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    let overall = oracle_metrics(&filtered(&rows, |_| true));
    let by_popularity: Vec<Metrics> = (0..5)
        .map(|b| oracle_metrics(&filtered(&rows, |r| r.pbin == b)))
        .collect();
    let popularity_gain = match (&by_popularity[4].ia5, &by_popularity[0].ia5) {
        (Some(most), Some(least)) => Some(most - least),
        _ => None,
    };
    let by_period: Vec<Metrics> = (0..7)
        .map(|b| oracle_metrics(&filtered(&rows, |r| r.abin == b)))
        .collect();
    let mut by_density = BTreeMap::new();
    for (k, name) in ["rural", "semi_urban", "urban"].iter().enumerate() {
        by_density.insert(
            name.to_string(),
            oracle_metrics(&filtered(&rows, |r| r.dens == Some(k))),
        );
    }
    let mut by_renovation = BTreeMap::new();
    for (name, status) in [
        ("never", Renovation::Never),
        ("renovated", Renovation::Renovated),
        ("rebuilt", Renovation::Rebuilt),
    ] {
        by_renovation.insert(
            name.to_string(),
            oracle_metrics(&filtered(&rows, |r| r.renov == status)),
        );
    }
    EvalReport {
        seed,
        overall,
        by_popularity,
        popularity_gain,
        by_period,
        by_density,
        by_renovation,
        excluded_renovation_unknown: rows.iter().filter(|r| r.renov == Renovation::Unknown).count(),
        excluded_density_missing: rows.iter().filter(|r| r.dens.is_none()).count(),
    }
}

#[test]
fn a05_metric_oracle() {
    let taxonomy = StyleTaxonomy::default_seven();
    let names: Vec<String> = taxonomy.periods().iter().map(|p| p.name.clone()).collect();
    let mut rng = seeded(51);
    // Boundary values every bin rule must get right.
    let forced_years = [
        1000, 1149, 1150, 1399, 1400, 1599, 1600, 1749, 1750, 1799, 1800, 1849, 1850, 1899,
        1900, 1949, 1950, 2023, 2024,
    ];
    let forced_views: [u64; 10] =
        [0, 99, 100, 999, 1_000, 9_999, 10_000, 99_999, 100_000, 12_345_678];
    let forced_density = [299.9999, 300.0, 1500.0, 1500.0001];
    let forced_offsets = [0.0, 5.0, -5.0, 20.0, -20.0, 50.0, -50.0, 100.0, -100.0];
    let mut records = Vec::with_capacity(1000);
    let mut preds = Vec::with_capacity(1000);
    for i in 0..1000usize {
        let id = format!("{:02x}-{i:04}", rng.random_range(0..256u32) as u8);
        let year = if i < forced_years.len() {
            forced_years[i]
        } else {
            rng.random_range(1000..=2024)
        };
        let pageviews = if i % 11 == 0 {
            forced_views[(i / 11) % forced_views.len()]
        } else {
            10f64.powf(rng.random_range(0.0..6.2)) as u64
        };
        let density = if i % 7 == 3 {
            None
        } else if i % 13 == 5 {
            Some(forced_density[(i / 13) % forced_density.len()])
        } else {
            Some(rng.random_range(0.0..4000.0))
        };
        records.push(BuildingRecord {
            id: id.clone(),
            year,
            lat: None,
            lon: None,
            continent: Continent::ALL[i % 5],
            pageviews,
            density,
            renovation: [
                Renovation::Never,
                Renovation::Renovated,
                Renovation::Rebuilt,
                Renovation::Unknown,
            ][i % 4],
            split: None,
        });
        let year_hat = if i % 97 == 0 {
            // Far outside the taxonomy: exercises snapping when the coarse
            // period has to be derived from the year estimate.
            if i % 194 == 0 {
                250.0
            } else {
                2800.0
            }
        } else if i % 5 == 2 {
            f64::from(year) + forced_offsets[(i / 5) % forced_offsets.len()]
        } else {
            f64::from(year) + rng.random_range(-150.0..150.0)
        };
        let coarse_period = if i % 3 == 0 {
            Some(names[rng.random_range(0..7usize)].clone())
        } else {
            None
        };
        preds.push(PredictedYear { id, year_hat, coarse_period });
    }
    let report = evaluate(&records, &preds, &taxonomy, 99).unwrap();
    let expected = oracle_report(&records, &preds, 99);
    assert_eq!(report, expected);
    println!("A5 metric oracle: PASS (1000 records, every report cell equal to brute force)");
}

#[test]
fn a06_popularity_gain_fixture() {
    // Hit rates engineered per bin: 2423/10000 rarely viewed, 5841/10000
    // heavily viewed, both on the same ground truth year.
    let mut records = Vec::with_capacity(20_000);
    let mut preds = Vec::with_capacity(20_000);
    for (prefix, views, hits) in [("cold", 50u64, 2423usize), ("hot", 500_000, 5841)] {
        for i in 0..10_000usize {
            let id = format!("{prefix}{i:05}");
            records.push(BuildingRecord {
                id: id.clone(),
                year: 1500,
                lat: None,
                lon: None,
                continent: Continent::Europe,
                pageviews: views,
                density: None,
                renovation: Renovation::Unknown,
                split: None,
            });
            preds.push(PredictedYear {
                id,
                year_hat: if i < hits { 1500.0 } else { 1700.0 },
                coarse_period: None,
            });
        }
    }
    let report = evaluate(&records, &preds, &StyleTaxonomy::default_seven(), 0).unwrap();
    let least = report.by_popularity[0].ia5.unwrap();
    let most = report.by_popularity[4].ia5.unwrap();
    assert!((least - 24.23).abs() < 1e-9, "least popular ia5 {least}");
    assert!((most - 58.41).abs() < 1e-9, "most popular ia5 {most}");
    let gain = report.popularity_gain.unwrap();
    assert!((gain - 34.18).abs() <= 0.02, "gain {gain}");
    println!("A6 popularity gain fixture: PASS (gain {gain:.4})");
}

/// Separable toy set: anchors are coordinate axes, each image is its target
/// style axis plus small noise, labels sit exactly on period midpoints.
fn overfit_fixture(seed: u64) -> (Model<Real>, Vec<SampleInput<Real>>) {
    let d = 16;
    let shape = ModelShape {
        d_img: d,
        d,
        rff_features: 4,
        regressor_hidden: 8192,
        n_periods: 7,
        n_subcats: 7,
    };
    let mut init_rng = seeded(sub_seed(seed, "init"));
    let params = ModelParams::init(&shape, &mut init_rng).unwrap();
    let basis = |k: usize| {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        v
    };
    let styles: Vec<Vec<Real>> = (0..7).map(basis).collect();
    let reasons: Vec<Vec<Real>> = (0..7).map(|j| basis(8 + j)).collect();
    let model = Model::new(
        params,
        RffParams::new(4, 1.0, sub_seed(seed, "rff")).unwrap(),
        styles,
        reasons,
        StyleTaxonomy::default_seven(),
        ReasonBank::roof_default(),
    )
    .unwrap();
    let mids = [975.0, 1275.0, 1500.0, 1675.0, 1800.0, 1900.0, 1987.0];
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut data_rng = seeded(sub_seed(seed, "noise"));
    let samples: Vec<SampleInput<Real>> = (0..200)
        .map(|i| {
            let k = i % 7;
            let mut image: Vec<Real> = (0..d).map(|_| noise.sample(&mut data_rng)).collect();
            image[k] += 1.0;
            SampleInput {
                id: format!("b{i:03}"),
                image,
                gps: None,
                year: mids[k],
                target: k,
            }
        })
        .collect();
    (model, samples)
}

#[test]
fn a07_overfit_sanity() {
    let cfg = TrainConfig {
        epochs: 200,
        ..TrainConfig::default()
    };
    let run = |seed: u64| {
        let (mut model, samples) = overfit_fixture(seed);
        let start = Instant::now();
        let logs = train_loop(&mut model, &samples, &[], &cfg, seed).unwrap();
        (model, samples, logs, start.elapsed())
    };
    let (model, samples, logs, elapsed) = run(7);
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    assert_eq!(logs.len(), 200);
    for l in &logs {
        assert!(
            l.ce.is_finite()
                && l.kl.is_finite()
                && l.reg.is_finite()
                && l.fcrc.is_finite()
                && l.total.is_finite(),
            "epoch {} has a non-finite component",
            l.epoch
        );
    }
    let mut hits = 0usize;
    let mut abs_err = 0.0;
    for s in &samples {
        let p = model.predict(&s.image, None).unwrap();
        if p.coarse == s.target {
            hits += 1;
        }
        abs_err += (p.year_hat - s.year).abs();
    }
    let acc = hits as f64 / samples.len() as f64;
    let mae = abs_err / samples.len() as f64;
    assert!(acc >= 0.95, "train coarse accuracy {acc}");
    assert!(mae <= 40.0, "train mae {mae}");
    // Same seed, bitwise identical run.
    let (model2, _, logs2, elapsed2) = run(7);
    assert!(elapsed2.as_secs_f64() < 60.0, "took {elapsed2:?}");
    assert_eq!(logs, logs2);
    let a = model.params.tensors();
    let b = model2.params.tensors();
    assert_eq!(a.len(), b.len());
    for ((name, ta), (_, tb)) in a.iter().zip(b.iter()) {
        for (x, y) in ta.iter().zip(tb.iter()) {
            assert_eq!(x.to_bits(), y.to_bits(), "{name} differs between runs");
        }
    }
    println!(
        "A7 overfit sanity: PASS (coarse acc {:.1}%, mae {:.1}, {:.1}s, deterministic)",
        100.0 * acc,
        mae,
        elapsed.as_secs_f64()
    );
}

#[test]
fn a08_split_properties() {
    let mut rng = seeded(81);
    let decades = [1500, 1510, 1520, 1530, 1540, 1550];
    let records: Vec<BuildingRecord> = (0..2000usize)
        .map(|i| {
            let dec = decades[rng.random_range(0..decades.len())];
            BuildingRecord {
                id: format!("s{i:04}"),
                year: dec + rng.random_range(0..10),
                lat: None,
                lon: None,
                continent: Continent::ALL[rng.random_range(0..Continent::ALL.len())],
                pageviews: 100,
                density: None,
                renovation: Renovation::Unknown,
                split: None,
            }
        })
        .collect();
    let assign = stratified_split(&records, 17).unwrap();
    // One label per record: assignments are disjoint and exhaustive by shape.
    assert_eq!(assign.len(), records.len());
    let mut strata: BTreeMap<(i32, &str), [usize; 3]> = BTreeMap::new();
    for (rec, s) in records.iter().zip(&assign) {
        let cell = strata
            .entry((rec.year / 10 * 10, rec.continent.name()))
            .or_insert([0; 3]);
        match s {
            Split::Train => cell[0] += 1,
            Split::Val => cell[1] += 1,
            Split::Test => cell[2] += 1,
        }
    }
    assert_eq!(strata.len(), 30);
    for ((dec, cont), c) in &strata {
        let n = (c[0] + c[1] + c[2]) as f64;
        assert!((c[0] as f64 - 0.6 * n).abs() <= 1.0, "{dec}/{cont} train {c:?}");
        assert!((c[1] as f64 - 0.2 * n).abs() <= 1.0, "{dec}/{cont} val {c:?}");
        assert!((c[2] as f64 - 0.2 * n).abs() <= 1.0, "{dec}/{cont} test {c:?}");
    }
    let again = stratified_split(&records, 17).unwrap();
    assert_eq!(
        serde_json::to_vec(&assign).unwrap(),
        serde_json::to_vec(&again).unwrap()
    );
    let other = stratified_split(&records, 18).unwrap();
    assert_ne!(assign, other);
    println!("A8 split properties: PASS (30 strata within +/-1 of 60/20/20, seed-stable)");
}

#[test]
fn a09_embedding_io_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded(91);
    for case in 0..100 {
        let n = rng.random_range(1..=12usize);
        let dim = rng.random_range(1..=24usize);
        let ids: Vec<String> = (0..n).map(|i| format!("e{case:02}-{i}")).collect();
        let data: Vec<f32> = (0..n * dim).map(|_| rng.random_range(-8.0f32..8.0)).collect();
        let m = EmbeddingMatrix::new(ids, dim, data).unwrap();
        let path = dir.path().join(format!("m{case}.ygem"));
        write_embeddings(&path, &m).unwrap();
        let back = read_embeddings(&path).unwrap();
        assert_eq!(back.ids(), m.ids());
        assert_eq!(back.dim(), m.dim());
        for i in 0..back.len() {
            let got: Vec<u32> = back.row(i).iter().map(|v| v.to_bits()).collect();
            let want: Vec<u32> = m.row(i).iter().map(|v| v.to_bits()).collect();
            assert_eq!(got, want, "case {case} row {i}");
        }
    }
    let victim = dir.path().join("victim.ygem");
    let m = EmbeddingMatrix::new(
        vec!["a".into(), "b".into()],
        3,
        vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
    )
    .unwrap();
    write_embeddings(&victim, &m).unwrap();
    let original = std::fs::read(&victim).unwrap();
    let mut corrupted = original.clone();
    corrupted[..4].copy_from_slice(b"XXXX");
    std::fs::write(&victim, &corrupted).unwrap();
    match read_embeddings(&victim) {
        Err(Error::BadMagic { .. }) => {}
        other => panic!("corrupted magic: want BadMagic, got {other:?}"),
    }
    // Cut inside the data section.
    std::fs::write(&victim, &original[..original.len() - 5]).unwrap();
    match read_embeddings(&victim) {
        Err(Error::TruncatedFile { .. }) => {}
        other => panic!("short data: want TruncatedFile, got {other:?}"),
    }
    // Cut inside the header.
    std::fs::write(&victim, &original[..9]).unwrap();
    match read_embeddings(&victim) {
        Err(Error::TruncatedFile { .. }) => {}
        other => panic!("short header: want TruncatedFile, got {other:?}"),
    }
    println!("A9 embedding io round trip: PASS (100 matrices bit-exact, corruption rejected)");
}

#[test]
fn a10_scheduler_and_optimizer() {
    let cfg = TrainConfig::default();
    let main0 = lr_at(cfg.lr_main, 0, cfg.scheduler_step, cfg.scheduler_gamma);
    let adapter0 = lr_at(cfg.lr_adapter, 0, cfg.scheduler_step, cfg.scheduler_gamma);
    let main60 = lr_at(cfg.lr_main, 60, cfg.scheduler_step, cfg.scheduler_gamma);
    let adapter60 = lr_at(cfg.lr_adapter, 60, cfg.scheduler_step, cfg.scheduler_gamma);
    assert_eq!(main0.to_bits(), 1e-4f64.to_bits());
    assert_eq!(adapter0.to_bits(), 1e-5f64.to_bits());
    assert_eq!(main60.to_bits(), 1e-5f64.to_bits());
    // 1e-5 and 0.1 both round upward in binary, so their correctly rounded
    // product lands one ulp above the literal 1e-6. The strictest check any
    // rounded arithmetic can meet is that exact bit pattern.
    assert_eq!(adapter60.to_bits(), 1e-6f64.to_bits() + 1);
    assert!((adapter60 - 1e-6).abs() <= f64::EPSILON * 1e-6);

    // First optimizer step from zeroed parameters and moments: with a
    // constant gradient of 0.5 the bias-corrected update is lr to within
    // the epsilon guard, so every parameter lands at -lr.
    let shape = ModelShape {
        d_img: 6,
        d: 5,
        rff_features: 3,
        regressor_hidden: 8,
        n_periods: 7,
        n_subcats: 7,
    };
    let mut rng = seeded(101);
    let mut params: ModelParams<Real> = ModelParams::init(&shape, &mut rng).unwrap();
    for (_, t) in params.tensors_mut() {
        for v in t {
            *v = 0.0;
        }
    }
    let mut grads = GradientSet::zeros_like(&params);
    for l in grads
        .adapter
        .layers
        .iter_mut()
        .chain(grads.loc_mlp.layers.iter_mut())
        .chain(grads.regressor.layers.iter_mut())
    {
        l.weight.iter_mut().for_each(|w| *w = 0.5);
        l.bias.iter_mut().for_each(|b| *b = 0.5);
    }
    grads.zero_conv.weight.iter_mut().for_each(|w| *w = 0.5);
    grads.zero_conv.bias.iter_mut().for_each(|b| *b = 0.5);
    grads.delta.iter_mut().for_each(|d| *d = 0.5);
    let mut state = AdamState::zeros_like(&params);
    let step_cfg = TrainConfig {
        lr_main: 1e-3,
        lr_adapter: 1e-3,
        ..TrainConfig::default()
    };
    optimizer_step(&mut params, &grads, &mut state, &step_cfg, 0).unwrap();
    for (name, t) in params.tensors() {
        for (i, v) in t.iter().enumerate() {
            assert!((v - (-1e-3)).abs() < 1e-9, "{name}[{i}] = {v}");
        }
    }
    println!("A10 scheduler and optimizer: PASS (decade rates pinned, first step -lr within 1e-9)");
}
