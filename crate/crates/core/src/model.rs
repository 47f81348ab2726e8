//! The assembled prediction pipeline and its checkpoint format.
//!
//! A [`Model`] owns the trainable parameters plus everything frozen: random
//! Fourier features, style and reason anchor embeddings, the taxonomy, and
//! the reason bank. Checkpoints persist the trainable tensors, the Fourier
//! frequencies, and enough metadata to validate that a load is paired with
//! the same taxonomy and bank shape it was trained with.

use crate::checkpoint::{find, read_sections, write_sections, TensorSection};
use crate::embed::EmbeddingMatrix;
use crate::error::Error;
use crate::geo::{adapter_forward, fuse, location_forward, RffParams, ZeroConv};
use crate::head::{
    coarse_class, predict_year, reasoning_importance, regressor_forward, Regressor,
    ReasonImportance,
};
use crate::nn::{Activation, Layer, Linear, Mlp};
use crate::record::{ReasonBank, StyleTaxonomy};
use crate::scalar::{norm, Scalar};
use crate::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Every trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub adapter: Mlp<T>,
    pub loc_mlp: Mlp<T>,
    pub zero_conv: ZeroConv<T>,
    pub regressor: Regressor<T>,
}

/// Architecture hyperparameters needed to initialize parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelShape {
    /// Image embedding dimension (adapter input).
    pub d_img: usize,
    /// Shared similarity-space dimension (anchor embedding width).
    pub d: usize,
    /// Number of random Fourier features (encoded GPS is twice this).
    pub rff_features: usize,
    /// Hidden width of the regressor.
    pub regressor_hidden: usize,
    /// Periods in the taxonomy.
    pub n_periods: usize,
    /// Total subcategories across the reason bank.
    pub n_subcats: usize,
}

impl ModelShape {
    pub fn similarity_len(&self) -> usize {
        self.n_periods + self.n_subcats
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Glorot init for the networks, exact zeros for the fusion projection
    /// and the period offsets. Adapter: two layers, hidden width `d`.
    /// Location network: one hidden layer of width `d`.
    pub fn init(shape: &ModelShape, rng: &mut impl Rng) -> Result<Self> {
        Ok(ModelParams {
            adapter: Mlp::glorot(
                &[shape.d_img, shape.d, shape.d],
                Activation::Gelu,
                Activation::Identity,
                rng,
            )?,
            loc_mlp: Mlp::glorot(
                &[2 * shape.rff_features, shape.d, shape.d],
                Activation::Gelu,
                Activation::Identity,
                rng,
            )?,
            zero_conv: ZeroConv::zeros(shape.d),
            regressor: Regressor::glorot(
                shape.similarity_len(),
                shape.regressor_hidden,
                shape.n_periods,
                rng,
            )?,
        })
    }

    /// Named views over every trainable tensor, in the canonical order used by
    /// the optimizer state and the checkpoint.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, _) in self.adapter.layers.iter().enumerate() {
            names.push(format!("adapter.{i}.weight"));
            names.push(format!("adapter.{i}.bias"));
        }
        for (i, _) in self.loc_mlp.layers.iter().enumerate() {
            names.push(format!("loc.{i}.weight"));
            names.push(format!("loc.{i}.bias"));
        }
        names.push("zero_conv.weight".into());
        names.push("zero_conv.bias".into());
        for (i, _) in self.regressor.mlp.layers.iter().enumerate() {
            names.push(format!("regressor.{i}.weight"));
            names.push(format!("regressor.{i}.bias"));
        }
        names.push("delta".into());
        names
    }

    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = Vec::new();
        for (i, l) in self.adapter.layers.iter().enumerate() {
            out.push((format!("adapter.{i}.weight"), &l.linear.weight));
            out.push((format!("adapter.{i}.bias"), &l.linear.bias));
        }
        for (i, l) in self.loc_mlp.layers.iter().enumerate() {
            out.push((format!("loc.{i}.weight"), &l.linear.weight));
            out.push((format!("loc.{i}.bias"), &l.linear.bias));
        }
        out.push(("zero_conv.weight".into(), &self.zero_conv.linear.weight));
        out.push(("zero_conv.bias".into(), &self.zero_conv.linear.bias));
        for (i, l) in self.regressor.mlp.layers.iter().enumerate() {
            out.push((format!("regressor.{i}.weight"), &l.linear.weight));
            out.push((format!("regressor.{i}.bias"), &l.linear.bias));
        }
        out.push(("delta".into(), &self.regressor.delta));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out: Vec<(String, &mut [T])> = Vec::new();
        for (i, l) in self.adapter.layers.iter_mut().enumerate() {
            out.push((format!("adapter.{i}.weight"), l.linear.weight.as_mut_slice()));
            out.push((format!("adapter.{i}.bias"), l.linear.bias.as_mut_slice()));
        }
        for (i, l) in self.loc_mlp.layers.iter_mut().enumerate() {
            out.push((format!("loc.{i}.weight"), l.linear.weight.as_mut_slice()));
            out.push((format!("loc.{i}.bias"), l.linear.bias.as_mut_slice()));
        }
        out.push((
            "zero_conv.weight".into(),
            self.zero_conv.linear.weight.as_mut_slice(),
        ));
        out.push((
            "zero_conv.bias".into(),
            self.zero_conv.linear.bias.as_mut_slice(),
        ));
        for (i, l) in self.regressor.mlp.layers.iter_mut().enumerate() {
            out.push((
                format!("regressor.{i}.weight"),
                l.linear.weight.as_mut_slice(),
            ));
            out.push((format!("regressor.{i}.bias"), l.linear.bias.as_mut_slice()));
        }
        out.push(("delta".into(), self.regressor.delta.as_mut_slice()));
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Full pipeline: trainable parameters plus frozen context.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub params: ModelParams<T>,
    pub rff: RffParams<T>,
    pub styles: Vec<Vec<T>>,
    pub reasons: Vec<Vec<T>>,
    pub taxonomy: StyleTaxonomy,
    pub bank: ReasonBank,
    midpoints: Vec<T>,
}

/// One full prediction with its attribution.
#[derive(Debug, Clone)]
pub struct Prediction<T> {
    pub year_hat: T,
    pub coarse: usize,
    pub probs: Vec<T>,
    pub style_sims: Vec<T>,
    pub reason_sims: Vec<T>,
    pub top_reasons: Vec<ReasonImportance<T>>,
}

/// Serialized form of one prediction, as written to prediction files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PredictionRecord {
    pub id: String,
    pub year_hat: f64,
    pub coarse_period: String,
    pub probs: Vec<f64>,
    pub top_reasons: Vec<ReasonEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReasonEntry {
    pub reason: String,
    pub subcategory: String,
    pub importance: f64,
}

impl<T: Scalar> Model<T> {
    pub fn new(
        params: ModelParams<T>,
        rff: RffParams<T>,
        styles: Vec<Vec<T>>,
        reasons: Vec<Vec<T>>,
        taxonomy: StyleTaxonomy,
        bank: ReasonBank,
    ) -> Result<Self> {
        bank.validate()?;
        let d = params.zero_conv.dim();
        if params.adapter.out_dim() != d {
            return Err(Error::ShapeMismatch {
                context: "adapter output vs fusion dim".into(),
                expected: format!("{d}"),
                got: format!("{}", params.adapter.out_dim()),
            });
        }
        if params.loc_mlp.in_dim() != rff.out_dim() || params.loc_mlp.out_dim() != d {
            return Err(Error::ShapeMismatch {
                context: "location network".into(),
                expected: format!("{} -> {}", rff.out_dim(), d),
                got: format!(
                    "{} -> {}",
                    params.loc_mlp.in_dim(),
                    params.loc_mlp.out_dim()
                ),
            });
        }
        if styles.len() != taxonomy.len() {
            return Err(Error::ShapeMismatch {
                context: "style anchors vs taxonomy".into(),
                expected: format!("{}", taxonomy.len()),
                got: format!("{}", styles.len()),
            });
        }
        if reasons.len() != bank.total_subcategories() {
            return Err(Error::ShapeMismatch {
                context: "reason anchors vs bank".into(),
                expected: format!("{}", bank.total_subcategories()),
                got: format!("{}", reasons.len()),
            });
        }
        for (what, rows) in [("style", &styles), ("reason", &reasons)] {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != d {
                    return Err(Error::ShapeMismatch {
                        context: format!("{what} anchor {i}"),
                        expected: format!("{d}"),
                        got: format!("{}", row.len()),
                    });
                }
                if norm(row) == T::zero() {
                    return Err(Error::ZeroVector {
                        context: format!("{what} anchor {i}"),
                    });
                }
            }
        }
        let n_sims = styles.len() + reasons.len();
        if params.regressor.mlp.in_dim() != n_sims {
            return Err(Error::ShapeMismatch {
                context: "regressor input".into(),
                expected: format!("{n_sims}"),
                got: format!("{}", params.regressor.mlp.in_dim()),
            });
        }
        if params.regressor.n_periods() != taxonomy.len()
            || params.regressor.mlp.out_dim() != taxonomy.len()
        {
            return Err(Error::ShapeMismatch {
                context: "regressor output vs taxonomy".into(),
                expected: format!("{}", taxonomy.len()),
                got: format!("{}", params.regressor.mlp.out_dim()),
            });
        }
        let midpoints = taxonomy
            .midpoints()
            .into_iter()
            .map(T::from_f64_lossy)
            .collect();
        Ok(Model {
            params,
            rff,
            styles,
            reasons,
            taxonomy,
            bank,
            midpoints,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.zero_conv.dim()
    }

    pub fn midpoints(&self) -> &[T] {
        &self.midpoints
    }

    /// Image embedding (plus optional GPS) to fused similarity-space vector.
    pub fn embed(&self, image: &[T], gps: Option<(T, T)>) -> Result<Vec<T>> {
        let z_v = adapter_forward(&self.params.adapter, image)?;
        let z_l = match gps {
            None => None,
            Some((lat, lon)) => {
                let raw = location_forward(&self.rff, &self.params.loc_mlp, lat, lon)?;
                Some(self.params.zero_conv.forward(&raw)?)
            }
        };
        fuse(&z_v, z_l.as_deref())
    }

    /// Full prediction with reasoning attribution.
    pub fn predict(&self, image: &[T], gps: Option<(T, T)>) -> Result<Prediction<T>> {
        let z = self.embed(image, gps)?;
        let s = crate::head::similarity_vector(&z, &self.styles, &self.reasons)?;
        let head = regressor_forward(&self.params.regressor, &s)?;
        let year_hat = predict_year(&head.probs, &self.midpoints, &self.params.regressor.delta)?;
        let coarse = coarse_class(&head.probs)?;
        let top_reasons = reasoning_importance(&self.params.regressor, &s, &self.bank)?;
        let n_styles = self.styles.len();
        Ok(Prediction {
            year_hat,
            coarse,
            probs: head.probs,
            style_sims: s[..n_styles].to_vec(),
            reason_sims: s[n_styles..].to_vec(),
            top_reasons,
        })
    }

    /// Prediction in its serialized form.
    pub fn predict_record(
        &self,
        id: &str,
        image: &[T],
        gps: Option<(T, T)>,
    ) -> Result<PredictionRecord> {
        let p = self.predict(image, gps)?;
        Ok(PredictionRecord {
            id: id.to_string(),
            year_hat: p.year_hat.to_f64_lossy(),
            coarse_period: self.taxonomy.periods()[p.coarse].name.clone(),
            probs: p.probs.iter().map(|v| v.to_f64_lossy()).collect(),
            top_reasons: p
                .top_reasons
                .iter()
                .map(|r| ReasonEntry {
                    reason: r.reason.clone(),
                    subcategory: r.subcategory.clone(),
                    importance: r.importance.to_f64_lossy(),
                })
                .collect(),
        })
    }
}

/// Select taxonomy-ordered style anchor rows from an embedding matrix. Rows
/// are keyed by period name.
pub fn style_rows<T: Scalar>(
    m: &EmbeddingMatrix,
    taxonomy: &StyleTaxonomy,
) -> Result<Vec<Vec<T>>> {
    taxonomy
        .periods()
        .iter()
        .map(|p| {
            let i = m.index_of(&p.name).ok_or_else(|| Error::UnknownId {
                id: p.name.clone(),
                context: "style embedding file".into(),
            })?;
            Ok(m.row_scalar(i))
        })
        .collect()
}

/// Select bank-ordered reason anchor rows. Rows are keyed `reason/label`.
pub fn reason_rows<T: Scalar>(m: &EmbeddingMatrix, bank: &ReasonBank) -> Result<Vec<Vec<T>>> {
    bank.flat_keys()
        .iter()
        .map(|key| {
            let i = m.index_of(key).ok_or_else(|| Error::UnknownId {
                id: key.clone(),
                context: "reason embedding file".into(),
            })?;
            Ok(m.row_scalar(i))
        })
        .collect()
}

/// Metadata stored beside the tensors in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub bank_sizes: Vec<usize>,
    /// Period boundaries: every start, then the final end.
    pub period_bounds: Vec<i32>,
}

impl CheckpointMeta {
    /// Metadata for a model trained against this taxonomy and bank.
    pub fn describe(seed: u64, taxonomy: &StyleTaxonomy, bank: &ReasonBank) -> Self {
        CheckpointMeta {
            seed,
            bank_sizes: bank.sizes(),
            period_bounds: taxonomy_bounds(taxonomy),
        }
    }

    /// Reject a checkpoint paired with a different taxonomy or bank shape
    /// than it was trained against.
    pub fn validate(&self, taxonomy: &StyleTaxonomy, bank: &ReasonBank) -> Result<()> {
        let bounds = taxonomy_bounds(taxonomy);
        if bounds != self.period_bounds {
            return Err(Error::InvalidConfig(format!(
                "checkpoint period bounds {:?} do not match taxonomy {:?}",
                self.period_bounds, bounds
            )));
        }
        if bank.sizes() != self.bank_sizes {
            return Err(Error::InvalidConfig(format!(
                "checkpoint bank sizes {:?} do not match reason bank {:?}",
                self.bank_sizes,
                bank.sizes()
            )));
        }
        Ok(())
    }
}

fn taxonomy_bounds(taxonomy: &StyleTaxonomy) -> Vec<i32> {
    let mut bounds: Vec<i32> = taxonomy.periods().iter().map(|p| p.start).collect();
    bounds.push(taxonomy.last_year());
    bounds
}

// The container stores f32 only. A u64 seed is split into four exact 16-bit
// chunks, little-endian.
fn seed_to_chunks(seed: u64) -> Vec<f32> {
    (0..4).map(|i| ((seed >> (16 * i)) & 0xFFFF) as f32).collect()
}

fn seed_from_chunks(chunks: &[f32]) -> Result<u64> {
    if chunks.len() != 4 {
        return Err(Error::ShapeMismatch {
            context: "seed chunks".into(),
            expected: "4".into(),
            got: format!("{}", chunks.len()),
        });
    }
    let mut seed: u64 = 0;
    for (i, c) in chunks.iter().enumerate() {
        let v = *c as u64;
        if *c < 0.0 || *c > 65535.0 || c.fract() != 0.0 {
            return Err(Error::InvalidConfig(format!("bad seed chunk {c}")));
        }
        seed |= v << (16 * i);
    }
    Ok(seed)
}

fn to_f32(v: &[impl Scalar]) -> Vec<f32> {
    v.iter().map(|x| x.to_f64_lossy() as f32).collect()
}

fn from_f32<T: Scalar>(v: &[f32]) -> Vec<T> {
    v.iter().map(|x| T::from_f64_lossy(f64::from(*x))).collect()
}

fn mlp_sections<T: Scalar>(prefix: &str, mlp: &Mlp<T>, out: &mut Vec<TensorSection>) -> Result<()> {
    for (i, l) in mlp.layers.iter().enumerate() {
        out.push(TensorSection::new(
            format!("{prefix}.{i}.weight"),
            vec![l.linear.out_dim as u32, l.linear.in_dim as u32],
            to_f32(&l.linear.weight),
        )?);
        out.push(TensorSection::vector(
            format!("{prefix}.{i}.bias"),
            to_f32(&l.linear.bias),
        )?);
        out.push(TensorSection::vector(
            format!("{prefix}.{i}.act"),
            vec![f32::from(l.activation.code())],
        )?);
    }
    Ok(())
}

fn mlp_from_sections<T: Scalar>(prefix: &str, sections: &[TensorSection]) -> Result<Mlp<T>> {
    let mut layers = Vec::new();
    let mut i = 0;
    loop {
        let wname = format!("{prefix}.{i}.weight");
        let Ok(w) = find(sections, &wname) else { break };
        if w.dims.len() != 2 {
            return Err(Error::ShapeMismatch {
                context: wname,
                expected: "rank 2".into(),
                got: format!("rank {}", w.dims.len()),
            });
        }
        let b = find(sections, &format!("{prefix}.{i}.bias"))?;
        let a = find(sections, &format!("{prefix}.{i}.act"))?;
        let (out_dim, in_dim) = (w.dims[0] as usize, w.dims[1] as usize);
        if b.data.len() != out_dim {
            return Err(Error::ShapeMismatch {
                context: format!("{prefix}.{i}.bias"),
                expected: format!("{out_dim}"),
                got: format!("{}", b.data.len()),
            });
        }
        if a.data.len() != 1 {
            return Err(Error::ShapeMismatch {
                context: format!("{prefix}.{i}.act"),
                expected: "1".into(),
                got: format!("{}", a.data.len()),
            });
        }
        layers.push(Layer {
            linear: Linear {
                weight: from_f32(&w.data),
                bias: from_f32(&b.data),
                in_dim,
                out_dim,
            },
            activation: Activation::from_code(a.data[0] as u8)?,
        });
        i += 1;
    }
    Mlp::new(layers)
}

/// Persist trainable tensors, Fourier frequencies, and checkpoint metadata.
pub fn save_params<T: Scalar>(
    path: &Path,
    params: &ModelParams<T>,
    rff: &RffParams<T>,
    meta: &CheckpointMeta,
) -> Result<()> {
    let mut sections = Vec::new();
    mlp_sections("adapter", &params.adapter, &mut sections)?;
    mlp_sections("loc", &params.loc_mlp, &mut sections)?;
    sections.push(TensorSection::new(
        "zero_conv.weight",
        vec![
            params.zero_conv.linear.out_dim as u32,
            params.zero_conv.linear.in_dim as u32,
        ],
        to_f32(&params.zero_conv.linear.weight),
    )?);
    sections.push(TensorSection::vector(
        "zero_conv.bias",
        to_f32(&params.zero_conv.linear.bias),
    )?);
    mlp_sections("regressor", &params.regressor.mlp, &mut sections)?;
    sections.push(TensorSection::vector(
        "delta",
        to_f32(&params.regressor.delta),
    )?);
    sections.push(TensorSection::new(
        "rff.freqs",
        vec![rff.num_features() as u32, 2],
        to_f32(rff.freqs()),
    )?);
    sections.push(TensorSection::vector(
        "rff.sigma",
        vec![rff.sigma() as f32],
    )?);
    sections.push(TensorSection::vector(
        "rff.seed",
        seed_to_chunks(rff.seed()),
    )?);
    sections.push(TensorSection::vector(
        "meta.seed",
        seed_to_chunks(meta.seed),
    )?);
    sections.push(TensorSection::vector(
        "meta.bank_sizes",
        meta.bank_sizes.iter().map(|s| *s as f32).collect(),
    )?);
    sections.push(TensorSection::vector(
        "meta.period_bounds",
        meta.period_bounds.iter().map(|b| *b as f32).collect(),
    )?);
    write_sections(path, &sections)
}

/// Load what [`save_params`] wrote.
pub fn load_params<T: Scalar>(
    path: &Path,
) -> Result<(ModelParams<T>, RffParams<T>, CheckpointMeta)> {
    let sections = read_sections(path)?;
    let adapter = mlp_from_sections("adapter", &sections)?;
    let loc_mlp = mlp_from_sections("loc", &sections)?;
    let zw = find(&sections, "zero_conv.weight")?;
    if zw.dims.len() != 2 || zw.dims[0] != zw.dims[1] {
        return Err(Error::ShapeMismatch {
            context: "zero_conv.weight".into(),
            expected: "square rank-2".into(),
            got: format!("{:?}", zw.dims),
        });
    }
    let zb = find(&sections, "zero_conv.bias")?;
    let dim = zw.dims[0] as usize;
    let zero_conv = ZeroConv {
        linear: Linear {
            weight: from_f32(&zw.data),
            bias: from_f32(&zb.data),
            in_dim: dim,
            out_dim: dim,
        },
    };
    let reg_mlp = mlp_from_sections("regressor", &sections)?;
    let delta = from_f32(&find(&sections, "delta")?.data);
    let regressor = Regressor {
        mlp: reg_mlp,
        delta,
    };
    let freqs = find(&sections, "rff.freqs")?;
    let sigma = f64::from(find(&sections, "rff.sigma")?.data[0]);
    let rff_seed = seed_from_chunks(&find(&sections, "rff.seed")?.data)?;
    let rff = RffParams::from_freqs(from_f32(&freqs.data), sigma, rff_seed)?;
    let meta = CheckpointMeta {
        seed: seed_from_chunks(&find(&sections, "meta.seed")?.data)?,
        bank_sizes: find(&sections, "meta.bank_sizes")?
            .data
            .iter()
            .map(|v| *v as usize)
            .collect(),
        period_bounds: find(&sections, "meta.period_bounds")?
            .data
            .iter()
            .map(|v| *v as i32)
            .collect(),
    };
    Ok((
        ModelParams {
            adapter,
            loc_mlp,
            zero_conv,
            regressor,
        },
        rff,
        meta,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn small_shape() -> ModelShape {
        ModelShape {
            d_img: 6,
            d: 8,
            rff_features: 4,
            regressor_hidden: 16,
            n_periods: 7,
            n_subcats: 7,
        }
    }

    fn anchors(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    pub(crate) fn small_model(seed: u64) -> Model<f64> {
        let shape = small_shape();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(&shape, &mut rng).unwrap();
        Model::new(
            params,
            RffParams::new(shape.rff_features, 1.0, seed ^ 0xFF).unwrap(),
            anchors(7, shape.d, seed ^ 1),
            anchors(7, shape.d, seed ^ 2),
            StyleTaxonomy::default_seven(),
            ReasonBank::roof_default(),
        )
        .unwrap()
    }

    #[test]
    fn init_produces_documented_shapes() {
        let shape = small_shape();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p: ModelParams<f64> = ModelParams::init(&shape, &mut rng).unwrap();
        assert_eq!(p.adapter.in_dim(), 6);
        assert_eq!(p.adapter.out_dim(), 8);
        assert_eq!(p.adapter.layers.len(), 2);
        assert_eq!(p.loc_mlp.in_dim(), 8);
        assert_eq!(p.loc_mlp.layers.len(), 2);
        assert!(p.zero_conv.is_zero_init());
        assert_eq!(p.regressor.mlp.in_dim(), 14);
        assert_eq!(p.regressor.mlp.out_dim(), 7);
        assert_eq!(p.regressor.delta, vec![0.0; 7]);
    }

    #[test]
    fn tensor_views_cover_everything_in_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p: ModelParams<f64> = ModelParams::init(&small_shape(), &mut rng).unwrap();
        let names = p.tensor_names();
        assert_eq!(names[0], "adapter.0.weight");
        assert_eq!(names[names.len() - 1], "delta");
        let views = p.tensors();
        assert_eq!(
            views.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
            names
        );
        let total: usize = views.iter().map(|(_, t)| t.len()).sum();
        assert_eq!(total, p.param_count());
        let muts = p.tensors_mut();
        assert_eq!(
            muts.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
            names
        );
    }

    #[test]
    fn predict_is_deterministic_and_gps_neutral_at_init() {
        let m = small_model(5);
        let image: Vec<f64> = (0..6).map(|i| (i as f64 * 0.4).sin()).collect();
        let a = m.predict(&image, Some((48.8, 2.35))).unwrap();
        let b = m.predict(&image, None).unwrap();
        assert_eq!(a.year_hat.to_bits(), b.year_hat.to_bits());
        for (x, y) in a.probs.iter().zip(&b.probs) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let c = m.predict(&image, Some((48.8, 2.35))).unwrap();
        assert_eq!(a.year_hat.to_bits(), c.year_hat.to_bits());
    }

    #[test]
    fn gps_changes_predictions_once_fusion_is_nonzero() {
        let mut m = small_model(6);
        for w in m.params.zero_conv.linear.weight.iter_mut() {
            *w = 0.05;
        }
        let image: Vec<f64> = (0..6).map(|i| (i as f64 * 0.4).cos()).collect();
        let with = m.predict(&image, Some((40.4, -3.7))).unwrap();
        let without = m.predict(&image, None).unwrap();
        assert_ne!(with.year_hat, without.year_hat);
    }

    #[test]
    fn checkpoint_round_trip_is_stable_after_first_rounding() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ygcp");
        let p2 = dir.path().join("b.ygcp");
        let m = small_model(9);
        let meta = CheckpointMeta {
            seed: 0xDEAD_BEEF_1234_5678,
            bank_sizes: m.bank.sizes(),
            period_bounds: taxonomy_bounds(&m.taxonomy),
        };
        save_params(&p1, &m.params, &m.rff, &meta).unwrap();
        let (params2, rff2, meta2) = load_params::<f64>(&p1).unwrap();
        assert_eq!(meta2, meta);
        save_params(&p2, &params2, &rff2, &meta2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        meta2.validate(&m.taxonomy, &m.bank).unwrap();
    }

    #[test]
    fn meta_validation_rejects_mismatches() {
        let m = small_model(3);
        let described = CheckpointMeta::describe(1, &m.taxonomy, &m.bank);
        assert!(described.validate(&m.taxonomy, &m.bank).is_ok());
        let meta = CheckpointMeta {
            seed: 1,
            bank_sizes: vec![3],
            period_bounds: taxonomy_bounds(&m.taxonomy),
        };
        assert!(meta.validate(&m.taxonomy, &m.bank).is_err());
        let meta = CheckpointMeta {
            seed: 1,
            bank_sizes: m.bank.sizes(),
            period_bounds: vec![800, 2024],
        };
        assert!(meta.validate(&m.taxonomy, &m.bank).is_err());
    }

    #[test]
    fn seed_chunks_round_trip_extremes() {
        for seed in [0u64, 1, 0xFFFF, 0x1_0000, u64::MAX, 0x0123_4567_89AB_CDEF] {
            assert_eq!(seed_from_chunks(&seed_to_chunks(seed)).unwrap(), seed);
        }
        assert!(seed_from_chunks(&[1.0, 2.0]).is_err());
        assert!(seed_from_chunks(&[0.5, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn model_assembly_validates_shapes() {
        let shape = small_shape();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = ModelParams::init(&shape, &mut rng).unwrap();
        let rff = RffParams::new(shape.rff_features, 1.0, 0).unwrap();
        // Wrong style count.
        let err = Model::new(
            params.clone(),
            rff.clone(),
            anchors(6, 8, 0),
            anchors(7, 8, 1),
            StyleTaxonomy::default_seven(),
            ReasonBank::roof_default(),
        );
        assert!(err.is_err());
        // Wrong anchor width.
        let err = Model::new(
            params.clone(),
            rff.clone(),
            anchors(7, 9, 0),
            anchors(7, 8, 1),
            StyleTaxonomy::default_seven(),
            ReasonBank::roof_default(),
        );
        assert!(err.is_err());
        // Zero anchor.
        let mut styles = anchors(7, 8, 0);
        styles[3] = vec![0.0; 8];
        let err = Model::new(
            params,
            rff,
            styles,
            anchors(7, 8, 1),
            StyleTaxonomy::default_seven(),
            ReasonBank::roof_default(),
        );
        assert!(matches!(err, Err(Error::ZeroVector { .. })));
    }

    #[test]
    fn style_and_reason_rows_look_up_by_name() {
        let taxonomy = StyleTaxonomy::default_seven();
        let bank = ReasonBank::roof_default();
        let mut ids: Vec<String> = taxonomy.periods().iter().map(|p| p.name.clone()).collect();
        ids.reverse(); // order in the file must not matter
        let dim = 3;
        let data: Vec<f32> = (0..ids.len() * dim).map(|i| i as f32 + 1.0).collect();
        let m = EmbeddingMatrix::new(ids, dim, data).unwrap();
        let rows: Vec<Vec<f64>> = style_rows(&m, &taxonomy).unwrap();
        assert_eq!(rows.len(), 7);
        // Roman is the last row of the reversed file.
        assert_eq!(rows[0], vec![19.0, 20.0, 21.0]);
        assert!(reason_rows::<f64>(&m, &bank).is_err());
    }
}
