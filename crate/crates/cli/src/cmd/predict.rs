use crate::args::PredictArgs;
use crate::{data, io};
use rayon::prelude::*;
use yearguessr_core::embed::read_embeddings;
use yearguessr_core::model::PredictionRecord;
use yearguessr_core::{Error, Real, Result};

pub fn run(a: &PredictArgs) -> Result<()> {
    let (model, _) = data::load_model(&a.model, &a.styles, &a.reasons)?;
    let mut records = data::load_records(&a.manifest, a.split)?;
    records.sort_by(|x, y| x.id.cmp(&y.id));
    let images = read_embeddings(&a.images)?;
    if images.dim() != model.params.adapter.in_dim() {
        return Err(Error::ShapeMismatch {
            context: "image embeddings vs checkpoint adapter".into(),
            expected: format!("{}", model.params.adapter.in_dim()),
            got: format!("{}", images.dim()),
        });
    }
    let inputs: Vec<(String, Vec<Real>, Option<(Real, Real)>)> = records
        .iter()
        .map(|r| {
            let row = images.index_of(&r.id).ok_or_else(|| Error::UnknownId {
                id: r.id.clone(),
                context: "image embedding file".into(),
            })?;
            Ok((r.id.clone(), images.row_scalar::<Real>(row), r.gps()))
        })
        .collect::<Result<_>>()?;
    let threads = io::resolve_threads(a.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    // The id sort fixes the input order and the indexed collect preserves
    // it, so the output does not depend on the worker count.
    let preds: Vec<PredictionRecord> = pool.install(|| {
        inputs
            .par_iter()
            .map(|(id, image, gps)| model.predict_record(id, image, *gps))
            .collect::<Result<Vec<_>>>()
    })?;
    io::write_atomic(&a.out, &io::jsonl_bytes(&preds)?)?;
    println!("wrote {} predictions to {}", preds.len(), a.out.display());
    Ok(())
}
