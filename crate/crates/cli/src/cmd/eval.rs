use crate::args::EvalArgs;
use crate::{data, io};
use yearguessr_core::eval::{
    evaluate_joined, join_predictions, render_report, scatter_csv, PredictedYear,
};
use yearguessr_core::{Error, Result};

pub fn run(a: &EvalArgs) -> Result<()> {
    let records = data::load_records(&a.manifest, a.split)?;
    let preds: Vec<PredictedYear> = io::read_jsonl(&a.preds)?;
    let (taxonomy, _) = data::taxonomy_and_bank();
    let joined = join_predictions(&records, &preds, &taxonomy)?;
    let report = evaluate_joined(&joined, a.seed);
    if let Some(path) = &a.scatter {
        io::write_atomic(path, &scatter_csv(&joined)?)?;
    }
    if let Some(path) = &a.out {
        let bytes = serde_json::to_vec_pretty(&report)
            .map_err(|e| Error::InvalidConfig(format!("report serialization: {e}")))?;
        io::write_atomic(path, &bytes)?;
    }
    print!("{}", render_report(&report));
    Ok(())
}
