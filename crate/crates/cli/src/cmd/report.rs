use crate::args::ReportArgs;
use crate::io;
use yearguessr_core::eval::{aggregate_reports, render_aggregate, EvalReport};
use yearguessr_core::{Error, Result};

pub fn run(a: &ReportArgs) -> Result<()> {
    let mut reports = Vec::with_capacity(a.reports.len());
    for path in &a.reports {
        let text = std::fs::read_to_string(path).map_err(|e| io::io_err(path, e))?;
        let report: EvalReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            line: 1,
            msg: e.to_string(),
        })?;
        reports.push(report);
    }
    let agg = aggregate_reports(&reports)?;
    if let Some(path) = &a.out {
        let bytes = serde_json::to_vec_pretty(&agg)
            .map_err(|e| Error::InvalidConfig(format!("aggregate serialization: {e}")))?;
        io::write_atomic(path, &bytes)?;
    }
    print!("{}", render_aggregate(&agg));
    Ok(())
}
