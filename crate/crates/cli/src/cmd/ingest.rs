use crate::args::IngestArgs;
use crate::io;
use yearguessr_core::embed::{l2_normalize, read_csv_embeddings, write_embeddings, EmbeddingMatrix};
use yearguessr_core::record::{read_manifest, validate_manifest, YearRange};
use yearguessr_core::{Error, Result};

pub fn run(a: &IngestArgs) -> Result<()> {
    let records = read_manifest(&a.manifest)?;
    let years = YearRange {
        min: a.min_year,
        max: a.max_year,
    };
    let report = validate_manifest(&records, years);
    print!("{report}");
    if !report.is_ok() {
        return Err(Error::InvalidConfig(format!(
            "manifest failed validation with {} issue(s)",
            report.issues.len()
        )));
    }
    if let (Some(csv), Some(out)) = (&a.csv, &a.out) {
        let m = read_csv_embeddings(csv, a.has_header)?;
        let m = if a.normalize { normalized(&m)? } else { m };
        io::write_atomic_with(out, |tmp| write_embeddings(tmp, &m))?;
        let covered = records.iter().filter(|r| m.get(&r.id).is_some()).count();
        println!(
            "wrote {} embeddings of dimension {} to {} ({} of {} manifest ids covered)",
            m.len(),
            m.dim(),
            out.display(),
            covered,
            records.len()
        );
    }
    Ok(())
}

fn normalized(m: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let mut data = Vec::with_capacity(m.len() * m.dim());
    for i in 0..m.len() {
        data.extend(l2_normalize::<f32>(m.row(i))?);
    }
    EmbeddingMatrix::new(m.ids().to_vec(), m.dim(), data)
}
