use crate::args::SplitArgs;
use crate::io;
use yearguessr_core::eval::stratified_split;
use yearguessr_core::record::{read_manifest, write_manifest, Split};
use yearguessr_core::Result;

pub fn run(a: &SplitArgs) -> Result<()> {
    let mut records = read_manifest(&a.manifest)?;
    let assignment = stratified_split(&records, a.seed)?;
    let mut counts = [0usize; 3];
    for (r, s) in records.iter_mut().zip(&assignment) {
        r.split = Some(*s);
        counts[match s {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }] += 1;
    }
    let out = a.out.as_ref().unwrap_or(&a.manifest);
    io::write_atomic_with(out, |tmp| write_manifest(tmp, &records))?;
    println!(
        "labeled {} records (seed {}): train {}, val {}, test {}",
        records.len(),
        a.seed,
        counts[0],
        counts[1],
        counts[2]
    );
    Ok(())
}
