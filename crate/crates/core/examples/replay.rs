//! Replay one stream from a run manifest and show that the report embeds the
//! manifest needed to reproduce it.

use surprise_core::harness::{run_replay, Method, RunManifest};
use surprise_core::latent_io::write_labels;
use surprise_core::scenario::{generate, ScenarioConfig};

fn main() -> surprise_core::Result<()> {
    let dir = tempfile::tempdir()?;
    let world = generate(&ScenarioConfig::motion_coupled(32, 5, 3))?;
    world.sequence.write_file(dir.path().join("seq.lseq"))?;
    write_labels(&world.labels, std::fs::File::create(dir.path().join("labels.tsv"))?)?;

    let mut manifest = RunManifest::new(dir.path().join("seq.lseq"), dir.path().join("out"), Method::Compensated);
    manifest.inputs.labels = Some(dir.path().join("labels.tsv"));
    manifest.seed = 5;
    let out = run_replay(&manifest)?;
    println!("{}", out.report);

    let again = run_replay(&RunManifest::from_report(&out.report)?)?;
    assert_eq!(again.row, out.row);
    println!("re-run from the report header reproduces the row");
    Ok(())
}
