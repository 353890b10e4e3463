//! Alpha sweep over all methods on one stream; writes sweep.csv and
//! frontier.svg into the given directory.
//!
//! `cargo run --release --example alpha_sweep -- out_dir`

use surprise_core::harness::{alpha_sweep, pretrained, DeskSetup, Method, RunManifest};
use surprise_core::latent_io::write_labels;
use surprise_core::motion::Variant;
use surprise_core::scenario::{generate, ScenarioConfig};

fn main() -> surprise_core::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sweep".into()));
    std::fs::create_dir_all(&dir)?;
    let setup = DeskSetup::default();
    let world = generate(&ScenarioConfig::motion_coupled(setup.dim, 1, setup.cycles))?;
    world.sequence.write_file(dir.join("seq.lseq"))?;
    write_labels(&world.labels, std::fs::File::create(dir.join("labels.tsv"))?)?;

    // one checkpoint per predictive variant; the sweep picks the one that
    // matches each method, so run them separately
    for (variant, method) in [
        (Variant::Compensated, Method::Compensated),
        (Variant::Naive, Method::Naive),
    ] {
        let ckpt = dir.join(format!("{}.ckpt", method.name()));
        pretrained(&setup, 1, variant)?.write_checkpoint(std::fs::File::create(&ckpt)?)?;
        let mut m = RunManifest::new(dir.join("seq.lseq"), dir.join(method.name()), method);
        m.inputs.labels = Some(dir.join("labels.tsv"));
        m.inputs.checkpoint = Some(ckpt);
        m.sweep_methods = vec![method, Method::Uniform { period_s: 12.0 }];
        let out = alpha_sweep(&m)?;
        for r in &out.rows {
            println!("{}", r.to_csv());
        }
    }
    println!("reports under {}", dir.display());
    Ok(())
}
