//! Round-trip a latent sequence with motion and its label file.

use surprise_core::latent_io::{read_labels, write_labels, Category, EventLabel, LatentSequence};
use surprise_core::motion::MotionVector;

fn main() -> surprise_core::Result<()> {
    let dir = tempfile::tempdir()?;
    let vectors: Vec<Vec<f64>> = (0..90).map(|t| vec![(t as f64 * 0.1).sin(), 1.0, -0.5]).collect();
    let motion = vec![MotionVector::new(0.02, 0.0); 90];
    let seq = LatentSequence::from_vectors(30.0, 3, vectors, Some(motion))?;

    let path = dir.path().join("drive.lseq");
    seq.write_file(&path)?;
    let back = LatentSequence::read_file(&path, Some(3))?;
    println!(
        "{} frames at {} fps, {:.1} s, motion: {}",
        back.len(),
        back.fps(),
        back.duration_s(),
        back.motion().is_some()
    );
    // stored as f32
    assert_eq!(back, seq.quantized());

    let labels = vec![
        EventLabel::new(1.0, 1.5, Category::Behavior, "ann-1")?,
        EventLabel::new(2.0, 2.2, Category::Environmental, "ann-2")?,
    ];
    let mut tsv = Vec::new();
    write_labels(&labels, &mut tsv)?;
    print!("{}", String::from_utf8_lossy(&tsv));
    assert_eq!(read_labels(&tsv[..])?, labels);
    Ok(())
}
