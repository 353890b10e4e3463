//! Latent, motion and label storage plus feature-map pooling.
//!
//! Binary layout of a sequence file (all little-endian):
//!
//! ```text
//! "LSEQ1"            5 bytes
//! fps                f64
//! dim (D)            u32
//! frames (T)         u32
//! latents            T * D f32, frame-major
//! [ "MSEQ1"          5 bytes, optional motion block
//!   motion           T * 2 f32, (mx, my) per frame ]
//! ```
//!
//! Dense feature maps (and flow fixtures, with D = 2) use the `FMAP1` layout:
//! magic, rows u32, cols u32, depth u32, then rows * cols * depth f32 in
//! row-major `[row][col][channel]` order.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionVector;

pub const SEQUENCE_MAGIC: &[u8; 5] = b"LSEQ1";
pub const MOTION_MAGIC: &[u8; 5] = b"MSEQ1";
pub const FEATURE_MAP_MAGIC: &[u8; 5] = b"FMAP1";

const SEQUENCE_HEADER_LEN: u64 = 5 + 8 + 4 + 4;

/// Dense `rows x cols x depth` patch feature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    rows: usize,
    cols: usize,
    depth: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(rows: usize, cols: usize, depth: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || depth == 0 {
            return Err(Error::invalid("feature map dimensions must be positive"));
        }
        let expected = rows * cols * depth;
        if values.len() != expected {
            return Err(Error::DimMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(FeatureMap {
            rows,
            cols,
            depth,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize, depth: usize) -> Result<Self> {
        Self::new(rows, cols, depth, vec![0.0; rows * cols * depth])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Patch vector at `(row, col)`.
    pub fn patch(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.cols + col) * self.depth;
        &self.values[start..start + self.depth]
    }

    pub fn patch_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let start = (row * self.cols + col) * self.depth;
        &mut self.values[start..start + self.depth]
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(FEATURE_MAP_MAGIC)?;
        for n in [self.rows, self.cols, self.depth] {
            out.write_all(&(n as u32).to_le_bytes())?;
        }
        for &v in &self.values {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut cursor = ByteCursor::new(&bytes);
        cursor.expect_magic(FEATURE_MAP_MAGIC, "FMAP1")?;
        let rows = cursor.u32()? as usize;
        let cols = cursor.u32()? as usize;
        let depth = cursor.u32()? as usize;
        let count = rows * cols * depth;
        let expected = 17 + 4 * count as u64;
        if bytes.len() as u64 != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: bytes.len() as u64,
            });
        }
        let values = (0..count)
            .map(|_| cursor.f32().map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        FeatureMap::new(rows, cols, depth, values)
    }
}

/// Global semantic state of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub frame_index: usize,
    pub timestamp_s: f64,
    pub values: Vec<f64>,
}

impl LatentState {
    pub fn new(frame_index: usize, timestamp_s: f64, values: Vec<f64>) -> Self {
        LatentState {
            frame_index,
            timestamp_s,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Average the patch vectors over the whole spatial grid.
pub fn pool_feature_map(map: &FeatureMap) -> Result<LatentState> {
    if let Some(pos) = map.values.iter().position(|v| !v.is_finite()) {
        let depth = map.depth;
        let patch = pos / depth;
        return Err(Error::NonFinite(format!(
            "feature map at row {}, col {}, channel {}",
            patch / map.cols,
            patch % map.cols,
            pos % depth
        )));
    }
    let mut sums = vec![0.0; map.depth];
    for patch in map.values.chunks_exact(map.depth) {
        for (s, v) in sums.iter_mut().zip(patch) {
            *s += v;
        }
    }
    let count = (map.rows * map.cols) as f64;
    sums.iter_mut().for_each(|s| *s /= count);
    Ok(LatentState::new(0, 0.0, sums))
}

/// An ordered stream of latent states sampled at a fixed frame rate, with an
/// optional parallel motion track.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence {
    fps: f64,
    dim: usize,
    frames: Vec<LatentState>,
    motion: Option<Vec<MotionVector>>,
}

impl LatentSequence {
    /// Build a sequence from raw per-frame vectors. Frame indices and
    /// timestamps are assigned from the position and `fps`.
    pub fn from_vectors(
        fps: f64,
        dim: usize,
        vectors: Vec<Vec<f64>>,
        motion: Option<Vec<MotionVector>>,
    ) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        if dim == 0 {
            return Err(Error::invalid("latent dimension must be positive"));
        }
        if let Some(m) = &motion {
            if m.len() != vectors.len() {
                return Err(Error::invalid(format!(
                    "motion track has {} entries for {} frames",
                    m.len(),
                    vectors.len()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("motion track".into()));
            }
        }
        let mut frames = Vec::with_capacity(vectors.len());
        for (t, values) in vectors.into_iter().enumerate() {
            if values.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("latent frame {t}")));
            }
            frames.push(LatentState::new(t, t as f64 / fps, values));
        }
        Ok(LatentSequence {
            fps,
            dim,
            frames,
            motion,
        })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn frames(&self) -> &[LatentState] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t].values
    }

    pub fn motion(&self) -> Option<&[MotionVector]> {
        self.motion.as_deref()
    }

    pub fn with_motion(mut self, motion: Option<Vec<MotionVector>>) -> Result<Self> {
        if let Some(m) = &motion {
            if m.len() != self.frames.len() {
                return Err(Error::invalid("motion track length differs from frame count"));
            }
        }
        self.motion = motion;
        Ok(self)
    }

    /// Copy with every value rounded to `f32`, i.e. what a write/read cycle yields.
    pub fn quantized(&self) -> Self {
        let q = |v: f64| v as f32 as f64;
        let mut out = self.clone();
        for f in &mut out.frames {
            f.values.iter_mut().for_each(|v| *v = q(*v));
        }
        if let Some(m) = &mut out.motion {
            for mv in m {
                mv.mx = q(mv.mx);
                mv.my = q(mv.my);
            }
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let frames = u32::try_from(self.frames.len()).map_err(|_| Error::invalid("too many frames for LSEQ1"))?;
        out.write_all(SEQUENCE_MAGIC)?;
        out.write_all(&self.fps.to_le_bytes())?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&frames.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.frames.len() * self.dim * 4);
        for f in &self.frames {
            for &v in &f.values {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        if let Some(motion) = &self.motion {
            buf.extend_from_slice(MOTION_MAGIC);
            for m in motion {
                buf.extend_from_slice(&(m.mx as f32).to_le_bytes());
                buf.extend_from_slice(&(m.my as f32).to_le_bytes());
            }
        }
        out.write_all(&buf)?;
        out.flush()?;
        Ok(())
    }

    /// Parse a sequence. When `expected_dim` is given, a header with a
    /// different dimension is rejected.
    pub fn read_from<R: Read>(mut input: R, expected_dim: Option<usize>) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() < 5 || &bytes[..5] != SEQUENCE_MAGIC {
            return Err(Error::BadMagic { expected: "LSEQ1" });
        }
        if (bytes.len() as u64) < SEQUENCE_HEADER_LEN {
            return Err(Error::LengthMismatch {
                expected: SEQUENCE_HEADER_LEN,
                found: bytes.len() as u64,
            });
        }
        let mut cursor = ByteCursor::new(&bytes);
        cursor.skip(5);
        let fps = cursor.f64()?;
        let dim = cursor.u32()? as usize;
        let frames = cursor.u32()? as usize;
        if let Some(expected) = expected_dim {
            if expected != dim {
                return Err(Error::DimMismatch { expected, found: dim });
            }
        }
        let payload_end = SEQUENCE_HEADER_LEN + 4 * (frames * dim) as u64;
        let total = bytes.len() as u64;
        if total < payload_end {
            return Err(Error::LengthMismatch {
                expected: payload_end,
                found: total,
            });
        }
        let mut vectors = Vec::with_capacity(frames);
        for _ in 0..frames {
            let v = (0..dim)
                .map(|_| cursor.f32().map(f64::from))
                .collect::<Result<Vec<_>>>()?;
            vectors.push(v);
        }
        let motion = if total == payload_end {
            None
        } else {
            let with_motion = payload_end + 5 + 8 * frames as u64;
            if cursor.remaining() < 5 || cursor.peek(5) != MOTION_MAGIC {
                return Err(Error::BadMagic { expected: "MSEQ1" });
            }
            if total != with_motion {
                return Err(Error::LengthMismatch {
                    expected: with_motion,
                    found: total,
                });
            }
            cursor.skip(5);
            let mut m = Vec::with_capacity(frames);
            for _ in 0..frames {
                let mx = f64::from(cursor.f32()?);
                let my = f64::from(cursor.f32()?);
                m.push(MotionVector::new(mx, my));
            }
            Some(m)
        };
        LatentSequence::from_vectors(fps, dim, vectors, motion)
    }

    pub fn write_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_file(path: impl AsRef<std::path::Path>, expected_dim: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), expected_dim)
    }
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        ByteCursor { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn skip(&mut self, n: usize) {
        self.pos += n;
    }

    fn peek(&self, n: usize) -> Vec<u8> {
        self.bytes[self.pos..self.pos + n].to_vec()
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.remaining() < N {
            return Err(Error::LengthMismatch {
                expected: (self.pos + N) as u64,
                found: self.bytes.len() as u64,
            });
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        Ok(out)
    }

    fn expect_magic(&mut self, magic: &[u8; 5], name: &'static str) -> Result<()> {
        match self.take::<5>() {
            Ok(m) if &m == magic => Ok(()),
            _ => Err(Error::BadMagic { expected: name }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn f32(&mut self) -> Result<f32> {
        self.take::<4>().map(f32::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

/// Event taxonomy used by annotators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SpatialTransition,
    Environmental,
    Behavior,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::SpatialTransition, Category::Environmental, Category::Behavior];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::SpatialTransition => "spatial_transition",
            Category::Environmental => "environmental",
            Category::Behavior => "behavior",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown category {s:?}")))
    }
}

/// Annotated event interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLabel {
    pub start_s: f64,
    pub end_s: f64,
    pub category: Category,
    pub annotator_id: String,
}

impl EventLabel {
    pub fn new(start_s: f64, end_s: f64, category: Category, annotator_id: impl Into<String>) -> Result<Self> {
        if !(start_s.is_finite() && end_s.is_finite()) || start_s < 0.0 || start_s > end_s {
            return Err(Error::invalid(format!(
                "label interval [{start_s}, {end_s}] is not a valid non-negative interval"
            )));
        }
        let annotator_id = annotator_id.into();
        if annotator_id.is_empty() || annotator_id.contains(char::is_whitespace) {
            return Err(Error::invalid("annotator id must be a non-empty token"));
        }
        Ok(EventLabel {
            start_s,
            end_s,
            category,
            annotator_id,
        })
    }

    pub fn contains(&self, time_s: f64, slack_s: f64) -> bool {
        time_s >= self.start_s - slack_s && time_s <= self.end_s + slack_s
    }
}

/// Write labels as tab-separated line records:
/// `start_s  end_s  category  annotator_id`.
pub fn write_labels<W: Write>(labels: &[EventLabel], mut out: W) -> Result<()> {
    writeln!(out, "# start_s\tend_s\tcategory\tannotator_id")?;
    for l in labels {
        writeln!(out, "{}\t{}\t{}\t{}", l.start_s, l.end_s, l.category, l.annotator_id)?;
    }
    Ok(())
}

pub fn read_labels<R: Read>(mut input: R) -> Result<Vec<EventLabel>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
        }
        let start: f64 = fields[0].parse().map_err(|e| parse_err(format!("start_s: {e}")))?;
        let end: f64 = fields[1].parse().map_err(|e| parse_err(format!("end_s: {e}")))?;
        let category = fields[2].parse().map_err(|e: Error| parse_err(e.to_string()))?;
        let label = EventLabel::new(start, end, category, fields[3]).map_err(|e| parse_err(e.to_string()))?;
        labels.push(label);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_sequence(frames: usize, dim: usize, with_motion: bool) -> LatentSequence {
        let vectors = (0..frames)
            .map(|t| (0..dim).map(|k| ((t * 31 + k * 7) % 13) as f64 * 0.25 - 1.5).collect())
            .collect();
        let motion = with_motion.then(|| {
            (0..frames)
                .map(|t| MotionVector::new(t as f64 * 0.125, -(t as f64) * 0.0625))
                .collect()
        });
        LatentSequence::from_vectors(30.0, dim, vectors, motion).unwrap()
    }

    #[test]
    fn constant_map_pools_to_constant() {
        let c = [0.5, -2.0, 3.25];
        let mut map = FeatureMap::zeros(4, 5, 3).unwrap();
        for r in 0..4 {
            for col in 0..5 {
                map.patch_mut(r, col).copy_from_slice(&c);
            }
        }
        let z = pool_feature_map(&map).unwrap();
        assert_eq!(z.values, c.to_vec());
    }

    #[test]
    fn single_patch_is_divided_by_grid_size() {
        let mut map = FeatureMap::zeros(32, 32, 4).unwrap();
        map.patch_mut(7, 19)[2] = 3.0;
        let z = pool_feature_map(&map).unwrap();
        assert_eq!(z.values, vec![0.0, 0.0, 3.0 / 1024.0, 0.0]);
    }

    #[test]
    fn non_finite_map_is_rejected() {
        let mut map = FeatureMap::zeros(2, 2, 2).unwrap();
        map.patch_mut(1, 0)[1] = f64::NAN;
        let err = pool_feature_map(&map).unwrap_err();
        assert!(matches!(err, Error::NonFinite(ref s) if s.contains("row 1, col 0, channel 1")));
    }

    #[test]
    fn sequence_roundtrip_ten_frames() {
        let seq = sample_sequence(10, 8, false);
        let mut bytes = Vec::new();
        seq.write_to(&mut bytes).unwrap();
        let back = LatentSequence::read_from(&bytes[..], Some(8)).unwrap();
        assert_eq!(back, seq);
        for (t, f) in back.frames().iter().enumerate() {
            assert_eq!(f.frame_index, t);
            assert_eq!(f.timestamp_s, t as f64 / 30.0);
        }
    }

    #[test]
    fn roundtrip_with_motion_block() {
        let seq = sample_sequence(6, 3, true);
        let mut bytes = Vec::new();
        seq.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 21 + 6 * 3 * 4 + 5 + 6 * 8);
        let back = LatentSequence::read_from(&bytes[..], None).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn truncated_file_is_a_length_mismatch() {
        let seq = sample_sequence(10, 8, false);
        let mut bytes = Vec::new();
        seq.write_to(&mut bytes).unwrap();
        bytes.truncate(21 + 5 * 8 * 4 + 12);
        let err = LatentSequence::read_from(&bytes[..], None).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }), "{err:?}");
    }

    #[test]
    fn truncated_motion_block_is_a_length_mismatch() {
        let seq = sample_sequence(4, 2, true);
        let mut bytes = Vec::new();
        seq.write_to(&mut bytes).unwrap();
        bytes.pop();
        let err = LatentSequence::read_from(&bytes[..], None).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }), "{err:?}");
    }

    #[test]
    fn header_dim_differs_from_expected() {
        let seq = sample_sequence(3, 16, false);
        let mut bytes = Vec::new();
        seq.write_to(&mut bytes).unwrap();
        let err = LatentSequence::read_from(&bytes[..], Some(1024)).unwrap_err();
        assert!(matches!(
            err,
            Error::DimMismatch {
                expected: 1024,
                found: 16
            }
        ));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let err = LatentSequence::read_from(&b"LSEQ2\0\0\0\0"[..], None).unwrap_err();
        assert!(matches!(err, Error::BadMagic { expected: "LSEQ1" }));
        assert_ne!(err.code(), Error::LengthMismatch { expected: 0, found: 0 }.code());
    }

    #[test]
    fn feature_map_file_roundtrip() {
        let values = (0..2 * 3 * 2).map(|i| i as f64 * 0.5).collect();
        let map = FeatureMap::new(2, 3, 2, values).unwrap();
        let mut bytes = Vec::new();
        map.write_to(&mut bytes).unwrap();
        assert_eq!(FeatureMap::read_from(&bytes[..]).unwrap(), map);
    }

    #[test]
    fn labels_roundtrip_and_reject_bad_records() {
        let labels = vec![
            EventLabel::new(1.5, 2.0, Category::Environmental, "r01").unwrap(),
            EventLabel::new(10.0, 10.0, Category::Behavior, "r02").unwrap(),
        ];
        let mut text = Vec::new();
        write_labels(&labels, &mut text).unwrap();
        assert_eq!(read_labels(&text[..]).unwrap(), labels);

        let err = read_labels(&b"3.0\t1.0\tbehavior\tr1\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = read_labels(&b"# header\n1.0\t2.0\tfish\tr1\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
