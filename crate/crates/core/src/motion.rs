//! Global ego-motion cue from dense optical flow, and context-vector assembly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent_io::FeatureMap;

/// Normalized global translation between consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionVector {
    pub mx: f64,
    pub my: f64,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { mx: 0.0, my: 0.0 };

    pub fn new(mx: f64, my: f64) -> Self {
        MotionVector { mx, my }
    }

    pub fn is_finite(&self) -> bool {
        self.mx.is_finite() && self.my.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.mx.hypot(self.my)
    }
}

/// Per-pixel displacement field, `height` rows by `width` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vx: Vec<f64>,
    vy: Vec<f64>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, vx: Vec<f64>, vy: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if vx.len() != n || vy.len() != n {
            return Err(Error::DimMismatch {
                expected: n,
                found: vx.len().min(vy.len()),
            });
        }
        if vx.iter().chain(&vy).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow field".into()));
        }
        Ok(FlowField { width, height, vx, vy })
    }

    pub fn uniform(width: usize, height: usize, u: f64, v: f64) -> Result<Self> {
        let n = width * height;
        Self::new(width, height, vec![u; n], vec![v; n])
    }

    /// Interpret a two-channel feature map (rows = height, cols = width) as flow.
    pub fn from_feature_map(map: &FeatureMap) -> Result<Self> {
        if map.depth() != 2 {
            return Err(Error::DimMismatch {
                expected: 2,
                found: map.depth(),
            });
        }
        let (vx, vy) = map.values().chunks_exact(2).map(|p| (p[0], p[1])).unzip();
        Self::new(map.cols(), map.rows(), vx, vy)
    }

    pub fn to_feature_map(&self) -> FeatureMap {
        let values = self.vx.iter().zip(&self.vy).flat_map(|(&x, &y)| [x, y]).collect();
        FeatureMap::new(self.height, self.width, 2, values).expect("flow shape is consistent")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn set(&mut self, x: usize, y: usize, vx: f64, vy: f64) {
        let i = y * self.width + x;
        self.vx[i] = vx;
        self.vy[i] = vy;
    }
}

/// Spatially average the flow and normalize by the field size.
pub fn pool_flow(flow: &FlowField) -> Result<MotionVector> {
    if flow.width == 0 || flow.height == 0 {
        return Err(Error::invalid("flow field has zero size"));
    }
    let n = (flow.width * flow.height) as f64;
    let mean_x = flow.vx.iter().sum::<f64>() / n;
    let mean_y = flow.vy.iter().sum::<f64>() / n;
    let m = MotionVector::new(mean_x / flow.width as f64, mean_y / flow.height as f64);
    if m.mx.abs() > 0.5 || m.my.abs() > 0.5 {
        log::warn!("implausible global motion ({}, {})", m.mx, m.my);
    }
    Ok(m)
}

/// Predictor variant: latent-only, or latent plus motion cue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Naive,
    Compensated,
}

impl Variant {
    pub fn input_dim(self, latent_dim: usize) -> usize {
        match self {
            Variant::Naive => latent_dim,
            Variant::Compensated => latent_dim + 2,
        }
    }
}

/// Assemble one predictor input: `z` for the naive variant, `[z, m]` for the
/// compensated one.
pub fn make_context_vector(z: &[f64], m: Option<MotionVector>, variant: Variant) -> Result<Vec<f64>> {
    match variant {
        Variant::Naive => Ok(z.to_vec()),
        Variant::Compensated => {
            let m = m.ok_or_else(|| Error::invalid("compensated predictor requires a motion track"))?;
            let mut c = Vec::with_capacity(z.len() + 2);
            c.extend_from_slice(z);
            c.push(m.mx);
            c.push(m.my);
            Ok(c)
        }
    }
}
