//! Pool a backbone feature map into one latent state and a flow field into
//! one motion vector.

use surprise_core::latent_io::{pool_feature_map, FeatureMap};
use surprise_core::motion::{make_context_vector, pool_flow, FlowField, Variant};

fn main() -> surprise_core::Result<()> {
    // 4x6 grid of 3-d patch features
    let (rows, cols, depth) = (4, 6, 3);
    let values: Vec<f64> = (0..rows * cols * depth).map(|i| (i % 7) as f64 * 0.1).collect();
    let map = FeatureMap::new(rows, cols, depth, values)?;
    let z = pool_feature_map(&map)?;
    println!("pooled latent ({}-d): {:?}", z.dim(), z.values);

    // camera panning right with a small object moving the other way
    let mut flow = FlowField::uniform(32, 24, 1.5, 0.0)?;
    for y in 10..14 {
        for x in 10..14 {
            flow.set(x, y, -4.0, 0.5);
        }
    }
    let m = pool_flow(&flow)?;
    println!("global motion: ({:.4}, {:.4})", m.mx, m.my);

    for variant in [Variant::Naive, Variant::Compensated] {
        let ctx = make_context_vector(&z.values, Some(m), variant)?;
        println!("{variant:?} context vector has {} entries", ctx.len());
    }
    Ok(())
}
