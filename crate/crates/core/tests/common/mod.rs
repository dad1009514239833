#![allow(dead_code)]

use std::collections::BTreeMap;

use ina_noc::analytic::LayerShape;
use ina_noc::dataflow::values::SyntheticValues;

/// Direct convolution over the synthetic tensors, mod 2^32, keyed by
/// (filter, output pixel).
pub fn conv_oracle(layer: &LayerShape, seed: u64) -> BTreeMap<(u32, u32), u32> {
    let v = SyntheticValues::new(layer, seed);
    let r = layer.kernel;
    let mut out = BTreeMap::new();
    for f in 0..layer.filters {
        for oy in 0..layer.output {
            for ox in 0..layer.output {
                let mut acc = 0u32;
                for ch in 0..layer.channels {
                    for ky in 0..r {
                        for kx in 0..r {
                            let w = v.weight(f, ch * r * r + ky * r + kx);
                            acc = acc.wrapping_add(w.wrapping_mul(v.input(ch, oy + ky, ox + kx)));
                        }
                    }
                }
                out.insert((f, oy * layer.output + ox), acc);
            }
        }
    }
    out
}
