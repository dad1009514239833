//! Deterministic synthetic weights and input activations.
//!
//! Values are hashed from (seed, coordinates) so any element can be produced
//! on demand without materialising whole tensors.

use crate::analytic::LayerShape;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u32 {
    let h = parts.iter().fold(0u64, |acc, &p| splitmix(acc ^ p));
    (h >> 32) as u32
}

#[derive(Debug, Clone)]
pub struct SyntheticValues {
    seed: u64,
    kernel: u32,
    output: u32,
}

impl SyntheticValues {
    pub fn new(layer: &LayerShape, seed: u64) -> Self {
        Self { seed, kernel: layer.kernel, output: layer.output }
    }

    /// Weight `element` (flattened channel-major, then kernel row, column) of `filter`.
    pub fn weight(&self, filter: u32, element: u32) -> u32 {
        mix(&[self.seed, 1, filter as u64, element as u64])
    }

    /// Input activation at channel `ch`, row `y`, column `x` of the input map.
    pub fn input(&self, ch: u32, y: u32, x: u32) -> u32 {
        mix(&[self.seed, 2, ch as u64, y as u64, x as u64])
    }

    /// Input element that weight `element` multiplies for output `pixel`.
    pub fn input_for(&self, pixel: u32, element: u32) -> u32 {
        let r = self.kernel;
        let (ch, ky, kx) = (element / (r * r), (element / r) % r, element % r);
        let (oy, ox) = (pixel / self.output, pixel % self.output);
        self.input(ch, oy + ky, ox + kx)
    }

    /// Wrapping dot product of `filter` with the input patch of `pixel`
    /// over weight elements `lo..hi`.
    pub fn partial_sum(&self, filter: u32, pixel: u32, lo: u32, hi: u32) -> u32 {
        (lo..hi).fold(0u32, |acc, el| acc.wrapping_add(self.weight(filter, el).wrapping_mul(self.input_for(pixel, el))))
    }
}
