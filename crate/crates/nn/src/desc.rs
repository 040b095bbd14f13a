use serde::{Deserialize, Serialize};

/// Static description of one layer, for cost accounting.
///
/// `out_elems` counts every output scalar (channels × positions);
/// `kernel` lists the kernel extent per spatial or temporal axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDesc {
    pub kind: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: Vec<usize>,
    pub out_elems: usize,
}

impl LayerDesc {
    pub fn new(kind: &str, in_channels: usize, out_channels: usize, kernel: Vec<usize>, out_elems: usize) -> Self {
        Self { kind: kind.to_string(), in_channels, out_channels, kernel, out_elems }
    }

    pub fn kernel_volume(&self) -> usize {
        self.kernel.iter().product()
    }
}
