/// A single-sample activation volume, channel-major `(c, h, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Act {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Act {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w, data: vec![0.0; c * h * w] }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), c * h * w, "activation size");
        Self { c, h, w, data }
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn same_shape(&self, other: &Act) -> bool {
        (self.c, self.h, self.w) == (other.c, other.h, other.w)
    }

    pub fn add_assign(&mut self, other: &Act) {
        assert!(self.same_shape(other), "shape mismatch in add");
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    /// Stacks the channels of `self` then `other`.
    pub fn concat(&self, other: &Act) -> Act {
        assert_eq!((self.h, self.w), (other.h, other.w), "spatial mismatch in concat");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Act::from_vec(self.c + other.c, self.h, self.w, data)
    }

    /// Each scalar becomes a constant channel.
    pub fn broadcast(values: &[f64], h: usize, w: usize) -> Act {
        let data = values.iter().flat_map(|&v| std::iter::repeat(v).take(h * w)).collect();
        Act::from_vec(values.len(), h, w, data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
