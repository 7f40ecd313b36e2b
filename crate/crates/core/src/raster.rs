//! Dense row-major rasters and the eight-channel grasp map stack.

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self { height, width, data: vec![value; height * width] }
    }

    /// Panics if `data.len() != height * width`.
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), height * width, "raster data length");
        Self { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

impl<T: Real> Raster<T> {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, T::zero())
    }
}

/// Boolean cell mask.
pub type Mask = Raster<bool>;

/// Channel order used by every serialized map stack.
pub const CHANNEL_NAMES: [&str; 8] = [
    "fingertip_score",
    "center_score",
    "fingertip_offset_x",
    "fingertip_offset_y",
    "center_offset_x",
    "center_offset_y",
    "sin",
    "cos",
];

/// Fingertip and center scores, their sub-cell offsets, and the per-fingertip
/// orientation encoded as sine/cosine. All channels share one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMaps<T> {
    pub fingertip_score: Raster<T>,
    pub center_score: Raster<T>,
    pub fingertip_offset_x: Raster<T>,
    pub fingertip_offset_y: Raster<T>,
    pub center_offset_x: Raster<T>,
    pub center_offset_y: Raster<T>,
    pub sin: Raster<T>,
    pub cos: Raster<T>,
}

/// Network-side view of the map stack.
pub type PredictionMaps<T> = GraspMaps<T>;

impl<T: Real> GraspMaps<T> {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::from_channels(std::array::from_fn(|_| Raster::zeros(height, width))).expect("uniform shapes")
    }

    /// Builds from channels in [`CHANNEL_NAMES`] order. Returns `None` on a
    /// shape mismatch.
    pub fn from_channels(channels: [Raster<T>; 8]) -> Option<Self> {
        let shape = channels[0].shape();
        if channels.iter().any(|c| c.shape() != shape) {
            return None;
        }
        let [fingertip_score, center_score, fingertip_offset_x, fingertip_offset_y, center_offset_x, center_offset_y, sin, cos] =
            channels;
        Some(Self {
            fingertip_score,
            center_score,
            fingertip_offset_x,
            fingertip_offset_y,
            center_offset_x,
            center_offset_y,
            sin,
            cos,
        })
    }

    pub fn height(&self) -> usize {
        self.fingertip_score.height()
    }

    pub fn width(&self) -> usize {
        self.fingertip_score.width()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.fingertip_score.shape()
    }

    pub fn channels(&self) -> [&Raster<T>; 8] {
        [
            &self.fingertip_score,
            &self.center_score,
            &self.fingertip_offset_x,
            &self.fingertip_offset_y,
            &self.center_offset_x,
            &self.center_offset_y,
            &self.sin,
            &self.cos,
        ]
    }

    pub fn channels_mut(&mut self) -> [&mut Raster<T>; 8] {
        [
            &mut self.fingertip_score,
            &mut self.center_score,
            &mut self.fingertip_offset_x,
            &mut self.fingertip_offset_y,
            &mut self.center_offset_x,
            &mut self.center_offset_y,
            &mut self.sin,
            &mut self.cos,
        ]
    }

    /// True when every channel has the same shape.
    pub fn is_consistent(&self) -> bool {
        let s = self.shape();
        self.channels().iter().all(|c| c.shape() == s)
    }

    /// Integer cell shift with zero fill: `out[r + dr][c + dc] = self[r][c]`.
    pub fn shifted(&self, d_row: isize, d_col: isize) -> Self {
        let (h, w) = self.shape();
        let mut out = Self::zeros(h, w);
        for (src, dst) in self.channels().into_iter().zip(out.channels_mut()) {
            for r in 0..h {
                for c in 0..w {
                    let (nr, nc) = (r as isize + d_row, c as isize + d_col);
                    if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w {
                        dst.set(nr as usize, nc as usize, src.get(r, c));
                    }
                }
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> GraspMaps<U> {
        let ch = self.channels().map(|c| c.map(|v| U::lit(v.as_f64())));
        GraspMaps::from_channels(ch).expect("uniform shapes")
    }
}
