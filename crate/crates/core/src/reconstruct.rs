use crate::error::Result;
use crate::grid::{StateWindow, TrafficSnapshot};

/// Any `f(·)` mapping a window of sparse measurements to a full snapshot.
pub trait Reconstructor: Send + Sync {
    /// Estimates the snapshot at the window's current timestamp.
    fn reconstruct(&self, window: &StateWindow) -> Result<TrafficSnapshot>;

    /// Number of trailing frames the reconstructor consumes.
    fn window_frames(&self) -> usize {
        1
    }
}

impl<R: Reconstructor + ?Sized> Reconstructor for &R {
    fn reconstruct(&self, window: &StateWindow) -> Result<TrafficSnapshot> {
        (**self).reconstruct(window)
    }

    fn window_frames(&self) -> usize {
        (**self).window_frames()
    }
}

impl<R: Reconstructor + ?Sized> Reconstructor for std::sync::Arc<R> {
    fn reconstruct(&self, window: &StateWindow) -> Result<TrafficSnapshot> {
        (**self).reconstruct(window)
    }

    fn window_frames(&self) -> usize {
        (**self).window_frames()
    }
}

impl<R: Reconstructor + ?Sized> Reconstructor for Box<R> {
    fn reconstruct(&self, window: &StateWindow) -> Result<TrafficSnapshot> {
        (**self).reconstruct(window)
    }

    fn window_frames(&self) -> usize {
        (**self).window_frames()
    }
}
