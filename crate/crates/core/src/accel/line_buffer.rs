//! Rolling row buffer that turns a raster pixel stream into K x K windows.

/// Holds the last `kernel` rows of a (padded) feature map.
///
/// Pixels arrive in raster order. After `(K-1) * width + K` pixels the
/// buffer is primed and from then on every pixel that completes a window
/// yields one, so the compute array never waits for data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineBuffer {
    kernel: usize,
    width: usize,
    cin: usize,
    rows: Vec<i8>,
    fill_level: usize,
}

impl LineBuffer {
    pub fn new(kernel: usize, width: usize, cin: usize) -> Self {
        Self {
            kernel,
            width,
            cin,
            rows: vec![0; kernel * width * cin],
            fill_level: 0,
        }
    }

    /// Pixels consumed so far.
    pub fn fill_level(&self) -> usize {
        self.fill_level
    }

    /// Pixels needed before the first window is available.
    pub fn prefill_pixels(&self) -> usize {
        (self.kernel - 1) * self.width + self.kernel
    }

    pub fn is_primed(&self) -> bool {
        self.fill_level >= self.prefill_pixels()
    }

    /// Loads the next pixel (`cin` values). Returns the top-left corner of
    /// the window this pixel completes, if any.
    pub fn push(&mut self, pixel: &[i8]) -> Option<(usize, usize)> {
        debug_assert_eq!(pixel.len(), self.cin);
        let (py, px) = (self.fill_level / self.width, self.fill_level % self.width);
        let base = ((py % self.kernel) * self.width + px) * self.cin;
        self.rows[base..base + self.cin].copy_from_slice(pixel);
        self.fill_level += 1;
        let k = self.kernel - 1;
        (py >= k && px >= k).then(|| (py - k, px - k))
    }

    /// Copies the window with top-left corner `(oy, ox)` into `out`, laid
    /// out `[ky][kx][c]`. Only the most recently completed windows are
    /// still resident.
    pub fn window(&self, oy: usize, ox: usize, out: &mut [i8]) {
        let k = self.kernel;
        let span = k * self.cin;
        for ky in 0..k {
            let row = (oy + ky) % k;
            let src = (row * self.width + ox) * self.cin;
            out[ky * span..(ky + 1) * span].copy_from_slice(&self.rows[src..src + span]);
        }
    }
}
