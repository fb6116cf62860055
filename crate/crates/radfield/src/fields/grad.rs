//! Gradient accumulation for the manual backward passes.
//!
//! Each learnable array (two density grids, two hash grids, two MLP heads)
//! gets one lane. Grid lanes are touched sparsely per batch, so they track
//! which slots were written; MLP lanes are hit by every sample and skip the
//! bookkeeping.
//!
//! Two accumulation modes exist. The deterministic mode gives every ray
//! chunk its own `GradientBuffer` and merges them in chunk order, which is
//! bit-reproducible for any thread count. The fast mode scatters into one
//! `SharedGradientBuffer` through atomic compare-and-swap adds; summation
//! order then depends on scheduling and results are not bit-reproducible.

/// Identifies one learnable parameter array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    FgDensity,
    BgDensity,
    FgColor,
    BgColor,
    MlpVi,
    MlpVd,
}

pub const PARAM_GROUPS: [ParamGroup; 6] = [
    ParamGroup::FgDensity,
    ParamGroup::BgDensity,
    ParamGroup::FgColor,
    ParamGroup::BgColor,
    ParamGroup::MlpVi,
    ParamGroup::MlpVd,
];

impl ParamGroup {
    #[inline]
    pub fn index(self) -> usize {
        match self {
            ParamGroup::FgDensity => 0,
            ParamGroup::BgDensity => 1,
            ParamGroup::FgColor => 2,
            ParamGroup::BgColor => 3,
            ParamGroup::MlpVi => 4,
            ParamGroup::MlpVd => 5,
        }
    }

    /// Grid groups share the grid learning rate; MLP groups the MLP rate.
    pub fn is_grid(self) -> bool {
        !matches!(self, ParamGroup::MlpVi | ParamGroup::MlpVd)
    }
}

/// Destination of scattered gradients. Backward passes are generic over the
/// sink so the deterministic and atomic paths share one implementation.
pub trait GradientSink {
    fn add(&mut self, group: ParamGroup, idx: usize, value: f64);
}

/// One accumulator array plus (for sparse lanes) the touched-slot set.
#[derive(Debug, Clone)]
pub struct Lane {
    grad: Vec<f64>,
    touched: Vec<u32>,
    marked: Vec<bool>,
    dense: bool,
}

impl Lane {
    fn new(len: usize, dense: bool) -> Self {
        Self {
            grad: vec![0.0; len],
            touched: Vec::new(),
            marked: if dense { Vec::new() } else { vec![false; len] },
            dense,
        }
    }

    #[inline]
    fn add(&mut self, idx: usize, value: f64) {
        if !self.dense && !self.marked[idx] {
            self.marked[idx] = true;
            self.touched.push(idx as u32);
        }
        self.grad[idx] += value;
    }

    #[inline]
    pub fn grad(&self, idx: usize) -> f64 {
        self.grad[idx]
    }

    pub fn len(&self) -> usize {
        self.grad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad.is_empty()
    }

    pub fn is_dense(&self) -> bool {
        self.dense
    }

    /// Touched slot indices, in first-touch order. Empty for dense lanes
    /// (every slot counts as touched).
    pub fn touched(&self) -> &[u32] {
        &self.touched
    }

    pub fn grads(&self) -> &[f64] {
        &self.grad
    }

    fn clear(&mut self) {
        if self.dense {
            self.grad.fill(0.0);
        } else {
            for &i in &self.touched {
                self.grad[i as usize] = 0.0;
                self.marked[i as usize] = false;
            }
            self.touched.clear();
        }
    }
}

/// Per-worker gradient accumulator covering all parameter groups.
#[derive(Debug, Clone)]
pub struct GradientBuffer {
    lanes: [Lane; 6],
}

impl GradientBuffer {
    /// `sizes[g]` is the parameter count of group `g`; `dense[g]` disables
    /// touch tracking for that lane.
    pub fn new(sizes: [usize; 6], dense: [bool; 6]) -> Self {
        let mk = |g: ParamGroup| Lane::new(sizes[g.index()], dense[g.index()]);
        Self {
            lanes: [
                mk(ParamGroup::FgDensity),
                mk(ParamGroup::BgDensity),
                mk(ParamGroup::FgColor),
                mk(ParamGroup::BgColor),
                mk(ParamGroup::MlpVi),
                mk(ParamGroup::MlpVd),
            ],
        }
    }

    pub fn lane(&self, group: ParamGroup) -> &Lane {
        &self.lanes[group.index()]
    }

    /// Zeroes all accumulators (cheap: sparse lanes only revisit touched
    /// slots).
    pub fn clear(&mut self) {
        for lane in &mut self.lanes {
            lane.clear();
        }
    }

    /// Adds `other`'s accumulated gradients into `self`, in `other`'s
    /// touch order. Callers wanting reproducibility must merge buffers in a
    /// fixed order.
    pub fn merge_from(&mut self, other: &GradientBuffer) {
        for g in PARAM_GROUPS {
            let (src, dst) = (&other.lanes[g.index()], &mut self.lanes[g.index()]);
            debug_assert_eq!(src.len(), dst.len());
            if src.dense {
                for (i, &v) in src.grad.iter().enumerate() {
                    if v != 0.0 {
                        dst.add(i, v);
                    }
                }
            } else {
                for &i in &src.touched {
                    dst.add(i as usize, src.grad[i as usize]);
                }
            }
        }
    }
}

impl GradientSink for GradientBuffer {
    #[inline]
    fn add(&mut self, group: ParamGroup, idx: usize, value: f64) {
        self.lanes[group.index()].add(idx, value);
    }
}

#[cfg(feature = "parallel")]
mod shared {
    use super::{GradientBuffer, GradientSink, ParamGroup, PARAM_GROUPS};
    use std::sync::atomic::{AtomicU64, Ordering};

    fn atomic_add(cell: &AtomicU64, value: f64) {
        let mut current = cell.load(Ordering::Relaxed);
        loop {
            let next = (f64::from_bits(current) + value).to_bits();
            match cell.compare_exchange_weak(current, next, Ordering::Relaxed, Ordering::Relaxed)
            {
                Ok(_) => return,
                Err(actual) => current = actual,
            }
        }
    }

    /// Lock-free accumulator shared by all workers (fast mode).
    pub struct SharedGradientBuffer {
        lanes: [Vec<AtomicU64>; 6],
    }

    impl SharedGradientBuffer {
        pub fn new(sizes: [usize; 6]) -> Self {
            let mk = |len: usize| (0..len).map(|_| AtomicU64::new(0)).collect::<Vec<_>>();
            Self {
                lanes: [
                    mk(sizes[0]),
                    mk(sizes[1]),
                    mk(sizes[2]),
                    mk(sizes[3]),
                    mk(sizes[4]),
                    mk(sizes[5]),
                ],
            }
        }

        pub fn sink(&self) -> SharedSink<'_> {
            SharedSink { buf: self }
        }

        /// Drains nonzero entries into a plain buffer. Slots that happened
        /// to accumulate exactly zero are indistinguishable from untouched
        /// ones, which only matters for the lazy optimizer moments; fast
        /// mode already forgoes reproducibility.
        pub fn drain_into(&self, out: &mut GradientBuffer) {
            for g in PARAM_GROUPS {
                let lane = &self.lanes[g.index()];
                for (i, cell) in lane.iter().enumerate() {
                    let v = f64::from_bits(cell.swap(0, Ordering::Relaxed));
                    if v != 0.0 {
                        out.add(g, i, v);
                    }
                }
            }
        }
    }

    /// Borrowed handle implementing `GradientSink` via atomic adds.
    pub struct SharedSink<'a> {
        buf: &'a SharedGradientBuffer,
    }

    impl GradientSink for SharedSink<'_> {
        #[inline]
        fn add(&mut self, group: ParamGroup, idx: usize, value: f64) {
            atomic_add(&self.buf.lanes[group.index()][idx], value);
        }
    }
}

#[cfg(feature = "parallel")]
pub use shared::{SharedGradientBuffer, SharedSink};
