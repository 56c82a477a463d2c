//! Reference jam fronts from the full simulated state: a binned speed field
//! thresholded at the congestion speed.

/// Lane-averaged speed on a space-time grid. `None` marks a cell that saw no
/// vehicle during the bin; it counts as free flow.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedField {
    pub cell_size: f64,
    pub bin_size: f64,
    pub n_cells: usize,
    pub n_bins: usize,
    cells: Vec<Option<f64>>,
}

impl SpeedField {
    pub fn speed(&self, bin: usize, cell: usize) -> Option<f64> {
        self.cells[bin * self.n_cells + cell]
    }

    pub fn row(&self, bin: usize) -> &[Option<f64>] {
        &self.cells[bin * self.n_cells..(bin + 1) * self.n_cells]
    }

    pub fn cell_center(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.cell_size
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_size
    }
}

/// Accumulates speed samples into a [`SpeedField`].
#[derive(Debug, Clone)]
pub struct SpeedFieldBuilder {
    cell_size: f64,
    bin_size: f64,
    n_cells: usize,
    n_bins: usize,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl SpeedFieldBuilder {
    pub fn new(road_length: f64, duration: f64, cell_size: f64, bin_size: f64) -> Self {
        let n_cells = (road_length / cell_size).ceil().max(1.0) as usize;
        let n_bins = (duration / bin_size).ceil().max(1.0) as usize;
        SpeedFieldBuilder {
            cell_size,
            bin_size,
            n_cells,
            n_bins,
            sum: vec![0.0; n_cells * n_bins],
            count: vec![0; n_cells * n_bins],
        }
    }

    /// Adds one vehicle sample; samples outside the grid are ignored.
    #[inline]
    pub fn add(&mut self, t: f64, x: f64, v: f64) {
        if t < 0.0 || x < 0.0 {
            return;
        }
        let cell = (x / self.cell_size) as usize;
        let bin = (t / self.bin_size) as usize;
        if cell >= self.n_cells || bin >= self.n_bins {
            return;
        }
        let k = bin * self.n_cells + cell;
        self.sum[k] += v;
        self.count[k] += 1;
    }

    pub fn finish(self) -> SpeedField {
        let cells = self
            .sum
            .iter()
            .zip(&self.count)
            .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
            .collect();
        SpeedField { cell_size: self.cell_size, bin_size: self.bin_size, n_cells: self.n_cells, n_bins: self.n_bins, cells }
    }
}

/// Vehicle positions and speeds at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub vehicles: Vec<(f64, f64)>,
}

/// Builds a speed field from snapshots; each cell holds the mean speed of
/// all vehicle samples that fell into it.
pub fn build_speed_field(
    snapshots: &[Snapshot],
    road_length: f64,
    duration: f64,
    cell_size: f64,
    bin_size: f64,
) -> SpeedField {
    let mut b = SpeedFieldBuilder::new(road_length, duration, cell_size, bin_size);
    for snap in snapshots {
        for &(x, v) in &snap.vehicles {
            b.add(snap.t, x, v);
        }
    }
    b.finish()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontSample {
    /// Bin center (s).
    pub t: f64,
    pub x_up: Option<f64>,
    pub x_down: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontTruth {
    pub bin_size: f64,
    pub samples: Vec<FrontSample>,
}

impl FrontTruth {
    /// Truth sample whose bin contains `t`.
    pub fn at(&self, t: f64) -> Option<&FrontSample> {
        if t < 0.0 {
            return None;
        }
        self.samples.get((t / self.bin_size) as usize)
    }
}

/// Congested cells in one bin separated by at most this many free cells
/// belong to one jam.
pub const BRIDGED_GAP_CELLS: usize = 2;

/// Cells with speed strictly below `threshold`.
pub fn congested_cells(row: &[Option<f64>], threshold: f64) -> Vec<bool> {
    row.iter().map(|s| matches!(s, Some(v) if *v < threshold)).collect()
}

/// Labels the connected congested regions of the whole space-time grid.
/// Within a bin, congested cells at most [`BRIDGED_GAP_CELLS`] apart are
/// connected; across bins, a cell connects to the same cell of the next bin.
/// Returns the per-cell label and the size of each region.
fn label_regions(congested: &[bool], n_bins: usize, n_cells: usize) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut label: Vec<Option<usize>> = vec![None; congested.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..congested.len() {
        if !congested[start] || label[start].is_some() {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        label[start] = Some(id);
        stack.push(start);
        while let Some(k) = stack.pop() {
            size += 1;
            let (bin, cell) = (k / n_cells, k % n_cells);
            let lo = cell.saturating_sub(BRIDGED_GAP_CELLS + 1);
            let hi = (cell + BRIDGED_GAP_CELLS + 1).min(n_cells - 1);
            let row = bin * n_cells;
            let spatial = (lo..=hi).filter(|&c| c != cell).map(|c| row + c);
            let temporal = [bin.checked_sub(1), (bin + 1 < n_bins).then_some(bin + 1)]
                .into_iter()
                .flatten()
                .map(|b| b * n_cells + cell);
            for n in spatial.chain(temporal) {
                if congested[n] && label[n].is_none() {
                    label[n] = Some(id);
                    stack.push(n);
                }
            }
        }
        sizes.push(size);
    }
    (label, sizes)
}

/// Upstream and downstream edge of the jam cells `first..=last` of one bin,
/// refined by linear interpolation of the threshold crossing between
/// neighboring cell centers. An empty neighbor puts the edge on the cell
/// boundary.
fn edges(row: &[Option<f64>], first: usize, last: usize, cell_size: f64, threshold: f64) -> (f64, f64) {
    let center = |i: usize| (i as f64 + 0.5) * cell_size;
    let x_up = match first.checked_sub(1).and_then(|j| row[j]) {
        Some(v_free) if v_free >= threshold => {
            let v_jam = row[first].expect("congested cell has a speed");
            center(first - 1) + (v_free - threshold) / (v_free - v_jam) * cell_size
        }
        _ => first as f64 * cell_size,
    };
    let x_down = match row.get(last + 1).copied().flatten() {
        Some(v_free) if v_free >= threshold => {
            let v_jam = row[last].expect("congested cell has a speed");
            center(last) + (threshold - v_jam) / (v_free - v_jam) * cell_size
        }
        _ => (last + 1) as f64 * cell_size,
    };
    (x_up, x_down)
}

/// Per-bin upstream and downstream fronts of the jam, taken as the largest
/// connected congested region of the space-time field. Stop-and-go waves
/// shed upstream by a bottleneck stay connected to it through time, so the
/// upstream front is the outer edge of the wave train.
pub fn extract_fronts(field: &SpeedField, threshold: f64) -> FrontTruth {
    assert!(threshold > 0.0, "threshold must be positive");
    let (n_bins, n_cells) = (field.n_bins, field.n_cells);
    let congested: Vec<bool> = (0..n_bins).flat_map(|b| congested_cells(field.row(b), threshold)).collect();
    let (label, sizes) = label_regions(&congested, n_bins, n_cells);
    // ties go to the earliest region found
    let jam = sizes.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).map(|(id, _)| id);
    let samples = (0..n_bins)
        .map(|bin| {
            let row = &label[bin * n_cells..(bin + 1) * n_cells];
            let mut members = (0..n_cells).filter(|&c| jam.is_some() && row[c] == jam);
            let first = members.next();
            let last = members.last().or(first);
            let (x_up, x_down) = match (first, last) {
                (Some(f), Some(l)) => {
                    let (u, d) = edges(field.row(bin), f, l, field.cell_size, threshold);
                    (Some(u), Some(d))
                }
                _ => (None, None),
            };
            FrontSample { t: field.bin_center(bin), x_up, x_down }
        })
        .collect();
    FrontTruth { bin_size: field.bin_size, samples }
}
