use crate::units::SECONDS_PER_HOUR;

/// One aggregation interval of a virtual cross-section detector, summed
/// over all lanes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSample {
    pub detector_x: f64,
    pub interval_start: f64,
    pub interval_length: f64,
    pub count: u32,
    /// Lane-aggregated flow (veh/h).
    pub flow: f64,
}

impl DetectorSample {
    pub fn interval_end(&self) -> f64 {
        self.interval_start + self.interval_length
    }
}

/// Counts the passages with time in `[start, end)`.
pub fn detector_measure(passages: &[f64], detector_x: f64, start: f64, end: f64) -> DetectorSample {
    let count = passages.iter().filter(|&&t| t >= start && t < end).count() as u32;
    let interval_length = end - start;
    DetectorSample {
        detector_x,
        interval_start: start,
        interval_length,
        count,
        flow: count as f64 * SECONDS_PER_HOUR / interval_length,
    }
}

/// Consecutive, equally long aggregates of one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSeries {
    pub detector_x: f64,
    pub samples: Vec<DetectorSample>,
}

impl DetectorSeries {
    /// Aggregates passage times into back-to-back intervals covering
    /// `[0, duration)`. A trailing partial interval is dropped.
    pub fn aggregate(passages: &[f64], detector_x: f64, interval: f64, duration: f64) -> Self {
        let n = (duration / interval + 1e-9).floor() as usize;
        let mut counts = vec![0u32; n];
        for &t in passages {
            let k = (t / interval).floor();
            if k >= 0.0 && (k as usize) < n {
                counts[k as usize] += 1;
            }
        }
        let samples = counts
            .into_iter()
            .enumerate()
            .map(|(k, count)| DetectorSample {
                detector_x,
                interval_start: k as f64 * interval,
                interval_length: interval,
                count,
                flow: count as f64 * SECONDS_PER_HOUR / interval,
            })
            .collect();
        DetectorSeries { detector_x, samples }
    }

    /// Lane-aggregated flow known at time `t`: the most recent interval that
    /// has been completed by `t`, or zero while none has.
    pub fn flow_at(&self, t: f64) -> f64 {
        let done = self.samples.partition_point(|s| s.interval_end() <= t);
        done.checked_sub(1).map_or(0.0, |i| self.samples[i].flow)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_interval_has_zero_flow() {
        let s = detector_measure(&[], 2000.0, 0.0, 60.0);
        assert_eq!(s.count, 0);
        assert_eq!(s.flow, 0.0);
    }

    #[test]
    fn thirty_per_minute_is_1800_per_hour() {
        let passages: Vec<f64> = (0..30).map(|i| i as f64 * 2.0).collect();
        let s = detector_measure(&passages, 2000.0, 0.0, 60.0);
        assert_eq!(s.count, 30);
        assert_eq!(s.flow, 1800.0);
    }

    #[test]
    fn three_lanes_at_two_second_headways() {
        let mut passages = Vec::new();
        for lane in 0..3 {
            passages.extend((0..30).map(|i| i as f64 * 2.0 + 0.1 * lane as f64));
        }
        let s = detector_measure(&passages, 2000.0, 0.0, 60.0);
        assert_eq!(s.count, 90);
        assert_eq!(s.flow, 5400.0);
    }

    #[test]
    fn interval_is_half_open() {
        let s = detector_measure(&[0.0, 59.999, 60.0], 0.0, 0.0, 60.0);
        assert_eq!(s.count, 2);
    }

    #[test]
    fn series_hold_uses_completed_intervals() {
        let passages = [10.0, 70.0, 80.0, 130.0, 140.0, 150.0];
        let series = DetectorSeries::aggregate(&passages, 0.0, 60.0, 180.0);
        let flows: Vec<f64> = series.samples.iter().map(|s| s.flow).collect();
        assert_eq!(flows, vec![60.0, 120.0, 180.0]);
        assert_eq!(series.flow_at(30.0), 0.0);
        assert_eq!(series.flow_at(60.0), 60.0);
        assert_eq!(series.flow_at(119.9), 60.0);
        assert_eq!(series.flow_at(120.0), 120.0);
        assert_eq!(series.flow_at(1e6), 180.0);
    }
}
