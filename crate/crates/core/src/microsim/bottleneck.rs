/// A flow-conserving bottleneck: a temporary, local increase of every
/// driver's desired time gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BottleneckSpec {
    /// Center of the plateau (m).
    pub center: f64,
    /// Length of each linear ramp; the plateau half-width is half of it (m).
    pub ramp_length: f64,
    /// Activation time (s).
    pub t_on: f64,
    /// Deactivation time (s).
    pub t_off: f64,
    pub gap_multiplier: f64,
}

impl BottleneckSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_on < self.t_off) {
            return Err(format!(
                "bottleneck.t_on ({}) must be earlier than bottleneck.t_off ({})",
                self.t_on, self.t_off
            ));
        }
        if !(self.gap_multiplier >= 1.0) {
            return Err(format!("bottleneck.gap_multiplier must be >= 1, got {}", self.gap_multiplier));
        }
        if !(self.ramp_length > 0.0) {
            return Err(format!("bottleneck.ramp_length must be > 0, got {}", self.ramp_length));
        }
        Ok(())
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_on && t <= self.t_off
    }

    /// Multiplier applied to the time gap at position `x` and time `t`.
    #[inline]
    pub fn multiplier(&self, x: f64, t: f64) -> f64 {
        if !self.is_active(t) {
            return 1.0;
        }
        let half = 0.5 * self.ramp_length;
        let d = (x - self.center).abs();
        if d <= half {
            self.gap_multiplier
        } else if d < half + self.ramp_length {
            let w = 1.0 - (d - half) / self.ramp_length;
            1.0 + (self.gap_multiplier - 1.0) * w
        } else {
            1.0
        }
    }
}

/// Time gap in effect at `(x, t)`: `time_gap` outside the bottleneck, scaled
/// by the multiplier on the plateau, linearly blended over the ramps.
pub fn effective_time_gap(time_gap: f64, x: f64, t: f64, bn: &BottleneckSpec) -> f64 {
    time_gap * bn.multiplier(x, t)
}
