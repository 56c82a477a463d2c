use crate::probe::FcdRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrontDirection {
    /// The probe slowed down: it crossed the upstream front.
    EnterJam,
    /// The probe sped up again: it crossed the downstream front.
    LeaveJam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontCrossingEvent {
    pub probe_id: u64,
    pub t: f64,
    pub x: f64,
    pub direction: FrontDirection,
    pub t_available: f64,
}

/// Runs the free/jammed state machine over one probe's records (in record
/// order). The probe starts free and becomes jammed below `v_down`. A jammed
/// probe faster than `v_up` has left the jam once it then goes
/// `leave_confirm` seconds without a record below `v_down`. The exit event
/// keeps the time and place of the first fast record but is only available
/// with the confirming record, so a probe whose records end before the
/// confirmation reports no exit. Until then the probe counts as still
/// jammed, so passing through a train of stop-and-go waves yields one entry
/// and one exit.
pub fn detect_front_crossings(records: &[FcdRecord], v_down: f64, v_up: f64, leave_confirm: f64) -> Vec<FrontCrossingEvent> {
    assert!(v_up > v_down, "hysteresis needs v_up > v_down");
    assert!(leave_confirm >= 0.0, "leave_confirm must be >= 0");
    let event = |r: &FcdRecord, direction, t_available| FrontCrossingEvent {
        probe_id: r.probe_id,
        t: r.t_record,
        x: r.x,
        direction,
        t_available,
    };
    let mut jammed = false;
    let mut leaving: Option<&FcdRecord> = None;
    let mut out = Vec::new();
    for r in records {
        if !jammed {
            if r.v < v_down {
                jammed = true;
                out.push(event(r, FrontDirection::EnterJam, r.t_available));
            }
            continue;
        }
        if r.v < v_down {
            leaving = None;
        } else if leaving.is_none() && r.v > v_up {
            leaving = Some(r);
        }
        if let Some(first) = leaving {
            if r.t_record - first.t_record >= leave_confirm {
                out.push(event(first, FrontDirection::LeaveJam, r.t_available.max(first.t_available)));
                jammed = false;
                leaving = None;
            }
        }
    }
    out
}
