use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{StlError, TemporalFormula};

/// Sampled robustness signal `rho^psi(x(t_k))` on a monotone time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessTrace {
    times: Arc<[f64]>,
    values: Vec<f64>,
}

impl RobustnessTrace {
    pub fn new(times: Arc<[f64]>, values: Vec<f64>) -> Result<Self, StlError> {
        if times.len() != values.len() || times.is_empty() {
            return Err(StlError::MalformedTrace {
                times: times.len(),
                values: values.len(),
            });
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn shared_times(&self) -> &Arc<[f64]> {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn start(&self) -> f64 {
        self.times[0]
    }

    fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    fn covers(&self, lo: f64, hi: f64) -> Result<(), StlError> {
        if self.start() <= lo + tol(lo) && self.end() >= hi - tol(hi) {
            Ok(())
        } else {
            Err(StlError::WindowNotCovered {
                need_lo: lo,
                need_hi: hi,
                have_lo: self.start(),
                have_hi: self.end(),
            })
        }
    }

    /// Inclusive index range of samples in `[lo, hi]` (with grid tolerance).
    fn window(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let first = self.times.partition_point(|&s| s < lo - tol(lo));
        let past = self.times.partition_point(|&s| s <= hi + tol(hi));
        (first < past).then(|| (first, past - 1))
    }
}

// Grid times are accumulated as k * dt, so window edges are compared with a
// relative slack well below any practical step.
fn tol(t: f64) -> f64 {
    1e-9 * t.abs().max(1.0)
}

/// How a monitor treats formula windows that reach past the end of a trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPolicy {
    /// The trace must cover the formula's entire window.
    #[default]
    Strict,
    /// For `F[a,b]G[c,d]`, only outer start times whose whole inner window
    /// lies inside the trace are considered; at least one must. `G` and `F`
    /// still require full coverage.
    Truncated,
}

/// Robustness of `phi` at time `t`, with strict window coverage.
pub fn monitor(phi: &TemporalFormula, trace: &RobustnessTrace, t: f64) -> Result<f64, StlError> {
    monitor_with(phi, trace, t, WindowPolicy::Strict)
}

/// Robustness of `phi` at time `t` using the continuous-time min/max
/// replaced by min/max over grid samples.
pub fn monitor_with(
    phi: &TemporalFormula,
    trace: &RobustnessTrace,
    t: f64,
    policy: WindowPolicy,
) -> Result<f64, StlError> {
    let values = trace.values();
    match phi {
        TemporalFormula::Always(i, _) | TemporalFormula::Eventually(i, _) => {
            let (lo, hi) = (t + i.start(), t + i.end());
            trace.covers(lo, hi)?;
            let (i0, i1) = trace.window(lo, hi).ok_or(StlError::WindowNotCovered {
                need_lo: lo,
                need_hi: hi,
                have_lo: trace.start(),
                have_hi: trace.end(),
            })?;
            let window = values[i0..=i1].iter().copied();
            Ok(if matches!(phi, TemporalFormula::Always(..)) {
                window.fold(f64::INFINITY, f64::min)
            } else {
                window.fold(f64::NEG_INFINITY, f64::max)
            })
        }
        TemporalFormula::EventuallyAlways { outer, inner, .. } => {
            let (olo, ohi) = (t + outer.start(), t + outer.end());
            let (ilo, ihi) = (inner.start(), inner.end());
            let outer_hi = match policy {
                WindowPolicy::Strict => {
                    trace.covers(olo + ilo, ohi + ihi)?;
                    ohi
                }
                WindowPolicy::Truncated => {
                    trace.covers(olo + ilo, olo + ihi)?;
                    ohi.min(trace.end() - ihi)
                }
            };
            eventually_always(trace, (olo, outer_hi), (ilo, ihi)).ok_or(
                StlError::WindowNotCovered {
                    need_lo: olo + ilo,
                    need_hi: olo + ihi,
                    have_lo: trace.start(),
                    have_hi: trace.end(),
                },
            )
        }
    }
}

/// `max_{t1 in outer} min_{s in [t1+c, t1+d]} rho(s)` with a monotone deque,
/// linear in the number of samples.
fn eventually_always(
    trace: &RobustnessTrace,
    (olo, ohi): (f64, f64),
    (ilo, ihi): (f64, f64),
) -> Option<f64> {
    let times = trace.times();
    let values = trace.values();
    let (j0, j1) = trace.window(olo, ohi)?;
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 0usize;
    let mut best: Option<f64> = None;
    for &t1 in &times[j0..=j1] {
        let (lo, hi) = (t1 + ilo, t1 + ihi);
        while next < times.len() && times[next] <= hi + tol(hi) {
            while deque.back().is_some_and(|&k| values[k] >= values[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&k| times[k] < lo - tol(lo)) {
            deque.pop_front();
        }
        if let Some(&k) = deque.front() {
            best = Some(best.map_or(values[k], |b: f64| b.max(values[k])));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{Interval, StateFormula};

    fn grid(n: usize, dt: f64) -> Arc<[f64]> {
        (0..n).map(|k| k as f64 * dt).collect::<Vec<_>>().into()
    }

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn always_on_constant_trace() {
        let tr = RobustnessTrace::new(grid(11, 1.0), vec![0.7; 11]).unwrap();
        let phi = TemporalFormula::Always(iv(0.0, 8.0), StateFormula::True);
        assert_eq!(monitor(&phi, &tr, 0.0).unwrap(), 0.7);
    }

    #[test]
    fn eventually_on_linear_ramp() {
        // Rises 0 -> 1 over [0, 10]; sampled at 0.1.
        let times = grid(101, 0.1);
        let values = times.iter().map(|t| t / 10.0).collect();
        let tr = RobustnessTrace::new(times, values).unwrap();
        let phi = TemporalFormula::Eventually(iv(0.0, 8.0), StateFormula::True);
        assert!((monitor(&phi, &tr, 0.0).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn uncovered_window_errors() {
        let tr = RobustnessTrace::new(grid(5, 1.0), vec![0.0; 5]).unwrap();
        let phi = TemporalFormula::Always(iv(0.0, 8.0), StateFormula::True);
        assert!(matches!(
            monitor(&phi, &tr, 0.0),
            Err(StlError::WindowNotCovered { .. })
        ));
    }

    #[test]
    fn eventually_always_truncated_vs_strict() {
        let tr = RobustnessTrace::new(grid(11, 1.0), (0..11).map(f64::from).collect()).unwrap();
        let phi = TemporalFormula::EventuallyAlways {
            outer: iv(0.0, 10.0),
            inner: iv(2.0, 5.0),
            body: StateFormula::True,
        };
        assert!(monitor(&phi, &tr, 0.0).is_err());
        // Outer start times 0..=5 fit; best inner minimum is at t1 = 5 -> 7.
        assert_eq!(
            monitor_with(&phi, &tr, 0.0, WindowPolicy::Truncated).unwrap(),
            7.0
        );
    }
}
