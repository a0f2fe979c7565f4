//! Request-arrival traces: synthetic generation from a piecewise sinusoidal
//! rate profile and a two-column text format for external traces.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::WorkloadError;

/// Stream index for workload randomness; exploration uses a different one.
pub const WORKLOAD_STREAM: u64 = 1;

/// Default work per request, in millions of instructions.
pub const DEFAULT_WORK_MI: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    /// Seconds since the start of the trace.
    pub arrival_time: f64,
    /// Millions of instructions.
    pub work: f64,
    pub start_time: Option<f64>,
    pub finish_time: Option<f64>,
}

impl Request {
    pub fn new(id: u64, arrival_time: f64, work: f64) -> Request {
        Request {
            id,
            arrival_time,
            work,
            start_time: None,
            finish_time: None,
        }
    }

    pub fn response_time(&self) -> Option<f64> {
        self.finish_time.map(|f| f - self.arrival_time)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadTrace {
    /// Sorted by arrival time; ids follow that order.
    pub requests: Vec<Request>,
    pub duration: f64,
}

impl WorkloadTrace {
    /// Builds a trace from `(arrival, work)` pairs, sorting by arrival and
    /// numbering requests in that order.
    pub fn from_arrivals(mut arrivals: Vec<(f64, f64)>, duration: f64) -> WorkloadTrace {
        arrivals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let max_arrival = arrivals.last().map_or(0.0, |a| a.0);
        let requests = arrivals
            .into_iter()
            .enumerate()
            .map(|(i, (t, w))| Request::new(i as u64, t, w))
            .collect();
        WorkloadTrace {
            requests,
            duration: duration.max(max_arrival),
        }
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalMode {
    Deterministic,
    Poisson,
}

/// One piece of a rate profile. The instantaneous rate is
/// `base_rate + amplitude * sin(2*pi*t / period)` with `t` in absolute
/// seconds, clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSegment {
    pub start: f64,
    pub end: f64,
    pub base_rate: f64,
    pub amplitude: f64,
    pub period: f64,
}

impl RateSegment {
    pub fn constant(start: f64, end: f64, rate: f64) -> RateSegment {
        RateSegment {
            start,
            end,
            base_rate: rate,
            amplitude: 0.0,
            period: 0.0,
        }
    }

    fn is_flat(&self) -> bool {
        self.amplitude == 0.0 || self.period <= 0.0
    }

    fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        if self.is_flat() {
            return self.base_rate.max(0.0);
        }
        (self.base_rate + self.amplitude * (self.omega() * t).sin()).max(0.0)
    }

    /// Upper bound on the rate within the segment.
    fn peak_rate(&self) -> f64 {
        if self.is_flat() {
            self.base_rate.max(0.0)
        } else {
            (self.base_rate + self.amplitude.abs()).max(0.0)
        }
    }

    /// Integral of the clamped rate over `[t0, t1]`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        if self.is_flat() {
            return self.base_rate.max(0.0) * (t1 - t0);
        }
        let b = self.base_rate;
        let amp = self.amplitude.abs();
        let omega = self.omega();
        if b >= amp {
            return b * (t1 - t0)
                - (self.amplitude / omega) * ((omega * t1).cos() - (omega * t0).cos());
        }
        if b <= -amp {
            return 0.0;
        }
        // a*sin(wt) == amp*sin(wt + shift); the positive lobe of
        // b + amp*sin(psi) spans [lo, hi] in every 2*pi period.
        let shift = if self.amplitude > 0.0 { 0.0 } else { PI };
        let lo = (-b / amp).asin();
        let hi = PI - lo;
        let lobe = b * (hi - lo) + amp * (lo.cos() - hi.cos());
        let antiderivative = |psi: f64| {
            let k = ((psi - lo) / (2.0 * PI)).floor();
            let r = psi - lo - 2.0 * PI * k;
            let m = r.min(hi - lo);
            k * lobe + b * m + amp * (lo.cos() - (lo + m).cos())
        };
        (antiderivative(omega * t1 + shift) - antiderivative(omega * t0 + shift)) / omega
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub segments: Vec<RateSegment>,
    pub arrival_mode: ArrivalMode,
    /// Work per generated request, in MI.
    pub work: f64,
}

impl RateProfile {
    pub fn new(segments: Vec<RateSegment>, arrival_mode: ArrivalMode) -> RateProfile {
        RateProfile {
            segments,
            arrival_mode,
            work: DEFAULT_WORK_MI,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.segments.is_empty() {
            return Err(WorkloadError::EmptyProfile);
        }
        if !(self.work.is_finite() && self.work > 0.0) {
            return Err(WorkloadError::InvalidSegment {
                index: 0,
                reason: format!("work per request must be positive, got {}", self.work),
            });
        }
        for (index, seg) in self.segments.iter().enumerate() {
            let bad = |reason: String| WorkloadError::InvalidSegment { index, reason };
            let fields = [seg.start, seg.end, seg.base_rate, seg.amplitude, seg.period];
            if fields.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite field".into()));
            }
            if seg.start < 0.0 || seg.end <= seg.start {
                return Err(bad(format!("bad bounds [{}, {}]", seg.start, seg.end)));
            }
            if seg.base_rate < 0.0 {
                return Err(bad(format!("negative base rate {}", seg.base_rate)));
            }
            if seg.amplitude != 0.0 && seg.period <= 0.0 {
                return Err(bad("a non-zero amplitude needs a positive period".into()));
            }
            if index > 0 && self.segments[index - 1].end != seg.start {
                return Err(bad("segments must be contiguous".into()));
            }
        }
        Ok(())
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| s.start <= t && t < s.end)
            .map_or(0.0, |s| s.rate_at(t))
    }

    /// Expected number of arrivals in `[0, duration]`.
    pub fn expected_arrivals(&self, duration: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| s.integral(s.start.min(duration), s.end.min(duration)))
            .sum()
    }

    /// Reads a profile from TOML text: `mode`, optional `work`, optional
    /// `duration`, and `segments` as `[start, end, base, amplitude, period]`
    /// rows. Returns the profile and the duration, if given.
    pub fn from_toml(text: &str) -> Result<(RateProfile, Option<f64>), WorkloadError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            mode: ArrivalMode,
            #[serde(default)]
            work: Option<f64>,
            #[serde(default)]
            duration: Option<f64>,
            segments: Vec<[f64; 5]>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| WorkloadError::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            reason: e.message().to_string(),
        })?;
        let segments = raw
            .segments
            .iter()
            .map(|&[start, end, base_rate, amplitude, period]| RateSegment {
                start,
                end,
                base_rate,
                amplitude,
                period,
            })
            .collect();
        let profile = RateProfile {
            segments,
            arrival_mode: raw.mode,
            work: raw.work.unwrap_or(DEFAULT_WORK_MI),
        };
        profile.validate()?;
        Ok((profile, raw.duration))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Generates an arrival trace over `[0, duration]`.
///
/// Deterministic mode places the n-th arrival where the cumulative rate
/// integral reaches n, so a constant rate `r` gives arrivals at `k / r`.
/// Poisson mode samples a non-homogeneous Poisson process by thinning
/// against each segment's peak rate.
pub fn generate_trace(
    profile: &RateProfile,
    duration: f64,
    seed: u64,
) -> Result<WorkloadTrace, WorkloadError> {
    if !(duration > 0.0) {
        return Err(WorkloadError::NonPositiveDuration(duration));
    }
    profile.validate()?;
    let arrivals = match profile.arrival_mode {
        ArrivalMode::Deterministic => deterministic_arrivals(profile, duration),
        ArrivalMode::Poisson => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(WORKLOAD_STREAM);
            poisson_arrivals(profile, duration, &mut rng)
        }
    };
    let requests = arrivals
        .into_iter()
        .enumerate()
        .map(|(i, t)| Request::new(i as u64, t, profile.work))
        .collect();
    Ok(WorkloadTrace { requests, duration })
}

fn deterministic_arrivals(profile: &RateProfile, duration: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut acc = 0.0_f64;
    for seg in &profile.segments {
        let (s, e) = (seg.start.min(duration), seg.end.min(duration));
        if e <= s {
            continue;
        }
        let total = seg.integral(s, e);
        let mut next = acc.floor() + 1.0;
        let mut lo = s;
        while acc + total >= next {
            let need = next - acc;
            let t = if seg.is_flat() {
                s + need / seg.base_rate
            } else {
                invert_integral(seg, s, lo, e, need)
            };
            let t = t.min(e);
            out.push(t);
            lo = t;
            next += 1.0;
        }
        acc += total;
    }
    out
}

/// Smallest `t` in `[lo, hi]` with `seg.integral(start, t) >= need`.
fn invert_integral(seg: &RateSegment, start: f64, mut lo: f64, mut hi: f64, need: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= 1e-9 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if seg.integral(start, mid) >= need {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn poisson_arrivals(profile: &RateProfile, duration: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::new();
    for seg in &profile.segments {
        let (s, e) = (seg.start.min(duration), seg.end.min(duration));
        let peak = seg.peak_rate();
        if e <= s || peak <= 0.0 {
            continue;
        }
        let gap = Exp::new(peak).expect("peak rate is positive");
        let mut t = s;
        loop {
            t += gap.sample(rng);
            if t > e {
                break;
            }
            let u: f64 = rng.random();
            if u * peak <= seg.rate_at(t) {
                out.push(t);
            }
        }
    }
    out
}

/// Parses the two-column trace format: `arrival_seconds work_mi` per line,
/// `#` comments, blank lines ignored. A `# duration <seconds>` comment sets
/// the trace duration.
pub fn parse_trace(text: &str) -> Result<WorkloadTrace, WorkloadError> {
    let mut arrivals = Vec::new();
    let mut duration = 0.0_f64;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            if words.next() == Some("duration") {
                if let Some(Ok(d)) = words.next().map(str::parse::<f64>) {
                    duration = duration.max(d);
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(WorkloadError::Parse {
                line: line_no,
                reason: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| WorkloadError::Parse {
                line: line_no,
                reason: format!("not a number: {s:?}"),
            })
        };
        let (arrival, work) = (parse(fields[0])?, parse(fields[1])?);
        if !arrival.is_finite() || arrival < 0.0 {
            return Err(WorkloadError::Validation {
                line: line_no,
                reason: format!("arrival time must be non-negative, got {arrival}"),
            });
        }
        if !work.is_finite() || work <= 0.0 {
            return Err(WorkloadError::Validation {
                line: line_no,
                reason: format!("work must be positive, got {work}"),
            });
        }
        arrivals.push((arrival, work));
    }
    Ok(WorkloadTrace::from_arrivals(arrivals, duration))
}

pub fn serialize_trace(trace: &WorkloadTrace) -> String {
    let mut out = String::with_capacity(trace.len() * 24 + 32);
    let _ = writeln!(out, "# duration {}", trace.duration);
    let _ = writeln!(out, "# arrival_s work_mi");
    for r in &trace.requests {
        let _ = writeln!(out, "{} {}", r.arrival_time, r.work);
    }
    out
}

pub fn read_trace_file(path: &Path) -> std::io::Result<Result<WorkloadTrace, WorkloadError>> {
    std::fs::read_to_string(path).map(|text| parse_trace(&text))
}
