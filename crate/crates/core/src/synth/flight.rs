//! Piecewise flight plan on a fixed 100 Hz tick grid.
//!
//! Translations and yaw turns follow a raised-cosine speed profile, so every
//! segment starts and ends at rest and a trapezoid sum over its ticks equals
//! the exact displacement.

use std::f64::consts::{PI, TAU};

use nalgebra::{Vector2, Vector3};

use crate::ingest::SlamEvent;

pub const TICK_HZ: u32 = 100;
/// Trajectory poses are written on every `POSE_STRIDE`-th tick.
pub const POSE_STRIDE: u64 = 5;

pub fn tick_time(k: u64) -> f64 {
    k as f64 / f64::from(TICK_HZ)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightState {
    pub position: Vector3<f64>,
    pub yaw: f64,
    /// Map-frame linear velocity, m/s.
    pub velocity: Vector3<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Motion {
    Hover,
    Move { to: Vector2<f64> },
    Turn { delta: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: u64,
    ticks: u64,
    motion: Motion,
    capture: bool,
    /// Pose when the segment begins.
    position: Vector2<f64>,
    yaw: f64,
}

#[derive(Debug, Clone)]
pub struct FlightPlan {
    altitude: f64,
    segments: Vec<Segment>,
    end_tick: u64,
    position: Vector2<f64>,
    yaw: f64,
    pub events: Vec<(u64, SlamEvent)>,
}

fn round_up_ticks(seconds: f64) -> u64 {
    let raw = (seconds * f64::from(TICK_HZ)).ceil() as u64;
    (raw.div_ceil(POSE_STRIDE) * POSE_STRIDE).max(2 * POSE_STRIDE)
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI { r - TAU } else { r }
}

impl FlightPlan {
    pub fn new(start: Vector2<f64>, yaw: f64, altitude: f64) -> Self {
        Self {
            altitude,
            segments: Vec::new(),
            end_tick: 0,
            position: start,
            yaw,
            events: Vec::new(),
        }
    }

    pub fn now(&self) -> u64 {
        self.end_tick
    }

    pub fn position(&self) -> Vector2<f64> {
        self.position
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    fn push(&mut self, ticks: u64, motion: Motion, capture: bool) {
        self.segments.push(Segment {
            start: self.end_tick,
            ticks,
            motion,
            capture,
            position: self.position,
            yaw: self.yaw,
        });
        self.end_tick += ticks;
    }

    pub fn hover(&mut self, seconds: f64) {
        if seconds > 0.0 {
            self.push(round_up_ticks(seconds), Motion::Hover, false);
        }
    }

    /// Straight move at the given mean speed.
    pub fn move_to(&mut self, to: Vector2<f64>, speed: f64, capture: bool) {
        let len = (to - self.position).norm();
        if len < 1e-12 {
            return;
        }
        self.push(round_up_ticks(len / speed), Motion::Move { to }, capture);
        self.position = to;
    }

    /// In-place turn to `yaw` along the shorter direction.
    pub fn turn_to(&mut self, yaw: f64, yaw_rate: f64) {
        let delta = wrap_angle(yaw - self.yaw);
        if delta.abs() < 1e-12 {
            return;
        }
        self.push(round_up_ticks(delta.abs() / yaw_rate), Motion::Turn { delta }, false);
        self.yaw = wrap_angle(self.yaw + delta);
    }

    pub fn event(&mut self, e: SlamEvent) {
        self.events.push((self.end_tick, e));
    }

    pub fn end_tick(&self) -> u64 {
        self.end_tick
    }

    /// State at tick `k`; ticks past the end hold the final state.
    pub fn state(&self, k: u64) -> FlightState {
        let idx = self.segments.partition_point(|s| s.start + s.ticks <= k);
        let Some(seg) = self.segments.get(idx) else {
            return self.at_rest(self.position, self.yaw);
        };
        let s = (k - seg.start) as f64 / seg.ticks as f64;
        let duration = seg.ticks as f64 / f64::from(TICK_HZ);
        let progress = s - (TAU * s).sin() / TAU;
        let rate = 1.0 - (TAU * s).cos();
        match seg.motion {
            Motion::Hover => self.at_rest(seg.position, seg.yaw),
            Motion::Move { to } => {
                let d = to - seg.position;
                let p = seg.position + d * progress;
                let v = d * (rate / duration);
                FlightState {
                    position: Vector3::new(p.x, p.y, self.altitude),
                    yaw: seg.yaw,
                    velocity: Vector3::new(v.x, v.y, 0.0),
                }
            }
            Motion::Turn { delta } => self.at_rest(seg.position, wrap_angle(seg.yaw + delta * progress)),
        }
    }

    fn at_rest(&self, p: Vector2<f64>, yaw: f64) -> FlightState {
        FlightState {
            position: Vector3::new(p.x, p.y, self.altitude),
            yaw,
            velocity: Vector3::zeros(),
        }
    }

    /// Pose ticks that fall inside capture segments, in time order.
    pub fn capture_ticks(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for seg in self.segments.iter().filter(|s| s.capture) {
            let mut k = seg.start.div_ceil(POSE_STRIDE) * POSE_STRIDE;
            while k <= seg.start + seg.ticks {
                if out.last() != Some(&k) {
                    out.push(k);
                }
                k += POSE_STRIDE;
            }
        }
        out
    }
}
