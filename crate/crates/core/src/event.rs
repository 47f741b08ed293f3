//! Events, sensor geometry and packets of events.

use crate::error::{Error, Result};

/// Sign of a log-intensity change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn from_sign(sign: i32) -> Option<Self> {
        match sign {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

/// A single camera measurement. Coordinates are pixels (fractional values are
/// allowed), the timestamp is in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(x: f64, y: f64, t: f64, polarity: Polarity) -> Self {
        Self { x, y, t, polarity }
    }

    /// Builds an event from an integer microsecond timestamp.
    pub fn from_micros(x: f64, y: f64, t_us: i64, polarity: Polarity) -> Self {
        Self::new(x, y, t_us as f64 * 1e-6, polarity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageGeometry {
    pub width: usize,
    pub height: usize,
}

impl ImageGeometry {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!("image geometry must be at least 1x1, got {width}x{height}")));
        }
        Ok(Self { width, height })
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.width as f64 - 1.0) * 0.5, (self.height as f64 - 1.0) * 0.5]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }
}

/// Where the reference time of a packet sits inside its time span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefTime {
    #[default]
    First,
    Midpoint,
}

/// A time-ordered group of events processed jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct EventPacket {
    pub events: Vec<Event>,
    pub geometry: ImageGeometry,
    pub t_ref: f64,
}

impl EventPacket {
    /// Creates a packet with `t_ref` at the first timestamp. No validation is
    /// performed; see [`validate_packet`].
    pub fn new(events: Vec<Event>, geometry: ImageGeometry) -> Self {
        let t_ref = events.first().map_or(0.0, |e| e.t);
        Self { events, geometry, t_ref }
    }

    pub fn with_ref_time(mut self, mode: RefTime) -> Self {
        self.t_ref = match mode {
            RefTime::First => self.t_first(),
            RefTime::Midpoint => 0.5 * (self.t_first() + self.t_last()),
        };
        self
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn t_first(&self) -> f64 {
        self.events.first().map_or(0.0, |e| e.t)
    }

    pub fn t_last(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t)
    }

    /// Duration covered by the packet in seconds.
    pub fn span(&self) -> f64 {
        self.t_last() - self.t_first()
    }
}

/// Sorts events by time, checks bounds and clamps `t_ref` into the packet's
/// time span. With `strict = false` out-of-bounds events are dropped instead
/// of reported.
pub fn validate_packet(mut packet: EventPacket, strict: bool) -> Result<EventPacket> {
    if packet.events.is_empty() {
        return Err(Error::EmptyPacket);
    }
    let geometry = packet.geometry;
    let outside: Vec<usize> = packet
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| !geometry.contains(e.x, e.y))
        .map(|(i, _)| i)
        .collect();
    if !outside.is_empty() {
        if strict {
            return Err(Error::OutOfBounds {
                indices: outside,
                width: geometry.width,
                height: geometry.height,
            });
        }
        packet.events.retain(|e| geometry.contains(e.x, e.y));
        if packet.events.is_empty() {
            return Err(Error::EmptyPacket);
        }
    }
    if packet.events.windows(2).any(|w| w[1].t < w[0].t) {
        packet.events.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    packet.t_ref = packet.t_ref.clamp(packet.t_first(), packet.t_last());
    Ok(packet)
}

/// Event-count based sliding windows. Packet `n` starts at event `n * stride`
/// and holds exactly `window` events; a trailing partial window is dropped.
pub fn sliding_windows(stream: &[Event], geometry: ImageGeometry, window: usize, stride: usize) -> Vec<EventPacket> {
    assert!(window >= 1 && stride >= 1, "window and stride must be >= 1");
    if stream.len() < window {
        return Vec::new();
    }
    (0..=stream.len() - window)
        .step_by(stride)
        .map(|start| EventPacket::new(stream[start..start + window].to_vec(), geometry))
        .collect()
}

/// Default stride: half a window, never less than one event.
pub fn default_stride(window: usize) -> usize {
    (window / 2).max(1)
}
