//! Keypoint geometry and its 7-byte quantized form.
//!
//! x and y are normalized by the frame size and stored in 16 bits each; orientation
//! covers [-π, π) in 8 bits; log₂-scale covers [-2, 8] in 8 bits, clamped.

use std::f32::consts::PI;

pub const LOG_SCALE_MIN: f32 = -2.0;
pub const LOG_SCALE_MAX: f32 = 8.0;

/// Frame dimensions in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameSize {
    pub width: f32,
    pub height: f32,
}

impl FrameSize {
    pub fn new(width: f32, height: f32) -> Self {
        Self { width, height }
    }

    pub fn diagonal(&self) -> f32 {
        self.width.hypot(self.height)
    }
}

impl Default for FrameSize {
    fn default() -> Self {
        Self::new(640.0, 480.0)
    }
}

/// Raw keypoint geometry: pixel position, orientation in radians, log₂ scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    pub x: f32,
    pub y: f32,
    pub theta: f32,
    pub log_scale: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuantizedGeometry {
    pub qx: u16,
    pub qy: u16,
    pub qtheta: u8,
    pub qscale: u8,
}

/// Wraps an angle into [-π, π).
pub fn wrap_angle(theta: f32) -> f32 {
    let two_pi = 2.0 * PI;
    let mut t = (theta + PI).rem_euclid(two_pi) - PI;
    // rem_euclid can round up to exactly 2π
    if t >= PI {
        t -= two_pi;
    }
    t
}

fn quantize_unit(v: f32, levels: u32) -> u32 {
    let q = (v * levels as f32).floor();
    q.clamp(0.0, (levels - 1) as f32) as u32
}

impl QuantizedGeometry {
    pub fn quantize(kp: &Keypoint, frame: FrameSize) -> Self {
        let theta = wrap_angle(kp.theta);
        let ls = kp.log_scale.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX);
        Self {
            qx: quantize_unit(kp.x / frame.width, 1 << 16) as u16,
            qy: quantize_unit(kp.y / frame.height, 1 << 16) as u16,
            qtheta: quantize_unit((theta + PI) / (2.0 * PI), 256) as u8,
            qscale: quantize_unit((ls - LOG_SCALE_MIN) / (LOG_SCALE_MAX - LOG_SCALE_MIN), 256)
                as u8,
        }
    }

    /// Bin centers of each quantized field.
    pub fn dequantize(&self, frame: FrameSize) -> Keypoint {
        Keypoint {
            x: (self.qx as f32 + 0.5) / 65536.0 * frame.width,
            y: (self.qy as f32 + 0.5) / 65536.0 * frame.height,
            theta: -PI + (self.qtheta as f32 + 0.5) * (2.0 * PI / 256.0),
            log_scale: LOG_SCALE_MIN
                + (self.qscale as f32 + 0.5) * ((LOG_SCALE_MAX - LOG_SCALE_MIN) / 256.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_within_one_step(
            x in 0.0f32..640.0, y in 0.0f32..480.0, theta in -10.0f32..10.0, ls in LOG_SCALE_MIN..LOG_SCALE_MAX,
        ) {
            let frame = FrameSize::default();
            let kp = Keypoint { x, y, theta, log_scale: ls };
            let back = QuantizedGeometry::quantize(&kp, frame).dequantize(frame);
            let diag = frame.diagonal();
            prop_assert!((back.x - x).abs() <= diag / 65536.0);
            prop_assert!((back.y - y).abs() <= diag / 65536.0);
            let dt = wrap_angle(back.theta - theta).abs();
            prop_assert!(dt <= 2.0 * PI / 256.0 + 1e-5);
            prop_assert!((back.log_scale - ls).abs() <= (LOG_SCALE_MAX - LOG_SCALE_MIN) / 256.0 + 1e-5);
        }
    }

    #[test]
    fn wrapping_lands_in_half_open_range() {
        for t in [-PI, PI, 3.0 * PI, -3.0 * PI, 0.0, 7.5, -7.5] {
            let w = wrap_angle(t);
            assert!((-PI..PI).contains(&w), "{t} -> {w}");
        }
        assert_eq!(wrap_angle(PI), -PI);
    }

    #[test]
    fn out_of_range_values_clamp() {
        let frame = FrameSize::default();
        let q = QuantizedGeometry::quantize(
            &Keypoint {
                x: 700.0,
                y: -3.0,
                theta: 0.0,
                log_scale: 20.0,
            },
            frame,
        );
        assert_eq!((q.qx, q.qy, q.qscale), (u16::MAX, 0, 255));
    }
}
