use std::f64::consts::{PI, SQRT_2};

/// Second-order IIR section, transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Butterworth (Q = 1/sqrt 2) high-pass from the audio-EQ cookbook.
    pub fn butterworth_highpass(cutoff_hz: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 / SQRT_2);
        let a0 = 1.0 + alpha;
        Self {
            b: [
                (1.0 + cos) / 2.0 / a0,
                -(1.0 + cos) / a0,
                (1.0 + cos) / 2.0 / a0,
            ],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    pub fn process(&self, input: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for x in input.iter_mut() {
            let y = self.b[0] * *x + z1;
            z1 = self.b[1] * *x - self.a[0] * y + z2;
            z2 = self.b[2] * *x - self.a[1] * y;
            *x = y;
        }
    }

    /// Squared magnitude response at `freq_hz`.
    pub fn power_response(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let (re_num, im_num) = (
            self.b[0] + self.b[1] * w.cos() + self.b[2] * (2.0 * w).cos(),
            -(self.b[1] * w.sin() + self.b[2] * (2.0 * w).sin()),
        );
        let (re_den, im_den) = (
            1.0 + self.a[0] * w.cos() + self.a[1] * (2.0 * w).cos(),
            -(self.a[0] * w.sin() + self.a[1] * (2.0 * w).sin()),
        );
        (re_num * re_num + im_num * im_num) / (re_den * re_den + im_den * im_den)
    }
}

/// Zero-phase filtering: forward pass, then backward pass. The signal is
/// extended by odd reflection on both ends to damp start-up transients.
pub fn filtfilt(section: &Biquad, signal: &[f64], pad: usize) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = pad.min(n - 1);
    let first = signal[0];
    let last = signal[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    section.process(&mut ext);
    ext.reverse();
    section.process(&mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}
