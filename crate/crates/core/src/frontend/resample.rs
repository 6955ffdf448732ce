use std::f64::consts::PI;

/// Zero crossings of the sinc kernel on each side, measured at the cutoff.
pub const SINC_ZERO_CROSSINGS: usize = 24;
/// Passband edge as a fraction of the lower Nyquist frequency.
pub const SINC_ROLLOFF: f64 = 0.94;
/// Kaiser window shape parameter.
pub const KAISER_BETA: f64 = 8.6;

const MAX_TABULATED_PHASES: usize = 4096;

/// Band-limited windowed-sinc resampler for rational rate ratios.
///
/// Output sample `n` sits at input position `n * down / up`. The kernel is a
/// Kaiser-windowed sinc with cutoff at `SINC_ROLLOFF` times the lower of the
/// two Nyquist frequencies; each phase is normalized to unit DC gain.
#[derive(Debug, Clone)]
pub struct SincResampler {
    up: usize,
    down: usize,
    cutoff: f64,
    half_width: usize,
    table: Option<Vec<Vec<f64>>>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

impl SincResampler {
    pub fn new(from_rate: u32, to_rate: u32) -> Self {
        let (from, to) = (from_rate as usize, to_rate as usize);
        let g = gcd(from, to);
        let up = to / g;
        let down = from / g;
        let cutoff = (to as f64 / from as f64).min(1.0) * SINC_ROLLOFF;
        let half_width = (SINC_ZERO_CROSSINGS as f64 / cutoff).ceil() as usize;
        let mut r = Self {
            up,
            down,
            cutoff,
            half_width,
            table: None,
        };
        if up <= MAX_TABULATED_PHASES {
            r.table = Some((0..up).map(|p| r.kernel(p)).collect());
        }
        r
    }

    fn kernel(&self, phase: usize) -> Vec<f64> {
        let frac = phase as f64 / self.up as f64;
        let h = self.half_width as f64;
        let beta_norm = bessel_i0(KAISER_BETA);
        let mut taps: Vec<f64> = (0..2 * self.half_width)
            .map(|j| {
                // tap j multiplies input index i0 + j + 1 - half_width
                let t = (j as f64 + 1.0 - h) - frac;
                let x = self.cutoff * t;
                let sinc = if x.abs() < 1e-12 {
                    1.0
                } else {
                    (PI * x).sin() / (PI * x)
                };
                let r = t / h;
                let window = if r.abs() >= 1.0 {
                    0.0
                } else {
                    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / beta_norm
                };
                self.cutoff * sinc * window
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        taps
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        if self.up == self.down {
            return input.to_vec();
        }
        let n_out = self.output_len(input.len());
        let len = input.len() as isize;
        let hw = self.half_width as isize;
        let mut out = Vec::with_capacity(n_out);
        let mut scratch;
        for n in 0..n_out {
            let pos = n * self.down;
            let i0 = (pos / self.up) as isize;
            let phase = pos % self.up;
            let taps: &[f64] = match &self.table {
                Some(t) => &t[phase],
                None => {
                    scratch = self.kernel(phase);
                    &scratch
                }
            };
            let mut acc = 0.0;
            for (j, &w) in taps.iter().enumerate() {
                let idx = i0 + j as isize + 1 - hw;
                if (0..len).contains(&idx) {
                    acc += w * input[idx as usize];
                }
            }
            out.push(acc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rate_is_a_copy() {
        let r = SincResampler::new(16000, 16000);
        let x = vec![0.1, -0.2, 0.3];
        assert_eq!(r.process(&x), x);
    }

    #[test]
    fn output_length_follows_ratio() {
        assert_eq!(SincResampler::new(8000, 16000).output_len(8000), 16000);
        assert_eq!(SincResampler::new(44100, 16000).output_len(44100), 16000);
        assert_eq!(SincResampler::new(48000, 16000).output_len(10), 4);
    }

    #[test]
    fn dc_is_preserved_in_the_interior() {
        let r = SincResampler::new(44100, 16000);
        let out = r.process(&vec![0.5; 44100]);
        for &y in &out[1000..15000] {
            assert!((y - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn tone_above_new_nyquist_is_removed() {
        // 10 kHz at 48 kHz must vanish when going down to 16 kHz
        let x: Vec<f64> = (0..48000)
            .map(|i| (2.0 * PI * 10000.0 * i as f64 / 48000.0).sin())
            .collect();
        let out = SincResampler::new(48000, 16000).process(&x);
        let rms = (out[2000..14000].iter().map(|v| v * v).sum::<f64>() / 12000.0).sqrt();
        assert!(rms < 1e-3, "alias rms {rms}");
    }
}
