//! Rectification, Gaussian smoothing kernels, full linear convolution,
//! block-mean decimation and forward differences.

use rustfft::num_complex::Complex;
use rustfft::FftPlannerScalar;

use crate::audio_io::PressureSignal;
use crate::error::{Error, Result};

/// Smallest FFT length used by the overlap-add path.
pub const FAST_MIN_FFT_LEN: usize = 1024;

/// Below this many direct multiply-adds the fast path falls back to the
/// direct loop.
pub const FAST_DIRECT_CUTOFF: usize = 4096;

/// Anything with a uniform time axis: `time(i) = time_offset_s + i / rate`.
pub trait Sampled {
    fn values(&self) -> &[f64];
    fn sample_rate_hz(&self) -> f64;
    fn time_offset_s(&self) -> f64 {
        0.0
    }
    fn time_at(&self, i: usize) -> f64 {
        self.time_offset_s() + i as f64 / self.sample_rate_hz()
    }
}

impl Sampled for PressureSignal {
    fn values(&self) -> &[f64] {
        self.samples()
    }
    fn sample_rate_hz(&self) -> f64 {
        PressureSignal::sample_rate_hz(self)
    }
}

/// A series derived from a recording (smoothed envelope or its differences)
/// carrying the mapping of its index 0 back onto the recording's time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSignal {
    pub values: Vec<f64>,
    pub sample_rate_hz: f64,
    pub time_offset_s: f64,
}

impl Sampled for DerivedSignal {
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }
    fn time_offset_s(&self) -> f64 {
        self.time_offset_s
    }
}

impl DerivedSignal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, i: usize) -> f64 {
        self.time_offset_s + i as f64 / self.sample_rate_hz
    }

    /// Nearest index for a recording time, if it falls inside the series.
    pub fn index_of(&self, t_s: f64) -> Option<usize> {
        let x = ((t_s - self.time_offset_s) * self.sample_rate_hz).round();
        (x >= 0.0 && (x as usize) < self.values.len()).then_some(x as usize)
    }
}

/// Unit-peak Gaussian sampled on `[0, 2 t_c]`.
///
/// The center is snapped to the sample grid (`c = round(t_c * rate)`) so the
/// kernel has `2c + 1` taps, is exactly symmetric and peaks at exactly 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    taps: Vec<f64>,
    sample_rate_hz: f64,
    t_c_s: f64,
    sigma_s: f64,
}

impl GaussianKernel {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn t_c_s(&self) -> f64 {
        self.t_c_s
    }

    pub fn sigma_s(&self) -> f64 {
        self.sigma_s
    }

    pub fn center_index(&self) -> usize {
        self.taps.len() / 2
    }

    /// Group delay of the kernel on the grid, `center_index / rate`.
    pub fn center_time_s(&self) -> f64 {
        self.center_index() as f64 / self.sample_rate_hz
    }

    /// DC gain; a constant input level `a` comes out as `a * gain()`.
    pub fn gain(&self) -> f64 {
        self.taps.iter().sum()
    }
}

pub fn make_gaussian(t_c_s: f64, sigma_s: f64, sample_rate_hz: f64) -> Result<GaussianKernel> {
    for (name, v) in [
        ("t_c", t_c_s),
        ("sigma", sigma_s),
        ("sample rate", sample_rate_hz),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let center = (t_c_s * sample_rate_hz).round() as usize;
    let two_var = 2.0 * sigma_s * sigma_s;
    let taps = (0..=2 * center)
        .map(|i| {
            let dt = (i as f64 - center as f64) / sample_rate_hz;
            (-(dt * dt) / two_var).exp()
        })
        .collect();
    Ok(GaussianKernel {
        taps,
        sample_rate_hz,
        t_c_s,
        sigma_s,
    })
}

pub fn rectify(signal: &PressureSignal) -> PressureSignal {
    PressureSignal::new(
        signal.samples().iter().map(|x| x.abs()).collect(),
        signal.sample_rate_hz(),
    )
    .expect("rectifying a valid signal keeps it valid")
}

/// Block-mean downsampling; a trailing partial block is averaged over its
/// actual length.
pub fn decimate(signal: &PressureSignal, factor: usize) -> Result<PressureSignal> {
    if factor < 1 {
        return Err(Error::invalid("decimation factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(signal.clone());
    }
    let out = signal
        .samples()
        .chunks(factor)
        .map(|block| block.iter().sum::<f64>() / block.len() as f64)
        .collect();
    PressureSignal::new(out, signal.sample_rate_hz() / factor as f64)
}

/// Full linear convolution by direct summation, length `m + n - 1`.
///
/// Output `k` sums `x[j] * h[k - j]` for `j` in
/// `max(0, k + 1 - n) ..= min(k, m - 1)`, in ascending `j`.
pub fn convolve_full(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let (m, n) = (x.len(), h.len());
    (0..m + n - 1)
        .map(|k| {
            let lo = (k + 1).saturating_sub(n);
            let hi = k.min(m - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += x[j] * h[k - j];
            }
            acc
        })
        .collect()
}

/// Full linear convolution by FFT overlap-add.
///
/// The partition depends only on the kernel length, and the scalar FFT
/// planner is used so results do not depend on the host's SIMD support.
pub fn convolve_full_fft(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let (m, n) = (x.len(), h.len());
    if m.min(n) == 1 || m * n <= FAST_DIRECT_CUTOFF {
        return convolve_full(x, h);
    }
    let fft_len = (2 * n).next_power_of_two().max(FAST_MIN_FFT_LEN);
    let block = fft_len - n + 1;

    let mut planner = FftPlannerScalar::<f64>::new();
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);

    let mut kernel_spec: Vec<Complex<f64>> = h
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    forward.process(&mut kernel_spec);

    let scale = 1.0 / fft_len as f64;
    let mut out = vec![0.0; m + n - 1];
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    for (b, chunk) in x.chunks(block).enumerate() {
        if chunk.iter().all(|&v| v == 0.0) {
            continue;
        }
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (c, &v) in buf.iter_mut().zip(chunk) {
            c.re = v;
        }
        forward.process(&mut buf);
        for (c, k) in buf.iter_mut().zip(&kernel_spec) {
            *c *= k;
        }
        inverse.process(&mut buf);
        let start = b * block;
        let valid = chunk.len() + n - 1;
        for (o, c) in out[start..start + valid].iter_mut().zip(&buf) {
            *o += c.re * scale;
        }
    }
    out
}

fn check_conv_inputs<S: Sampled + ?Sized>(signal: &S, kernel: &GaussianKernel) -> Result<()> {
    if signal.values().is_empty() || kernel.is_empty() {
        return Err(Error::EmptySignal);
    }
    let (a, b) = (signal.sample_rate_hz(), kernel.sample_rate_hz());
    if ((a - b) / a).abs() > 1e-12 {
        return Err(Error::RateMismatch {
            signal_hz: a,
            kernel_hz: b,
        });
    }
    Ok(())
}

fn wrap<S: Sampled + ?Sized>(
    signal: &S,
    kernel: &GaussianKernel,
    values: Vec<f64>,
) -> DerivedSignal {
    DerivedSignal {
        values,
        sample_rate_hz: signal.sample_rate_hz(),
        time_offset_s: signal.time_offset_s() - kernel.center_time_s(),
    }
}

/// Reference convolution. The result's time axis is shifted back by the
/// kernel's group delay so features line up with the input.
pub fn convolve_direct<S: Sampled + ?Sized>(
    signal: &S,
    kernel: &GaussianKernel,
) -> Result<DerivedSignal> {
    check_conv_inputs(signal, kernel)?;
    Ok(wrap(
        signal,
        kernel,
        convolve_full(signal.values(), kernel.taps()),
    ))
}

/// Same contract as [`convolve_direct`], computed by FFT overlap-add.
pub fn convolve_fast<S: Sampled + ?Sized>(
    signal: &S,
    kernel: &GaussianKernel,
) -> Result<DerivedSignal> {
    check_conv_inputs(signal, kernel)?;
    Ok(wrap(
        signal,
        kernel,
        convolve_full_fft(signal.values(), kernel.taps()),
    ))
}

/// Forward difference `(w[j+1] - w[j]) / h` with `h = 1 / rate`.
pub fn derivative(signal: &DerivedSignal) -> Result<DerivedSignal> {
    if signal.values.len() < 2 {
        return Err(Error::invalid(format!(
            "derivative needs at least 2 samples, got {}",
            signal.values.len()
        )));
    }
    let rate = signal.sample_rate_hz;
    Ok(DerivedSignal {
        values: signal
            .values
            .windows(2)
            .map(|w| (w[1] - w[0]) * rate)
            .collect(),
        sample_rate_hz: rate,
        time_offset_s: signal.time_offset_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: &[f64], rate: f64) -> PressureSignal {
        PressureSignal::new(v.to_vec(), rate).unwrap()
    }

    fn derived(v: &[f64], rate: f64) -> DerivedSignal {
        DerivedSignal {
            values: v.to_vec(),
            sample_rate_hz: rate,
            time_offset_s: 0.0,
        }
    }

    #[test]
    fn rectify_examples() {
        assert_eq!(
            rectify(&sig(&[0.5, -0.5, 0.0], 1.0)).samples(),
            &[0.5, 0.5, 0.0]
        );
        let pos = sig(&[0.1, 0.2, 0.0], 1.0);
        assert_eq!(rectify(&pos), pos);
        let x = sig(&[-3.0, 2.0, -0.25], 1.0);
        assert_eq!(rectify(&rectify(&x)), rectify(&x));
    }

    #[test]
    fn gaussian_shape() {
        let k = make_gaussian(3.0, 1.0, 100.0).unwrap();
        assert_eq!(k.len(), 601);
        assert_eq!(k.center_index(), 300);
        assert_eq!(k.taps()[300], 1.0);
        let expect = (-0.5f64).exp();
        assert!((k.taps()[200] - expect).abs() < 1e-15);
        assert!((k.taps()[400] - 0.60653).abs() < 1e-5);
        for i in 0..k.len() {
            let (a, b) = (k.taps()[i], k.taps()[k.len() - 1 - i]);
            assert!(((a - b) / a).abs() <= 1e-12);
            assert!(a > 0.0 && a <= 1.0);
        }
        assert_eq!(k.taps().iter().cloned().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn gaussian_rejects_non_positive() {
        assert!(make_gaussian(0.0, 1.0, 100.0).is_err());
        assert!(make_gaussian(1.0, -1.0, 100.0).is_err());
        assert!(make_gaussian(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn hand_convolution() {
        assert_eq!(
            convolve_full(&[1.0, 2.0, 3.0], &[1.0, 1.0]),
            vec![1.0, 3.0, 5.0, 3.0]
        );
        assert_eq!(
            convolve_full(&[4.0, -1.0, 2.5], &[1.0]),
            vec![4.0, -1.0, 2.5]
        );
        assert!(convolve_full(&[], &[1.0]).is_empty());
    }

    #[test]
    fn convolution_time_offset_recenters() {
        let k = make_gaussian(0.05, 0.01, 100.0).unwrap();
        let mut x = vec![0.0; 50];
        x[20] = 1.0;
        let w = convolve_direct(&sig(&x, 100.0), &k).unwrap();
        let peak = w
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((w.time_at(peak) - 0.20).abs() < 1e-12);
        assert_eq!(w.index_of(0.20), Some(peak));
    }

    #[test]
    fn convolution_errors() {
        let k = make_gaussian(0.05, 0.01, 100.0).unwrap();
        let empty = PressureSignal::new(vec![], 100.0).unwrap();
        assert!(matches!(
            convolve_direct(&empty, &k),
            Err(Error::EmptySignal)
        ));
        assert!(matches!(
            convolve_fast(&sig(&[1.0], 50.0), &k),
            Err(Error::RateMismatch { .. })
        ));
    }

    #[test]
    fn fast_zero_and_impulse() {
        let h: Vec<f64> = (0..301).map(|i| ((i as f64) * 0.01).cos()).collect();
        let zero = vec![0.0; 5000];
        assert!(convolve_full_fft(&zero, &h).iter().all(|&v| v == 0.0));
        let mut imp = vec![0.0; 5000];
        imp[1234] = 1.0;
        let y = convolve_full_fft(&imp, &h);
        let bound = 1e-9 * h.len() as f64;
        for (i, &v) in y.iter().enumerate() {
            let want = if (1234..1234 + 301).contains(&i) {
                h[i - 1234]
            } else {
                0.0
            };
            assert!((v - want).abs() <= bound);
        }
    }

    #[test]
    fn decimate_examples() {
        let x = sig(&[1.0, 1.0, 3.0, 3.0], 4.0);
        assert_eq!(decimate(&x, 1).unwrap(), x);
        let d = decimate(&x, 2).unwrap();
        assert_eq!(d.samples(), &[1.0, 3.0]);
        assert_eq!(d.sample_rate_hz(), 2.0);
        assert_eq!(
            decimate(&sig(&[1.0, 2.0, 3.0], 1.0), 2).unwrap().samples(),
            &[1.5, 3.0]
        );
        assert!(decimate(&x, 0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let d1 = derivative(&derived(&[0.0, 1.0, 4.0, 9.0], 1.0)).unwrap();
        assert_eq!(d1.values, vec![1.0, 3.0, 5.0]);
        assert_eq!(derivative(&d1).unwrap().values, vec![2.0, 2.0]);
        let c = derivative(&derived(&[2.5; 6], 10.0)).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
        assert!(derivative(&derived(&[1.0], 1.0)).is_err());
    }

    #[test]
    fn derivative_uses_own_rate() {
        let d = derivative(&derived(&[0.0, 1.0], 100.0)).unwrap();
        assert_eq!(d.values, vec![100.0]);
    }
}
