//! Oriented filter responses on the luma channel.
//!
//! Second-derivative-of-Gaussian responses are steered exactly from the three
//! separable basis images `Gxx`, `Gxy`, `Gyy`. Gabor responses are complex
//! magnitudes computed by FFT convolution.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub const STEERABLE_SCALES: [f64; 3] = [1.0, 2.0, 4.0];
pub const STEERABLE_ORIENTATIONS: usize = 4;
pub const GABOR_WAVELENGTHS: [f64; 3] = [2.0, 4.0, 8.0];
pub const GABOR_ORIENTATIONS: usize = 12;
pub const GABOR_ASPECT: f64 = 0.5;
/// Envelope width as a fraction of the wavelength (one-octave bandwidth).
const GABOR_SIGMA_PER_WAVELENGTH: f64 = 0.56;

/// A plane of per-pixel values, row-major.
pub(crate) struct Plane<'a> {
    pub width: usize,
    pub height: usize,
    pub data: &'a [f64],
}

struct GaborKernel {
    radius: usize,
    taps: Vec<Complex64>, // (2r+1)^2, row-major
}

type SpectraCache = HashMap<(usize, usize), Arc<Vec<Vec<Complex64>>>>;

/// Shared Gabor bank. Kernel spectra are cached per padded frame size, so a
/// batch of same-sized images transforms each kernel only once.
pub struct FilterBank {
    kernels: Vec<GaborKernel>,
    max_radius: usize,
    spectra: Mutex<SpectraCache>,
}

impl std::fmt::Debug for FilterBank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FilterBank")
            .field("kernels", &self.kernels.len())
            .field("max_radius", &self.max_radius)
            .finish()
    }
}

impl Default for FilterBank {
    fn default() -> Self {
        Self::new()
    }
}

impl FilterBank {
    pub fn new() -> Self {
        let mut kernels = Vec::new();
        for &lambda in &GABOR_WAVELENGTHS {
            for k in 0..GABOR_ORIENTATIONS {
                let theta = k as f64 * PI / GABOR_ORIENTATIONS as f64;
                kernels.push(gabor_kernel(lambda, theta));
            }
        }
        let max_radius = kernels.iter().map(|k| k.radius).max().unwrap_or(0);
        FilterBank {
            kernels,
            max_radius,
            spectra: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// Calls `sink(filter_index, magnitude_plane)` for every Gabor filter, in
    /// wavelength-major, orientation-minor order.
    pub(crate) fn for_each_response(&self, gray: &Plane<'_>, mut sink: impl FnMut(usize, &[f64])) {
        let (w, h) = (gray.width, gray.height);
        let r = self.max_radius;
        let pw = smooth_size(w + 2 * r);
        let ph = smooth_size(h + 2 * r);

        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(pw);
        let col_fwd = planner.plan_fft_forward(ph);
        let row_inv = planner.plan_fft_inverse(pw);
        let col_inv = planner.plan_fft_inverse(ph);

        // Replicate-padded frame; the image sits at offset (r, r).
        let mut frame = vec![Complex64::new(0.0, 0.0); pw * ph];
        for y in 0..ph {
            let sy = (y as isize - r as isize).clamp(0, h as isize - 1) as usize;
            for x in 0..pw {
                let sx = (x as isize - r as isize).clamp(0, w as isize - 1) as usize;
                frame[y * pw + x] = Complex64::new(gray.data[sy * w + sx], 0.0);
            }
        }
        fft2(&mut frame, pw, ph, &*row_fwd, &*col_fwd);

        let spectra = self.spectra_for(pw, ph, &*row_fwd, &*col_fwd);
        let scale = 1.0 / (pw * ph) as f64;
        let mut work = vec![Complex64::new(0.0, 0.0); pw * ph];
        let mut out = vec![0.0; w * h];
        for (idx, spectrum) in spectra.iter().enumerate() {
            for ((o, a), b) in work.iter_mut().zip(&frame).zip(spectrum) {
                *o = a * b;
            }
            fft2(&mut work, pw, ph, &*row_inv, &*col_inv);
            for y in 0..h {
                let src = &work[(y + r) * pw + r..(y + r) * pw + r + w];
                for (o, v) in out[y * w..(y + 1) * w].iter_mut().zip(src) {
                    *o = v.norm() * scale;
                }
            }
            sink(idx, &out);
        }
    }

    fn spectra_for(
        &self,
        pw: usize,
        ph: usize,
        row_fwd: &dyn Fft<f64>,
        col_fwd: &dyn Fft<f64>,
    ) -> Arc<Vec<Vec<Complex64>>> {
        let mut cache = self.spectra.lock().expect("filter cache poisoned");
        cache
            .entry((pw, ph))
            .or_insert_with(|| {
                let spectra = self
                    .kernels
                    .iter()
                    .map(|k| {
                        let mut buf = vec![Complex64::new(0.0, 0.0); pw * ph];
                        let r = k.radius as isize;
                        let side = 2 * k.radius + 1;
                        for ky in -r..=r {
                            for kx in -r..=r {
                                let tap = k.taps[(ky + r) as usize * side + (kx + r) as usize];
                                let x = kx.rem_euclid(pw as isize) as usize;
                                let y = ky.rem_euclid(ph as isize) as usize;
                                buf[y * pw + x] = tap;
                            }
                        }
                        fft2(&mut buf, pw, ph, row_fwd, col_fwd);
                        buf
                    })
                    .collect();
                Arc::new(spectra)
            })
            .clone()
    }
}

fn gabor_kernel(wavelength: f64, theta: f64) -> GaborKernel {
    let sigma = GABOR_SIGMA_PER_WAVELENGTH * wavelength;
    let radius = (3.0 * sigma / GABOR_ASPECT).ceil() as usize;
    let (c, s) = (theta.cos(), theta.sin());
    let r = radius as isize;
    let mut envelope = Vec::new();
    let mut phase = Vec::new();
    for y in -r..=r {
        for x in -r..=r {
            let (x, y) = (x as f64, y as f64);
            let xr = x * c + y * s;
            let yr = -x * s + y * c;
            envelope.push((-(xr * xr + GABOR_ASPECT * GABOR_ASPECT * yr * yr) / (2.0 * sigma * sigma)).exp());
            phase.push(2.0 * PI * xr / wavelength);
        }
    }
    let env_sum: f64 = envelope.iter().sum();
    // Remove the DC response of the even part so flat regions respond with 0.
    let dc = envelope.iter().zip(&phase).map(|(e, p)| e * p.cos()).sum::<f64>() / env_sum;
    let taps = envelope
        .iter()
        .zip(&phase)
        .map(|(e, p)| Complex64::new(e * (p.cos() - dc), e * p.sin()) / env_sum)
        .collect();
    GaborKernel { radius, taps }
}

/// Smallest 2^a 3^b 5^c at or above `n`.
fn smooth_size(n: usize) -> usize {
    (n..)
        .find(|&m| {
            let mut m = m;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            m == 1
        })
        .expect("smooth sizes are unbounded")
}

fn fft2(buf: &mut [Complex64], w: usize, h: usize, row: &dyn Fft<f64>, col: &dyn Fft<f64>) {
    row.process(buf);
    let mut t = transpose(buf, w, h);
    col.process(&mut t);
    buf.copy_from_slice(&transpose(&t, h, w));
}

fn transpose(src: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::new(0.0, 0.0); w * h];
    for y in 0..h {
        for x in 0..w {
            dst[x * h + y] = src[y * w + x];
        }
    }
    dst
}

/// Calls `sink(index, plane)` with `|response|` for each of the
/// 3 scales x 4 orientations of the steered second Gaussian derivative.
pub(crate) fn for_each_steerable_response(gray: &Plane<'_>, mut sink: impl FnMut(usize, &[f64])) {
    let (w, h) = (gray.width, gray.height);
    let mut out = vec![0.0; w * h];
    for (si, &sigma) in STEERABLE_SCALES.iter().enumerate() {
        let (g0, g1, g2) = gaussian_derivative_kernels(sigma);
        let gxx = separable(gray, &g2, &g0);
        let gyy = separable(gray, &g0, &g2);
        let gxy = separable(gray, &g1, &g1);
        let norm = sigma * sigma;
        for k in 0..STEERABLE_ORIENTATIONS {
            let theta = k as f64 * PI / STEERABLE_ORIENTATIONS as f64;
            let (c, s) = (theta.cos(), theta.sin());
            for (i, o) in out.iter_mut().enumerate() {
                *o = norm * (c * c * gxx[i] + 2.0 * c * s * gxy[i] + s * s * gyy[i]).abs();
            }
            sink(si * STEERABLE_ORIENTATIONS + k, &out);
        }
    }
}

fn gaussian_derivative_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let r = (3.0 * sigma).ceil() as isize;
    let s2 = sigma * sigma;
    let g: Vec<f64> = (-r..=r).map(|x| (-(x * x) as f64 / (2.0 * s2)).exp()).collect();
    let sum: f64 = g.iter().sum();
    let g0: Vec<f64> = g.iter().map(|v| v / sum).collect();
    let g1 = (-r..=r).zip(&g0).map(|(x, v)| -(x as f64) / s2 * v).collect();
    let mut g2: Vec<f64> = (-r..=r)
        .zip(&g0)
        .map(|(x, v)| ((x * x) as f64 / (s2 * s2) - 1.0 / s2) * v)
        .collect();
    // Truncation leaves a small DC term; flat regions must not respond.
    let dc = g2.iter().sum::<f64>() / g2.len() as f64;
    g2.iter_mut().for_each(|v| *v -= dc);
    (g0, g1, g2)
}

/// Correlate rows with `kx` then columns with `ky`, replicating borders.
fn separable(src: &Plane<'_>, kx: &[f64], ky: &[f64]) -> Vec<f64> {
    let (w, h) = (src.width, src.height);
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kx.iter().enumerate() {
                let sx = (x as isize + i as isize - rx).clamp(0, w as isize - 1) as usize;
                acc += k * row[sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (i, k) in ky.iter().enumerate() {
            let sy = (y as isize + i as isize - ry).clamp(0, h as isize - 1) as usize;
            let (dst, srow) = (&mut out[y * w..(y + 1) * w], &tmp[sy * w..(sy + 1) * w]);
            for (o, v) in dst.iter_mut().zip(srow) {
                *o += k * v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_plane(w: usize, h: usize, v: f64) -> Vec<f64> {
        vec![v; w * h]
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(454), 480);
        assert_eq!(smooth_size(1), 1);
    }

    #[test]
    fn flat_input_has_no_response() {
        let data = constant_plane(40, 30, 0.7);
        let plane = Plane { width: 40, height: 30, data: &data };
        let bank = FilterBank::new();
        let mut seen = 0;
        bank.for_each_response(&plane, |_, resp| {
            seen += 1;
            assert!(resp.iter().all(|v| v.abs() < 1e-9));
        });
        assert_eq!(seen, 36);
        for_each_steerable_response(&plane, |_, resp| {
            assert!(resp.iter().all(|v| v.abs() < 1e-12));
        });
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let (w, h) = (23, 17);
        let data: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let plane = Plane { width: w, height: h, data: &data };
        let bank = FilterBank::new();
        let target = 5; // wavelength 2, 5th orientation
        let kernel = &bank.kernels[target];
        let r = kernel.radius as isize;
        let side = 2 * kernel.radius + 1;
        let mut got = Vec::new();
        bank.for_each_response(&plane, |i, resp| {
            if i == target {
                got = resp.to_vec();
            }
        });
        for (x, y) in [(0usize, 0usize), (11, 8), (22, 16), (3, 14)] {
            let mut acc = Complex64::new(0.0, 0.0);
            for ky in -r..=r {
                for kx in -r..=r {
                    let sx = (x as isize - kx).clamp(0, w as isize - 1) as usize;
                    let sy = (y as isize - ky).clamp(0, h as isize - 1) as usize;
                    acc += kernel.taps[(ky + r) as usize * side + (kx + r) as usize] * data[sy * w + sx];
                }
            }
            assert!((acc.norm() - got[y * w + x]).abs() < 1e-10, "at ({x},{y})");
        }
    }

    #[test]
    fn vertical_edge_excites_horizontal_derivative() {
        let (w, h) = (32, 32);
        let data: Vec<f64> = (0..w * h).map(|i| if i % w < 16 { 0.0 } else { 1.0 }).collect();
        let plane = Plane { width: w, height: h, data: &data };
        let mut energy = [0.0; 12];
        for_each_steerable_response(&plane, |i, resp| energy[i] = resp.iter().sum());
        // theta = 0 differentiates across x; theta = pi/2 along y sees nothing.
        assert!(energy[0] > 1.0);
        assert!(energy[2] < 1e-9);
    }
}
