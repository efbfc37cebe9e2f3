//! Butterworth IIR design (bilinear transform) and zero-phase application.
//!
//! Filters are designed as cascaded second-order sections from the analog
//! prototype. `order` is the analog prototype order, so a band-pass of order
//! n carries 2n poles (the usual butter(n, [lo, hi]) convention). Zero-phase
//! application runs the cascade forward and backward over an odd-reflection
//! padded copy of the signal, which squares the magnitude response and
//! cancels the phase.

use super::SignalError;
use num_complex::Complex64;

/// Filter kind plus cutoff(s) in Hz.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FilterKind {
    Highpass { cutoff_hz: f64 },
    Bandpass { low_hz: f64, high_hz: f64 },
}

/// A digital filter request: kind, analog prototype order, phase policy.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FilterSpec {
    #[serde(flatten)]
    pub kind: FilterKind,
    pub order: usize,
    pub zero_phase: bool,
}

impl FilterSpec {
    /// Default drift-removal filter: 10 Hz high-pass, order 4, zero phase.
    pub fn drift_default() -> FilterSpec {
        FilterSpec {
            kind: FilterKind::Highpass { cutoff_hz: 10.0 },
            order: 4,
            zero_phase: true,
        }
    }

    /// Band-pass helper.
    pub fn bandpass(low_hz: f64, high_hz: f64, order: usize, zero_phase: bool) -> FilterSpec {
        FilterSpec {
            kind: FilterKind::Bandpass { low_hz, high_hz },
            order,
            zero_phase,
        }
    }

    /// Checks cutoffs against the Nyquist frequency of `fs`.
    pub fn validate(&self, fs: f64) -> Result<(), SignalError> {
        let nyquist = fs / 2.0;
        if self.order == 0 {
            return Err(SignalError::InvalidFilter("order must be ≥ 1".into()));
        }
        match self.kind {
            FilterKind::Highpass { cutoff_hz } => {
                if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
                    return Err(SignalError::InvalidFilter(format!(
                        "high-pass cutoff {cutoff_hz} Hz outside (0, {nyquist}) Hz"
                    )));
                }
            }
            FilterKind::Bandpass { low_hz, high_hz } => {
                if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
                    return Err(SignalError::InvalidFilter(format!(
                        "band [{low_hz}, {high_hz}] Hz must be ordered and below {nyquist} Hz"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One second-order section, direct form II transposed. `a0` normalized to 1.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

/// A designed cascade ready to run at a fixed sample rate.
#[derive(Debug, Clone)]
pub struct SosFilter {
    sections: Vec<Biquad>,
    /// Largest pole modulus; drives the reflect-padding settle length.
    max_pole_radius: f64,
}

/// Butterworth analog prototype poles (unit cutoff, left half plane).
fn prototype_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + order as f64 + 1.0)
                / (2.0 * order as f64);
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

fn bilinear(s: Complex64, fs2: f64) -> Complex64 {
    (Complex64::new(fs2, 0.0) + s) / (Complex64::new(fs2, 0.0) - s)
}

/// Evaluates the cascade response at `z`.
fn cascade_response(sections: &[Biquad], z: Complex64) -> Complex64 {
    let zi = z.inv();
    sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
        let num = Complex64::new(s.b0, 0.0) + zi * s.b1 + zi * zi * s.b2;
        let den = Complex64::new(1.0, 0.0) + zi * s.a1 + zi * zi * s.a2;
        acc * num / den
    })
}

impl SosFilter {
    /// Designs `spec` for sample rate `fs` (Hz) via the bilinear transform.
    pub fn design(spec: &FilterSpec, fs: f64) -> Result<SosFilter, SignalError> {
        spec.validate(fs)?;
        let fs2 = 2.0 * fs;
        let prewarp = |f: f64| fs2 * (std::f64::consts::PI * f / fs).tan();
        let proto = prototype_poles(spec.order);

        // Analog poles after the frequency transform, plus the digital zero
        // locations implied by the analog zeros at 0 / infinity.
        let (analog_poles, z_at_plus1, z_at_minus1, gain_ref): (Vec<Complex64>, usize, usize, Complex64) =
            match spec.kind {
                FilterKind::Highpass { cutoff_hz } => {
                    let wc = prewarp(cutoff_hz);
                    let poles = proto.iter().map(|&p| Complex64::new(wc, 0.0) / p).collect();
                    // n analog zeros at s=0 -> digital zeros at z=+1; unity gain at Nyquist.
                    (poles, spec.order, 0, Complex64::new(-1.0, 0.0))
                }
                FilterKind::Bandpass { low_hz, high_hz } => {
                    let (w1, w2) = (prewarp(low_hz), prewarp(high_hz));
                    let w0 = (w1 * w2).sqrt();
                    let bw = w2 - w1;
                    let mut poles = Vec::with_capacity(2 * spec.order);
                    for &p in &proto {
                        let pb = p * bw * 0.5;
                        let disc = (pb * pb - Complex64::new(w0 * w0, 0.0)).sqrt();
                        poles.push(pb + disc);
                        poles.push(pb - disc);
                    }
                    // n zeros at z=+1 and n at z=-1; unity gain at the center.
                    let w0_dig = 2.0 * (w0 / fs2).atan();
                    (poles, spec.order, spec.order, Complex64::from_polar(1.0, w0_dig))
                }
            };

        let digital_poles: Vec<Complex64> =
            analog_poles.iter().map(|&p| bilinear(p, fs2)).collect();
        let max_pole_radius = digital_poles.iter().fold(0.0f64, |m, p| m.max(p.norm()));

        // Pair poles into second-order sections. Poles come in conjugate
        // pairs (orders here are even in practice: HP order n has n poles,
        // BP has 2n); sort by imaginary part magnitude so conjugates adjoin.
        let mut poles = digital_poles;
        poles.sort_by(|a, b| {
            a.im.abs()
                .partial_cmp(&b.im.abs())
                .unwrap()
                .then(a.re.partial_cmp(&b.re).unwrap())
        });
        let mut sections = Vec::new();
        let mut zeros_p1 = z_at_plus1;
        let mut zeros_m1 = z_at_minus1;
        let mut i = 0;
        while i < poles.len() {
            let (a1, a2, take) = if poles[i].im.abs() > 1e-12 {
                // conjugate pair p, p̄: z² − 2Re(p)z + |p|²
                (-2.0 * poles[i].re, poles[i].norm_sqr(), 2)
            } else if i + 1 < poles.len() && poles[i + 1].im.abs() <= 1e-12 {
                // two real poles
                (
                    -(poles[i].re + poles[i + 1].re),
                    poles[i].re * poles[i + 1].re,
                    2,
                )
            } else {
                // lone real pole (odd order)
                (-poles[i].re, 0.0, 1)
            };
            // Attach up to `take` zeros, preferring one of each kind for
            // band-pass sections so each biquad stays well scaled.
            let mut n_p1 = 0usize;
            let mut n_m1 = 0usize;
            for _ in 0..take {
                if zeros_m1 > 0 && (n_m1 < n_p1 || zeros_p1 == 0) {
                    zeros_m1 -= 1;
                    n_m1 += 1;
                } else if zeros_p1 > 0 {
                    zeros_p1 -= 1;
                    n_p1 += 1;
                } else if zeros_m1 > 0 {
                    zeros_m1 -= 1;
                    n_m1 += 1;
                }
            }
            // numerator (z−1)^n_p1 (z+1)^n_m1 expanded, padded to degree 2
            let (b0, b1, b2) = match (n_p1, n_m1) {
                (0, 0) => (1.0, 0.0, 0.0),
                (1, 0) => (1.0, -1.0, 0.0),
                (0, 1) => (1.0, 1.0, 0.0),
                (2, 0) => (1.0, -2.0, 1.0),
                (0, 2) => (1.0, 2.0, 1.0),
                (1, 1) => (1.0, 0.0, -1.0),
                _ => unreachable!("at most two zeros per biquad"),
            };
            sections.push(Biquad { b0, b1, b2, a1, a2 });
            i += take;
        }

        // Normalize overall gain at the reference frequency.
        let g = cascade_response(&sections, gain_ref).norm();
        if !(g.is_finite() && g > 0.0) {
            return Err(SignalError::InvalidFilter(
                "degenerate design: zero reference gain".into(),
            ));
        }
        let scale = 1.0 / g;
        if let Some(first) = sections.first_mut() {
            first.b0 *= scale;
            first.b1 *= scale;
            first.b2 *= scale;
        }

        Ok(SosFilter {
            sections,
            max_pole_radius,
        })
    }

    /// Single forward pass through the cascade (causal, phase-distorting).
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = x.to_vec();
        for s in &self.sections {
            let mut w1 = 0.0;
            let mut w2 = 0.0;
            for v in y.iter_mut() {
                let xin = *v;
                let out = s.b0 * xin + w1;
                w1 = s.b1 * xin - s.a1 * out + w2;
                w2 = s.b2 * xin - s.a2 * out;
                *v = out;
            }
        }
        y
    }

    /// Forward-backward (zero-phase) pass with odd-reflection padding.
    ///
    /// Pad length follows the slowest pole's settle time (decay to 1e-9),
    /// capped at one sample less than the signal length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = self.settle_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }

        let mut y = self.filter(&ext);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }

    /// Applies the filter per `zero_phase` policy.
    pub fn apply(&self, x: &[f64], zero_phase: bool) -> Vec<f64> {
        if zero_phase {
            self.filtfilt(x)
        } else {
            self.filter(x)
        }
    }

    /// Magnitude response at frequency `f` for sample rate `fs`.
    pub fn magnitude_at(&self, f: f64, fs: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f / fs);
        cascade_response(&self.sections, z).norm()
    }

    fn settle_len(&self) -> usize {
        let r = self.max_pole_radius.min(1.0 - 1e-9);
        let n = (1e-9f64.ln() / r.ln()).ceil();
        (n as usize).clamp(24, 100_000)
    }
}

/// Designs and applies `spec` on a bare sample array at rate `fs`.
pub fn apply_filter(x: &[f64], fs: f64, spec: &FilterSpec) -> Result<Vec<f64>, SignalError> {
    let filter = SosFilter::design(spec, fs)?;
    Ok(filter.apply(x, spec.zero_phase))
}
