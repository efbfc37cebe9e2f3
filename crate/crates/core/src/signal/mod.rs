//! Impact-record conditioning: soft trigger, force normalization,
//! acceleration integration, drift removal, and eigenmode band filtering.

mod filter;

pub use filter::{apply_filter, Biquad, FilterKind, FilterSpec, SosFilter};

use crate::dataset::{DatasetError, ImpactRecord, ScanDataset, Trace, Unit};
use thiserror::Error;

/// Signal-processing failures.
#[derive(Debug, Error)]
pub enum SignalError {
    #[error("no trigger: force trace has no sample above threshold")]
    NoTrigger,
    #[error("threshold fraction must be in (0, 1), got {0}")]
    BadThresholdFraction(f64),
    #[error("zero peak force, cannot normalize")]
    ZeroPeakForce,
    #[error("expected {expected:?} trace, got {actual:?}")]
    WrongUnit { expected: Unit, actual: Unit },
    #[error("trace too short: {0} samples")]
    TraceTooShort(usize),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("record {index} in line {line}: {source}")]
    Record {
        line: String,
        index: usize,
        #[source]
        source: Box<SignalError>,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Number of pre-trigger samples retained when aligning records.
pub const PRE_TRIGGER_SAMPLES: usize = 50;
/// Default soft-trigger threshold as a fraction of the peak force.
pub const DEFAULT_TRIGGER_FRACTION: f64 = 0.1;

/// Finds the soft-trigger index: the first sample where |force| reaches
/// `threshold_fraction` of the peak force.
///
/// Recordings from different excitation points aligned on this index share a
/// common time base.
pub fn detect_soft_trigger(force: &Trace, threshold_fraction: f64) -> Result<usize, SignalError> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(SignalError::BadThresholdFraction(threshold_fraction));
    }
    let peak = force.peak_abs();
    if peak <= 0.0 {
        return Err(SignalError::NoTrigger);
    }
    let level = threshold_fraction * peak;
    force
        .samples
        .iter()
        .position(|v| v.abs() >= level)
        .ok_or(SignalError::NoTrigger)
}

/// Scales a record so its peak force equals `reference_force_n`.
///
/// Force and acceleration traces are multiplied by
/// `reference_force_n / peak_force`; displacement traces, when present, are
/// scaled the same way.
pub fn normalize_record(
    record: &ImpactRecord,
    reference_force_n: f64,
) -> Result<ImpactRecord, SignalError> {
    if !(record.peak_force_n > 0.0) {
        return Err(SignalError::ZeroPeakForce);
    }
    let scale = reference_force_n / record.peak_force_n;
    let scale_trace = |tr: &Trace| -> Trace {
        let mut out = tr.clone();
        for v in &mut out.samples {
            *v *= scale;
        }
        out
    };
    Ok(ImpactRecord {
        excitation_point_mm: record.excitation_point_mm,
        force: scale_trace(&record.force),
        accel: [
            scale_trace(&record.accel[0]),
            scale_trace(&record.accel[1]),
            scale_trace(&record.accel[2]),
        ],
        trigger_index: record.trigger_index,
        peak_force_n: reference_force_n,
        displacement: record
            .displacement
            .as_ref()
            .map(|d| [scale_trace(&d[0]), scale_trace(&d[1]), scale_trace(&d[2])]),
    })
}

/// Integrates an acceleration trace to velocity and displacement with the
/// linear-acceleration recurrence.
///
/// With `v⁰ = u⁰ = 0`:
///
/// ```text
/// vⁿ = vⁿ⁻¹ + Δt (aⁿ⁻¹ + aⁿ) / 2
/// uⁿ = uⁿ⁻¹ + Δt vⁿ⁻¹ + Δt² (aⁿ⁻¹/3 + aⁿ/6)
/// ```
///
/// The scheme is exact for acceleration that is piecewise linear between
/// samples.
pub fn integrate_to_displacement(accel: &Trace) -> Result<(Trace, Trace), SignalError> {
    if accel.unit != Unit::Acceleration {
        return Err(SignalError::WrongUnit {
            expected: Unit::Acceleration,
            actual: accel.unit,
        });
    }
    if accel.len() < 2 {
        return Err(SignalError::TraceTooShort(accel.len()));
    }
    let dt = accel.dt;
    let a = &accel.samples;
    let n = a.len();
    let mut v = vec![0.0; n];
    let mut u = vec![0.0; n];
    for i in 1..n {
        v[i] = v[i - 1] + dt * (a[i - 1] + a[i]) / 2.0;
        u[i] = u[i - 1] + dt * v[i - 1] + dt * dt * (a[i - 1] / 3.0 + a[i] / 6.0);
    }
    let velocity = Trace::new(v, dt, accel.t0, Unit::Velocity)?;
    let displacement = Trace::new(u, dt, accel.t0, Unit::Displacement)?;
    Ok((velocity, displacement))
}

/// Removes the integration drift with a high-pass filter (default: 10 Hz,
/// order 4, zero phase).
pub fn remove_drift(displacement: &Trace, spec: &FilterSpec) -> Result<Trace, SignalError> {
    if !matches!(spec.kind, FilterKind::Highpass { .. }) {
        return Err(SignalError::InvalidFilter(
            "drift removal expects a high-pass spec".into(),
        ));
    }
    filtered_trace(displacement, spec)
}

/// Isolates an eigenmode band with a Butterworth band-pass (e.g. 428–442 Hz,
/// order 4, applied zero-phase).
pub fn bandpass_mode_filter(series: &Trace, spec: &FilterSpec) -> Result<Trace, SignalError> {
    if !matches!(spec.kind, FilterKind::Bandpass { .. }) {
        return Err(SignalError::InvalidFilter(
            "mode filtering expects a band-pass spec".into(),
        ));
    }
    filtered_trace(series, spec)
}

fn filtered_trace(tr: &Trace, spec: &FilterSpec) -> Result<Trace, SignalError> {
    let fs = 1.0 / tr.dt;
    let y = apply_filter(&tr.samples, fs, spec)?;
    let mut out = tr.clone();
    out.samples = y;
    Ok(out)
}

/// Integrates every record of a dataset to displacement, applying drift
/// removal per component. Existing displacement channels are replaced.
pub fn integrate_dataset(
    dataset: &mut ScanDataset,
    drift_spec: Option<&FilterSpec>,
) -> Result<(), SignalError> {
    let default_spec = FilterSpec::drift_default();
    let spec = drift_spec.unwrap_or(&default_spec);
    for line in &mut dataset.lines {
        let line_id = line.line_id.clone();
        for (index, rec) in line.records.iter_mut().enumerate() {
            let wrap = |e: SignalError| SignalError::Record {
                line: line_id.clone(),
                index,
                source: Box::new(e),
            };
            let mut disp: Vec<Trace> = Vec::with_capacity(3);
            for comp in 0..3 {
                let (_v, u) = integrate_to_displacement(&rec.accel[comp]).map_err(wrap)?;
                disp.push(remove_drift(&u, spec).map_err(wrap)?);
            }
            rec.displacement = Some([disp[0].clone(), disp[1].clone(), disp[2].clone()]);
        }
    }
    Ok(())
}

/// Applies a band-pass to every displacement trace of a dataset in place.
pub fn bandpass_dataset(
    dataset: &mut ScanDataset,
    spec: &FilterSpec,
) -> Result<(), SignalError> {
    for line in &mut dataset.lines {
        let line_id = line.line_id.clone();
        for (index, rec) in line.records.iter_mut().enumerate() {
            let disp = rec.displacement.as_mut().ok_or_else(|| SignalError::Record {
                line: line_id.clone(),
                index,
                source: Box::new(SignalError::TraceTooShort(0)),
            })?;
            for comp in disp.iter_mut() {
                *comp = bandpass_mode_filter(comp, spec)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 51200.0;

    fn trace(samples: Vec<f64>, unit: Unit) -> Trace {
        Trace::new(samples, 1.0 / FS, 0.0, unit).unwrap()
    }

    // --- soft trigger ---

    #[test]
    fn trigger_on_linear_ramp() {
        // 0..100 N over 100 samples; 10% of peak = 10 N first reached at index 10
        let samples: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let force = trace(samples, Unit::Force);
        assert_eq!(detect_soft_trigger(&force, 0.1).unwrap(), 10);
    }

    #[test]
    fn trigger_rejects_all_zero() {
        let force = trace(vec![0.0; 64], Unit::Force);
        assert!(matches!(
            detect_soft_trigger(&force, 0.1),
            Err(SignalError::NoTrigger)
        ));
    }

    #[test]
    fn trigger_on_raised_cosine_onset() {
        // 1 ms wide raised-cosine pulse starting at sample 500; the 5% level
        // is crossed at onset + T·acos(1-2·0.05)/(2π) ≈ onset + 0.072·T
        let width = 1e-3;
        let n_width = (width * FS).round() as usize; // 51 samples
        let mut samples = vec![0.0; 2048];
        for i in 0..=n_width {
            let t = i as f64 / FS;
            samples[500 + i] =
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * t / width).cos()) * 100.0;
        }
        let force = trace(samples, Unit::Force);
        let idx = detect_soft_trigger(&force, 0.05).unwrap();
        assert!((500..=510).contains(&idx), "idx = {idx}");
    }

    #[test]
    fn trigger_shift_equivariance() {
        let mut samples = vec![0.0; 512];
        for (i, v) in samples.iter_mut().enumerate().skip(100).take(60) {
            *v = ((i - 100) as f64 / 10.0).min(3.0);
        }
        let base = trace(samples.clone(), Unit::Force);
        let i0 = detect_soft_trigger(&base, 0.2).unwrap();
        for shift in [1usize, 7, 40] {
            let mut shifted = vec![0.0; 512];
            shifted[shift..].copy_from_slice(&samples[..512 - shift]);
            let tr = trace(shifted, Unit::Force);
            assert_eq!(detect_soft_trigger(&tr, 0.2).unwrap(), i0 + shift);
        }
    }

    #[test]
    fn trigger_fraction_bounds() {
        let force = trace(vec![0.0, 1.0], Unit::Force);
        assert!(detect_soft_trigger(&force, 0.0).is_err());
        assert!(detect_soft_trigger(&force, 1.0).is_err());
    }

    // --- normalization ---

    fn record_with_peak(peak: f64) -> ImpactRecord {
        let force = trace(vec![0.0, peak, peak / 2.0, 0.0], Unit::Force);
        let accel = trace(vec![0.0, 2.0 * peak, peak, 0.0], Unit::Acceleration);
        ImpactRecord {
            excitation_point_mm: [0.0; 3],
            force,
            accel: [accel.clone(), accel.clone(), accel],
            trigger_index: 1,
            peak_force_n: peak,
            displacement: None,
        }
    }

    #[test]
    fn normalize_halves_samples() {
        let rec = record_with_peak(200.0);
        let out = normalize_record(&rec, 100.0).unwrap();
        assert_eq!(out.peak_force_n, 100.0);
        for (a, b) in rec.force.samples.iter().zip(&out.force.samples) {
            assert!((b - a / 2.0).abs() < 1e-12);
        }
        for (a, b) in rec.accel[1].samples.iter().zip(&out.accel[1].samples) {
            assert!((b - a / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_identity_when_peak_matches() {
        let rec = record_with_peak(100.0);
        let out = normalize_record(&rec, 100.0).unwrap();
        assert_eq!(out, rec);
    }

    #[test]
    fn normalize_makes_amplitudes_comparable() {
        // same waveform hit 1x and 3x: equal after normalization
        let r1 = record_with_peak(50.0);
        let mut r3 = record_with_peak(50.0);
        for tr in [&mut r3.force, &mut r3.accel[0], &mut r3.accel[1], &mut r3.accel[2]] {
            for v in &mut tr.samples {
                *v *= 3.0;
            }
        }
        r3.peak_force_n *= 3.0;
        let n1 = normalize_record(&r1, 100.0).unwrap();
        let n3 = normalize_record(&r3, 100.0).unwrap();
        for (a, b) in n1.force.samples.iter().zip(&n3.force.samples) {
            let denom = a.abs().max(b.abs()).max(1e-300);
            assert!((a - b).abs() / denom < 1e-12);
        }
    }

    // --- integration ---

    #[test]
    fn integrate_zero_is_zero() {
        let a = trace(vec![0.0; 128], Unit::Acceleration);
        let (v, u) = integrate_to_displacement(&a).unwrap();
        assert!(v.samples.iter().all(|&x| x == 0.0));
        assert!(u.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn integrate_constant_acceleration_exact() {
        let a0 = 3.7;
        let n = 1000;
        let a = trace(vec![a0; n + 1], Unit::Acceleration);
        let (_, u) = integrate_to_displacement(&a).unwrap();
        let t = n as f64 / FS;
        let expected = 0.5 * a0 * t * t;
        let err = (u.samples[n] - expected).abs() / expected;
        assert!(err < 1e-12, "rel err = {err:e}");
    }

    #[test]
    fn integrate_linear_acceleration_exact() {
        let c = 2.5e3;
        let n = 1000;
        let dt = 1.0 / FS;
        let a: Vec<f64> = (0..=n).map(|i| c * i as f64 * dt).collect();
        let a = trace(a, Unit::Acceleration);
        let (_, u) = integrate_to_displacement(&a).unwrap();
        let t = n as f64 * dt;
        let expected = c * t * t * t / 6.0;
        let err = (u.samples[n] - expected).abs() / expected;
        assert!(err < 1e-12, "rel err = {err:e}");
    }

    #[test]
    fn integrate_linearity() {
        let dt = 1.0 / FS;
        let a1: Vec<f64> = (0..256).map(|i| (i as f64 * dt * 900.0).sin()).collect();
        let a2: Vec<f64> = (0..256).map(|i| (i as f64 * dt * 333.0).cos()).collect();
        let (alpha, beta) = (1.7, -0.4);
        let combo: Vec<f64> = a1
            .iter()
            .zip(&a2)
            .map(|(x, y)| alpha * x + beta * y)
            .collect();
        let (_, u1) = integrate_to_displacement(&trace(a1, Unit::Acceleration)).unwrap();
        let (_, u2) = integrate_to_displacement(&trace(a2, Unit::Acceleration)).unwrap();
        let (_, uc) = integrate_to_displacement(&trace(combo, Unit::Acceleration)).unwrap();
        let umax = uc.peak_abs();
        for i in 0..256 {
            let expect = alpha * u1.samples[i] + beta * u2.samples[i];
            assert!((uc.samples[i] - expect).abs() <= 1e-12 * umax.max(1e-300));
        }
    }

    #[test]
    fn integrate_piecewise_linear_matches_cubic_oracle() {
        // random piecewise-linear acceleration with knots on sample indices;
        // closed-form cubic displacement per segment is the oracle
        let dt = 1.0 / FS;
        let knots = [0usize, 37, 120, 121, 400, 1000];
        let knot_vals = [0.0, 4.0, -2.5, 3.0, 3.0, -1.0];
        let n = *knots.last().unwrap();
        let mut a = vec![0.0; n + 1];
        for w in 0..knots.len() - 1 {
            let (i0, i1) = (knots[w], knots[w + 1]);
            let (v0, v1) = (knot_vals[w], knot_vals[w + 1]);
            for i in i0..=i1 {
                let s = if i1 > i0 {
                    (i - i0) as f64 / (i1 - i0) as f64
                } else {
                    0.0
                };
                a[i] = v0 + s * (v1 - v0);
            }
        }
        let (_, u) = integrate_to_displacement(&trace(a.clone(), Unit::Acceleration)).unwrap();

        // oracle: v(t), u(t) integrated segment-by-segment analytically
        let mut v_oracle = 0.0;
        let mut u_oracle = 0.0;
        let mut i_prev = 0usize;
        for w in 1..knots.len() {
            let (i0, i1) = (knots[w - 1], knots[w]);
            let tau = (i1 - i0) as f64 * dt;
            if tau == 0.0 {
                continue;
            }
            let (a0, a1) = (a[i0], a[i1]);
            let slope = (a1 - a0) / tau;
            u_oracle += v_oracle * tau + a0 * tau * tau / 2.0 + slope * tau * tau * tau / 6.0;
            v_oracle += a0 * tau + slope * tau * tau / 2.0;
            i_prev = i1;
        }
        assert_eq!(i_prev, n);
        let scale = u.samples[n].abs().max(u_oracle.abs());
        let err = (u.samples[n] - u_oracle).abs() / scale;
        assert!(err < 1e-10, "rel err = {err:e}");
    }

    #[test]
    fn integrate_requires_acceleration_unit() {
        let f = trace(vec![0.0, 1.0], Unit::Force);
        assert!(matches!(
            integrate_to_displacement(&f),
            Err(SignalError::WrongUnit { .. })
        ));
    }

    // --- drift removal ---

    #[test]
    fn drift_ramp_suppressed_tone_preserved() {
        let n = 1 << 16;
        let dt = 1.0 / FS;
        let tone_amp = 1e-6;
        let ramp_rate = 1e-5; // m/s of baseline drift
        let mut x = Vec::with_capacity(n);
        let mut ramp = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 * dt;
            let r = ramp_rate * t;
            ramp.push(r);
            x.push(r + tone_amp * (2.0 * std::f64::consts::PI * 435.0 * t).sin());
        }
        let tr = Trace::new(x, dt, 0.0, Unit::Displacement).unwrap();
        let out = remove_drift(&tr, &FilterSpec::drift_default()).unwrap();

        // tone amplitude via single-bin correlation over an integer number of cycles
        let cycles = (435.0 * n as f64 * dt).floor();
        let n_int = (cycles / 435.0 * FS).round() as usize;
        let tone_of = |y: &[f64]| {
            let (mut s, mut c) = (0.0, 0.0);
            for (i, &v) in y.iter().enumerate().take(n_int) {
                let ph = 2.0 * std::f64::consts::PI * 435.0 * i as f64 * dt;
                s += v * ph.sin();
                c += v * ph.cos();
            }
            2.0 * (s * s + c * c).sqrt() / n_int as f64
        };
        let amp_out = tone_of(&out.samples);
        assert!(
            (amp_out - tone_amp).abs() / tone_amp < 0.01,
            "amp ratio = {}",
            amp_out / tone_amp
        );

        // residual drift: compare against the pure tone
        let mut resid = 0.0;
        let mut ramp_rms = 0.0;
        for i in 0..n {
            let t = i as f64 * dt;
            let pure = tone_amp * (2.0 * std::f64::consts::PI * 435.0 * t).sin();
            resid += (out.samples[i] - pure).powi(2);
            ramp_rms += ramp[i] * ramp[i];
        }
        let ratio = (resid / ramp_rms).sqrt();
        assert!(ratio < 0.02, "residual/ramp RMS = {ratio}");
    }

    #[test]
    fn drift_zero_input_zero_output() {
        let tr = Trace::new(vec![0.0; 1024], 1.0 / FS, 0.0, Unit::Displacement).unwrap();
        let out = remove_drift(&tr, &FilterSpec::drift_default()).unwrap();
        assert!(out.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn drift_removes_dc_offset() {
        let n = 1 << 16;
        let tr = Trace::new(vec![1.0; n], 1.0 / FS, 0.0, Unit::Displacement).unwrap();
        let out = remove_drift(&tr, &FilterSpec::drift_default()).unwrap();
        let mid = &out.samples[n / 4..3 * n / 4];
        let mean = mid.iter().sum::<f64>() / mid.len() as f64;
        assert!(mean.abs() < 1e-3, "mean = {mean}");
    }

    #[test]
    fn drift_rejects_cutoff_above_nyquist() {
        let tr = Trace::new(vec![0.0; 64], 1.0 / 100.0, 0.0, Unit::Displacement).unwrap();
        let spec = FilterSpec {
            kind: FilterKind::Highpass { cutoff_hz: 60.0 },
            order: 4,
            zero_phase: true,
        };
        assert!(remove_drift(&tr, &spec).is_err());
    }
}
