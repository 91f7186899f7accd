//! Time integration of generator/FOM and generator/ROM interconnections and
//! steady-state output comparison.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::rom::ReducedOrderModel;

pub const MIN_STEP: f64 = 1e-12;
const MAX_STEPS: usize = 50_000_000;
const RESAMPLE_POINTS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AdaptiveRk45,
    FixedRk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub t_span: (f64, f64),
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub fixed_step: f64,
    pub steady_window_fraction: f64,
    /// Record the adaptive solution exactly at multiples of this interval
    /// (steps are shortened to land on them). `None` records every accepted step.
    pub sample_interval: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_span: (0.0, 50.0),
            method: Method::AdaptiveRk45,
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            fixed_step: 1e-3,
            steady_window_fraction: 0.4,
            sample_interval: Some(0.01),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let (t0, t1) = self.t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::config("sim.t_span", "need finite t0 < t_end"));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::config("sim.abs_tol/rel_tol", "tolerances must be positive"));
        }
        if !(self.fixed_step > 0.0) {
            return Err(Error::config("sim.fixed_step", "must be positive"));
        }
        if !(self.steady_window_fraction > 0.0 && self.steady_window_fraction < 1.0) {
            return Err(Error::config("sim.steady_window_fraction", "must lie in (0, 1)"));
        }
        if let Some(dt) = self.sample_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("sim.sample_interval", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Scalar output channel `k` at time `t`, linear interpolation.
    pub fn output_at(&self, t: f64, k: usize) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            return self.outputs[0][k];
        }
        if idx >= self.times.len() {
            return self.outputs[self.times.len() - 1][k];
        }
        let (ta, tb) = (self.times[idx - 1], self.times[idx]);
        let (ya, yb) = (self.outputs[idx - 1][k], self.outputs[idx][k]);
        if tb == ta {
            return yb;
        }
        ya + (yb - ya) * (t - ta) / (tb - ta)
    }

    /// CSV with header `t,<prefix>_1,..`.
    pub fn write_csv<W: Write>(&self, mut w: W, prefix: &str) -> Result<()> {
        let p = self.outputs.first().map_or(0, Vec::len);
        let mut header = String::from("t");
        for k in 1..=p {
            header.push_str(&format!(",{prefix}_{k}"));
        }
        writeln!(w, "{header}")?;
        for (t, y) in self.times.iter().zip(&self.outputs) {
            write!(w, "{t:.16e}")?;
            for v in y {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn check_finite(t: f64, y: &[f64]) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integration {
            t,
            reason: "state became non-finite".into(),
        })
    }
}

/// Integrate `ẏ = rhs(t, y)` over `config.t_span`; returns sample times and states.
pub fn integrate<F>(mut rhs: F, y0: &[f64], config: &SimConfig) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    config.validate()?;
    check_finite(config.t_span.0, y0)?;
    match config.method {
        Method::FixedRk4 => rk4(&mut rhs, y0, config),
        Method::AdaptiveRk45 => rk45(&mut rhs, y0, config),
    }
}

fn rk4<F>(rhs: &mut F, y0: &[f64], config: &SimConfig) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let (t0, t1) = config.t_span;
    let n = y0.len();
    let steps = ((t1 - t0) / config.fixed_step).round().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(y.clone());
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        rhs(t, &y, &mut k[0])?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k[0][i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k[1])?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k[1][i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k[2])?;
        for i in 0..n {
            tmp[i] = y[i] + h * k[2][i];
        }
        rhs(t + h, &tmp, &mut k[3])?;
        for i in 0..n {
            y[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        let tn = if s + 1 == steps { t1 } else { t0 + (s + 1) as f64 * h };
        check_finite(tn, &y)?;
        times.push(tn);
        states.push(y.clone());
    }
    Ok((times, states))
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], atol: f64, rtol: f64) -> f64 {
    let sum: f64 = (0..y.len())
        .map(|i| {
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / y.len().max(1) as f64).sqrt()
}

fn rk45<F>(rhs: &mut F, y0: &[f64], config: &SimConfig) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let (t0, t1) = config.t_span;
    let (atol, rtol) = (config.abs_tol, config.rel_tol);
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut times = vec![t0];
    let mut states = vec![y.clone()];
    if n == 0 {
        times.push(t1);
        states.push(y);
        return Ok((times, states));
    }

    // starting step from the size of y and ẏ
    rhs(t0, &y, &mut k[0])?;
    let d0 = error_norm(&y, &y, &y, atol, rtol);
    let d1 = error_norm(&y, &y, &k[0], atol, rtol);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(t1 - t0);

    let sample = config.sample_interval;
    let mut next_sample_idx: usize = 1;
    let sample_time = |k: usize| -> f64 {
        match sample {
            Some(dt) => (t0 + k as f64 * dt).min(t1),
            None => t1,
        }
    };

    let mut t = t0;
    let mut err_prev: f64 = 1e-4;
    let mut steps = 0usize;
    while t < t1 {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::Integration {
                t,
                reason: "too many steps".into(),
            });
        }
        let target = sample_time(next_sample_idx);
        let mut landing = false;
        let mut h_try = h;
        if t + h_try >= target || target - (t + h_try) < 1e-12 * target.abs().max(1.0) {
            h_try = target - t;
            landing = true;
        }
        if h_try < MIN_STEP {
            return Err(Error::Integration {
                t,
                reason: format!("step size {h_try:.3e} below minimum {MIN_STEP:e}"),
            });
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h_try * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            let (_, tail) = k.split_at_mut(s);
            rhs(t + C[s] * h_try, &tmp, &mut tail[0])?;
        }
        for i in 0..n {
            let mut y5 = y[i];
            let mut e = 0.0;
            for s in 0..7 {
                y5 += h_try * B5[s] * k[s][i];
                e += h_try * (B5[s] - B4[s]) * k[s][i];
            }
            y_new[i] = y5;
            err[i] = e;
        }
        let en = error_norm(&y, &y_new, &err, atol, rtol);
        if !en.is_finite() {
            h = h_try * 0.2;
            if h < MIN_STEP {
                return Err(Error::Integration {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }
            continue;
        }
        if en <= 1.0 {
            t = if landing { target } else { t + h_try };
            y.copy_from_slice(&y_new);
            // last stage is evaluated at the new point
            k.swap(0, 6);
            check_finite(t, &y)?;
            if landing {
                next_sample_idx += 1;
            }
            if sample.is_none() || landing {
                times.push(t);
                states.push(y.clone());
            }
            let en_c = en.max(1e-10);
            let fac = 0.9 * en_c.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            err_prev = en_c;
            let grow = fac.clamp(0.2, 10.0);
            // a landing step may be artificially short; do not shrink h from it
            h = if landing { h.max(h_try * grow) } else { h_try * grow };
        } else {
            let fac = (0.9 * en.powf(-1.0 / 5.0)).clamp(0.2, 1.0);
            h = h_try * fac;
            if h < MIN_STEP {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size {h:.3e} below minimum {MIN_STEP:e}"),
                });
            }
        }
    }
    Ok((times, states))
}

/// Integrate `ω̇ = s(ω)`, `ẋ = f(x, ℓ(ω))`; outputs `h(x)`.
pub fn simulate_fom(problem: &Problem, w0: &[f64], x0: &[f64], config: &SimConfig) -> Result<Trajectory> {
    let d = problem.generator_dim();
    let n = problem.state_dim();
    if w0.len() != d || x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: d + n,
            got: w0.len() + x0.len(),
            context: "FOM initial conditions",
        });
    }
    let mut y0 = w0.to_vec();
    y0.extend_from_slice(x0);
    let mut ell = vec![0.0; problem.generator.output_dim()];
    let rhs = |_t: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
        let (w, x) = y.split_at(d);
        let (dw, dx) = out.split_at_mut(d);
        problem.generator.s_into(w, dw);
        problem.generator.ell_into(w, &mut ell);
        problem.system.f_into(x, &ell, dx);
        Ok(())
    };
    let (times, states) = integrate(rhs, &y0, config)?;
    let outputs = states.iter().map(|s| problem.system.h(&s[d..])).collect();
    Ok(Trajectory { times, states, outputs })
}

/// Integrate `ω̇ = s(ω)` together with the ROM driven by `u = ℓ(ω)`; outputs `h(π^N(r))`.
pub fn simulate_rom(rom: &ReducedOrderModel, w0: &[f64], r0: &[f64], config: &SimConfig) -> Result<Trajectory> {
    let d = rom.dim();
    if w0.len() != d || r0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            got: w0.len() + r0.len(),
            context: "ROM initial conditions",
        });
    }
    let gen = rom.generator();
    let mut y0 = w0.to_vec();
    y0.extend_from_slice(r0);
    let mut u = vec![0.0; gen.output_dim()];
    let rhs = |_t: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
        let (w, r) = y.split_at(d);
        let (dw, dr) = out.split_at_mut(d);
        gen.s_into(w, dw);
        gen.ell_into(w, &mut u);
        rom.dynamics_into(r, &u, dr)
    };
    let (times, states) = integrate(rhs, &y0, config)?;
    if let Some(s) = states.iter().find(|s| !rom.domain().contains(&s[d..])) {
        log::warn!(
            "ROM state {:?} left the fit domain {}; expansion evaluated outside it",
            &s[d..],
            rom.domain()
        );
    }
    let outputs = states.iter().map(|s| rom.output(&s[d..])).collect();
    Ok(Trajectory { times, states, outputs })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsReport {
    pub rms_error: f64,
    pub amplitude: f64,
    pub relative_rms: f64,
}

/// Compare scalar outputs over the final `steady_window_fraction` of the time span.
pub fn steady_state_rms(y: &Trajectory, y_r: &Trajectory, config: &SimConfig) -> Result<RmsReport> {
    config.validate()?;
    if y.is_empty() || y_r.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    let (t0, t1) = config.t_span;
    let cover = |tr: &Trajectory| {
        let eps = 1e-9 * (t1 - t0);
        tr.times[0] <= t0 + eps && *tr.times.last().unwrap() >= t1 - eps
    };
    if !cover(y) || !cover(y_r) {
        return Err(Error::invalid("trajectories do not cover the configured time span"));
    }
    let start = t1 - config.steady_window_fraction * (t1 - t0);
    let mut sq = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..RESAMPLE_POINTS {
        let t = start + (t1 - start) * k as f64 / (RESAMPLE_POINTS - 1) as f64;
        let a = y.output_at(t, 0);
        let b = y_r.output_at(t, 0);
        sq += (a - b) * (a - b);
        lo = lo.min(a);
        hi = hi.max(a);
    }
    let rms_error = (sq / RESAMPLE_POINTS as f64).sqrt();
    let amplitude = (hi - lo) / 2.0;
    if !(amplitude >= 1e-12) {
        return Err(Error::Degenerate(format!(
            "FOM output amplitude {amplitude:.3e} too small for a relative error"
        )));
    }
    Ok(RmsReport {
        rms_error,
        amplitude,
        relative_rms: rms_error / amplitude,
    })
}
