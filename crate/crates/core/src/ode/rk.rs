//! Dormand–Prince 5(4) for two-dimensional systems, stepping exactly onto
//! requested output times.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

pub type State = [f64; 2];

#[derive(Debug, Clone, Copy)]
pub struct RkTolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step length.
    pub h_max: f64,
    pub max_steps: usize,
}

impl RkTolerances {
    pub fn new(rtol: f64) -> Self {
        Self { rtol, atol: rtol * 1e-4, h_max: f64::INFINITY, max_steps: 5_000_000 }
    }
}

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
// fifth-order weights are the last row of A; these are fifth minus fourth
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(x, y)` from `(x0, y0)` through the increasing output
/// abscissae `outputs` (all `> x0`), calling `observe(x, y)` at each one.
/// Returns the number of accepted steps. The observer may stop early.
pub fn integrate<F, O>(mut f: F, x0: f64, y0: State, outputs: &[f64], tol: &RkTolerances, mut observe: O) -> Result<usize>
where
    F: FnMut(f64, &State) -> Result<State>,
    O: FnMut(f64, &State) -> Result<ControlFlow<()>>,
{
    let (mut x, mut y) = (x0, y0);
    let mut k1 = f(x, &y)?;
    let span = outputs.last().map_or(0.0, |&e| e - x0);
    let mut h = initial_step(&y, &k1, tol).min(span).min(tol.h_max);
    let mut steps = 0usize;

    for &target in outputs {
        if !(target > x) {
            return Err(Error::Integrator { at: x, reason: format!("output {target} not beyond {x}") });
        }
        while x < target {
            if steps >= tol.max_steps {
                return Err(Error::Integrator { at: x, reason: "step budget exhausted".into() });
            }
            let remaining = target - x;
            let landing = h >= remaining * (1.0 - 1e-12);
            let step = if landing { remaining } else { h };
            let (y_new, k7, err) = match dp_step(&mut f, x, &y, &k1, step) {
                Ok(v) => v,
                Err(_) => {
                    // evaluation left the domain: retreat
                    h = step * 0.25;
                    if h < 1e-14 * x.abs().max(1.0) {
                        return Err(Error::Integrator { at: x, reason: "step size underflow".into() });
                    }
                    continue;
                }
            };
            let mut norm = 0.0f64;
            for i in 0..2 {
                let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                norm = norm.max((err[i] / sc).abs());
            }
            if !norm.is_finite() {
                h = step * 0.25;
                continue;
            }
            if norm <= 1.0 {
                x = if landing { target } else { x + step };
                y = y_new;
                k1 = k7;
                steps += 1;
                let grow = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                // a landing step may be artificially short; do not shrink on it
                let base = if landing { h.max(step) } else { step };
                h = (base * grow).min(tol.h_max);
            } else {
                h = step * (0.9 * norm.powf(-0.2)).clamp(0.1, 0.9);
                if h < 1e-14 * x.abs().max(1.0) {
                    return Err(Error::Integrator { at: x, reason: "step size underflow".into() });
                }
            }
        }
        if let ControlFlow::Break(()) = observe(x, &y)? {
            break;
        }
    }
    Ok(steps)
}

fn initial_step(y: &State, dy: &State, tol: &RkTolerances) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for i in 0..2 {
        let sc = tol.atol + tol.rtol * y[i].abs();
        d0 = d0.max((y[i] / sc).abs());
        d1 = d1.max((dy[i] / sc).abs());
    }
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
}

#[allow(clippy::type_complexity)]
fn dp_step<F>(f: &mut F, x: f64, y: &State, k1: &State, h: f64) -> Result<(State, State, State)>
where
    F: FnMut(f64, &State) -> Result<State>,
{
    let mut k = [[0.0; 2]; 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                ys[0] += h * a * kj[0];
                ys[1] += h * a * kj[1];
            }
        }
        if s == 6 {
            let kk = f(x + h, &ys)?;
            k[6] = kk;
            let mut err = [0.0; 2];
            for (j, kj) in k.iter().enumerate() {
                err[0] += h * E[j] * kj[0];
                err[1] += h * E[j] * kj[1];
            }
            if !(ys[0].is_finite() && ys[1].is_finite()) {
                return Err(Error::Integrator { at: x, reason: "non-finite state".into() });
            }
            return Ok((ys, kk, err));
        }
        k[s] = f(x + C[s] * h, &ys)?;
    }
    unreachable!()
}
