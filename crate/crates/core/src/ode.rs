//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.
//!
//! Used to generate tabulated warps and stationary profiles. The state is a
//! plain `[f64; D]`; every accepted step is reported to an observer together
//! with the derivative at the new point (first-same-as-last), which is what
//! the Hermite tables downstream need.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-6,
            h_max: f64::INFINITY,
            h_min: 1e-14,
        }
    }
}

/// Observer verdict after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    pub steps: usize,
    pub stopped_early: bool,
}

// Dormand–Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn all_finite<const D: usize>(v: &[f64; D]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (`t_end > t0`).
///
/// `observe(t, y, dydt)` is called once at the initial point and after every
/// accepted step; returning [`Flow::Stop`] ends the integration early.
pub fn integrate<const D: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    tol: &Tolerances,
    mut observe: O,
) -> Result<Outcome<D>>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
    O: FnMut(f64, &[f64; D], &[f64; D]) -> Flow,
{
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    if !all_finite(&k1) || !all_finite(&y) {
        return Err(Error::StepUnderflow { last_good: t0 });
    }
    if observe(t, &y, &k1) == Flow::Stop {
        return Ok(Outcome {
            t,
            y,
            steps: 0,
            stopped_early: true,
        });
    }
    let mut h = tol.h_init.min(tol.h_max).min(t_end - t0);
    let mut steps = 0;

    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        if h < tol.h_min * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { last_good: t });
        }
        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + C4 * h,
            &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        let k7 = f(t + h, &y_new);

        let stage_ok = [&k2, &k3, &k4, &k5, &k6, &k7].iter().all(|k| all_finite(k))
            && all_finite(&y_new);
        let err = if stage_ok {
            let mut acc = 0.0;
            for i in 0..D {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                acc += (e / sc).powi(2);
            }
            (acc / D as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            steps += 1;
            if observe(t, &y, &k1) == Flow::Stop {
                return Ok(Outcome {
                    t,
                    y,
                    steps,
                    stopped_early: true,
                });
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * fac).min(tol.h_max);
        } else {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.25
            };
            h *= fac;
        }
    }

    Ok(Outcome {
        t,
        y,
        steps,
        stopped_early: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_closes_orbit() {
        let out = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            2.0 * std::f64::consts::PI,
            &Tolerances::default(),
            |_, _, _| Flow::Continue,
        )
        .unwrap();
        assert!((out.y[0] - 1.0).abs() < 1e-8);
        assert!(out.y[1].abs() < 1e-8);
    }

    #[test]
    fn exponential_growth_matches() {
        let out = integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            5.0,
            &Tolerances::default(),
            |_, _, _| Flow::Continue,
        )
        .unwrap();
        assert!((out.y[0] / 5f64.exp() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn observer_can_stop() {
        let out = integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            10.0,
            &Tolerances::default(),
            |_, y, _| if y[0] > 100.0 { Flow::Stop } else { Flow::Continue },
        )
        .unwrap();
        assert!(out.stopped_early);
        assert!(out.t < 10.0);
    }

    #[test]
    fn finite_time_singularity_reports_underflow() {
        // y' = y^2, y(0) = 1 blows up at t = 1.
        let res = integrate(
            |_, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            2.0,
            &Tolerances::default(),
            |_, _, _| Flow::Continue,
        );
        match res {
            Err(Error::StepUnderflow { last_good }) => assert!(last_good < 1.0 && last_good > 0.9),
            other => panic!("expected underflow, got {other:?}"),
        }
    }
}
