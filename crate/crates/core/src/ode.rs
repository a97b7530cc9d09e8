//! Adaptive Dormand–Prince 5(4) integrator.
//!
//! The right-hand side may refuse a state (returning [`Inadmissible`]); the
//! step is then retried with half the size. This is how the shock-boundary
//! system keeps clear of the curve where its forcing blows up.

use thiserror::Error;

/// Returned by a right-hand side when the state lies outside its domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inadmissible;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h}); the state keeps leaving the admissible region")]
    StepUnderflow { t: f64, h: f64 },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("initial state is inadmissible at t = {0}")]
    BadStart(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step.
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_init: 1e-6, max_steps: 1_000_000 }
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
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Integrate `y' = rhs(t, y)` from `(t0, y0)` to `t_end`.
///
/// Every time in `stops` inside `(t0, t_end)` is landed on exactly. The
/// observer sees each accepted step as `(t, y, y')`, starting with the
/// initial point.
pub fn integrate<R, O>(
    mut rhs: R,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    stops: &[f64],
    tol: &Tolerances,
    mut observe: O,
) -> Result<Vec<f64>, OdeError>
where
    R: FnMut(f64, &[f64], &mut [f64]) -> Result<(), Inadmissible>,
    O: FnMut(f64, &[f64], &[f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    rhs(t0, &y, &mut k[0]).map_err(|_| OdeError::BadStart(t0))?;
    observe(t0, &y, &k[0]);

    let mut targets: Vec<f64> = stops.iter().copied().filter(|&s| s > t0 && s < t_end).collect();
    targets.sort_by(f64::total_cmp);
    targets.push(t_end);

    let mut t = t0;
    let mut h = tol.h_init.min(t_end - t0).max(f64::MIN_POSITIVE);
    let mut steps = 0usize;
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    for &target in &targets {
        while t < target {
            if steps >= tol.max_steps {
                return Err(OdeError::TooManySteps(tol.max_steps));
            }
            let remaining = target - t;
            let lands = h >= remaining;
            let h_try = if lands { remaining } else { h };
            let h_min = 1e-15 * t.abs().max(1e-300) + f64::MIN_POSITIVE;
            if h_try < h_min && !lands {
                return Err(OdeError::StepUnderflow { t, h: h_try });
            }

            let mut ok = true;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += h_try * A[s][j] * kj[i];
                    }
                    stage[i] = acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                if rhs(t + C[s] * h_try, &stage, &mut tail[0]).is_err() {
                    ok = false;
                    break;
                }
            }
            if !ok {
                h = 0.5 * h_try;
                if h < h_min {
                    return Err(OdeError::StepUnderflow { t, h });
                }
                continue;
            }
            // the seventh stage is evaluated at the fifth-order solution
            y_new.copy_from_slice(&stage);

            let mut err = 0.0;
            for i in 0..n {
                let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h_try;
                let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / scale).powi(2);
            }
            let err = (err / n as f64).sqrt();

            if err <= 1.0 {
                steps += 1;
                t = if lands { target } else { t + h_try };
                y.copy_from_slice(&y_new);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                observe(t, &y, &k[0]);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // keep the pre-truncation step size when a stop shortened this one
                h = if lands { h.max(h_try * grow) } else { h_try * grow };
            } else {
                h = h_try * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_tolerance() {
        let tol = Tolerances { h_init: 1e-3, ..Default::default() };
        let y = integrate(
            |_, y, dy| {
                dy[0] = -2.0 * y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            3.0,
            &[],
            &tol,
            |_, _, _| {},
        )
        .unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn stops_are_landed_exactly() {
        let mut seen = Vec::new();
        integrate(
            |_, _, dy| {
                dy[0] = 1.0;
                Ok(())
            },
            0.0,
            &[0.0],
            1.0,
            &[0.3, 0.7],
            &Tolerances { h_init: 0.05, ..Default::default() },
            |t, y, _| seen.push((t, y[0])),
        )
        .unwrap();
        for target in [0.3, 0.7, 1.0] {
            let hit = seen.iter().find(|(t, _)| *t == target).expect("stop landed");
            assert!((hit.1 - target).abs() < 1e-14);
        }
    }

    #[test]
    fn harmonic_oscillator_phase() {
        let y = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            10.0,
            &[],
            &Tolerances { h_init: 0.01, ..Default::default() },
            |_, _, _| {},
        )
        .unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-8);
        assert!((y[1] + 10f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn inadmissible_states_shrink_the_step() {
        // y' = 1 with y forbidden above 0.5: the integrator must stall at the wall
        let res = integrate(
            |_, y, dy| {
                if y[0] > 0.5 {
                    return Err(Inadmissible);
                }
                dy[0] = 1.0;
                Ok(())
            },
            0.0,
            &[0.0],
            1.0,
            &[],
            &Tolerances { h_init: 0.1, ..Default::default() },
            |_, _, _| {},
        );
        match res {
            Err(OdeError::StepUnderflow { t, .. }) => assert!((t - 0.5).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }
}
