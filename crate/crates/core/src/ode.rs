//! Adaptive Dormand-Prince 5(4) integrator for small systems.

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
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MAX_GROW: f64 = 5.0;
const MIN_SHRINK: f64 = 0.2;

pub(crate) type State = [f64; 2];

/// Per-component tolerances; the error of component `c` is scaled by
/// `atol[c] + rtol * |y_c|`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerance {
    pub rtol: f64,
    pub atol: [f64; 2],
}

#[derive(Debug)]
pub(crate) struct Integrator<F: Fn(f64, &State) -> State> {
    rhs: F,
    tol: Tolerance,
    h: f64,
    pub steps: usize,
    pub rejected: usize,
}

fn lin(y: &State, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += c * k[0];
        out[1] += c * k[1];
    }
    out
}

impl<F: Fn(f64, &State) -> State> Integrator<F> {
    pub fn new(rhs: F, tol: Tolerance, h0: f64) -> Self {
        Integrator {
            rhs,
            tol,
            h: h0,
            steps: 0,
            rejected: 0,
        }
    }

    /// One trial step of size `h`; returns the fifth-order solution and the
    /// scaled error norm.
    fn trial(&self, t: f64, y: &State, h: f64) -> (State, f64) {
        let f = &self.rhs;
        let k1 = f(t, y);
        let k2 = f(t + C2 * h, &lin(y, &[(h * A21, &k1)]));
        let k3 = f(t + C3 * h, &lin(y, &[(h * A31, &k1), (h * A32, &k2)]));
        let k4 = f(t + C4 * h, &lin(y, &[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]));
        let k5 = f(t + C5 * h, &lin(
            y,
            &[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)],
        ));
        let k6 = f(t + h, &lin(
            y,
            &[
                (h * A61, &k1),
                (h * A62, &k2),
                (h * A63, &k3),
                (h * A64, &k4),
                (h * A65, &k5),
            ],
        ));
        let y5 = lin(
            y,
            &[(h * B1, &k1), (h * B3, &k3), (h * B4, &k4), (h * B5, &k5), (h * B6, &k6)],
        );
        let k7 = f(t + h, &y5);
        let mut err: f64 = 0.0;
        for c in 0..2 {
            let e = h
                * (E1 * k1[c] + E3 * k3[c] + E4 * k4[c] + E5 * k5[c] + E6 * k6[c] + E7 * k7[c]);
            let scale = self.tol.atol[c] + self.tol.rtol * y[c].abs().max(y5[c].abs());
            err = err.max((e / scale).abs());
        }
        (y5, err)
    }

    /// Advances `y` from `t` to exactly `t_target`, adapting the step.
    pub fn advance_to(&mut self, t: &mut f64, y: &mut State, t_target: f64) -> Result<(), String> {
        let mut guard = 0usize;
        while *t < t_target {
            guard += 1;
            if guard > 10_000_000 {
                return Err(format!("step budget exhausted at t = {t}"));
            }
            let remaining = t_target - *t;
            let h = self.h.min(remaining);
            if h < 1e-14 * (1.0 + t.abs()) {
                if remaining <= 1e-12 * (1.0 + t.abs()) {
                    *t = t_target;
                    return Ok(());
                }
                return Err(format!("step size underflow at t = {t}"));
            }
            let (y_new, err) = self.trial(*t, y, h);
            if !(y_new[0].is_finite() && y_new[1].is_finite()) || !err.is_finite() {
                self.h = h * MIN_SHRINK;
                self.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                *t = if h == remaining { t_target } else { *t + h };
                *y = y_new;
                self.steps += 1;
                let factor = if err == 0.0 {
                    MAX_GROW
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_SHRINK, MAX_GROW)
                };
                // a step cut short by the target should not shrink the next one
                if h == remaining && h < self.h {
                    self.h = self.h.max(h * factor);
                } else {
                    self.h = h * factor;
                }
            } else {
                self.rejected += 1;
                self.h = h * (SAFETY * err.powf(-0.2)).clamp(MIN_SHRINK, 1.0);
            }
        }
        Ok(())
    }
}
