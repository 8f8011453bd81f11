//! Dormand-Prince 5(4) integrator with FSAL stages and Hairer's continuous
//! extension, plus a fixed-step mode for step-halving studies.

use super::Real;

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Failure modes of the integrator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

/// One accepted step together with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep<T, const N: usize> {
    pub t0: T,
    pub h: T,
    cont: [[T; N]; 5],
}

impl<T: Real, const N: usize> DenseStep<T, N> {
    /// Interpolated state at `t` (valid on `[t0, t0 + h]`).
    pub fn eval(&self, t: T) -> [T; N] {
        let th = (t - self.t0) / self.h;
        let th1 = T::one() - th;
        let c = &self.cont;
        let mut out = [T::zero(); N];
        for i in 0..N {
            out[i] = c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])));
        }
        out
    }

    pub fn t1(&self) -> T {
        self.t0 + self.h
    }
}

/// Accepted steps of a run, usable as a continuous solution.
#[derive(Debug, Clone)]
pub struct Trajectory<T, const N: usize> {
    pub steps: Vec<DenseStep<T, N>>,
    pub t_start: T,
    pub y_start: [T; N],
    pub t_end: T,
    pub y_end: [T; N],
}

impl<T: Real, const N: usize> Trajectory<T, N> {
    /// Dense evaluation; clamps to the covered interval.
    pub fn eval(&self, t: T) -> [T; N] {
        if t <= self.t_start || self.steps.is_empty() {
            return self.y_start;
        }
        if t >= self.t_end {
            return self.y_end;
        }
        let idx = self.steps.partition_point(|s| s.t1() < t);
        let idx = idx.min(self.steps.len() - 1);
        self.steps[idx].eval(t)
    }
}

/// Result of an integration, possibly stopped by an event.
#[derive(Debug, Clone)]
pub struct Solution<T, const N: usize> {
    pub trajectory: Trajectory<T, N>,
    /// Location and state of the first sign change of the event function.
    pub event: Option<(T, [T; N])>,
}

/// Step control settings.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5<T> {
    pub rtol: T,
    pub atol: T,
    pub h_init: Option<T>,
    pub h_max: Option<T>,
    pub max_steps: usize,
    /// Absolute tolerance on the event location.
    pub event_tol: T,
}

impl<T: Real> Default for Dopri5<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-10),
            atol: T::lit(1e-12),
            h_init: None,
            h_max: None,
            max_steps: 1_000_000,
            event_tol: T::lit(1e-13),
        }
    }
}

struct StepOut<T, const N: usize> {
    y1: [T; N],
    k7: [T; N],
    err: [T; N],
    dense: DenseStep<T, N>,
}

fn axpy<T: Real, const N: usize>(y: &[T; N], h: T, terms: &[(f64, &[T; N])]) -> [T; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = T::zero();
        for (c, k) in terms {
            acc = acc + T::lit(*c) * k[i];
        }
        out[i] = out[i] + h * acc;
    }
    out
}

fn dp_step<T: Real, const N: usize, F>(f: &mut F, t: T, y: &[T; N], k1: &[T; N], h: T) -> StepOut<T, N>
where
    F: FnMut(T, &[T; N]) -> [T; N],
{
    let k2 = f(t + T::lit(C2) * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + T::lit(C3) * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + T::lit(C4) * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(
        t + T::lit(C5) * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(t + h, &y1);
    let zero = [T::zero(); N];
    let err = axpy(
        &zero,
        h,
        &[(E1, k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
    );
    let mut cont = [[T::zero(); N]; 5];
    for i in 0..N {
        let dy = y1[i] - y[i];
        let bspl = h * k1[i] - dy;
        cont[0][i] = y[i];
        cont[1][i] = dy;
        cont[2][i] = bspl;
        cont[3][i] = dy - h * k7[i] - bspl;
        cont[4][i] = h
            * (T::lit(D1) * k1[i]
                + T::lit(D3) * k3[i]
                + T::lit(D4) * k4[i]
                + T::lit(D5) * k5[i]
                + T::lit(D6) * k6[i]
                + T::lit(D7) * k7[i]);
    }
    StepOut {
        y1,
        k7,
        err,
        dense: DenseStep { t0: t, h, cont },
    }
}

fn to_f64<T: Real>(t: T) -> f64 {
    t.to_f64().unwrap_or(f64::NAN)
}

fn locate_event<T: Real, const N: usize, G>(step: &DenseStep<T, N>, g: &mut G, tol: T) -> (T, [T; N])
where
    G: FnMut(T, &[T; N]) -> T,
{
    let mut a = step.t0;
    let mut b = step.t1();
    let ga = g(a, &step.eval(a));
    let pos = ga > T::zero();
    while (b - a) > tol {
        let m = (a + b) * T::lit(0.5);
        if m == a || m == b {
            break;
        }
        if (g(m, &step.eval(m)) > T::zero()) == pos {
            a = m;
        } else {
            b = m;
        }
    }
    let t = (a + b) * T::lit(0.5);
    (t, step.eval(t))
}

enum Mode<T> {
    Adaptive,
    Fixed(T),
}

impl<T: Real> Dopri5<T> {
    /// Adaptive integration from `t0` to `t_end`, stopping at the first sign
    /// change of `event` when one is supplied.
    pub fn integrate<const N: usize, F, G>(
        &self,
        f: F,
        t0: T,
        y0: [T; N],
        t_end: T,
        event: Option<G>,
    ) -> Result<Solution<T, N>, OdeError>
    where
        F: FnMut(T, &[T; N]) -> [T; N],
        G: FnMut(T, &[T; N]) -> T,
    {
        self.run(f, t0, y0, t_end, event, Mode::Adaptive)
    }

    /// Fixed-step integration with step `h` (last step shortened to land on `t_end`).
    pub fn integrate_fixed<const N: usize, F, G>(
        &self,
        f: F,
        t0: T,
        y0: [T; N],
        t_end: T,
        h: T,
        event: Option<G>,
    ) -> Result<Solution<T, N>, OdeError>
    where
        F: FnMut(T, &[T; N]) -> [T; N],
        G: FnMut(T, &[T; N]) -> T,
    {
        self.run(f, t0, y0, t_end, event, Mode::Fixed(h))
    }

    fn initial_step<const N: usize>(&self, t0: T, y0: &[T; N], k1: &[T; N], t_end: T) -> T {
        if let Some(h) = self.h_init {
            return h;
        }
        let mut d0 = T::zero();
        let mut d1 = T::zero();
        for i in 0..N {
            let sc = self.atol + self.rtol * y0[i].abs();
            d0 = d0 + (y0[i] / sc).powi(2);
            d1 = d1 + (k1[i] / sc).powi(2);
        }
        let nf = T::lit(N as f64);
        let (d0, d1) = ((d0 / nf).sqrt(), (d1 / nf).sqrt());
        let h = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
            T::lit(1e-6)
        } else {
            T::lit(0.01) * d0 / d1
        };
        h.min((t_end - t0).abs())
    }

    fn run<const N: usize, F, G>(
        &self,
        mut f: F,
        t0: T,
        y0: [T; N],
        t_end: T,
        mut event: Option<G>,
        mode: Mode<T>,
    ) -> Result<Solution<T, N>, OdeError>
    where
        F: FnMut(T, &[T; N]) -> [T; N],
        G: FnMut(T, &[T; N]) -> T,
    {
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut steps = Vec::new();
        let mut h = match mode {
            Mode::Adaptive => self.initial_step(t0, &y0, &k1, t_end),
            Mode::Fixed(h) => h,
        };
        let h_max = self.h_max.unwrap_or((t_end - t0).abs());
        let mut g_prev = event.as_mut().map(|g| g(t, &y));
        let mut n_steps = 0usize;
        while t < t_end {
            if n_steps >= self.max_steps {
                return Err(OdeError::MaxSteps { t: to_f64(t) });
            }
            n_steps += 1;
            h = h.min(h_max);
            // Absorb rounding slivers so fixed steps land on t_end.
            let last = t + h * T::lit(1.0 + 1e-9) >= t_end;
            let h_try = if last { t_end - t } else { h };
            if h_try <= T::epsilon() * t.abs().max(T::one()) {
                return Err(OdeError::StepSizeUnderflow { t: to_f64(t) });
            }
            let out = dp_step(&mut f, t, &y, &k1, h_try);
            let accept = match mode {
                Mode::Fixed(_) => true,
                Mode::Adaptive => {
                    let mut acc = T::zero();
                    for ((yi, y1), e) in y.iter().zip(&out.y1).zip(&out.err) {
                        let sc = self.atol + self.rtol * yi.abs().max(y1.abs());
                        acc = acc + (*e / sc).powi(2);
                    }
                    let err = (acc / T::lit(N as f64)).sqrt();
                    if !err.is_finite() {
                        h = h_try * T::lit(0.1);
                        false
                    } else {
                        let fac = if err == T::zero() {
                            T::lit(5.0)
                        } else {
                            (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2))
                        };
                        let ok = err <= T::one();
                        h = h_try * if ok { fac } else { fac.min(T::one()) };
                        ok
                    }
                }
            };
            if !accept {
                continue;
            }
            if out.y1.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite { t: to_f64(t + h_try) });
            }
            let t1 = t + h_try;
            let step = out.dense;
            if let (Some(g), Some(gp)) = (event.as_mut(), g_prev) {
                let g1 = g(t1, &out.y1);
                if (g1 > T::zero()) != (gp > T::zero()) || g1 == T::zero() {
                    let (te, ye) = locate_event(&step, g, self.event_tol);
                    steps.push(step);
                    return Ok(Solution {
                        trajectory: Trajectory {
                            steps,
                            t_start: t0,
                            y_start: y0,
                            t_end: te,
                            y_end: ye,
                        },
                        event: Some((te, ye)),
                    });
                }
                g_prev = Some(g1);
            }
            steps.push(step);
            t = if last { t_end } else { t1 };
            y = out.y1;
            k1 = out.k7;
        }
        Ok(Solution {
            trajectory: Trajectory {
                steps,
                t_start: t0,
                y_start: y0,
                t_end: t,
                y_end: y,
            },
            event: None,
        })
    }
}
