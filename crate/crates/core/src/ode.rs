//! Dormand-Prince 5(4) integrator with continuous output and event location.
//!
//! Fixed-size states (`[f64; N]`) keep the hot loop allocation free. Every
//! accepted step stores the coefficients of the fourth-order continuous
//! extension, so a [`DenseSolution`] can be evaluated anywhere on the
//! integration interval.

use crate::error::{Error, Result};

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

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Bisection resolution for event times.
    pub event_tol: f64,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }

    pub fn h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_init: None,
            h_max: f64::INFINITY,
            h_min: 1e-14,
            max_steps: 1_000_000,
            event_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Any,
    Rising,
    Falling,
}

/// A scalar event function `g(t, y)`; an event fires where `g` changes sign.
pub struct Event<'a, const N: usize> {
    pub g: Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>,
    pub direction: Direction,
    pub terminal: bool,
}

impl<'a, const N: usize> Event<'a, N> {
    pub fn new(g: impl Fn(f64, &[f64; N]) -> f64 + 'a) -> Self {
        Self { g: Box::new(g), direction: Direction::Any, terminal: false }
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }

    pub fn direction(mut self, d: Direction) -> Self {
        self.direction = d;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit<const N: usize> {
    /// Index into the event slice passed to [`integrate`].
    pub index: usize,
    pub t: f64,
    pub y: [f64; N],
    pub rising: bool,
}

#[derive(Debug, Clone)]
struct Segment<const N: usize> {
    t0: f64,
    h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let r = &self.rcont;
        std::array::from_fn(|i| {
            r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])))
        })
    }

    fn derivative(&self, t: f64) -> [f64; N] {
        // d/dtheta of r0 + th(r1 + th1(r2 + th(r3 + th1 r4)))
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        std::array::from_fn(|i| {
            let inner3 = r[3][i] + th1 * r[4][i];
            let d_inner3 = -r[4][i];
            let inner2 = r[2][i] + th * inner3;
            let d_inner2 = inner3 + th * d_inner3;
            let inner1 = r[1][i] + th1 * inner2;
            let d_inner1 = -inner2 + th1 * d_inner2;
            (inner1 + th * d_inner1) / self.h
        })
    }
}

/// Continuous solution assembled from accepted steps.
#[derive(Debug, Clone)]
pub struct DenseSolution<const N: usize> {
    segments: Vec<Segment<N>>,
    t_end: f64,
    y_end: [f64; N],
    t_start: f64,
    y_start: [f64; N],
}

impl<const N: usize> DenseSolution<N> {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn y_end(&self) -> [f64; N] {
        self.y_end
    }

    pub fn y_start(&self) -> [f64; N] {
        self.y_start
    }

    pub fn step_count(&self) -> usize {
        self.segments.len()
    }

    fn segment_index(&self, t: f64) -> usize {
        match self.segments.binary_search_by(|s| s.t0.partial_cmp(&t).expect("finite t")) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    /// Solution at `t`, or `None` outside `[t_start, t_end]`.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        if !(t >= self.t_start && t <= self.t_end) {
            return None;
        }
        if t == self.t_end {
            return Some(self.y_end);
        }
        if self.segments.is_empty() {
            return Some(self.y_start);
        }
        Some(self.segments[self.segment_index(t)].eval(t))
    }

    /// Time derivative of the continuous extension.
    pub fn eval_derivative(&self, t: f64) -> Option<[f64; N]> {
        if !(t >= self.t_start && t <= self.t_end) || self.segments.is_empty() {
            return None;
        }
        Some(self.segments[self.segment_index(t)].derivative(t))
    }

    /// Step boundaries `t_0 < t_1 < ... < t_end`.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.segments.iter().map(|s| s.t0).collect();
        if m.last().is_none_or(|&last| last < self.t_end) {
            m.push(self.t_end);
        }
        if m.is_empty() {
            m.push(self.t_start);
        }
        m
    }

    /// Mesh refined so that consecutive points are at most `max_dt` apart.
    pub fn sample_times(&self, max_dt: f64) -> Vec<f64> {
        let mesh = self.mesh();
        let mut out = Vec::with_capacity(mesh.len() * 2);
        for w in mesh.windows(2) {
            let (a, b) = (w[0], w[1]);
            let pieces = ((b - a) / max_dt).ceil().max(1.0) as usize;
            for j in 0..pieces {
                out.push(a + (b - a) * j as f64 / pieces as f64);
            }
        }
        out.push(*mesh.last().expect("non-empty mesh"));
        out
    }
}

#[derive(Debug, Clone)]
pub struct Outcome<const N: usize> {
    pub solution: DenseSolution<N>,
    pub events: Vec<EventHit<N>>,
    /// The terminal event that stopped the integration, if any.
    pub stopped_by: Option<EventHit<N>>,
}

fn add_scaled<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], opts: &OdeOptions) -> f64 {
    let s: f64 = (0..N)
        .map(|i| {
            let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

fn is_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn initial_step<const N: usize, F>(f: &F, t0: f64, y0: &[f64; N], f0: &[f64; N], span: f64, opts: &OdeOptions) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let sc = |i: usize| opts.atol + opts.rtol * y0[i].abs();
    let norm = |v: &[f64; N]| ((0..N).map(|i| (v[i] / sc(i)).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = norm(y0);
    let d1 = norm(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(opts.h_max).min(span);
    let y1 = add_scaled(y0, h0, &[(1.0, f0)]);
    let f1 = f(t0 + h0, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = if is_finite(&f1) { norm(&diff) / h0 } else { f64::INFINITY };
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.h_max).min(span)
}

/// Integrates `y' = f(t, y)` from `t0` to `t1 > t0`.
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &OdeOptions,
    events: &[Event<'_, N>],
) -> Result<Outcome<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    if !(t1 > t0) {
        return Err(Error::Integration { t: t0, reason: format!("empty interval [{t0}, {t1}]") });
    }
    if !is_finite(&y0) {
        return Err(Error::Integration { t: t0, reason: "non-finite initial state".into() });
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    if !is_finite(&k1) {
        return Err(Error::Integration { t, reason: "non-finite derivative at initial state".into() });
    }
    let mut h = opts.h_init.unwrap_or_else(|| initial_step(&f, t0, &y0, &k1, t1 - t0, opts));
    let mut segments: Vec<Segment<N>> = Vec::new();
    let mut hits: Vec<EventHit<N>> = Vec::new();
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(t, &y)).collect();
    let mut rejected_last = false;

    for _ in 0..opts.max_steps {
        if t >= t1 {
            break;
        }
        if t + h > t1 || t1 - (t + h) < 1e-12 * h {
            h = t1 - t;
        }
        if h < opts.h_min * t.abs().max(1.0) {
            return Err(Error::Integration { t, reason: format!("step size underflow (h = {h:e})") });
        }

        let k2 = f(t + C2 * h, &add_scaled(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &add_scaled(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &add_scaled(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &add_scaled(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let y6 = add_scaled(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let k6 = f(t + h, &y6);
        let y_new = add_scaled(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);

        if !is_finite(&y_new) || !is_finite(&k7) {
            h *= 0.25;
            rejected_last = true;
            continue;
        }

        let err: [f64; N] = std::array::from_fn(|i| {
            h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let en = error_norm(&err, &y, &y_new, opts);

        if en > 1.0 {
            let fac = (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            rejected_last = true;
            continue;
        }

        let rcont: [[f64; N]; 5] = {
            let r0 = y;
            let r1: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
            let r2: [f64; N] = std::array::from_fn(|i| h * k1[i] - r1[i]);
            let r3: [f64; N] = std::array::from_fn(|i| r1[i] - h * k7[i] - r2[i]);
            let r4: [f64; N] = std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            [r0, r1, r2, r3, r4]
        };
        let seg = Segment { t0: t, h, rcont };
        let t_new = t + h;

        // Event scan: step ends plus a few interior points of the continuous extension.
        let mut stop: Option<EventHit<N>> = None;
        if !events.is_empty() {
            const PROBES: usize = 4;
            let mut earliest_terminal: Option<EventHit<N>> = None;
            for (idx, ev) in events.iter().enumerate() {
                let mut ta = t;
                let mut ga = g_prev[idx];
                for j in 1..=PROBES {
                    let tb = if j == PROBES { t_new } else { t + h * j as f64 / PROBES as f64 };
                    let yb = if j == PROBES { y_new } else { seg.eval(tb) };
                    let gb = (ev.g)(tb, &yb);
                    let crossed = (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0);
                    if crossed {
                        let rising = gb > ga;
                        let wanted = match ev.direction {
                            Direction::Any => true,
                            Direction::Rising => rising,
                            Direction::Falling => !rising,
                        };
                        if wanted {
                            let te = locate(&seg, ev, ta, ga, tb, opts.event_tol);
                            let hit = EventHit { index: idx, t: te, y: seg.eval(te), rising };
                            if ev.terminal {
                                if earliest_terminal.is_none_or(|e| te < e.t) {
                                    earliest_terminal = Some(hit);
                                }
                                break;
                            }
                            hits.push(hit);
                        }
                    }
                    if gb != 0.0 {
                        ta = tb;
                        ga = gb;
                    }
                }
                g_prev[idx] = ga;
            }
            stop = earliest_terminal;
        }

        segments.push(seg);
        if let Some(hit) = stop {
            hits.retain(|e| e.t <= hit.t);
            hits.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite"));
            let solution = DenseSolution { segments, t_end: hit.t, y_end: hit.y, t_start: t0, y_start: y0 };
            return Ok(Outcome { solution, events: hits, stopped_by: Some(hit) });
        }

        t = t_new;
        y = y_new;
        k1 = k7;
        let mut fac = (0.9 * en.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
        if rejected_last {
            fac = fac.min(1.0);
        }
        rejected_last = false;
        h = (h * fac).min(opts.h_max);
    }

    if t < t1 {
        return Err(Error::Integration { t, reason: format!("step budget of {} exhausted", opts.max_steps) });
    }
    hits.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite"));
    let solution = DenseSolution { segments, t_end: t, y_end: y, t_start: t0, y_start: y0 };
    Ok(Outcome { solution, events: hits, stopped_by: None })
}

fn locate<const N: usize>(seg: &Segment<N>, ev: &Event<'_, N>, mut a: f64, ga: f64, mut b: f64, tol: f64) -> f64 {
    let sa = ga.signum();
    while b - a > tol {
        let m = 0.5 * (a + b);
        let gm = (ev.g)(m, &seg.eval(m));
        if gm == 0.0 {
            return m;
        }
        if gm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_accuracy_and_dense_output() {
        let out = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 2.0, &OdeOptions::with_tol(1e-12), &[]).unwrap();
        let sol = out.solution;
        assert!((sol.y_end()[0] - 2f64.exp()).abs() < 1e-10 * 2f64.exp());
        for i in 0..=200 {
            let t = 2.0 * i as f64 / 200.0;
            let v = sol.eval(t).unwrap()[0];
            assert!((v - t.exp()).abs() < 1e-10 * t.exp(), "t={t} err={}", v - t.exp());
            let d = sol.eval_derivative(t).unwrap()[0];
            assert!((d - t.exp()).abs() < 1e-7 * t.exp());
        }
        assert!(sol.eval(2.5).is_none());
    }

    #[test]
    fn harmonic_oscillator_and_event_location() {
        let ev = [Event::new(|_, y: &[f64; 2]| y[0])];
        let out = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            10.0,
            &OdeOptions::with_tol(1e-11),
            &ev,
        )
        .unwrap();
        // zeros of sin at pi, 2pi, 3pi (t = 0 is the start and not an event)
        let ts: Vec<f64> = out.events.iter().map(|e| e.t).collect();
        assert_eq!(ts.len(), 3, "{ts:?}");
        for (j, t) in ts.iter().enumerate() {
            assert!((t - (j + 1) as f64 * std::f64::consts::PI).abs() < 1e-9);
        }
        assert!(!out.events[0].rising && out.events[1].rising);
    }

    #[test]
    fn terminal_event_truncates() {
        let ev = [Event::new(|_, y: &[f64; 1]| y[0] - 3.0).terminal()];
        let out = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 5.0, &OdeOptions::default(), &ev).unwrap();
        let hit = out.stopped_by.unwrap();
        assert!((hit.t - 3f64.ln()).abs() < 1e-9);
        assert_eq!(out.solution.t_end(), hit.t);
    }

    #[test]
    fn blowup_reports_failure() {
        // y' = y^2 from y(0) = 1 blows up at t = 1
        let r = integrate(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], 2.0, &OdeOptions::default(), &[]);
        assert!(matches!(r, Err(Error::Integration { .. })));
    }

    #[test]
    fn sample_times_respect_spacing() {
        let out = integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 3.0, &OdeOptions::default(), &[]).unwrap();
        let ts = out.solution.sample_times(0.05);
        assert_eq!(ts[0], 0.0);
        assert_eq!(*ts.last().unwrap(), 3.0);
        assert!(ts.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.05 + 1e-12));
    }
}
