//! Lotka-Volterra reduction of the radial equation.
//!
//! With `t = ln r`, `x = r^k c^-1 lambda h (-w)^q / (w')^k` and
//! `y = r w' / (-w)` the radial equation becomes
//!
//! ```text
//! x' = x (n - 2 + mu/(1+e^(2t)) - x - q y)
//! y' = y (-(n-2k)/k + x/k + y)
//! ```
//!
//! which tends to autonomous Lotka-Volterra systems with `rho = n-2+mu` as
//! `t -> -inf` and `rho = n-2` as `t -> +inf`. Under the pure power weight the
//! system is autonomous and equal to the `t -> -inf` limit.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{integrate, DenseSolution, Direction, Event, OdeOptions};
use crate::params::ProblemParams;
use crate::radial::{fmt_f64, IvpSolution, RadialCurve, WeightFamily, WeightKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Limit {
    Minus,
    Plus,
}

/// Which vector field an orbit follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// The non-autonomous system of the Matukuma weight.
    Full,
    /// One of the autonomous limits; `Minus` is also the power-weight system.
    Autonomous(Limit),
}

impl SystemKind {
    pub fn for_weight(wk: WeightKind) -> Self {
        match wk.kind {
            WeightFamily::Matukuma => SystemKind::Full,
            WeightFamily::Power => SystemKind::Autonomous(Limit::Minus),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    YCrossesYHat,
    GZero,
    Blowup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseEvent {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub kind: EventKind,
    /// Direction of the crossing of the event function.
    pub rising: bool,
}

#[derive(Debug, Clone)]
pub struct PhaseTrajectory {
    pub states: Vec<PhaseState>,
    pub events: Vec<PhaseEvent>,
    dense: Option<DenseSolution<2>>,
}

impl PhaseTrajectory {
    pub fn from_states(states: Vec<PhaseState>) -> Result<Self> {
        if states.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Domain("trajectory times must be strictly increasing".into()));
        }
        Ok(Self { states, events: Vec::new(), dense: None })
    }

    pub fn t_range(&self) -> Option<(f64, f64)> {
        Some((self.states.first()?.t, self.states.last()?.t))
    }

    pub fn last(&self) -> Option<PhaseState> {
        self.states.last().copied()
    }

    pub fn blew_up(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::Blowup)
    }

    /// `(x, y)` at `t`, from the continuous output when available and by
    /// linear interpolation of the states otherwise.
    pub fn eval(&self, t: f64) -> Option<(f64, f64)> {
        if let Some(d) = &self.dense {
            return d.eval(t).map(|v| (v[0], v[1]));
        }
        let i = self.states.partition_point(|s| s.t <= t);
        if i == 0 || (i == self.states.len() && t > self.states[i - 1].t) {
            return None;
        }
        if i == self.states.len() {
            let s = self.states[i - 1];
            return Some((s.x, s.y));
        }
        let (a, b) = (self.states[i - 1], self.states[i]);
        let f = (t - a.t) / (b.t - a.t);
        Some((a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)))
    }

    pub fn events_of(&self, kind: EventKind) -> Vec<PhaseEvent> {
        self.events.iter().filter(|e| e.kind == kind).copied().collect()
    }

    /// CSV with header `t,x,y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["t", "x", "y"])?;
        for s in &self.states {
            wr.write_record(&[fmt_f64(s.t), fmt_f64(s.x), fmt_f64(s.y)])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn events_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.events).expect("events serialize")
    }
}

fn load(p: &ProblemParams) -> Result<f64> {
    Ok(p.lambda()? / p.c_nk())
}

pub fn to_phase(r: f64, w: f64, dw: f64, p: &ProblemParams, wk: WeightKind) -> Result<PhaseState> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Transform(format!("need r > 0, got {r}")));
    }
    if !(w < 0.0) {
        return Err(Error::Transform(format!("need w < 0, got {w}")));
    }
    if !(dw > 0.0) {
        return Err(Error::Transform(format!("need w' > 0, got {dw}")));
    }
    let k = p.kf();
    let x = r.powf(k) * load(p)? * wk.h(r) * (-w).powf(p.q) / dw.powf(k);
    let y = r * dw / -w;
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::Transform(format!("phase point overflows at r = {r}")));
    }
    Ok(PhaseState { t: r.ln(), x, y })
}

/// `w` recovered from a phase point.
pub fn from_phase(t: f64, x: f64, y: f64, p: &ProblemParams, wk: WeightKind) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::Transform(format!("need x, y > 0, got ({x}, {y})")));
    }
    let k = p.kf();
    let e = 1.0 / (p.q - k);
    let r = t.exp();
    let log_scale = load(p)?.ln() + 2.0 * k * t + wk.h(r).ln();
    let log_w = e * (x.ln() + k * y.ln() - log_scale);
    let w = -log_w.exp();
    if !(w < 0.0) || !w.is_finite() {
        return Err(Error::Transform(format!("phase point ({x}, {y}) at t = {t} maps outside the finite range")));
    }
    Ok(w)
}

/// `(w, w')` recovered from a phase point; `w' = -w y / r`.
pub fn from_phase_with_slope(t: f64, x: f64, y: f64, p: &ProblemParams, wk: WeightKind) -> Result<(f64, f64)> {
    let w = from_phase(t, x, y, p, wk)?;
    Ok((w, -w * y / t.exp()))
}

fn rho_at(t: f64, p: &ProblemParams) -> f64 {
    // t = -inf and +inf give the two limits through IEEE arithmetic
    p.nf() - 2.0 + p.mu / (1.0 + (2.0 * t).exp())
}

/// Vector field of the full system; `t` may be `±inf` for the limits.
pub fn vector_field(t: f64, x: f64, y: f64, p: &ProblemParams) -> (f64, f64) {
    lv_field(rho_at(t, p), x, y, p)
}

/// Autonomous Lotka-Volterra field with growth rate `rho`.
pub fn lv_field(rho: f64, x: f64, y: f64, p: &ProblemParams) -> (f64, f64) {
    let (n, k, q) = (p.nf(), p.kf(), p.q);
    (x * (rho - x - q * y), y * (-(n - 2.0 * k) / k + x / k + y))
}

fn rho_of(p: &ProblemParams, limit: Limit) -> f64 {
    match limit {
        Limit::Minus => p.rho_minus(),
        Limit::Plus => p.rho_plus(),
    }
}

/// Jacobian of the Lotka-Volterra field with rate `rho` at `(a, b)`.
pub fn linearization(rho: f64, a: f64, b: f64, p: &ProblemParams) -> [[f64; 2]; 2] {
    let (n, k, q) = (p.nf(), p.kf(), p.q);
    [[rho - 2.0 * a - q * b, -q * a], [b / k, a / k + 2.0 * b - (n - 2.0 * k) / k]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityClass {
    Saddle,
    StableNode,
    StableSpiral,
    UnstableNode,
    UnstableSpiral,
    Center,
    Degenerate,
}

/// Eigenvalues and planar classification of a 2x2 matrix.
pub fn classify(a: [[f64; 2]; 2]) -> ([Complex64; 2], StabilityClass) {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = tr * tr - 4.0 * det;
    let sq = Complex64::new(disc, 0.0).sqrt();
    let half = Complex64::new(0.5 * tr, 0.0);
    let eig = [half - 0.5 * sq, half + 0.5 * sq];
    let scale = a.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let class = if eig.iter().any(|e| e.norm() < 1e-12) {
        StabilityClass::Degenerate
    } else if det < 0.0 {
        StabilityClass::Saddle
    } else if disc < 0.0 {
        if tr.abs() < 1e-12 * scale {
            StabilityClass::Center
        } else if tr < 0.0 {
            StabilityClass::StableSpiral
        } else {
            StabilityClass::UnstableSpiral
        }
    } else if tr < 0.0 {
        StabilityClass::StableNode
    } else {
        StabilityClass::UnstableNode
    };
    (eig, class)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub y: f64,
    #[serde(serialize_with = "serialize_eigs")]
    pub eigenvalues: [Complex64; 2],
    pub class: StabilityClass,
    pub limit: Limit,
}

fn serialize_eigs<S: serde::Serializer>(e: &[Complex64; 2], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(2))?;
    for z in e {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Equilibria of the limit system in the closed positive quadrant.
pub fn critical_points(p: &ProblemParams, limit: Limit) -> Vec<CriticalPoint> {
    let rho = rho_of(p, limit);
    let (n, k, q) = (p.nf(), p.kf(), p.q);
    let interior_y = (rho - n + 2.0 * k) / (q - k);
    let interior = (n - 2.0 * k - k * interior_y, interior_y);
    let mut pts = vec![(0.0, 0.0), (0.0, (n - 2.0 * k) / k), (rho, 0.0)];
    let inside = interior.0 >= 0.0 && interior.1 >= 0.0;
    let duplicate = pts.iter().any(|&(a, b)| (a - interior.0).abs() < 1e-12 && (b - interior.1).abs() < 1e-12);
    if inside && !duplicate {
        pts.push(interior);
    }
    pts.into_iter()
        .map(|(x, y)| {
            let (eigenvalues, class) = classify(linearization(rho, x, y, p));
            CriticalPoint { x, y, eigenvalues, class, limit }
        })
        .collect()
}

/// `G(x,y) = x + (n-2k)(q+1)/(k+1) (k y/(n-2k) - 1)`.
pub fn g_value(x: f64, y: f64, p: &ProblemParams) -> f64 {
    let (n, k, q) = (p.nf(), p.kf(), p.q);
    x + (n - 2.0 * k) * (q + 1.0) / (k + 1.0) * (k * y / (n - 2.0 * k) - 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct OrbitOptions {
    pub system: SystemKind,
    /// Blowup threshold on each coordinate.
    pub ceiling: f64,
    /// Largest spacing in `t` between stored states.
    pub max_dt: f64,
    pub h_max: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { system: SystemKind::Full, ceiling: 1e6, max_dt: 0.05, h_max: 0.25 }
    }
}

/// Orbit of the full system from `(x0, y0)` at `t0` to `t1`.
pub fn integrate_orbit(p: &ProblemParams, t0: f64, x0: f64, y0: f64, t1: f64, tol: f64) -> Result<PhaseTrajectory> {
    integrate_orbit_with(p, t0, x0, y0, t1, tol, &OrbitOptions::default())
}

pub fn integrate_orbit_with(
    p: &ProblemParams,
    t0: f64,
    x0: f64,
    y0: f64,
    t1: f64,
    tol: f64,
    opts: &OrbitOptions,
) -> Result<PhaseTrajectory> {
    if !(t1 > t0) {
        return Err(Error::Parameter(format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    if !(x0 >= 0.0 && y0 >= 0.0) {
        return Err(Error::Parameter(format!("start ({x0}, {y0}) is outside the closed positive quadrant")));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("require tol > 0, got {tol}")));
    }
    let y_hat = p.y_hat();
    let system = opts.system;
    let field = move |t: f64, s: &[f64; 2]| -> [f64; 2] {
        let (dx, dy) = match system {
            SystemKind::Full => vector_field(t, s[0], s[1], p),
            SystemKind::Autonomous(l) => lv_field(rho_of(p, l), s[0], s[1], p),
        };
        [dx, dy]
    };
    let ceiling = opts.ceiling;
    let events = [
        Event::new(move |_, s: &[f64; 2]| s[1] - y_hat),
        Event::new(|_, s: &[f64; 2]| g_value(s[0], s[1], p)),
        Event::new(move |_, s: &[f64; 2]| s[0].abs().max(s[1].abs()) - ceiling)
            .terminal()
            .direction(Direction::Rising),
    ];
    let ode = OdeOptions::with_tol(tol).h_max(opts.h_max);
    let out = integrate(field, t0, [x0, y0], t1, &ode, &events)?;
    let kinds = [EventKind::YCrossesYHat, EventKind::GZero, EventKind::Blowup];
    let mut evs: Vec<PhaseEvent> = out
        .events
        .iter()
        .chain(out.stopped_by.iter())
        .map(|h| PhaseEvent { t: h.t, x: h.y[0], y: h.y[1], kind: kinds[h.index], rising: h.rising })
        .collect();
    evs.sort_by(|a, b| a.t.total_cmp(&b.t));
    let states = out
        .solution
        .sample_times(opts.max_dt)
        .into_iter()
        .map(|t| {
            let v = out.solution.eval(t).expect("inside range");
            PhaseState { t, x: v[0], y: v[1] }
        })
        .collect();
    Ok(PhaseTrajectory { states, events: evs, dense: Some(out.solution) })
}

/// Maps a radial curve into the phase plane at the given times.
pub fn pushforward<C: RadialCurve + ?Sized>(
    curve: &C,
    p: &ProblemParams,
    wk: WeightKind,
    ts: &[f64],
) -> Result<PhaseTrajectory> {
    let states = ts
        .iter()
        .map(|&t| {
            let (w, dw) = curve
                .eval(t.exp())
                .ok_or_else(|| Error::Domain(format!("t = {t} outside the profile range")))?;
            to_phase(t.exp(), w, dw, p, wk)
        })
        .collect::<Result<Vec<_>>>()?;
    PhaseTrajectory::from_states(states)
}

/// Phase image of a shooting solution computed from its internal state, which
/// keeps `x` accurate where `w'` is tiny.
pub fn pushforward_ivp(sol: &IvpSolution, ts: &[f64]) -> Result<PhaseTrajectory> {
    let states = ts
        .iter()
        .map(|&t| {
            sol.phase(t)
                .map(|(x, y)| PhaseState { t, x, y })
                .ok_or_else(|| Error::Domain(format!("t = {t} outside the solution range")))
        })
        .collect::<Result<Vec<_>>>()?;
    PhaseTrajectory::from_states(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> ProblemParams {
        ProblemParams::new(11, 1, 3.0, 2.0).unwrap().with_lambda(7.0).unwrap()
    }

    #[test]
    fn transform_round_trip() {
        let p = canonical();
        let wk = WeightKind::matukuma(2.0);
        let s = to_phase(0.5, -2.0, 1.0, &p, wk).unwrap();
        let (w, dw) = from_phase_with_slope(s.t, s.x, s.y, &p, wk).unwrap();
        assert!((w + 2.0).abs() < 1e-12 && (dw - 1.0).abs() < 1e-12);
        assert!(matches!(to_phase(0.5, 0.0, 1.0, &p, wk), Err(Error::Transform(_))));
        assert!(matches!(to_phase(0.5, -1.0, 0.0, &p, wk), Err(Error::Transform(_))));
    }

    #[test]
    fn doubling_lambda_scales_w() {
        let p = canonical();
        let p2 = p.with_lambda(14.0).unwrap();
        let wk = WeightKind::matukuma(2.0);
        let a = from_phase(-0.3, 5.0, 0.7, &p, wk).unwrap();
        let b = from_phase(-0.3, 5.0, 0.7, &p2, wk).unwrap();
        assert!((b / a - 0.5f64.powf(0.5)).abs() < 1e-14);
    }

    #[test]
    fn field_examples() {
        let p = canonical();
        let rho = p.rho_minus();
        assert_eq!(vector_field(f64::NEG_INFINITY, rho, 0.0, &p), (0.0, 0.0));
        let (dx, dy) = vector_field(0.0, rho, 0.0, &p);
        assert!((dx + rho * p.mu / 2.0).abs() < 1e-13 && dy == 0.0);
        assert_eq!(vector_field(3.0, 0.0, 0.0, &p), (0.0, 0.0));
        let (dx, _) = vector_field(f64::INFINITY, p.rho_plus(), 0.0, &p);
        assert_eq!(dx, 0.0);
    }

    #[test]
    fn canonical_equilibria() {
        let p = canonical();
        let pts = critical_points(&p, Limit::Minus);
        assert_eq!(pts.len(), 4);
        let interior = pts[3];
        assert_eq!((interior.x, interior.y), (8.0, 1.0));
        let a = linearization(p.rho_minus(), 8.0, 1.0, &p);
        assert_eq!(a, [[-8.0, -24.0], [1.0, 1.0]]);
        assert_eq!(interior.class, StabilityClass::StableSpiral);
        assert!((interior.eigenvalues[0].re + 3.5).abs() < 1e-14);
        assert!((interior.eigenvalues[1].im - 15f64.sqrt() / 2.0).abs() < 1e-14);
        for cp in &pts[..3] {
            assert_eq!(cp.class, StabilityClass::Saddle, "{cp:?}");
        }
        // plus limit for k = 1: the interior point coincides with P3
        assert_eq!(critical_points(&p, Limit::Plus).len(), 3);

        let p8 = ProblemParams::new(11, 1, 8.0, 2.0).unwrap();
        assert_eq!(critical_points(&p8, Limit::Minus)[3].class, StabilityClass::StableNode);
    }

    #[test]
    fn g_values() {
        let p = canonical();
        assert!(g_value(0.0, 9.0, &p).abs() < 1e-14);
        assert!(g_value(18.0, 0.0, &p).abs() < 1e-14);
        assert!((g_value(8.0, 1.0, &p) + 8.0).abs() < 1e-14);
    }

    #[test]
    fn axis_is_invariant_and_spiral_events_alternate() {
        let p = canonical();
        let tr = integrate_orbit(&p, -5.0, 3.0, 0.0, 2.0, 1e-10).unwrap();
        assert!(tr.states.iter().all(|s| s.y == 0.0));

        let opts = OrbitOptions { system: SystemKind::Autonomous(Limit::Minus), ..OrbitOptions::default() };
        let tr = integrate_orbit_with(&p, 0.0, 10.0, 1.0, 7.0, 1e-12, &opts).unwrap();
        let ys = tr.events_of(EventKind::YCrossesYHat);
        let ys = &ys[..4.min(ys.len())];
        assert!(ys.len() >= 4);
        for pair in ys.windows(2) {
            assert!((pair[0].x - 8.0) * (pair[1].x - 8.0) < 0.0);
        }
        assert!(tr.states.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn blowup_event_stops_orbit() {
        let p = canonical();
        // y grows without bound along the y-axis above P2
        let tr = integrate_orbit(&p, 0.0, 0.0, 20.0, 10.0, 1e-9).unwrap();
        assert!(tr.blew_up());
        assert!(tr.last().unwrap().t < 10.0);
    }
}
