//! Geodesic spheres about a fixed center evolve by the scalar equation
//! `dr/dt = -F(cot r, ..., cot r)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::speeds::SpeedFunction;

/// Integration stops once the radius falls below this value.
pub const R_FLOOR: f64 = 1e-6;
/// Integration stops once the distance to the equator falls below this value.
pub const R_CEIL: f64 = 1e-8;

const MAX_STEPS: usize = 2_000_000;
const LIFESPAN_LEVELS: usize = 30;
const LIFESPAN_CAP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifespanClass {
    Finite,
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lifespan {
    /// `None` when infinite.
    pub value: Option<f64>,
    pub class: LifespanClass,
    /// True when the verdict rests on the numerical divergence test alone.
    pub heuristic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereStop {
    Collapse,
    Equator,
    TimeLimit,
}

#[derive(Clone, Debug)]
pub struct SphereTrajectory {
    pub speed: SpeedFunction,
    pub tol: f64,
    /// `(t, r)` pairs ordered by increasing `t`.
    pub samples: Vec<(f64, f64)>,
    pub lifespan: Lifespan,
    /// Extrapolated collapse time, when the run reached the collapse floor.
    pub collapse_time: Option<f64>,
    /// Time at which the equator margin was crossed, for backward runs.
    pub equator_time: Option<f64>,
    pub stop: SphereStop,
}

impl SphereTrajectory {
    pub fn lifespan_class(&self) -> LifespanClass {
        self.lifespan.class
    }

    pub fn first(&self) -> (f64, f64) {
        self.samples[0]
    }

    pub fn last(&self) -> (f64, f64) {
        *self.samples.last().unwrap()
    }

    /// Radius at time `t`, re-integrated from the nearest earlier sample.
    pub fn radius_at(&self, t: f64) -> Result<f64> {
        let (t0, _) = self.first();
        let (t1, _) = self.last();
        if !(t >= t0 && t <= t1) {
            return Err(Error::Precondition(format!(
                "time {t} outside the sampled range [{t0}, {t1}]"
            )));
        }
        let idx = self.samples.partition_point(|&(ts, _)| ts <= t) - 1;
        let (ts, rs) = self.samples[idx];
        if ts == t {
            return Ok(rs);
        }
        let mut solver = Solver::new(&self.speed, self.tol, rs, ts);
        solver.run_to(t)?;
        Ok(solver.radius())
    }

    /// Speed value `F(cot r, ..., cot r)` at each sample.
    pub fn speed_values(&self) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .map(|&(_, r)| self.speed.on_diagonal(1.0 / r.tan()))
            .collect()
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Which coordinate carries the state: the radius itself, or the distance to
/// the equator once the radius exceeds `pi/4`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Chart {
    Radius,
    Colatitude,
}

struct Solver<'a> {
    speed: &'a SpeedFunction,
    tol: f64,
    chart: Chart,
    y: f64,
    t: f64,
    h: Option<f64>,
}

impl<'a> Solver<'a> {
    fn new(speed: &'a SpeedFunction, tol: f64, r: f64, t: f64) -> Self {
        let (chart, y) = if r > FRAC_PI_4 {
            (Chart::Colatitude, FRAC_PI_2 - r)
        } else {
            (Chart::Radius, r)
        };
        Self {
            speed,
            tol,
            chart,
            y,
            t,
            h: None,
        }
    }

    fn radius(&self) -> f64 {
        match self.chart {
            Chart::Radius => self.y,
            Chart::Colatitude => FRAC_PI_2 - self.y,
        }
    }

    fn distance_to_equator(&self) -> f64 {
        match self.chart {
            Chart::Radius => FRAC_PI_2 - self.y,
            Chart::Colatitude => self.y,
        }
    }

    fn rate(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y < FRAC_PI_2) {
            return Err(Error::OutsideCone(vec![y]));
        }
        match self.chart {
            Chart::Radius => Ok(-self.speed.on_diagonal(1.0 / y.tan())?),
            Chart::Colatitude => self.speed.on_diagonal(y.tan()),
        }
    }

    fn rechart(&mut self) {
        let r = self.radius();
        if self.chart == Chart::Radius && r > FRAC_PI_4 {
            self.chart = Chart::Colatitude;
            self.y = FRAC_PI_2 - r;
        } else if self.chart == Chart::Colatitude && r < FRAC_PI_4 {
            self.chart = Chart::Radius;
            self.y = r;
        }
    }

    /// One adaptive step toward `t_end`. Returns false once `t_end` is reached.
    fn advance(&mut self, t_end: f64) -> Result<bool> {
        let dir = (t_end - self.t).signum();
        if self.t == t_end {
            return Ok(false);
        }
        let mut h = match self.h {
            Some(h) => h,
            None => {
                let slope = self.rate(self.y)?.abs().max(1e-12);
                (1e-3 * self.y / slope).min(1e-2)
            }
        };
        let mut rejections = 0;
        loop {
            let remaining = (t_end - self.t).abs();
            let mut last = false;
            if h >= remaining {
                h = remaining;
                last = true;
            }
            if h < 1e-15 * (1.0 + self.t.abs()) || rejections > 200 {
                return Err(Error::IntegrationStall {
                    t: self.t,
                    reason: format!("step size {h:e} at radius {}", self.radius()),
                });
            }
            match self.try_step(dir * h) {
                Ok((y_new, err)) if y_new > 0.0 && y_new < FRAC_PI_2 => {
                    let ratio = err / self.tol;
                    if ratio <= 1.0 {
                        self.y = y_new;
                        self.t = if last { t_end } else { self.t + dir * h };
                        let grow = if ratio == 0.0 {
                            5.0
                        } else {
                            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
                        };
                        self.h = Some(h * grow);
                        self.rechart();
                        return Ok(!last);
                    }
                    h *= (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.5);
                }
                _ => h *= 0.25,
            }
            rejections += 1;
        }
    }

    fn try_step(&self, h: f64) -> Result<(f64, f64)> {
        let mut k = [0.0; 7];
        for i in 0..7 {
            let mut y = self.y;
            for j in 0..i {
                y += h * A[i][j] * k[j];
            }
            k[i] = self.rate(y)?;
        }
        let mut y5 = self.y;
        let mut err = 0.0;
        for i in 0..6 {
            y5 += h * A[6][i] * k[i];
        }
        for i in 0..7 {
            err += h * E[i] * k[i];
        }
        if !y5.is_finite() {
            return Err(Error::NonFinite(vec![y5]));
        }
        Ok((y5, err.abs()))
    }

    fn run_to(&mut self, t_end: f64) -> Result<()> {
        let mut steps = 0;
        while self.advance(t_end)? {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::IntegrationStall {
                    t: self.t,
                    reason: "step budget exhausted".into(),
                });
            }
        }
        Ok(())
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 1e-14 && tol < 1e-4) {
        return Err(Error::Precondition(format!(
            "tolerance must lie in (1e-14, 1e-4), got {tol}"
        )));
    }
    Ok(())
}

/// Integrates from `r(t_span.0) = r0` toward `t_span.1`, which may lie on either
/// side of the start and may be infinite. Stops early at the collapse floor or
/// the equator margin.
pub fn integrate_sphere(
    speed: &SpeedFunction,
    r0: f64,
    t_span: (f64, f64),
    tol: f64,
) -> Result<SphereTrajectory> {
    if !(r0 > 0.0 && r0 < FRAC_PI_2) {
        return Err(Error::Precondition(format!(
            "initial radius must lie in (0, pi/2), got {r0}"
        )));
    }
    check_tol(tol)?;
    let (t0, t1) = t_span;
    if !t0.is_finite() || t1.is_nan() {
        return Err(Error::Precondition("start time must be finite".into()));
    }
    let lifespan = lifespan(speed, tol)?;
    let forward = t1 >= t0;
    let mut solver = Solver::new(speed, tol, r0, t0);
    let mut samples = vec![(t0, r0)];
    let mut collapse_time = None;
    let mut equator_time = None;
    let mut stop = SphereStop::TimeLimit;
    let mut steps = 0;
    loop {
        let more = solver.advance(t1)?;
        let r = solver.radius();
        samples.push((solver.t, r));
        if forward && r < R_FLOOR {
            collapse_time = Some(solver.t + extrapolate_collapse(speed, r)?);
            stop = SphereStop::Collapse;
            break;
        }
        if !forward && solver.distance_to_equator() < R_CEIL {
            let s = solver.distance_to_equator();
            equator_time = Some(solver.t + time_to_margin(speed, s)?);
            stop = SphereStop::Equator;
            break;
        }
        if !more {
            break;
        }
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::IntegrationStall {
                t: solver.t,
                reason: "step budget exhausted".into(),
            });
        }
    }
    if !forward {
        samples.reverse();
    }
    Ok(SphereTrajectory {
        speed: speed.clone(),
        tol,
        samples,
        lifespan,
        collapse_time,
        equator_time,
        stop,
    })
}

/// Runs backward to the equator margin and forward to collapse from the same
/// initial radius at `t = 0`.
pub fn integrate_both(speed: &SpeedFunction, r0: f64, tol: f64) -> Result<SphereTrajectory> {
    let back = integrate_sphere(speed, r0, (0.0, f64::NEG_INFINITY), tol)?;
    let fwd = integrate_sphere(speed, r0, (0.0, f64::INFINITY), tol)?;
    let mut samples = back.samples;
    samples.pop();
    samples.extend(fwd.samples);
    Ok(SphereTrajectory {
        samples,
        collapse_time: fwd.collapse_time,
        equator_time: back.equator_time,
        stop: fwd.stop,
        ..fwd
    })
}

/// Time for the distance to the equator to grow from `s` back to [`R_CEIL`],
/// from the local model `ds/dt = a s^p`.
fn time_to_margin(speed: &SpeedFunction, s: f64) -> Result<f64> {
    let x = s.tan();
    let f = speed.on_diagonal(x)?;
    let p = (speed.on_diagonal(2.0 * x)? / f).ln() / std::f64::consts::LN_2;
    let a = f / s.powf(p);
    if (1.0 - p).abs() < 1e-9 {
        Ok((R_CEIL / s).ln() / a)
    } else {
        Ok((R_CEIL.powf(1.0 - p) - s.powf(1.0 - p)) / (a * (1.0 - p)))
    }
}

/// Remaining time to collapse from a small radius, from the power-law model
/// `r^(1+p) ~ (t_c - t)` with the exponent read off the speed locally.
fn extrapolate_collapse(speed: &SpeedFunction, r: f64) -> Result<f64> {
    let c = 1.0 / r.tan();
    let f = speed.on_diagonal(c)?;
    let p = (speed.on_diagonal(2.0 * c)? / f).ln() / std::f64::consts::LN_2;
    Ok(r / ((1.0 + p) * f))
}

/// Maximal lifespan `T_S = int_0^{pi/2} dr / F(cot r, ..., cot r)`.
///
/// The half near the equator is integrated in `s = pi/2 - r` on dyadic pieces
/// shrinking toward `s = 0`; the tail is extrapolated geometrically and a
/// piece ratio close to one, or a partial sum above the cap, means divergence.
pub fn lifespan(speed: &SpeedFunction, tol: f64) -> Result<Lifespan> {
    let integrand_r = |r: f64| -> Result<f64> {
        let v = speed.on_diagonal(1.0 / r.tan())?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidSpeed(format!("F(cot {r}) = {v}")));
        }
        Ok(1.0 / v)
    };
    let integrand_s = |s: f64| -> Result<f64> {
        let v = speed.on_diagonal(s.tan())?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidSpeed(format!("F(tan {s}) = {v}")));
        }
        Ok(1.0 / v)
    };
    let qtol = (0.01 * tol).max(1e-15);
    let inner = quad::integrate(integrand_r, 0.0, FRAC_PI_4, qtol, 0.0)?.value;

    let mut total = inner;
    let mut pieces = Vec::with_capacity(LIFESPAN_LEVELS);
    let mut hi = FRAC_PI_4;
    let mut diverged = false;
    for _ in 0..LIFESPAN_LEVELS {
        let lo = 0.5 * hi;
        let piece = quad::integrate(integrand_s, lo, hi, qtol, 0.0)?.value;
        pieces.push(piece);
        total += piece;
        hi = lo;
        if total > LIFESPAN_CAP {
            diverged = true;
            break;
        }
    }
    let mut value = None;
    if !diverged {
        let m = pieces.len();
        let ratio = pieces[m - 1] / pieces[m - 2];
        if ratio >= 0.99 {
            diverged = true;
        } else {
            let tail = pieces[m - 1] * ratio / (1.0 - ratio);
            value = Some(total + tail);
        }
    }
    let numeric_class = if diverged {
        LifespanClass::Infinite
    } else {
        LifespanClass::Finite
    };
    match speed.declared_homogeneity() {
        Some(p) if speed.is_builtin() => {
            // Built-ins satisfy F(x, ..., x) = n x^p, so the integral converges
            // exactly when p < 1.
            let class = if p < 1.0 {
                LifespanClass::Finite
            } else {
                LifespanClass::Infinite
            };
            let value = if class == LifespanClass::Finite {
                value.or(Some(total))
            } else {
                None
            };
            Ok(Lifespan {
                value,
                class,
                heuristic: false,
            })
        }
        _ => Ok(Lifespan {
            value,
            class: numeric_class,
            heuristic: true,
        }),
    }
}

/// True iff the inner sphere stays strictly inside the outer one at every
/// sample time of the inner trajectory, up to `horizon` or the inner collapse.
pub fn avoidance_check(
    speed: &SpeedFunction,
    r_inner: f64,
    r_outer: f64,
    horizon: f64,
) -> Result<bool> {
    if !(0.0 < r_inner && r_inner < r_outer && r_outer < FRAC_PI_2) {
        return Err(Error::Precondition(format!(
            "need 0 < r_inner < r_outer < pi/2, got {r_inner} and {r_outer}"
        )));
    }
    let tol = 1e-10;
    let inner = integrate_sphere(speed, r_inner, (0.0, horizon), tol)?;
    let outer = integrate_sphere(speed, r_outer, (0.0, horizon), tol)?;
    let t_end = outer.last().0;
    for &(t, r) in &inner.samples {
        if t > t_end {
            break;
        }
        if r >= outer.radius_at(t)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_curvature_closed_form() {
        for n in 1..=3 {
            let f = SpeedFunction::mean_curvature(n);
            let r0: f64 = 1.0;
            let traj = integrate_sphere(&f, r0, (0.0, f64::INFINITY), 1e-10).unwrap();
            let tc = -r0.cos().ln() / n as f64;
            let worst = traj
                .samples
                .iter()
                .map(|&(t, r)| (r.cos() - (n as f64 * (t - tc)).exp()).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-8, "n={n} worst={worst}");
            assert_eq!(traj.stop, SphereStop::Collapse);
            assert!((traj.collapse_time.unwrap() - tc).abs() < 1e-9);
        }
    }

    #[test]
    fn trajectories_are_monotone() {
        let f = SpeedFunction::builtin("H^p", &[0.5], 2).unwrap();
        let traj = integrate_both(&f, 0.7, 1e-10).unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].0 > w[0].0);
            assert!(w[1].1 < w[0].1);
            assert!(w[1].1 > 0.0 && w[1].1 < FRAC_PI_2);
        }
    }

    #[test]
    fn backward_mean_curvature_is_ancient() {
        let f = SpeedFunction::mean_curvature(2);
        let traj = integrate_sphere(&f, 0.5, (0.0, f64::NEG_INFINITY), 1e-10).unwrap();
        assert_eq!(traj.stop, SphereStop::Equator);
        assert_eq!(traj.lifespan_class(), LifespanClass::Infinite);
    }

    #[test]
    fn radius_at_reproduces_samples() {
        let f = SpeedFunction::mean_curvature(1);
        let traj = integrate_sphere(&f, 1.2, (0.0, 0.3), 1e-11).unwrap();
        let tc = -(1.2f64).cos().ln();
        let r = traj.radius_at(0.123).unwrap();
        assert!((r.cos() - (0.123 - tc).exp()).abs() < 1e-9);
        assert!(traj.radius_at(0.5).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let f = SpeedFunction::mean_curvature(1);
        assert!(integrate_sphere(&f, 0.0, (0.0, 1.0), 1e-10).is_err());
        assert!(integrate_sphere(&f, 1.0, (0.0, 1.0), 1e-3).is_err());
        assert!(matches!(
            avoidance_check(&f, 0.5, 0.5, 1.0),
            Err(Error::Precondition(_))
        ));
    }
}
