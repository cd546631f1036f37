//! Reflections of star-shaped curves and rotationally symmetric hypersurfaces
//! across hyperplanes through the origin, and roundness measures.
//!
//! Points are handled in reduced coordinates `(a, b, c, e)` of R^4: `e` is the
//! pole axis, a curve lives in `c = 0`, and a rotationally symmetric
//! hypersurface about the `a` axis is sampled on the half-plane `c >= 0`,
//! which is enough because the reflection vectors used here have no `c`
//! component.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axisym_flow::AxisymGraph;
use crate::curve_flow::RadialCurve;
use crate::error::{Error, Result};
use crate::spectral::{fourier_upsample, DiffMode, Differentiator};

/// Default number of sample directions on the fine grid.
pub const FINE_POINTS: usize = 4096;
pub const DEFAULT_MARGIN_EPS: f64 = 1e-10;
const STAR_EPS: f64 = 1e-12;

pub type Point = [f64; 4];

fn dot(x: &Point, y: &Point) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `R_V x = x - 2 <x, V> V`.
pub fn reflect(x: &Point, v: &Point) -> Point {
    let s = 2.0 * dot(x, v);
    [x[0] - s * v[0], x[1] - s * v[1], x[2] - s * v[2], x[3] - s * v[3]]
}

/// Unit vector making signed angle `delta` below the equatorial hyperplane,
/// with horizontal part at azimuth `phi` in the `(a, b)` plane.
pub fn reflection_vector(delta: f64, phi: f64) -> Point {
    let (sd, cd) = delta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [cd * cp, cd * sp, 0.0, -sd]
}

/// `arcsin <V, -e>`.
pub fn signed_angle(v: &Point) -> f64 {
    (-v[3]).clamp(-1.0, 1.0).asin()
}

/// Height above the equator, `arcsin <x, e>`.
pub fn height_of(x: &Point) -> f64 {
    x[3].clamp(-1.0, 1.0).asin()
}

/// Unit direction in the equator under `x`.
pub fn direction_of(x: &Point) -> [f64; 3] {
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    [x[0] / n, x[1] / n, x[2] / n]
}

/// Heights stay below `pi/2`, so the poles are decided without a direction.
fn at_pole(x: &Point) -> bool {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2] < 1e-24
}

fn point_at(sigma: &[f64; 3], height: f64) -> Point {
    let (s, c) = height.sin_cos();
    [c * sigma[0], c * sigma[1], c * sigma[2], s]
}

/// Cubic Hermite interpolation of periodic samples with known slopes.
#[derive(Clone, Debug)]
struct PeriodicHermite {
    values: Vec<f64>,
    slopes: Vec<f64>,
    h: f64,
}

impl PeriodicHermite {
    /// Refines `f` to at least `target` points by trigonometric interpolation.
    fn refine(f: &[f64], target: usize) -> Self {
        let mut factor = 1;
        while f.len() * factor < target {
            factor *= 2;
        }
        let values = if factor == 1 {
            f.to_vec()
        } else {
            fourier_upsample(f, factor)
        };
        let diff = Differentiator::new(values.len(), DiffMode::Spectral);
        let slopes = diff.first(&values);
        Self {
            h: TAU / values.len() as f64,
            values,
            slopes,
        }
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.len();
        let u = x.rem_euclid(TAU) / self.h;
        let i = (u.floor() as usize).min(n - 1);
        let s = u - i as f64;
        let j = (i + 1) % n;
        let (y0, y1) = (self.values[i], self.values[j]);
        let (m0, m1) = (self.slopes[i] * self.h, self.slopes[j] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }
}

#[derive(Clone, Debug)]
enum Geometry {
    Curve,
    Axisym { n: usize },
}

/// A star-shaped set around the pole, described by its height over the
/// equator, with a dense sample of its points.
#[derive(Clone, Debug)]
pub struct Shape {
    geometry: Geometry,
    height: PeriodicHermite,
    points: Vec<Point>,
    convex: bool,
    c1_norm: f64,
}

impl Shape {
    pub fn from_curve(c: &RadialCurve) -> Self {
        let f: Vec<f64> = c.rho.iter().map(|r| FRAC_PI_2 - r).collect();
        let height = PeriodicHermite::refine(&f, FINE_POINTS);
        let points = (0..height.len())
            .map(|i| {
                let th = i as f64 * height.h;
                point_at(&[th.cos(), th.sin(), 0.0], height.values[i])
            })
            .collect();
        let c1_norm = f.iter().map(|v| v.abs()).fold(0.0, f64::max)
            + c.rho_theta.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Self {
            geometry: Geometry::Curve,
            height,
            points,
            convex: c.kappa_min() > 0.0,
            c1_norm,
        }
    }

    pub fn from_axisym(g: &AxisymGraph) -> Self {
        let m = g.intervals();
        let mut ext: Vec<f64> = g.u.iter().map(|u| FRAC_PI_2 - u).collect();
        ext.extend(g.u[1..m].iter().rev().map(|u| FRAC_PI_2 - u));
        let height = PeriodicHermite::refine(&ext, 1024);
        let half = height.len() / 2;
        let betas = 64;
        let mut points = Vec::with_capacity((half + 1) * (betas + 1));
        for i in 0..=half {
            let psi = i as f64 * height.h;
            for k in 0..=betas {
                let beta = PI * k as f64 / betas as f64;
                let sigma = [psi.cos(), psi.sin() * beta.cos(), psi.sin() * beta.sin()];
                points.push(point_at(&sigma, height.values[i]));
            }
        }
        let c1_norm = g.u.iter().map(|u| (FRAC_PI_2 - u).abs()).fold(0.0, f64::max)
            + g.u_psi.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Self {
            geometry: Geometry::Axisym { n: g.n },
            height,
            points,
            convex: g.kappa_min() > 0.0,
            c1_norm,
        }
    }

    pub fn is_curve(&self) -> bool {
        matches!(self.geometry, Geometry::Curve)
    }

    pub fn dimension(&self) -> usize {
        match self.geometry {
            Geometry::Curve => 1,
            Geometry::Axisym { n } => n,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn c1_norm(&self) -> f64 {
        self.c1_norm
    }

    /// Height of the set over the equatorial direction `sigma`.
    pub fn height(&self, sigma: &[f64; 3]) -> f64 {
        let angle = match self.geometry {
            Geometry::Curve => sigma[1].atan2(sigma[0]),
            Geometry::Axisym { .. } => sigma[1].hypot(sigma[2]).atan2(sigma[0]),
        };
        self.height.eval(angle)
    }

    /// Whether `x` lies strictly inside the body containing the pole.
    fn strictly_inside(&self, x: &Point) -> bool {
        if at_pole(x) {
            return x[3] > 0.0;
        }
        let sigma = direction_of(x);
        height_of(x) > self.height(&sigma) + STAR_EPS
    }

    fn strictly_outside(&self, x: &Point) -> bool {
        if at_pole(x) {
            return x[3] < 0.0;
        }
        let sigma = direction_of(x);
        height_of(x) < self.height(&sigma) - STAR_EPS
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ReflectionSetup<'a> {
    pub shape: &'a Shape,
    pub v: Point,
}

impl<'a> ReflectionSetup<'a> {
    pub fn new(shape: &'a Shape, delta: f64, phi: f64) -> Self {
        Self {
            shape,
            v: reflection_vector(delta, phi),
        }
    }

    pub fn delta(&self) -> f64 {
        signed_angle(&self.v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReflectedGraph {
    /// Heights of the reflected curve on the original angular grid.
    Curve { theta: Vec<f64>, height: Vec<f64> },
    /// Reflected sample points as `(direction, height)`.
    Scattered {
        directions: Vec<[f64; 3]>,
        heights: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reflected {
    pub star_shaped: bool,
    pub graph: Option<ReflectedGraph>,
}

/// Whether the reflected set is star-shaped about the pole with the pole in
/// the reflected body.
pub fn reflected_star_shaped(s: &ReflectionSetup) -> bool {
    let e: Point = [0.0, 0.0, 0.0, 1.0];
    let re = reflect(&e, &s.v);
    let minus_re = [-re[0], -re[1], -re[2], -re[3]];
    // The pole lies in the reflected body iff its mirror image lies in the body.
    if !s.shape.strictly_inside(&re) || !s.shape.strictly_outside(&minus_re) {
        return false;
    }
    let pts = s.shape.points();
    if pts
        .iter()
        .any(|x| reflect(x, &s.v)[3].abs() >= 1.0 - STAR_EPS)
    {
        return false;
    }
    if s.shape.is_curve() {
        // Reflection reverses orientation, so seen from the pole the image
        // must wind exactly once clockwise.
        let mut total = 0.0;
        let mut prev = {
            let r = reflect(&pts[0], &s.v);
            r[1].atan2(r[0])
        };
        for k in 1..=pts.len() {
            let r = reflect(&pts[k % pts.len()], &s.v);
            let a = r[1].atan2(r[0]);
            let mut d = a - prev;
            if d > PI {
                d -= TAU;
            } else if d < -PI {
                d += TAU;
            }
            if d >= 0.0 {
                return false;
            }
            total += d;
            prev = a;
        }
        (total + TAU).abs() < 1e-6
    } else {
        s.shape.convex
    }
}

/// Reflects the set and, if the image is star-shaped, returns its height graph.
pub fn reflect_graph(s: &ReflectionSetup) -> Reflected {
    if !reflected_star_shaped(s) {
        return Reflected {
            star_shaped: false,
            graph: None,
        };
    }
    let images: Vec<Point> = s.shape.points().iter().map(|x| reflect(x, &s.v)).collect();
    let graph = if s.shape.is_curve() {
        let mut pairs: Vec<(f64, f64)> = images
            .iter()
            .map(|r| (r[1].atan2(r[0]).rem_euclid(TAU), height_of(r)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let m = s.shape.height.len();
        let theta: Vec<f64> = (0..m).map(|i| i as f64 * s.shape.height.h).collect();
        let height = periodic_pchip(&pairs, &theta);
        ReflectedGraph::Curve { theta, height }
    } else {
        ReflectedGraph::Scattered {
            directions: images.iter().map(direction_of).collect(),
            heights: images.iter().map(height_of).collect(),
        }
    };
    Reflected {
        star_shaped: true,
        graph: Some(graph),
    }
}

/// Monotone cubic (Fritsch–Carlson) interpolation of periodic data sorted by
/// abscissa in `[0, 2 pi)`.
pub fn periodic_pchip(pairs: &[(f64, f64)], at: &[f64]) -> Vec<f64> {
    let n = pairs.len();
    let x = |i: isize| -> f64 {
        let k = i.rem_euclid(n as isize) as usize;
        pairs[k].0 + TAU * i.div_euclid(n as isize) as f64
    };
    let y = |i: isize| pairs[i.rem_euclid(n as isize) as usize].1;
    let secant = |i: isize| (y(i + 1) - y(i)) / (x(i + 1) - x(i));
    let slope = |i: isize| -> f64 {
        let (d0, d1) = (secant(i - 1), secant(i));
        if d0 * d1 <= 0.0 {
            0.0
        } else {
            let (h0, h1) = (x(i) - x(i - 1), x(i + 1) - x(i));
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            (w1 + w2) / (w1 / d0 + w2 / d1)
        }
    };
    at.iter()
        .map(|&t| {
            let t = t.rem_euclid(TAU);
            let mut i = pairs.partition_point(|p| p.0 <= t) as isize - 1;
            if i < 0 {
                i = -1;
            }
            let (x0, x1) = (x(i), x(i + 1));
            let h = x1 - x0;
            let s = (t - x0) / h;
            let (y0, y1) = (y(i), y(i + 1));
            let (m0, m1) = (slope(i) * h, slope(i + 1) * h);
            let s2 = s * s;
            let s3 = s2 * s;
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0
                + (s3 - 2.0 * s2 + s) * m0
                + (-2.0 * s3 + 3.0 * s2) * y1
                + (s3 - s2) * m1
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneSided {
    pub verdict: bool,
    /// Smallest reflected-minus-original height over the overlap.
    pub min_margin: f64,
    /// True when the overlap of projections was empty.
    pub empty_overlap: bool,
    pub compared: usize,
}

/// Compares the reflected upper part `R_V(M+)` with the lower part `M-` over
/// the overlap of their projections.
pub fn one_sided_reflects_with(s: &ReflectionSetup, eps: f64) -> OneSided {
    let mut min_margin = f64::INFINITY;
    let mut compared = 0;
    for x in s.shape.points() {
        if dot(x, &s.v) <= 0.0 {
            continue;
        }
        let r = reflect(x, &s.v);
        let sigma = direction_of(&r);
        let f = s.shape.height(&sigma);
        let y = point_at(&sigma, f);
        if dot(&y, &s.v) >= 0.0 {
            continue;
        }
        compared += 1;
        min_margin = min_margin.min(height_of(&r) - f);
    }
    OneSided {
        verdict: min_margin >= -eps,
        min_margin,
        empty_overlap: compared == 0,
        compared,
    }
}

pub fn one_sided_reflects(s: &ReflectionSetup) -> OneSided {
    one_sided_reflects_with(s, DEFAULT_MARGIN_EPS)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VGrid {
    pub deltas: usize,
    pub azimuths: usize,
}

impl Default for VGrid {
    fn default() -> Self {
        Self {
            deltas: 64,
            azimuths: 32,
        }
    }
}

impl VGrid {
    /// `(delta, phi)` pairs covering `[delta1, delta0]`.
    pub fn directions(&self, shape: &Shape, delta0: f64, delta1: f64) -> Vec<(f64, f64)> {
        let nd = self.deltas.max(1);
        let deltas: Vec<f64> = if nd == 1 || delta0 == delta1 {
            vec![delta1]
        } else {
            (0..nd)
                .map(|k| delta1 + (delta0 - delta1) * k as f64 / (nd - 1) as f64)
                .collect()
        };
        let na = self.azimuths.max(1);
        let phis: Vec<f64> = if shape.is_curve() {
            (0..na).map(|k| TAU * k as f64 / na as f64).collect()
        } else if na == 1 {
            vec![0.0]
        } else {
            (0..na).map(|k| PI * k as f64 / (na - 1) as f64).collect()
        };
        deltas
            .iter()
            .flat_map(|&d| phis.iter().map(move |&p| (d, p)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstV {
    pub delta: f64,
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub verdict: bool,
    pub min_margin: f64,
    pub worst_v: Option<WorstV>,
    pub all_star_shaped: bool,
    pub checked: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionResult {
    pub delta: f64,
    pub phi: f64,
    pub star_shaped: bool,
    pub outcome: Option<OneSided>,
}

/// Star-shapedness and one-sided margins for each direction, in parallel.
pub fn sweep_directions(shape: &Shape, directions: &[(f64, f64)], eps: f64) -> Vec<DirectionResult> {
    directions
        .par_iter()
        .map(|&(delta, phi)| {
            let s = ReflectionSetup::new(shape, delta, phi);
            let star = reflected_star_shaped(&s);
            DirectionResult {
                delta,
                phi,
                star_shaped: star,
                outcome: star.then(|| one_sided_reflects_with(&s, eps)),
            }
        })
        .collect()
}

/// One-sided reflection over every grid direction with `delta` in
/// `[delta1, delta0]`.
pub fn reflect_check(shape: &Shape, delta0: f64, delta1: f64, grid: VGrid) -> Result<SweepReport> {
    if !(0.0 <= delta1 && delta1 <= delta0 && delta0 < std::f64::consts::FRAC_PI_4) {
        return Err(Error::Precondition(format!(
            "need 0 <= delta1 <= delta0 < pi/4, got {delta1}, {delta0}"
        )));
    }
    let results = sweep_directions(shape, &grid.directions(shape, delta0, delta1), DEFAULT_MARGIN_EPS);
    Ok(summarize(&results))
}

pub fn summarize(results: &[DirectionResult]) -> SweepReport {
    let mut min_margin = f64::INFINITY;
    let mut worst_v = None;
    let mut all_star = true;
    let mut verdict = true;
    for r in results {
        match r.outcome {
            Some(o) => {
                if o.min_margin < min_margin {
                    min_margin = o.min_margin;
                    worst_v = Some(WorstV {
                        delta: r.delta,
                        phi: r.phi,
                    });
                }
                verdict &= o.verdict;
            }
            None => {
                all_star = false;
                verdict = false;
            }
        }
    }
    SweepReport {
        verdict,
        min_margin,
        worst_v,
        all_star_shaped: all_star,
        checked: results.len(),
    }
}

/// Perturbations of the equator with `C^1` norm equal to the amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationFamily {
    /// Height `A (1 + cos(k theta)) / (2 + k)`, non-negative.
    SingleMode { mode: u32 },
    /// Constant height `A`: a geodesic circle about the pole.
    Circle,
}

impl PerturbationFamily {
    pub fn curve(&self, amplitude: f64, n: usize) -> Result<RadialCurve> {
        let f = |th: f64| match *self {
            PerturbationFamily::SingleMode { mode } => {
                let k = mode as f64;
                amplitude * (1.0 + (k * th).cos()) / (2.0 + k)
            }
            PerturbationFamily::Circle => amplitude,
        };
        RadialCurve::from_fn(n, DiffMode::Spectral, |th| FRAC_PI_2 - f(th))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub alpha: f64,
    /// True when the largest tested amplitude still passed.
    pub capped: bool,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptions {
    pub grid: VGrid,
    /// Nodes of the generated curves.
    pub resolution: usize,
    pub max_amplitude: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub tolerance: f64,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        Self {
            grid: VGrid::default(),
            resolution: 256,
            max_amplitude: 0.5,
            tolerance: 1e-3,
        }
    }
}

/// Whether every sampled `V` with `delta` in `[delta1, delta0]` gives a
/// star-shaped image and a one-sided reflection of the curve.
pub fn reflects_for_all(curve: &RadialCurve, delta0: f64, delta1: f64, grid: VGrid) -> bool {
    let shape = Shape::from_curve(curve);
    let dirs = grid.directions(&shape, delta0, delta1);
    // Sequential early exit: a single failing direction settles the verdict.
    dirs.iter().all(|&(delta, phi)| {
        let s = ReflectionSetup::new(&shape, delta, phi);
        reflected_star_shaped(&s) && one_sided_reflects(&s).verdict
    })
}

/// Largest amplitude, up to `max_amplitude`, for which every sampled `V` with
/// `delta` in `[delta1, delta0]` gives a star-shaped image and a one-sided
/// reflection.
pub fn alpha_threshold(
    delta0: f64,
    delta1: f64,
    family: PerturbationFamily,
    opts: AlphaOptions,
) -> Result<AlphaReport> {
    if !(0.0 < delta1 && delta1 <= delta0 && delta0 < std::f64::consts::FRAC_PI_4) {
        return Err(Error::Precondition(format!(
            "need 0 < delta1 <= delta0 < pi/4, got {delta1}, {delta0}"
        )));
    }
    if !(opts.max_amplitude > 0.0 && opts.max_amplitude < FRAC_PI_2 && opts.tolerance > 0.0) {
        return Err(Error::Precondition(
            "need 0 < max_amplitude < pi/2 and a positive tolerance".into(),
        ));
    }
    let passes = |a: f64| -> Result<bool> {
        Ok(reflects_for_all(&family.curve(a, opts.resolution)?, delta0, delta1, opts.grid))
    };
    if passes(opts.max_amplitude)? {
        return Ok(AlphaReport {
            alpha: opts.max_amplitude,
            capped: true,
            iterations: 1,
        });
    }
    let (mut lo, mut hi) = (0.0, opts.max_amplitude);
    let mut iterations = 1;
    while hi - lo > opts.tolerance {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(AlphaReport {
        alpha: lo,
        capped: false,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roundness {
    pub rho_spread: f64,
    pub c1_norm_of_f: f64,
    /// Sup-norm distance to the best-fitting geodesic sphere.
    pub best_fit_residual: f64,
    pub best_fit_radius: f64,
}

fn spread(d: &[f64]) -> (f64, f64) {
    let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    (0.5 * (max - min), 0.5 * (max + min))
}

/// Minimizes a function of two variables by the Nelder–Mead simplex method.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(f: F, start: [f64; 2], step: f64, iters: usize) -> ([f64; 2], f64) {
    let mut simplex = [
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut values = simplex.map(&f);
    for _ in 0..iters {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        let size = (simplex[1][0] - simplex[0][0]).abs()
            + (simplex[1][1] - simplex[0][1]).abs()
            + (simplex[2][0] - simplex[0][0]).abs()
            + (simplex[2][1] - simplex[0][1]).abs();
        if size < 1e-15 {
            break;
        }
        let c = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| [c[0] + t * (simplex[2][0] - c[0]), c[1] + t * (simplex[2][1] - c[1])];
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(xe);
            if fe < fr {
                simplex[2] = xe;
                values[2] = fe;
            } else {
                simplex[2] = xr;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = xr;
            values[2] = fr;
        } else {
            let xc = if fr < values[2] { along(-0.5) } else { along(0.5) };
            let fc = f(xc);
            if fc < values[2].min(fr) {
                simplex[2] = xc;
                values[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = [
                        0.5 * (simplex[0][0] + simplex[k][0]),
                        0.5 * (simplex[0][1] + simplex[k][1]),
                    ];
                    values[k] = f(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best], values[best])
}

pub fn roundness_curve(c: &RadialCurve) -> Roundness {
    let pts = c.embed();
    let objective = |p: [f64; 2]| -> f64 {
        let n = (p[0] * p[0] + p[1] * p[1] + 1.0).sqrt();
        let center = [p[0] / n, p[1] / n, 1.0 / n];
        let d: Vec<f64> = pts
            .iter()
            .map(|x| (x[0] * center[0] + x[1] * center[1] + x[2] * center[2]).clamp(-1.0, 1.0).acos())
            .collect();
        spread(&d).0
    };
    let mut starts = vec![[0.0, 0.0]];
    let mean = pts.iter().fold([0.0; 3], |acc, x| [acc[0] + x[0], acc[1] + x[1], acc[2] + x[2]]);
    if mean[2] > 1e-12 {
        starts.push([mean[0] / mean[2], mean[1] / mean[2]]);
    }
    let mut best = ([0.0, 0.0], objective([0.0, 0.0]));
    for s in starts {
        let out = nelder_mead(objective, s, 0.05, 4000);
        if out.1 < best.1 {
            best = out;
        }
    }
    let p = best.0;
    let n = (p[0] * p[0] + p[1] * p[1] + 1.0).sqrt();
    let center = [p[0] / n, p[1] / n, 1.0 / n];
    let d: Vec<f64> = pts
        .iter()
        .map(|x| (x[0] * center[0] + x[1] * center[1] + x[2] * center[2]).clamp(-1.0, 1.0).acos())
        .collect();
    let (residual, radius) = spread(&d);
    Roundness {
        rho_spread: c.rho_spread(),
        c1_norm_of_f: Shape::c1_of(&c.rho, &c.rho_theta),
        best_fit_residual: residual,
        best_fit_radius: radius,
    }
}

impl Shape {
    fn c1_of(rho: &[f64], d: &[f64]) -> f64 {
        rho.iter().map(|r| (FRAC_PI_2 - r).abs()).fold(0.0, f64::max)
            + d.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Center restricted to the symmetry axis, found by a coarse scan refined by
/// golden-section search.
pub fn roundness_axisym(g: &AxisymGraph) -> Roundness {
    let samples: Vec<(f64, f64)> = (0..g.u.len()).map(|j| (g.u[j], g.psi(j))).collect();
    let distances = |alpha: f64| -> Vec<f64> {
        let (sa, ca) = alpha.sin_cos();
        samples
            .iter()
            .map(|&(u, psi)| (sa * u.sin() * psi.cos() + ca * u.cos()).clamp(-1.0, 1.0).acos())
            .collect()
    };
    let objective = |alpha: f64| spread(&distances(alpha)).0;
    let scan = 200;
    let (lo_b, hi_b) = (-FRAC_PI_2, FRAC_PI_2);
    let step = (hi_b - lo_b) / scan as f64;
    let mut best_k = 0;
    let mut best_v = f64::INFINITY;
    for k in 0..=scan {
        let v = objective(lo_b + step * k as f64);
        if v < best_v {
            best_v = v;
            best_k = k;
        }
    }
    let mut a = lo_b + step * (best_k as f64 - 1.0);
    let mut b = lo_b + step * (best_k as f64 + 1.0);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..200 {
        if b - a < 1e-15 {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = objective(x2);
        }
    }
    let mut alpha = 0.5 * (a + b);
    if objective(0.0) <= objective(alpha) {
        alpha = 0.0;
    }
    let (residual, radius) = spread(&distances(alpha));
    let max_u = g.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_u = g.u.iter().cloned().fold(f64::INFINITY, f64::min);
    Roundness {
        rho_spread: max_u - min_u,
        c1_norm_of_f: Shape::c1_of(&g.u, &g.u_psi),
        best_fit_residual: residual,
        best_fit_radius: radius,
    }
}
