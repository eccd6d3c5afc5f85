//! Selection by iterated maximisation on a one-dimensional toy.
//!
//! The scalar ODE `x' = sgn(x) arctan sqrt|x|` has a unique forward solution
//! from every `a != 0`, but from `a = 0` it admits the zero path and, for every
//! branch time `s >= 0`, the two paths `+-phi(t - s)` that leave zero at `s`.
//! Maximising discounted functionals `J_{lambda,f}(x) = int e^{-lambda t} f(x(t)) dt`
//! one after the other cuts that funnel down to a single path; the family of
//! selected paths must then be a semiflow, `S(x)(t + r) = S(S(x)(t))(r)`.
//!
//! Paths live on a uniform grid `t_i = i dt` over `[0, horizon]`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this time the branch `phi` is taken from its series.
pub const T_SEED: f64 = 1e-3;

/// Relative argmax tolerance of [`select`].
pub const ARGMAX_TOL: f64 = 1e-9;

/// Smallest admissible `lambda * horizon`; the truncated tail is below `e^{-20}`
/// times the growth bound.
pub const MIN_DISCOUNT_SPAN: f64 = 20.0;

/// In `y = sgn(x) sqrt|x|` the equation reads `y' = sgn(y) g(y)` with
/// `g(y) = arctan(y) / (2y)` smooth and even (1/2 at the origin), unlike
/// `sqrt|x|` at zero. Solutions never cross zero, so the sign is fixed.
fn field_y(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        let y2 = y * y;
        0.5 - y2 / 6.0 + y2 * y2 / 10.0
    } else {
        y.atan() / (2.0 * y)
    }
}

fn rk4_y(y: f64, dt: f64) -> f64 {
    // the sign is frozen over a step; |y| obeys |y|' = g(|y|)
    let a = y.abs();
    let k1 = field_y(a);
    let k2 = field_y(a + 0.5 * dt * k1);
    let k3 = field_y(a + 0.5 * dt * k2);
    let k4 = field_y(a + dt * k3);
    y.signum() * (a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// One RK4 step of `x' = sgn(x) arctan sqrt|x|`, taken in the `y` variable.
/// Zero is kept fixed (the zero solution).
fn rk4(x: f64, dt: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let y = rk4_y(x.signum() * x.abs().sqrt(), dt);
    y.signum() * y * y
}

fn grid_len(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::OutOfRange(format!("dt = {dt}, horizon = {horizon}")));
    }
    Ok((horizon / dt).round() as usize + 1)
}

/// Near-zero expansion of the maximal positive branch: with `x = y^2`,
/// `y' = arctan(y) / (2y) = 1/2 - y^2/6 + ...`, so `y = t/2 - t^3/72 + O(t^5)`.
pub fn phi_series(t: f64) -> f64 {
    let y = t / 2.0 - t.powi(3) / 72.0;
    y * y
}

/// The maximal positive branch `phi` with `phi(0) = 0` on the grid: the series
/// up to `max(T_SEED, dt)` (at least one step; RK4 cannot leave the
/// equilibrium), RK4 afterwards.
pub fn phi_branch(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    let len = grid_len(horizon, dt)?;
    let seed_until = T_SEED.max(dt);
    let mut x = Vec::with_capacity(len);
    for i in 0..len {
        let t = i as f64 * dt;
        x.push(if t <= seed_until * (1.0 + 1e-12) {
            phi_series(t)
        } else {
            rk4(x[i - 1], dt)
        });
    }
    Ok(x)
}

/// The unique forward solution from `a != 0` (zero path for `a = 0`).
pub fn flow_from(a: f64, horizon: f64, dt: f64) -> Result<Vec<f64>> {
    let len = grid_len(horizon, dt)?;
    let mut x = Vec::with_capacity(len);
    x.push(a);
    for i in 1..len {
        x.push(rk4(x[i - 1], dt));
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
    Zero,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
            Sign::Zero => 0.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
            Sign::Zero => "0",
        })
    }
}

/// One solution on the grid. From `initial = 0` the path is zero up to the
/// branch time `s` and `sign * phi(t - s)` afterwards; from `initial != 0`
/// it is the unique solution (`s = 0`, sign of the start).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPath {
    pub initial: f64,
    pub s: f64,
    pub sign: Sign,
    pub dt: f64,
    pub x: Vec<f64>,
}

impl BranchPath {
    pub fn horizon(&self) -> f64 {
        (self.x.len() - 1) as f64 * self.dt
    }

    /// Value at grid time `t` (rounded to the nearest grid point).
    pub fn at(&self, t: f64) -> Option<f64> {
        self.x.get((t / self.dt).round() as usize).copied()
    }

    /// The same branch leaving zero `delta` later (a funnel member again).
    pub fn shifted(&self, delta: f64) -> BranchPath {
        let k = (delta / self.dt).round() as usize;
        let len = self.x.len();
        let mut x = vec![0.0; len.min(k)];
        x.extend_from_slice(&self.x[..len.saturating_sub(k)]);
        BranchPath {
            s: self.s + k as f64 * self.dt,
            x,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionFunnel {
    pub initial: f64,
    pub dt: f64,
    pub horizon: f64,
    pub paths: Vec<BranchPath>,
}

impl SolutionFunnel {
    /// Index of a member agreeing with `path` to `tol` at every grid point.
    pub fn find(&self, path: &BranchPath, tol: f64) -> Option<usize> {
        self.paths.iter().position(|p| {
            p.x.len() == path.x.len() && p.x.iter().zip(&path.x).all(|(a, b)| (a - b).abs() <= tol)
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Uniform branch-time grid of `k` points `s_j = j horizon / k`, snapped to
/// the time grid.
pub fn uniform_s_grid(horizon: f64, k: usize) -> Vec<f64> {
    (0..k).map(|j| j as f64 * horizon / k as f64).collect()
}

/// All solutions from `a`: a singleton for `a != 0`; otherwise the zero path
/// and `+-phi(. - s)` for every `s` of `s_grid` (snapped to the time grid).
pub fn enumerate_funnel(a: f64, horizon: f64, s_grid: &[f64], dt: f64) -> Result<SolutionFunnel> {
    let len = grid_len(horizon, dt)?;
    let mut paths = Vec::new();
    if a != 0.0 {
        paths.push(BranchPath {
            initial: a,
            s: 0.0,
            sign: if a > 0.0 { Sign::Plus } else { Sign::Minus },
            dt,
            x: flow_from(a, horizon, dt)?,
        });
    } else {
        if let Some(&s) = s_grid.iter().find(|&&s| !(0.0..=horizon).contains(&s)) {
            return Err(Error::OutOfRange(format!("branch time {s} outside [0, {horizon}]")));
        }
        let phi = phi_branch(horizon, dt)?;
        paths.push(BranchPath {
            initial: 0.0,
            s: 0.0,
            sign: Sign::Zero,
            dt,
            x: vec![0.0; len],
        });
        for &s in s_grid {
            let k = (s / dt).round() as usize;
            for sign in [Sign::Plus, Sign::Minus] {
                let mut x = vec![0.0; k.min(len)];
                x.extend(phi[..len - x.len()].iter().map(|v| sign.factor() * v));
                paths.push(BranchPath {
                    initial: 0.0,
                    s: k as f64 * dt,
                    sign,
                    dt,
                    x,
                });
            }
        }
    }
    Ok(SolutionFunnel {
        initial: a,
        dt,
        horizon: (len - 1) as f64 * dt,
        paths,
    })
}

/// Scalar observables of the criteria menu.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    Zero,
    One,
    Identity,
    Square,
    /// `tanh(x / width)`.
    Tanh { width: f64 },
}

impl Observable {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Observable::Zero => 0.0,
            Observable::One => 1.0,
            Observable::Identity => x,
            Observable::Square => x * x,
            Observable::Tanh { width } => (x / width).tanh(),
        }
    }

    /// `sup |f|` over `|x| <= r`.
    fn bound(self, r: f64) -> f64 {
        match self {
            Observable::Zero => 0.0,
            Observable::Tanh { .. } | Observable::One => 1.0,
            Observable::Identity => r,
            Observable::Square => r * r,
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Zero => f.write_str("0"),
            Observable::One => f.write_str("1"),
            Observable::Identity => f.write_str("x"),
            Observable::Square => f.write_str("x^2"),
            Observable::Tanh { width } => write!(f, "tanh(x/{width})"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidValue {
            key: "observable".into(),
            value: s.into(),
        };
        Ok(match s.trim() {
            "0" => Observable::Zero,
            "1" => Observable::One,
            "x" => Observable::Identity,
            "x^2" => Observable::Square,
            t => {
                let w = t
                    .strip_prefix("tanh(x/")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(bad)?;
                let width: f64 = w.parse().map_err(|_| bad())?;
                if !(width > 0.0) {
                    return Err(bad());
                }
                Observable::Tanh { width }
            }
        })
    }
}

/// `f = coef * observable`, discounted at rate `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionCriterion {
    pub lambda: f64,
    pub coef: f64,
    pub f: Observable,
}

impl SelectionCriterion {
    pub fn new(lambda: f64, coef: f64, f: Observable) -> Result<Self> {
        if !(lambda > 0.0) || !coef.is_finite() {
            return Err(Error::OutOfRange(format!("criterion lambda = {lambda}, coef = {coef}")));
        }
        Ok(SelectionCriterion { lambda, coef, f })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coef * self.f.eval(x)
    }

    pub fn scaled(&self, c: f64) -> SelectionCriterion {
        SelectionCriterion {
            coef: self.coef * c,
            ..*self
        }
    }
}

impl fmt::Display for SelectionCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}*{}", self.lambda, self.coef, self.f)
    }
}

/// `lambda:f`, `lambda:c*f` or `lambda:-f`, e.g. `1:x`, `2:-x^2`, `1:0.5*tanh(x/1e-6)`.
impl FromStr for SelectionCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidValue {
            key: "criterion".into(),
            value: s.into(),
        };
        let (lam, rest) = s.split_once(':').ok_or_else(bad)?;
        let lambda: f64 = lam.trim().parse().map_err(|_| bad())?;
        let rest = rest.trim();
        let (coef, f) = if let Some(r) = rest.strip_prefix('-') {
            (-1.0, r)
        } else if let Some((c, r)) = rest.split_once('*') {
            (c.trim().parse().map_err(|_| bad())?, r)
        } else {
            (1.0, rest)
        };
        SelectionCriterion::new(lambda, coef, f.parse()?)
    }
}

/// The shipped menu: growth, sign and timing probes at a few rates.
pub fn default_menu() -> Vec<SelectionCriterion> {
    let c = |l: f64, k: f64, f| SelectionCriterion { lambda: l, coef: k, f };
    vec![
        c(1.0, 1.0, Observable::Identity),
        c(1.0, 1.0, Observable::Tanh { width: 1e-6 }),
        c(2.0, -1.0, Observable::Square),
        c(3.0, 1.0, Observable::Tanh { width: 0.5 }),
        c(1.0, 1.0, Observable::Square),
    ]
}

/// Truncated discounted integral with an explicit bound on the neglected tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JValue {
    pub value: f64,
    /// Bound on `|int_H^inf e^{-lambda t} f(x(t)) dt|`, using `|x'| <= pi/2`.
    pub tail_bound: f64,
    /// `lambda * horizon >= 20`.
    pub conclusive: bool,
}

/// Composite Simpson rule on the grid (trapezoid on a final odd interval).
fn simpson(y: &[f64], dt: f64) -> f64 {
    let n = y.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let even = n - n % 2;
    let mut s = 0.0;
    for i in (0..even).step_by(2) {
        s += y[i] + 4.0 * y[i + 1] + y[i + 2];
    }
    s *= dt / 3.0;
    if even < n {
        s += 0.5 * dt * (y[n - 1] + y[n]);
    }
    s
}

/// `J_{lambda,f}(x) = int_0^H e^{-lambda t} f(x(t)) dt` by Simpson's rule.
pub fn j_functional(path: &BranchPath, criterion: &SelectionCriterion) -> JValue {
    let lam = criterion.lambda;
    let y: Vec<f64> = path
        .x
        .iter()
        .enumerate()
        .map(|(i, &x)| (-lam * i as f64 * path.dt).exp() * criterion.eval(x))
        .collect();
    let h = path.horizon();
    let last = path.x.last().copied().unwrap_or(0.0).abs();
    // |x(t)| <= |x(H)| + (pi/2)(t - H); integrate the growth bound of f against e^{-lam t}
    let mut tail = 0.0;
    let (dtau, steps) = (0.05 / lam, 2000);
    for k in 0..steps {
        let tau = (k as f64 + 0.5) * dtau;
        tail += (-lam * tau).exp() * criterion.f.bound(last + std::f64::consts::FRAC_PI_2 * tau) * dtau;
    }
    // remainder of the bound beyond the sampled window is e^{-100} times smaller
    JValue {
        value: simpson(&y, path.dt),
        tail_bound: criterion.coef.abs() * (-lam * h).exp() * tail,
        conclusive: lam * h >= MIN_DISCOUNT_SPAN,
    }
}

/// One stage of the cascade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub criterion: SelectionCriterion,
    /// `(funnel index, J)` for every member entering the stage.
    pub values: Vec<(usize, f64)>,
    /// Funnel indices retained.
    pub retained: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub path: BranchPath,
    pub stages: Vec<Stage>,
}

/// Indices whose value is within `ARGMAX_TOL * max|J|` of the maximum.
pub fn argmax_set(values: &[(usize, f64)]) -> Vec<usize> {
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let scale = values.iter().map(|v| v.1.abs()).fold(0.0, f64::max);
    values
        .iter()
        .filter(|v| v.1 >= best - ARGMAX_TOL * scale)
        .map(|v| v.0)
        .collect()
}

/// Iterated argmax: each criterion keeps the members maximising its `J`;
/// the sole survivor is returned, ties remaining after the last criterion are
/// an error. Stages that find a singleton are skipped.
pub fn select(funnel: &SolutionFunnel, criteria: &[SelectionCriterion]) -> Result<Selection> {
    if funnel.is_empty() || criteria.is_empty() {
        return Err(Error::OutOfRange("empty funnel or criteria list".into()));
    }
    let mut alive: Vec<usize> = (0..funnel.len()).collect();
    let mut stages = Vec::new();
    for c in criteria {
        if alive.len() == 1 {
            break;
        }
        let values: Vec<(usize, f64)> = alive
            .par_iter()
            .map(|&i| {
                let j = j_functional(&funnel.paths[i], c);
                if !j.conclusive {
                    return Err(Error::OutOfRange(format!(
                        "lambda * horizon = {} < {MIN_DISCOUNT_SPAN}",
                        c.lambda * funnel.horizon
                    )));
                }
                Ok((i, j.value))
            })
            .collect::<Result<_>>()?;
        alive = argmax_set(&values);
        stages.push(Stage {
            criterion: *c,
            values,
            retained: alive.clone(),
        });
    }
    if alive.len() > 1 {
        return Err(Error::SelectionTie(alive.len()));
    }
    let index = alive[0];
    Ok(Selection {
        index,
        path: funnel.paths[index].clone(),
        stages,
    })
}

/// Pairs of funnel members that no criterion of `menu` tells apart (values
/// equal up to `1e-10` relative).
pub fn unseparated_pairs(funnel: &SolutionFunnel, menu: &[SelectionCriterion]) -> Vec<(usize, usize)> {
    let table: Vec<Vec<f64>> = funnel
        .paths
        .par_iter()
        .map(|p| menu.iter().map(|c| j_functional(p, c).value).collect())
        .collect();
    let mut out = Vec::new();
    for a in 0..table.len() {
        for b in a + 1..table.len() {
            let apart = table[a]
                .iter()
                .zip(&table[b])
                .any(|(x, y)| (x - y).abs() > 1e-10 * x.abs().max(y.abs()));
            if !apart {
                out.push((a, b));
            }
        }
    }
    out
}

/// The selected family `x -> S(x)` on a fixed grid: the unique solution away
/// from zero, the cascade's choice from the funnel at zero.
#[derive(Clone, Debug)]
pub struct SelectionMap {
    pub horizon: f64,
    pub dt: f64,
    pub s_grid: Vec<f64>,
    pub criteria: Vec<SelectionCriterion>,
}

impl SelectionMap {
    pub fn new(horizon: f64, dt: f64, k: usize, criteria: Vec<SelectionCriterion>) -> Self {
        SelectionMap {
            horizon,
            dt,
            s_grid: uniform_s_grid(horizon, k),
            criteria,
        }
    }

    pub fn funnel(&self, a: f64) -> Result<SolutionFunnel> {
        enumerate_funnel(a, self.horizon, &self.s_grid, self.dt)
    }

    pub fn apply(&self, a: f64) -> Result<BranchPath> {
        Ok(select(&self.funnel(a)?, &self.criteria)?.path)
    }
}

/// One entry of the semiflow defect matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiflowEntry {
    pub x: f64,
    pub t: f64,
    pub r: f64,
    pub defect: f64,
}

/// `max |S(x)(t + r) - S(S(x)(t))(r)|` over the grids; `t + r` must stay
/// within the horizon of the paths returned by `map`.
pub fn check_semiflow(
    map: impl Fn(f64) -> Result<BranchPath> + Sync,
    states: &[f64],
    t_grid: &[f64],
) -> Result<(f64, Vec<SemiflowEntry>)> {
    let mut entries = Vec::new();
    for &x in states {
        let sx = map(x)?;
        let h = sx.horizon();
        let inner: Vec<Result<Vec<SemiflowEntry>>> = t_grid
            .par_iter()
            .map(|&t| {
                let st = map(sx.at(t).ok_or_else(|| Error::OutOfRange(format!("t = {t} beyond horizon")))?)?;
                t_grid
                    .iter()
                    .filter(|&&r| t + r <= h * (1.0 + 1e-12))
                    .map(|&r| {
                        let lhs = sx.at(t + r).expect("within horizon");
                        let rhs = st
                            .at(r)
                            .ok_or_else(|| Error::OutOfRange(format!("r = {r} beyond horizon")))?;
                        Ok(SemiflowEntry {
                            x,
                            t,
                            r,
                            defect: (lhs - rhs).abs(),
                        })
                    })
                    .collect()
            })
            .collect();
        for e in inner {
            entries.extend(e?);
        }
    }
    let max = entries.iter().map(|e| e.defect).fold(0.0, f64::max);
    Ok((max, entries))
}

/// `t,<one column per member>` sampled every `stride` steps.
pub fn funnel_csv(funnel: &SolutionFunnel, stride: usize) -> String {
    let stride = stride.max(1);
    let mut s = String::from("t");
    for (i, p) in funnel.paths.iter().enumerate() {
        s.push_str(&format!(",p{i}_s{}_{}", p.s, p.sign));
    }
    s.push('\n');
    let len = funnel.paths.first().map_or(0, |p| p.x.len());
    for j in (0..len).step_by(stride) {
        s.push_str(&format!("{}", j as f64 * funnel.dt));
        for p in &funnel.paths {
            s.push_str(&format!(",{}", p.x[j]));
        }
        s.push('\n');
    }
    s
}

/// `stage,criterion,index,s,sign,J,retained`.
pub fn stages_csv(funnel: &SolutionFunnel, stages: &[Stage]) -> String {
    let mut s = String::from("stage,criterion,index,s,sign,J,retained\n");
    for (k, st) in stages.iter().enumerate() {
        for &(i, j) in &st.values {
            let p = &funnel.paths[i];
            s.push_str(&format!(
                "{k},{},{i},{},{},{j:e},{}\n",
                st.criterion,
                p.s,
                p.sign,
                st.retained.contains(&i) as u8
            ));
        }
    }
    s
}

/// `t,x`.
pub fn path_csv(path: &BranchPath, stride: usize) -> String {
    let mut s = String::from("t,x\n");
    for j in (0..path.x.len()).step_by(stride.max(1)) {
        s.push_str(&format!("{},{}\n", j as f64 * path.dt, path.x[j]));
    }
    s
}

/// `x,t,r,defect`.
pub fn semiflow_csv(entries: &[SemiflowEntry]) -> String {
    let mut s = String::from("x,t,r,defect\n");
    for e in entries {
        s.push_str(&format!("{},{},{},{:e}\n", e.x, e.t, e.r, e.defect));
    }
    s
}
