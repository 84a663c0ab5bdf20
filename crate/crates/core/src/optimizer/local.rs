//! Local descent in log-weight space within a box.

use super::{Method, OptimizerConfig, StopReason};

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
/// Half-width, in log units, of the stretch each coordinate line search scans.
const LINE_SPAN: f64 = 4.0;
const SCAN_POINTS: usize = 9;
const GOLDEN_TOL: f64 = 1e-7;
const FD_STEP: f64 = 1e-6;

pub(super) struct Run {
    pub x: Vec<f64>,
    pub trace: Vec<(usize, f64)>,
    pub stop_reason: StopReason,
}

/// Central differences with step `scale * max(1, |x_i|)` per coordinate.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], scale: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = scale * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn project(x: &mut [f64], (lo, hi): (f64, f64)) {
    for v in x {
        *v = v.clamp(lo, hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative-decrement stop test; a zero value stops outright.
fn converged(previous: f64, current: f64, delta: f64) -> bool {
    current <= 0.0 || (previous - current).abs() / current < delta
}

pub(super) fn descend(
    f: &mut dyn FnMut(&[f64]) -> f64,
    mut x: Vec<f64>,
    bounds: (f64, f64),
    method: Method,
    config: &OptimizerConfig,
) -> Run {
    let mut fx = f(&x);
    let mut trace = vec![(0, fx)];
    if fx <= 0.0 {
        return Run { x, trace, stop_reason: StopReason::DeltaConverged };
    }
    let mut state = match method {
        Method::FdQuasiNewton => State::Bfgs(Bfgs::new(x.len())),
        Method::DerivativeFree => State::Powell,
    };
    for iteration in 1..=config.max_iter {
        let step = match &mut state {
            State::Bfgs(b) => b.step(f, &x, fx, bounds),
            State::Powell => powell_sweep(f, &x, fx, bounds),
        };
        let Some((nx, nf)) = step else {
            return Run { x, trace, stop_reason: StopReason::NoImprovement };
        };
        let previous = fx;
        x = nx;
        fx = nf;
        trace.push((iteration, fx));
        if converged(previous, fx, config.delta) {
            return Run { x, trace, stop_reason: StopReason::DeltaConverged };
        }
    }
    Run { x, trace, stop_reason: StopReason::MaxIter }
}

enum State {
    Bfgs(Bfgs),
    Powell,
}

/// Inverse-Hessian BFGS on finite-difference gradients.
struct Bfgs {
    h: Vec<Vec<f64>>,
    identity: bool,
    grad: Option<Vec<f64>>,
}

impl Bfgs {
    fn new(n: usize) -> Self {
        Bfgs { h: identity(n), identity: true, grad: None }
    }

    fn gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        central_difference(f, x, FD_STEP)
    }

    fn step(
        &mut self,
        f: &mut dyn FnMut(&[f64]) -> f64,
        x: &[f64],
        fx: f64,
        bounds: (f64, f64),
    ) -> Option<(Vec<f64>, f64)> {
        let g = match self.grad.take() {
            Some(g) => g,
            None => Self::gradient(f, x),
        };
        loop {
            let mut p: Vec<f64> = self.h.iter().map(|row| -dot(row, &g)).collect();
            if dot(&p, &g) >= 0.0 {
                p = g.iter().map(|v| -v).collect();
            }
            if let Some((nx, nf)) = backtrack(f, x, fx, &g, &p, bounds) {
                let ng = Self::gradient(f, &nx);
                let s: Vec<f64> = nx.iter().zip(x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = ng.iter().zip(&g).map(|(a, b)| a - b).collect();
                self.update(&s, &y);
                self.grad = Some(ng);
                return Some((nx, nf));
            }
            if self.identity {
                return None;
            }
            self.h = identity(x.len());
            self.identity = true;
        }
    }

    fn update(&mut self, s: &[f64], y: &[f64]) {
        let sy = dot(s, y);
        if sy <= 1e-12 {
            return;
        }
        let n = s.len();
        if self.identity {
            // scale the first inverse-Hessian guess to the observed curvature
            let scale = sy / dot(y, y);
            for (i, row) in self.h.iter_mut().enumerate() {
                row[i] = scale;
            }
        }
        let rho = 1.0 / sy;
        let hy: Vec<f64> = self.h.iter().map(|row| dot(row, y)).collect();
        let yhy = dot(y, &hy);
        for i in 0..n {
            for j in 0..n {
                self.h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
            }
        }
        self.identity = false;
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Armijo backtracking along `p`, projected onto the box.
fn backtrack(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    fx: f64,
    g: &[f64],
    p: &[f64],
    bounds: (f64, f64),
) -> Option<(Vec<f64>, f64)> {
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let mut nx: Vec<f64> = x.iter().zip(p).map(|(a, b)| a + alpha * b).collect();
        project(&mut nx, bounds);
        let moved: Vec<f64> = nx.iter().zip(x).map(|(a, b)| a - b).collect();
        let decrease = dot(g, &moved);
        if decrease < 0.0 {
            let nf = f(&nx);
            if nf < fx && nf <= fx + ARMIJO_C1 * decrease {
                return Some((nx, nf));
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Minimises `t -> f(x + t d)` over `[lo, hi]` by a coarse scan followed by
/// golden-section refinement around the best scan point. Returns the best
/// point only if it beats `fx`.
fn line_minimize(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    fx: f64,
    d: &[f64],
    (lo, hi): (f64, f64),
    bounds: (f64, f64),
) -> Option<(Vec<f64>, f64)> {
    if hi - lo <= 0.0 {
        return None;
    }
    let mut eval = |t: f64| {
        let mut p: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        project(&mut p, bounds);
        let v = f(&p);
        (p, v)
    };
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&t| eval(t).1).collect();
    let mut best = 0;
    for i in 1..SCAN_POINTS {
        if values[i] < values[best] {
            best = i;
        }
    }
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(SCAN_POINTS - 1)]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (mut fc, mut fe) = (eval(c).1, eval(e).1);
    while (b - a).abs() > GOLDEN_TOL {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c).1;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = eval(e).1;
        }
    }
    let candidates = [(grid[best], values[best]), (c, fc), (e, fe)];
    let (t, v) = candidates.iter().copied().fold((0.0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
    if v < fx {
        Some((eval(t).0, v))
    } else {
        None
    }
}

/// One sweep of coordinate line searches, then one extrapolating search
/// along the sweep's net displacement.
fn powell_sweep(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    bounds: (f64, f64),
) -> Option<(Vec<f64>, f64)> {
    let n = x0.len();
    let (mut x, mut fx) = (x0.to_vec(), f0);
    for k in 0..n {
        let mut d = vec![0.0; n];
        d[k] = 1.0;
        let range = ((bounds.0 - x[k]).max(-LINE_SPAN), (bounds.1 - x[k]).min(LINE_SPAN));
        if let Some((nx, nf)) = line_minimize(f, &x, fx, &d, range, bounds) {
            x = nx;
            fx = nf;
        }
    }
    let d: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    if d.iter().any(|v| *v != 0.0) {
        if let Some((nx, nf)) = line_minimize(f, &x, fx, &d, (-1.0, 2.0), bounds) {
            x = nx;
            fx = nf;
        }
    }
    (fx < f0).then_some((x, fx))
}
