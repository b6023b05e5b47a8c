//! Fine-grid reference solver for `-ε(|u'|^{p-2}u')' = u^{q-1} f(a - u)` on
//! `[0, ℓ]` with `u = 0` at both ends.
//!
//! The discretization is the 1D analogue of the 2D one (cell fluxes, lumped
//! reaction, gap unknown `v = a - u`) and it is driven by the same
//! [`SolveConfig`]: monotone steps, then shifted Newton with `σ`/`μ`
//! continuation. Linear algebra is tridiagonal, so grids of `10^4` to `10^6`
//! points are cheap.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{build_rect_mesh, ScalarField};
use crate::plap::{self, Exponents, Nonlinearity};
use crate::solver::{solve_main, ProblemSpec, Reaction, SolveConfig};

#[derive(Clone, Copy, Debug)]
pub struct Oracle1DSpec {
    pub length: f64,
    pub a0: f64,
    pub slope: f64,
    pub exponents: Exponents,
    pub f: Nonlinearity,
    pub eps: f64,
    /// Number of cells.
    pub n: usize,
}

impl Oracle1DSpec {
    pub const MIN_CELLS: usize = 10_000;

    pub fn new(length: f64, a0: f64, slope: f64, exponents: Exponents, f: Nonlinearity, eps: f64, n: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::invalid(format!("interval length must be positive, got {length}")));
        }
        if !(a0 > 0.0 && a0 + slope * length > 0.0) {
            return Err(Error::invalid("a must be positive on the interval"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        if n < Self::MIN_CELLS {
            return Err(Error::invalid(format!("the oracle needs at least {} cells, got {n}", Self::MIN_CELLS)));
        }
        if f.theta != exponents.theta {
            return Err(Error::invalid("nonlinearity and exponents disagree on theta"));
        }
        Ok(Oracle1DSpec { length, a0, slope, exponents, f, eps, n })
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.length, self.a0, self.slope, self.exponents, self.f, self.eps, n)
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.length, self.a0, self.slope, self.exponents, self.f, eps, self.n)
    }

    pub fn a_at(&self, x: f64) -> f64 {
        self.a0 + self.slope * x
    }

    pub fn a_max(&self) -> f64 {
        self.a0.max(self.a_at(self.length))
    }

    pub fn tau_c(&self, cfg: &SolveConfig) -> f64 {
        (1e-6 * self.a_max()).max(10.0 * cfg.newton_tol)
    }
}

#[derive(Clone, Debug)]
pub struct Solution1D {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub gap: Vec<f64>,
    /// Longest run of nodes with `a - u ≤ τ_c`, as an `x` interval.
    pub flat_core: Option<(f64, f64)>,
    /// Number of separate runs; expected to be at most one for affine `a`.
    pub core_components: usize,
    /// `sup{dist(x, ∂I) : a - u > τ_c}`.
    pub width: f64,
    pub tau_c: f64,
    /// Unsmoothed strong residual.
    pub residual: f64,
    pub iterations: usize,
}

impl Solution1D {
    /// Linear interpolation of `u`.
    pub fn u_at(&self, x: f64) -> f64 {
        interp(&self.x, &self.u, x)
    }

    pub fn gap_at(&self, x: f64) -> f64 {
        interp(&self.x, &self.gap, x)
    }

    /// Fraction of the interval covered by the flat core.
    pub fn core_fraction(&self) -> f64 {
        let len = self.x.last().unwrap() - self.x[0];
        self.flat_core.map_or(0.0, |(a, b)| (b - a) / len)
    }

    /// `x, u, a - u` rows with a schema line and header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# flatcore-oned v1\nx,u,gap\n");
        for i in 0..self.x.len() {
            s.push_str(&format!("{:.10e},{:.10e},{:.10e}\n", self.x[i], self.u[i], self.gap[i]));
        }
        s
    }

    pub fn summary(&self) -> String {
        match self.flat_core {
            Some((l, r)) => format!(
                "flat_core {l:.10e} {r:.10e} components {} width {:.10e} residual {:.3e}",
                self.core_components, self.width, self.residual
            ),
            None => format!("flat_core empty width {:.10e} residual {:.3e}", self.width, self.residual),
        }
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len() - 1;
    let h = (xs[n] - xs[0]) / n as f64;
    let t = ((x - xs[0]) / h).clamp(0.0, n as f64);
    let i = (t.floor() as usize).min(n - 1);
    let s = t - i as f64;
    ys[i] * (1.0 - s) + ys[i + 1] * s
}

/// Cell flux pieces: `Φ(η) = A(η - b) + A(b)` with `A(s) = (s² + μ²)^{(p-2)/2} s`.
#[derive(Clone, Copy)]
struct Flux {
    p: f64,
    mu: f64,
    b: f64,
}

impl Flux {
    fn a(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        (s * s + self.mu * self.mu).powf(0.5 * (self.p - 2.0)) * s
    }

    fn phi(&self, eta: f64) -> f64 {
        self.a(eta - self.b) + self.a(self.b)
    }

    fn dphi(&self, eta: f64) -> f64 {
        let s = eta - self.b;
        let r = s * s + self.mu * self.mu;
        r.powf(0.5 * (self.p - 4.0)) * ((self.p - 1.0) * s * s + self.mu * self.mu)
    }

    /// Antiderivative of `phi` vanishing at `η = 0`.
    fn psi(&self, eta: f64) -> f64 {
        let w = |s: f64| ((s * s + self.mu * self.mu).powf(0.5 * self.p) - self.mu.powf(self.p)) / self.p;
        w(eta - self.b) - w(-self.b) + self.a(self.b) * eta
    }
}

/// Iterate: node gaps `v` and cell slopes `η`. The slopes are advanced by
/// differences of the step rather than recomputed from `v`, so the flux is
/// free of the `|v|·2^{-52}/h` cancellation error that would otherwise
/// dominate the strong residual on fine grids (and, through the Hölder flux
/// at `p < 2`, be amplified further).
#[derive(Clone)]
struct State {
    v: Vec<f64>,
    eta: Vec<f64>,
}

impl State {
    fn from_v(v: Vec<f64>, h: f64) -> Self {
        let eta = v.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        State { v, eta }
    }

    /// `self + t d`, with `v` kept in the box `[-a, 2a]`.
    fn step(&self, d: &[f64], t: f64, h: f64, a: &[f64]) -> State {
        let n = self.eta.len();
        let mut v: Vec<f64> = (0..=n).map(|i| self.v[i] + t * d[i]).collect();
        let mut eta: Vec<f64> = (0..n).map(|c| self.eta[c] + t * (d[c + 1] - d[c]) / h).collect();
        for i in 0..=n {
            let c = v[i].clamp(-a[i], 2.0 * a[i]);
            if c != v[i] {
                v[i] = c;
                if i > 0 {
                    eta[i - 1] = (v[i] - v[i - 1]) / h;
                }
                if i < n {
                    eta[i] = (v[i + 1] - v[i]) / h;
                }
            }
        }
        State { v, eta }
    }
}

struct Grid<'a> {
    spec: &'a Oracle1DSpec,
    h: f64,
    a: Vec<f64>,
}

impl Grid<'_> {
    fn n(&self) -> usize {
        self.spec.n
    }

    /// `F_i = ε(Φ_{i-1/2} - Φ_{i+1/2}) + h R_i` at interior nodes, 0 at the ends.
    fn residual(&self, st: &State, fl: Flux, r: &Reaction) -> Vec<f64> {
        let n = self.n();
        let eps = self.spec.eps;
        let phis: Vec<f64> = st.eta.iter().map(|&e| fl.phi(e)).collect();
        let mut f = vec![0.0; n + 1];
        for i in 1..n {
            f[i] = eps * (phis[i - 1] - phis[i]) + self.h * r.h(self.a[i], st.v[i]);
        }
        f
    }

    /// Tridiagonal Jacobian of the flux part: `(diag, off)` with `off[c]`
    /// coupling nodes `c` and `c + 1`.
    fn flux_jacobian(&self, st: &State, fl: Flux) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let k: Vec<f64> = st.eta.iter().map(|&e| self.spec.eps * fl.dphi(e) / self.h).collect();
        let mut diag = vec![0.0; n + 1];
        for i in 1..n {
            diag[i] = k[i - 1] + k[i];
        }
        let off = k.iter().map(|x| -x).collect();
        (diag, off)
    }

    fn strong(&self, f: &[f64]) -> f64 {
        f[1..self.n()].iter().fold(0.0f64, |m, x| m.max(x.abs())) / self.h
    }

    /// Rounding noise of the strong residual, `8 · 2^{-52} (ε max|Φ| / h + max|R|)`,
    /// capped at `cap`.
    fn floor(&self, st: &State, fl: Flux, r: &Reaction, cap: f64) -> f64 {
        let phi = st.eta.iter().fold(0.0f64, |m, &e| m.max(fl.phi(e).abs()));
        let react = (1..self.n()).fold(0.0f64, |m, i| m.max(r.h(self.a[i], st.v[i]).abs()));
        (8.0 * f64::EPSILON * (self.spec.eps * phi / self.h + react)).min(cap)
    }

    fn merit(&self, f: &[f64]) -> f64 {
        f[1..self.n()].iter().map(|x| x * x).sum::<f64>() / self.h
    }
}

/// LDLᵀ solve of a symmetric tridiagonal system on nodes `1..n`; `None` when
/// a pivot is not positive.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len() - 1;
    let mut d = vec![0.0; n + 1];
    let mut l = vec![0.0; n + 1];
    let mut y = vec![0.0; n + 1];
    for i in 1..n {
        let (li, prev) = if i > 1 { (off[i - 1] / d[i - 1], y[i - 1]) } else { (0.0, 0.0) };
        l[i] = li;
        d[i] = diag[i] - if i > 1 { li * off[i - 1] } else { 0.0 };
        if !(d[i] > 0.0) || !d[i].is_finite() {
            return None;
        }
        y[i] = rhs[i] - li * prev;
    }
    let mut x = vec![0.0; n + 1];
    for i in (1..n).rev() {
        let next = if i + 1 < n { x[i + 1] } else { 0.0 };
        x[i] = y[i] / d[i] - if i + 1 < n { l[i + 1] * next } else { 0.0 };
    }
    Some(x)
}

/// Minimizes `Σ_c hεΨ(η_c) + Σ_i h(λv_i²/2 - r_i v_i)` by damped Newton.
fn monotone_step(g: &Grid, st0: &State, fl: Flux, lam: f64, rhs: &[f64], tol: f64) -> State {
    let n = g.n();
    let eps = g.spec.eps;
    let energy = |st: &State| {
        let d: f64 = st.eta.iter().map(|&e| fl.psi(e)).sum::<f64>() * g.h * eps;
        d + (1..n).map(|i| g.h * (0.5 * lam * st.v[i] * st.v[i] - rhs[i] * st.v[i])).sum::<f64>()
    };
    let grad = |st: &State| {
        let phis: Vec<f64> = st.eta.iter().map(|&e| fl.phi(e)).collect();
        let mut f = vec![0.0; n + 1];
        for i in 1..n {
            f[i] = eps * (phis[i - 1] - phis[i]) + g.h * (lam * st.v[i] - rhs[i]);
        }
        f
    };
    let mut st = st0.clone();
    let mut e = energy(&st);
    for _ in 0..100 {
        let f = grad(&st);
        let fs = g.strong(&f);
        if fs <= tol {
            break;
        }
        let (mut diag, off) = g.flux_jacobian(&st, fl);
        for d in diag.iter_mut().take(n).skip(1) {
            *d += g.h * lam;
        }
        let b: Vec<f64> = f.iter().map(|x| -x).collect();
        let Some(d) = solve_tridiagonal(&diag, &off, &b) else { break };
        let slope: f64 = (1..n).map(|i| f[i] * d[i]).sum();
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial = st.step(&d, t, g.h, &g.a);
            let et = energy(&trial);
            // The energy difference drowns in rounding near the minimizer;
            // a smaller gradient then decides.
            let flat = (et - e).abs() <= 1e-14 * e.abs().max(1e-300);
            if et <= e + 1e-4 * t * slope || flat && g.strong(&grad(&trial)) < fs {
                st = trial;
                e = et;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    st
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Strategy {
    /// Levenberg-Marquardt with backtracking on the merit.
    Descent,
    /// Pseudo-transient continuation.
    Transient,
}

struct Stage<'a> {
    g: &'a Grid<'a>,
    r: Reaction,
    fl: Flux,
    bounds: (f64, f64),
    lam_s: f64,
    near: f64,
    tol: f64,
}

impl<'a> Stage<'a> {
    fn new(g: &'a Grid<'a>, st: &State, (sigma, mu): (f64, f64), cfg: &SolveConfig, bounds: (f64, f64)) -> Self {
        let spec = g.spec;
        let r = Reaction { q: spec.exponents.q, f: spec.f, sigma };
        let fl = Flux { p: spec.exponents.p, mu, b: spec.slope };
        let lam_s = 1.05 * r.lipschitz(bounds.0, bounds.1);
        let near = 0.1 * cfg.accept_tol;
        let tol = cfg.newton_tol.max(g.floor(st, fl, &r, near));
        Stage { g, r, fl, bounds, lam_s, near, tol }
    }

    fn shifted_step(&self, st: &State, diag: &[f64], off: &[f64], rhs: &[f64], shift: f64) -> Option<Vec<f64>> {
        let (g, h) = (self.g, self.g.h);
        let n = g.n();
        let d: Vec<f64> = (0..=n)
            .map(|i| if i == 0 || i == n { 0.0 } else { diag[i] + h * (self.r.dh(g.a[i], st.v[i]) + shift) })
            .collect();
        solve_tridiagonal(&d, off, rhs)
    }

    /// Returns whether the stage tolerance was met and the iterations used.
    fn run(&self, st: &mut State, strategy: Strategy, limit: usize) -> (bool, usize) {
        match strategy {
            Strategy::Descent => self.descent(st, limit),
            Strategy::Transient => self.transient(st, limit),
        }
    }

    /// Steps must decrease the merit. The shift starts at zero and is raised
    /// tenfold on failure; with no descent left the iterate takes one
    /// monotone step and the shift restarts at the Lipschitz bound.
    fn descent(&self, st: &mut State, limit: usize) -> (bool, usize) {
        let (g, h) = (self.g, self.g.h);
        let n = g.n();
        let lam_s = self.lam_s;
        let mut shift = 0.0f64;
        let mut f = g.residual(st, self.fl, &self.r);
        let mut phi = g.merit(&f);
        let mut stalled = 0;
        let mut used = 0;
        while g.strong(&f) > self.tol && stalled < 5 {
            if used == limit {
                return (false, used);
            }
            used += 1;
            let (diag, off) = g.flux_jacobian(st, self.fl);
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let mut accepted = false;
            for _ in 0..40 {
                let Some(step) = self.shifted_step(st, &diag, &off, &rhs, shift) else {
                    shift = if shift == 0.0 { 1e-6 * lam_s } else { shift * 10.0 };
                    continue;
                };
                let mut best = None;
                for t in [1.0, 0.5, 0.25, 0.125] {
                    let trial = st.step(&step, t, h, &g.a);
                    let ft = g.residual(&trial, self.fl, &self.r);
                    let pt = g.merit(&ft);
                    if pt < phi {
                        best = Some((trial, ft, pt));
                        break;
                    }
                }
                if let Some((trial, ft, pt)) = best {
                    // Rounding-level progress near the floor does not count.
                    if pt > 0.99 * phi && g.strong(&ft) <= self.near {
                        stalled += 1;
                    } else {
                        stalled = 0;
                    }
                    *st = trial;
                    f = ft;
                    phi = pt;
                    shift *= 0.1;
                    if shift < 1e-12 * lam_s {
                        shift = 0.0;
                    }
                    accepted = true;
                    break;
                }
                shift = if shift == 0.0 { 1e-6 * lam_s } else { shift * 10.0 };
            }
            if !accepted {
                if g.strong(&f) <= self.near {
                    break;
                }
                let rhs: Vec<f64> = (0..=n).map(|i| lam_s * st.v[i] - self.r.h(g.a[i], st.v[i])).collect();
                let tol = (1e-3 * self.tol).max(g.floor(st, self.fl, &self.r, self.near));
                *st = monotone_step(g, st, self.fl, lam_s, &rhs, tol);
                f = g.residual(st, self.fl, &self.r);
                phi = g.merit(&f);
                shift = lam_s;
            }
        }
        (g.strong(&f) <= self.near.max(self.tol), used)
    }

    /// `(J + s h) d = -F` with the inverse time step `s` scaled by the
    /// residual ratio; steps may raise the residual up to tenfold, which lets
    /// the iterate cross a layer the descent stage stalls in front of. The
    /// Lipschitz bound grows like `σ^{θ-1}`, so `s` starts from the `σ = 1`
    /// bound instead.
    fn transient(&self, st: &mut State, limit: usize) -> (bool, usize) {
        let g = self.g;
        let lam_s = self.lam_s;
        let lam_1 = Reaction { sigma: self.r.sigma.max(1.0), ..self.r }.lipschitz(self.bounds.0, self.bounds.1);
        let mut shift = lam_s.min(1.05 * lam_1);
        let mut f = g.residual(st, self.fl, &self.r);
        let mut norm = g.merit(&f).sqrt();
        let mut used = 0;
        let mut stalled = 0;
        while g.strong(&f) > self.tol && stalled < 5 {
            if used == limit {
                return (false, used);
            }
            used += 1;
            let (diag, off) = g.flux_jacobian(st, self.fl);
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let mut moved = false;
            for _ in 0..60 {
                let trial = self
                    .shifted_step(st, &diag, &off, &rhs, shift)
                    .map(|step| st.step(&step, 1.0, g.h, &g.a));
                let Some(trial) = trial else {
                    shift = if shift == 0.0 { 1e-8 * lam_s } else { shift * 10.0 };
                    continue;
                };
                let ft = g.residual(&trial, self.fl, &self.r);
                let nt = g.merit(&ft).sqrt();
                if !(nt < 10.0 * norm) {
                    shift = if shift == 0.0 { 1e-8 * lam_s } else { shift * 10.0 };
                    continue;
                }
                if nt > 0.995 * norm && g.strong(&ft) <= self.near {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                shift *= nt / norm;
                if shift < 1e-10 * lam_s {
                    shift = 0.0;
                }
                *st = trial;
                f = ft;
                norm = nt;
                moved = true;
                break;
            }
            if !moved {
                break;
            }
        }
        (g.strong(&f) <= self.near.max(self.tol), used)
    }
}

/// Solve on the grid `x_i = iℓ/n` for the maximal solution `0 ≤ u ≤ a`.
pub fn solve_1d(spec: &Oracle1DSpec, cfg: &SolveConfig) -> Result<Solution1D> {
    cfg.validate()?;
    let n = spec.n;
    let h = spec.length / n as f64;
    let x: Vec<f64> = (0..=n).map(|i| spec.length * i as f64 / n as f64).collect();
    let a: Vec<f64> = x.iter().map(|&xi| spec.a_at(xi)).collect();
    let g = Grid { spec, h, a };
    let (p, q, theta) = (spec.exponents.p, spec.exponents.q, spec.exponents.theta);
    let mu = cfg.mu.unwrap_or_else(|| plap::default_mu(p));
    let (a_min, a_max) = (spec.a0.min(spec.a_at(spec.length)), spec.a_max());
    let v0: Vec<f64> = (0..=n).map(|i| if i == 0 || i == n { g.a[i] } else { 0.0 }).collect();
    let mut st = State::from_v(v0, h);
    let mut iterations = 0;
    let near = 0.1 * cfg.accept_tol;

    let r0 = Reaction { q, f: spec.f, sigma: cfg.sigma };
    let lam = cfg.picard_shift.unwrap_or_else(|| 1.05 * r0.lipschitz(a_min, a_max)).max(1e-12);
    let fl = Flux { p, mu, b: spec.slope };
    for _ in 0..cfg.picard_steps {
        let rhs: Vec<f64> = (0..=n).map(|i| lam * st.v[i] - r0.h(g.a[i], st.v[i])).collect();
        let tol = (1e-3 * cfg.newton_tol).max(g.floor(&st, fl, &r0, near));
        let next = monotone_step(&g, &st, fl, lam, &rhs, tol);
        let incr = next.v.iter().zip(&st.v).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        st = next;
        iterations += 1;
        if incr < 1e-3 * a_max {
            break;
        }
    }

    // Adaptive continuation: each (σ, μ) stage gets a bounded budget. A failed
    // descent stage is retried from the same iterate with the transient
    // strategy; if that fails too a geometric midpoint stage is inserted.
    let targets = oracle_stages(cfg, theta, p, mu);
    let mut budget = cfg.max_outer;
    let mut prev = (cfg.sigma, mu);
    let mut k = 0;
    let mut cur = targets[0];
    let mut strategy = Strategy::Descent;
    while budget > 0 {
        let saved = st.clone();
        let small = cur.0 / prev.0.max(1e-300) > 0.9 && cur.1 / prev.1.max(1e-300) > 0.9;
        let limit = if small { budget } else { budget.min(40) };
        let (ok, used) = Stage::new(&g, &st, cur, cfg, (a_min, a_max)).run(&mut st, strategy, limit);
        budget -= used;
        iterations += used;
        if ok {
            strategy = Strategy::Descent;
            let last = prev;
            prev = cur;
            if cur == targets[k] {
                k += 1;
                if k == targets.len() {
                    break;
                }
                cur = targets[k];
            } else {
                // Inside a bisected stage: twice the step that just worked,
                // in log space, without passing the target.
                let t = targets[k];
                let ahead = |c: f64, l: f64, t: f64| {
                    let next = c * (c / l.max(1e-300)).powi(2);
                    if (t - next) * (t - c) <= 0.0 { t } else { next }
                };
                cur = (ahead(cur.0, last.0, t.0), ahead(cur.1, last.1, t.1));
            }
        } else {
            st = saved;
            if strategy == Strategy::Descent {
                strategy = Strategy::Transient;
            } else {
                strategy = Strategy::Descent;
                cur = ((prev.0 * cur.0).sqrt(), (prev.1 * cur.1).sqrt());
            }
        }
    }
    let exact = Reaction { q, f: spec.f, sigma: 0.0 };
    let residual = g.strong(&g.residual(&st, Flux { p, mu: 0.0, b: spec.slope }, &exact));
    let v = st.v;
    if !(residual <= cfg.accept_tol) {
        return Err(Error::no_convergence(
            format!("1D residual {residual:.3e} above {:.1e} after {iterations} iterations", cfg.accept_tol),
            Some((0..=n).map(|i| g.a[i] - v[i]).collect()),
        ));
    }
    let u: Vec<f64> = (0..=n).map(|i| if i == 0 || i == n { 0.0 } else { g.a[i] - v[i] }).collect();
    let tau = spec.tau_c(cfg);
    let (flat_core, core_components) = longest_run(&x, &v, tau);
    let width = (0..=n)
        .filter(|&i| v[i] > tau)
        .map(|i| x[i].min(spec.length - x[i]))
        .fold(0.0, f64::max);
    Ok(Solution1D { x, u, gap: v, flat_core, core_components, width, tau_c: tau, residual, iterations })
}

/// The 2D stages, except that for `p > 2` the `σ` stages run at `μ = 3·10⁻²`
/// before `μ` is brought down. The degenerate flux `|s|^{p-2}s` has a
/// vanishing Jacobian where `u' = 0`, so Newton moves that point by about
/// one cell per step; the larger `μ` spreads the kink over many cells.
fn oracle_stages(cfg: &SolveConfig, theta: f64, p: f64, mu: f64) -> Vec<(f64, f64)> {
    let base = cfg.stages(theta, p, mu);
    let mu_hi = 3e-2;
    if p <= 2.0 || !cfg.schedule.is_empty() || mu >= mu_hi {
        return base;
    }
    let mut out: Vec<(f64, f64)> = base.iter().map(|&(s, _)| (s, mu_hi)).collect();
    let sigma = out.last().unwrap().0;
    let mut m = mu_hi;
    while m > mu {
        m = (m * 1e-2).max(mu);
        out.push((sigma, m));
    }
    out
}

fn longest_run(x: &[f64], v: &[f64], tau: f64) -> (Option<(f64, f64)>, usize) {
    let mut best: Option<(usize, usize)> = None;
    let mut count = 0;
    let mut i = 0;
    while i < v.len() {
        if v[i] <= tau {
            let s = i;
            while i + 1 < v.len() && v[i + 1] <= tau {
                i += 1;
            }
            count += 1;
            if best.is_none_or(|(bs, be)| i - s > be - bs) {
                best = Some((s, i));
            }
        }
        i += 1;
    }
    (best.map(|(s, e)| (x[s], x[e])), count)
}

/// `max_i |u_n(x_i) - u_{2n}(x_i)|` over the coarse nodes.
pub fn richardson_difference(spec: &Oracle1DSpec, cfg: &SolveConfig) -> Result<f64> {
    let coarse = solve_1d(spec, cfg)?;
    let fine = solve_1d(&spec.with_n(2 * spec.n)?, cfg)?;
    Ok((0..coarse.u.len()).map(|i| (coarse.u[i] - fine.u[2 * i]).abs()).fold(0.0, f64::max))
}

/// 2D solve on `[0, 1] × [0, aspect]` with `a = a0 + b x`, compared with the
/// oracle on `[0, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct CrossCheckSpec {
    pub aspect: f64,
    /// Cells across the short side; the long side gets `aspect` times more.
    pub nx: usize,
    pub a0: f64,
    pub slope: f64,
    pub exponents: Exponents,
    pub f: Nonlinearity,
    pub eps: f64,
    pub n_1d: usize,
}

impl CrossCheckSpec {
    /// Aspect 10, 32 cells across, `a = 1 + 0.1x`, `p = q = 2`, `ε = 10⁻²`.
    pub fn strip(theta: f64) -> Result<Self> {
        Ok(CrossCheckSpec {
            aspect: 10.0,
            nx: 32,
            a0: 1.0,
            slope: 0.1,
            exponents: Exponents::new(2.0, 2.0, theta)?,
            f: Nonlinearity::new(theta, 1.0)?,
            eps: 1e-2,
            n_1d: 32_000,
        })
    }
}

#[derive(Clone, Debug)]
pub struct CrossCheckReport {
    pub nx: usize,
    pub ny: usize,
    /// `max |u_2D - u_1D|` along `y = aspect / 2`.
    pub midline_deviation: f64,
    /// The same over every vertex with `y` in the central half of the strip.
    pub band_deviation: f64,
    pub flat_2d: bool,
    pub flat_1d: bool,
    /// Band vertices whose flat-core indicators differ.
    pub indicator_mismatch: usize,
    pub band_vertices: usize,
    /// Largest distance from a mismatched vertex to the 1D core edge.
    pub mismatch_distance: f64,
    pub h: f64,
}

impl CrossCheckReport {
    pub fn classification_agrees(&self) -> bool {
        self.flat_2d == self.flat_1d
    }

    /// Indicators equal except within two cells of the 1D core edge.
    pub fn indicators_agree(&self) -> bool {
        self.classification_agrees() && self.mismatch_distance <= 2.0 * self.h
    }
}

pub fn cross_check_2d(spec: &CrossCheckSpec, cfg: &SolveConfig) -> Result<CrossCheckReport> {
    if !(spec.aspect >= 1.0) {
        return Err(Error::invalid("strip aspect must be at least 1"));
    }
    let ny = (spec.nx as f64 * spec.aspect).round() as usize;
    let mesh = Arc::new(build_rect_mesh(1.0, spec.aspect, spec.nx, ny)?);
    let ps = ProblemSpec::new(mesh.clone(), spec.a0, [spec.slope, 0.0], spec.exponents, spec.f, spec.eps, spec.slope == 0.0)?;
    let two = solve_main(&ps, cfg)?;
    let one = solve_1d(&Oracle1DSpec::new(1.0, spec.a0, spec.slope, spec.exponents, spec.f, spec.eps, spec.n_1d)?, cfg)?;
    let tau2 = ps.tau_c(cfg);
    let u = two.u.values();
    let gap = two.gap.values();
    let (lo, hi) = (0.25 * spec.aspect, 0.75 * spec.aspect);
    let mid = 0.5 * spec.aspect;
    let hy = spec.aspect / ny as f64;
    let mut rep = CrossCheckReport {
        nx: spec.nx,
        ny,
        midline_deviation: 0.0,
        band_deviation: 0.0,
        flat_2d: false,
        flat_1d: false,
        indicator_mismatch: 0,
        band_vertices: 0,
        mismatch_distance: 0.0,
        h: 1.0 / spec.nx as f64,
    };
    let edges: Vec<f64> = one.flat_core.map_or(vec![], |(l, r)| vec![l, r]);
    for i in 0..mesh.n_vertices() {
        let [x, y] = mesh.vertex(i);
        if y < lo - 1e-12 || y > hi + 1e-12 {
            continue;
        }
        rep.band_vertices += 1;
        let d = (u[i] - one.u_at(x)).abs();
        rep.band_deviation = rep.band_deviation.max(d);
        if (y - mid).abs() < 0.5 * hy {
            rep.midline_deviation = rep.midline_deviation.max(d);
        }
        let f2 = gap[i] <= tau2;
        let f1 = one.gap_at(x) <= one.tau_c;
        rep.flat_2d |= f2;
        rep.flat_1d |= f1;
        if f2 != f1 {
            rep.indicator_mismatch += 1;
            let dist = edges.iter().map(|e| (x - e).abs()).fold(f64::INFINITY, f64::min);
            rep.mismatch_distance = rep.mismatch_distance.max(dist);
        }
    }
    Ok(rep)
}

/// Oracle field sampled on a 2D mesh as `u(x)`, for plotting next to 2D runs.
pub fn as_field(sol: &Solution1D, mesh: Arc<crate::mesh::Mesh>) -> Result<ScalarField> {
    ScalarField::from_fn(mesh, |p| sol.u_at(p[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: f64, q: f64, theta: f64, eps: f64, n: usize) -> Oracle1DSpec {
        Oracle1DSpec::new(1.0, 1.0, 0.1, Exponents::new(p, q, theta).unwrap(), Nonlinearity::new(theta, 1.0).unwrap(), eps, n)
            .unwrap()
    }

    #[test]
    fn validation() {
        let ex = Exponents::new(2.0, 2.0, 0.5).unwrap();
        let f = Nonlinearity::new(0.5, 1.0).unwrap();
        assert!(Oracle1DSpec::new(1.0, 1.0, 0.1, ex, f, 1e-3, 100).is_err());
        assert!(Oracle1DSpec::new(1.0, 0.05, -0.1, ex, f, 1e-3, 10_000).is_err());
        assert!(Oracle1DSpec::new(1.0, 1.0, 0.1, ex, f, -1.0, 10_000).is_err());
    }

    #[test]
    fn tridiagonal_matches_dense() {
        // Nodes 1..4 free.
        let diag = [0.0, 4.0, 5.0, 6.0, 4.5, 0.0];
        let off = [0.0, -1.0, -2.0, 0.5, 0.0];
        let rhs = [0.0, 1.0, -2.0, 3.0, 0.5, 0.0];
        let x = solve_tridiagonal(&diag, &off, &rhs).unwrap();
        for i in 1..5 {
            let mut ax = diag[i] * x[i];
            if i > 1 {
                ax += off[i - 1] * x[i - 1];
            }
            if i < 4 {
                ax += off[i] * x[i + 1];
            }
            assert!((ax - rhs[i]).abs() < 1e-13);
        }
        assert!(solve_tridiagonal(&[0.0, -1.0, 2.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 1.0, 1.0, 0.0]).is_none());
    }

    #[test]
    fn flux_antiderivative() {
        for p in [1.5, 2.0, 3.0] {
            let fl = Flux { p, mu: 1e-3, b: 0.1 };
            for eta in [-0.7, 0.02, 0.1, 1.3] {
                let h = 1e-6;
                assert!(((fl.psi(eta + h) - fl.psi(eta - h)) / (2.0 * h) - fl.phi(eta)).abs() < 1e-7);
                assert!(((fl.phi(eta + h) - fl.phi(eta - h)) / (2.0 * h) - fl.dphi(eta)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn jacobian_matches_differences() {
        for p in [1.5, 2.0, 3.0] {
            let sp = spec(p, p.min(2.0), 0.5, 1e-3, 10_000);
            let n = sp.n;
            let h = sp.length / n as f64;
            let a: Vec<f64> = (0..=n).map(|i| sp.a_at(i as f64 * h)).collect();
            let g = Grid { spec: &sp, h, a };
            let v: Vec<f64> = (0..=n).map(|i| if i == 0 || i == n { g.a[i] } else { 0.3 + 0.2 * (0.37 * i as f64).sin() * 1e-3 + 1e-4 * i as f64 / n as f64 }).collect();
            let st = State::from_v(v, h);
            let r = Reaction { q: sp.exponents.q, f: sp.f, sigma: 1e-2 };
            let fl = Flux { p, mu: 1e-6, b: sp.slope };
            let (diag, off) = g.flux_jacobian(&st, fl);
            for j in [1, 2, 500, n - 1] {
                let e = 1e-7;
                let mut d = vec![0.0; n + 1];
                d[j] = 1.0;
                let fp = g.residual(&st.step(&d, e, h, &g.a), fl, &r);
                let fm = g.residual(&st.step(&d, -e, h, &g.a), fl, &r);
                for i in j.saturating_sub(1).max(1)..=(j + 1).min(n - 1) {
                    let fd = (fp[i] - fm[i]) / (2.0 * e);
                    let an = if i == j { diag[i] + h * r.dh(g.a[i], st.v[i]) } else { off[i.min(j)] };
                    assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-3), "p={p} i={i} j={j} fd={fd} an={an}");
                }
            }
        }
    }

    #[test]
    fn runs_are_counted() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let v = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(longest_run(&x, &v, 1e-6), (Some((4.0, 6.0)), 2));
        assert_eq!(longest_run(&x, &[1.0; 8], 1e-6), (None, 0));
    }

    #[test]
    fn flat_core_and_bounds() {
        let s = solve_1d(&spec(2.0, 2.0, 0.5, 1e-4, 10_000), &SolveConfig::default()).unwrap();
        assert!(s.residual <= 1e-6);
        assert_eq!(s.core_components, 1);
        assert!(s.core_fraction() > 0.8, "{}", s.core_fraction());
        for i in 0..s.u.len() {
            assert!(s.u[i] >= -1e-12 && s.gap[i] >= -1e-12);
        }
    }

    #[test]
    fn strong_absorption_has_no_core() {
        let s = solve_1d(&spec(2.0, 2.0, 1.5, 1e-3, 10_000), &SolveConfig::default()).unwrap();
        assert!(s.flat_core.is_none());
        let n = s.x.len() - 1;
        let min = (n / 10..=9 * n / 10).map(|i| s.gap[i]).fold(f64::INFINITY, f64::min);
        assert!(min > s.tau_c, "{min}");
    }
}

