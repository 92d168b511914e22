//! Derivative-free minimization: Nelder–Mead with restarts.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NelderMead {
    /// Objective evaluations across all restarts.
    pub max_evals: usize,
    /// Stop a run when the simplex values span less than this.
    pub f_tol: f64,
    /// Stop a run when the simplex diameter drops below this.
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { max_evals: 200, f_tol: 1e-10, x_tol: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub f: f64,
    /// Best value seen so far, including this evaluation.
    pub best: f64,
    pub restart: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub history: Vec<Evaluation>,
}

struct Budget<'a, F: FnMut(&[f64]) -> f64> {
    f: F,
    max: usize,
    restart: usize,
    history: &'a mut Vec<Evaluation>,
    best: (Vec<f64>, f64),
}

impl<F: FnMut(&[f64]) -> f64> Budget<'_, F> {
    fn exhausted(&self) -> bool {
        self.history.len() >= self.max
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        let mut v = (self.f)(x);
        if v.is_nan() {
            v = f64::INFINITY;
        }
        if v < self.best.1 || self.history.is_empty() {
            self.best = (x.to_vec(), v);
        }
        self.history.push(Evaluation { x: x.to_vec(), f: v, best: self.best.1, restart: self.restart });
        v
    }
}

/// Minimize `f` starting from `x0`. Restart `k` builds its simplex as
/// `best + d` for each direction `d` in `simplices[k]`; the first restart is
/// anchored at `x0`. The best point seen is returned, so `x0` itself is
/// always a candidate.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], simplices: &[Vec<Vec<f64>>], opts: &NelderMead) -> Minimum {
    let n = x0.len();
    let mut history = Vec::new();
    let mut b = Budget { f, max: opts.max_evals, restart: 0, history: &mut history, best: (x0.to_vec(), f64::INFINITY) };
    if opts.max_evals == 0 {
        return Minimum { x: x0.to_vec(), f: f64::NAN, evals: 0, history: vec![] };
    }
    b.eval(x0);
    for (k, dirs) in simplices.iter().enumerate() {
        if b.exhausted() || n == 0 {
            break;
        }
        b.restart = k;
        let anchor = b.best.clone();
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![anchor.clone()];
        for d in dirs.iter().take(n) {
            if b.exhausted() {
                break;
            }
            let x: Vec<f64> = anchor.0.iter().zip(d).map(|(a, s)| a + s).collect();
            let v = b.eval(&x);
            simplex.push((x, v));
        }
        if simplex.len() < n + 1 {
            break;
        }
        run(&mut b, &mut simplex, opts);
    }
    let (x, f) = b.best.clone();
    let evals = history.len();
    Minimum { x, f, evals, history }
}

fn run<F: FnMut(&[f64]) -> f64>(b: &mut Budget<'_, F>, s: &mut [(Vec<f64>, f64)], opts: &NelderMead) {
    let n = s.len() - 1;
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let lerp = |a: &[f64], c: &[f64], t: f64| -> Vec<f64> { a.iter().zip(c).map(|(a, c)| c + t * (a - c)).collect() };
    loop {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = s[n].1 - s[0].1;
        let diam = s[1..].iter().map(|(x, _)| x.iter().zip(&s[0].0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))).fold(0.0, f64::max);
        if b.exhausted() || spread.abs() <= opts.f_tol || diam <= opts.x_tol {
            return;
        }
        let mut c = vec![0.0; s[0].0.len()];
        for (x, _) in &s[..n] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += xi / n as f64;
            }
        }
        let xr = lerp(&s[n].0, &c, -alpha);
        let fr = b.eval(&xr);
        if fr < s[0].1 {
            if b.exhausted() {
                s[n] = (xr, fr);
                continue;
            }
            let xe = lerp(&s[n].0, &c, -gamma);
            let fe = b.eval(&xe);
            s[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < s[n - 1].1 {
            s[n] = (xr, fr);
        } else {
            if b.exhausted() {
                return;
            }
            let (xc, fc) = if fr < s[n].1 {
                let x = lerp(&xr, &c, rho);
                let v = b.eval(&x);
                (x, v)
            } else {
                let x = lerp(&s[n].0, &c, rho);
                let v = b.eval(&x);
                (x, v)
            };
            if fc < fr.min(s[n].1) {
                s[n] = (xc, fc);
            } else {
                let best = s[0].0.clone();
                for v in s[1..].iter_mut() {
                    if b.exhausted() {
                        return;
                    }
                    let x = lerp(&v.0, &best, sigma);
                    let fx = b.eval(&x);
                    *v = (x, fx);
                }
            }
        }
    }
}

/// Axis directions `± step e_j`, signs drawn from `signs`.
pub fn axis_simplex(step: f64, signs: &[bool]) -> Vec<Vec<f64>> {
    let n = signs.len();
    (0..n)
        .map(|j| {
            let mut d = vec![0.0; n];
            d[j] = if signs[j] { step } else { -step };
            d
        })
        .collect()
}
