//! ν-SVR dual solver: sequential minimal optimization with second-order
//! working-set selection, in the two-constraint form used by LIBSVM.
//!
//! With `l` training points there are `2l` dual variables: `α_i` (label +1)
//! and `α*_i` (label −1). The problem is
//!
//! ```text
//! min  ½ (α − α*)ᵀ K (α − α*) − yᵀ(α − α*)
//! s.t. Σ α_i = Σ α*_i = C ν l / 2,   0 ≤ α, α* ≤ C
//! ```
//!
//! and the regressor is `f(x) = Σ (α_i − α*_i) k(x_i, x) + b`.

const TAU: f64 = 1e-12;

/// Dense symmetric kernel matrix, row-major.
#[derive(Debug, Clone)]
pub(crate) struct KernelMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl KernelMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub coef: Vec<f64>,
    pub bias: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub violation: f64,
}

struct State<'a> {
    k: &'a KernelMatrix,
    l: usize,
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl State<'_> {
    #[inline]
    fn sign(&self, t: usize) -> f64 {
        if t < self.l {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    fn q(&self, t: usize, s: usize) -> f64 {
        self.sign(t) * self.sign(s) * self.k.get(t % self.l, s % self.l)
    }

    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Picks the maximal-violating pair within one label group, or `None`
    /// when the violation is below `tol`. Returns the violation either way.
    fn select(&self, tol: f64) -> (Option<(usize, usize)>, f64) {
        let n = 2 * self.l;
        let (mut gmaxp, mut gmaxp_idx) = (f64::NEG_INFINITY, None);
        let (mut gmaxn, mut gmaxn_idx) = (f64::NEG_INFINITY, None);
        for t in 0..n {
            if self.sign(t) > 0.0 {
                if !self.at_upper(t) && -self.grad[t] >= gmaxp {
                    gmaxp = -self.grad[t];
                    gmaxp_idx = Some(t);
                }
            } else if !self.at_lower(t) && self.grad[t] >= gmaxn {
                gmaxn = self.grad[t];
                gmaxn_idx = Some(t);
            }
        }

        let (mut gmaxp2, mut gmaxn2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut best: Option<usize> = None;
        let mut best_obj = f64::INFINITY;
        for j in 0..n {
            if self.sign(j) > 0.0 {
                if self.at_lower(j) {
                    continue;
                }
                gmaxp2 = gmaxp2.max(self.grad[j]);
                let Some(ip) = gmaxp_idx else { continue };
                let diff = gmaxp + self.grad[j];
                if diff > 0.0 {
                    let quad = self.q(ip, ip) + self.q(j, j) - 2.0 * self.q(ip, j);
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best_obj {
                        best_obj = obj;
                        best = Some(j);
                    }
                }
            } else {
                if self.at_upper(j) {
                    continue;
                }
                gmaxn2 = gmaxn2.max(-self.grad[j]);
                let Some(im) = gmaxn_idx else { continue };
                let diff = gmaxn - self.grad[j];
                if diff > 0.0 {
                    let quad = self.q(im, im) + self.q(j, j) - 2.0 * self.q(im, j);
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best_obj {
                        best_obj = obj;
                        best = Some(j);
                    }
                }
            }
        }

        let violation = (gmaxp + gmaxp2).max(gmaxn + gmaxn2);
        match best {
            Some(j) if violation >= tol => {
                let i = if self.sign(j) > 0.0 {
                    gmaxp_idx
                } else {
                    gmaxn_idx
                };
                (i.map(|i| (i, j)), violation)
            }
            _ => (None, violation),
        }
    }

    /// Two-variable update for a same-label pair; keeps `α_i + α_j` fixed.
    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let quad = {
            let q = self.q(i, i) + self.q(j, j) - 2.0 * self.q(i, j);
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        let delta = (self.grad[i] - self.grad[j]) / quad;
        let sum = old_i + old_j;
        let mut ai = old_i - delta;
        let mut aj = old_j + delta;
        if sum > c {
            if ai > c {
                ai = c;
                aj = sum - c;
            }
        } else if aj < 0.0 {
            aj = 0.0;
            ai = sum;
        }
        if sum > c {
            if aj > c {
                aj = c;
                ai = sum - c;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = sum;
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;

        let (dai, daj) = (ai - old_i, aj - old_j);
        let (si, sj) = (self.sign(i), self.sign(j));
        let (ri, rj) = (self.k.row(i % self.l), self.k.row(j % self.l));
        let l = self.l;
        for (t, g) in self.grad.iter_mut().enumerate() {
            let st = if t < l { 1.0 } else { -1.0 };
            let kt = t % l;
            *g += st * (si * ri[kt] * dai + sj * rj[kt] * daj);
        }
    }

    /// Bias and tube width from the two group multipliers.
    fn offsets(&self) -> (f64, f64) {
        let mut r = [0.0; 2];
        for (g, r) in r.iter_mut().enumerate() {
            let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut sum_free, mut n_free) = (0.0, 0usize);
            for t in (g * self.l)..((g + 1) * self.l) {
                if self.at_upper(t) {
                    lb = lb.max(self.grad[t]);
                } else if self.at_lower(t) {
                    ub = ub.min(self.grad[t]);
                } else {
                    n_free += 1;
                    sum_free += self.grad[t];
                }
            }
            *r = if n_free > 0 {
                sum_free / n_free as f64
            } else {
                (ub + lb) / 2.0
            };
        }
        let bias = (r[1] - r[0]) / 2.0;
        let epsilon = -(r[0] + r[1]) / 2.0;
        (bias, epsilon)
    }
}

pub(crate) fn solve_nu_svr(k: &KernelMatrix, y: &[f64], nu: f64, c: f64, tol: f64) -> Solution {
    let l = y.len();
    debug_assert_eq!(k.n, l);
    let mut alpha = vec![0.0; 2 * l];
    let mut remaining = c * nu * l as f64 / 2.0;
    for i in 0..l {
        let a = remaining.min(c);
        alpha[i] = a;
        alpha[i + l] = a;
        remaining -= a;
    }

    // G = p + Qα, p = (-y, y)
    let coef: Vec<f64> = (0..l).map(|i| alpha[i] - alpha[i + l]).collect();
    let mut grad = vec![0.0; 2 * l];
    for i in 0..l {
        let f: f64 = k.row(i).iter().zip(&coef).map(|(a, b)| a * b).sum();
        grad[i] = f - y[i];
        grad[i + l] = y[i] - f;
    }

    let mut state = State {
        k,
        l,
        c,
        alpha,
        grad,
    };
    let max_iter = (100 * l).max(10_000_000);
    let mut iterations = 0;
    let violation = loop {
        let (pair, violation) = state.select(tol);
        match pair {
            Some((i, j)) if iterations < max_iter => {
                state.update(i, j);
                iterations += 1;
            }
            _ => break violation,
        }
    };
    if iterations >= max_iter {
        log::warn!("ν-SVR solver hit the iteration limit (violation {violation:e})");
    }
    let (bias, epsilon) = state.offsets();
    let coef = (0..l)
        .map(|i| state.alpha[i] - state.alpha[i + l])
        .collect();
    Solution {
        coef,
        bias,
        epsilon,
        iterations,
        violation: violation.max(0.0),
    }
}
