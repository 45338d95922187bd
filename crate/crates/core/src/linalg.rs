//! Small dense kernels for the radial operators: tridiagonal solves, Sturm
//! counts, and a conjugate-gradient loop for the box grid.

/// Symmetric tridiagonal matrix stored as diagonal plus first off-diagonal.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        debug_assert!(off.len() + 1 == diag.len() || diag.is_empty());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        let tiny = f64::MIN_POSITIVE.sqrt();
        for i in 0..self.diag.len() {
            let coupling = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { coupling / q };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            if i > 0 {
                radius += self.off[i - 1].abs();
            }
            if i + 1 < n {
                radius += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        (lo, hi)
    }

    /// Smallest eigenvalue by Sturm bisection, to roughly machine precision.
    pub fn lowest_eigenvalue(&self) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solve `(T - shift) x = rhs` with partial pivoting.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.diag.len();
        let sub: Vec<f64> = self.off.clone();
        let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let sup: Vec<f64> = self.off.clone();
        solve_tridiagonal(&sub, &diag, &sup, rhs).filter(|x| x.len() == n)
    }
}

/// General tridiagonal solve with partial pivoting (LAPACK `gtsv` scheme).
///
/// `sub[i]` couples row `i+1` to column `i`; `sup[i]` couples row `i` to
/// column `i+1`.  Returns `None` on an exactly singular pivot.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    // After elimination `dl[i]` holds the second super-diagonal fill-in.
    let mut dl = sub.to_vec();
    let mut d = diag.to_vec();
    let mut du = sup.to_vec();
    let mut b = rhs.to_vec();

    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return None;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    if d[n - 1] == 0.0 {
        return None;
    }
    let mut x = b;
    x[n - 1] /= d[n - 1];
    if n > 1 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - dl[i] * x[i + 2]) / d[i];
    }
    Some(x)
}

/// Conjugate gradients for a symmetric positive definite operator.
/// Returns the iterate and the number of iterations used.
pub fn conjugate_gradient<F>(apply: F, rhs: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> (Vec<f64>, usize)
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = rhs.len();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let target = tol * tol * rhs.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    while it < max_iter && rr > target {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        it += 1;
    }
    (x, it)
}
