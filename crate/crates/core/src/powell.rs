//! Powell's conjugate-direction method for two-parameter objectives.
//!
//! Each outer cycle line-minimizes along the current direction set, then
//! replaces the direction of largest decrease with the net displacement of
//! the cycle when that is predicted to help. Line minimization brackets the
//! minimum by golden-ratio expansion and refines it with Brent's method.

use crate::error::{Error, Result};

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;
const GROW_LIMIT: f64 = 110.0;
const TINY: f64 = 1e-20;
const LINE_TOL: f64 = 1.48e-8;
const LINE_ABS_TOL: f64 = 1e-11;
const LINE_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub point: [f64; 2],
    pub value: f64,
    pub cycles: usize,
    pub evaluations: usize,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut([f64; 2]) -> f64> Counted<F> {
    fn eval(&mut self, p: [f64; 2]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(p);
        // a NaN would stall every comparison below; treat it as +inf
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn along(&mut self, p: [f64; 2], dir: [f64; 2], t: f64) -> f64 {
        self.eval(offset(p, dir, t))
    }
}

#[inline]
fn offset(p: [f64; 2], dir: [f64; 2], t: f64) -> [f64; 2] {
    [p[0] + t * dir[0], p[1] + t * dir[1]]
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Minimizes `objective` starting from `start`.
///
/// Converges when one full cycle lowers the objective by less than
/// `tol * (|f_prev| + |f|) / 2`. After `max_iter` cycles without convergence
/// the best point found is reported inside [`Error::OptimizationFailure`].
pub fn powell_minimize(
    objective: impl FnMut([f64; 2]) -> f64,
    start: [f64; 2],
    tol: f64,
    max_iter: usize,
) -> Result<Minimum> {
    let mut f = Counted { f: objective, evaluations: 0 };
    let mut p = start;
    let mut fret = f.eval(p);
    if !fret.is_finite() {
        return Err(Error::invalid("objective is not finite at the starting point"));
    }
    let mut dirs = [[1.0, 0.0], [0.0, 1.0]];
    let mut pt = p;

    for cycle in 1..=max_iter {
        let fp = fret;
        let mut biggest = 0;
        let mut delta = 0.0;
        for (i, dir) in dirs.iter().enumerate() {
            let before = fret;
            let (np, nf) = line_minimize(&mut f, p, *dir, fret);
            p = np;
            fret = nf;
            if before - fret > delta {
                delta = before - fret;
                biggest = i;
            }
        }
        if 2.0 * (fp - fret) <= tol * (fp.abs() + fret.abs()) + TINY {
            return Ok(Minimum { point: p, value: fret, cycles: cycle, evaluations: f.evaluations });
        }
        let extrapolated = [2.0 * p[0] - pt[0], 2.0 * p[1] - pt[1]];
        let moved = [p[0] - pt[0], p[1] - pt[1]];
        pt = p;
        let fe = f.eval(extrapolated);
        if fe < fp {
            let (a, b) = (fp - fret - delta, fp - fe);
            let t = 2.0 * (fp - 2.0 * fret + fe) * a * a - delta * b * b;
            if t < 0.0 {
                let (np, nf) = line_minimize(&mut f, p, moved, fret);
                p = np;
                fret = nf;
                dirs[biggest] = dirs[1];
                dirs[1] = moved;
            }
        }
    }
    Err(Error::OptimizationFailure { iterations: max_iter, best_point: p, best_value: fret })
}

/// Minimizes along `p + t * dir`; never returns a worse point than `p`.
fn line_minimize<F: FnMut([f64; 2]) -> f64>(
    f: &mut Counted<F>,
    p: [f64; 2],
    dir: [f64; 2],
    fp: f64,
) -> ([f64; 2], f64) {
    if dir == [0.0, 0.0] {
        return (p, fp);
    }
    let (ax, bx, cx) = bracket(f, p, dir, fp);
    let (t, ft) = brent(f, p, dir, ax, bx, cx);
    if ft < fp {
        (offset(p, dir, t), ft)
    } else {
        (p, fp)
    }
}

/// Returns `(a, b, c)` with `f(b) <= f(a), f(c)`, starting from `t = 0, 1`.
fn bracket<F: FnMut([f64; 2]) -> f64>(f: &mut Counted<F>, p: [f64; 2], dir: [f64; 2], f0: f64) -> (f64, f64, f64) {
    let (mut ax, mut bx) = (0.0, 1.0);
    let (mut fa, mut fb) = (f0, f.along(p, dir, bx));
    if fb > fa {
        core::mem::swap(&mut ax, &mut bx);
        core::mem::swap(&mut fa, &mut fb);
    }
    let mut cx = bx + GOLD * (bx - ax);
    let mut fc = f.along(p, dir, cx);
    let mut guard = 0;
    while fb > fc && guard < 200 {
        guard += 1;
        let r = (bx - ax) * (fb - fc);
        let q = (bx - cx) * (fb - fa);
        let mut u = bx - ((bx - cx) * q - (bx - ax) * r) / (2.0 * sign((q - r).abs().max(TINY), q - r));
        let ulim = bx + GROW_LIMIT * (cx - bx);
        let mut fu;
        if (bx - u) * (u - cx) > 0.0 {
            fu = f.along(p, dir, u);
            if fu < fc {
                return (bx, u, cx);
            } else if fu > fb {
                return (ax, bx, u);
            }
            u = cx + GOLD * (cx - bx);
            fu = f.along(p, dir, u);
        } else if (cx - u) * (u - ulim) > 0.0 {
            fu = f.along(p, dir, u);
            if fu < fc {
                bx = cx;
                cx = u;
                u = cx + GOLD * (cx - bx);
                fb = fc;
                fc = fu;
                fu = f.along(p, dir, u);
            }
        } else if (u - ulim) * (ulim - cx) >= 0.0 {
            u = ulim;
            fu = f.along(p, dir, u);
        } else {
            u = cx + GOLD * (cx - bx);
            fu = f.along(p, dir, u);
        }
        ax = bx;
        bx = cx;
        cx = u;
        fa = fb;
        fb = fc;
        fc = fu;
    }
    (ax, bx, cx)
}

fn brent<F: FnMut([f64; 2]) -> f64>(
    f: &mut Counted<F>,
    p: [f64; 2],
    dir: [f64; 2],
    ax: f64,
    bx: f64,
    cx: f64,
) -> (f64, f64) {
    let (mut a, mut b) = if ax < cx { (ax, cx) } else { (cx, ax) };
    let (mut x, mut w, mut v) = (bx, bx, bx);
    let mut fx = f.along(p, dir, x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..LINE_MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = LINE_TOL * x.abs() + LINE_ABS_TOL;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut pp = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                pp = -pp;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if pp.abs() >= (0.5 * q * etemp).abs() || pp <= q * (a - x) || pp >= q * (b - x) {
                e = if x >= xm { a - x } else { b - x };
                d = CGOLD * e;
            } else {
                d = pp / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = sign(tol1, xm - x);
                }
            }
        } else {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + sign(tol1, d) };
        let fu = f.along(p, dir, u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            w = x;
            x = u;
            fv = fw;
            fw = fx;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                w = u;
                fv = fw;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_quadratic() {
        let m = powell_minimize(|[x, y]| (x - 3.0).powi(2) + (y + 1.0).powi(2), [0.0, 0.0], 1e-10, 200).unwrap();
        assert!((m.point[0] - 3.0).abs() < 1e-6 && (m.point[1] + 1.0).abs() < 1e-6, "{:?}", m);
    }

    #[test]
    fn coupled_quadratic() {
        let m = powell_minimize(|[x, y]| (x - y).powi(2) + 0.01 * y * y, [2.0, -1.5], 1e-10, 200).unwrap();
        assert!(m.point[0].abs() < 1e-4 && m.point[1].abs() < 1e-4, "{:?}", m);
    }

    #[test]
    fn rosenbrock() {
        let m = powell_minimize(
            |[x, y]| (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2),
            [-1.2, 1.0],
            1e-14,
            1000,
        )
        .unwrap();
        assert!((m.point[0] - 1.0).abs() < 1e-3 && (m.point[1] - 1.0).abs() < 1e-3, "{:?}", m);
    }

    #[test]
    fn deterministic() {
        let f = |[x, y]: [f64; 2]| (x - 0.3).abs() + (x + y).powi(2);
        let a = powell_minimize(f, [1.0, 1.0], 1e-10, 200);
        let b = powell_minimize(f, [1.0, 1.0], 1e-10, 200);
        assert_eq!(a, b);
    }

    #[test]
    fn budget_exhaustion_reports_best() {
        let err = powell_minimize(
            |[x, y]| (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2),
            [-1.2, 1.0],
            0.0,
            1,
        )
        .unwrap_err();
        match err {
            Error::OptimizationFailure { iterations, best_value, .. } => {
                assert_eq!(iterations, 1);
                assert!(best_value < 24.2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_start_rejected() {
        assert!(matches!(powell_minimize(|_| f64::NAN, [0.0, 0.0], 1e-10, 10), Err(Error::InvalidArgument(_))));
    }
}
