//! Budget-aware Nelder–Mead maximizer with dimension-adaptive coefficients
//! (Gao & Han).

use std::cmp::Ordering;

/// Outcome of one [`maximize`] call.
#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMeadOptions {
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    /// Stop once every vertex is within this max-norm distance of the best.
    pub x_tol: f64,
    /// Stop once the value spread across the simplex drops below this.
    pub f_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.1, x_tol: 1e-6, f_tol: 1e-9 }
    }
}

struct Vertex {
    x: Vec<f64>,
    f: f64,
}

/// Maximizes `f` starting from `start`. `f` returns `None` once its
/// evaluation budget is exhausted, which ends the search. The start point
/// is evaluated first, so the result is never worse than it.
pub fn maximize<F>(mut f: F, start: &[f64], opts: &NelderMeadOptions) -> Option<NelderMeadResult>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let d = start.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], count: &mut usize| {
        let v = f(x);
        if v.is_some() {
            *count += 1;
        }
        v
    };

    let f0 = eval(start, &mut evaluations)?;
    let mut best = Vertex { x: start.to_vec(), f: f0 };
    let finish = |best: Vertex, evaluations: usize, converged: bool| {
        Some(NelderMeadResult { point: best.x, value: best.f, evaluations, converged })
    };
    if d == 0 {
        return finish(best, evaluations, true);
    }

    let dn = d as f64;
    let (alpha, chi, psi, sigma) = (1.0, 1.0 + 2.0 / dn, 0.75 - 0.5 / dn, 1.0 - 1.0 / dn);

    let mut simplex = vec![Vertex { x: start.to_vec(), f: f0 }];
    for i in 0..d {
        let mut x = start.to_vec();
        x[i] += opts.initial_step;
        let Some(v) = eval(&x, &mut evaluations) else {
            return finish(best_of(&simplex, best), evaluations, false);
        };
        simplex.push(Vertex { x, f: v });
    }

    loop {
        // descending by value; stable so earlier vertices win ties
        simplex.sort_by(|a, b| b.f.partial_cmp(&a.f).unwrap_or(Ordering::Equal));
        if simplex[0].f > best.f {
            best = Vertex { x: simplex[0].x.clone(), f: simplex[0].f };
        }
        let spread = simplex[0].f - simplex[d].f;
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.x.iter().zip(&simplex[0].x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread < opts.f_tol || diameter < opts.x_tol {
            return finish(best, evaluations, true);
        }

        let mut centroid = vec![0.0; d];
        for v in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(&v.x) {
                *c += x / dn;
            }
        }
        let along = |t: f64, toward: &[f64]| -> Vec<f64> {
            centroid.iter().zip(toward).map(|(c, w)| c + t * (w - c)).collect()
        };
        let worst = &simplex[d];

        let xr = along(-alpha, &worst.x);
        let Some(fr) = eval(&xr, &mut evaluations) else { break };

        if fr > simplex[0].f {
            let xe = along(-alpha * chi, &worst.x);
            let Some(fe) = eval(&xe, &mut evaluations) else {
                simplex[d] = Vertex { x: xr, f: fr };
                break;
            };
            simplex[d] = if fe > fr { Vertex { x: xe, f: fe } } else { Vertex { x: xr, f: fr } };
            continue;
        }
        if fr > simplex[d - 1].f {
            simplex[d] = Vertex { x: xr, f: fr };
            continue;
        }

        let contracted = if fr > worst.f {
            let xc = along(-alpha * psi, &worst.x);
            let Some(fc) = eval(&xc, &mut evaluations) else { break };
            (fc >= fr).then_some(Vertex { x: xc, f: fc })
        } else {
            let xc = along(psi, &worst.x);
            let Some(fc) = eval(&xc, &mut evaluations) else { break };
            (fc > worst.f).then_some(Vertex { x: xc, f: fc })
        };
        if let Some(v) = contracted {
            simplex[d] = v;
            continue;
        }

        // shrink toward the best vertex
        let anchor = simplex[0].x.clone();
        for v in simplex[1..].iter_mut() {
            let x: Vec<f64> = anchor.iter().zip(&v.x).map(|(a, b)| a + sigma * (b - a)).collect();
            let Some(fx) = eval(&x, &mut evaluations) else {
                return finish(best_of(&simplex, best), evaluations, false);
            };
            *v = Vertex { x, f: fx };
        }
    }
    finish(best_of(&simplex, best), evaluations, false)
}

fn best_of(simplex: &[Vertex], best: Vertex) -> Vertex {
    simplex
        .iter()
        .filter(|v| v.f > best.f)
        .max_by(|a, b| a.f.partial_cmp(&b.f).unwrap_or(Ordering::Equal))
        .map(|v| Vertex { x: v.x.clone(), f: v.f })
        .unwrap_or(best)
}
