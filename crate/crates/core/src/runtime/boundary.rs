use alloc::sync::Arc;

use super::{OdeSol, SimConfig, State, Trajectory};
use crate::syntax::{BExpr, Field};
use crate::Result;

/// Solution of `field` from `s` and the first time the domain fails.
///
/// The domain is evaluated on the integrator grid; the first failing
/// interval is bisected down to `cfg.boundary_tol` and the failing end is
/// returned, so the domain is false at the reported time. `Some(0.0)` when
/// the domain already fails at `s`; `None` when it holds up to the horizon
/// or is literally `true`.
pub fn detect_boundary(
    field: &Arc<Field>,
    domain: &BExpr,
    s: &State,
    cfg: &SimConfig,
) -> Result<(Trajectory, Option<f64>)> {
    let sol = Arc::new(OdeSol::new(field.clone(), s.clone(), cfg.step)?);
    let traj = Trajectory::Ode(sol.clone());
    if *domain == BExpr::True {
        return Ok((traj, None));
    }
    let holds = |t: f64| -> Result<bool> {
        let ys = sol.values_at(t)?;
        let env = |name: &str| match field.iter().position(|(x, _)| x == name) {
            Some(i) => Ok(ys[i]),
            None => s.get(name),
        };
        domain.eval_with(&env)
    };
    if !domain.eval(s)? {
        return Ok((traj, Some(0.0)));
    }
    let h = cfg.step;
    let mut k: u64 = 1;
    loop {
        let t = (k as f64 * h).min(cfg.horizon);
        if !holds(t)? {
            let (mut lo, mut hi) = ((k - 1) as f64 * h, t);
            while hi - lo > cfg.boundary_tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if holds(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok((traj, Some(hi)));
        }
        if t >= cfg.horizon {
            return Ok((traj, None));
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_bexpr, parse_expr};
    use alloc::string::ToString;
    use alloc::vec;

    fn run(x_dot: &str, dom: &str, x0: f64) -> Option<f64> {
        let f = Arc::new(vec![("x".to_string(), parse_expr(x_dot).unwrap())]);
        let b = parse_bexpr(dom).unwrap();
        detect_boundary(&f, &b, &State::from_pairs(&[("x", x0)]), &SimConfig::default()).unwrap().1
    }

    #[test]
    fn linear_crossing() {
        let d = run("1", "x < 2", 0.0).unwrap();
        assert!((d - 2.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_decay_crossing() {
        let d = run("-x", "x > 1", 2.0).unwrap();
        assert!((d - core::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn already_outside_and_never_leaving() {
        assert_eq!(run("1", "x < 2", 3.0), Some(0.0));
        assert_eq!(run("1", "true", 0.0), None);
        assert_eq!(run("-1", "x < 2", 0.0), None);
    }
}
