//! The monotone wide-stencil Monge-Ampère operator and its one-node inverse.
//!
//! At a node the operator is `min over frames ∏ max(Δ²_{v_i} u, 0)`. Each
//! factor is affine in the center value, `Δ² = A − B u0` with `B > 0`, so the
//! operator is nonincreasing in `u0` and nondecreasing in every neighbour.

use super::stencil::{DirEntry, Stencil};

/// `(A, B)` of every direction at one node.
#[inline]
pub fn affine_parts(entries: &[DirEntry], work: &[f64], out: &mut [(f64, f64)]) {
    for (o, e) in out.iter_mut().zip(entries) {
        *o = (
            e.cp * work[e.p as usize] + e.cm * work[e.m as usize],
            e.cp + e.cm,
        );
    }
}

#[inline]
pub fn operator_value(frames: &[Vec<usize>], parts: &[(f64, f64)], u0: f64) -> f64 {
    frames
        .iter()
        .map(|fr| {
            fr.iter()
                .map(|&i| (parts[i].0 - parts[i].1 * u0).max(0.0))
                .product::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest root `u` of `∏_i (A_i − B_i u) = f` with every factor nonnegative.
/// Closed form for two factors, bisection for three.
#[inline]
pub fn frame_root(frame: &[usize], parts: &[(f64, f64)], f: f64) -> f64 {
    match frame.len() {
        2 => {
            let (a1, b1) = parts[frame[0]];
            let (a2, b2) = parts[frame[1]];
            let (u1, u2) = (a1 / b1, a2 / b2);
            let umin = u1.min(u2);
            if f <= 0.0 {
                return umin;
            }
            let gap = (u1 - u2).abs();
            let ff = f / (b1 * b2);
            let y = 2.0 * ff / (gap + (gap * gap + 4.0 * ff).sqrt());
            umin - y
        }
        _ => frame_root_bisection(frame, parts, f),
    }
}

/// Bisection on the monotone map `y ↦ ∏ B_i (y + u_i − u_min)` for
/// `y = u_min − u ≥ 0`, to `1e-12` relative.
pub fn frame_root_bisection(frame: &[usize], parts: &[(f64, f64)], f: f64) -> f64 {
    let umin = frame
        .iter()
        .map(|&i| parts[i].0 / parts[i].1)
        .fold(f64::INFINITY, f64::min);
    if f <= 0.0 {
        return umin;
    }
    let prod = |y: f64| -> f64 {
        frame
            .iter()
            .map(|&i| {
                let (a, b) = parts[i];
                b * (y + a / b - umin)
            })
            .product()
    };
    // ∏ B_i y ≤ prod(y), so the root lies below (f / ∏B_i)^{1/k}
    let bprod: f64 = frame.iter().map(|&i| parts[i].1).product();
    let mut hi = (f / bprod).powf(1.0 / frame.len() as f64);
    let mut lo = 0.0;
    while prod(hi) < f {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if prod(mid) < f {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(umin.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
    }
    umin - 0.5 * (lo + hi)
}

/// Center value solving `operator = f` at one node: the minimum of the
/// per-frame roots.
#[inline]
pub fn node_solve(frames: &[Vec<usize>], parts: &[(f64, f64)], f: f64) -> f64 {
    frames
        .iter()
        .map(|fr| frame_root(fr, parts, f))
        .fold(f64::INFINITY, f64::min)
}

/// Operator at the `k`-th unknown of a stencil for the given work buffer.
pub fn operator_at(stencil: &Stencil, work: &[f64], k: usize) -> f64 {
    let mut parts = vec![(0.0, 0.0); stencil.ndirs()];
    affine_parts(stencil.node_entries(k), work, &mut parts);
    operator_value(&stencil.frames, &parts, work[stencil.unknowns[k]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_root_matches_bisection() {
        let frame = [0usize, 1];
        for (a1, b1, a2, b2, f) in [
            (3.0, 2.0, 1.0, 4.0, 0.7),
            (1e3, 1e4, -5.0, 1e4, 1e-6),
            (0.2, 1.0, 0.2, 1.0, 2.0),
        ] {
            let parts = [(a1, b1), (a2, b2)];
            let r1 = frame_root(&frame, &parts, f);
            let r2 = frame_root_bisection(&frame, &parts, f);
            assert!((r1 - r2).abs() <= 1e-10 * (1.0 + r1.abs()), "{r1} {r2}");
            let back = operator_value(&[frame.to_vec()], &parts, r1);
            assert!((back - f).abs() <= 1e-9 * f.max(1.0));
        }
    }

    #[test]
    fn three_factor_root_inverts_the_product() {
        let frame = [0usize, 1, 2];
        let parts = [(1.0, 2.0), (0.5, 1.0), (4.0, 3.0)];
        let r = frame_root(&frame, &parts, 0.3);
        let back = operator_value(&[frame.to_vec()], &parts, r);
        assert!((back - 0.3).abs() < 1e-11);
    }

    #[test]
    fn zero_rhs_gives_the_flat_root() {
        let parts = [(1.0, 2.0), (0.5, 1.0)];
        assert_eq!(frame_root(&[0, 1], &parts, 0.0), 0.5);
    }
}
