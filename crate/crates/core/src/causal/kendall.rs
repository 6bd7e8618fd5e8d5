use crate::data::PotentialOutcomePair;
use crate::error::{Error, Result};

/// Kendall's τ-b by Knight's merge-sort algorithm, `O(n log n)`.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!("kendall_tau needs equal lengths, got {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Domain("kendall_tau needs at least two pairs".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Domain("kendall_tau input contains NaN".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(y[i].total_cmp(&y[j])));

    let (mut tied_x, mut tied_xy) = (0u64, 0u64);
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        if x[i] == x[j] {
            run_x += 1;
            if y[i] == y[j] {
                run_xy += 1;
            } else {
                tied_xy += run_xy * (run_xy - 1) / 2;
                run_xy = 1;
            }
        } else {
            tied_x += run_x * (run_x - 1) / 2;
            tied_xy += run_xy * (run_xy - 1) / 2;
            run_x = 1;
            run_xy = 1;
        }
    }
    tied_x += run_x * (run_x - 1) / 2;
    tied_xy += run_xy * (run_xy - 1) / 2;

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut tied_y = 0u64;
    let mut run = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            tied_y += run * (run - 1) / 2;
            run = 1;
        }
    }
    tied_y += run * (run - 1) / 2;

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let s = n0 as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    let denom = ((n0 - tied_x) as f64 * (n0 - tied_y) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Domain("kendall_tau undefined when one margin is constant".into()));
    }
    Ok(s / denom)
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// τ between `T⁰` and `T¹`.
pub fn kendall_tau_pairs(pairs: &[PotentialOutcomePair]) -> Result<f64> {
    let t0: Vec<f64> = pairs.iter().map(|p| p.t0).collect();
    let t1: Vec<f64> = pairs.iter().map(|p| p.t1).collect();
    kendall_tau(&t0, &t1)
}

/// Gamma-coupling variance with Kendall's τ equal to `tau`: `θ = 2τ/(1−τ)`.
pub fn theta_from_tau(tau: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau must lie in [0,1), got {tau}")));
    }
    Ok(2.0 * tau / (1.0 - tau))
}

pub fn tau_from_theta(theta: f64) -> f64 {
    theta / (theta + 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut s, mut tx, mut ty) = (0.0, 0.0, 0.0);
        let n0 = (n * (n - 1) / 2) as f64;
        for i in 0..n {
            for j in i + 1..n {
                let dx = x[i] - x[j];
                let dy = y[i] - y[j];
                s += (dx.signum() * dy.signum()) * (dx != 0.0 && dy != 0.0) as i32 as f64;
                tx += (dx == 0.0) as i32 as f64;
                ty += (dy == 0.0) as i32 as f64;
            }
        }
        s / ((n0 - tx) * (n0 - ty)).sqrt()
    }

    #[test]
    fn theta_mapping() {
        assert_eq!(theta_from_tau(0.0).unwrap(), 0.0);
        assert!((theta_from_tau(0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!(theta_from_tau(1.0).is_err());
        assert!(theta_from_tau(-0.1).is_err());
        assert!((tau_from_theta(theta_from_tau(0.3).unwrap()) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn comonotone_and_antitone() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.37).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(kendall_tau(&x, &y).unwrap(), 1.0);
        let r: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(kendall_tau(&x, &r).unwrap(), -1.0);
        assert!(kendall_tau(&[1.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_quadratic_count(v in prop::collection::vec((0u8..6, 0u8..6), 2..40)) {
            let x: Vec<f64> = v.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
            let b = brute(&x, &y);
            match kendall_tau(&x, &y) {
                Ok(t) => prop_assert!((t - b).abs() < 1e-12, "{} vs {}", t, b),
                Err(_) => prop_assert!(b.is_nan()),
            }
        }
    }
}
