//! Independent exact oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

/// `p(t)` for the forward equations `p' = p Q` of a finite chain, by RK4 on
/// a fine grid. `rates[i][j]` is the jump rate from state `i` to state `j`.
pub fn ctmc_distribution(rates: &[Vec<f64>], initial: &[f64], t: f64) -> Vec<f64> {
    let n = initial.len();
    let out_rate: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| rates[i][j]).sum())
        .collect();
    let deriv = |p: &[f64]| -> Vec<f64> {
        let mut dp = vec![0.0; n];
        for i in 0..n {
            if p[i] == 0.0 {
                continue;
            }
            dp[i] -= p[i] * out_rate[i];
            for j in 0..n {
                if j != i {
                    dp[j] += p[i] * rates[i][j];
                }
            }
        }
        dp
    };
    let steps = 20_000;
    let h = t / steps as f64;
    let mut p = initial.to_vec();
    let axpy = |p: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        p.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    for _ in 0..steps {
        let k1 = deriv(&p);
        let k2 = deriv(&axpy(&p, &k1, h / 2.0));
        let k3 = deriv(&axpy(&p, &k2, h / 2.0));
        let k4 = deriv(&axpy(&p, &k3, h));
        for i in 0..n {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    p
}

/// Contact process on sites `0..m` of a line with edges `i -> i+1` open
/// where `open[i]`; returns the generator as a dense rate matrix over the
/// `2^m` bit-set states (bit `i` = site `i` infected).
pub fn line_contact_rates(m: usize, open: &[bool], lambda: f64) -> Vec<Vec<f64>> {
    let size = 1 << m;
    let mut q = vec![vec![0.0; size]; size];
    for s in 0..size {
        for i in 0..m {
            if s & (1 << i) != 0 {
                q[s][s & !(1 << i)] += 1.0;
            } else if i > 0 && open[i - 1] && s & (1 << (i - 1)) != 0 {
                q[s][s | (1 << i)] += lambda;
            }
        }
    }
    q
}

/// `int_0^inf e^{-y} (1 - e^{-lambda y})^k dy` by composite Simpson on a
/// truncated range, independent of any closed form.
pub fn attempt_integral(lambda: f64, k: i32) -> f64 {
    let (upper, n) = (60.0, 600_000);
    let h = upper / n as f64;
    let f = |y: f64| (-y).exp() * (1.0 - (-lambda * y).exp()).powi(k);
    let mut s = f(0.0) + f(upper);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Exact `(E|M_n|, E|M_n|^2, P(|M_n| > 0))` for `d = 2` by enumerating every
/// joint outcome of the infection indicators of all tails that paths of
/// length `n` use. Per tail the two indicators have the law
/// `P(1,1) = p^2 I_2`, `P(1,0) = P(0,1) = p I_1 - p^2 I_2` (independent
/// edges, shared lifetime), and tails are independent.
pub fn exact_path_moments_d2(lambda: f64, p: f64, n: usize) -> (f64, f64, f64) {
    let one = p * attempt_integral(lambda, 1);
    let two = p * p * attempt_integral(lambda, 2);
    let law = [1.0 - 2.0 * one + two, one - two, one - two, two]; // bits (axis0, axis1)
    // Tails at levels 0..n-1: vertex (i, l - i).
    let tails: Vec<(i32, i32)> = (0..n as i32)
        .flat_map(|l| (0..=l).map(move |i| (i, l - i)))
        .collect();
    let index: HashMap<(i32, i32), usize> = tails.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let outcomes = 1usize << (2 * tails.len());
    let (mut m1, mut m2, mut pos) = (0.0, 0.0, 0.0);
    for code in 0..outcomes {
        let mut prob = 1.0;
        for k in 0..tails.len() {
            prob *= law[(code >> (2 * k)) & 3];
        }
        let infects = |v: (i32, i32), axis: usize| (code >> (2 * index[&v] + axis)) & 1 == 1;
        let mut count = 0u64;
        for path in 0..(1usize << n) {
            let mut v = (0, 0);
            let mut ok = true;
            for step in 0..n {
                let axis = (path >> step) & 1;
                if !infects(v, axis) {
                    ok = false;
                    break;
                }
                if axis == 0 { v.0 += 1 } else { v.1 += 1 }
            }
            count += ok as u64;
        }
        let c = count as f64;
        m1 += prob * c;
        m2 += prob * c * c;
        if count > 0 {
            pos += prob;
        }
    }
    (m1, m2, pos)
}

/// `P(theta = j)` for `j = 1..=max_j` by dynamic programming over the law of
/// the difference `S_j - S'_j` of two oriented walks, killed on return to 0.
pub fn first_meeting_law(d: usize, max_j: usize) -> Vec<f64> {
    let step = 1.0 / (d * d) as f64;
    let mut law = Vec::with_capacity(max_j);
    let mut mass: HashMap<Vec<i32>, f64> = HashMap::from([(vec![0; d], 1.0)]);
    for _ in 0..max_j {
        let mut next: HashMap<Vec<i32>, f64> = HashMap::new();
        for (v, pr) in &mass {
            for a in 0..d {
                for b in 0..d {
                    let mut w = v.clone();
                    w[a] += 1;
                    w[b] -= 1;
                    *next.entry(w).or_insert(0.0) += pr * step;
                }
            }
        }
        let zero = vec![0; d];
        law.push(next.remove(&zero).unwrap_or(0.0));
        mass = next;
    }
    law
}
