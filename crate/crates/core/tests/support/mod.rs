//! Independent DC-OPF oracle: PTDF flows plus brute-force vertex enumeration over
//! generator outputs. Shares no code with the simplex solver.

#![allow(dead_code)]

use gridscreen::netcase::Network;

fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c && a[r][c] != 0.0 {
                let f = a[r][c];
                for j in 0..n {
                    a[r][j] -= f * a[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    inv
}

fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(r, &v)| r.iter().copied().chain([v]).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for j in c..=n {
                    m[r][j] -= f * m[c][j];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// `K x N` MW flow on branch `k` per MW injected at bus `n` and withdrawn at the slack.
pub fn ptdf(net: &Network) -> Vec<Vec<f64>> {
    let n = net.num_buses();
    let slack = net.slack();
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let mut b = vec![vec![0.0; n]; n];
    for (k, br) in net.branches().iter().enumerate() {
        let (f, t) = net.endpoints(k);
        let y = 1.0 / br.reactance_pu;
        b[f][f] += y;
        b[t][t] += y;
        b[f][t] -= y;
        b[t][f] -= y;
    }
    let reduced: Vec<Vec<f64>> = keep.iter().map(|&i| keep.iter().map(|&j| b[i][j]).collect()).collect();
    let inv = invert(reduced);
    let mut x = vec![vec![0.0; n]; n];
    for (a, &i) in keep.iter().enumerate() {
        for (c, &j) in keep.iter().enumerate() {
            x[i][j] = inv[a][c];
        }
    }
    net.branches()
        .iter()
        .enumerate()
        .map(|(k, br)| {
            let (f, t) = net.endpoints(k);
            (0..n).map(|bus| (x[f][bus] - x[t][bus]) / br.reactance_pu).collect()
        })
        .collect()
}

pub fn flows(net: &Network, ptdf: &[Vec<f64>], p_g: &[f64], load: &[f64]) -> Vec<f64> {
    let mut inj = load.iter().map(|d| -d).collect::<Vec<_>>();
    for (g, p) in p_g.iter().enumerate() {
        inj[net.generator_bus(g)] += p;
    }
    ptdf.iter()
        .map(|row| row.iter().zip(&inj).map(|(a, b)| a * b).sum())
        .collect()
}

pub struct OracleSolution {
    pub objective: f64,
    pub p_g: Vec<f64>,
    pub flows: Vec<f64>,
}

fn combinations(n: usize, r: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == r {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < r - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, r, cur, f);
            cur.pop();
        }
    }
    rec(0, n, r, &mut Vec::with_capacity(r), f);
}

/// Minimum-cost dispatch with limits on `monitored` branches, by enumerating every
/// vertex of the generator-output polytope. `None` when infeasible.
pub fn vertex_oracle(net: &Network, load: &[f64], monitored: &[usize]) -> Option<OracleSolution> {
    let g = net.num_generators();
    let h = ptdf(net);
    let total: f64 = load.iter().sum();
    // a . p <= b
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, gen) in net.generators().iter().enumerate() {
        let mut e = vec![0.0; g];
        e[i] = 1.0;
        rows.push((e.clone(), gen.p_max_mw));
        rows.push((e.iter().map(|v| -v).collect(), -gen.p_min_mw));
    }
    for &k in monitored {
        let coef: Vec<f64> = (0..g).map(|i| h[k][net.generator_bus(i)]).collect();
        let base: f64 = -h[k].iter().zip(load).map(|(a, d)| a * d).sum::<f64>();
        let rate = net.branches()[k].rate_a_mw;
        rows.push((coef.clone(), rate - base));
        rows.push((coef.iter().map(|v| -v).collect(), rate + base));
    }
    let cost: Vec<f64> = net.generators().iter().map(|x| x.cost_per_mwh).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(rows.len(), g - 1, &mut |active| {
        let mut a = vec![vec![1.0; g]];
        let mut b = vec![total];
        for &r in active {
            a.push(rows[r].0.clone());
            b.push(rows[r].1);
        }
        let Some(p) = solve(&a, &b) else { return };
        let feasible = rows
            .iter()
            .all(|(c, rhs)| c.iter().zip(&p).map(|(x, y)| x * y).sum::<f64>() <= rhs + 1e-7);
        if !feasible {
            return;
        }
        let obj: f64 = cost.iter().zip(&p).map(|(c, x)| c * x).sum();
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, p));
        }
    });
    best.map(|(objective, p_g)| OracleSolution {
        flows: flows(net, &h, &p_g, load),
        objective,
        p_g,
    })
}
