#![allow(dead_code)]

use std::collections::BTreeMap;

use sgmcert::bounds::Theorem2Params;
use sgmcert::ExtFloat;

/// Frozen output of `oracles/theorem2.py`.
pub const THEOREM2_GOLDEN: &str = include_str!("../oracles/theorem2.txt");

/// The parameter sets of `oracles/theorem2.py`, in the same order.
pub fn theorem2_fixtures() -> Vec<(&'static str, Theorem2Params)> {
    let affine = Theorem2Params {
        m: 1,
        horizon: 1.0,
        epsilon: 0.0,
        alpha: 1.0,
        zeta: 0.5,
        nu: 0.5,
        l_mo: 1.0,
        k1: 1.0,
        k2: 1.0,
        k3: 1.0,
        k4: 1e-12,
        k_total: 3.0,
        eps_al: 0.01,
        eps_sn: 0.01,
        theta_star_norm_sq: 0.0,
        ex0sq: 1.0,
        e_theta4: 3.0,
        gamma: 0.01,
    };
    vec![
        ("affine_d1", affine.clone()),
        (
            "affine_d2",
            Theorem2Params {
                m: 2,
                horizon: 2.0,
                epsilon: 0.1,
                eps_al: 0.005,
                eps_sn: 0.004,
                theta_star_norm_sq: 2.0,
                ex0sq: 4.0,
                e_theta4: 20.0,
                gamma: 0.001,
                ..affine.clone()
            },
        ),
        (
            "general_d8",
            Theorem2Params {
                m: 8,
                horizon: 3.0,
                epsilon: 0.01,
                alpha: 0.75,
                zeta: 0.3,
                nu: 0.5,
                l_mo: 1.2,
                k1: 0.5,
                k2: 2.0,
                k3: 0.25,
                k4: 0.001,
                k_total: 3.5,
                eps_al: 0.02,
                eps_sn: 1e-6,
                theta_star_norm_sq: 9.0,
                ex0sq: 17.0,
                e_theta4: 400.0,
                gamma: 1e-4,
            },
        ),
    ]
}

/// `fixture -> quantity -> value`.
pub fn theorem2_golden() -> BTreeMap<String, BTreeMap<String, ExtFloat>> {
    let mut out: BTreeMap<String, BTreeMap<String, ExtFloat>> = BTreeMap::new();
    for line in THEOREM2_GOLDEN.lines().filter(|l| !l.trim().is_empty()) {
        let mut it = line.split_whitespace();
        let (f, q, v) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        out.entry(f.into()).or_default().insert(q.into(), v.parse().unwrap());
    }
    out
}

/// Worst relative error of the library against the frozen values, with the
/// name of the offending quantity.
pub fn theorem2_golden_error() -> (f64, String) {
    use sgmcert::bounds::{table2_budget, theorem2_bound};
    let golden = theorem2_golden();
    let mut worst = (0.0, String::new());
    for (name, p) in theorem2_fixtures() {
        let want = &golden[name];
        let r = theorem2_bound(&p).unwrap();
        let mut got: Vec<(String, ExtFloat)> = r.terms().iter().map(|(k, v)| (k.to_string(), *v)).collect();
        got.extend(r.constants().iter().map(|(k, v)| (k.to_string(), *v)));
        got.push(("total".into(), r.total()));
        let b = table2_budget(0.5, &p).unwrap();
        got.push(("gamma_delta_0.5".into(), b.gamma_delta));
        got.push(("epsilon_delta_0.5".into(), b.epsilon_delta.into()));
        got.push(("T_delta_0.5".into(), b.t_delta.into()));
        got.push(("eps_sn_delta_0.5".into(), b.eps_sn_delta));
        for (k, v) in got {
            let Some(w) = want.get(&k) else { continue };
            let e = v.rel_diff(*w);
            if !(e <= worst.0) {
                worst = (e, format!("{name}/{k}"));
            }
        }
    }
    worst
}

/// Frozen output of `oracles/table1.py`.
pub const TABLE1_GOLDEN: &str = include_str!("../oracles/table1.txt");

/// `(name, mu, e0, delta)` for the fixtures of `oracles/table1.py`.
pub fn table1_fixtures() -> Vec<(&'static str, Vec<f64>, f64, f64)> {
    vec![
        ("d1", vec![0.0], 1.0, 0.1),
        ("d2", vec![1.0, 1.0], 2.0, 0.5),
        ("d8", vec![0.75; 8], 9.0, 0.3),
    ]
}

/// Worst relative error of the Table-1 rows and their schedule expectations.
pub fn table1_golden_error() -> (f64, String) {
    use sgmcert::bounds::{table1_budget, Theorem1Params};
    let mut want: BTreeMap<(String, String), f64> = BTreeMap::new();
    for line in TABLE1_GOLDEN.lines().filter(|l| !l.trim().is_empty()) {
        let v: Vec<&str> = line.split_whitespace().collect();
        want.insert((v[0].into(), v[1].into()), v[2].parse().unwrap());
    }
    let mut worst = (0.0, String::new());
    for (name, mu, e0, delta) in table1_fixtures() {
        let problem = sgmcert::GaussianProblem::new(mu).unwrap();
        let b = table1_budget(delta, &problem, e0, 0.0).unwrap();
        let p = Theorem1Params::for_problem(&problem, b.horizon, b.beta_delta, b.lambda_delta, 1, b.gamma_delta, e0).unwrap();
        let got = [
            ("T_delta", b.t_delta),
            ("beta_delta", b.beta_delta),
            ("lambda_delta", b.lambda_delta),
            ("n_delta", b.n_delta),
            ("gamma_delta", b.gamma_delta),
            ("E_sigma2_m2", p.e_s2m2),
            ("E_sigma4_m4", p.e_s4m4),
            ("C_SGLD_2", p.c_sgld2),
            ("E_norm_X0", problem.mean_norm_x0()),
        ];
        for (k, v) in got {
            let w = want[&(name.to_string(), k.to_string())];
            let e = (v - w).abs() / w.abs();
            if !(e <= worst.0) {
                worst = (e, format!("{name}/{k}"));
            }
        }
    }
    worst
}
