"""Reference values for the general-family bound, its constants and the
step-size budget, evaluated with mpmath at 50 digits.

Prints one line per fixture quantity: `<fixture> <name> <value>`, where the
value is in scientific notation with 20 significant digits. The fixtures
below are copied verbatim into tests/golden.rs.
"""

from mpmath import mp, mpf, sqrt, exp, log, gamma, nstr

mp.dps = 50

FIXTURES = {
    "affine_d1": dict(m=1, T=1, eps=0, alpha=1, zeta="0.5", l_mo=1, k1=1, k2=1, k3=1, k4="1e-12",
                      k_total=3, eps_al="0.01", eps_sn="0.01", ts=0, ex0sq=1, e4=3, gamma="0.01"),
    "affine_d2": dict(m=2, T=2, eps="0.1", alpha=1, zeta="0.5", l_mo=1, k1=1, k2=1, k3=1, k4="1e-12",
                      k_total=3, eps_al="0.005", eps_sn="0.004", ts=2, ex0sq=4, e4=20, gamma="0.001"),
    "general_d8": dict(m=8, T=3, eps="0.01", alpha="0.75", zeta="0.3", l_mo="1.2", k1="0.5", k2=2, k3="0.25",
                       k4="0.001", k_total="3.5", eps_al="0.02", eps_sn="1e-6", ts=9, ex0sq=17, e4=400, gamma="1e-4"),
}


def norm_moment(m, p):
    return 2 ** (p / 2) * gamma((m + p) / 2) / gamma(mpf(m) / 2)


def theta_moment(f, p):
    return 2 * f["eps_al"] + 2 * f["ts"] if p == 2 else f["e4"]


def c_em(f, t, p):
    T, a, K, m = f["T"], f["alpha"], f["k_total"], f["m"]
    rate = 3 * (p - 1) + p * (m + p - 2) + 1 + 2 ** (2 * p - 1) * K ** p * (1 + T ** (a * p))
    return exp(t * rate) * (norm_moment(m, p) + 2 ** (3 * p - 2) * K ** p * t * (1 + theta_moment(f, p)) * (1 + T ** (a * p)))


def c_emose(f, p):
    T, a, K, m = f["T"], f["alpha"], f["k_total"], f["m"]
    cem = c_em(f, T, p)
    kp = K ** p * (1 + T ** (a * p))
    return 2 ** (p - 1) * (cem + kp * (2 ** (3 * p - 2) * cem + 2 ** (4 * p - 3) * (1 + theta_moment(f, p)))) + (m * p * (p - 1)) ** (mpf(p) / 2)


def big_and_rate(f):
    T, a, m, z = f["T"], f["alpha"], f["m"], f["zeta"]
    k1, k3, k4, K = f["k1"], f["k3"], f["k4"], f["k_total"]
    ea, ts = f["eps_al"], f["ts"]
    t2a = T ** (2 * a)
    rate = 1 + z + k3 * (1 + 2 * T ** a + 4 * k3 * (1 + 4 * t2a))
    big = (k4 ** 2 / z * (1 + 4 * t2a) * c_emose(f, 4)
           + 2 * (m + 2 * k3 ** 2 * (1 + 4 * t2a) * m)
           + 2 / z * k1 ** 2 * (1 + 8 * (ea + ts))
           + 2 * m / z * (m + 4 * k3 ** 2 * (1 + 4 * t2a))
           * ((1 + 16 * K ** 2 * (1 + t2a)) * c_em(f, T, 2) + 32 * K ** 2 * (1 + t2a) * (1 + 2 * ea + 2 * ts))
           + 2 * (sqrt(1 + 8 * k3 ** 2 * (1 + 4 * t2a)) * sqrt(c_emose(f, 2)) + 2 * k1 * sqrt(1 + 8 * ea + 8 * ts))
           * (m * sqrt(2) * sqrt(m + 8 * k3 ** 2 * (1 + 4 * t2a) * m)))
    return big, rate


def evaluate(f):
    span = f["T"] - f["eps"]
    m, a = f["m"], f["alpha"]
    c1 = 2 * (sqrt(f["ex0sq"]) + sqrt(m))
    c2 = 2 * (sqrt(f["ex0sq"]) + sqrt(mpf(3) * m / 2))
    c3 = sqrt(2 / f["zeta"]) * exp((1 + f["zeta"] - 2 * f["l_mo"]) * span)
    big, rate = big_and_rate(f)
    c4 = sqrt(2) * exp(2 * rate * span) * sqrt(span) * sqrt(big)
    terms = {
        "early_stop": c1 * sqrt(f["eps"]),
        "init": c2 * exp(-(2 * f["l_mo"] - 1) * span),
        "score": c3 * sqrt(f["eps_sn"]),
        "disc": c4 * f["gamma"] ** a,
    }
    out = dict(terms)
    out["total"] = sum(terms.values())
    out.update(C1=c1, C2=c2, C3=c3, C4=c4)
    out["C_EM_2_T"] = c_em(f, f["T"], 2)
    out["C_EMose_2"] = c_emose(f, 2)
    out["C_EMose_4"] = c_emose(f, 4)
    delta = mpf("0.5")
    g = (delta / (4 * sqrt(2))) ** (1 / a) * span ** (-1 / (2 * a)) * exp(-(2 / a) * rate * span) * big ** (-1 / (2 * a))
    out["gamma_delta_0.5"] = min(g, mpf(1))
    out["epsilon_delta_0.5"] = delta ** 2 / (64 * (sqrt(f["ex0sq"]) + sqrt(m)) ** 2)
    out["T_delta_0.5"] = log(8 * (sqrt(f["ex0sq"]) + sqrt(mpf(3) * m / 2)) / delta) / (2 * f["l_mo"] - 1) + f["eps"]
    out["eps_sn_delta_0.5"] = f["zeta"] * delta ** 2 / 32 * exp(-2 * (1 + f["zeta"] - 2 * f["l_mo"]) * span)
    return out


def main():
    for name, raw in FIXTURES.items():
        f = {k: (v if k == "m" else mpf(v)) for k, v in raw.items()}
        for key, v in evaluate(f).items():
            print(name, key, nstr(v, 20, min_fixed=1, max_fixed=0))


if __name__ == "__main__":
    main()
