"""Reference values for the Gaussian-example budget rows, evaluated with
mpmath at 40 digits. The horizon is T_delta itself (zero margin) and tau is
uniform on [0, T_delta].

Schedule expectations are computed by adaptive quadrature; E|X0| for
X0 ~ N(mu, I_d) uses the noncentral chi mean sqrt(pi/2) L_{1/2}^{(d/2-1)}(-|mu|^2/2).
"""

from mpmath import mp, mpf, sqrt, exp, log, gamma, pi, laguerre, quad, nstr

mp.dps = 40

FIXTURES = {
    "d1": dict(mu=[0], e0=1, delta="0.1"),
    "d2": dict(mu=[1, 1], e0=2, delta="0.5"),
    "d8": dict(mu=["0.75"] * 8, e0=9, delta="0.3"),
}

C = sqrt(mpf(4) / 3) + 2 * sqrt(33)


def evaluate(fx):
    mu = [mpf(v) for v in fx["mu"]]
    d = len(mu)
    c2 = sum(v * v for v in mu)
    c = sqrt(c2)
    delta = mpf(fx["delta"])
    e0 = mpf(fx["e0"])
    ex0sq = c2 + d
    t_delta = log(8 * (sqrt(ex0sq) + sqrt(mpf(3) * d / 2)) / delta)
    T = t_delta

    def avg(f):
        return quad(f, [0, T / 4, T]) / T

    m = lambda t: exp(-t)
    s = lambda t: sqrt(1 - exp(-2 * t))
    e_s2m2 = avg(lambda t: s(t) ** 2 * m(t) ** 2)
    e_s4m4 = avg(lambda t: s(t) ** 4 * m(t) ** 4)
    ez = sqrt(2) * gamma(mpf(d + 1) / 2) / gamma(mpf(d) / 2)
    ex = sqrt(pi / 2) * laguerre(mpf(1) / 2, mpf(d) / 2 - 1, -c2 / 2)
    # E[sigma^4 m^2 (|Z| (1/sigma + sigma) + m (|X0| + |theta*|))^2]
    g = (d * avg(lambda t: s(t) ** 4 * m(t) ** 2 * (1 / s(t) + s(t)) ** 2)
         + 2 * ez * (ex + c) * avg(lambda t: s(t) ** 4 * m(t) ** 3 * (1 / s(t) + s(t)))
         + (ex0sq + 2 * c * ex + c2) * e_s4m4)
    beta = 144 * d * C ** 2 / (delta ** 2 * e_s2m2)
    lam = min(e_s2m2 / (4 * e_s4m4), 1 / (2 * e_s2m2), delta ** 2 * e_s2m2 / (576 * C ** 2 * g))
    n = max(log(12 * C * sqrt(e0) / delta) / (lam * e_s2m2), 0)
    gam = min(delta / (4 * sqrt(18 * d + 132 * c2)), mpf(1) / 2)
    return {
        "T_delta": t_delta,
        "beta_delta": beta,
        "lambda_delta": lam,
        "n_delta": n,
        "gamma_delta": gam,
        "E_sigma2_m2": e_s2m2,
        "E_sigma4_m4": e_s4m4,
        "C_SGLD_2": 4 * g / e_s2m2,
        "E_norm_X0": ex,
    }


def main():
    for name, fx in FIXTURES.items():
        for key, v in evaluate(fx).items():
            print(name, key, nstr(v, 20, min_fixed=1, max_fixed=0))


if __name__ == "__main__":
    main()
