"""Smoke test for the agop_py extension. Run with pytest or as a script."""

import math

import agop_py as ap


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def test_hermite_and_links():
    assert close(ap.hermite_eval(3, 2.0), 2.0)
    assert close(ap.latent_sigma("L1", 4)[0][0], 5.0)
    sigma = ap.latent_sigma("L2", 4)
    assert all(close(sigma[i][j], 3.0 if i == j else 0.0) for i in range(2) for j in range(2))
    assert close(ap.gaussian_norm_sq("L1"), 2.0)


def test_walsh_axis_target():
    u = ap.make_subspace(6, 1, "axis")
    terms = dict((tuple(s), c) for s, c in ap.walsh_coefficients("L1", u))
    assert close(terms[(0,)], 1.0)
    assert close(terms[()], -2.0 / math.sqrt(24.0))
    assert all(abs(c) < 1e-12 for s, c in terms.items() if s not in ((0,), ()))


def test_kernel_krr_agop_pipeline():
    d, n = 8, 60
    u = ap.make_subspace(d, 1, "haar", seed=3)
    x = [[1.0 if (i * 7 + j * 3 + i * j) % 5 < 2 else -1.0 for j in range(d)] for i in range(n)]
    y = [sum(a * b for a, b in zip(u[0], row)) for row in x]
    k = ap.kernel_matrix(x[:3], x[:3])
    assert close(k[0][0], 1.0) and close(k[0][1], k[1][0])
    model = ap.Krr.fit(x, y, ridge=1e-8)
    assert len(model.alpha) == n
    pred = model.predict(x)
    assert max(abs(p - t) for p, t in zip(pred, y)) < 1e-4
    grads = model.gradients(x[:5])
    assert len(grads) == 5 and len(grads[0]) == d
    matrix, eig = ap.empirical_agop(model.gradients(x))
    assert eig[0] >= eig[-1] >= -1e-12
    metric = ap.metric_update(matrix, 0.01 * d)
    assert close(sum(metric[i][i] for i in range(d)), d, 1e-9)


def test_sin_theta_and_rfm():
    a = ap.make_subspace(5, 1, "axis")
    assert ap.sin_theta(a, a) < 1e-12
    b = [[0.0, 1.0, 0.0, 0.0, 0.0]]
    assert close(ap.sin_theta(a, b), 1.0)
    d = 6
    u = ap.make_subspace(d, 1, "haar", seed=1)
    x = [[(-1.0) ** ((i >> j) & 1) for j in range(d)] for i in range(64)]
    y = [sum(a * b for a, b in zip(u[0], row)) for row in x]
    hist = ap.run_rfm(x, y, x, y, u, iterations=2)
    assert [h["iteration"] for h in hist] == [0, 1, 2]
    assert all(math.isfinite(h["test_mse"]) for h in hist)


def test_experiment_and_checks():
    rows = ap.run_experiment("d = 8\nalphas = [1.0]\ntrials = 1\niterations = 1\nn_test = 50\nrecord_runtime = false\n")
    assert [r["iteration"] for r in rows] == [0, 1]
    assert all(r["status"] == "ok" and r["n"] == 8 for r in rows)
    checks = {c["name"]: c for c in ap.run_checks(fast=True)}
    assert checks["gaussian_norms"]["passed"]
    assert checks["walsh_agop_oracle"]["passed"]


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok  {name}")
