"""Smoke test for the hpfed_py extension.

    pip install --no-build-isolation -e crates/python
    python crates/python/python/smoke.py
"""

import math

import hpfed_py as hp


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    reports = hp.generate(4, heterogeneity=0.0, seed=3)
    assert len(reports) == 4 and all(len(r) > 0 for r in reports)
    values, acc = reports[0][0]
    assert len(values) == 2 and 0.0 <= acc <= 1.0

    same = [[([0.1, 0.9], 0.5)], [([0.1, 0.9], 0.7)]]
    for s in ["mean", "median", "trimmed-mean", "top-mean", "top-median"]:
        assert close(hp.combine(s, same), [0.1, 0.9], 1e-15), s
    try:
        hp.combine("nope", same)
        raise SystemExit("unknown strategy accepted")
    except ValueError:
        pass

    ckks = hp.Ckks(seed=1)
    x = [0.5, -0.25, 0.125]
    y = [2.0, 4.0, -1.0]
    cx, cy = ckks.encrypt(x), ckks.encrypt(y)
    assert cx.level == ckks.max_level
    assert close(ckks.decrypt(ckks.add(cx, cy)), [a + b for a, b in zip(x, y)], 1e-5)
    prod = ckks.mul(cx, cy)
    assert prod.level == ckks.max_level - 1
    assert close(ckks.decrypt(prod), [a * b for a, b in zip(x, y)], 1e-4)

    out = hp.tune("pf-mean", reports, seed=5)
    assert out.mse <= 1e-3, out.mse
    assert out.bootstraps == 0
    assert out.rounds == ["upload", "result"], out.rounds
    assert not any(math.isnan(v) for v in out.global_hp)
    print("pf-mean", [round(v, 6) for v in out.global_hp], "mse", f"{out.mse:.2e}", "bytes", out.total_bytes)

    table = hp.bench(clients=2, reps=1)
    assert "Compare" in table
    print("ok")


if __name__ == "__main__":
    main()
