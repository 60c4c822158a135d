"""Smoke test for the `rss` extension module.

Build and install the module first, e.g.

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/rss-*.whl

then run `python python/smoke_test.py`.
"""

import math

import rss


def main():
    m = rss.SampleMatrix.from_rows([[0.6], [-0.4], [0.9]])
    r = m.search([0.5], 0.05, engine="exhaustive")
    assert r["found"] and r["subset"] == [1, 2], r
    r2 = m.search([0.5], 0.05, engine="meet_in_middle")
    assert all(r[k] == r2[k] for k in ("found", "subset", "achieved", "error")), r2
    assert r2["engine"] == "meet_in_middle"

    g = rss.sample_standard_normal(16, 2, seed=7)
    assert (g.n, g.d, g.seed) == (16, 2, 7)
    assert g.rows() == rss.sample_standard_normal(16, 2, seed=7).rows()
    s = g.search([0.2, -0.1], 0.3)
    assert s["error"] == max(abs(a - b) for a, b in zip(g.subset_sum(s["subset"]), [0.2, -0.1]))

    assert math.ceil(rss.required_n_single(1, 1 / 6, 0.5)) == 18585
    report = rss.bound_report(1, 729, 0.5, 1 / 6, log2_family_size=6.0)
    hi = report["entries"]["expectation_upper"]["value"]
    assert abs(hi - (6 - 0.5 * math.log2(2 * math.pi * 121))) < 1e-12

    fam = rss.build_family(200, 0.1, 10, seed=1)
    assert len(fam) == 10 and all(len(s) == 20 for s in fam)
    assert max(len(set(a) & set(b)) for i, a in enumerate(fam) for b in fam[i + 1:]) <= 4

    est = rss.estimate_single_subset_prob(1, 50, 0.2, [0.3], 20000, seed=3)
    assert est["verdict"] == "within", est

    claims = rss.check_claims(100, seed=1)
    assert len(claims) == 5 and all(c["violations"] == 0 for c in claims)

    cov = g.cover_grid(0.5, max_rows=12)
    assert cov["total_points"] == 4

    nne = rss.find_genotype(12, 1, 2, [0.1, -0.2, 0.3, 0.0], 0.2, seed=5)
    assert nne["max_entry_error"] == nne["search"]["error"]

    walk = rss.run_walk(1, 8, seed=2, targets=[[0.5]])
    assert [row["frontier_size"] for row in walk["rows"]][:2] == [1, 2]

    assert rss.derive_seed(1, 2) == rss.derive_seed(1, 2) != rss.derive_seed(1, 3)
    print("smoke test passed")


if __name__ == "__main__":
    main()
