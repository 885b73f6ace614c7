"""Smoke test for the pyhcrep extension module.

Build first, e.g. `maturin develop -m crates/py/Cargo.toml --release`.
"""

import json
import math

import pyhcrep


def main():
    toy = pyhcrep.RatingMatrix.from_dense([[1, 1, 2], [1, 2, 2], [3, 2, 2]])
    assert (toy.n_users, toy.n_items, len(toy)) == (3, 3, 9)
    assert toy.get(2, 0) == 3.0

    assert math.isclose(pyhcrep.cross_entropy([4], [1, 3], 4), 1.0)
    assert math.isclose(pyhcrep.kl_divergence([4], [1, 3], 4), 1.0)
    assert math.isclose(pyhcrep.kl_divergence([1, 3], [4], 4), 0.375)
    assert pyhcrep.js_divergence([2, 2], [2, 2], 4) == 0.0

    assert pyhcrep.cover_of_feature(toy, 0) == [[0, 1], [2]]

    hc = pyhcrep.build_hyperclass(toy, "ce")
    assert hc.decision_feature in range(3)
    assert sorted(u for block in hc.blocks for u in block) == [0, 1, 2]
    json.loads(hc.to_json())

    cf = pyhcrep.RatingMatrix.from_dense(
        [[4, 2, None, None], [5, 1, 5, 2], [1, 4, 1, 5]]
    )
    p = pyhcrep.predict(cf, 0, 2, "usercf", k=2)
    assert 1.0 <= p <= 5.0
    q = pyhcrep.predict(cf, 0, 2, "hyperclass", k=2, hyperclass=pyhcrep.build_hyperclass(cf, "kl"))
    assert 1.0 <= q <= 5.0
    assert len(pyhcrep.top_n(cf, 0, 2)) == 2

    report = json.loads(pyhcrep.evaluate(cf, ["usercf", "cf_kl"], k=2, folds=3, seed=7))
    assert [a["algorithm"] for a in report["algorithms"]] == ["usercf", "cf_kl"]

    try:
        pyhcrep.build_hyperclass(toy, "bogus")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown measure accepted")

    print(f"pyhcrep smoke test passed (usercf {p:.4f}, cf_kl {q:.4f})")


if __name__ == "__main__":
    main()
