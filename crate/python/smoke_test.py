"""Smoke test for the ssa extension module.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke_test.py
"""

import math
import tempfile
from pathlib import Path

import ssa


def check_pca_and_alignment():
    x = [[float(i), 0.5 * i + (i % 3), float(i % 5)] for i in range(20)]
    basis = ssa.fit_pca(x, 2)
    c = basis.components
    for a in range(2):
        for b in range(2):
            dot = sum(c[r][a] * c[r][b] for r in range(3))
            assert abs(dot - (1.0 if a == b else 0.0)) < 1e-10
    m = ssa.solve_alignment(basis, basis)
    assert all(abs(m[i][j] - (i == j)) < 1e-10 for i in range(2) for j in range(2))

    shifted = [[v + 3.0 for v in row] for row in x]
    src, tgt = ssa.align_unsupervised(x, shifted, 2)
    assert max(abs(a - b) for r, s in zip(src, tgt) for a, b in zip(r, s)) < 1e-6


def check_semi_supervised():
    source = [[0.0, 0.0], [0.2, 0.1], [0.1, -0.1], [5.0, 5.0], [5.2, 4.9], [4.9, 5.1]]
    labels = ["a", "a", "a", "b", "b", "b"]
    target = [[5.0, 5.0], [5.1, 4.8], [4.8, 5.2], [0.0, 0.0], [0.1, 0.2], [-0.1, 0.1]]
    _, _, pseudo = ssa.align_semi_supervised(source, labels, target, {0: "a", 3: "b"}, 1)
    assert pseudo == ["a", "a", "a", "b", "b", "b"], pseudo


def check_protocol():
    corpus = ssa.Corpus.synth("class-swap", steps=2, per_class=60, features=4, separation=10.0, rng_seed=3)
    assert corpus.dim == 4 and corpus.steps == [0, 1] and len(corpus) == 240
    with tempfile.TemporaryDirectory() as tmp:
        d, m = Path(tmp, "data.csv"), Path(tmp, "manifest.toml")
        corpus.write(str(d), str(m))
        again = ssa.Corpus.read(str(d), str(m))
        assert again.digest() == corpus.digest()

    report = ssa.run_protocol(corpus, d=3, seeds_per_class=5, classifier="knn", modes=["semi", "unsup", "semi_unb"])
    header = report.accuracy_table().splitlines()[0]
    assert header == "test_step,all,same,prev,unsup,semi,unsup_unb,semi_unb,semi_unb_clst"
    semi, _ = report.cell(1, "semi")
    unsup, _ = report.cell(1, "unsup")
    assert semi >= 0.95 and unsup <= 0.2, (semi, unsup)
    assert report.cell(1, "semi") == report.cell(1, "semi_unb")
    assert report.cell(1, "all") is None

    f = ssa.metrics(["A", "B", "B", "B"], ["A", "A", "B", "B"])
    assert math.isclose(f["macro_f1"], 11 / 15, abs_tol=1e-12)

    try:
        ssa.fit_pca([[1.0, 2.0]], 1)
    except ssa.SsaError:
        pass
    else:
        raise AssertionError("fitting one row should fail")


if __name__ == "__main__":
    check_pca_and_alignment()
    check_semi_supervised()
    check_protocol()
    print("python smoke test: ok")
