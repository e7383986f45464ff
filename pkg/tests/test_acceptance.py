"""Acceptance criteria, one test each, at the stated tolerances and time budgets.

Each test prints a single ``PASS``/``FAIL`` line.  Run with ``pytest -s
tests/test_acceptance.py`` to see them, or ``python tests/test_acceptance.py``.
"""
import filecmp
import itertools
import json
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (  # noqa: E402
    classical_erm,
    classical_risk,
    pauli_projective,
    product_operator_distribution,
    random_density_matrix,
    random_povm_elements,
)
from qpac.cli import main as cli_main  # noqa: E402
from qpac.concept_class import (  # noqa: E402
    ConceptClass,
    LossFunction,
    objective_of_partition,
    observable_risk,
    partition_compatible,
    singleton_partition,
    true_risk,
)
from qpac.experiments import ExperimentConfig, demand_comparison, run_qerm_sweep  # noqa: E402
from qpac.presets import load_preset  # noqa: E402
from qpac.qerm_engine import check_concentration, joint_loss_distribution, run_qerm  # noqa: E402
from qpac.quantum_core import (  # noqa: E402
    DensityOperator,
    ProjectivePovm,
    basis_measurement,
    operator_checks,
    povm_checks,
    projector,
)
from qpac.synthetic_env import Environment, block_groups, classical_embed, random_class, random_density  # noqa: E402


@contextmanager
def criterion(number, title, budget_s):
    start = time.perf_counter()
    ok = False
    detail = ""
    try:
        yield lambda text: globals().__setitem__("_detail", text)
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        detail = globals().pop("_detail", "")
        in_time = elapsed < budget_s
        status = "PASS" if ok and in_time else "FAIL"
        print(f"\n[{status}] criterion {number}: {title} ({elapsed:.2f}s / {budget_s}s) {detail}")
    assert in_time, f"criterion {number} took {elapsed:.1f}s, budget {budget_s}s"


def test_1_validation_suite():
    rng = np.random.default_rng(101)
    with criterion(1, "operator invariants on random instances", 10) as note:
        worst = 0.0
        for d in (2, 4, 8, 16):
            for _ in range(100):
                checks = operator_checks(random_density(d, rng, rank=int(rng.integers(1, d + 1))).matrix,
                                         density=True)
                checks += povm_checks(random_povm_elements(d, 3, rng))
                cls = random_class(d, 3, 1, "haar_random", rng)
                checks += povm_checks(list(cls.predictors[0].elements), projective=True)
                for c in checks:
                    assert c.passed, (d, c)
                    worst = max(worst, c.residual)
        assert worst <= 1e-9
        # negative controls: a 1e-6 defect is caught by each check family
        p = projector(np.array([1.0, 1.0]) / math.sqrt(2))
        bad = p + 1e-6 * np.diag([1.0, 0.0])
        assert not all(c.passed for c in povm_checks([bad, np.eye(2) - bad], projective=True))
        assert not all(c.passed for c in povm_checks([p, np.eye(2) - p + 1e-6 * np.eye(2)]))
        assert not all(c.passed for c in operator_checks(np.diag([0.5 + 1e-6, 0.5]), density=True))
        note(f"max residual {worst:.2e}")


def test_2_risk_path_equivalence():
    rng = np.random.default_rng(202)
    with criterion(2, "direct risk equals loss-observable expectation", 10) as note:
        worst = 0.0
        for _ in range(100):
            d, ny = int(rng.choice([2, 3, 4, 8])), int(rng.integers(2, 5))
            nx = int(rng.integers(1, 5))
            states = tuple(random_density_matrix(d, rng) for _ in range(nx))
            env = Environment(tuple(range(nx)), tuple(range(ny)), states,
                              rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny))
            p = random_class(d, ny, 1, "haar_random", rng).predictors[0]
            loss = LossFunction(tuple(range(ny)), rng.random((ny, ny)))
            worst = max(worst, abs(true_risk(p, env, loss) - observable_risk(p, env, loss)))
        assert worst <= 1e-10
        note(f"max gap {worst:.2e}")


def test_3_classical_subsumption():
    rng = np.random.default_rng(303)
    with criterion(3, "embedded classical problems", 30) as note:
        worst, matches = 0.0, 0
        for _ in range(50):
            nx, ny, k = int(rng.integers(2, 9)), int(rng.integers(2, 4)), int(rng.integers(2, 7))
            dist = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
            funcs = [rng.integers(0, ny, nx).tolist() for _ in range(k)]
            env, cls = classical_embed(range(nx), range(ny), dist, funcs)
            loss = LossFunction(tuple(range(ny)), rng.choice([0.0, 0.25, 0.5, 1.0], size=(ny, ny)))
            for p, f in zip(cls, funcs):
                worst = max(worst, abs(true_risk(p, env, loss) - classical_risk(dist, loss.table, f)))
            samples = env.draw_samples(int(rng.integers(5, 60)), rng)
            pairs = [(s.x, s.y) for s in samples]
            part = partition_compatible(cls, "greedy")
            assert part.m == 1
            # budget mode with total_n = len(samples) feeds every sample to the single batch
            rep = run_qerm(cls, loss, epsilon=0.2, delta=0.1, samples=samples, rng=rng,
                           partition=part, mode="budget", total_n=len(samples))
            assert rep.selected_id == classical_erm(pairs, funcs, loss.table)
            matches += 1
        assert worst <= 1e-12
        note(f"max risk gap {worst:.1e}, ERM index matched {matches}/50")


def test_4_joint_measurement_oracle():
    rng = np.random.default_rng(404)
    shapes = [(2, 2), (2, 3), (2, 4), (4, 2), (3, 2), (8, 1)]
    with criterion(4, "shared-basis joint distribution vs operator products", 60) as note:
        worst = 0.0
        for i in range(50):
            d, ny = shapes[i % len(shapes)]
            k = int(rng.integers(1, 4))
            cls = random_class(d, ny, k, "shared_basis", rng)
            part = partition_compatible(cls, "greedy")
            table = rng.choice([0.0, 0.5, 1.0], size=(ny, ny))
            loss = LossFunction(tuple(range(ny)), table)
            rho = DensityOperator(random_density_matrix(d * ny, rng))
            got = joint_loss_distribution(part.members(0), part.bases[0], rho, loss)
            ref = product_operator_distribution([list(p.elements) for p in part.members(0)], table, rho.matrix)
            assert set(got) <= set(ref)
            worst = max(worst, max(abs(got.get(z, 0.0) - pz) for z, pz in ref.items()))
        assert worst <= 1e-9
        note(f"max per-outcome gap {worst:.2e}")


def test_5_concentration():
    from qpac.qerm_engine import deviation_bound
    povm = basis_measurement(2, outcomes=(0.0, 1.0))
    plus = DensityOperator(projector(np.array([1.0, 1.0]) / math.sqrt(2)))
    trials = 10_000
    with criterion(5, "tail bound on a qubit observable", 120) as note:
        rates = []
        for n in (100, 500, 2000):
            for delta in (0.05, 0.1):
                t = math.sqrt(2.0 / n * math.log(2.0 / delta))
                assert t == pytest.approx(deviation_bound(n, 1.0, delta), rel=1e-15)
                rate = check_concentration(povm, plus, n, trials, np.random.default_rng([n, int(delta * 100)]), t)
                rates.append(f"n={n},d={delta}:{rate:.4f}")
                assert rate <= delta + 3 * math.sqrt(delta * (1 - delta) / trials), (n, delta, rate)
        note(" ".join(rates))


def test_6_qpac_guarantee():
    cfg = ExperimentConfig(preset="shared-realizable", epsilons=[0.2], deltas=[0.1], trials=200, seed=6)
    with criterion(6, "failure rate on the realizable shared-basis preset", 300) as note:
        _, cls, _ = load_preset("shared-realizable")
        assert len(cls) == 8 and cls.dim == 4
        rows, summary = run_qerm_sweep(cfg)
        assert {r["n_total"] for r in rows} == {math.ceil(8 / 0.2**2 * math.log(2 * 1 * 8 / 0.1))} == {1016}
        rate = sum(r["failed"] for r in rows) / len(rows)
        limit = 0.1 + 3 * math.sqrt(0.1 * 0.9 / 200)
        assert rate <= limit
        note(f"failure rate {rate:.3f} <= {limit:.3f}")


def _pauli_class(rng, k):
    labels = ["".join(p) for p in itertools.product("IXYZ", repeat=2)][1:]
    chosen = rng.choice(labels, size=k, replace=False)
    return ConceptClass.from_povms([ProjectivePovm((0, 1), tuple(pauli_projective(lab))) for lab in chosen])


def test_7_partitioning():
    rng = np.random.default_rng(707)
    with criterion(7, "partition recovery and objective ordering", 60) as note:
        for m in (1, 2, 3):
            for k in range(m, 13):
                cls = random_class(int(rng.choice([2, 3, 4])), 2, k, "blocks", rng, m=m)
                exact = partition_compatible(cls, "exact")
                assert exact.m == m
                assert sorted(map(sorted, exact.subclasses)) == block_groups(k, m)
                assert partition_compatible(cls, "greedy").m >= exact.m
        strict = 0
        for i in range(50):
            kind = i % 4
            k = int(rng.integers(2, 13))
            if kind == 0:
                cls = _pauli_class(rng, min(k, 12))
            elif kind == 1:
                cls = random_class(2, 2, k, "blocks", rng, m=int(rng.integers(1, min(k, 4) + 1)))
            elif kind == 2:
                cls = random_class(2, 2, min(k, 8), "haar_random", rng)
            else:
                cls = random_class(4, 3, k, "shared_basis", rng)
            greedy, exact = partition_compatible(cls, "greedy"), partition_compatible(cls, "exact")
            assert greedy.m >= exact.m
            o_e, o_g = objective_of_partition(exact, 0.2, 0.1), objective_of_partition(greedy, 0.2, 0.1)
            o_s = objective_of_partition(singleton_partition(cls), 0.2, 0.1)
            assert o_e <= o_g <= o_s
            strict += o_e < o_g
        note(f"exact strictly better than greedy on {strict}/50")


def test_8_demand_ratio():
    with criterion(8, "naive vs QERM sample demand, |C|=16 shared basis", 5) as note:
        _, cls, _ = load_preset("shared16")
        assert len(cls) == 16
        row = demand_comparison(cls, 0.2, 0.1)
        # independent evaluation: one subclass of 16 vs sixteen singletons
        qerm = math.ceil(8 / 0.2**2 * math.log(2 * 1 * 16 / 0.1))
        naive = 16 * math.ceil(8 / 0.2**2 * math.log(2 * 16 * 1 / 0.1))
        assert (row["qerm_demand"], row["naive_demand"]) == (qerm, naive) == (1154, 18464)
        assert row["ratio"] == naive / qerm >= 10
        note(f"qerm={qerm} naive={naive} ratio={row['ratio']:.2f}")


def test_9_reproducibility(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "blocks2", "trials": 100, "seed": 42,
                               "epsilons": [0.2, 0.3], "deltas": [0.1]}))
    outs = [tmp_path / f"run{i}.csv" for i in range(3)]
    with criterion(9, "byte-identical CSV across runs", 60) as note:
        for i, out in enumerate(outs):
            extra = ["--workers", "2"] if i == 2 else []
            code = cli_main(["qerm", "--config", str(cfg), "--out", str(out),
                             "--summary", str(tmp_path / f"s{i}.json"), *extra])
            assert code == 0
        assert filecmp.cmp(outs[0], outs[1], shallow=False)
        assert filecmp.cmp(outs[0], outs[2], shallow=False)
        note(f"{len(outs[0].read_bytes())} bytes, identical with 1 and 2 workers")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-s", "-q"]))
