#!/usr/bin/env python3
"""Smoke test for the expval Python extension.

Builds the cdylib with cargo, stages it as an importable module in a
temporary directory, and exercises the main surface: operator algebra,
the constant-drive expansion, a JSON scenario end to end against the
propagator reference, word expansions, a self-check suite, and a full
experiment run. Exits nonzero on the first failure.
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[1]


def check(name, ok, detail=""):
    line = f"PASS {name}" if ok else f"FAIL {name}"
    if detail:
        line += f" — {detail}"
    print(line)
    if not ok:
        sys.exit(1)


def stage_module(tmpdir):
    subprocess.run(
        ["cargo", "build", "-p", "expval-py"],
        cwd=REPO_ROOT,
        check=True,
    )
    built = REPO_ROOT / "target" / "debug" / "libexpval_py.so"
    if not built.exists():
        print(f"FAIL build — {built} missing")
        sys.exit(1)
    shutil.copy2(built, Path(tmpdir) / "expval.so")
    sys.path.insert(0, tmpdir)


BEAM_SPLITTER = json.dumps(
    {
        "scenario": "mode_network",
        "mode_dims": [6, 6],
        "couplings": [
            {"modes": [0, 1], "envelope": {"kind": "constant", "amplitude": [0.3, 0.0]}}
        ],
        "initial_occupations": [1, 0],
        "observable": {"type": "mode_number", "mode": 1},
        "horizon": 1.0,
    }
)

EXPERIMENT = json.dumps(
    {
        "scenario": {
            "scenario": "stimulated_emission",
            "mode_dims": [8],
            "drives": [
                {"mode": 0, "envelope": {"kind": "constant", "amplitude": [0.0, -0.2]}}
            ],
            "horizon": 1.0,
        },
        "methods": ["nested", "dyson", "exact"],
        "max_order": 3,
        "slices": {"initial_slices": 64, "max_slices": 4096, "tolerance": 1e-7},
    }
)


def main():
    import expval

    check("import", hasattr(expval, "Scenario"), f"version {expval.__version__}")

    # Ladder algebra: [a, a'] is the identity away from the cutoff row,
    # where the truncated product dumps the compensating -(d-1).
    space = expval.Space([5])
    a = expval.Operator.lowering(space, 0)
    comm = expval.commutator(a, a.adjoint())
    m = comm.matrix()
    diag_ok = all(abs(m[i][i] - (1.0 if i < 4 else -4.0)) < 1e-12 for i in range(5))
    off_ok = all(
        abs(m[i][j]) < 1e-12 for i in range(5) for j in range(5) if i != j
    )
    check("ladder_commutator", diag_ok and off_ok, "[a, a'] = diag(1,1,1,1,-4)")

    # Two-level drive: <n>(t) = sin^2(t) for H = a + a', so the order-2
    # partial sum is exactly t^2 and the deep sum hits the closed form.
    two = expval.Space([2])
    h = expval.Operator.lowering(two, 0) + expval.Operator.raising(two, 0)
    n_op = expval.Operator.number(two, 0)
    ground = expval.State.fock(two, [0])
    series = expval.bch_series(h, n_op, ground, 0.5, 12)
    gold = math.sin(0.5) ** 2
    p2 = series.partial_sums[2].real
    check(
        "constant_drive_series",
        abs(p2 - 0.25) < 1e-12 and abs(series.total() - gold) < 1e-9,
        f"order-2 sum {p2:.12f}, total {series.total():.12f} vs sin^2(0.5) {gold:.12f}",
    )

    # Beam splitter scenario end to end: nested series, moment flow, and
    # the propagator reference all land on sin^2(eps*t).
    sc = expval.Scenario.from_json(BEAM_SPLITTER)
    gold = math.sin(0.3) ** 2
    value, err, _, stabilized = sc.exact()
    check(
        "exact_reference",
        stabilized and abs(value - gold) < 1e-8,
        f"exact {value:.12f} vs sin^2(0.3) {gold:.12f}, est err {err:.2e}",
    )
    nested = sc.nested(6, n_slices=4096)
    check(
        "nested_series",
        abs(nested.total() - value) < 1e-4,
        f"nested {nested.total():.8f} vs exact {value:.8f}",
    )
    closed, residual = sc.closure(depth=2)
    sub_value, imag_defect, _ = sc.subspace(n_steps=400)
    check(
        "moment_flow",
        closed and residual < 1e-9 and abs(sub_value - gold) < 1e-7 and imag_defect < 1e-10,
        f"closure residual {residual:.2e}, flow {sub_value:.12f}",
    )

    # Word expansion of [[O,A],B],C] with the frozen signed alphabet.
    words = expval.expand_words("left", "OABC")
    expected = [
        (-1, "AOBC"),
        (1, "BAOC"),
        (-1, "BOAC"),
        (1, "CAOB"),
        (-1, "CBAO"),
        (1, "CBOA"),
        (-1, "COAB"),
        (1, "OABC"),
    ]
    disjoint = {w for _, w in words}.isdisjoint(
        {w for _, w in expval.expand_words("right", "ABCO")}
    )
    check("word_expansion", words == expected and disjoint, "8 signed words, shapes disjoint")

    passed, rendered = expval.run_suite("linearity", seed=0)
    check("suite_linearity", passed, rendered.strip().splitlines()[-1])

    with tempfile.TemporaryDirectory() as outdir:
        report = json.loads(expval.run_experiment(EXPERIMENT, outdir))
        files_ok = (Path(outdir) / "report.json").exists() and (
            Path(outdir) / "orders.csv"
        ).exists()
        methods = {entry["method"] for entry in report["methods"]}
        header = (Path(outdir) / "orders.csv").read_text().splitlines()[0]
        check(
            "experiment_run",
            files_ok
            and methods == {"nested", "dyson", "exact"}
            and header
            == "method,order,term_real,term_imag,partial_sum,residual_vs_exact,n_slices",
            f"methods {sorted(methods)}",
        )

    print("smoke test passed")


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as staging:
        stage_module(staging)
        main()
