#!/usr/bin/env python3
"""Smoke test for the compiled jerkplan extension module.

Build it first with `cargo build -p jerkplan-python` (or --release);
the script stages the newest shared object under an importable name.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def stage_module(tmpdir):
    candidates = [
        ROOT / "target" / profile / "libjerkplan_python.so"
        for profile in ("release", "debug")
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("no libjerkplan_python.so found; run cargo build -p jerkplan-python")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    shutil.copy2(newest, Path(tmpdir) / "jerkplan.so")
    sys.path.insert(0, tmpdir)


def main():
    import jerkplan

    inst = jerkplan.gen_experiment1(seed=1, n=100)
    assert inst.n == 100
    assert inst.s_f == 60.0
    assert len(inst.u) == 100
    assert inst.u[0] == 0.0 and inst.u[-1] == 0.0
    assert inst.to_json() == jerkplan.Instance.from_json(inst.to_json()).to_json()

    result = jerkplan.solve(inst)
    assert result.reason == "kkt_certified", result.reason
    assert result.kkt_residual <= 1e-4
    assert abs(result.travel_time - 12.469984280) < 1e-6, result.travel_time
    assert len(result.profile) == 100
    assert math.isinf(result.objective_trail[0])
    assert all(
        math.sqrt(max(w, 0.0)) <= math.sqrt(u) + 1e-6
        for w, u in zip(result.profile, inst.u)
    )
    assert abs(jerkplan.eval_objective(result.profile, inst.h) - result.travel_time) < 1e-9

    feas = jerkplan.check_feasibility(result.profile, inst)
    assert feas.feasible, feas.worst()

    tampered = list(result.profile)
    peak = max(range(len(tampered)), key=tampered.__getitem__)
    tampered[peak] *= 1.5
    feas = jerkplan.check_feasibility(tampered, inst)
    assert not feas.feasible
    name, index, violation = feas.worst()
    assert violation > 0.0, (name, index, violation)

    alt = jerkplan.solve(inst, mode="eta", direction="lp")
    assert abs(alt.travel_time - result.travel_time) <= 0.01 * result.travel_time

    assert math.isinf(jerkplan.eval_objective([0.0, 0.0, 0.0], inst.h))
    try:
        jerkplan.Instance(60.0, [0.0, 1.0], 1.0, 1.0)
    except ValueError:
        pass
    else:
        sys.exit("Instance should reject grids below three points")

    custom = jerkplan.Instance(10.0, [0.0] + [25.0] * 19 + [0.0], 2.0, 1.0)
    report = jerkplan.solve(custom)
    assert jerkplan.check_feasibility(report.profile, custom).feasible

    print(f"ok: exp1 certified at {result.travel_time:.9f} s "
          f"(kkt {result.kkt_residual:.3e}), tampering detected at {name} row {index}, "
          f"custom instance solved in {report.iterations} iterations")


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmpdir:
        stage_module(tmpdir)
        main()
