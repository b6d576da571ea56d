"""Compare the compiled and pure-Python kernel backends.

Times constraint assembly (with and without second derivatives), the Euler
rotation partials, and a full rollout plus sensitivity pass on bundled
scenarios.  Both backends run in one process by swapping the functions that
:mod:`ccma.kernels` exports, and their outputs are cross-checked first.

    python3 benchmarks/bench_kernels.py [--repeat N] [--scenario fig1b]
"""

import argparse
import contextlib
import timeit

import numpy as np

from ccma import _pykernels, kernels
from ccma.scenario import load_scenario_file, resolve_scenario
from ccma.sensitivity import trajectory_sensitivities

try:
    from ccma import _ckernels
except ImportError:
    _ckernels = None


@contextlib.contextmanager
def backend(module):
    saved = kernels.assemble, kernels.rotation_partials
    kernels.assemble, kernels.rotation_partials = module.assemble, module.rotation_partials
    try:
        yield
    finally:
        kernels.assemble, kernels.rotation_partials = saved


def workload(name, seed=0):
    sc = load_scenario_file(resolve_scenario(name))
    rng = np.random.default_rng(seed)
    u = 0.05 * rng.standard_normal(sc.control_shape)
    system = sc.system()
    traj = sc.simulate(u)
    st, m = traj.states[-1], traj.ms[-1]
    return sc, system, u, st, m


def cross_check(system, st, m):
    a = system.assemble(st, m, second=True)
    with backend(_pykernels):
        b = system.assemble(st, m, second=True)
    worst = 0.0
    for name in ("residual", "jac_state", "jac_m", "jac_dp", "hess_state", "hess_state_m", "hess_state_dp"):
        x, y = getattr(a, name, None), getattr(b, name, None)
        if x is None or y is None:
            continue
        worst = max(worst, float(np.abs(np.asarray(x) - np.asarray(y)).max(initial=0.0)))
    return worst


def bench(label, fn, repeat, number):
    best = min(timeit.repeat(fn, repeat=repeat, number=number)) / number
    return label, best


def run(name, repeat):
    sc, system, u, st, m = workload(name)
    cases = [
        ("assemble (first order)", lambda: system.assemble(st, m), 200),
        ("assemble (with Hessians)", lambda: system.assemble(st, m, second=True), 200),
        ("rotation_partials", lambda: kernels.rotation_partials(0.3, -0.2, 0.1), 2000),
        ("rollout + sensitivities", lambda: trajectory_sensitivities(sc.simulate(u)), 3),
    ]
    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.insert(0, ("cython", _ckernels))
    results = {}
    for bname, module in backends:
        with backend(module):
            for label, fn, number in cases:
                results[(bname, label)] = bench(label, fn, repeat, number)[1]
    print(f"scenario {name}: {sc.topology.n_b} bodies, {len(sc.topology.joints)} joints, "
          f"n_t {sc.n_t}")
    if _ckernels is not None:
        print(f"  max |cython - python| over assembly outputs: {cross_check(system, st, m):.2e}")
    print(f"  {'kernel':28s} {'cython':>12s} {'python':>12s} {'speedup':>8s}")
    for label, _, _ in cases:
        py = results[("python", label)]
        cy = results.get(("cython", label))
        if cy is None:
            print(f"  {label:28s} {'n/a':>12s} {py * 1e3:10.3f}ms")
        else:
            print(f"  {label:28s} {cy * 1e3:10.3f}ms {py * 1e3:10.3f}ms {py / cy:7.1f}x")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scenario", action="append", help="bundled scenario name (repeatable)")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; timing the Python backend only")
    for name in args.scenario or ["fig2a", "fig1b"]:
        run(name, args.repeat)


if __name__ == "__main__":
    main()
