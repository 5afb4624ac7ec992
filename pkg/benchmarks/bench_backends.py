"""Throughput of the pure-Python and compiled simulators on the same fuzz programs.

    python3 benchmarks/bench_backends.py [--insns N] [--seeds 0 1 2] [--lockstep]
"""
import argparse
import importlib
import time

from rvsoc import backend, fuzz


def measure(mod, image, insns, lockstep):
    m = mod.Machine(mod.Config(lockstep=lockstep))
    m.load_image(image)
    t0 = time.perf_counter()
    m.run(insns)
    dt = time.perf_counter() - t0
    return m.state.retired / dt, m.stats().render()


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--insns", type=int, default=50_000)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--lockstep", action="store_true")
    args = p.parse_args(argv)

    mods = {"python": importlib.import_module("rvsoc.harness")}
    if backend._fresh():
        mods["cython"] = importlib.import_module("rvsoc._fast.harness")
    else:
        print("compiled backend missing or stale; run `pip install -e . --no-build-isolation`")

    rates = {name: [] for name in mods}
    for seed in args.seeds:
        image = fuzz.generate(seed).image
        stats = {}
        for name, mod in mods.items():
            rate, stats[name] = measure(mod, image, args.insns, args.lockstep)
            rates[name].append(rate)
            print(f"seed {seed:3d}  {name:6s}  {rate:10,.0f} instr/s")
        if len(stats) == 2:
            assert stats["python"] == stats["cython"], "backends disagree"
    mean = {n: sum(r) / len(r) for n, r in rates.items()}
    for n, r in mean.items():
        print(f"mean   {n:6s}  {r:10,.0f} instr/s")
    if len(mean) == 2:
        print(f"speedup {mean['cython'] / mean['python']:.2f}x")


if __name__ == "__main__":
    main()
