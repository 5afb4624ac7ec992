"""Command-line front end: ``rvsoc --ram image [options]``.

Console output is passed through to stdout as the guest writes it; traces,
stats and diagnostics go to files or stderr.  Exit status is the guest's
power-off code, 0 when the instruction limit is reached, 1 for bad inputs,
2 for a simulation fault and 3 for a lockstep divergence.
"""
import argparse
import sys

from .errors import CheckpointError, Divergence, ImageError, SimulationFault


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rvsoc", description="Cycle-level RV32IMAC SoC simulator.")
    p.add_argument("--ram", metavar="IMAGE", help="RAM image at 0x80000000: raw binary, ELF32 or .S source")
    p.add_argument("--disk", metavar="IMAGE", help="disk image at 0x84000000")
    p.add_argument("--firmware", metavar="IMAGE", help="RVuc firmware (default: bundled echo firmware)")
    p.add_argument("--max-insns", type=int, metavar="N", help="stop after N retired instructions")
    p.add_argument("--trace", metavar="FILE", help="write one line per retirement or trap")
    p.add_argument("--lockstep", action="store_true", help="check every record against the reference interpreter")
    p.add_argument("--no-cache", action="store_true", help="disable the data/instruction cache")
    p.add_argument("--no-fetch-buffer", action="store_true", help="disable the 16-bit fetch buffer")
    p.add_argument("--miss-penalty", type=int, default=16, metavar="N", help="cache miss penalty in cycles")
    p.add_argument("--checkpoint-out", metavar="FILE", help="save a checkpoint when the run stops")
    p.add_argument("--restore", metavar="FILE", help="resume from a checkpoint")
    p.add_argument("--stats", metavar="FILE",
                   help="write run statistics on exit ('-' for stderr; JSON if FILE ends in .json)")
    p.add_argument("--stdin", metavar="SCRIPT",
                   help="bytes fed to the console receive FIFO ('-' reads host stdin to EOF first)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.miss_penalty < 0:
        print("rvsoc: error: --miss-penalty must be non-negative", file=sys.stderr)
        return 1
    if args.ram is None and args.restore is None:
        print("rvsoc: error: nothing to run (give --ram or --restore)", file=sys.stderr)
        return 1

    from . import backend

    script = None
    if args.stdin == "-":
        script = sys.stdin.buffer.read()
        args.stdin = None
    cfg = backend.Config(ram=args.ram, disk=args.disk, firmware=args.firmware, max_insns=args.max_insns,
                         trace=args.trace, lockstep=args.lockstep, cache=not args.no_cache,
                         fetch_buffer=not args.no_fetch_buffer, miss_penalty=args.miss_penalty,
                         stdin=args.stdin)
    try:
        m = backend.Machine(cfg, stdin_script=script)
        if args.restore:
            m.checkpoint_restore(args.restore)
    except (ImageError, CheckpointError, OSError) as e:
        print(f"rvsoc: error: {e}", file=sys.stderr)
        return 1
    m.console.sink = sys.stdout.buffer

    status = 0
    interrupted = False
    try:
        reason = m.run()
        if reason == "poweroff":
            status = m.console.poweroff & 0xFF
    except Divergence as e:
        print(f"rvsoc: {e}", file=sys.stderr)
        status = 3
    except SimulationFault as e:
        print(f"rvsoc: simulation fault at pc {m.state.pc:#010x}: {e}", file=sys.stderr)
        status = 2
    except KeyboardInterrupt:
        interrupted = True
        status = 130

    if args.checkpoint_out:
        if interrupted:
            print("rvsoc: interrupted mid-instruction; no checkpoint written", file=sys.stderr)
        else:
            try:
                m.checkpoint_save(args.checkpoint_out)
            except (CheckpointError, OSError) as e:
                print(f"rvsoc: error: {e}", file=sys.stderr)
                status = status or 1
    if args.stats:
        rep = m.stats()
        text = rep.to_json() if args.stats.endswith(".json") else rep.render()
        if args.stats == "-":
            print(text, file=sys.stderr)
        else:
            try:
                with open(args.stats, "w") as f:
                    f.write(text + "\n")
            except OSError as e:
                print(f"rvsoc: error: {e}", file=sys.stderr)
                status = status or 1
    return status


if __name__ == "__main__":
    sys.exit(main())
