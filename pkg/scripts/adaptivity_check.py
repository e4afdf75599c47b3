"""Checks that voice conversion keeps the acoustic channel of its source.

For several seeds, converts a reverberant far-field signal toward a dry
near-field speaker reference, then asks the blind RT60 comparator which
anchor the output sits closer to. An adaptive conversion should stay
near the far-field source (anchor "b") rather than drifting toward the
dry reference (anchor "c").
"""
import argparse

from faraug.codec import ToyCodecBackend, voice_convert
from faraug.rt60 import compare_rt60
from faraug.synth import reverberant_bursts


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=10)
    ap.add_argument("--far-rt60", type=float, default=0.55)
    ap.add_argument("--near-rt60", type=float, default=0.12)
    ap.add_argument("--seed-base", type=int, default=8100)
    args = ap.parse_args(argv)

    backend = ToyCodecBackend()
    wins = 0
    print(f"{'case':>4} {'out_rt60':>9} {'far_rt60':>9} {'near_rt60':>10} closer_to")
    for s in range(args.cases):
        far = reverberant_bursts(args.far_rt60, seed=args.seed_base + s)
        near = reverberant_bursts(args.near_rt60, seed=args.seed_base + 100 + s)
        adapted = voice_convert(backend, far, near)
        result = compare_rt60(adapted, far, near)
        wins += result.closer_to == "b"
        print(f"{s:4d} {result.rt60_a:9.3f} {result.rt60_b:9.3f} "
              f"{result.rt60_c:10.3f} {result.closer_to}")
    print(f"kept the far-field channel in {wins}/{args.cases} cases")
    return 0 if wins > args.cases // 2 else 1


if __name__ == "__main__":
    raise SystemExit(main())
