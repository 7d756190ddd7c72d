"""Run both reference convergence studies (k=0, h=1/4..1/64) and print them next to the reference values."""
import argparse
import time

from wgfem.study import RunConfig, run_convergence

REFERENCE = {
    "table1": {"h1w": [None, None, None, None, 5.806e-2], "l2": [None] * 4 + [3.94e-4],
               "linf": [None] * 4 + [8.906e-4]},
    "table2": {"h1w": [1.873e-1, 4.895e-2, 1.239e-2, 3.109e-3, 7.782e-4],
               "l2": [3.129e-2, 8.538e-3, 2.184e-3, 5.490e-4, 1.375e-4],
               "linf": [9.284e-2, 2.553e-2, 6.533e-3, 1.642e-3, 4.112e-4]},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=5)
    ap.add_argument("--diagonal", default="se-nw", choices=("se-nw", "sw-ne"))
    args = ap.parse_args()
    for name, ref in REFERENCE.items():
        t0 = time.perf_counter()
        rep = run_convergence(RunConfig(problem=name, levels=args.levels, diagonal=args.diagonal))
        print(f"== {name}  ({time.perf_counter() - t0:.1f} s, diagonal {args.diagonal})")
        print(rep.to_table(), end="")
        print("ratio to reference value:")
        for m in ("h1w", "l2", "linf"):
            cells = []
            for rec, r in zip(rep.records, ref[m]):
                cells.append("    -" if r is None else f"{getattr(rec, f'err_{m}') / r:5.2f}")
            print(f"  {m:>5}: " + " ".join(cells))
        print()


if __name__ == "__main__":
    main()
