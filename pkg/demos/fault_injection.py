"""Exhaustive single-fault injection, with the failing faults listed.

Every fault location of preparation plus one cycle gets one shot carrying
exactly that fault, followed by a noiseless decode.

    python3 demos/fault_injection.py
"""

from collections import Counter

from ftqec.ftcheck import inject_all


def main():
    rep = inject_all(cycles=1)
    print(rep.summary())
    for st, (n, bad) in rep.per_state.items():
        print(f"  {st:5s} {n:5d} faults, {bad} logical failures")
    where = Counter((st, f.slice, f.origin) for st, f in rep.failures)
    for (st, k, origin), n in sorted(where.items()):
        print(f"  {st} slice {k} ({origin}): {n}")


if __name__ == "__main__":
    main()
