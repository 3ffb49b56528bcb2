"""Exact privacy of one ternary message and its composition over rounds.

A single coordinate quantized with threshold r takes one of three values.
Moving the input by at most 1 changes any output probability by at most
1/r, so each message is (0, 1/r)-differentially private. The sweep below
certifies this on a grid without sampling, then composes the bound over T
rounds.

Run: python demos/privacy_accounting.py
"""

from ternopt import compose, event_gaps, sweep_dp


def main():
    print("single pair x = 0.4, y = -0.6, r = 2:", event_gaps(0.4, -0.6, 2.0))
    print(f"{'r':>6}{'sup gap':>12}{'1/r':>10}{'violation':>12}{'pairs':>12}")
    for r in (1.0, 2.0, 5.0, 10.0):
        s = sweep_dp(r, 1e-3)
        print(f"{r:>6g}{s.max_gap:>12.6f}{1 / r:>10.4f}{s.max_violation:>12.1e}{s.pairs:>12d}")
    for T in (10, 100, 1000):
        led = compose(T, 10.0)
        print(f"T = {T:>5}: basic composition delta = {led.basic_composition_delta:g}")
    print(compose(1000, 10.0).sqrt_note)


if __name__ == "__main__":
    main()
