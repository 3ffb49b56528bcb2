"""How much a wiretapper learns about private gradients.

When agents exchange exact states, anyone who sees two consecutive rounds of
messages can solve the update for the sender's gradient. With ternary
messages the same inversion is fed quantized values, and the quantization
error, amplified by 1/(eps * lam), buries the gradient.

Run: python demos/gradient_leakage.py
"""

import numpy as np

from ternopt import QuantizerSpec, Schedule, attack_report, make_sensor_problem, preset, run
from ternopt.adversary import quantized_error_samples


def main():
    topology, schedule = preset("five-agent"), Schedule()
    problem = make_sensor_problem(seed=0)

    plain = run(topology, schedule, QuantizerSpec("identity"), problem, 101, seed=0, record="full")
    rep = attack_report(plain)
    print(f"exact exchange: max relative error {rep.relative_error.max():.2e} over {len(rep)} inferences")

    for mode in ("eavesdropper", "honest_but_curious"):
        for r in (2.0, 5.0, 10.0):
            quant = QuantizerSpec("ternary", r, "saturate")
            traj = run(topology, schedule, quant, problem, 101, seed=0, record="full")
            errs = quantized_error_samples(traj.states[50], traj.rounds[50].gradients, topology, schedule,
                                           50, quant, target=0, draws=100, seed=1, mode=mode)
            se = errs.std(ddof=1) / np.sqrt(errs.size)
            print(f"{mode:<20} r = {r:>4g}: mean relative error {errs.mean():8.2f} +/- {se:.2f}")


if __name__ == "__main__":
    main()
