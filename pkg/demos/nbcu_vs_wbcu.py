"""Why reweighting matters: NBCU against BC and WBCU on the standard instance.

The behavior policy always picks the unrewarded action.  Pooling its data
with the expert's (NBCU) drags the learned policy toward it, while BC and
tabular WBCU only clone expert actions.

    python3 demos/nbcu_vs_wbcu.py
"""

from suppil.harness import estimate_gap, nbcu_lower_bound
from suppil.instances import standard_imitation

mdp, expert, behavior = standard_imitation(10)
print(f"{'eta':>5} {'BC':>8} {'NBCU':>8} {'WBCU':>8} {'NBCU bound':>11}")
for eta in (0.9, 0.6, 0.3, 0.1):
    row = [estimate_gap(mdp, expert, behavior, alg, eta, 200, 200, seed=0).mean_gap
           for alg in ("BC", "NBCU", "WBCU-tabular")]
    bound = nbcu_lower_bound(mdp, expert, behavior, eta)
    print(f"{eta:5.2f} " + " ".join(f"{g:8.4f}" for g in row) + f" {bound:11.3f}")

# BC and tabular WBCU give the same policy on every draw, so their columns agree.
