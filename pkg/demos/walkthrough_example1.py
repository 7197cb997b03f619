"""The two-dimensional discriminator example, step by step.

Three expert samples and three union samples live in the plane.  We train
the logistic discriminator, find the max-margin direction and check whether
the quadratic-growth condition guarantees that the trained discriminator
separates good samples from bad ones.

    python3 demos/walkthrough_example1.py
"""

import numpy as np

from suppil.discriminator import StepObjective, train_discriminator
from suppil.instances import example1_instance
from suppil.landscape import check_recovery_condition, margin, max_margin_direction

labeled, expert, union, _ = example1_instance()
phi = labeled.phi
print("good features:\n", labeled.good_features())
print("bad features:\n", labeled.bad_features())

theta_star = train_discriminator(expert, union, phi)
obj = StepObjective(expert, union, phi)
print(f"\ntrained theta* = {np.round(theta_star, 4)}, loss {obj.loss(theta_star):.4f}")

theta_bar, top = max_margin_direction(labeled)
print(f"max-margin direction = {np.round(theta_bar, 4)}, margin {top:.4f}, "
      f"loss {obj.loss(theta_bar):.4f}")

# The condition compares how far theta* can stray from theta_bar (lhs)
# against the margin budget (rhs).
rep = check_recovery_condition(labeled, expert, union)
print(f"\nLipschitz constant {rep.lipschitz:.4f}, curvature tau {rep.tau:.4f}")
print(f"lhs {rep.lhs:.4f} <= rhs {rep.rhs:.4f}: {rep.holds}")
print(f"margin at theta* = {margin(theta_star, labeled).value:.4f} "
      "(positive, so every good sample outranks every bad one)")
