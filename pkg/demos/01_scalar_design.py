"""
Designing a trigger for the scalar integrator
=============================================

The plant is a single integrator with unit feedback, so every quantity in
the design has a closed form that can be checked by hand. Holding the
input computed at a state x, the closed-loop response is x (1 - t): it
crosses zero at t = 1 and grows again afterwards. An execution is needed
once the held response leaves the certified decay envelope, and for this
plant that happens at the same time from every initial state.
"""

import numpy as np

from selftrig import design, scheduler

# Plant: dx/dt = u with u = -x held between executions.
sys_ = design.LinearSystem(0.0, 1.0, -1.0)
print(f"closed-loop pole: {np.linalg.eigvals(sys_.A + sys_.B @ sys_.K)[0].real}")

# Certify half of the continuous-time decay rate. The certificate solves
# the Lyapunov equation for the closed loop, so P = 1/2 and the full rate
# is 1; asking for the ratio 0.5 leaves rate 0.5 for the trigger to track.
cert = design.make_certificate(sys_, lambda_ratio=0.5)
print(f"P = {float(cert.P[0, 0])!r}, full rate = {cert.lambda_o!r}, "
      f"tracked rate = {cert.lam!r}")

# The minimum inter-execution time is where the held response meets the
# envelope: |1 - tau| = exp(-0.5 tau), which a few lines of bisection put
# at 1.47767... The designed value must agree.
result = design.min_inter_execution_time(sys_, cert)
lo, hi = 1.0, 4.0
while hi - lo > 1e-12:
    mid = 0.5 * (lo + hi)
    if abs(1.0 - mid) < np.exp(-0.5 * mid):
        lo = mid
    else:
        hi = mid
print(f"designed tau* = {result.tau!r}")
print(f"hand bisection = {0.5 * (lo + hi)!r}")

# Quantize onto a grid of step 0.1 capped at 3.0. The window indices say:
# never execute before 14 steps, always execute by 30.
trig = design.choose_trigger(result.tau, delta=0.1, tau_max=3.0)
print(f"window: [{trig.n_min * trig.delta!r}, {trig.n_max * trig.delta!r}] "
      f"= grid indices [{trig.n_min}, {trig.n_max}]")

# Performance gains for the disturbed loop: sigma scales the transient,
# gamma_total_coeff scales the disturbance bound.
gains = design.eiss_gains(sys_, cert, trig, tau_star=result.tau)
print(f"sigma = {gains.sigma!r}")
print(f"gamma_total_coeff = {gains.gamma_total_coeff!r}")

# The runtime tables the scheduler scans. Entry 0 is exactly zero; the
# entries grow more negative as the envelope pulls away from the held
# response, then turn around as the response swings back.
tables = scheduler.build_tables(sys_, cert, trig)
forms = [float(f[0, 0]) for f in tables.forms]
print(f"first table entries: {[round(v, 6) for v in forms[:5]]}")

# One decision from x = 2: scan finds the first violation at index 15,
# so the next execution is scheduled 14 steps = 1.4 time units out.
decision = scheduler.next_update(np.array([2.0]), tables)
print(f"from x=2: wait {decision.tau!r} ({decision.evaluations} table "
      f"evaluations, {decision.op_count} multiply-adds)")
