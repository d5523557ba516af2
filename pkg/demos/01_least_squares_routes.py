"""The two closed-form least-squares routes behind the regularizer's map.

A fat design matrix (fewer samples than features, the usual mini-batch
case) is solved through the Gram matrix of its rows and interpolates the
targets exactly. A tall matrix goes through the normal equations and
leaves a residual orthogonal to the column space. Both are cross-checked
here against an SVD pseudo-inverse.
"""

import numpy as np

from dlreg import lstsq, solve_spd

rng = np.random.default_rng(0)

print("== fat route: 8 samples, 64 features ==")
xb = rng.standard_normal((8, 64))
f = rng.standard_normal((8, 3))
z = lstsq(xb, f)
print(f"fitted map shape: {z.shape}")
print(f"interpolation residual |xb @ z - f|_F = {np.linalg.norm(xb @ z - f):.3e}")
print(f"agreement with SVD pinv: {np.max(np.abs(z - np.linalg.pinv(xb) @ f)):.3e}")

print("\n== tall route: 200 samples, 16 features ==")
xb = rng.standard_normal((200, 16))
f = rng.standard_normal((200, 3))
z = lstsq(xb, f)
resid = xb @ z - f
print(f"residual norm (cannot be zero here): {np.linalg.norm(resid):.3f}")
print(f"orthogonality |xb.T @ resid|_F = {np.linalg.norm(xb.T @ resid):.3e}")
print(f"agreement with SVD pinv: {np.max(np.abs(z - np.linalg.pinv(xb) @ f)):.3e}")

print("\n== jitter ladder on a rank-deficient Gram matrix ==")
v = rng.standard_normal((5, 1))
gram = v @ v.T  # rank 1: plain Cholesky fails, the ladder kicks in
s = solve_spd(gram, np.ones((5, 1)), jitter=0.0)
print(f"rank-1 system solved via escalation, solution stays finite: {np.all(np.isfinite(s))}")

print("\n== duplicate samples in a batch ==")
xb = rng.standard_normal((4, 64))
xb[1] = xb[0]  # the same image twice: the Gram matrix goes singular
f = rng.standard_normal((4, 3))
f[1] = f[0]
z = lstsq(xb, f)
print(f"fitted map norm stays modest: |z|_F = {np.linalg.norm(z):.3f}")
print(f"still interpolates: |xb @ z - f|_F = {np.linalg.norm(xb @ z - f):.3e}")
