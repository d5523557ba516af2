"""Why the linear map must lag the batch it penalizes.

On a batch smaller than the input dimension the closed-form fit
interpolates the outputs exactly, so a freshly fit map makes the penalty
vanish on that same batch. Refitting *after* each update and penalizing
with the previous map keeps the signal alive; an EMA of the per-batch
fits smooths it further.
"""

import numpy as np

from dlreg import augment_ones, dlreg_penalty, dlreg_update_z, init_dlreg_state, lstsq

rng = np.random.default_rng(2)

print("== same-batch degeneracy (fat regime) ==")
x = rng.standard_normal((4, 32))  # 4 samples, 32 features
outputs = rng.standard_normal((4, 3))
batch = augment_ones(x)
state = init_dlreg_state(32, 3, gamma=1.0, policy="closed_form_lagged")
dlreg_update_z(batch, outputs, state)
value, _ = dlreg_penalty(batch, outputs, state)
print(f"penalty on the batch the map was just fit on: {value:.3e}")

other = rng.standard_normal((4, 32))
other_out = rng.standard_normal((4, 3))
value, _ = dlreg_penalty(augment_ones(other), other_out, state)
print(f"penalty on the *next* batch with the lagged map: {value:.3f}")

print("\n== EMA vs outright replacement ==")
ema = init_dlreg_state(32, 3, gamma=1.0, policy="ema", beta=0.1)
hard = init_dlreg_state(32, 3, gamma=1.0, policy="closed_form_lagged")
drift_ema, drift_hard = [], []
prev_ema, prev_hard = None, None
for step in range(12):
    bx = augment_ones(rng.standard_normal((4, 32)))
    by = rng.standard_normal((4, 3))
    dlreg_update_z(bx, by, ema)
    dlreg_update_z(bx, by, hard)
    if prev_ema is not None:
        drift_ema.append(np.linalg.norm(ema.linear_map - prev_ema))
        drift_hard.append(np.linalg.norm(hard.linear_map - prev_hard))
    prev_ema, prev_hard = ema.linear_map.copy(), hard.linear_map.copy()
print(f"mean per-step map drift, outright: {np.mean(drift_hard):.3f}")
print(f"mean per-step map drift, ema(0.1): {np.mean(drift_ema):.3f}")
print("(the EMA damps batch-to-batch jumps of the map)")

print("\n== the fit the update converges to ==")
wide, wide_out = rng.standard_normal((500, 32)), rng.standard_normal((500, 3))
full_fit = lstsq(augment_ones(wide).data, wide_out)
print(f"a tall fit on 500 rows has shape {full_fit.shape} (features+1, classes)")
print("its last row is the bias part of the linear map")
