"""
Replaying a recording as a live decoder
=======================================

The online pipeline sees frames one chunk at a time and emits a prediction
every 20 ms from the preceding window only. We compare it with the offline
epoch predictions and show that the chunk size does not matter.
"""

# %%
import numpy as np

from convbci.calibration import calibrate, predict_workload, workload_epochs
from convbci.online import OnlinePipeline, normalize_trace, simulate_online
from convbci.synth import SynthConfig, synthesize

cal, _ = synthesize(SynthConfig("workload_calibration", seed=1))
model, _ = calibrate(cal, "workload")
trace = simulate_online(cal, model)
print(f"{len(trace)} ticks at {trace.rate_hz} Hz starting at t = {trace.t0_s} s")

# %%
# The tick at an epoch's end covers exactly that epoch's second of data
ep = workload_epochs(cal)
offline = predict_workload(model, ep)
idx = np.round((ep.onsets + 1.0 - trace.t0_s) * trace.rate_hz).astype(int)
online = trace.values[idx]
print("sign agreement:", np.mean(np.sign(online) == np.sign(offline)))
print("correlation:", round(np.corrcoef(online, offline)[0, 1], 3))

# %%
# Streaming in odd-sized chunks reproduces the batch replay
x = cal.data.samples.astype(np.float64)
pipe = OnlinePipeline(model, cal.header.sample_rate_hz)
rng = np.random.default_rng(0)
parts, pos = [], 0
while pos < x.shape[1]:
    n = int(rng.integers(1, 2000))
    parts.append(pipe.push(x[:, pos:pos + n]))
    pos += n
streamed = np.concatenate(parts)
print("max difference chunked vs batch:", np.max(np.abs(streamed - trace.values)))

# %%
# For display the trace can be rescaled to [-1, 1]
shown = normalize_trace(trace)
print("range after scaling:", shown.values.min(), shown.values.max())
