"""
Workload across a spoken conversation
=====================================

A conversation session runs ten rounds whose load rises steadily. The
prediction trace is averaged per round with an interval that allows for
the strong autocorrelation of a 50 Hz trace, and a line is fitted across
rounds. Separately, each transcript word gets the prediction statistics
of the ticks it spans, after mapping speech time onto the EEG clock.
"""

# %%
from scipy import stats

from convbci.alignment import align_words, fit_clock_map, ols_trend, round_means
from convbci.calibration import calibrate
from convbci.online import simulate_online
from convbci.synth import SynthConfig, synthesize

cal, _ = synthesize(SynthConfig("workload_calibration", seed=1))
conv, _ = synthesize(SynthConfig("workload_conversation", seed=2))
model, _ = calibrate(cal, "workload")
trace = simulate_online(conv, model)

# %%
rounds = round_means(trace, conv.rounds)
for r in rounds:
    print(f"round {r.round:2d}: mean {r.mean:7.3f}  [{r.ci_lo:7.3f}, {r.ci_hi:7.3f}]  "
          f"rho {r.rho_hat:.3f}  n_eff {r.n_eff:6.1f} of {r.n_ticks}")

# %%
trend = ols_trend(rounds)
rho = stats.spearmanr([r.round for r in rounds], [r.mean for r in rounds])[0]
print(f"slope {trend.slope:.3f} per round, CI [{trend.ci_lo:.3f}, {trend.ci_hi:.3f}], "
      f"R^2 {trend.r_squared:.3f}, p {trend.p_value:.2g}")
print(f"cumulative change {trend.cumulative_change:.2f}, Spearman {rho:.3f}")

# %%
# Speech timestamps sit 1.25 s behind the EEG clock in this recording
clock = fit_clock_map(conv.sync)
print(clock)
rows = align_words(trace, conv.transcript, clock)
for w in rows[:8]:
    print(f"{w.word:>12s} {w.speaker:>11s} {w.onset_eeg_s:8.2f}s  mean {w.mean_value:7.3f}  "
          f"post {w.post_window_mean:7.3f}")
