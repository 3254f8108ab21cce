"""Player 1's contract in the N-player game against the mean-field contract law.

Under the optimal N-player efforts the contract of each player has exactly
the mean-field Gaussian law, so the W1 distance stays at the Monte Carlo
noise floor for every N, while the terminal output still carries an O(1/N)
variance correction.

    python demos/nplayer_contract_law.py
"""
from mfcontract import nplayer
from mfcontract.model import MeanFieldModel

m = MeanFieldModel(alpha=0.25, beta1=0.1)
Ns = [1, 4, 16, 64, 256]
law = nplayer.mean_field_law(m)
print(f"mean-field contract law: mean {law.mean:.5f}, variance {law.variance:.5f}")
print(f"effort identical to mean field: {nplayer.effort_match(m)}")
for quantity in ("contract", "state"):
    rows = nplayer.convergence_experiment(m, Ns, games=10_000, seed=42, quantity=quantity)
    print(f"{quantity}: W1 noise floor {rows[0].w1_noise_floor:.4f}")
    for r in rows:
        print(f"  N = {r.N:4d}: W1 = {r.w1:.4f}")
    v = nplayer.trend_verdict(rows[1:])
    print(f"  N >= 4: strictly decreasing {v['strictly_decreasing']}, log-log slope {v['slope']:+.3f}")
