"""BEGAN-family training on 8x8 procedural glyphs, then the diversity report.

Writes sample mosaics and the metric reports to ``demo_output/glyphs`` in
the current directory. Run with ``python3 demos/04_glyph_diversity.py``
(about a minute).
"""

# %%
from pathlib import Path

import numpy as np

from vacgan.autodiff import make_rng
from vacgan.cli import compare_reports
from vacgan.data import mosaic, write_pgm
from vacgan.experiments import glyph_data, glyph_train_config
from vacgan.metrics import pairwise_report
from vacgan.training import VacGanWeights, generate, train

out = Path("demo_output/glyphs")
out.mkdir(parents=True, exist_ok=True)
data = glyph_data(seed=0, n_per_class=500)
write_pgm(out / "real.pgm", mosaic(data.samples[:20], 10))

# %%
# The BEGAN controller k_t balances how hard the discriminator pushes on fake
# reconstructions. The convergence measure M should fall as training
# proceeds, and k_t must stay inside [0, 1].
#
# At this scale a classifier weight of 0.003 barely moves the generator in
# 300 steps, so a third run raises it to 0.5 to make the effect visible.
runs = {
    "cbegan": glyph_train_config("cbegan", seed=0, steps=300),
    "vacgan_on_began": glyph_train_config("vacgan_on_began", seed=0, steps=300),
    "vacgan_heavy": glyph_train_config("vacgan_on_began", seed=0, steps=300, weights=VacGanWeights(0.5, 0.5)),
}
reports = {}
for scheme, cfg in runs.items():
    bundle = train(cfg, data)
    m = [r.M for r in bundle.history]
    print(f"{scheme:>16}: M {m[0]:.3f} -> {m[-1]:.3f}, k_t range [{min(bundle.k_trace):.2e}, {max(bundle.k_trace):.2e}]")
    rng = make_rng(1)
    samples = {c: np.clip(generate(bundle, cfg, c, 40, rng), 0.0, 1.0) for c in (0, 1)}
    for c in (0, 1):
        write_pgm(out / f"{scheme}_class{c}.pgm", mosaic(samples[c][:20], 10))
    reports[scheme] = pairwise_report(list(samples[0]), list(samples[1]))
    (out / f"{scheme}_report.csv").write_text(reports[scheme].to_csv())

# %%
# Higher inter-class distance than intra-class distance means the two
# generated classes are distinguishable from each other.
for scheme, report in reports.items():
    print(f"{scheme:>16}: intra MSE {report.get('mse', 'intra_class_a'):.4f} / "
          f"{report.get('mse', 'intra_class_b'):.4f}, inter MSE {report.get('mse', 'inter_class'):.4f}")

_, verdicts = compare_reports(reports["vacgan_heavy"], reports["cbegan"])
print("\nA = vacgan_heavy, B = cbegan")
print("\n".join(verdicts))
print(f"\nmosaics and reports written to {out.resolve()}")
