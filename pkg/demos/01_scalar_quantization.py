# Scalar quantization: bits per field against size and classification F1.
import numpy as np

from flowquant import CodecConfig, ForestConfig, SyntheticSpec, generate_synthetic, utility_pipeline
from flowquant import scalar_quantizer as sq

# %% one column, by hand
col = np.array([0.0, 0.4, 1.1, 2.5, 3.9, 250.0])   # one outlier
params = sq.fit(col, bits=2)
codes = sq.quantize(col, params)
print("P1/P99      ", params.p_low[0], params.p_high[0])
print("codes       ", codes.codes[:, 0])
print("reconstruct ", sq.dequantize(codes, params)[:, 0])

# %% a small synthetic capture
table = generate_synthetic(SyntheticSpec(n_groups=2, classes_per_group=8, rows_per_class=120))
forest = ForestConfig(n_trees=40)
base = utility_pipeline(table, None, forest)
print(f"\nbaseline     F1 {base.f1.median:.3f}")

for bits in (2, 4, 8, 16, 32):
    res = utility_pipeline(table, CodecConfig("sq", bits=bits), forest)
    print(f"B={bits:<2}  ratio {res.size.ratio_pct:6.1f}%  F1 {res.f1.median:.3f}"
          f"  [{res.f1.p5:.2f}, {res.f1.p95:.2f}]")
