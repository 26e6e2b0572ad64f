# PCA shrinks the column count but spreads information over every coordinate,
# which gzip then struggles with.
import numpy as np

from flowquant import ForestConfig, SyntheticSpec, generate_synthetic
from flowquant import bench, pca_codec
from flowquant.flow_model import normalize

table = generate_synthetic(SyntheticSpec(n_groups=2, classes_per_group=8, rows_per_class=120))

# %% eigen-spectrum of one group
group = table.take(np.flatnonzero(table.group_key == "AS00"))
x = normalize(group)[0].numeric
spec = pca_codec.spectrum(x)
cum = np.cumsum(spec.eigenvalues) / spec.eigenvalues.sum()
for target in (0.5, 0.8, 0.96, 0.99):
    print(f"variance {target:.2f} -> {int(np.searchsorted(cum, target) + 1):3d} of {x.shape[1]} components")

# %% size, entropy and F1 for a few targets
grid = bench.ExperimentGrid(sq_bits=(8, 32), pca_variance=(0.5, 0.99))
rows = bench.run_pca_grid(table, grid, ForestConfig(n_trees=40))
print()
print(bench.rows_to_csv(rows, bench.PCA_COLUMNS))
