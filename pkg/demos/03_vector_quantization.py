# K-means vector quantization: each flow becomes the index of its nearest centroid.
import numpy as np

from flowquant import CodecConfig, ForestConfig, SyntheticSpec, generate_synthetic
from flowquant import bench, vq_codec

# %% two blobs, two centroids
rng = np.random.default_rng(0)
x = np.vstack([rng.normal(0, 0.2, (100, 2)), rng.normal(3, 0.2, (100, 2))])
cb = vq_codec.fit(x, vq_codec.VqFitConfig(k_fraction=0.01))
print("centroids\n", cb.centroids.round(2), "\nLloyd iterations", cb.iterations)

# %% fit time grows with K; subsampling halves it
table = generate_synthetic(SyntheticSpec(n_groups=2, classes_per_group=8, rows_per_class=120))
for k in (0.01, 0.05, 0.10, 0.20):
    full = bench.time_vq_fit(table, CodecConfig("vq", k_fraction=k), repeats=2)
    half = bench.time_vq_fit(table, CodecConfig("vq", k_fraction=k, subsample=0.5), repeats=2)
    print(f"k={k:.2f}  fit {1000 * full:7.1f} ms   subsample 0.5: {1000 * half:7.1f} ms")

# %% size and F1
grid = bench.ExperimentGrid(vq_k_fractions=(0.01, 0.20), vq_subsamples=(0.5, 1.0))
print()
print(bench.rows_to_csv(bench.run_vq_sweep(table, grid, ForestConfig(n_trees=40)),
                        bench.VQ_COLUMNS, drop_time=True))
