"""Reading LIBSVM data and splitting it across clients.

Shows the label mix per client under iid, Dirichlet and shard partitioning.
"""
import numpy as np

from fedsim.data import load_bundled, parse_libsvm, partition_dirichlet, partition_iid, partition_shard

data = load_bundled()
labels = np.asarray(data.labels)
print(f"bundled dataset: {data.n} samples, {data.d} features, labels {data.label_set}")

tiny = parse_libsvm("+1 1:0.5 3:2\n-1 2:1.5\n")
print("parsed", tiny.samples, "d =", tiny.d)

rng = np.random.default_rng(0)
for title, part in [
    ("iid", partition_iid(data.n, 5, rng)),
    ("dirichlet:0.3", partition_dirichlet(labels, 0.3, 5, rng)),
    ("dirichlet:100", partition_dirichlet(labels, 100.0, 5, rng)),
    ("shard:1", partition_shard(labels, 1, 5, rng)),
]:
    mix = ["{:3d} samples, {:4.0%} positive".format(len(a), float(np.mean(labels[a] == 1))) for a in part.assignment]
    print(f"\n{title}")
    print("\n".join("  client %d: %s" % (i, m) for i, m in enumerate(mix)))
