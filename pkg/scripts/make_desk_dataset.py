"""Regenerate ``src/fedsim/resources/a9a_desk.libsvm``.

The file mimics the a9a layout: 123 binary features arranged as 14 one-hot
groups (so every row has 14 active features) and labels in {-1, +1} with
roughly a quarter of the rows positive. Labels come from a noisy logistic
model so the data are not separable.

    python scripts/make_desk_dataset.py
"""
from pathlib import Path

import numpy as np

GROUP_SIZES = [5, 8, 16, 7, 14, 6, 5, 2, 3, 3, 3, 2, 8, 41]  # sums to 123
ROWS = 200


def main(seed=20221014):
    rng = np.random.default_rng(seed)
    assert sum(GROUP_SIZES) == 123
    w = rng.normal(0.0, 1.0, size=123)
    lines = []
    for _ in range(ROWS):
        active = []
        offset = 0
        for size in GROUP_SIZES:
            probs = rng.dirichlet(np.ones(size))
            active.append(offset + int(rng.choice(size, p=probs)))
            offset += size
        score = w[active].sum() / np.sqrt(len(active)) - 1.0
        label = 1 if rng.uniform() < 1.0 / (1.0 + np.exp(-2.0 * score)) else -1
        body = " ".join(f"{j + 1}:1" for j in active)
        lines.append(f"{label:+d} {body}")
    out = Path(__file__).resolve().parents[1] / "src" / "fedsim" / "resources" / "a9a_desk.libsvm"
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
