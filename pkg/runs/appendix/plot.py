import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
for name in ['sharpness_coarse.csv', 'sharpness_fine.csv']:
    with open(here / name) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        continue
    keys = list(rows[0])
    x = [float(r[keys[0]]) for r in rows]
    fig, ax = plt.subplots()
    for k in keys[1:]:
        if "order" in k or k == "ratio":
            continue
        y = [float(r[k]) for r in rows if r[k]]
        if len(y) == len(x) and all(v > 0 for v in y) and all(v > 0 for v in x):
            ax.loglog(x, y, "o-", label=k)
    ax.set_xlabel(keys[0])
    ax.legend()
    fig.savefig(here / (Path(name).stem + ".png"), dpi=120)
    plt.close(fig)
print("plots written to", here, file=sys.stderr)
