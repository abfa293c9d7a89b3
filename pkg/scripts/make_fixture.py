"""Write tests/data/halves_pvalues.csv: 250 uniform p-values then 250 near zero."""
from pathlib import Path

import numpy as np

from wmcpd.rtest import PValueSequence

rng = np.random.default_rng(20240101)
T = 999
plain = rng.integers(1, T + 2, 250) / (T + 1)
marked = rng.integers(1, 11, 250) / (T + 1)
pv = PValueSequence(np.concatenate([plain, marked]), 20, T, "ems")
out = Path(__file__).resolve().parents[1] / "tests" / "data" / "halves_pvalues.csv"
out.write_text(pv.to_csv())
print(out)
