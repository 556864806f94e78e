# %% [markdown]
# # The balans command line
# Writes a config, then runs solve and audit into a scratch directory.

# %%
import json
import os
import tempfile
from pathlib import Path

from balans.cli import main

work = Path(tempfile.mkdtemp())
cfg = work / "run.toml"
cfg.write_text(
    '[problem]\ncatalog = "burgers-riemann"\n\n[grid]\nN = 100\n\n'
    "[outputs]\nsnapshot_times = [0.5, 1.0]\n"
)
os.environ["BALANS_OUT"] = str(work / "out")

# %%
print("solve exit code:", main(["solve", str(cfg)]))
print(sorted(p.name for p in (work / "out").iterdir()))

# %%
print("audit exit code:", main(["audit", str(cfg)]))
report = json.loads((work / "out" / "report.json").read_text())
print("ok:", report["ok"], " worst entropy:", report["entropy"]["worst_plus"])
