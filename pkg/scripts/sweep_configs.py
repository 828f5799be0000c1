"""Run every bundled model/prescription end to end and print one line each.

Retries once with a smaller h when quantization reports the target edge
length is too coarse for the skeleton's shortest arc.
"""

import re
import sys
import time

from metricquad.models import bundled_model, bundled_names
from metricquad.pipeline import PipelineConfig, run_pipeline


def run_one(model, presc, out, h=None):
    cfg = PipelineConfig(mesh=f"bundled:{model}",
                         prescription=f"bundled:{presc}", out=out)
    if h is not None:
        cfg.h = {"absolute": h}
    return run_pipeline(cfg)


def main():
    only = sys.argv[1:]
    for model in bundled_names():
        bm = bundled_model(model)
        for presc in bm.prescriptions:
            tag = f"{model}/{presc}"
            if only and not any(s in tag for s in only):
                continue
            out = f"/tmp/sweep/{model}_{presc}"
            t0 = time.time()
            try:
                try:
                    res = run_one(model, presc, out)
                except Exception as e:
                    m = re.search(r"choose h <= ([0-9.e-]+)", str(e))
                    if not m:
                        raise
                    res = run_one(model, presc, out, h=0.9 * float(m.group(1)))
                import json
                import os
                qual = json.load(open(os.path.join(out, "quality.json")))
                print(f"{tag:35s} OK    {time.time()-t0:7.1f}s "
                      f"quads {qual['nQuads']:7d} census {qual['census']} "
                      f"indexSum {qual['indexSum']}")
            except Exception as e:
                msg = str(e).replace("\n", " ")[:140]
                print(f"{tag:35s} FAIL  {time.time()-t0:7.1f}s "
                      f"{type(e).__name__}: {msg}")
            sys.stdout.flush()


if __name__ == "__main__":
    main()
