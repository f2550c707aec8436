"""Coverage of weighted-bootstrap percentile intervals on DGP I.

    python scripts/bootstrap_coverage.py --outer 100 --draws 200 --n 1000

For each outer dataset the full path is bootstrapped and we record whether
the interval for alpha(tau) covers the truth.  Set SCFCQ_WORKERS to spread
the draws over processes.
"""

import argparse
import os

import numpy as np

from scfcq.estimator import ScfcqConfig, trim
from scfcq.first_stage import fit_control
from scfcq.inference import BootstrapConfig, bootstrap_path
from scfcq.simulation import DgpSpec, generate, true_effects


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outer", type=int, default=100)
    ap.add_argument("--draws", type=int, default=200)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--taus", type=float, nargs="+", default=[0.9, 0.7, 0.5, 0.3])
    ap.add_argument("--ci-level", type=float, default=0.95)
    ap.add_argument("--seed", type=int, default=12345)
    args = ap.parse_args()

    spec = DgpSpec().calibrated()
    cfg = ScfcqConfig()
    workers = int(os.environ.get("SCFCQ_WORKERS", "1"))
    hits = np.zeros(len(args.taus), dtype=int)
    width = np.zeros(len(args.taus))
    for rep in range(args.outer):
        ds, _ = generate(args.n, spec, np.random.default_rng(np.random.SeedSequence([args.seed, 6, rep])))
        v = fit_control(ds.R, ds.Z).v_hat
        ds = trim(ds, cfg.trim_fraction)
        boot = BootstrapConfig(draws=args.draws, seed=args.seed + rep, ci_level=args.ci_level)
        res = bootstrap_path(ds, v, cfg, boot, workers=workers)
        for j, tau in enumerate(args.taus):
            l = int(np.argmin(np.abs(res.grid - tau)))
            lo, hi = res.ci_lo[l, ds.k_x], res.ci_hi[l, ds.k_x]
            hits[j] += int(lo <= true_effects(tau)[0] <= hi)
            width[j] += hi - lo
        print(f"outer {rep + 1}/{args.outer}: " + " ".join(f"{h}" for h in hits), flush=True)
    for j, tau in enumerate(args.taus):
        print(f"tau={tau:.2f} coverage {hits[j]}/{args.outer}  mean width {width[j] / args.outer:.4f}")


if __name__ == "__main__":
    main()
