"""Sampler oracles: conjugate marginal likelihood, sampler agreement, variance bound, null calibration."""

import argparse

from rechvol import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--particles", type=int, default=1000)
    ap.add_argument("--skip-agreement", action="store_true", help="skip the slow data-annealing comparison")
    args = ap.parse_args()
    est, exact = ex.conjugate_log_ml(particles=args.particles)
    print(f"conjugate log ML: mean {est.mean():.4f}, sd {est.std(ddof=1):.4f}, exact {exact:.4f}")
    for ess_frac in (0.5, 0.8):
        est, _ = ex.conjugate_log_ml(particles=args.particles, ess_frac=ess_frac)
        print(f"  c = {ess_frac}: mean {est.mean():.4f}")
    if not args.skip_agreement:
        print("KS data vs likelihood annealing:", ex.sampler_agreement(particles=args.particles))
    print("variance bound, pathwise:", ex.variance_bound_pathwise())
    print(f"variance bound, in expectation: worst standardized excess {ex.variance_bound_expectation():.2f}")
    lb, rs = ex.null_rejection_rates()
    print(f"null rejection rates: Ljung-Box {lb:.3f}, Lo R/S {rs:.3f}")


if __name__ == "__main__":
    main()
