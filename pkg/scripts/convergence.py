"""Student-expert gap over trials on one family suite per seed."""

import time

from _common import outdir, parser, reference, seeds

from crossmodal_il.harness import ExpertAgent, evaluate
from crossmodal_il.tasks import family_suite
from crossmodal_il.trainer import TrainConfig, dagger_dpo_suite


def main():
    ap = parser(__doc__, "runs/convergence")
    ap.add_argument("--loss", choices=["dpo", "ce"], default="dpo")
    args = ap.parse_args()
    out = outdir(args.out)
    ref = reference(args.demo_tasks)
    rows = ["seed,trial,student,expert"]
    for s in seeds(args.seeds):
        suite = family_suite(s)
        expert = evaluate(ExpertAgent(), suite).success_rate
        t0 = time.perf_counter()
        _, tl = dagger_dpo_suite(suite, TrainConfig(seed=s, loss_mode=args.loss), ref)
        curve = tl.padded_curve(12)
        rows += [f"{s},{t},{x:.4f},{expert:.4f}" for t, x in enumerate(curve, start=1)]
        print(f"seed {s}: {' '.join(f'{x:.2f}' for x in curve)}  ({time.perf_counter() - t0:.1f}s)")
    (out / "convergence.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
