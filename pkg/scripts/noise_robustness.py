"""Success rate against observation noise for the student and the blind expert."""

import json

from _common import outdir, parser, reference, seeds

from crossmodal_il.harness import noise_sweep
from crossmodal_il.tasks import family_suite, generate_tasks
from crossmodal_il.trainer import TrainConfig, dagger_dpo_suite


def main():
    ap = parser(__doc__, "runs/noise")
    ap.add_argument("--rates", default="0,0.05,0.1,0.2,0.3")
    args = ap.parse_args()
    out = outdir(args.out)
    rates = [float(r) for r in args.rates.split(",")]
    # the student is scored on the suite it was trained on
    tasks = family_suite(0) + family_suite(1)
    theta, _ = dagger_dpo_suite(tasks, TrainConfig(), reference(args.demo_tasks))
    vis = noise_sweep("student-visual", tasks, rates, seeds(args.seeds), params=theta)
    txt = noise_sweep("expert-text", generate_tasks(30, seed=77), rates, seeds(args.seeds))
    (out / "noise.csv").write_text(vis.to_csv() + txt.to_csv().split("\n", 1)[1])
    (out / "noise.json").write_text(json.dumps({"visual": vis.to_dict(), "text": txt.to_dict()}, indent=1))
    for rep in (vis, txt):
        print(rep.channel, " ".join(f"{r}:{x:.2f}" for r, x in zip(rep.rates, rep.success_by_rate)))


if __name__ == "__main__":
    main()
