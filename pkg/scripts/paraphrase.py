"""Template versus paraphrased instructions for a trained student."""

import json

from _common import outdir, parser, reference

from crossmodal_il.harness import evaluate, paraphrase_instructions
from crossmodal_il.tasks import family_suite
from crossmodal_il.trainer import TrainConfig, dagger_dpo_suite


def main():
    ap = parser(__doc__, "runs/paraphrase")
    ap.add_argument("--suites", default="0,1", help="family-suite seeds trained together")
    args = ap.parse_args()
    out = outdir(args.out)
    tasks = [t for s in args.suites.split(",") for t in family_suite(int(s))]
    theta, _ = dagger_dpo_suite(tasks, TrainConfig(), reference(args.demo_tasks))
    para = paraphrase_instructions(tasks)
    base, new = evaluate(theta, tasks).success_rate, evaluate(theta, para).success_rate
    res = {"template": base, "paraphrase": new, "drop": base - new,
           "instructions": [[a.task.instruction, b.task.instruction] for a, b in zip(tasks, para)]}
    (out / "paraphrase.json").write_text(json.dumps(res, indent=1))
    print(f"template {base:.3f} paraphrase {new:.3f} drop {base - new:.3f}")


if __name__ == "__main__":
    main()
