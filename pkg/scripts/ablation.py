"""One-field ablations of DAgger-DPO, averaged over seeds."""

from dataclasses import replace

from _common import outdir, parser, reference, seeds

from crossmodal_il.harness import ablation_suite
from crossmodal_il.tasks import family_suite
from crossmodal_il.trainer import TrainConfig

VARIANTS = {
    "no-retrospection": {"retrospection": False},
    "no-bc-init": {"bc_init": False},
    "ce": {"loss_mode": "ce"},
}


def main():
    ap = parser(__doc__, "runs/ablation")
    ap.add_argument("--blind", action="store_true", help="blind expert, so retrospection matters")
    args = ap.parse_args()
    out = outdir(args.out)
    base = TrainConfig(blind_expert=args.blind)
    variants = [base] + [replace(base, **d) for d in VARIANTS.values()]
    table = ablation_suite(variants, family_suite, seeds(args.seeds), reference(args.demo_tasks), base)
    (out / "ablation.csv").write_text(table.to_csv())
    for name, c in table.curves().items():
        print(f"{name:24s} {' '.join(f'{x:.2f}' for x in c)}")


if __name__ == "__main__":
    main()
