"""Command-line frontend for the teacher -> prune -> distill -> eval pipeline.

Exit codes: 0 success, 1 usage error, 2 validation/schema error,
3 infeasible budget, 4 training divergence.  Machine-readable output goes
to stdout only; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields

from . import training
from .arch import build_resnet_template, load_arch, save_arch, validate
from .errors import (
    ArchHashMismatch,
    BudgetInfeasible,
    CatpressError,
    ChannelUnderflow,
    DivergenceError,
    ParseError,
    SchemaError,
    ShapeError,
)
from .macs import arch_macs
from .pruning import PruneBudget, prune
from .runtime import ExecModel, load_checkpoint
from .tasks import SyntheticTask
from .training import KDConfig, LossWeights, evaluate_model, train_student, train_teacher
from .verify import run_verify

USAGE_EXIT = 1
SCHEMA_EXIT = 2
INFEASIBLE_EXIT = 3
DIVERGENCE_EXIT = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


@dataclass
class RunConfig:
    """Flat training configuration; unknown keys are rejected."""

    seed: int = 0
    epochs: int = 20
    lr: float = training.DEFAULT_LR
    batch_size: int = training.DEFAULT_BATCH
    lambda_adv: float = 1.0
    lambda_recon: float = 100.0
    lambda_dist: float = 1.0
    kd: str = "ka"
    paired: str = "dataset"
    task_seed: int = 7
    image_size: int = training.DESK_IMAGE
    n_train: int = 256
    n_val: int = 64

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ParseError(e.msg, e.lineno, e.colno)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    def task(self) -> SyntheticTask:
        return SyntheticTask(self.task_seed, self.image_size, self.n_train, self.n_val)

    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_adv, self.lambda_recon, self.lambda_dist)


def parse_macs(text: str) -> int:
    """Integer MAC counts with optional k/M/G suffix ('2.56G' -> 2560000000)."""
    t = text.strip()
    scale = 1
    if t and t[-1] in "kMG":
        scale = {"k": 10**3, "M": 10**6, "G": 10**9}[t[-1]]
        t = t[:-1]
    try:
        return int(float(t) * scale)
    except ValueError:
        raise SchemaError(f"cannot parse MACs value {text!r}")


def parse_shape(text: str) -> tuple:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise SchemaError(f"expected CxHxW, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise SchemaError(f"expected CxHxW, got {text!r}")


def _emit(payload: dict, as_json: bool, human: str = None):
    if as_json or human is None:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    for name in ("seed", "epochs"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_arch_new(args):
    kind = {"plain-resnet": "plain", "incres-resnet": "incres"}[args.template]
    arch = build_resnet_template(
        args.base_channels,
        args.blocks,
        args.in_channels,
        args.out_channels,
        kind,
        args.norm,
        input_hw=args.input_size,
    )
    save_arch(arch, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_macs(args):
    arch = load_arch(args.arch)
    errors = validate(arch)
    if errors:
        raise SchemaError(f"invalid arch: {errors[0]}")
    shape = parse_shape(args.input) if args.input else tuple(arch.input_shape)
    cost = arch_macs(arch, shape)
    if args.json:
        _emit(cost.to_dict(), True)
    else:
        for lid, macs in cost.layers:
            print(f"{lid:44s} {macs:>16,d}")
        print(f"{'total':44s} {cost.total:>16,d}")
    return 0


def cmd_train_teacher(args):
    cfg = _load_config(args)
    arch = load_arch(args.arch)
    errors = validate(arch)
    if errors:
        raise SchemaError(f"invalid arch: {errors[0]}")
    _, _, report = train_teacher(
        arch,
        cfg.task(),
        epochs=cfg.epochs,
        lr=cfg.lr,
        seed=cfg.seed,
        weights=LossWeights(cfg.lambda_adv, cfg.lambda_recon, 0.0),
        batch_size=cfg.batch_size,
        out_dir=args.out,
    )
    _emit({"config": asdict(cfg), "report": report.to_dict()}, True)
    return 0


def cmd_prune(args):
    arch, _, _, _ = load_checkpoint(args.teacher)
    shape = parse_shape(args.input) if args.input else tuple(arch.input_shape)
    budget = PruneBudget(parse_macs(args.budget_macs), floor=args.floor, input_shape=shape)
    result = prune(arch, budget)
    save_arch(result.arch, args.out)
    report = result.report_dict()
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as f:
            json.dump(report, f, sort_keys=True, indent=2)
            f.write("\n")
    _emit(report, True)
    return 0


def cmd_train_student(args):
    cfg = _load_config(args)
    if args.kd is not None:
        cfg.kd = args.kd
    if args.paired is not None:
        cfg.paired = args.paired
    for name in ("lambda_adv", "lambda_recon", "lambda_dist"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
    teacher_arch, teacher_params, disc_arch, disc_params = load_checkpoint(args.teacher)
    if disc_arch is None:
        raise SchemaError(f"teacher checkpoint {args.teacher} has no discriminator")
    student_arch = load_arch(args.student_arch)
    errors = validate(student_arch)
    if errors:
        raise SchemaError(f"invalid student arch: {errors[0]}")
    paired_mode = {"dataset": "dataset", "teacher": "teacher_generated"}[cfg.paired]
    _, _, report = train_student(
        ExecModel(teacher_arch, teacher_params),
        ExecModel(disc_arch, disc_params),
        student_arch,
        cfg.task(),
        weights=cfg.weights(),
        kd=KDConfig(mode=cfg.kd),
        epochs=cfg.epochs,
        lr=cfg.lr,
        seed=cfg.seed,
        paired_mode=paired_mode,
        batch_size=cfg.batch_size,
        out_dir=args.out,
    )
    _emit({"config": asdict(cfg), "report": report.to_dict()}, True)
    return 0


def cmd_eval(args):
    arch, params, _, _ = load_checkpoint(args.ckpt)
    task = SyntheticTask(args.seed, image_size=arch.input_shape[1])
    metrics = evaluate_model(ExecModel(arch, params), task)
    _emit(metrics, args.json, f"l1 {metrics['l1']:.6f}  psnr {metrics['psnr']:.3f}")
    return 0


def cmd_verify(args):
    result = run_verify()
    if args.json:
        _emit(result, True)
    else:
        for check in result["checks"]:
            status = "ok" if check["failures"] == 0 else "FAIL"
            print(f"{check['name']:24s} {check['cases']:>5d} cases  {check['failures']:>3d} failures  {status}")
    return 0 if result["ok"] else 2


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="catpress", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("arch", help="architecture tools")
    asub = p.add_subparsers(dest="arch_command", required=True)
    pn = asub.add_parser("new", help="write a generator template")
    pn.add_argument("--template", choices=["plain-resnet", "incres-resnet"], required=True)
    pn.add_argument("--base-channels", type=int, required=True)
    pn.add_argument("--blocks", type=int, required=True)
    pn.add_argument("--out", required=True)
    pn.add_argument("--in-channels", type=int, default=3)
    pn.add_argument("--out-channels", type=int, default=3)
    pn.add_argument("--norm", choices=["instance", "batch"], default="instance")
    pn.add_argument("--input-size", type=int, default=256)
    pn.set_defaults(fn=cmd_arch_new)

    p = sub.add_parser("macs", help="analytic cost of an arch")
    p.add_argument("--arch", required=True)
    p.add_argument("--input", help="CxHxW (defaults to the arch's input shape)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_macs)

    p = sub.add_parser("train-teacher", help="train a teacher from scratch")
    p.add_argument("--arch", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="RunConfig JSON path")
    p.set_defaults(fn=cmd_train_teacher)

    p = sub.add_parser("prune", help="one-step prune a teacher to a budget")
    p.add_argument("--teacher", required=True, help="teacher checkpoint dir")
    p.add_argument("--budget-macs", required=True, help="target MACs (k/M/G suffixes ok)")
    p.add_argument("--floor", type=int, default=8)
    p.add_argument("--input", help="CxHxW cost shape")
    p.add_argument("--out", required=True, help="student arch JSON path")
    p.add_argument("--report", help="prune report JSON path")
    p.set_defaults(fn=cmd_prune)

    p = sub.add_parser("train-student", help="train a pruned student with distillation")
    p.add_argument("--teacher", required=True)
    p.add_argument("--student-arch", required=True)
    p.add_argument("--kd", choices=["ka", "mse", "none"])
    p.add_argument("--lambda-adv", type=float, dest="lambda_adv")
    p.add_argument("--lambda-recon", type=float, dest="lambda_recon")
    p.add_argument("--lambda-dist", type=float, dest="lambda_dist")
    p.add_argument("--paired", choices=["dataset", "teacher"])
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(fn=cmd_train_student)

    p = sub.add_parser("eval", help="validation metrics of a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--seed", type=int, default=7, help="task seed")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("verify", help="run the brute-force oracle sweeps")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BudgetInfeasible as e:
        print(f"error: {e}", file=sys.stderr)
        return INFEASIBLE_EXIT
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return DIVERGENCE_EXIT
    except (SchemaError, ParseError, ShapeError, ChannelUnderflow, ArchHashMismatch) as e:
        print(f"error: {e}", file=sys.stderr)
        return SCHEMA_EXIT
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_EXIT
    except CatpressError as e:
        print(f"error: {e}", file=sys.stderr)
        return SCHEMA_EXIT


if __name__ == "__main__":
    sys.exit(main())
