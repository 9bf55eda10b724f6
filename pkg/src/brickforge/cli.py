"""Command-line surface tying the modules into pipelines.

Every run with the same configuration and inputs is bit-identical in its
outputs; all randomness flows from the --seed flag.  Domain errors exit 1
with a JSON diagnostic envelope {"error": code, "detail": text} on stderr;
usage errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bricks import BrickAssembly, is_connected
from .decode import (
    DecodeBudgets,
    GreedyGeometryPolicy,
    UniformLegalPolicy,
    generate,
)
from .errors import BrickforgeError
from .geometry import PointCloud, VoxelGrid, voxelize_points
from .ldraw import export_ldraw
from .reward import build_preference_pairs, total_reward
from .stability import PhysicsParams, stability_scores
from .tokenizer import detokenize, detokenize_lenient, sequence_stats, tokenize
from .tokens import TokenSequence


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_assembly(path: str) -> BrickAssembly:
    return BrickAssembly.from_json(Path(path).read_text())


def _load_sequence(path: str) -> TokenSequence:
    return TokenSequence.from_text(Path(path).read_text())


def _load_target_grid(path: str, solid_fill: bool) -> VoxelGrid:
    if path.endswith(".json"):
        return VoxelGrid.from_dict(json.loads(Path(path).read_text()))
    return voxelize_points(PointCloud.from_text(Path(path).read_text()), solid_fill)


def _physics(args) -> PhysicsParams:
    return PhysicsParams(brick_weight_per_cell=args.weight,
                         clutch_tension_capacity=args.clutch,
                         slack_tolerance=args.slack_eps)


def _add_physics_flags(parser):
    parser.add_argument("--clutch", type=float, default=10.0,
                        help="clutch tension capacity per stud contact")
    parser.add_argument("--weight", type=float, default=1.0,
                        help="brick weight per footprint cell")
    parser.add_argument("--slack-eps", type=float, default=1e-6,
                        help="equilibrium slack tolerance")


def _cmd_tokenize(args) -> int:
    seq = tokenize(_load_assembly(args.input))
    _emit(seq.to_text() + "\n", args.output)
    return 0


def _cmd_detokenize(args) -> int:
    seq = _load_sequence(args.input)
    if args.lenient:
        assembly, diagnostic = detokenize_lenient(seq)
        if diagnostic:
            sys.stderr.write(json.dumps({"warning": diagnostic}) + "\n")
    else:
        assembly = detokenize(seq)
    _emit(assembly.to_json(), args.output)
    return 0


def _cmd_roundtrip(args) -> int:
    assembly = _load_assembly(args.input)
    seq = tokenize(assembly)
    back = detokenize(seq)
    identical = sorted(back.bricks) == sorted(assembly.bricks)
    print(json.dumps({"identical": identical, "bricks": len(assembly),
                      "tokens": len(seq)}))
    return 0 if identical else 1


def _cmd_validate(args) -> int:
    assembly = _load_assembly(args.input)
    print(json.dumps({"valid": True, "bricks": len(assembly),
                      "connected": is_connected(assembly)}))
    return 0


def _cmd_stability(args) -> int:
    assembly = _load_assembly(args.input)
    report = stability_scores(assembly, _physics(args))
    _emit(report.to_json(), args.output)
    return 0


def _cmd_score(args) -> int:
    target = PointCloud.from_text(Path(args.target).read_text())
    params = _physics(args)
    for path in args.candidates:
        breakdown = total_reward(target, _load_assembly(path), params,
                                 samples=args.samples, seed=args.seed,
                                 solid_fill=not args.no_solid_fill)
        record = {"candidate": path}
        record.update(breakdown.to_dict())
        sys.stdout.write(json.dumps(record) + "\n")
    return 0


def _cmd_prefpairs(args) -> int:
    target = PointCloud.from_text(Path(args.target).read_text())
    params = _physics(args)
    scored = []
    for path in args.candidates:
        assembly = _load_assembly(path)
        breakdown = total_reward(target, assembly, params, samples=args.samples,
                                 seed=args.seed, solid_fill=not args.no_solid_fill)
        scored.append((tokenize(assembly), breakdown))
    condition = args.condition or args.target
    for pair in build_preference_pairs(scored, gap_min=args.gap_min,
                                       floor=args.floor, condition=condition):
        sys.stdout.write(json.dumps(pair.to_dict()) + "\n")
    return 0


def _cmd_generate(args) -> int:
    target = _load_target_grid(args.target, not args.no_solid_fill)
    if args.policy == "uniform":
        policy = UniformLegalPolicy()
    else:
        policy = GreedyGeometryPolicy(temperature=args.temperature)
    budgets = DecodeBudgets(max_resamples_per_tuple=args.max_resamples,
                            max_rollbacks=args.max_rollbacks,
                            max_bricks=args.max_bricks)
    result = generate(policy, target, budgets, _physics(args), seed=args.seed)
    _emit(result.assembly.to_json(), args.output)
    if args.emit_tokens:
        Path(args.emit_tokens).write_text(result.sequence.to_text() + "\n")
    trace = result.trace.to_dict()
    trace["stable"] = result.stable
    sys.stderr.write(json.dumps(trace) + "\n")
    return 0


def _cmd_export_ldraw(args) -> int:
    _emit(export_ldraw(_load_assembly(args.input)), args.output)
    return 0


def _cmd_voxelize(args) -> int:
    cloud = PointCloud.from_text(Path(args.input).read_text())
    grid = voxelize_points(cloud, solid_fill=not args.no_solid_fill)
    _emit(json.dumps(grid.to_dict(), indent=2) + "\n", args.output)
    return 0


def _cmd_stats(args) -> int:
    per_file = []
    for path in args.inputs:
        stats = sequence_stats(_load_sequence(path))
        per_file.append({"file": path, "N": stats.n_bricks, "I": stats.n_eop,
                         "T": stats.length})
    mean_t = sum(s["T"] for s in per_file) / len(per_file)
    print(json.dumps({"sequences": per_file, "mean_T": mean_t}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brickforge",
                                     description="Brick structure tokenization, "
                                                 "stability, rewards, and generation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", help="assembly JSON -> token text")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_tokenize)

    p = sub.add_parser("detokenize", help="token text -> assembly JSON")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--lenient", action="store_true",
                   help="stop at the first structural violation instead of failing")
    p.set_defaults(func=_cmd_detokenize)

    p = sub.add_parser("roundtrip", help="check detokenize(tokenize(A)) == A")
    p.add_argument("input")
    p.set_defaults(func=_cmd_roundtrip)

    p = sub.add_parser("validate", help="check bounds, collisions, connectivity")
    p.add_argument("input")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("stability", help="per-brick stability report")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    _add_physics_flags(p)
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("score", help="reward breakdown per candidate (JSON lines)")
    p.add_argument("--target", required=True, help="target point cloud (.xyz)")
    p.add_argument("candidates", nargs="+")
    p.add_argument("--samples", type=int, default=8192)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-solid-fill", action="store_true")
    _add_physics_flags(p)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("prefpairs", help="preference pairs from scored candidates")
    p.add_argument("--target", required=True)
    p.add_argument("candidates", nargs="+")
    p.add_argument("--gap-min", type=float, default=0.2)
    p.add_argument("--floor", type=float, default=1.0)
    p.add_argument("--condition", default=None)
    p.add_argument("--samples", type=int, default=8192)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-solid-fill", action="store_true")
    _add_physics_flags(p)
    p.set_defaults(func=_cmd_prefpairs)

    p = sub.add_parser("generate", help="constrained generation toward a target")
    p.add_argument("--target", required=True,
                   help="point cloud (.xyz) or voxel grid (.json)")
    p.add_argument("--policy", choices=("uniform", "greedy"), default="greedy")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-resamples", type=int, default=32)
    p.add_argument("--max-rollbacks", type=int, default=16)
    p.add_argument("--max-bricks", type=int, default=400)
    p.add_argument("--no-solid-fill", action="store_true")
    p.add_argument("--emit-tokens", help="also write the token sequence here")
    p.add_argument("-o", "--output")
    _add_physics_flags(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("export-ldraw", help="assembly JSON -> LDraw document")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_export_ldraw)

    p = sub.add_parser("voxelize", help="point cloud -> occupancy grid JSON")
    p.add_argument("input")
    p.add_argument("--no-solid-fill", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_voxelize)

    p = sub.add_parser("stats", help="sequence length statistics")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrickforgeError as err:
        sys.stderr.write(json.dumps({"error": err.code, "detail": str(err)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
