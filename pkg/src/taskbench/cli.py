"""Command-line entry points: run, submit, eval, and batch.

Exit codes: 0 success (including partial batch success), 1 validation or
total failure, 2 connectivity problems; submit propagates the child's own
exit code.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import batch as batch_mod
from . import client, errors, omq, pools, supervisor

DEFAULT_POOL_ROOT = "./pools"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taskbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="validate a selection and start the supervisor")
    p_run.add_argument("--pool-root", default=DEFAULT_POOL_ROOT)
    p_run.add_argument("--task")
    p_run.add_argument("--robot")
    p_run.add_argument("--env", action="append", default=[], help="environment id; repeat for two-scene tasks")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--list-tasks", action="store_true")
    p_run.add_argument("--list-robots", action="store_true")
    p_run.add_argument("--list-envs", action="store_true")
    p_run.set_defaults(handler=_cmd_run)

    p_submit = sub.add_parser("submit", help="run a solution against a live supervisor")
    p_submit.add_argument("--command", required=True)
    p_submit.add_argument("--results", default="results.json")
    p_submit.set_defaults(handler=_cmd_submit)

    p_eval = sub.add_parser("eval", help="score one or more results files")
    p_eval.add_argument("results", nargs="+")
    p_eval.add_argument("--pool-root", default=DEFAULT_POOL_ROOT)
    p_eval.add_argument("--output-dir", default=None, help="where to write reports (default: beside inputs)")
    p_eval.set_defaults(handler=_cmd_eval)

    p_batch = sub.add_parser("batch", help="sweep environments into a performance profile")
    p_batch.add_argument("--pool-root", default=DEFAULT_POOL_ROOT)
    p_batch.add_argument("--task", required=True)
    p_batch.add_argument("--robot", required=True)
    p_batch.add_argument("--envs", required=True, help="comma-separated environment ids")
    p_batch.add_argument("--command", required=True)
    p_batch.add_argument("--seed", type=int, default=0)
    p_batch.add_argument("--output-dir", default="batch_output")
    p_batch.set_defaults(handler=_cmd_batch)

    return parser


def _load_pools(pool_root: str):
    try:
        return pools.load_pool(pool_root)
    except errors.TaskbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def _cmd_run(args) -> int:
    loaded = _load_pools(args.pool_root)
    if loaded is None:
        return 1
    listing = {
        "tasks": args.list_tasks,
        "robots": args.list_robots,
        "environments": args.list_envs,
    }
    if any(listing.values()):
        for kind, wanted in listing.items():
            if wanted:
                for ident in pools.list_options(loaded, kind):
                    print(ident)
        return 0
    if not (args.task and args.robot and args.env):
        print("error: --task, --robot, and --env are required to start a session", file=sys.stderr)
        return 1
    try:
        config = pools.validate_selection(loaded, args.task, args.robot, args.env, seed=args.seed)
    except errors.TaskbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        server = supervisor.serve(config, client.default_addr())
    except errors.AddrInUse as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"supervisor listening on {server.addr}")
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_submit(args) -> int:
    addr = client.default_addr()
    try:
        client.connect(addr)
    except (errors.ConnectionError, errors.SupervisorUnhealthy) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        client.run_submission(args.command, addr=addr, results_path=args.results)
    except errors.SubmissionFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except errors.TaskbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"results written to {args.results}")
    return 0


def _cmd_eval(args) -> int:
    loaded = _load_pools(args.pool_root)
    if loaded is None:
        return 1
    output_dir = Path(args.output_dir) if args.output_dir else None
    reports = []
    for raw_path in args.results:
        results_path = Path(raw_path)
        report_path = output_dir / (results_path.stem + ".report.json") if output_dir else None
        try:
            report, written = omq.evaluate_results_file(results_path, loaded, report_path=report_path)
        except errors.TaskbenchError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        reports.append((results_path, written, report))
        print(f"{results_path}: score {report.score}")
    if len(reports) > 1:
        summary = omq.summarise([r for _, _, r in reports])
        summary["per_report"] = [
            {"results": str(path), "report": str(written), "score": report.score}
            for path, written, report in reports
        ]
        summary_dir = output_dir if output_dir else reports[0][0].parent
        summary_path = Path(summary_dir) / "summary.json"
        import json

        summary_path.parent.mkdir(parents=True, exist_ok=True)
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"summary: mean score {summary['mean_score']} ({summary_path})")
    return 0


def _cmd_batch(args) -> int:
    loaded = _load_pools(args.pool_root)
    if loaded is None:
        return 1
    spec = batch_mod.BatchSpec(
        task_id=args.task,
        robot_id=args.robot,
        env_ids=[e for e in args.envs.split(",") if e],
        command=args.command,
        seed=args.seed,
        output_dir=Path(args.output_dir),
    )
    if not spec.env_ids:
        print("error: --envs must name at least one environment", file=sys.stderr)
        return 1
    try:
        profile = batch_mod.run_batch(spec, loaded, args.pool_root)
    except errors.TaskbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for entry in profile["entries"]:
        print(f"{entry['env_id']}: score {entry['score']}")
    print(f"mean score: {profile['mean_score']}")
    if all(entry["score"] is None for entry in profile["entries"]):
        print("error: every batch entry failed", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
