"""Command line entry point: batch experiments, an interactive teaching
REPL (local or against a running service), and the service itself.

Config files use `key=value` lines (# comments allowed) with the same keys
as the long flags; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys

from .session import SessionError, SessionManager
from .simulation import (SimConfig, run_norm_learning, run_prediction_inference,
                         run_task_experiment)

RESULTS_VERSION = "ownlearn-results v1"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (SessionError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ownlearn")
    sub = parser.add_subparsers(dest="command")

    exp = sub.add_parser("experiment", help="run a simulated experiment")
    exp.add_argument("kind", choices=["norm", "predict", "task"])
    exp.add_argument("--config", help="key=value config file; flags override")
    exp.add_argument("--trials", type=int, default=100)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--fraction", type=float, default=1.0,
                     help="fraction of objects whose permissions are streamed (norm)")
    exp.add_argument("--noise", choices=["off", "on", "baseline"], default="off",
                     help="ownership noise condition (norm)")
    exp.add_argument("--condition", choices=["noneOff", "learnOn", "givenOn"],
                     default="noneOff", help="rule wiring (predict)")
    exp.add_argument("--task", choices=["collectAll", "trashAll"], default="trashAll")
    exp.add_argument("--obedience", type=float, default=0.3,
                     help="obedience threshold for task runs")
    exp.add_argument("--no-learning", action="store_true",
                     help="disable learning (task baseline)")
    exp.add_argument("--out", choices=["csv", "json"], default="csv")
    exp.add_argument("--output", help="write to this path instead of stdout")
    exp.set_defaults(func=cmd_experiment)

    repl = sub.add_parser("repl", help="interactive teaching loop")
    repl.add_argument("--url", help="connect to a running service instead of "
                                    "an in-process session")
    repl.add_argument("--seed", type=int, default=0)
    repl.add_argument("--window", type=float, default=2.0)
    repl.set_defaults(func=cmd_repl)

    serve = sub.add_parser("serve", help="start the session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--ui-dir", help="serve a built frontend from this directory")
    serve.set_defaults(func=cmd_serve)
    return parser


# -- experiments ---------------------------------------------------------------


def cmd_experiment(args) -> int:
    if args.config:
        apply_config_file(args)
    config = SimConfig(n_trials=args.trials, seed=args.seed)
    if args.kind == "norm":
        result = run_norm_learning(config, fraction=args.fraction, noise=args.noise)
    elif args.kind == "predict":
        result = run_prediction_inference(config, condition=args.condition)
    else:
        result = run_task_experiment(config, task=args.task,
                                     learning=not args.no_learning,
                                     obedience=args.obedience)
    text = to_json(result) if args.out == "json" else to_csv(result)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def apply_config_file(args) -> None:
    """Fill flag defaults from a key=value file; explicit flags override."""
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_")
                for a in sys.argv if a.startswith("--")}
    converters = {"trials": int, "seed": int, "fraction": float,
                  "obedience": float, "noise": str, "condition": str, "task": str,
                  "out": str, "output": str}
    with open(args.config) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if key in converters and key not in explicit:
                setattr(args, key, converters[key](value.strip()))


def _columns(result: dict) -> list[str]:
    if result["experiment"] == "task":
        return ["mistakes", "rule_accuracy", "rule_f1",
                "ownership_accuracy", "ownership_f1"]
    return ["accuracy", "f1"]


def _condition_fields(result: dict) -> dict:
    skip = {"rows", "summary", "trials", "seed"}
    return {k: v for k, v in result.items() if k not in skip}


def to_csv(result: dict) -> str:
    columns = _columns(result)
    condition = _condition_fields(result)
    lines = [f"# {RESULTS_VERSION}"]
    header = ["trial"] + list(condition) + columns
    lines.append(",".join(header))
    for row in result["rows"]:
        cells = [str(row["trial"])] + [str(v) for v in condition.values()]
        cells += [_fmt(row[c]) for c in columns]
        lines.append(",".join(cells))
    summary = ["mean"] + [str(v) for v in condition.values()]
    summary += [_fmt(result["summary"][c]) for c in columns]
    lines.append(",".join(summary))
    return "\n".join(lines) + "\n"


def to_json(result: dict) -> str:
    return json.dumps({"version": RESULTS_VERSION, **result}, indent=2,
                      sort_keys=True) + "\n"


def _fmt(value) -> str:
    return f"{value:.6f}"


# -- interactive loop ------------------------------------------------------------


class LocalClient:
    def __init__(self, seed: int, window: float):
        self.manager = SessionManager()
        session = self.manager.create({"seed": seed, "windowSeconds": window})
        self.session_id = session.id

    def submit(self, command: dict) -> dict:
        return self.manager.submit(self.session_id, command)

    def state(self) -> dict:
        return self.manager.query_state(self.session_id)

    def events_since(self, after: int) -> list[dict]:
        return self.manager.events_since(self.session_id, after)


class HttpClient:
    """Thin client for a running service."""

    def __init__(self, url: str, seed: int, window: float):
        import httpx

        self.http = httpx.Client(base_url=url.rstrip("/"), timeout=30.0)
        created = self.http.post("/sessions", json={"seed": seed,
                                                    "windowSeconds": window})
        created.raise_for_status()
        self.session_id = created.json()["sessionId"]

    def submit(self, command: dict) -> dict:
        response = self.http.post(f"/sessions/{self.session_id}/commands",
                                  json=command)
        if response.status_code >= 400:
            raise SessionError(response.json().get("detail", response.text))
        return response.json()["result"]

    def state(self) -> dict:
        response = self.http.get(f"/sessions/{self.session_id}/state")
        response.raise_for_status()
        return response.json()

    def events_since(self, after: int) -> list[dict]:
        response = self.http.get(f"/sessions/{self.session_id}/events",
                                 params={"after": after})
        response.raise_for_status()
        return response.json()["events"]


def cmd_repl(args) -> int:
    if args.url:
        client = HttpClient(args.url, args.seed, args.window)
    else:
        client = LocalClient(args.seed, args.window)
    print(f"session {client.session_id}; type 'help' for commands")
    last_seq = 0
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            return 0
        if not line:
            continue
        try:
            last_seq = repl_dispatch(client, line, last_seq)
        except (SessionError, ValueError) as err:
            print(f"error: {err}")
        if line in ("quit", "exit"):
            return 0


def repl_dispatch(client, line: str, last_seq: int) -> int:
    words = line.split()
    head = words[0]
    if head == "help":
        print("commands: <rule text> | claim <obj> <agent> [p] [exclusive] | "
              "forbid <action> <obj> | allow <action> <obj> | "
              "query own <obj> <agent> | rules | snapshot | run <task> | quit")
    elif head in ("quit", "exit"):
        pass
    elif head in ("forbid", "allow") and len(words) == 3:
        action, obj = words[1], words[2]
        client.submit({"kind": "instruct", "instruction": {"permission": {
            "action": action, "objectId": obj, "polarity": head,
            "certainty": 1.0 if head == "forbid" else 0.0}}})
        print("recorded")
    elif head in ("forbid", "allow"):
        client.submit({"kind": "instruct", "instruction": {"rule": line}})
        print("rule accepted")
    elif head == "claim":
        obj, agent = words[1], words[2]
        probability = float(words[3]) if len(words) > 3 else 1.0
        exclusive = "exclusive" in words[4:]
        client.submit({"kind": "instruct", "instruction": {"claims": [{
            "objectId": obj, "agentId": agent, "probability": probability,
            "exclusive": exclusive}]}})
        print("claim recorded")
    elif head == "query" and len(words) == 4 and words[1] == "own":
        state = client.state()
        obj, agent = words[2], words[3]
        value = state["ownershipPosteriors"].get(obj, {}).get(agent)
        if value is None:
            raise SessionError(f"unknown pair ({obj}, {agent})")
        print(f"P(ownedBy {agent} | {obj}) = {value:.3f}")
    elif head == "rules":
        for rule in client.state()["rules"]:
            print(rule)
    elif head == "snapshot":
        print(json.dumps(client.state(), indent=2, sort_keys=True))
    elif head == "run" and len(words) == 2:
        return repl_run_task(client, words[1], last_seq)
    else:
        raise SessionError(f"unrecognized command {line!r}")
    return last_seq


def repl_run_task(client, task: str, last_seq: int) -> int:
    """Drive a task, pausing at each announce window for an optional
    interrupt instruction (empty line lets the action proceed)."""
    client.submit({"kind": "startTask", "task": task})
    while True:
        for event in client.events_since(last_seq):
            last_seq = event["seq"]
            kind, payload = event["kind"], event["payload"]
            if kind == "actionAnnounced":
                print(f"about to {payload['action']} {payload['objectId']} "
                      f"(forbiddenness {max(payload['forbiddenness'].values()):.2f})")
                line = input("  [enter=proceed, or interrupt e.g. "
                             "'claim o01 alice; forbid trash o01'] ").strip()
                if line:
                    client.submit({"kind": "interrupt",
                                   "instruction": parse_interrupt(line)})
                else:
                    client.submit({"kind": "advance"})
            elif kind == "actionExecuted":
                print(f"executed {payload['action']} on {payload['objectId']}")
            elif kind == "actionRefused":
                rules = "; ".join(payload["violatedRules"]) or "database permission"
                print(f"refused {payload['action']} on {payload['objectId']} ({rules})")
            elif kind == "taskDone":
                print(f"task {payload['task']} done, "
                      f"{payload['mistakes']} correction(s)")
                return last_seq


def parse_interrupt(line: str) -> dict:
    """Semicolon-separated mix of claim/permission/rule parts."""
    instruction: dict = {"claims": []}
    for part in (p.strip() for p in line.split(";")):
        if not part:
            continue
        words = part.split()
        if words[0] == "claim":
            instruction["claims"].append({
                "objectId": words[1], "agentId": words[2],
                "probability": float(words[3]) if len(words) > 3 else 1.0,
                "exclusive": "exclusive" in words[4:]})
        elif words[0] in ("forbid", "allow") and len(words) == 3:
            instruction["permission"] = {
                "action": words[1], "objectId": words[2], "polarity": words[0],
                "certainty": 1.0 if words[0] == "forbid" else 0.0}
        else:
            instruction["rule"] = part
    return instruction


# -- service -----------------------------------------------------------------------


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
