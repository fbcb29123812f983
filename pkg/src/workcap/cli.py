"""Command-line front end.

    workcap analyze ENV [--agent AGENT]
    workcap work-rate ENV AGENT
    workcap capacity ENV [--out WITNESS]
    workcap build-agent KIND ENV --out FILE
    workcap dsep --variant V --horizon T --a NODES --b NODES [--c NODES]
    workcap verify

Exit codes: 0 success, 1 verification failure, 2 input error.  ``--json``
emits a machine-readable report (12 significant digits, deterministic for
identical inputs and seed).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import agents, bayesnet, capacity, channels, loop, verify
from .errors import WorkcapError
from .info import BITS, NATS


@dataclass(frozen=True)
class RunConfig:
    units: str = BITS
    tol: float = 1e-9
    horizon: int = 4
    seed: int = 0
    memory_size: int = 2
    restarts: int = 32

    def __post_init__(self):
        if self.tol <= 0:
            raise WorkcapError("tol must be positive")
        if self.horizon < 1:
            raise WorkcapError("horizon must be >= 1")


class InputError(Exception):
    """User-facing input problem; maps to exit code 2."""


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _json_num(x) -> float:
    return float(f"{float(x):.12g}")


def _emit(report: dict, as_json: bool, lines: list[str]) -> None:
    if as_json:
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        for line in lines:
            print(line)


def _load_env(path) -> channels.EnvironmentModel:
    try:
        model = channels.load_model(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except WorkcapError as exc:
        raise InputError(f"{path}: {exc}") from None
    if not isinstance(model, channels.EnvironmentModel):
        raise InputError(f"{path}: expected an environment model (hidden_states)")
    return model


def _load_agent(path) -> channels.AgentModel:
    try:
        model = channels.load_model(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except WorkcapError as exc:
        raise InputError(f"{path}: {exc}") from None
    if not isinstance(model, channels.AgentModel):
        raise InputError(f"{path}: expected an agent model (memory_states)")
    return model


def _make_loop(env, agent) -> loop.PerceptActionLoop:
    try:
        return loop.PerceptActionLoop(agent, env)
    except WorkcapError as exc:
        raise InputError(str(exc)) from None


def cmd_analyze(args, config: RunConfig) -> int:
    env = _load_env(args.env)
    noiseless = channels.is_noiseless(env)
    reduced = channels.is_memoryless_invariant(env)
    product = channels.is_product(env, horizon=config.horizon)
    uni = channels.is_unifilar(env)

    report: dict = {
        "hidden_states": len(env.hidden_states),
        "alphabet": list(env.alphabet),
        "noiseless": noiseless,
        "memoryless_invariant": reduced is not None,
        "product": product,
        "product_certificate_horizon": config.horizon,
        "unifilar": uni is not None,
    }
    lines = [
        f"alphabet: {{{', '.join(env.alphabet)}}}; hidden states: {len(env.hidden_states)}",
        f"noiseless: {'yes' if noiseless else 'no'}",
        f"memoryless invariant: {'yes' if reduced is not None else 'no'}",
        f"product: {'yes' if product else 'no'} (horizon-{config.horizon} certificate)",
        f"unifilar: {'yes' if uni is not None else 'no'}",
    ]
    if uni is not None:
        entries = {
            f"{env.alphabet[a]},{env.hidden_states[z]},{env.alphabet[s]}":
                env.hidden_states[uni(a, z, s)]
            for a in range(env.n_symbols)
            for z in range(env.n_hidden)
            for s in range(env.n_symbols)
        }
        report["unifilarity_map"] = entries
        lines.append("unifilarity map (action,state,percept -> next state):")
        lines += [f"  {k} -> {v}" for k, v in sorted(entries.items())]

    if args.agent:
        agent = _load_agent(args.agent)
        pal = _make_loop(env, agent)
        chain = loop.build_global_chain(pal)
        asym = loop._ReachableAsymptotics(chain, min(config.tol, 1e-10), 10 ** 6)
        profile = asym.profile
        pi = chain.initial.probs[chain.reachable] @ profile.cesaro_matrix
        top = np.argsort(pi)[::-1][:5]
        reach_idx = np.flatnonzero(chain.reachable)
        report["global_chain"] = {
            "states": chain.n_states,
            "reachable_states": int(chain.reachable.sum()),
            "period": profile.period_lcm,
            "recurrent_reachable_states": int(profile.recurrent.sum()),
            "cesaro_top_states": {
                str(chain.state_label(int(reach_idx[i]))): _json_num(pi[i]) for i in top
            },
        }
        lines += [
            f"global chain: {chain.n_states} states "
            f"({int(chain.reachable.sum())} reachable), period {profile.period_lcm}, "
            f"{int(profile.recurrent.sum())} recurrent reachable states",
            "Cesàro-weightiest states (memory, action, percept, hidden):",
        ]
        lines += [
            f"  {chain.state_label(int(reach_idx[i]))}: {_fmt(pi[i])}" for i in top
        ]
    _emit(report, args.json, lines)
    return 0


def cmd_work_rate(args, config: RunConfig) -> int:
    env = _load_env(args.env)
    agent = _load_agent(args.agent)
    pal = _make_loop(env, agent)
    report = loop.work_rate(pal, tol=min(config.tol, 1e-10),
                            rounds=config.horizon, base=config.units)
    doc = {
        "units": config.units,
        "per_round": [_json_num(w) for w in report.per_round],
        "rate": _json_num(report.rate),
        "period": report.period_used,
        "residual": _json_num(report.residual),
    }
    lines = [f"W_{t} = {_fmt(w)} {config.units}" for t, w in enumerate(report.per_round)]
    lines.append(
        f"asymptotic rate: {_fmt(report.rate)} {config.units} "
        f"(period {report.period_used}, residual {report.residual:.2e})")
    _emit(doc, args.json, lines)
    return 0


def cmd_capacity(args, config: RunConfig) -> int:
    env = _load_env(args.env)
    result = capacity.compute_capacity(env, tol=config.tol,
                                       memory_size=config.memory_size,
                                       restarts=config.restarts, seed=config.seed)
    value = result.value(config.units)
    doc = {
        "units": config.units,
        "value": _json_num(value),
        "method": result.method,
        "exact": result.exact,
    }
    lines = [f"{_fmt(value)} {config.units} ({result.method})"]
    if result.witness_params:
        p = result.witness_params["action_distribution"]
        doc["witness_action_distribution"] = [_json_num(x) for x in p]
        lines.append("witness action distribution: "
                     + ", ".join(f"p({sym})={_fmt(x)}"
                                 for sym, x in zip(env.alphabet, p)))
    if result.method == capacity.NUMERIC_LOWER_BOUND:
        doc["note"] = "lower bound (bounded agent memory)"
        doc["memory_size"] = config.memory_size
        lines.append(f"note: lower bound with {config.memory_size} memory states")
    if args.out and result.witness is not None:
        channels.save_model(result.witness, args.out)
        doc["witness_file"] = str(args.out)
        lines.append(f"witness agent written to {args.out}")
    _emit(doc, args.json, lines)
    return 0


_AGENT_KINDS = ("identity", "memoryless", "uniform", "last-action", "predictive")


def cmd_build_agent(args, config: RunConfig) -> int:
    env = _load_env(args.env)
    kind = args.kind
    try:
        if kind == "identity":
            agent = agents.build_identity(env.alphabet)
        elif kind == "uniform":
            agent = agents.build_uniform(env.alphabet)
        elif kind in ("memoryless", "last-action"):
            if args.prob:
                p = [float(x) for x in args.prob.split(",")]
            else:
                p = [1.0 / len(env.alphabet)] * len(env.alphabet)
            builder = (agents.build_memoryless if kind == "memoryless"
                       else agents.build_last_action)
            agent = builder(env.alphabet, p)
        elif kind == "predictive":
            agent = agents.build_predictive(agents.build_uniform(env.alphabet), env)
        else:
            raise InputError(f"unknown agent kind {kind!r}")
    except WorkcapError as exc:
        raise InputError(f"cannot build {kind!r} agent: {exc}") from None
    channels.save_model(agent, args.out)
    doc = {"kind": kind, "memory_states": len(agent.memory_states), "file": str(args.out)}
    _emit(doc, args.json,
          [f"{kind} agent with {len(agent.memory_states)} memory states -> {args.out}"])
    return 0


def _node_set(text: str | None) -> tuple[str, ...]:
    if not text:
        return ()
    return tuple(x.strip() for x in text.split(",") if x.strip())


def cmd_dsep(args, config: RunConfig) -> int:
    try:
        dag = bayesnet.build_loop_dag(config.horizon, args.variant)
        separated = bayesnet.d_separated(dag, _node_set(args.a), _node_set(args.b),
                                         _node_set(args.c))
    except (WorkcapError, KeyError) as exc:
        raise InputError(str(exc)) from None
    doc = {
        "variant": args.variant,
        "horizon": config.horizon,
        "a": list(_node_set(args.a)),
        "b": list(_node_set(args.b)),
        "c": list(_node_set(args.c)),
        "d_separated": separated,
    }
    _emit(doc, args.json, ["d-separated" if separated else "not d-separated"])
    return 0


def cmd_verify(args, config: RunConfig) -> int:
    results = verify.run_all(seed=config.seed, tol=config.tol)
    # timings stay out of the JSON report so identical inputs and seed give
    # byte-identical machine-readable output
    doc = {
        "units": config.units,
        "seed": config.seed,
        "checks": [
            {"name": r.name, "passed": r.passed, "detail": r.detail}
            for r in results
        ],
        "all_passed": all(r.passed for r in results),
    }
    width = max(len(r.name) for r in results)
    lines = [
        f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  "
        f"[{r.seconds:6.2f}s]  {r.detail}"
        for r in results
    ]
    lines.append("all checks passed" if doc["all_passed"] else "some checks FAILED")
    _emit(doc, args.json, lines)
    return 0 if doc["all_passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="workcap",
        description="Percept-action loop analysis: channel classes, work rates, "
                    "work capacity, agent construction, d-separation, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--units", choices=[BITS, NATS], default=RunConfig.units)
        p.add_argument("--tol", type=float, default=RunConfig.tol)
        p.add_argument("--horizon", type=int, default=RunConfig.horizon)
        p.add_argument("--seed", type=int, default=RunConfig.seed)
        p.add_argument("--memory-size", type=int, default=RunConfig.memory_size)
        p.add_argument("--restarts", type=int, default=RunConfig.restarts)
        p.add_argument("--json", action="store_true",
                       help="machine-readable JSON output")

    p = sub.add_parser("analyze", help="channel-class report for a model file")
    p.add_argument("env")
    p.add_argument("--agent", help="also analyze the global chain with this agent")
    add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("work-rate", help="per-round and asymptotic work rate")
    p.add_argument("env")
    p.add_argument("agent")
    add_common(p)
    p.set_defaults(func=cmd_work_rate)

    p = sub.add_parser("capacity", help="work capacity (closed form or lower bound)")
    p.add_argument("env")
    p.add_argument("--out", help="write the witness agent model here")
    add_common(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("build-agent", help="construct an agent model file")
    p.add_argument("kind", choices=_AGENT_KINDS)
    p.add_argument("env")
    p.add_argument("--out", required=True)
    p.add_argument("--prob", help="comma-separated action distribution")
    add_common(p)
    p.set_defaults(func=cmd_build_agent)

    p = sub.add_parser("dsep", help="d-separation query on a loop DAG template")
    p.add_argument("--variant", choices=["general", "memoryless_env", "product_env"],
                   default="general")
    p.add_argument("--a", required=True, help="comma-separated node names")
    p.add_argument("--b", required=True, help="comma-separated node names")
    p.add_argument("--c", default="", help="comma-separated conditioning nodes")
    add_common(p)
    p.set_defaults(func=cmd_dsep)

    p = sub.add_parser("verify", help="run the built-in verification suite")
    add_common(p)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(units=args.units, tol=args.tol, horizon=args.horizon,
                           seed=args.seed, memory_size=args.memory_size,
                           restarts=args.restarts)
        return args.func(args, config)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except WorkcapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
