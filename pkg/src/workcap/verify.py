"""Built-in verification suite.

Each check reproduces one concrete claim about the bundled environments or
one structural property of the machinery, with its tolerance pinned here.  The
CLI's ``verify`` command prints one PASS/FAIL line per check; the pytest
acceptance module runs the same functions.  All randomness is seeded, so a
fixed seed gives byte-identical reports.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import agents, bayesnet, capacity, channels, info, loop, markov
from .errors import WorkcapError
from .random_models import (random_agent, random_environment, random_kernel,
                            random_memoryless_environment,
                            random_structured_kernel)

FIG5_CAPACITY_NATS = 0.5 * math.log(0.75 + 2 ** -0.5)
FIG5_OPT_ACTION = 2 ** -0.5
FIG5_MEA_RATE_BITS = 1.0 - math.log(256 / 27) / math.log(16)


def bundled_model_path(name: str):
    return resources.files("workcap") / "models" / f"{name}.json"


def load_bundled(name: str) -> channels.Model:
    return channels.loads_model(bundled_model_path(name).read_text())


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


class _Failure(Exception):
    pass


def _require(cond: bool, detail: str):
    if not cond:
        raise _Failure(detail)


def check_fig5_capacity(seed: int = 0, tol: float = 1e-9) -> str:
    """Capacity of the bundled fig5 channel: value within 1e-6 nats, argmax
    within 1e-4."""
    env = load_bundled("fig5")
    result = capacity.compute_capacity(env, tol=tol, seed=seed)
    _require(result.method == capacity.CLOSED_FORM_MEMORYLESS,
             f"dispatched to {result.method}")
    err = abs(result.value_nats - FIG5_CAPACITY_NATS)
    _require(err < 1e-6, f"capacity off by {err:.3g} nats")
    p0 = result.witness_params["action_distribution"][0]
    _require(abs(p0 - FIG5_OPT_ACTION) < 1e-4,
             f"argmax p(0) = {p0}, expected {FIG5_OPT_ACTION}")
    return (f"value {result.value_nats:.9f} nats "
            f"(err {err:.2e}), p(0) = {p0:.6f}")


def check_fig5_mea_rate(seed: int = 0, tol: float = 1e-9) -> str:
    """Uniform memoryless agent on the fig5 channel: rate within 1e-9 bits."""
    env = load_bundled("fig5")
    agent = agents.build_uniform(env.alphabet)
    report = loop.work_rate(loop.PerceptActionLoop(agent, env), tol=min(tol, 1e-12))
    err = abs(report.rate - FIG5_MEA_RATE_BITS)
    _require(err < 1e-9, f"rate off by {err:.3g} bits")
    return f"rate {report.rate:.12f} bits (err {err:.2e})"


def check_identity_and_noiseless(seed: int = 0, tol: float = 1e-9) -> str:
    """Identity agent extracts nothing (20 random environments, 1e-10);
    noiseless capacity is exactly zero."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(20):
        n_sym = 2 + (i % 2)
        n_hid = 1 + (i % 3)
        env = random_environment(rng, n_symbols=n_sym, n_hidden=n_hid)
        agent = agents.build_identity(env.alphabet)
        report = loop.work_rate(loop.PerceptActionLoop(agent, env),
                                tol=1e-13, rounds=0, base="nats")
        worst = max(worst, abs(report.rate))
    _require(worst <= 1e-10, f"identity rate as large as {worst:.3g}")
    noiseless = capacity.capacity_noiseless(load_bundled("identity"))
    _require(noiseless.value_nats == 0.0,
             f"noiseless capacity {noiseless.value_nats!r} != 0")
    return f"worst |identity rate| {worst:.2e} nats; noiseless capacity exactly 0"


def check_golden_mean_realizability(seed: int = 0, tol: float = 1e-9) -> str:
    """Golden-mean source: capacity 1/3 bit within 1e-5 and the constructed
    predictive agent attains it within 1e-5."""
    env = load_bundled("golden_mean")
    result = capacity.capacity_unifilar_product(env, tol=tol)
    err = abs(result.value_bits - 1.0 / 3.0)
    _require(err < 1e-5, f"capacity off by {err:.3g} bits")
    witness_rate = loop.work_rate(
        loop.PerceptActionLoop(result.witness, env), tol=min(tol, 1e-12)).rate
    gap = abs(witness_rate - result.value_bits)
    _require(gap < 1e-5, f"witness misses capacity by {gap:.3g} bits")
    return (f"capacity {result.value_bits:.8f} bits (err {err:.2e}); "
            f"witness rate within {gap:.2e}")


def check_fig5_exclusivity(seed: int = 0, tol: float = 1e-9) -> str:
    """Mutual exclusivity of the mea / predictive / efficient classes on the
    fig5 channel, via classify_agent_sets on three agents."""
    env = load_bundled("fig5")
    cap_nats = capacity.capacity_memoryless(env).value_nats

    uniform = capacity.classify_agent_sets(
        env, agents.build_uniform(env.alphabet), horizon=4,
        reference_capacity_nats=cap_nats)
    _require(uniform.in_mea, "uniform agent not recognized as mea")
    _require(uniform.pred_estimate > 1e-3, "uniform agent looks predictive")
    _require(uniform.is_efficient_vs is False, "uniform agent looks efficient")
    _require(abs(uniform.work_rate - FIG5_MEA_RATE_BITS) < 1e-9,
             "uniform agent rate off")

    last = agents.build_last_action(env.alphabet, [0.5, 0.5])
    last_pal = loop.PerceptActionLoop(last, env)
    for t in range(4):
        score = loop.predictiveness_score(last_pal, t)
        _require(abs(score) <= 1e-10, f"last-action score {score:.3g} at t={t}")
    last_report = capacity.classify_agent_sets(
        env, last, horizon=4, reference_capacity_nats=cap_nats)
    _require(not last_report.in_mea, "last-action agent should not be mea")
    _require(last_report.mean_action_entropy_nats <= 1e-10,
             "last-action agent has nonzero action entropy")
    _require(last_report.work_rate <= 1e-12, "last-action rate not <= 0")

    opt = capacity.classify_agent_sets(
        env, agents.build_memoryless(env.alphabet, [FIG5_OPT_ACTION, 1 - FIG5_OPT_ACTION]),
        horizon=4, tol=1e-6, reference_capacity_nats=cap_nats)
    _require(opt.is_efficient_vs is True, "optimal agent not efficient")
    _require(not opt.in_mea, "optimal agent should not be mea")
    hb = -(FIG5_OPT_ACTION * math.log(FIG5_OPT_ACTION)
           + (1 - FIG5_OPT_ACTION) * math.log(1 - FIG5_OPT_ACTION))
    _require(abs(opt.mean_action_entropy_nats - hb) < 1e-9,
             "optimal agent action entropy off")
    _require(opt.pred_estimate > 1e-3, "optimal agent looks predictive")
    return ("uniform: mea, not pred, not eff; last-action: pred, rate <= 0, "
            "not mea; p=1/sqrt(2): eff, not mea, not pred")


def check_global_markov(seed: int = 0, tol: float = 1e-9) -> str:
    """Exact T=4 trajectory tables of 10 random loops satisfy the one-step
    Markov and homogeneity conditions within 1e-12."""
    rng = np.random.default_rng(seed)
    worst_markov = 0.0
    worst_homog = 0.0
    for i in range(10):
        n_m = 1 + (i % 3)
        n_z = 1 + ((i + 1) % 3)
        pal = loop.PerceptActionLoop(random_agent(rng, 2, n_m),
                                     random_environment(rng, 2, n_z))
        traj = loop.trajectory_distribution(pal, 4).joint
        n_u = int(np.prod(pal.shape))
        flat = traj.probs.reshape(n_u, n_u, n_u, n_u)
        kernel = loop.build_global_chain(pal).kernel.probs

        # Markov: p(u_t | whole past) equals p(u_t | u_{t-1})
        for lhs, rhs in (
            (flat.sum(axis=3), flat.sum(axis=(0, 3))),    # p(u2 | u0, u1) vs p(u2 | u1)
            (flat, flat.sum(axis=(0, 1))),                 # p(u3 | u0:3) vs p(u3 | u2)
        ):
            joint_hist = lhs.sum(axis=-1)
            cond_hist = np.divide(lhs, joint_hist[..., None],
                                  out=np.zeros_like(lhs), where=joint_hist[..., None] > 0)
            marg_hist = rhs.sum(axis=-1)
            cond_marg = np.divide(rhs, marg_hist[..., None],
                                  out=np.zeros_like(rhs), where=marg_hist[..., None] > 0)
            pad = (1,) * (lhs.ndim - rhs.ndim)
            diff = np.abs(cond_hist - cond_marg.reshape(pad + rhs.shape))
            mask = joint_hist[..., None] > 0
            worst_markov = max(worst_markov, float(diff[np.broadcast_to(mask, diff.shape)].max()))

        # homogeneity: each step's conditional equals the one-step kernel
        for pair in (flat.sum(axis=(2, 3)), flat.sum(axis=(0, 3)), flat.sum(axis=(0, 1))):
            source = pair.sum(axis=1)
            cond = np.divide(pair, source[:, None],
                             out=np.zeros_like(pair), where=source[:, None] > 0)
            positive = source > 0
            worst_homog = max(worst_homog,
                              float(np.abs(cond[positive] - kernel[positive]).max()))
    _require(worst_markov <= 1e-12, f"Markov deviation {worst_markov:.3g}")
    _require(worst_homog <= 1e-12, f"homogeneity deviation {worst_homog:.3g}")
    return f"worst Markov dev {worst_markov:.2e}, homogeneity dev {worst_homog:.2e}"


def check_cesaro_machinery(seed: int = 0, tol: float = 1e-9) -> str:
    """On 20 random chains (n <= 6): the Cesàro matrix matches brute-force
    time averaging within 1e-3, and pi = f/m within 1e-6 wherever the
    first-passage truncation residual is below 1e-8."""
    rng = np.random.default_rng(seed)
    worst_avg = 0.0
    worst_fm = 0.0
    checked_fm = 0
    for i in range(20):
        n = 2 + (i % 5)
        if i % 4 == 3:
            kernel = random_structured_kernel(rng, n)
        else:
            kernel = random_kernel(rng, n)
        profile = markov.asymptotic_profile(kernel)
        d = profile.period_lcm

        N = 20_000 * d
        P = kernel.probs
        power = np.eye(n)
        acc = np.zeros((n, n))
        for _ in range(N):
            acc += power
            power = power @ P
        worst_avg = max(worst_avg,
                        float(np.abs(acc / N - profile.cesaro_matrix).max()))

        fp = markov.first_passage(kernel, horizon=3000)
        for j in range(n):
            if not profile.recurrent[j]:
                continue
            for i_state in range(n):
                if fp.residual[i_state, j] < 1e-8:
                    lhs = profile.cesaro_matrix[i_state, j]
                    rhs = fp.hit_prob[i_state, j] / fp.mean_return[j]
                    worst_fm = max(worst_fm, abs(lhs - rhs))
                    checked_fm += 1
    _require(worst_avg <= 1e-3, f"Cesàro brute-force gap {worst_avg:.3g}")
    _require(checked_fm > 0, "no (i, j) pair reached residual < 1e-8")
    _require(worst_fm <= 1e-6, f"pi = f/m gap {worst_fm:.3g}")
    return (f"brute-force gap {worst_avg:.2e}; f/m gap {worst_fm:.2e} "
            f"over {checked_fm} pairs")


def check_subadditivity(seed: int = 0, tol: float = 1e-9) -> str:
    """50 random binary memoryless channel pairs satisfy cascade
    subadditivity with closed-form capacities (slack 1e-8)."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(50):
        env1 = random_memoryless_environment(rng)
        env2 = random_memoryless_environment(rng)
        report = capacity.check_subadditivity(env1, env2)
        slack_used = report.value_cascade_nats - (
            report.value_first_nats + report.value_second_nats)
        worst = max(worst, slack_used)
        _require(report.holds, f"violated by {slack_used:.3g} nats")
    return f"max C(cascade) - (C1 + C2) = {worst:.3e} nats over 50 pairs"


def check_dsep_soundness(seed: int = 0, tol: float = 1e-9) -> str:
    """>= 200 sampled d-separated triples across the three templates have
    exact CMI < 1e-9; known-dependent triples exceed 1e-3 (negative controls)."""
    rng = np.random.default_rng(seed)
    total = 0
    fig5 = load_bundled("fig5")
    golden = load_bundled("golden_mean")

    jobs = []
    for k in range(3):
        jobs.append(("general", loop.PerceptActionLoop(
            random_agent(rng, 2, 2), random_environment(rng, 2, 2))))
    jobs.append(("memoryless_env", loop.PerceptActionLoop(
        random_agent(rng, 2, 2), random_memoryless_environment(rng))))
    jobs.append(("memoryless_env", loop.PerceptActionLoop(
        agents.build_uniform(fig5.alphabet), fig5)))
    jobs.append(("product_env", loop.PerceptActionLoop(
        random_agent(rng, 2, 2), random_environment(rng, 2, 2, action_invariant=True))))
    jobs.append(("product_env", loop.PerceptActionLoop(
        random_agent(rng, 2, 2), golden)))

    for variant, pal in jobs:
        report = bayesnet.validate_compatibility(
            pal, horizon=3, n_triples=40, seed=int(rng.integers(1 << 30)),
            variant=variant)
        _require(report.ok, f"{variant}: {len(report.violations)} CMI violations")
        total += report.n_checked
    _require(total >= 200, f"only {total} separated triples sampled")

    # negative controls: one known-dependent pair per template
    controls = [
        ("general", loop.PerceptActionLoop(agents.build_uniform(fig5.alphabet), fig5),
         ("A0",), ("S0",)),
        ("memoryless_env", loop.PerceptActionLoop(agents.build_uniform(fig5.alphabet), fig5),
         ("A0",), ("S0",)),
        ("product_env", loop.PerceptActionLoop(agents.build_uniform(golden.alphabet), golden),
         ("S0",), ("S1",)),
    ]
    for variant, pal, a, b in controls:
        dag = bayesnet.build_loop_dag(3, variant)
        _require(not bayesnet.d_separated(dag, a, b, ()),
                 f"{variant}: control pair unexpectedly separated")
        joint = loop.trajectory_distribution(pal, 3).joint
        cmi = info.conditional_mutual_information(joint, a, b, (), base="nats")
        _require(cmi > 1e-3, f"{variant}: control CMI only {cmi:.3g}")
    return f"{total} separated triples all below 1e-9; 3 negative controls above 1e-3"


ALL_CHECKS = (
    ("fig5_capacity", check_fig5_capacity),
    ("fig5_mea_work_rate", check_fig5_mea_rate),
    ("identity_and_noiseless", check_identity_and_noiseless),
    ("golden_mean_realizability", check_golden_mean_realizability),
    ("fig5_agent_set_exclusivity", check_fig5_exclusivity),
    ("global_markov_chain", check_global_markov),
    ("cesaro_machinery", check_cesaro_machinery),
    ("cascade_subadditivity", check_subadditivity),
    ("d_separation_soundness", check_dsep_soundness),
)


def run_check(name: str, func, seed: int = 0, tol: float = 1e-9) -> CheckResult:
    start = time.perf_counter()
    try:
        detail = func(seed=seed, tol=tol)
        passed = True
    except _Failure as exc:
        detail, passed = str(exc), False
    except WorkcapError as exc:
        detail, passed = f"{type(exc).__name__}: {exc}", False
    return CheckResult(name, passed, detail, time.perf_counter() - start)


def run_all(seed: int = 0, tol: float = 1e-9) -> list[CheckResult]:
    return [run_check(name, func, seed=seed, tol=tol) for name, func in ALL_CHECKS]
