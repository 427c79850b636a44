"""Shared plumbing for the experiment scripts."""

from tunekit.agent import Episode, Objective, OptimizerConfig, local_session, run_episode
from tunekit.benchmarks import get_benchmark
from tunekit.experiment.report import render, report
from tunekit.experiment.store import RunStore, load_runs


def run_grid(out, benchmark, spec, workload, objective: Objective, optimizers: list[OptimizerConfig]):
    """One episode per optimizer config, all appended to ``out``; returns the rendered comparison."""
    runner = get_benchmark(benchmark).run
    with RunStore(out) as store:
        for opt in optimizers:
            episode = Episode(spec, objective, opt, benchmark, workload, store)
            with local_session(spec, runner) as (agent, component):
                results = run_episode(agent, episode, component.run)
            best = min(results, key=lambda r: (objective.canonical(r.objective_value), r.iteration))
            print(f"{opt.kind:>2} {opt.strategy:<14} seed {opt.seed}: best {best.objective_value:.4g} @ {best.iteration}", flush=True)
    return render(report(load_runs(out)), "table")
