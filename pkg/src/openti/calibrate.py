"""Genetic-algorithm calibration of the trip table against link counts.

The chromosome is the flattened off-diagonal trip cells (one gene per
origin/destination/hour). Fitness is the negated RMSE between simulated and
observed hourly counts at the observation links; every fitness run uses the
same simulator seed, so the objective is deterministic and elitism makes the
best RMSE non-increasing across generations.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import SimFailure
from .sim import run as sim_run


@dataclass(frozen=True)
class GaParams:
    population: int = 50
    generations: int = 100
    tournament_k: int = 3
    crossover_rate: float = 0.5
    mutation_sigma_frac: float = 0.10
    elitism: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must be in [0, population)")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must be in [0, 1]")
        if self.mutation_sigma_frac < 0:
            raise ValueError("mutation_sigma_frac must be >= 0")
        if self.tournament_k < 1:
            raise ValueError("tournament_k must be >= 1")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")


def _gene_slots(od):
    slots = []
    for h in range(len(od.hours)):
        for o in range(od.zones):
            for d in range(od.zones):
                if o != d:
                    slots.append((o, d, h))
    return slots


def genes_from_od(od) -> np.ndarray:
    return np.array([od.trips[o, d, h] for o, d, h in _gene_slots(od)], dtype=float)


def od_from_genes(od_template, genes) -> object:
    trips = np.array(od_template.trips, copy=True)
    for value, (o, d, h) in zip(genes, _gene_slots(od_template)):
        trips[o, d, h] = max(float(value), 0.0)
    return od_template.copy_with(trips)


def simulated_counts(scenario, observations) -> dict:
    """(link_id, hour) -> simulated count, zero-filled for observed pairs."""
    _, metrics = sim_run(scenario)
    out = {}
    for obs in observations:
        per_hour = metrics.per_link_counts.get(obs.link_id, {})
        for hour in obs.hours:
            out[(obs.link_id, hour)] = per_hour.get(hour, 0)
    return out


def count_rmse(scenario, observations) -> float:
    sim = simulated_counts(scenario, observations)
    errors = []
    for obs in observations:
        for hour, observed in zip(obs.hours, obs.counts):
            errors.append(sim[(obs.link_id, hour)] - observed)
    return math.sqrt(sum(e * e for e in errors) / len(errors))


def optimize_demand(seed_od, observations, scenario, ga: GaParams, out_dir=None):
    """Evolve the trip table to match the observed counts.

    Returns (best ODMatrix, history) where history rows are
    (generation, best_rmse, mean_rmse) and best_rmse never increases.
    """
    if not observations:
        raise ValueError("at least one observation series is required")
    known_links = {link.link_id for link in scenario.network.links}
    for obs in observations:
        if obs.link_id not in known_links:
            raise ValueError(f"observation link {obs.link_id} not in the network")

    rng = np.random.default_rng(ga.seed)
    base = genes_from_od(seed_od)
    n_genes = base.size

    population = [base.copy()]
    for _ in range(ga.population - 1):
        population.append(np.clip(base * rng.uniform(0.3, 1.7, n_genes), 0.0, None))

    def evaluate(genes, generation):
        candidate = scenario.with_od(od_from_genes(seed_od, genes))
        try:
            return count_rmse(candidate, observations)
        except Exception as exc:  # noqa: BLE001 - annotated and re-raised
            raise SimFailure(generation, exc)

    def mutate(genes):
        sigma = np.maximum(np.abs(genes) * ga.mutation_sigma_frac, 1.0)
        return np.clip(genes + rng.normal(0.0, 1.0, n_genes) * sigma, 0.0, None)

    def crossover(a, b):
        mask = rng.random(n_genes) < ga.crossover_rate
        child = a.copy()
        child[mask] = b[mask]
        return child

    def tournament(scores):
        best = None
        for _ in range(ga.tournament_k):
            idx = int(rng.integers(0, ga.population))
            if best is None or scores[idx] < scores[best]:
                best = idx
        return best

    history = []
    best_genes, best_rmse = None, None
    for generation in range(ga.generations):
        scores = [evaluate(genes, generation) for genes in population]
        order = sorted(range(ga.population), key=lambda i: (scores[i], i))
        gen_best = scores[order[0]]
        if best_rmse is None or gen_best < best_rmse:
            best_rmse = gen_best
            best_genes = population[order[0]].copy()
        history.append((generation, best_rmse, float(np.mean(scores))))

        next_pop = [population[i].copy() for i in order[: ga.elitism]]
        while len(next_pop) < ga.population:
            a = population[tournament(scores)]
            b = population[tournament(scores)]
            next_pop.append(mutate(crossover(a, b)))
        population = next_pop

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(
            os.path.join(out_dir, "ga_history.csv"), "w", encoding="utf-8", newline="\n"
        ) as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["generation", "best_rmse", "mean_rmse"])
            for generation, best, mean in history:
                writer.writerow([generation, f"{best:.6f}", f"{mean:.6f}"])

    return od_from_genes(seed_od, best_genes), history
